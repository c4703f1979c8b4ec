//! One function per subcommand. Each reads upstream runs from the store,
//! writes its artifacts into a fresh run directory, and returns the run id.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use cohmark::biomarker::{association_table, biomarker_records, write_association_tables, AssociationTable, Biomarker};
use cohmark::ingest::{load_cohort, Corpus, Diagnosis, Dialect, IngestReport, TranscriptParser};
use cohmark::marker::{
    adjacent_scores, cohort_table, disruptive_analysis, narrative_markers, subject_series, write_cohort_table,
    write_disruptive_table, write_marker_table, CohortOptions, CohortTable, DisruptiveReport, SeriesSet,
};
use cohmark::metrics::{
    average_rows, fmt_score, metrics_row, scored, write_metrics_table, write_table, MetricsRow, NULL_MARKER,
    METRICS_HEADER,
};
use cohmark::models::grid::write_trials;
use cohmark::models::{
    build_scorer, corpus_texts, encoder_from_id, evaluate_loss, grid_search, score_pairs, train, train_generative,
    Checkpoint, Direction, Family, OptimizerKind, PairScorer, ScorerConfig,
};
use cohmark::pairs::{enumerate_corpus, export_pairs, split_by_subject, Split, SplitManifest, UtterancePair};
use cohmark::seed;
use cohmark::stats::MwMode;
use cohmark::synthetic::{generate, generate_cohort, to_transcript, CohortSpec, SyntheticSpec};
use serde::{Deserialize, Serialize};

use crate::config::Config;
use crate::plot::series_svg;
use crate::store::{Finished, Run, Store};

const CORPUS: &str = "corpus.json";
const SPLIT: &str = "split.json";
const MODEL: &str = "model.json";
const SERIES: &str = "series.json";
const ADJACENT: &str = "adjacent_scores.json";

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Corpus::from_json(&text)?)
}

fn merge_reports(into: &mut IngestReport, r: IngestReport) {
    into.files += r.files;
    into.utterances += r.utterances;
    into.dropped_empty += r.dropped_empty;
    into.exclusion_coded += r.exclusion_coded;
    into.metadata_rows_applied += r.metadata_rows_applied;
    into.warnings.extend(r.warnings);
    into.per_file.extend(r.per_file);
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Transcript directories (searched recursively) or single files.
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    /// Transcript dialect: `chat` or `kv`.
    #[arg(long)]
    pub dialect: Option<String>,
    /// Comma-separated speaker codes whose tiers are kept.
    #[arg(long, value_delimiter = ',')]
    pub speakers: Option<Vec<String>>,
    /// Metadata table whose values override transcript headers.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
}

pub fn ingest(store: &Store, mut config: Config, args: IngestArgs) -> Result<String> {
    if let Some(d) = args.dialect {
        config.ingest.dialect = d;
    }
    if let Some(s) = args.speakers {
        config.ingest.speakers = s;
    }
    if args.metadata.is_some() {
        config.ingest.metadata = args.metadata;
    }
    let dialect: Dialect = config.ingest.dialect.parse()?;
    let parser = TranscriptParser::new(dialect).speakers(config.ingest.speakers.clone());
    let mut run = store.create("ingest", &config)?;

    let mut narratives = Vec::new();
    let mut report = IngestReport::default();
    for path in &args.paths {
        if path.is_dir() {
            let (c, r) = load_cohort(path, None, &parser)?;
            narratives.extend(c.narratives().iter().cloned());
            merge_reports(&mut report, r);
            for f in cohmark::ingest::transcript_files(path)? {
                run.input(&f)?;
            }
        } else {
            let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let stem = path.file_stem().and_then(|s| s.to_str());
            let (mut n, mut r) = parser
                .parse(&raw, stem)
                .with_context(|| format!("parsing {}", path.display()))?;
            n.source = Some(path.display().to_string());
            r.source = n.source.clone();
            report.files += 1;
            report.utterances += r.kept_utterances;
            report.dropped_empty += r.dropped_empty;
            report.exclusion_coded += r.exclusion_coded;
            report.per_file.push(r);
            narratives.push(n);
            run.input(path)?;
        }
    }
    let mut corpus = Corpus::new(narratives)?;
    if let Some(table) = &config.ingest.metadata {
        let rows = cohmark::ingest::read_metadata_table(table)?;
        let mut ns = corpus.narratives().to_vec();
        for n in &mut ns {
            if let Some(row) = rows
                .iter()
                .find(|r| r.subject_id == n.meta.subject_id && r.visit_index == n.meta.visit_index)
            {
                row.apply(&mut n.meta);
                n.meta
                    .validate()
                    .map_err(|m| anyhow::anyhow!("{}: {}: {m}", table.display(), n.id()))?;
                report.metadata_rows_applied += 1;
            }
        }
        corpus = Corpus::new(ns)?;
        run.input(table)?;
    }
    report.narratives = corpus.len();
    report.subjects = corpus.by_subject().len();
    let path = run.output(CORPUS)?;
    fs::write(&path, corpus.to_json()?).with_context(|| format!("writing {}", path.display()))?;
    run.write_json("ingest_report.json", &report)?;
    println!(
        "narratives={} subjects={} utterances={} exclusion_coded={} dropped={} errors=0",
        report.narratives, report.subjects, report.utterances, report.exclusion_coded, report.dropped_empty
    );
    run.finish()
}

#[derive(Debug, Args)]
pub struct PairsArgs {
    /// Ingest run to split.
    #[arg(long)]
    pub from: String,
    /// Train, validation and test subject fractions, comma-separated.
    #[arg(long, value_delimiter = ',', num_args = 3)]
    pub split: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct PairCounts {
    split: String,
    subjects: usize,
    narratives: usize,
    coherent: usize,
    incoherent: usize,
}

pub fn pairs(store: &Store, mut config: Config, args: PairsArgs) -> Result<String> {
    if let Some(s) = args.split {
        config.pairs.split = [s[0], s[1], s[2]];
    }
    let upstream = store.require(&args.from, "ingest")?;
    let mut run = store.create("pairs", &config)?;
    let corpus = load_corpus(&run.uses("corpus", &upstream, CORPUS)?)?;
    let manifest = split_by_subject(&corpus, config.pairs.split, config.seed)?;
    let path = run.output(SPLIT)?;
    fs::write(&path, manifest.to_json()?)?;
    let mut counts = Vec::new();
    for split in Split::ALL {
        let part = manifest.select(&corpus, split);
        let set = enumerate_corpus(&part);
        let all: Vec<UtterancePair> = set.all().cloned().collect();
        export_pairs(&all, &part, &run.output(&format!("pairs_{split}.tsv"))?)?;
        counts.push(PairCounts {
            split: split.to_string(),
            subjects: part.by_subject().len(),
            narratives: part.len(),
            coherent: set.coherent.len(),
            incoherent: set.incoherent.len(),
        });
    }
    run.write_json("pair_counts.json", &counts)?;
    for c in &counts {
        println!(
            "split={} subjects={} narratives={} coherent={} incoherent={}",
            c.split, c.subjects, c.narratives, c.coherent, c.incoherent
        );
    }
    run.finish()
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Pairs run whose split is used.
    #[arg(long)]
    pub from: String,
    #[arg(long)]
    pub family: Option<String>,
    /// Encoder identifier, or language-model identifier for `generative`.
    #[arg(long)]
    pub backend: Option<String>,
    #[arg(long)]
    pub margin: Option<f64>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub optimizer: Option<String>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
    /// Grid-search trials; 0 skips the search.
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub direction: Option<String>,
    /// Fine-tune the generative language model before scoring.
    #[arg(long)]
    pub finetune: bool,
}

/// What a train run produced: checkpoints (relative paths) for trained
/// families, none for zero-shot scorers.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct TrainedModel {
    config: ScorerConfig,
    checkpoints: Vec<String>,
}

fn apply_train_args(config: &mut Config, args: &TrainArgs) -> Result<()> {
    let m = &mut config.model;
    if let Some(f) = &args.family {
        let family: Family = f.parse()?;
        let lm = family == Family::Generative;
        let backend_is_lm = !(m.backend.starts_with("hash") || m.backend.starts_with("vectors"));
        if lm != backend_is_lm {
            m.backend = ScorerConfig::for_family(family).backend;
        }
        m.family = family;
    }
    if let Some(b) = &args.backend {
        m.backend = b.clone();
    }
    if let Some(x) = args.margin {
        m.margin = x;
    }
    if let Some(x) = args.learning_rate {
        m.learning_rate = x;
    }
    if let Some(x) = args.batch_size {
        m.batch_size = x;
    }
    if let Some(x) = &args.optimizer {
        m.optimizer = x.parse::<OptimizerKind>()?;
    }
    if let Some(x) = args.max_epochs {
        m.max_epochs = x;
    }
    if let Some(x) = args.runs {
        m.runs = x;
    }
    if let Some(x) = &args.direction {
        m.direction = x.parse::<Direction>()?;
    }
    if args.finetune {
        m.finetune = true;
    }
    if let Some(t) = args.trials {
        config.grid.trials = t;
    }
    config.validate()
}

struct Splits {
    corpus: Corpus,
    manifest: SplitManifest,
}

impl Splits {
    fn part(&self, split: Split) -> Corpus {
        self.manifest.select(&self.corpus, split)
    }
}

/// Corpus and split of the pairs run upstream of `run_id`, recorded as
/// inputs of `run`.
fn load_splits(store: &Store, run: &mut Run, run_id: &str) -> Result<Splits> {
    let pairs = store.require(run_id, "pairs")?;
    let ingest = store.require(pairs.id(), "ingest")?;
    let manifest = SplitManifest::from_json(&fs::read_to_string(run.uses("split", &pairs, SPLIT)?)?)?;
    let corpus = load_corpus(&run.uses("corpus", &ingest, CORPUS)?)?;
    Ok(Splits { corpus, manifest })
}

fn test_pairs(test: &Corpus) -> Vec<UtterancePair> {
    enumerate_corpus(test).all().cloned().collect()
}

fn evaluate_scorer(
    name: &str,
    scorer: &dyn PairScorer,
    corpus: &Corpus,
    pairs: &[UtterancePair],
    loss: Option<f64>,
) -> Result<MetricsRow> {
    let scores = score_pairs(scorer, corpus, pairs)?;
    Ok(metrics_row(name, &scored(pairs, &scores, name)?, loss)?)
}

/// Averaged row first, then one row per run.
fn metrics_with_average(family: Family, rows: Vec<MetricsRow>) -> Result<Vec<MetricsRow>> {
    if rows.len() < 2 {
        return Ok(rows);
    }
    let mut out = vec![average_rows(family.as_str(), &rows)?];
    out.extend(rows);
    Ok(out)
}

pub fn train_cmd(store: &Store, mut config: Config, args: TrainArgs) -> Result<String> {
    apply_train_args(&mut config, &args)?;
    let mut run = store.create("train", &config)?;
    let splits = load_splits(store, &mut run, &args.from)?;
    let (tr, va, te) = (splits.part(Split::Train), splits.part(Split::Validation), splits.part(Split::Test));
    let base = config.model.clone();
    let loss_seed = seed::derive(config.seed, "test-loss");
    let pairs = test_pairs(&te);
    let mut model = TrainedModel {
        config: base.clone(),
        checkpoints: Vec::new(),
    };
    let mut rows = Vec::new();
    match base.family {
        Family::Classifier | Family::Cnn | Family::Discriminative => {
            let backend = encoder_from_id(&base.backend)?;
            let chosen = if config.grid.trials > 0 {
                let (best, trials) = grid_search(
                    &base,
                    &config.grid.pool,
                    config.grid.trials,
                    backend.as_ref(),
                    &tr,
                    &va,
                    config.seed,
                )?;
                write_trials(&trials, &run.output("trials.tsv")?)?;
                best
            } else {
                base.clone()
            };
            let checkpoints = train(&chosen, backend.as_ref(), &tr, &va, config.seed)?;
            for (r, ckpt) in checkpoints.iter().enumerate() {
                let name = format!("checkpoints/run-{r}.json");
                ckpt.save(&run.output(&name)?)?;
                model.checkpoints.push(name);
                let scorer = build_scorer(&chosen, Some(ckpt), &[])?;
                let loss = evaluate_loss(ckpt, &te, loss_seed)?;
                rows.push(evaluate_scorer(
                    &format!("{}/run-{r}", chosen.family),
                    scorer.as_ref(),
                    &te,
                    &pairs,
                    Some(loss),
                )?);
            }
            model.config = chosen;
        }
        Family::Generative if base.finetune => {
            let ckpt = train_generative(&base, &tr, &va)?;
            let name = "checkpoints/run-0.json".to_string();
            ckpt.save(&run.output(&name)?)?;
            model.checkpoints.push(name);
            let scorer = build_scorer(&base, Some(&ckpt), &[])?;
            let loss = evaluate_loss(&ckpt, &te, loss_seed)?;
            rows.push(evaluate_scorer(base.family.as_str(), scorer.as_ref(), &te, &pairs, Some(loss))?);
        }
        Family::Generative | Family::SimilarityBaseline => {
            let scorer = build_scorer(&base, None, &corpus_texts(&tr))?;
            rows.push(evaluate_scorer(base.family.as_str(), scorer.as_ref(), &te, &pairs, None)?);
        }
    }
    let rows = metrics_with_average(model.config.family, rows)?;
    write_metrics_table(&rows, &run.output("metrics.tsv")?)?;
    run.write_json("metrics.json", &rows)?;
    run.write_json(MODEL, &model)?;
    for r in &rows {
        println!(
            "scorer={} acc_temp={:.4} acc_entire={:.4} f_pos={} f_neg={} gap_p={:.3e}",
            r.scorer,
            r.acc_temp,
            r.acc_entire,
            fmt_score(r.avg_f_pos),
            fmt_score(r.avg_f_neg),
            r.gap_p_value
        );
    }
    run.finish()
}

/// The scorers of a train run: one per checkpoint, or the zero-shot scorer.
fn load_scorers(store: &Store, run: &mut Run, train_run: &Finished) -> Result<Vec<(String, Box<dyn PairScorer>, Option<Checkpoint>)>> {
    let model: TrainedModel = read_json(&run.uses("model", train_run, MODEL)?)?;
    let mut out = Vec::new();
    for (r, rel) in model.checkpoints.iter().enumerate() {
        let path = train_run.path(rel);
        run.input(&path)?;
        let ckpt = Checkpoint::load(&path)?;
        let scorer = build_scorer(&model.config, Some(&ckpt), &[])?;
        let name = if model.checkpoints.len() > 1 {
            format!("{}/run-{r}", model.config.family)
        } else {
            model.config.family.to_string()
        };
        out.push((name, scorer, Some(ckpt)));
    }
    if out.is_empty() {
        let splits = load_splits(store, run, train_run.id())?;
        let texts = corpus_texts(&splits.part(Split::Train));
        out.push((model.config.family.to_string(), build_scorer(&model.config, None, &texts)?, None));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Validation,
    Test,
}

impl From<SplitArg> for Split {
    fn from(s: SplitArg) -> Split {
        match s {
            SplitArg::Train => Split::Train,
            SplitArg::Validation => Split::Validation,
            SplitArg::Test => Split::Test,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Train run whose scorers are evaluated.
    #[arg(long)]
    pub from: String,
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
    /// Also evaluate the cosine-similarity baseline on the configured encoder.
    #[arg(long)]
    pub baseline: bool,
}

pub fn evaluate(store: &Store, config: Config, args: EvaluateArgs) -> Result<String> {
    let train_run = store.require(&args.from, "train")?;
    let mut run = store.create("evaluate", &config)?;
    let scorers = load_scorers(store, &mut run, &train_run)?;
    let splits = load_splits(store, &mut run, train_run.id())?;
    let part = splits.part(args.split.into());
    let pairs = test_pairs(&part);
    let loss_seed = seed::derive(config.seed, "test-loss");
    let mut rows = Vec::new();
    let mut score_rows = Vec::new();
    let family = scorers[0].1.family();
    for (name, scorer, ckpt) in &scorers {
        let scores = score_pairs(scorer.as_ref(), &part, &pairs)?;
        let loss = ckpt.as_ref().map(|c| evaluate_loss(c, &part, loss_seed)).transpose()?;
        rows.push(metrics_row(name, &scored(&pairs, &scores, name)?, loss)?);
        for (p, s) in pairs.iter().zip(&scores) {
            score_rows.push(vec![
                name.clone(),
                p.narrative_ref.clone(),
                p.anchor_index.to_string(),
                p.partner_index.to_string(),
                p.label.as_str().to_string(),
                format!("{s:.6}"),
            ]);
        }
    }
    let mut rows = metrics_with_average(family, rows)?;
    if args.baseline {
        let cfg = ScorerConfig {
            family: Family::SimilarityBaseline,
            backend: if family == Family::Generative {
                ScorerConfig::default().backend
            } else {
                config.model.backend.clone()
            },
            ..config.model.clone()
        };
        let scorer = build_scorer(&cfg, None, &[])?;
        rows.push(evaluate_scorer(Family::SimilarityBaseline.as_str(), scorer.as_ref(), &part, &pairs, None)?);
    }
    write_metrics_table(&rows, &run.output("metrics.tsv")?)?;
    run.write_json("metrics.json", &rows)?;
    write_table(
        &run.output("scores.tsv")?,
        &["scorer", "narrative_ref", "anchor_index", "partner_index", "label", "score"],
        &score_rows,
    )?;
    for r in &rows {
        println!("scorer={} acc_temp={:.4} acc_entire={:.4}", r.scorer, r.acc_temp, r.acc_entire);
    }
    run.finish()
}

#[derive(Debug, Args)]
pub struct MarkerArgs {
    /// Train run providing the scorer.
    #[arg(long)]
    pub from: String,
    /// Ingest run to score instead of the one the model was trained on.
    #[arg(long)]
    pub corpus: Option<String>,
}

pub fn marker(store: &Store, config: Config, args: MarkerArgs) -> Result<String> {
    let train_run = store.require(&args.from, "train")?;
    let corpus_run = match &args.corpus {
        Some(id) => store.require(id, "ingest")?,
        None => store.require(train_run.id(), "ingest")?,
    };
    let mut run = store.create("marker", &config)?;
    let mut scorers = load_scorers(store, &mut run, &train_run)?;
    // The checkpoint with the lowest validation loss scores the corpus.
    let best = scorers
        .iter()
        .enumerate()
        .min_by(|a, b| {
            let l = |s: &(String, Box<dyn PairScorer>, Option<Checkpoint>)| {
                s.2.as_ref().map_or(0.0, |c| c.validation_loss)
            };
            l(a.1).total_cmp(&l(b.1))
        })
        .map(|(i, _)| i)
        .expect("at least one scorer");
    let (name, scorer, _) = scorers.swap_remove(best);
    let corpus = load_corpus(&run.uses("corpus", &corpus_run, CORPUS)?)?;
    let adj = adjacent_scores(scorer.as_ref(), &corpus)?;
    let set = subject_series(&corpus, &narrative_markers(&adj));
    for s in &set.excluded {
        log::warn!("subject {s} has fewer than two scored visits; excluded from series");
    }
    let opts = CohortOptions {
        std: config.marker.std,
        delta_long: config.marker.delta_long,
        mw_mode: MwMode::Auto,
    };
    let cohorts = cohort_table(&set.series, opts)?;
    for w in &cohorts.warnings {
        log::warn!("{w}");
    }
    let disruptive = disruptive_analysis(&adj, config.marker.std)?;
    run.write_json(ADJACENT, &adj)?;
    run.write_json(SERIES, &set)?;
    run.write_json("cohort.json", &cohorts)?;
    run.write_json("disruptive.json", &disruptive)?;
    write_marker_table(&set, &run.output("markers.tsv")?)?;
    write_cohort_table(&cohorts, &run.output("cohort.tsv")?)?;
    write_disruptive_table(&disruptive, &run.output("disruptive.tsv")?)?;
    println!(
        "scorer={name} narratives={} series={} excluded={} disruptive_pairs={}",
        corpus.len(),
        set.series.len(),
        set.excluded.len(),
        disruptive.n_disruptive
    );
    run.finish()
}

#[derive(Debug, Args)]
pub struct AssociateArgs {
    /// Marker run whose series are binned.
    #[arg(long)]
    pub from: String,
    /// Diagnosis whose subjects are binned (`healthy`, `mci`, `ad`, `other`), or `all`.
    #[arg(long)]
    pub cohort: Option<String>,
    /// Biomarkers to tabulate; all by default.
    #[arg(long, value_delimiter = ',')]
    pub biomarker: Option<Vec<String>>,
}

fn associations(
    config: &Config,
    set: &SeriesSet,
    corpus: &Corpus,
    biomarkers: &[Biomarker],
) -> Result<Vec<AssociationTable>> {
    let cohort = config.associate.cohort.to_ascii_lowercase();
    let series: Vec<_> = if cohort == "all" {
        set.series.clone()
    } else {
        let d = Diagnosis::parse_lenient(&cohort);
        if d == Diagnosis::Other && cohort != "other" {
            bail!("unknown cohort {cohort:?}");
        }
        set.series.iter().filter(|s| s.diagnosis == d).cloned().collect()
    };
    biomarkers
        .iter()
        .map(|&b| {
            let spec = config.bin_spec(b)?;
            Ok(association_table(&series, &biomarker_records(corpus, b), &spec, Default::default())?)
        })
        .collect()
}

pub fn associate(store: &Store, mut config: Config, args: AssociateArgs) -> Result<String> {
    if let Some(c) = args.cohort {
        config.associate.cohort = c;
    }
    let biomarkers: Vec<Biomarker> = match &args.biomarker {
        Some(names) => names.iter().map(|n| n.parse()).collect::<Result<_, _>>()?,
        None => Biomarker::ALL.to_vec(),
    };
    let marker_run = store.require(&args.from, "marker")?;
    let corpus_run = store.open(
        marker_run
            .manifest
            .refs
            .get("corpus")
            .context("marker run does not record its corpus")?,
    )?;
    let mut run = store.create("associate", &config)?;
    let set: SeriesSet = read_json(&run.uses("series", &marker_run, SERIES)?)?;
    let corpus = load_corpus(&run.uses("corpus", &corpus_run, CORPUS)?)?;
    let tables = associations(&config, &set, &corpus, &biomarkers)?;
    write_association_tables(&tables, &run.output("association.tsv")?)?;
    run.write_json("association.json", &tables)?;
    for t in &tables {
        let n: Vec<String> = t.rows.iter().map(|r| format!("{}={}", r.label, r.n_subjects)).collect();
        println!(
            "biomarker={} {} unbinned={} missing={}",
            t.biomarker,
            n.join(" "),
            t.unbinned.len(),
            t.missing.len()
        );
    }
    run.finish()
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Marker run, or any run downstream of one.
    #[arg(long)]
    pub from: String,
}

/// Four tables (metrics, cohort summary, association, disruptive pairs) and
/// one marker plot per cohort, rendered from the upstream runs' artifacts.
pub fn report(store: &Store, config: Config, args: ReportArgs) -> Result<String> {
    let marker_run = store.require(&args.from, "marker")?;
    let train_run = store.find(marker_run.id(), "train")?;
    let corpus_run = store.open(
        marker_run
            .manifest
            .refs
            .get("corpus")
            .context("marker run does not record its corpus")?,
    )?;
    let mut run = store.create("report", &config)?;
    let set: SeriesSet = read_json(&run.uses("series", &marker_run, SERIES)?)?;
    let cohorts: CohortTable = read_json(&run.uses("cohort", &marker_run, "cohort.json")?)?;
    let disruptive: DisruptiveReport = read_json(&run.uses("disruptive", &marker_run, "disruptive.json")?)?;
    let corpus = load_corpus(&run.uses("corpus", &corpus_run, CORPUS)?)?;

    let metrics_path = run.output("report/metrics.tsv")?;
    match &train_run {
        Some(t) => {
            let rows: Vec<MetricsRow> = read_json(&run.uses("model", t, "metrics.json")?)?;
            write_metrics_table(&rows, &metrics_path)?;
        }
        None => {
            let mut stub = vec![NULL_MARKER.to_string(); METRICS_HEADER.len()];
            stub[0] = "insufficient data".into();
            write_table(&metrics_path, &METRICS_HEADER, &[stub])?;
        }
    }
    write_cohort_table(&cohorts, &run.output("report/cohort.tsv")?)?;
    let tables = associations(&config, &set, &corpus, &Biomarker::ALL)?;
    write_association_tables(&tables, &run.output("report/association.tsv")?)?;
    write_disruptive_table(&disruptive, &run.output("report/disruptive.tsv")?)?;

    let mut by_cohort: BTreeMap<Diagnosis, Vec<_>> = BTreeMap::new();
    for s in &set.series {
        by_cohort.entry(s.diagnosis).or_default().push(s.clone());
    }
    for (d, series) in &by_cohort {
        let path = run.output(&format!("report/marker_{}.svg", d.as_str()))?;
        let title = format!("coherence marker by visit: {} (n={})", d.as_str(), series.len());
        fs::write(&path, series_svg(&title, series)).with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "tables=4 plots={} insufficient={}",
        by_cohort.len(),
        tables.iter().filter(|t| t.is_insufficient()).count()
    );
    run.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SynthKind {
    /// Healthy single-visit narratives with planted local order.
    Narratives,
    /// Longitudinal healthy / MCI / AD cohort with clinical scores.
    Cohort,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum, default_value = "cohort")]
    pub kind: SynthKind,
    /// Directory receiving one key-value transcript per narrative.
    #[arg(long)]
    pub dir: PathBuf,
    /// Number of narratives (`narratives`) or AD subjects (`cohort`).
    #[arg(long)]
    pub count: Option<usize>,
}

/// Writes synthetic transcripts (key-value dialect) for demos and tests.
pub fn synth(config: &Config, args: SynthArgs) -> Result<usize> {
    let corpus = match args.kind {
        SynthKind::Narratives => generate(&SyntheticSpec {
            narratives: args.count.unwrap_or(SyntheticSpec::default().narratives),
            seed: config.seed,
            ..SyntheticSpec::default()
        }),
        SynthKind::Cohort => generate_cohort(&CohortSpec {
            ad: args.count.unwrap_or(CohortSpec::default().ad),
            seed: config.seed,
            ..CohortSpec::default()
        }),
    };
    fs::create_dir_all(&args.dir).with_context(|| format!("creating {}", args.dir.display()))?;
    for n in corpus.narratives() {
        let path = args
            .dir
            .join(format!("{}_{}.txt", n.meta.subject_id, n.meta.visit_index));
        fs::write(&path, to_transcript(n)).with_context(|| format!("writing {}", path.display()))?;
    }
    println!("transcripts={} dir={}", corpus.len(), args.dir.display());
    Ok(corpus.len())
}
