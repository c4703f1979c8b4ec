//! Append-only run store: every command writes into a fresh
//! `<out>/runs/<run_id>/` directory whose `manifest.json` records the
//! effective config, input hashes, upstream runs and emitted artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Config;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputHash {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub run_id: String,
    pub command: String,
    pub seed: u64,
    pub config: Config,
    /// Upstream runs by role, e.g. `corpus`, `split`, `model`.
    pub refs: BTreeMap<String, String>,
    pub inputs: Vec<InputHash>,
    /// Artifact paths relative to the run directory.
    pub outputs: Vec<String>,
    pub started_unix: u64,
    pub finished_unix: u64,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

pub struct Store {
    root: PathBuf,
}

impl Store {
    pub fn new(out: &Path) -> Store {
        Store { root: out.join("runs") }
    }

    fn ids(&self) -> Result<Vec<String>> {
        if !self.root.exists() {
            return Ok(Vec::new());
        }
        let mut ids = Vec::new();
        for entry in fs::read_dir(&self.root).with_context(|| format!("listing {}", self.root.display()))? {
            let entry = entry?;
            if entry.path().is_dir() {
                ids.push(entry.file_name().to_string_lossy().into_owned());
            }
        }
        ids.sort();
        Ok(ids)
    }

    /// Reserves a new run directory named `<seq>-<command>`; existing runs
    /// are never reused.
    pub fn create(&self, command: &str, config: &Config) -> Result<Run> {
        fs::create_dir_all(&self.root).with_context(|| format!("creating {}", self.root.display()))?;
        let mut seq = self.ids()?.len() + 1;
        loop {
            let run_id = format!("{seq:04}-{command}");
            let dir = self.root.join(&run_id);
            match fs::create_dir(&dir) {
                Ok(()) => {
                    return Ok(Run {
                        dir,
                        manifest: Manifest {
                            run_id,
                            command: command.into(),
                            seed: config.seed,
                            config: config.clone(),
                            refs: BTreeMap::new(),
                            inputs: Vec::new(),
                            outputs: Vec::new(),
                            started_unix: now(),
                            finished_unix: 0,
                        },
                    })
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => seq += 1,
                Err(e) => return Err(e).with_context(|| format!("creating {}", dir.display())),
            }
        }
    }

    /// A completed run.
    pub fn open(&self, run_id: &str) -> Result<Finished> {
        let dir = self.root.join(run_id);
        let path = dir.join(MANIFEST);
        if !path.is_file() {
            bail!("unknown run id {run_id:?} under {}", self.root.display());
        }
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        let manifest = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        Ok(Finished { dir, manifest })
    }

    /// The nearest run produced by `command`, starting from `run_id` itself
    /// and following upstream references.
    pub fn find(&self, run_id: &str, command: &str) -> Result<Option<Finished>> {
        let mut queue = vec![run_id.to_string()];
        let mut seen = std::collections::BTreeSet::new();
        while let Some(id) = queue.first().cloned() {
            queue.remove(0);
            if !seen.insert(id.clone()) {
                continue;
            }
            let run = self.open(&id)?;
            if run.manifest.command == command {
                return Ok(Some(run));
            }
            queue.extend(run.manifest.refs.values().cloned());
        }
        Ok(None)
    }

    pub fn require(&self, run_id: &str, command: &str) -> Result<Finished> {
        self.find(run_id, command)?
            .ok_or_else(|| anyhow!("run {run_id} has no upstream {command} run"))
    }
}

pub struct Finished {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl Finished {
    pub fn id(&self) -> &str {
        &self.manifest.run_id
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

pub struct Run {
    pub dir: PathBuf,
    pub manifest: Manifest,
}

impl Run {
    /// Path for a new artifact, recorded as an output.
    pub fn output(&mut self, name: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        self.manifest.outputs.push(name.to_string());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.output(name)?;
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest.inputs.push(InputHash {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
        });
        Ok(())
    }

    /// Records an upstream run and hashes the artifact read from it.
    pub fn uses(&mut self, role: &str, upstream: &Finished, artifact: &str) -> Result<PathBuf> {
        self.manifest.refs.insert(role.into(), upstream.id().to_string());
        let path = upstream.path(artifact);
        self.input(&path)?;
        Ok(path)
    }

    pub fn finish(mut self) -> Result<String> {
        self.manifest.finished_unix = now();
        let path = self.dir.join(MANIFEST);
        let mut text = serde_json::to_string_pretty(&self.manifest)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(self.manifest.run_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn runs_are_append_only_and_linked() {
        let dir = tempfile::tempdir().unwrap();
        let store = Store::new(dir.path());
        let config = Config::default();
        let mut a = store.create("ingest", &config).unwrap();
        fs::write(a.output("corpus.json").unwrap(), "{}").unwrap();
        let a_id = a.finish().unwrap();
        let a = store.open(&a_id).unwrap();
        let mut b = store.create("pairs", &config).unwrap();
        b.uses("corpus", &a, "corpus.json").unwrap();
        let b_id = b.finish().unwrap();
        assert_eq!((a_id.as_str(), b_id.as_str()), ("0001-ingest", "0002-pairs"));
        assert_eq!(store.require(&b_id, "ingest").unwrap().id(), a_id);
        assert!(store.find(&a_id, "pairs").unwrap().is_none());
        assert!(store.open("0009-train").is_err());
        let m = store.open(&b_id).unwrap().manifest;
        assert_eq!(m.inputs[0].sha256, hex::encode(Sha256::digest(b"{}")));
    }
}
