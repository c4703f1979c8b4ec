//! Mann-Whitney U, Welch's t-test and descriptive statistics.
//!
//! Implemented in-tree; the special functions live in [`special`].

pub mod special;

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Significance threshold used for every flag in the reports.
pub const ALPHA: f64 = 0.05;

/// Exact Mann-Whitney is chosen automatically up to this many observations.
pub const AUTO_EXACT_MAX: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// First sample tends to be smaller.
    Less,
    /// First sample tends to be larger.
    Greater,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MwMode {
    Exact,
    NormalApprox,
    #[default]
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    MannWhitneyExact,
    MannWhitneyNormal,
    WelchT,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::MannWhitneyExact => "mann-whitney-exact",
            Method::MannWhitneyNormal => "mann-whitney-normal",
            Method::WelchT => "welch-t",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
    pub n1: usize,
    pub n2: usize,
    /// Set when the data carry no information (all values tied).
    pub degenerate: bool,
}

impl TestResult {
    pub fn significant(&self) -> bool {
        self.p_value < ALPHA
    }
}

fn check_sample(name: &str, xs: &[f64], min: usize) -> Result<()> {
    if xs.len() < min {
        return Err(Error::InvalidArgument(format!(
            "sample {name} needs at least {min} values, got {}",
            xs.len()
        )));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument(format!("sample {name} has non-finite values")));
    }
    Ok(())
}

/// Midranks of the pooled sample, doubled so that they are integers:
/// a tie block covering 0-based sorted positions `i..j` gets `i + j + 1`.
fn doubled_midranks(pooled: &[f64]) -> (Vec<u64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..pooled.len()).collect();
    order.sort_by(|&x, &y| pooled[x].partial_cmp(&pooled[y]).unwrap_or(Ordering::Equal));
    let mut ranks = vec![0u64; pooled.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && pooled[order[j]] == pooled[order[i]] {
            j += 1;
        }
        for &k in &order[i..j] {
            ranks[k] = (i + j + 1) as u64;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

pub fn mann_whitney(a: &[f64], b: &[f64], mode: MwMode) -> Result<TestResult> {
    mann_whitney_with(a, b, mode, Alternative::TwoSided)
}

/// Mann-Whitney U with midranks for ties. The statistic is U for the first
/// sample, `R_a - n1 (n1 + 1) / 2`.
pub fn mann_whitney_with(a: &[f64], b: &[f64], mode: MwMode, alt: Alternative) -> Result<TestResult> {
    check_sample("a", a, 1)?;
    check_sample("b", b, 1)?;
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = doubled_midranks(&pooled);
    let s2: u64 = ranks[..n1].iter().sum();
    // doubled U and its doubled mean, both exact integers
    let u2 = s2 as i128 - (n1 * (n1 + 1)) as i128;
    let mean2 = (n1 * n2) as i128;
    let statistic = u2 as f64 / 2.0;

    let exact = match mode {
        MwMode::Exact => true,
        MwMode::NormalApprox => false,
        MwMode::Auto => n1 + n2 <= AUTO_EXACT_MAX,
    };
    let method = if exact {
        Method::MannWhitneyExact
    } else {
        Method::MannWhitneyNormal
    };
    if pooled.iter().all(|x| *x == pooled[0]) {
        return Ok(TestResult {
            statistic,
            p_value: 1.0,
            method,
            n1,
            n2,
            degenerate: true,
        });
    }

    let p_value = if exact {
        exact_p(&ranks, n1, u2, mean2, alt)
    } else {
        normal_p(n1, n2, u2, mean2, &ties, alt)
    };
    Ok(TestResult {
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
        method,
        n1,
        n2,
        degenerate: false,
    })
}

/// Exact null distribution of the doubled rank sum of a size-`n1` subset,
/// by dynamic programming over the pooled (doubled) midranks. Equivalent to
/// enumerating every assignment of ranks to the two groups.
fn exact_p(ranks: &[u64], n1: usize, u2_obs: i128, mean2: i128, alt: Alternative) -> f64 {
    let total: u64 = ranks.iter().sum();
    let width = total as usize + 1;
    // counts[m][s]: subsets of size m with doubled rank sum s
    let mut counts = vec![vec![0u128; width]; n1 + 1];
    counts[0][0] = 1;
    for (seen, &r) in ranks.iter().enumerate() {
        let r = r as usize;
        for m in (1..=n1.min(seen + 1)).rev() {
            let (lo, hi) = counts.split_at_mut(m);
            let (prev, cur) = (&lo[m - 1], &mut hi[0]);
            for s in (r..width).rev() {
                let add = prev[s - r];
                if add != 0 {
                    cur[s] += add;
                }
            }
        }
    }
    let offset = (n1 * (n1 + 1)) as i128;
    let dev_obs = (u2_obs - mean2).abs();
    let mut hit: u128 = 0;
    let mut all: u128 = 0;
    for (s, &c) in counts[n1].iter().enumerate() {
        if c == 0 {
            continue;
        }
        all += c;
        let u2 = s as i128 - offset;
        let extreme = match alt {
            Alternative::TwoSided => (u2 - mean2).abs() >= dev_obs,
            Alternative::Less => u2 <= u2_obs,
            Alternative::Greater => u2 >= u2_obs,
        };
        if extreme {
            hit += c;
        }
    }
    hit as f64 / all as f64
}

fn normal_p(n1: usize, n2: usize, u2: i128, mean2: i128, ties: &[usize], alt: Alternative) -> f64 {
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let n = n1f + n2f;
    let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / (n * (n - 1.0));
    let var = n1f * n2f / 12.0 * ((n + 1.0) - tie_term);
    let sd = var.sqrt();
    let diff = (u2 - mean2) as f64 / 2.0;
    match alt {
        Alternative::TwoSided => {
            let z = ((diff.abs() - 0.5).max(0.0)) / sd;
            (2.0 * special::normal_sf(z)).min(1.0)
        }
        Alternative::Greater => special::normal_sf((diff - 0.5) / sd),
        Alternative::Less => special::normal_cdf((diff + 0.5) / sd),
    }
}

/// Welch's unequal-variance two-sample t-test, two-sided.
pub fn t_test(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_sample("a", a, 2)?;
    check_sample("b", b, 2)?;
    let (n1, n2) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let (va, vb) = (sample_var(a, ma), sample_var(b, mb));
    let se2 = va / n1 + vb / n2;
    let result = |statistic: f64, p_value: f64, degenerate: bool| TestResult {
        statistic,
        p_value,
        method: Method::WelchT,
        n1: a.len(),
        n2: b.len(),
        degenerate,
    };
    if se2 == 0.0 {
        return Ok(if ma == mb {
            result(0.0, 1.0, true)
        } else {
            result(if ma > mb { f64::INFINITY } else { f64::NEG_INFINITY }, 0.0, true)
        });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / ((va / n1).powi(2) / (n1 - 1.0) + (vb / n2).powi(2) / (n2 - 1.0));
    Ok(result(t, special::student_t_two_sided(t, df), false))
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StdConvention {
    /// n - 1 denominator
    #[default]
    Sample,
    /// n denominator
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
    /// A single observation: std is reported as 0.
    pub single: bool,
}

impl fmt::Display for Summary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = f.precision().unwrap_or(3);
        write!(f, "{:.p$} ({:.p$})", self.mean, self.std)
    }
}

pub fn describe(values: &[f64], convention: StdConvention) -> Result<Summary> {
    if values.is_empty() {
        return Err(Error::Empty("describe".into()));
    }
    let n = values.len();
    // Welford
    let (mut m, mut m2) = (0.0, 0.0);
    for (i, &x) in values.iter().enumerate() {
        let d = x - m;
        m += d / (i + 1) as f64;
        m2 += d * (x - m);
    }
    let std = match (n, convention) {
        (1, _) => 0.0,
        (_, StdConvention::Sample) => (m2 / (n - 1) as f64).sqrt(),
        (_, StdConvention::Population) => (m2 / n as f64).sqrt(),
    };
    Ok(Summary {
        mean: m,
        std,
        n,
        single: n == 1,
    })
}
