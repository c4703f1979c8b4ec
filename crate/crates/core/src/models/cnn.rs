//! Convolutional pair classifier over the frozen word-vector matrix of
//! `u1 ++ u2`: width-`w` convolution, tanh, max-pool over positions, then
//! the feed-forward head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoder::EncoderBackend;
use super::nn::Mlp;
use crate::error::{Error, Result};
use crate::seed;

/// A `dim x N` matrix stored as its `N` columns (one word vector each).
#[derive(Debug, Clone, PartialEq)]
pub struct CnnInput {
    pub dim: usize,
    pub columns: Vec<Vec<f64>>,
}

impl CnnInput {
    pub fn shape(&self) -> (usize, usize) {
        (self.dim, self.columns.len())
    }
}

/// Word vectors of the first utterance, then of the second, as columns.
pub fn build_cnn_input(first: &[String], second: &[String], backend: &dyn EncoderBackend) -> Result<CnnInput> {
    if first.is_empty() && second.is_empty() {
        return Err(Error::Empty("utterance pair has no words".into()));
    }
    let mut columns = backend.word_vectors(first);
    columns.extend(backend.word_vectors(second));
    Ok(CnnInput {
        dim: backend.dim(),
        columns,
    })
}

/// Layout in the parameter slice: kernels (`filters x width x dim`), conv
/// biases (`filters`), then the head's parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cnn {
    pub dim: usize,
    pub filters: usize,
    pub width: usize,
    pub head: Mlp,
}

pub struct CnnCache {
    pooled: Vec<f64>,
    argmax: Vec<usize>,
    head: super::nn::MlpCache,
}

impl Cnn {
    pub fn new(dim: usize, filters: usize, width: usize, hidden: usize) -> Self {
        Cnn {
            dim,
            filters,
            width,
            head: Mlp::new(filters, hidden),
        }
    }

    fn n_conv(&self) -> usize {
        self.filters * self.width * self.dim + self.filters
    }

    pub fn n_params(&self) -> usize {
        self.n_conv() + self.head.n_params()
    }

    pub fn init(&self, s: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed::derive(s, "conv"));
        let fan = (self.width * self.dim + self.filters) as f64;
        let a = (6.0 / fan).sqrt();
        let mut p: Vec<f64> = (0..self.filters * self.width * self.dim)
            .map(|_| rng.random_range(-a..a))
            .collect();
        p.extend(std::iter::repeat_n(0.0, self.filters));
        p.extend(self.head.init(seed::derive(s, "head")));
        p
    }

    fn column<'a>(&self, x: &'a CnnInput, t: usize, zero: &'a [f64]) -> &'a [f64] {
        x.columns.get(t).map(|c| c.as_slice()).unwrap_or(zero)
    }

    /// Returns the logit.
    pub fn forward(&self, params: &[f64], x: &CnnInput) -> (f64, CnnCache) {
        debug_assert_eq!(x.dim, self.dim);
        let zero = vec![0.0; self.dim];
        // Inputs shorter than the kernel are zero-padded on the right.
        let positions = x.columns.len().max(self.width) - self.width + 1;
        let kernels = &params[..self.filters * self.width * self.dim];
        let biases = &params[self.filters * self.width * self.dim..self.n_conv()];
        let mut pooled = vec![f64::NEG_INFINITY; self.filters];
        let mut argmax = vec![0; self.filters];
        for f in 0..self.filters {
            for t in 0..positions {
                let mut z = biases[f];
                for k in 0..self.width {
                    let w = &kernels[(f * self.width + k) * self.dim..(f * self.width + k + 1) * self.dim];
                    z += super::nn::dot(w, self.column(x, t + k, &zero));
                }
                let a = z.tanh();
                if a > pooled[f] {
                    pooled[f] = a;
                    argmax[f] = t;
                }
            }
        }
        let (logit, head) = self.head.forward(&params[self.n_conv()..], &pooled);
        (logit, CnnCache { pooled, argmax, head })
    }

    pub fn logit(&self, params: &[f64], x: &CnnInput) -> f64 {
        self.forward(params, x).0
    }

    /// Accumulates `d_logit * d logit / d params` into `grad`.
    pub fn backward(&self, params: &[f64], x: &CnnInput, cache: &CnnCache, d_logit: f64, grad: &mut [f64]) {
        let nc = self.n_conv();
        let mut dp = vec![0.0; self.filters];
        let (gconv, ghead) = grad.split_at_mut(nc);
        self.head
            .backward(&params[nc..], &cache.pooled, &cache.head, d_logit, ghead, Some(&mut dp));
        let zero = vec![0.0; self.dim];
        let kb = self.filters * self.width * self.dim;
        for f in 0..self.filters {
            let a = cache.pooled[f];
            let dz = dp[f] * (1.0 - a * a);
            if dz == 0.0 {
                continue;
            }
            gconv[kb + f] += dz;
            let t = cache.argmax[f];
            for k in 0..self.width {
                let col = self.column(x, t + k, &zero);
                let base = (f * self.width + k) * self.dim;
                for (i, xi) in col.iter().enumerate() {
                    gconv[base + i] += dz * xi;
                }
            }
        }
    }
}
