//! Minimal dense layers over flat parameter vectors.
//!
//! Every model keeps its parameters in one `Vec<f64>` so optimizers and
//! finite-difference checks can treat them uniformly. Layer structs only
//! describe where their weights sit inside that vector.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seed;

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(z))` without overflow.
pub fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Binary cross-entropy on a logit; returns the loss and d loss / d logit.
pub fn bce_with_logit(z: f64, target: f64) -> (f64, f64) {
    (softplus(z) - target * z, sigmoid(z) - target)
}

/// One hidden tanh layer followed by a linear scalar output.
///
/// Layout in the parameter slice: `w1` (hidden x input, row-major), `b1`
/// (hidden), `w2` (hidden), `b2` (1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mlp {
    pub input: usize,
    pub hidden: usize,
}

pub struct MlpCache {
    hidden: Vec<f64>,
}

impl Mlp {
    pub fn new(input: usize, hidden: usize) -> Self {
        Mlp { input, hidden }
    }

    pub fn n_params(&self) -> usize {
        self.hidden * self.input + 2 * self.hidden + 1
    }

    fn w1(&self) -> std::ops::Range<usize> {
        0..self.hidden * self.input
    }

    fn b1(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input;
        s..s + self.hidden
    }

    fn w2(&self) -> std::ops::Range<usize> {
        let s = self.hidden * self.input + self.hidden;
        s..s + self.hidden
    }

    fn b2(&self) -> usize {
        self.n_params() - 1
    }

    /// Xavier-uniform weights, zero biases.
    pub fn init(&self, seed: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed);
        let mut p = vec![0.0; self.n_params()];
        let a1 = (6.0 / (self.input + self.hidden) as f64).sqrt();
        for w in &mut p[self.w1()] {
            *w = rng.random_range(-a1..a1);
        }
        let a2 = (6.0 / (self.hidden + 1) as f64).sqrt();
        for w in &mut p[self.w2()] {
            *w = rng.random_range(-a2..a2);
        }
        p
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> (f64, MlpCache) {
        debug_assert_eq!(x.len(), self.input);
        let w1 = &params[self.w1()];
        let b1 = &params[self.b1()];
        let w2 = &params[self.w2()];
        let mut hidden = Vec::with_capacity(self.hidden);
        let mut out = params[self.b2()];
        for h in 0..self.hidden {
            let row = &w1[h * self.input..(h + 1) * self.input];
            let z = b1[h] + dot(row, x);
            let a = z.tanh();
            out += w2[h] * a;
            hidden.push(a);
        }
        (out, MlpCache { hidden })
    }

    pub fn output(&self, params: &[f64], x: &[f64]) -> f64 {
        self.forward(params, x).0
    }

    /// Accumulates `d_out * d output / d params` into `grad`; when `dx` is
    /// given, also accumulates the gradient with respect to the input.
    pub fn backward(
        &self,
        params: &[f64],
        x: &[f64],
        cache: &MlpCache,
        d_out: f64,
        grad: &mut [f64],
        mut dx: Option<&mut [f64]>,
    ) {
        let w1 = self.w1();
        let b1 = self.b1();
        let w2 = self.w2();
        grad[self.b2()] += d_out;
        for h in 0..self.hidden {
            let a = cache.hidden[h];
            grad[w2.start + h] += d_out * a;
            let dz = d_out * params[w2.start + h] * (1.0 - a * a);
            if dz == 0.0 {
                continue;
            }
            grad[b1.start + h] += dz;
            let row = w1.start + h * self.input;
            for (i, xi) in x.iter().enumerate() {
                grad[row + i] += dz * xi;
            }
            if let Some(dx) = dx.as_deref_mut() {
                for (i, d) in dx.iter_mut().enumerate() {
                    *d += dz * params[row + i];
                }
            }
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[cfg(test)]
pub(crate) mod testing {
    /// Max relative error between an analytic gradient and central finite
    /// differences of `f` at `params`.
    pub fn gradient_check(params: &[f64], analytic: &[f64], f: impl Fn(&[f64]) -> f64) -> f64 {
        let h = 1e-6;
        let mut p = params.to_vec();
        let mut worst: f64 = 0.0;
        for i in 0..params.len() {
            p[i] = params[i] + h;
            let up = f(&p);
            p[i] = params[i] - h;
            let down = f(&p);
            p[i] = params[i];
            let numeric = (up - down) / (2.0 * h);
            let denom = analytic[i].abs().max(numeric.abs()).max(1e-4);
            worst = worst.max((analytic[i] - numeric).abs() / denom);
        }
        worst
    }
}

#[cfg(test)]
mod tests {
    use super::testing::gradient_check;
    use super::*;

    #[test]
    fn sigmoid_and_softplus_are_stable() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert!((sigmoid(800.0) - 1.0).abs() < 1e-15);
        assert!((softplus(800.0) - 800.0).abs() < 1e-9);
        assert!(softplus(-800.0) >= 0.0);
    }

    #[test]
    fn bce_gradient() {
        for &(z, y) in &[(0.3, 1.0), (-2.0, 0.0), (4.0, 0.0)] {
            let (_, g) = bce_with_logit(z, y);
            let h = 1e-6;
            let num = (bce_with_logit(z + h, y).0 - bce_with_logit(z - h, y).0) / (2.0 * h);
            assert!((g - num).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_params_output_zero() {
        let m = Mlp::new(4, 3);
        assert_eq!(m.output(&vec![0.0; m.n_params()], &[1.0, -2.0, 3.0, 0.5]), 0.0);
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let m = Mlp::new(6, 5);
        for s in 0..10 {
            let p = m.init(s);
            let mut rng = seed::rng(100 + s);
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (_, cache) = m.forward(&p, &x);
            let mut g = vec![0.0; m.n_params()];
            let mut dx = vec![0.0; 6];
            m.backward(&p, &x, &cache, 1.0, &mut g, Some(&mut dx));
            assert!(gradient_check(&p, &g, |q| m.output(q, &x)) < 1e-4);
            assert!(gradient_check(&x, &dx, |xx| m.output(&p, xx)) < 1e-4);
        }
    }
}
