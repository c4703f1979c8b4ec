use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    AdamW,
}

impl OptimizerKind {
    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::AdamW => "adamw",
        }
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adam" => Ok(OptimizerKind::Adam),
            "adamw" => Ok(OptimizerKind::AdamW),
            other => Err(crate::Error::Config(format!("unknown optimizer {other:?}"))),
        }
    }
}

/// Adam, or AdamW when `weight_decay` is applied decoupled from the moments.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    weight_decay: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, weight_decay: f64, n_params: usize) -> Self {
        Optimizer {
            kind,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t);
        let bc2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            if self.kind == OptimizerKind::AdamW {
                params[i] -= self.lr * self.weight_decay * params[i];
            }
            params[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_adam_step_is_lr_sized() {
        let mut p = vec![1.0, -1.0];
        let mut o = Optimizer::new(OptimizerKind::Adam, 0.01, 0.0, 2);
        o.step(&mut p, &[3.0, -0.5]);
        assert!((p[0] - 0.99).abs() < 1e-9);
        assert!((p[1] + 0.99).abs() < 1e-9);
    }

    #[test]
    fn minimizes_quadratic() {
        for kind in [OptimizerKind::Adam, OptimizerKind::AdamW] {
            let mut p = vec![5.0, -3.0];
            let mut o = Optimizer::new(kind, 0.05, 0.01, 2);
            for _ in 0..2000 {
                let g = [2.0 * (p[0] - 1.0), 2.0 * (p[1] + 2.0)];
                o.step(&mut p, &g);
            }
            assert!((p[0] - 1.0).abs() < 0.05 && (p[1] + 2.0).abs() < 0.05, "{kind:?} {p:?}");
        }
    }

    #[test]
    fn adamw_decays_without_gradient() {
        let mut p = vec![1.0];
        let mut o = Optimizer::new(OptimizerKind::AdamW, 0.1, 0.5, 1);
        o.step(&mut p, &[0.0]);
        assert!((p[0] - 0.95).abs() < 1e-12);
    }
}
