//! First-order update rules shared by the training backends.

use ndarray::{Array, Dimension};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Gradient descent, heavy-ball momentum when `momentum > 0`.
    Gd,
    /// Adam with β₁ = `momentum`, β₂ = 0.999, ε = 1e-16.
    #[default]
    Adam,
}

const ADAM_BETA2: f64 = 0.999;
// Near uniform assignments the modularity gradient is often far below the
// customary 1e-8, which would then freeze every parameter.
const ADAM_EPS: f64 = 1e-16;

/// Per-tensor optimizer state, addressed by a stable slot index.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    momentum: f64,
    t: i32,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64, momentum: f64) -> Self {
        Self {
            kind,
            learning_rate,
            momentum,
            t: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    /// Starts a new step; call once before the `update`s of that step.
    pub fn begin_step(&mut self) {
        self.t += 1;
    }

    pub fn update<D: Dimension>(&mut self, slot: usize, p: &mut Array<f64, D>, g: &Array<f64, D>) {
        assert_eq!(p.shape(), g.shape(), "parameter and gradient shapes differ");
        let n = p.len();
        if self.first.len() <= slot {
            self.first.resize(slot + 1, Vec::new());
            self.second.resize(slot + 1, Vec::new());
        }
        if self.first[slot].len() != n {
            self.first[slot] = vec![0.0; n];
            if self.kind == OptimizerKind::Adam {
                self.second[slot] = vec![0.0; n];
            }
        }
        let (lr, mu) = (self.learning_rate, self.momentum);
        match self.kind {
            OptimizerKind::Gd => {
                let v = &mut self.first[slot];
                for ((p, &g), v) in p.iter_mut().zip(g.iter()).zip(v.iter_mut()) {
                    *v = mu * *v - lr * g;
                    *p += *v;
                }
            }
            OptimizerKind::Adam => {
                let c1 = 1.0 - mu.powi(self.t.max(1));
                let c2 = 1.0 - ADAM_BETA2.powi(self.t.max(1));
                let (m, s) = (&mut self.first[slot], &mut self.second[slot]);
                for (((p, &g), m), s) in p
                    .iter_mut()
                    .zip(g.iter())
                    .zip(m.iter_mut())
                    .zip(s.iter_mut())
                {
                    *m = mu * *m + (1.0 - mu) * g;
                    *s = ADAM_BETA2 * *s + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = if c1 > 0.0 { *m / c1 } else { *m };
                    *p -= lr * m_hat / ((*s / c2).sqrt() + ADAM_EPS);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn plain_gd_step() {
        let mut opt = Optimizer::new(OptimizerKind::Gd, 0.5, 0.0);
        let mut p = array![1.0, -2.0];
        opt.begin_step();
        opt.update(0, &mut p, &array![2.0, 4.0]);
        assert_eq!(p, array![0.0, -4.0]);
    }

    #[test]
    fn heavy_ball_accumulates() {
        let mut opt = Optimizer::new(OptimizerKind::Gd, 1.0, 0.9);
        let mut p = array![0.0];
        for _ in 0..2 {
            opt.begin_step();
            opt.update(0, &mut p, &array![1.0]);
        }
        assert!((p[0] - -(1.0 + 1.9)).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_is_signed_learning_rate() {
        let mut opt = Optimizer::new(OptimizerKind::Adam, 0.1, 0.9);
        let mut p = array![0.0, 0.0, 0.0];
        opt.begin_step();
        opt.update(0, &mut p, &array![3.0, -1e-4, 0.0]);
        assert!((p[0] + 0.1).abs() < 1e-9);
        assert!((p[1] - 0.1).abs() < 1e-4);
        assert_eq!(p[2], 0.0);
    }
}
