//! Minimal message-passing encoder producing community logits.
//!
//! Per node type: `logits = relu(input · W1 + b1) · W2 + b2`. For Y the input
//! is `[F_Y, mean_{Y-neighbors}(F_Y)]`, one weighted-mean aggregation over the
//! building adjacency; X and Z use their features alone. Features are inputs,
//! not parameters, so the aggregation is computed once.

use ndarray::{concatenate, Array1, Array2, Axis};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::NodeType;
use crate::loss::{Logits, LossGradient};
use crate::optim::Optimizer;
use crate::topo::SymmetricEdges;

/// Width of the seeded Gaussian features used for node types that come
/// without features.
pub const DEFAULT_FEATURE_DIM: usize = 16;

#[derive(Debug, Clone, Default)]
pub struct EncoderInputs {
    /// Per-type feature matrices (X, Y, Z), rows in graph index order.
    pub features: [Option<Array2<f64>>; 3],
    /// Y–Y connectivity in graph Y indices.
    pub yy: Option<SymmetricEdges>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Head {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array2<f64>,
    pub b2: Array1<f64>,
}

impl Head {
    fn new<R: Rng>(rng: &mut R, input: usize, hidden: usize, out: usize) -> Self {
        Self {
            w1: glorot(rng, input, hidden),
            b1: Array1::zeros(hidden),
            w2: glorot(rng, hidden, out),
            b2: Array1::zeros(out),
        }
    }

    fn is_finite(&self) -> bool {
        self.w1
            .iter()
            .chain(self.b1.iter())
            .chain(self.w2.iter())
            .chain(self.b2.iter())
            .all(|v| v.is_finite())
    }
}

fn glorot<R: Rng>(rng: &mut R, fan_in: usize, fan_out: usize) -> Array2<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Array2::from_shape_fn((fan_in, fan_out), |_| rng.random_range(-limit..limit))
}

/// Trainable weights of the three heads.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    pub heads: [Head; 3],
}

/// Encoder with its fixed per-type inputs.
#[derive(Debug, Clone)]
pub struct Encoder {
    inputs: [Array2<f64>; 3],
    pub params: EncoderParams,
}

impl Encoder {
    pub fn new<R: Rng>(
        rng: &mut R,
        node_counts: [usize; 3],
        capacities: [usize; 3],
        hidden: usize,
        inputs: &EncoderInputs,
    ) -> Result<Self> {
        let mut feats: Vec<Array2<f64>> = Vec::with_capacity(3);
        for t in NodeType::ALL {
            let n = node_counts[t.index()];
            let f = match &inputs.features[t.index()] {
                Some(f) if f.nrows() != n => {
                    return Err(Error::DimensionMismatch {
                        what: "feature rows",
                        expected: n,
                        found: f.nrows(),
                    })
                }
                Some(f) => f.clone(),
                None => Array2::from_shape_fn((n, DEFAULT_FEATURE_DIM), |_| {
                    StandardNormal.sample(&mut *rng)
                }),
            };
            feats.push(f);
        }
        let mut feats = feats.into_iter();
        let fx = feats.next().unwrap();
        let fy = feats.next().unwrap();
        let fz = feats.next().unwrap();
        let fy = match &inputs.yy {
            Some(yy) if yy.n != node_counts[1] => {
                return Err(Error::DimensionMismatch {
                    what: "Y–Y adjacency size",
                    expected: node_counts[1],
                    found: yy.n,
                })
            }
            Some(yy) => {
                let agg = mean_aggregate(&fy, yy);
                concatenate(Axis(1), &[fy.view(), agg.view()]).expect("same row count")
            }
            None => {
                let zeros = Array2::zeros(fy.raw_dim());
                concatenate(Axis(1), &[fy.view(), zeros.view()]).expect("same row count")
            }
        };
        let inputs = [fx, fy, fz];
        let heads = [0, 1, 2].map(|t| Head::new(rng, inputs[t].ncols(), hidden, capacities[t]));
        Ok(Self {
            inputs,
            params: EncoderParams { heads },
        })
    }

    pub fn forward(&self) -> Logits {
        let [x, y, z] = [0, 1, 2].map(|t| head_forward(&self.inputs[t], &self.params.heads[t]).1);
        Logits {
            z_x: x,
            z_y: y,
            z_z: z,
        }
    }

    /// Backpropagates logit gradients into the head weights and applies one
    /// optimizer step. Uses optimizer slots 0..12.
    pub fn step(&mut self, grad: &LossGradient, opt: &mut Optimizer) -> Result<()> {
        let g = self.param_gradient(grad);
        for (i, (p, g)) in self.params.heads.iter_mut().zip(&g.heads).enumerate() {
            opt.update(4 * i, &mut p.w1, &g.w1);
            opt.update(4 * i + 1, &mut p.b1, &g.b1);
            opt.update(4 * i + 2, &mut p.w2, &g.w2);
            opt.update(4 * i + 3, &mut p.b2, &g.b2);
            if !p.is_finite() {
                return Err(Error::NonFinite { stage: "encoder" });
            }
        }
        Ok(())
    }

    /// Gradient of the loss with respect to the head weights.
    pub fn param_gradient(&self, grad: &LossGradient) -> EncoderParams {
        EncoderParams {
            heads: [0, 1, 2].map(|i| {
                head_backward(
                    &self.inputs[i],
                    &self.params.heads[i],
                    grad.get(NodeType::ALL[i]),
                )
            }),
        }
    }
}

/// Weighted mean of neighbor feature rows; isolated nodes get zeros.
fn mean_aggregate(f: &Array2<f64>, yy: &SymmetricEdges) -> Array2<f64> {
    let mut out = Array2::zeros(f.raw_dim());
    for (node, nbrs) in yy.neighbor_lists().into_iter().enumerate() {
        let total: f64 = nbrs.iter().map(|&(_, w)| w).sum();
        if total <= 0.0 {
            continue;
        }
        let mut row = out.row_mut(node);
        for (nb, w) in nbrs {
            row.scaled_add(w / total, &f.row(nb));
        }
    }
    out
}

/// Returns (pre-activation, logits).
fn head_forward(input: &Array2<f64>, head: &Head) -> (Array2<f64>, Array2<f64>) {
    let pre = input.dot(&head.w1) + &head.b1;
    let hidden = pre.mapv(|v| v.max(0.0));
    let logits = hidden.dot(&head.w2) + &head.b2;
    (pre, logits)
}

fn head_backward(input: &Array2<f64>, head: &Head, d_logits: &Array2<f64>) -> Head {
    let (pre, _) = head_forward(input, head);
    let hidden = pre.mapv(|v| v.max(0.0));
    let w2 = hidden.t().dot(d_logits);
    let b2 = d_logits.sum_axis(Axis(0));
    let mut d_hidden = d_logits.dot(&head.w2.t());
    ndarray::Zip::from(&mut d_hidden)
        .and(&pre)
        .for_each(|d, &p| {
            if p <= 0.0 {
                *d = 0.0
            }
        });
    let w1 = input.t().dot(&d_hidden);
    let b1 = d_hidden.sum_axis(Axis(0));
    Head { w1, b1, w2, b2 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::loss::{loss_and_gradient, Lambdas, Objective};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn mean_aggregation() {
        let f = ndarray::array![[1.0, 0.0], [0.0, 2.0], [4.0, 4.0]];
        let yy = SymmetricEdges {
            n: 3,
            edges: vec![(0, 1, 1.0), (0, 2, 3.0)],
        };
        let agg = mean_aggregate(&f, &yy);
        assert_eq!(agg.row(0).to_vec(), vec![3.0, 3.5]);
        assert_eq!(agg.row(1).to_vec(), vec![1.0, 0.0]);
        assert_eq!(agg.row(2).to_vec(), vec![1.0, 0.0]);
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let g = fixtures::random_graph(&mut rng, 5, 4, 5, 0.5);
        let inputs = EncoderInputs {
            features: [None, None, None],
            yy: Some(SymmetricEdges {
                n: 4,
                edges: vec![(0, 1, 1.0), (1, 3, 0.5)],
            }),
        };
        let enc = Encoder::new(&mut rng, [5, 4, 5], [2, 3, 2], 6, &inputs).unwrap();
        let obj = Objective::new(3.0, Lambdas::uniform(0.1));
        let (_, dlogits) = loss_and_gradient(&g, &enc.forward(), &obj).unwrap();
        let analytic = enc.param_gradient(&dlogits);

        let loss = |e: &Encoder| {
            crate::loss::dmon3p_loss_with(&g, &e.forward().assignments(), &obj)
                .unwrap()
                .total
        };
        let h = 1e-6;
        for t in 0..3 {
            for (r, c) in [(0, 0), (1, 2), (3, 5)] {
                let mut up = enc.clone();
                up.params.heads[t].w1[[r, c]] += h;
                let mut down = enc.clone();
                down.params.heads[t].w1[[r, c]] -= h;
                let fd = (loss(&up) - loss(&down)) / (2.0 * h);
                let an = analytic.heads[t].w1[[r, c]];
                assert!(
                    (fd - an).abs() <= 1e-7 + 1e-4 * an.abs(),
                    "w1 t{t} fd {fd} an {an}"
                );
            }
            for c in 0..analytic.heads[t].b2.len() {
                let mut up = enc.clone();
                up.params.heads[t].b2[c] += h;
                let mut down = enc.clone();
                down.params.heads[t].b2[c] -= h;
                let fd = (loss(&up) - loss(&down)) / (2.0 * h);
                let an = analytic.heads[t].b2[c];
                assert!(
                    (fd - an).abs() <= 1e-7 + 1e-4 * an.abs(),
                    "b2 t{t} fd {fd} an {an}"
                );
            }
        }
    }

    #[test]
    fn feature_row_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let inputs = EncoderInputs {
            features: [Some(Array2::zeros((3, 2))), None, None],
            yy: None,
        };
        assert!(Encoder::new(&mut rng, [2, 2, 2], [2, 2, 2], 4, &inputs).is_err());
    }
}
