//! Full-batch training loop with linear β annealing.

use std::io::Write;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::copath::{AssignmentSet, FlowNormalization};
use crate::encoder::{Encoder, EncoderInputs};
use crate::error::{Error, Result};
use crate::graph::{NodeType, TripartiteGraph};
use crate::loss::{
    dmon3p_loss_with, loss_and_gradient, Lambdas, Logits, LossBreakdown, LossGradient, Objective,
};
use crate::metrics::{diagnostics, hard_labels, TypeDiagnostics, DEFAULT_MASS_THRESHOLD};
use crate::optim::{Optimizer, OptimizerKind};

/// Upper bound on per-type capacities; keeps the dense tensor at most 64³.
pub const K_MAX: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    #[default]
    FreeLogits,
    Encoder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    /// Heavy-ball coefficient for `gd`, first-moment decay for `adam`.
    pub momentum: f64,
    pub lambda_x: f64,
    pub lambda_y: f64,
    pub lambda_z: f64,
    pub beta_start: f64,
    pub beta_end: f64,
    pub epochs: usize,
    /// L, M_c, N_c.
    pub capacities: [usize; 3],
    pub seed: u64,
    pub backend: Backend,
    pub hidden: usize,
    pub flow_normalization: FlowNormalization,
    pub mass_threshold: f64,
    /// Half-width of the uniform logit initialization.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            optimizer: OptimizerKind::Adam,
            learning_rate: 4.4e-3,
            momentum: 0.9,
            lambda_x: 0.068,
            lambda_y: 0.068,
            lambda_z: 0.068,
            beta_start: 2.0,
            beta_end: 7.16,
            epochs: 150,
            capacities: [K_MAX; 3],
            seed: 0,
            backend: Backend::FreeLogits,
            hidden: 64,
            flow_normalization: FlowNormalization::Degree,
            mass_threshold: DEFAULT_MASS_THRESHOLD,
            init_scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn lambdas(&self) -> Lambdas {
        Lambdas {
            x: self.lambda_x,
            y: self.lambda_y,
            z: self.lambda_z,
        }
    }

    pub fn set_lambdas(&mut self, v: f64) {
        self.lambda_x = v;
        self.lambda_y = v;
        self.lambda_z = v;
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            ));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            ));
        }
        for (name, v) in [
            ("lambda_x", self.lambda_x),
            ("lambda_y", self.lambda_y),
            ("lambda_z", self.lambda_z),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be ≥ 0, got {v}"));
            }
        }
        if !(self.beta_start > 0.0 && self.beta_start.is_finite()) {
            return bad(format!(
                "beta_start must be positive, got {}",
                self.beta_start
            ));
        }
        if !(self.beta_end >= self.beta_start && self.beta_end.is_finite()) {
            return bad(format!(
                "beta_end ({}) must be ≥ beta_start ({})",
                self.beta_end, self.beta_start
            ));
        }
        for (t, &c) in NodeType::ALL.iter().zip(&self.capacities) {
            if c == 0 || c > K_MAX {
                return bad(format!("capacity for {t} must lie in 1..={K_MAX}, got {c}"));
            }
        }
        if self.hidden == 0 {
            return bad("hidden width must be ≥ 1".into());
        }
        if !(self.mass_threshold >= 0.0 && self.mass_threshold < 1.0) {
            return bad(format!(
                "mass_threshold must lie in [0, 1), got {}",
                self.mass_threshold
            ));
        }
        if !(self.init_scale >= 0.0 && self.init_scale.is_finite()) {
            return bad(format!("init_scale must be ≥ 0, got {}", self.init_scale));
        }
        Ok(())
    }

    fn objective(&self, beta: f64) -> Objective {
        Objective::new(beta, self.lambdas()).with_flow(self.flow_normalization)
    }
}

/// Linear annealing: β(t) = β₀ + (β₁ − β₀)·t/(epochs − 1).
pub fn beta_schedule(cfg: &TrainConfig, epoch: usize) -> Result<f64> {
    if epoch >= cfg.epochs {
        return Err(Error::InvalidInput(format!(
            "epoch {epoch} outside schedule of {} epochs",
            cfg.epochs
        )));
    }
    if cfg.epochs == 1 || epoch == cfg.epochs - 1 {
        return Ok(cfg.beta_end);
    }
    let frac = epoch as f64 / (cfg.epochs - 1) as f64;
    Ok(cfg.beta_start + (cfg.beta_end - cfg.beta_start) * frac)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub beta: f64,
    /// Loss at the parameters the epoch's gradient step started from.
    pub loss: LossBreakdown,
    pub diagnostics: [TypeDiagnostics; 3],
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub epochs: Vec<EpochRecord>,
    /// Loss of the final assignments at the last scheduled β (`beta_end` when
    /// no epoch ran).
    pub final_loss: LossBreakdown,
    pub final_diagnostics: [TypeDiagnostics; 3],
    #[serde(skip)]
    pub assignments: Option<AssignmentSet>,
}

impl TrainReport {
    pub fn loss_series(&self) -> Vec<f64> {
        self.epochs.iter().map(|r| r.loss.total).collect()
    }

    pub fn final_assignments(&self) -> &AssignmentSet {
        self.assignments.as_ref().expect("report produced by train")
    }

    /// One row per node: argmax community and its probability.
    pub fn write_assignments_csv<W: Write>(&self, g: &TripartiteGraph, out: W) -> Result<()> {
        let s = self.final_assignments();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_type", "node_id", "community", "probability"])?;
        for t in NodeType::ALL {
            let m = s.get(t);
            for (i, c) in hard_labels(m.view()).into_iter().enumerate() {
                w.write_record([
                    t.as_str(),
                    g.universe().id(t, i),
                    &c.to_string(),
                    &m[[i, c]].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

enum Model {
    Free(Logits),
    Encoder(Box<Encoder>),
}

impl Model {
    fn logits(&self) -> Logits {
        match self {
            Model::Free(logits) => logits.clone(),
            Model::Encoder(enc) => enc.forward(),
        }
    }

    fn step(&mut self, grad: &LossGradient, opt: &mut Optimizer) -> Result<()> {
        opt.begin_step();
        match self {
            Model::Free(logits) => {
                for t in NodeType::ALL {
                    opt.update(t.index(), logits.get_mut(t), grad.get(t));
                }
                if !logits.is_finite() {
                    return Err(Error::NonFinite { stage: "logits" });
                }
                Ok(())
            }
            Model::Encoder(enc) => enc.step(grad, opt),
        }
    }
}

fn init_logits(rng: &mut ChaCha8Rng, counts: [usize; 3], caps: [usize; 3], scale: f64) -> Logits {
    let mut draw = |n: usize, k: usize| {
        Array2::from_shape_fn((n, k), |_| {
            if scale == 0.0 {
                0.0
            } else {
                rng.random_range(-scale..=scale)
            }
        })
    };
    Logits {
        z_x: draw(counts[0], caps[0]),
        z_y: draw(counts[1], caps[1]),
        z_z: draw(counts[2], caps[2]),
    }
}

/// Trains soft assignments on `g`. `inputs` is only read by the encoder
/// backend.
pub fn train(
    g: &TripartiteGraph,
    inputs: &EncoderInputs,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if g.effective_pivots().is_empty() {
        return Err(Error::EmptyEffectiveGraph);
    }
    let counts = [g.n_x(), g.n_y(), g.n_z()];
    for t in NodeType::ALL {
        let (c, n) = (cfg.capacities[t.index()], counts[t.index()]);
        if c > n {
            log::warn!("capacity {c} for {t} exceeds its {n} nodes");
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = match cfg.backend {
        Backend::FreeLogits => Model::Free(init_logits(
            &mut rng,
            counts,
            cfg.capacities,
            cfg.init_scale,
        )),
        Backend::Encoder => Model::Encoder(Box::new(Encoder::new(
            &mut rng,
            counts,
            cfg.capacities,
            cfg.hidden,
            inputs,
        )?)),
    };

    let mut opt = Optimizer::new(cfg.optimizer, cfg.learning_rate, cfg.momentum);
    let mut records = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        let beta = beta_schedule(cfg, epoch)?;
        let logits = model.logits();
        let (loss, grad) = loss_and_gradient(g, &logits, &cfg.objective(beta)).map_err(|e| {
            if e.is_numerical() {
                Error::NonFiniteLoss { epoch }
            } else {
                e
            }
        })?;
        if !loss.total.is_finite() {
            return Err(Error::NonFiniteLoss { epoch });
        }
        let diag = diagnostics(&logits.assignments(), cfg.mass_threshold);
        model
            .step(&grad, &mut opt)
            .map_err(|_| Error::NonFiniteLoss { epoch })?;
        log::debug!("epoch {epoch} beta {beta:.4} total {:.6}", loss.total);
        records.push(EpochRecord {
            epoch,
            beta,
            loss,
            diagnostics: diag,
            wall_clock_secs: start.elapsed().as_secs_f64(),
        });
    }

    let logits = model.logits();
    if !logits.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: cfg.epochs });
    }
    let s = logits.assignments();
    let final_loss = dmon3p_loss_with(g, &s, &cfg.objective(cfg.beta_end))?;
    if !final_loss.total.is_finite() {
        return Err(Error::NonFiniteLoss { epoch: cfg.epochs });
    }
    Ok(TrainReport {
        config: *cfg,
        epochs: records,
        final_loss,
        final_diagnostics: diagnostics(&s, cfg.mass_threshold),
        assignments: Some(s),
    })
}

/// The same run twice: degree-based pivot weights, then unit weights.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AblationPair {
    pub normalized: TrainReport,
    pub ablated: TrainReport,
}

pub fn ablate_flow_normalization(
    g: &TripartiteGraph,
    inputs: &EncoderInputs,
    cfg: &TrainConfig,
) -> Result<AblationPair> {
    let normalized = train(
        g,
        inputs,
        &TrainConfig {
            flow_normalization: FlowNormalization::Degree,
            ..*cfg
        },
    )?;
    let ablated = train(
        g,
        inputs,
        &TrainConfig {
            flow_normalization: FlowNormalization::Unit,
            ..*cfg
        },
    )?;
    Ok(AblationPair {
        normalized,
        ablated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn cfg(epochs: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn schedule_endpoints_and_midpoint() {
        let c = cfg(150);
        assert_eq!(beta_schedule(&c, 0).unwrap(), 2.0);
        assert_eq!(beta_schedule(&c, 149).unwrap(), 7.16);
        let mid = beta_schedule(&c, 74).unwrap() + beta_schedule(&c, 75).unwrap();
        assert!((mid - 9.16).abs() < 1e-12);
        assert!(beta_schedule(&c, 150).is_err());
        assert_eq!(beta_schedule(&cfg(1), 0).unwrap(), 7.16);
        assert!(beta_schedule(&cfg(0), 0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = [
            TrainConfig {
                beta_end: 1.0,
                ..cfg(3)
            },
            TrainConfig {
                capacities: [0, 2, 2],
                ..cfg(3)
            },
            TrainConfig {
                capacities: [65, 2, 2],
                ..cfg(3)
            },
            TrainConfig {
                learning_rate: 0.0,
                ..cfg(3)
            },
            TrainConfig {
                lambda_y: -1.0,
                ..cfg(3)
            },
        ];
        for c in bad {
            assert!(
                matches!(c.validate(), Err(Error::InvalidConfig(_))),
                "{c:?}"
            );
        }
    }

    #[test]
    fn config_json_defaults_fill_in() {
        let c: TrainConfig =
            serde_json::from_str(r#"{"epochs": 7, "backend": "encoder"}"#).unwrap();
        assert_eq!(c.epochs, 7);
        assert_eq!(c.backend, Backend::Encoder);
        assert_eq!(c.learning_rate, 4.4e-3);
        assert!(serde_json::from_str::<TrainConfig>(r#"{"epoch": 7}"#).is_err());
    }

    #[test]
    fn zero_epochs_reports_initialization() {
        let g = fixtures::two_disjoint_paths();
        let c = TrainConfig {
            capacities: [2, 2, 2],
            ..cfg(0)
        };
        let r = train(&g, &EncoderInputs::default(), &c).unwrap();
        assert!(r.epochs.is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(c.seed);
        let init = init_logits(&mut rng, [2, 2, 2], [2, 2, 2], c.init_scale).assignments();
        assert_eq!(r.final_assignments(), &init);
    }

    #[test]
    fn series_length_equals_epochs() {
        let g = fixtures::two_disjoint_paths();
        let c = TrainConfig {
            capacities: [2, 2, 2],
            ..cfg(13)
        };
        let r = train(&g, &EncoderInputs::default(), &c).unwrap();
        assert_eq!(r.epochs.len(), 13);
        assert_eq!(r.epochs[12].beta, 7.16);
    }

    #[test]
    fn unit_path_ablation_identical() {
        let g = fixtures::unit_path();
        let c = TrainConfig {
            capacities: [2, 2, 2],
            ..cfg(20)
        };
        let pair = ablate_flow_normalization(&g, &EncoderInputs::default(), &c).unwrap();
        assert_eq!(pair.normalized.loss_series(), pair.ablated.loss_series());
    }

    #[test]
    fn assignments_csv_shape() {
        let g = fixtures::two_disjoint_paths();
        let c = TrainConfig {
            capacities: [2, 2, 2],
            ..cfg(2)
        };
        let r = train(&g, &EncoderInputs::default(), &c).unwrap();
        let mut buf = Vec::new();
        r.write_assignments_csv(&g, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "node_type,node_id,community,probability");
        assert_eq!(lines.len(), 1 + 6);
    }
}
