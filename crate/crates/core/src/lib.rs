//! Differentiable tripartite modularity (DMoN-3p).
//!
//! Graphs with three node types X, Y, Z where every X–Z interaction passes
//! through a pivot in Y. The crate computes triadic co-path fractions exactly
//! through a per-pivot factorization, turns them into a soft tripartite
//! modularity with temperature-controlled community matching, and trains
//! soft assignments end to end with analytic gradients.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops mirror the sums they compute over several parallel arrays.
#![allow(clippy::needless_range_loop)]

pub mod copath;
pub mod encoder;
pub mod error;
pub mod fixtures;
pub mod graph;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod synth;
pub mod topo;
pub mod train;

pub use copath::{
    aggregate_pivots, brute_force_fractions, triadic_fractions, triadic_fractions_with,
    AssignmentSet, FlowNormalization, PivotAggregates, TriadicFractions,
};
pub use error::{Error, Result};
pub use graph::{load_graph, EdgeRecord, NodeType, NodeUniverse, TripartiteGraph};
pub use loss::{
    collapse_regularizer, dmon3p_loss, loss_gradient, null_model, q_tri_soft, soft_matching,
    Lambdas, Logits, LossBreakdown, LossGradient, MatchingWeights, Objective,
};
pub use metrics::{diagnostics, nmi, TypeDiagnostics};
pub use synth::{generate, PlantedTruth, SynthSpec};
pub use train::{
    ablate_flow_normalization, beta_schedule, train, Backend, TrainConfig, TrainReport,
};
