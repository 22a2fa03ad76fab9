//! Planted-partition tripartite benchmarks with optional hub pivots.
//!
//! Every node gets one of `k` communities. An X–Y (or Y–Z) pair is linked
//! with probability `p_in` when both ends share a community and `p_out`
//! otherwise, scaled per pivot by a degree multiplier (1, or a Pareto draw in
//! heavy-tailed mode) and capped at 1.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Pareto};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeType, NodeUniverse, TripartiteGraph};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegreeMode {
    #[default]
    Homogeneous,
    /// Each pivot's connection probabilities are multiplied by a
    /// Pareto(scale 1, shape `alpha_tail`) draw.
    Pareto { alpha_tail: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    #[default]
    Unit,
    Lognormal {
        sigma: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_x: usize,
    pub n_y: usize,
    pub n_z: usize,
    pub k: usize,
    pub p_in: f64,
    pub p_out: f64,
    #[serde(default)]
    pub degree_mode: DegreeMode,
    #[serde(default)]
    pub weight_mode: WeightMode,
    #[serde(default)]
    pub seed: u64,
}

impl Default for SynthSpec {
    /// Three planted communities on (300, 120, 300) nodes, p_in 0.3, p_out 0.03.
    fn default() -> Self {
        Self::homogeneous([300, 120, 300], 3, 0.3, 0.03, 0)
    }
}

impl SynthSpec {
    pub fn homogeneous(n: [usize; 3], k: usize, p_in: f64, p_out: f64, seed: u64) -> Self {
        Self {
            n_x: n[0],
            n_y: n[1],
            n_z: n[2],
            k,
            p_in,
            p_out,
            degree_mode: DegreeMode::Homogeneous,
            weight_mode: WeightMode::Unit,
            seed,
        }
    }

    pub fn with_pareto(mut self, alpha_tail: f64) -> Self {
        self.degree_mode = DegreeMode::Pareto { alpha_tail };
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.k == 0 {
            return bad("k must be ≥ 1".into());
        }
        if !(0.0 <= self.p_out && self.p_out < self.p_in && self.p_in <= 1.0) {
            return bad(format!(
                "constraint 0 ≤ p_out < p_in ≤ 1 violated (p_in = {}, p_out = {})",
                self.p_in, self.p_out
            ));
        }
        for (name, n) in [("n_x", self.n_x), ("n_y", self.n_y), ("n_z", self.n_z)] {
            if n < self.k {
                return bad(format!(
                    "constraint {name} ≥ k violated ({name} = {n}, k = {})",
                    self.k
                ));
            }
        }
        if let DegreeMode::Pareto { alpha_tail } = self.degree_mode {
            if !(alpha_tail > 0.0) || !alpha_tail.is_finite() {
                return bad(format!("alpha_tail must be positive, got {alpha_tail}"));
            }
        }
        if let WeightMode::Lognormal { sigma } = self.weight_mode {
            if !(sigma >= 0.0) || !sigma.is_finite() {
                return bad(format!("lognormal sigma must be ≥ 0, got {sigma}"));
            }
        }
        Ok(())
    }
}

/// Ground-truth community of every generated node, indexed like the graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedTruth {
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub z: Vec<usize>,
}

impl PlantedTruth {
    pub fn get(&self, t: NodeType) -> &[usize] {
        match t {
            NodeType::X => &self.x,
            NodeType::Y => &self.y,
            NodeType::Z => &self.z,
        }
    }

    /// `node_type,node_id,community` with a header row.
    pub fn write_csv<W: Write>(&self, universe: &NodeUniverse, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["node_type", "node_id", "community"])?;
        for t in NodeType::ALL {
            for (i, &c) in self.get(t).iter().enumerate() {
                w.write_record([t.as_str(), universe.id(t, i), &c.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Resampling budget for a pivot side or node row left without edges.
const MAX_RESAMPLE: usize = 10_000;

pub fn generate(spec: &SynthSpec) -> Result<(TripartiteGraph, PlantedTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let labels = |n: usize, rng: &mut ChaCha8Rng| {
        let mut v: Vec<usize> = (0..n).map(|i| i % spec.k).collect();
        v.shuffle(rng);
        v
    };
    let truth = PlantedTruth {
        x: labels(spec.n_x, &mut rng),
        y: labels(spec.n_y, &mut rng),
        z: labels(spec.n_z, &mut rng),
    };

    let multiplier: Vec<f64> = match spec.degree_mode {
        DegreeMode::Homogeneous => vec![1.0; spec.n_y],
        DegreeMode::Pareto { alpha_tail } => {
            let dist = Pareto::new(1.0, alpha_tail)
                .map_err(|e| Error::InvalidConfig(format!("pareto: {e}")))?;
            (0..spec.n_y).map(|_| dist.sample(&mut rng)).collect()
        }
    };
    let prob = |a: usize, b: usize, j: usize| -> f64 {
        let base = if a == b { spec.p_in } else { spec.p_out };
        (base * multiplier[j]).min(1.0)
    };

    // adjacency as per-pivot neighbor lists
    let mut xy: Vec<Vec<usize>> = vec![Vec::new(); spec.n_y];
    let mut yz: Vec<Vec<usize>> = vec![Vec::new(); spec.n_y];
    for j in 0..spec.n_y {
        for i in 0..spec.n_x {
            if rng.random::<f64>() < prob(truth.x[i], truth.y[j], j) {
                xy[j].push(i);
            }
        }
        for k in 0..spec.n_z {
            if rng.random::<f64>() < prob(truth.y[j], truth.z[k], j) {
                yz[j].push(k);
            }
        }
    }

    for j in 0..spec.n_y {
        if xy[j].is_empty() {
            xy[j] = resample(&mut rng, spec.n_x, |i| prob(truth.x[i], truth.y[j], j))
                .ok_or_else(|| infeasible("pivot", j, "X"))?;
        }
        if yz[j].is_empty() {
            yz[j] = resample(&mut rng, spec.n_z, |k| prob(truth.y[j], truth.z[k], j))
                .ok_or_else(|| infeasible("pivot", j, "Z"))?;
        }
    }
    let mut x_deg = vec![0usize; spec.n_x];
    let mut z_deg = vec![0usize; spec.n_z];
    for j in 0..spec.n_y {
        xy[j].iter().for_each(|&i| x_deg[i] += 1);
        yz[j].iter().for_each(|&k| z_deg[k] += 1);
    }
    for i in (0..spec.n_x).filter(|&i| x_deg[i] == 0) {
        let pivots = resample(&mut rng, spec.n_y, |j| prob(truth.x[i], truth.y[j], j))
            .ok_or_else(|| infeasible("X node", i, "Y"))?;
        for j in pivots {
            xy[j].push(i);
        }
    }
    for k in (0..spec.n_z).filter(|&k| z_deg[k] == 0) {
        let pivots = resample(&mut rng, spec.n_y, |j| prob(truth.y[j], truth.z[k], j))
            .ok_or_else(|| infeasible("Z node", k, "Y"))?;
        for j in pivots {
            yz[j].push(k);
        }
    }

    let weight_dist = match spec.weight_mode {
        WeightMode::Unit => None,
        WeightMode::Lognormal { sigma } => Some(
            LogNormal::new(0.0, sigma)
                .map_err(|e| Error::InvalidConfig(format!("lognormal: {e}")))?,
        ),
    };
    let draw_weight = |rng: &mut ChaCha8Rng| weight_dist.map_or(1.0, |d| d.sample(rng));
    let mut edges_xy = Vec::new();
    let mut edges_yz = Vec::new();
    for j in 0..spec.n_y {
        xy[j].sort_unstable();
        for &i in &xy[j] {
            edges_xy.push((i, j, draw_weight(&mut rng)));
        }
        yz[j].sort_unstable();
        for &k in &yz[j] {
            edges_yz.push((j, k, draw_weight(&mut rng)));
        }
    }

    let ids = |prefix: &str, n: usize| (0..n).map(|i| format!("{prefix}{i}")).collect();
    let universe =
        NodeUniverse::from_ids(ids("x", spec.n_x), ids("y", spec.n_y), ids("z", spec.n_z))?;
    let g = TripartiteGraph::from_indexed(universe, edges_xy, edges_yz)?;
    Ok((g, truth))
}

/// Redraws a full Bernoulli row until at least one success.
fn resample(rng: &mut ChaCha8Rng, n: usize, prob: impl Fn(usize) -> f64) -> Option<Vec<usize>> {
    for _ in 0..MAX_RESAMPLE {
        let hits: Vec<usize> = (0..n).filter(|&i| rng.random::<f64>() < prob(i)).collect();
        if !hits.is_empty() {
            return Some(hits);
        }
    }
    None
}

fn infeasible(what: &str, idx: usize, side: &str) -> Error {
    Error::Infeasible(format!(
        "{what} {idx} drew no {side} neighbor in {MAX_RESAMPLE} attempts; expected degree too low"
    ))
}
