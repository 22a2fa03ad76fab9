//! Soft tripartite modularity and the DMoN-3p training objective.
//!
//! Forward: logits → row-softmax → pivot aggregates → triadic fractions `e`
//! → soft matching (α, γ) → `Q_tri-soft`; plus one collapse penalty per node
//! type. The backward pass is written out by hand and follows the same chain
//! in reverse, including the dependence of α and γ on `e`.

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::copath::{
    aggregate_pivots, as_slice, triadic_fractions_with, AssignmentSet, FlowNormalization,
    TriadicFractions, PIVOT_CHUNK,
};
use crate::error::{Error, Result};
use crate::graph::{NodeType, TripartiteGraph};

/// Soft correspondences between community sets: `alpha` is M_c×L and
/// `gamma` is M_c×N_c, both row-stochastic.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchingWeights {
    pub alpha: Array2<f64>,
    pub gamma: Array2<f64>,
    pub beta: f64,
}

/// Bipartite confusion matrices `E^XY` (L×M_c) and `E^YZ` (M_c×N_c).
pub fn confusion_matrices(e: &TriadicFractions) -> (Array2<f64>, Array2<f64>) {
    (e.e.sum_axis(Axis(2)), e.e.sum_axis(Axis(0)))
}

/// α_{m,l} ∝ exp(β E^XY_{lm}) over l; γ_{m,n} ∝ exp(β E^YZ_{mn}) over n.
pub fn soft_matching(e: &TriadicFractions, beta: f64) -> Result<MatchingWeights> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "inverse temperature must be positive and finite, got {beta}"
        )));
    }
    if !e.is_finite() {
        return Err(Error::NonFinite { stage: "matching" });
    }
    let (exy, eyz) = confusion_matrices(e);
    let alpha = tempered_softmax(exy.t(), beta);
    let gamma = tempered_softmax(eyz.view(), beta);
    Ok(MatchingWeights { alpha, gamma, beta })
}

fn tempered_softmax(scores: ArrayView2<f64>, beta: f64) -> Array2<f64> {
    let mut out = Array2::zeros(scores.raw_dim());
    for (src, mut dst) in scores.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))) {
        let max = src.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for (d, &s) in dst.iter_mut().zip(src) {
            *d = (beta * (s - max)).exp();
            sum += *d;
        }
        dst.mapv_inplace(|v| v / sum);
    }
    out
}

/// Outer product of the three marginals.
pub fn null_model(e: &TriadicFractions) -> Array3<f64> {
    let (l, m, n) = e.dims();
    Array3::from_shape_fn((l, m, n), |(li, mi, ni)| e.a_x[li] * e.a_y[mi] * e.a_z[ni])
}

/// `Σ_{lmn} α_{m,l} γ_{m,n} (e_lmn − a^X_l a^Y_m a^Z_n)`.
pub fn q_tri_soft(e: &TriadicFractions, matching: &MatchingWeights) -> f64 {
    let (l, m, n) = e.dims();
    let mut q = 0.0;
    for mi in 0..m {
        for li in 0..l {
            let alpha = matching.alpha[[mi, li]];
            let ax = e.a_x[li] * e.a_y[mi];
            for ni in 0..n {
                let d = e.e[[li, mi, ni]] - ax * e.a_z[ni];
                q += alpha * matching.gamma[[mi, ni]] * d;
            }
        }
    }
    q
}

/// DMoN collapse penalty `(√K / n) ‖Σ_i S_i‖₂ − 1`, clipped at 0.
pub fn collapse_regularizer(s: ArrayView2<f64>) -> f64 {
    collapse_raw(s).max(0.0)
}

fn collapse_raw(s: ArrayView2<f64>) -> f64 {
    let (n, k) = s.dim();
    if n == 0 {
        return 0.0;
    }
    let col = s.sum_axis(Axis(0));
    (k as f64).sqrt() / n as f64 * col.dot(&col).sqrt() - 1.0
}

/// Collapse penalty weights per node type.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lambdas {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Lambdas {
    pub fn uniform(v: f64) -> Self {
        Self { x: v, y: v, z: v }
    }

    pub fn zero() -> Self {
        Self::uniform(0.0)
    }

    fn as_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

/// Everything besides the assignments that the loss depends on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub beta: f64,
    pub lambdas: Lambdas,
    pub flow: FlowNormalization,
}

impl Objective {
    pub fn new(beta: f64, lambdas: Lambdas) -> Self {
        Self {
            beta,
            lambdas,
            flow: FlowNormalization::Degree,
        }
    }

    pub fn with_flow(mut self, flow: FlowNormalization) -> Self {
        self.flow = flow;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub q_tri_soft: f64,
    pub collapse_x: f64,
    pub collapse_y: f64,
    pub collapse_z: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn assemble(q: f64, collapse: [f64; 3], lambdas: Lambdas) -> Self {
        let lam = lambdas.as_array();
        let total = -q + lam[0] * collapse[0] + lam[1] * collapse[1] + lam[2] * collapse[2];
        Self {
            q_tri_soft: q,
            collapse_x: collapse[0],
            collapse_y: collapse[1],
            collapse_z: collapse[2],
            total,
        }
    }
}

/// Full forward pass on fixed assignments.
pub fn dmon3p_loss(
    g: &TripartiteGraph,
    s: &AssignmentSet,
    beta: f64,
    lambdas: Lambdas,
) -> Result<LossBreakdown> {
    dmon3p_loss_with(g, s, &Objective::new(beta, lambdas))
}

pub fn dmon3p_loss_with(
    g: &TripartiteGraph,
    s: &AssignmentSet,
    obj: &Objective,
) -> Result<LossBreakdown> {
    Ok(forward(g, s, obj)?.breakdown)
}

/// Pre-softmax logits for the three node types.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    pub z_x: Array2<f64>,
    pub z_y: Array2<f64>,
    pub z_z: Array2<f64>,
}

impl Logits {
    pub fn assignments(&self) -> AssignmentSet {
        AssignmentSet::from_logits(&self.z_x, &self.z_y, &self.z_z)
    }

    pub fn get(&self, t: NodeType) -> &Array2<f64> {
        match t {
            NodeType::X => &self.z_x,
            NodeType::Y => &self.z_y,
            NodeType::Z => &self.z_z,
        }
    }

    pub fn get_mut(&mut self, t: NodeType) -> &mut Array2<f64> {
        match t {
            NodeType::X => &mut self.z_x,
            NodeType::Y => &mut self.z_y,
            NodeType::Z => &mut self.z_z,
        }
    }

    pub fn is_finite(&self) -> bool {
        [&self.z_x, &self.z_y, &self.z_z]
            .iter()
            .all(|z| z.iter().all(|v| v.is_finite()))
    }
}

/// Gradient of `LossBreakdown::total` with respect to each logit matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGradient {
    pub d_x: Array2<f64>,
    pub d_y: Array2<f64>,
    pub d_z: Array2<f64>,
}

impl LossGradient {
    pub fn get(&self, t: NodeType) -> &Array2<f64> {
        match t {
            NodeType::X => &self.d_x,
            NodeType::Y => &self.d_y,
            NodeType::Z => &self.d_z,
        }
    }

    pub fn max_abs(&self) -> f64 {
        [&self.d_x, &self.d_y, &self.d_z]
            .iter()
            .flat_map(|d| d.iter())
            .fold(0.0f64, |acc, v| acc.max(v.abs()))
    }
}

pub fn loss_gradient(
    g: &TripartiteGraph,
    logits: &Logits,
    beta: f64,
    lambdas: Lambdas,
) -> Result<LossGradient> {
    Ok(loss_and_gradient(g, logits, &Objective::new(beta, lambdas))?.1)
}

/// Loss and its exact gradient with respect to the logits, β held constant.
pub fn loss_and_gradient(
    g: &TripartiteGraph,
    logits: &Logits,
    obj: &Objective,
) -> Result<(LossBreakdown, LossGradient)> {
    if !logits.is_finite() {
        return Err(Error::NonFinite { stage: "logits" });
    }
    let s = logits.assignments();
    let fwd = forward(g, &s, obj)?;
    let grads_s = backward(g, &s, obj, &fwd)?;
    let d = [&s.s_x, &s.s_y, &s.s_z]
        .into_iter()
        .zip(grads_s)
        .map(|(s, gs)| softmax_backward(s, &gs))
        .collect::<Vec<_>>();
    let mut d = d.into_iter();
    let grad = LossGradient {
        d_x: d.next().unwrap(),
        d_y: d.next().unwrap(),
        d_z: d.next().unwrap(),
    };
    if grad.max_abs().is_nan() || !grad.max_abs().is_finite() {
        return Err(Error::NonFinite { stage: "backward" });
    }
    Ok((fwd.breakdown, grad))
}

/// Gradient with respect to the assignment matrices themselves (before the
/// softmax Jacobian is applied).
pub fn assignment_gradient(
    g: &TripartiteGraph,
    s: &AssignmentSet,
    obj: &Objective,
) -> Result<(LossBreakdown, [Array2<f64>; 3])> {
    let fwd = forward(g, s, obj)?;
    let grads = backward(g, s, obj, &fwd)?;
    Ok((fwd.breakdown, grads))
}

struct Forward {
    agg_a: Array2<f64>,
    agg_c: Array2<f64>,
    fractions: TriadicFractions,
    matching: MatchingWeights,
    breakdown: LossBreakdown,
}

fn forward(g: &TripartiteGraph, s: &AssignmentSet, obj: &Objective) -> Result<Forward> {
    let agg = aggregate_pivots(g, s)?;
    if agg
        .a_agg
        .iter()
        .chain(agg.c_agg.iter())
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite { stage: "aggregate" });
    }
    let fractions = triadic_fractions_with(g, &agg, s, obj.flow)?;
    if !fractions.is_finite() {
        return Err(Error::NonFinite { stage: "fractions" });
    }
    let matching = soft_matching(&fractions, obj.beta)?;
    let q = q_tri_soft(&fractions, &matching);
    if !q.is_finite() {
        return Err(Error::NonFinite {
            stage: "modularity",
        });
    }
    let collapse = [
        collapse_regularizer(s.s_x.view()),
        collapse_regularizer(s.s_y.view()),
        collapse_regularizer(s.s_z.view()),
    ];
    if collapse.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            stage: "regularizer",
        });
    }
    Ok(Forward {
        agg_a: agg.a_agg,
        agg_c: agg.c_agg,
        fractions,
        matching,
        breakdown: LossBreakdown::assemble(q, collapse, obj.lambdas),
    })
}

/// ∂Q/∂e, through the direct term, the marginals in the null model, and the
/// two softmax matchings.
fn modularity_grad_e(e: &TriadicFractions, mw: &MatchingWeights) -> Array3<f64> {
    let (l, m, n) = e.dims();
    let (alpha, gamma, beta) = (&mw.alpha, &mw.gamma, mw.beta);
    let w = |li: usize, mi: usize, ni: usize| alpha[[mi, li]] * gamma[[mi, ni]];

    let mut gx = Array1::<f64>::zeros(l);
    let mut gy = Array1::<f64>::zeros(m);
    let mut gz = Array1::<f64>::zeros(n);
    let mut g_alpha = Array2::<f64>::zeros((m, l));
    let mut g_gamma = Array2::<f64>::zeros((m, n));
    for li in 0..l {
        for mi in 0..m {
            for ni in 0..n {
                let wv = w(li, mi, ni);
                gx[li] -= wv * e.a_y[mi] * e.a_z[ni];
                gy[mi] -= wv * e.a_x[li] * e.a_z[ni];
                gz[ni] -= wv * e.a_x[li] * e.a_y[mi];
                let d = e.e[[li, mi, ni]] - e.a_x[li] * e.a_y[mi] * e.a_z[ni];
                g_alpha[[mi, li]] += gamma[[mi, ni]] * d;
                g_gamma[[mi, ni]] += alpha[[mi, li]] * d;
            }
        }
    }
    let h_xy = softmax_score_grad(alpha, &g_alpha, beta); // M×L, indexed [m, l]
    let h_yz = softmax_score_grad(gamma, &g_gamma, beta); // M×N

    Array3::from_shape_fn((l, m, n), |(li, mi, ni)| {
        w(li, mi, ni) + gx[li] + gy[mi] + gz[ni] + h_xy[[mi, li]] + h_yz[[mi, ni]]
    })
}

/// Gradient of a row-wise tempered softmax with respect to its scores.
fn softmax_score_grad(p: &Array2<f64>, g: &Array2<f64>, beta: f64) -> Array2<f64> {
    let mut out = Array2::zeros(p.raw_dim());
    for ((p_row, g_row), mut o_row) in p
        .axis_iter(Axis(0))
        .zip(g.axis_iter(Axis(0)))
        .zip(out.axis_iter_mut(Axis(0)))
    {
        let mean = p_row.dot(&g_row);
        for ((o, &pv), &gv) in o_row.iter_mut().zip(p_row).zip(g_row) {
            *o = beta * pv * (gv - mean);
        }
    }
    out
}

/// Returns ∂total/∂S for S_X, S_Y, S_Z.
fn backward(
    g: &TripartiteGraph,
    s: &AssignmentSet,
    obj: &Objective,
    fwd: &Forward,
) -> Result<[Array2<f64>; 3]> {
    let [l, m, n] = s.capacities();
    let ge = modularity_grad_e(&fwd.fractions, &fwd.matching).mapv(|v| -v);
    let ge = ge.as_slice().expect("fresh tensor is standard-layout");
    if ge.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { stage: "backward" });
    }

    let weights = obj.flow.pivot_weights(g);
    let inv_p = 1.0 / g.effective_pivots().len() as f64;
    let a = as_slice(&fwd.agg_a);
    let c = as_slice(&fwd.agg_c);
    let sy = as_slice(&s.s_y);

    let mut g_a = vec![0.0; g.n_y() * l];
    let mut g_sy = vec![0.0; g.n_y() * m];
    let mut g_c = vec![0.0; g.n_y() * n];
    g_a.par_chunks_mut(l)
        .zip(g_sy.par_chunks_mut(m))
        .zip(g_c.par_chunks_mut(n))
        .enumerate()
        .with_min_len(PIVOT_CHUNK)
        .for_each(|(j, ((ga, gy), gc))| {
            let coeff = weights[j] * inv_p;
            if coeff == 0.0 {
                return;
            }
            let a_row = &a[j * l..(j + 1) * l];
            let y_row = &sy[j * m..(j + 1) * m];
            let c_row = &c[j * n..(j + 1) * n];
            for (li, &av) in a_row.iter().enumerate() {
                let mut acc_a = 0.0;
                for (mi, &yv) in y_row.iter().enumerate() {
                    let base = (li * m + mi) * n;
                    let slab = &ge[base..base + n];
                    // b = Σ_n ge[l,m,n] C[j,n]
                    let b: f64 = slab.iter().zip(c_row).map(|(x, y)| x * y).sum();
                    acc_a += b * yv;
                    gy[mi] += coeff * av * b;
                    let u = coeff * av * yv;
                    for (dst, &gv) in gc.iter_mut().zip(slab) {
                        *dst += u * gv;
                    }
                }
                ga[li] = coeff * acc_a;
            }
        });

    let mut g_sx = Array2::<f64>::zeros((g.n_x(), l));
    for e in g.edges_xy() {
        let src = &g_a[e.pivot * l..(e.pivot + 1) * l];
        for (dst, &v) in g_sx.row_mut(e.node).iter_mut().zip(src) {
            *dst += e.weight * v;
        }
    }
    let mut g_sz = Array2::<f64>::zeros((g.n_z(), n));
    for e in g.edges_yz() {
        let src = &g_c[e.pivot * n..(e.pivot + 1) * n];
        for (dst, &v) in g_sz.row_mut(e.node).iter_mut().zip(src) {
            *dst += e.weight * v;
        }
    }
    let mut g_sy = Array2::from_shape_vec((g.n_y(), m), g_sy).expect("shape matches buffer");

    let lam = obj.lambdas.as_array();
    collapse_backward(s.s_x.view(), lam[0], &mut g_sx);
    collapse_backward(s.s_y.view(), lam[1], &mut g_sy);
    collapse_backward(s.s_z.view(), lam[2], &mut g_sz);
    Ok([g_sx, g_sy, g_sz])
}

fn collapse_backward(s: ArrayView2<f64>, lambda: f64, grad: &mut Array2<f64>) {
    if lambda == 0.0 || collapse_raw(s) <= 0.0 {
        return;
    }
    let (n, k) = s.dim();
    let col = s.sum_axis(Axis(0));
    let norm = col.dot(&col).sqrt();
    let scale = lambda * (k as f64).sqrt() / (n as f64 * norm);
    let d = col.mapv(|v| scale * v);
    for mut row in grad.axis_iter_mut(Axis(0)) {
        row += &d;
    }
}

/// Pulls ∂L/∂S back through a row softmax: `S ⊙ (G − rowsum(S ⊙ G))`.
pub fn softmax_backward(s: &Array2<f64>, g: &Array2<f64>) -> Array2<f64> {
    let mut out = Array2::zeros(s.raw_dim());
    for ((s_row, g_row), mut o_row) in s
        .axis_iter(Axis(0))
        .zip(g.axis_iter(Axis(0)))
        .zip(out.axis_iter_mut(Axis(0)))
    {
        let mean = s_row.dot(&g_row);
        for ((o, &sv), &gv) in o_row.iter_mut().zip(s_row).zip(g_row) {
            *o = sv * (gv - mean);
        }
    }
    out
}
