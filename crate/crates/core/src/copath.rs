//! Triadic co-path fractions.
//!
//! `e[l,m,n] = (1/P) Σ_j ω_j A[j,l] S_Y[j,m] C[j,n]` where `P` is the number
//! of effective pivots, `A = scatter(w_XY · S_X)` and `C = scatter(w_YZ · S_Z)`.
//! The |X|×|Y|×|Z| co-path tensor is never formed, except by
//! [`brute_force_fractions`], which exists only as a test oracle.

use std::borrow::Cow;

use ndarray::{Array1, Array2, Array3, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::TripartiteGraph;

/// Pivots per work unit. Partial sums are merged in chunk order, so results do
/// not depend on the number of threads.
pub(crate) const PIVOT_CHUNK: usize = 256;

const STOCHASTIC_TOL: f64 = 1e-9;

/// Row-stochastic soft assignments for the three node types.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentSet {
    pub s_x: Array2<f64>,
    pub s_y: Array2<f64>,
    pub s_z: Array2<f64>,
}

impl AssignmentSet {
    pub fn new(s_x: Array2<f64>, s_y: Array2<f64>, s_z: Array2<f64>) -> Result<Self> {
        for (name, s) in [("S_X", &s_x), ("S_Y", &s_y), ("S_Z", &s_z)] {
            check_row_stochastic(name, s.view())?;
        }
        Ok(Self { s_x, s_y, s_z })
    }

    /// Row-softmax of the three logit matrices.
    pub fn from_logits(z_x: &Array2<f64>, z_y: &Array2<f64>, z_z: &Array2<f64>) -> Self {
        Self {
            s_x: row_softmax(z_x.view()),
            s_y: row_softmax(z_y.view()),
            s_z: row_softmax(z_z.view()),
        }
    }

    /// Every node fully assigned to community 0 of a single-community set.
    pub fn single_community(g: &TripartiteGraph) -> Self {
        Self {
            s_x: Array2::ones((g.n_x(), 1)),
            s_y: Array2::ones((g.n_y(), 1)),
            s_z: Array2::ones((g.n_z(), 1)),
        }
    }

    /// One-hot assignments from hard labels.
    pub fn one_hot(labels: [&[usize]; 3], capacities: [usize; 3]) -> Result<Self> {
        let mk = |labels: &[usize], k: usize| -> Result<Array2<f64>> {
            let mut s = Array2::zeros((labels.len(), k));
            for (i, &c) in labels.iter().enumerate() {
                if c >= k {
                    return Err(Error::InvalidInput(format!(
                        "label {c} out of range for {k} communities"
                    )));
                }
                s[[i, c]] = 1.0;
            }
            Ok(s)
        };
        Ok(Self {
            s_x: mk(labels[0], capacities[0])?,
            s_y: mk(labels[1], capacities[1])?,
            s_z: mk(labels[2], capacities[2])?,
        })
    }

    pub fn capacities(&self) -> [usize; 3] {
        [self.s_x.ncols(), self.s_y.ncols(), self.s_z.ncols()]
    }

    pub fn get(&self, t: crate::graph::NodeType) -> &Array2<f64> {
        match t {
            crate::graph::NodeType::X => &self.s_x,
            crate::graph::NodeType::Y => &self.s_y,
            crate::graph::NodeType::Z => &self.s_z,
        }
    }

    pub fn check_against(&self, g: &TripartiteGraph) -> Result<()> {
        let dims = [
            ("S_X rows", g.n_x(), self.s_x.nrows()),
            ("S_Y rows", g.n_y(), self.s_y.nrows()),
            ("S_Z rows", g.n_z(), self.s_z.nrows()),
        ];
        for (what, expected, found) in dims {
            if expected != found {
                return Err(Error::DimensionMismatch {
                    what,
                    expected,
                    found,
                });
            }
        }
        if self.capacities().contains(&0) {
            return Err(Error::InvalidInput("community capacity must be ≥ 1".into()));
        }
        Ok(())
    }
}

fn check_row_stochastic(name: &str, s: ArrayView2<f64>) -> Result<()> {
    for (i, row) in s.axis_iter(Axis(0)).enumerate() {
        if row.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidInput(format!(
                "{name} row {i} has an entry outside [0, 1]"
            )));
        }
        let sum: f64 = row.sum();
        if (sum - 1.0).abs() > STOCHASTIC_TOL {
            return Err(Error::InvalidInput(format!(
                "{name} row {i} sums to {sum}, not 1"
            )));
        }
    }
    Ok(())
}

/// Numerically stable softmax of every row.
pub fn row_softmax(z: ArrayView2<f64>) -> Array2<f64> {
    let mut out = z.to_owned();
    for mut row in out.axis_iter_mut(Axis(0)) {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    out
}

/// Whether pivot contributions are weighted by `ω_j` or by 1 (ablation).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowNormalization {
    #[default]
    Degree,
    Unit,
}

impl FlowNormalization {
    pub(crate) fn pivot_weights(self, g: &TripartiteGraph) -> Vec<f64> {
        match self {
            FlowNormalization::Degree => g.omega().to_vec(),
            FlowNormalization::Unit => g
                .omega()
                .iter()
                .map(|&w| if w > 0.0 { 1.0 } else { 0.0 })
                .collect(),
        }
    }
}

/// Per-pivot neighbor aggregates `A` (|Y|×L) and `C` (|Y|×N_c).
#[derive(Debug, Clone, PartialEq)]
pub struct PivotAggregates {
    pub a_agg: Array2<f64>,
    pub c_agg: Array2<f64>,
}

/// Weighted scatter-add of neighbor assignments onto pivots.
pub fn aggregate_pivots(g: &TripartiteGraph, s: &AssignmentSet) -> Result<PivotAggregates> {
    s.check_against(g)?;
    let l = s.s_x.ncols();
    let n = s.s_z.ncols();
    let sx = as_slice(&s.s_x);
    let sz = as_slice(&s.s_z);
    let mut a_buf = vec![0.0; g.n_y() * l];
    let mut c_buf = vec![0.0; g.n_y() * n];
    a_buf
        .par_chunks_mut(l)
        .zip(c_buf.par_chunks_mut(n))
        .enumerate()
        .with_min_len(PIVOT_CHUNK)
        .for_each(|(j, (a_row, c_row))| {
            for e in g.pivot_edges_xy(j) {
                let src = &sx[e.node * l..(e.node + 1) * l];
                for (dst, &v) in a_row.iter_mut().zip(src) {
                    *dst += e.weight * v;
                }
            }
            for e in g.pivot_edges_yz(j) {
                let src = &sz[e.node * n..(e.node + 1) * n];
                for (dst, &v) in c_row.iter_mut().zip(src) {
                    *dst += e.weight * v;
                }
            }
        });
    Ok(PivotAggregates {
        a_agg: Array2::from_shape_vec((g.n_y(), l), a_buf).expect("shape matches buffer"),
        c_agg: Array2::from_shape_vec((g.n_y(), n), c_buf).expect("shape matches buffer"),
    })
}

/// Dense triadic fraction tensor with its three marginals.
#[derive(Debug, Clone, PartialEq)]
pub struct TriadicFractions {
    pub e: Array3<f64>,
    pub a_x: Array1<f64>,
    pub a_y: Array1<f64>,
    pub a_z: Array1<f64>,
}

impl TriadicFractions {
    pub fn from_tensor(e: Array3<f64>) -> Self {
        let a_x = e.sum_axis(Axis(2)).sum_axis(Axis(1));
        let a_y = e.sum_axis(Axis(2)).sum_axis(Axis(0));
        let a_z = e.sum_axis(Axis(1)).sum_axis(Axis(0));
        Self { e, a_x, a_y, a_z }
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.e.dim()
    }

    pub fn total(&self) -> f64 {
        self.e.sum()
    }

    pub fn is_finite(&self) -> bool {
        self.e.iter().all(|v| v.is_finite())
    }
}

/// Pivot-factorized triadic fractions with the graph's own `ω_j`.
pub fn triadic_fractions(
    g: &TripartiteGraph,
    agg: &PivotAggregates,
    s: &AssignmentSet,
) -> Result<TriadicFractions> {
    triadic_fractions_with(g, agg, s, FlowNormalization::Degree)
}

pub fn triadic_fractions_with(
    g: &TripartiteGraph,
    agg: &PivotAggregates,
    s: &AssignmentSet,
    flow: FlowNormalization,
) -> Result<TriadicFractions> {
    s.check_against(g)?;
    let [l, m, n] = s.capacities();
    if agg.a_agg.dim() != (g.n_y(), l) {
        return Err(Error::DimensionMismatch {
            what: "pivot aggregate A columns",
            expected: l,
            found: agg.a_agg.ncols(),
        });
    }
    if agg.c_agg.dim() != (g.n_y(), n) {
        return Err(Error::DimensionMismatch {
            what: "pivot aggregate C columns",
            expected: n,
            found: agg.c_agg.ncols(),
        });
    }
    let p = g.effective_pivots().len();
    if p == 0 {
        return Err(Error::EmptyEffectiveGraph);
    }
    let weights = flow.pivot_weights(g);
    let inv_p = 1.0 / p as f64;

    let a = as_slice(&agg.a_agg);
    let c = as_slice(&agg.c_agg);
    let sy = as_slice(&s.s_y);
    let partials: Vec<Vec<f64>> = (0..g.n_y())
        .collect::<Vec<_>>()
        .par_chunks(PIVOT_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; l * m * n];
            for &j in chunk {
                let coeff = weights[j] * inv_p;
                if coeff == 0.0 {
                    continue;
                }
                let a_row = &a[j * l..(j + 1) * l];
                let y_row = &sy[j * m..(j + 1) * m];
                let c_row = &c[j * n..(j + 1) * n];
                for (li, &av) in a_row.iter().enumerate() {
                    let u = coeff * av;
                    for (mi, &yv) in y_row.iter().enumerate() {
                        let v = u * yv;
                        let base = (li * m + mi) * n;
                        for (dst, &cv) in acc[base..base + n].iter_mut().zip(c_row) {
                            *dst += v * cv;
                        }
                    }
                }
            }
            acc
        })
        .collect();

    let mut e = vec![0.0; l * m * n];
    for part in partials {
        for (dst, v) in e.iter_mut().zip(part) {
            *dst += v;
        }
    }
    let e = Array3::from_shape_vec((l, m, n), e).expect("shape matches buffer");
    Ok(TriadicFractions::from_tensor(e))
}

/// Row-major view of a matrix, copying only if it is not in standard layout.
pub(crate) fn as_slice(a: &Array2<f64>) -> Cow<'_, [f64]> {
    match a.as_slice() {
        Some(s) => Cow::Borrowed(s),
        None => Cow::Owned(a.iter().copied().collect()),
    }
}

/// Size bound for [`brute_force_fractions`].
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Explicit co-path enumeration over all `(i, j, k)` triples. Test oracle:
/// degrees and weights are rebuilt here from dense matrices and share no code
/// with the factorized path.
pub fn brute_force_fractions(g: &TripartiteGraph, s: &AssignmentSet) -> Result<TriadicFractions> {
    let (nx, ny, nz) = (g.n_x(), g.n_y(), g.n_z());
    let size = nx as u128 * ny as u128 * nz as u128;
    if size > BRUTE_FORCE_LIMIT {
        return Err(Error::ScaleGuard(size));
    }
    s.check_against(g)?;

    let mut w_xy = vec![vec![0.0f64; ny]; nx];
    for e in g.edges_xy() {
        w_xy[e.node][e.pivot] += e.weight;
    }
    let mut w_yz = vec![vec![0.0f64; nz]; ny];
    for e in g.edges_yz() {
        w_yz[e.pivot][e.node] += e.weight;
    }
    let deg_x: Vec<f64> = (0..ny).map(|j| (0..nx).map(|i| w_xy[i][j]).sum()).collect();
    let deg_z: Vec<f64> = (0..ny).map(|j| w_yz[j].iter().sum()).collect();
    let effective = (0..ny)
        .filter(|&j| deg_x[j] > 0.0 && deg_z[j] > 0.0)
        .count();
    if effective == 0 {
        return Err(Error::EmptyEffectiveGraph);
    }

    let [l, m, n] = s.capacities();
    let mut e = Array3::<f64>::zeros((l, m, n));
    for i in 0..nx {
        for j in 0..ny {
            if w_xy[i][j] == 0.0 {
                continue;
            }
            for k in 0..nz {
                if w_yz[j][k] == 0.0 {
                    continue;
                }
                let weight = w_xy[i][j] * w_yz[j][k] / (deg_x[j] * deg_z[j]);
                for li in 0..l {
                    for mi in 0..m {
                        for ni in 0..n {
                            e[[li, mi, ni]] +=
                                weight * s.s_x[[i, li]] * s.s_y[[j, mi]] * s.s_z[[k, ni]];
                        }
                    }
                }
            }
        }
    }
    e.mapv_inplace(|v| v / effective as f64);
    Ok(TriadicFractions::from_tensor(e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_edge_aggregate() {
        let g = fixtures::graph_from(&[("a1", "b1", 2.0)], &[("b1", "p1", 1.0)]);
        let s = AssignmentSet::new(array![[1.0, 0.0]], array![[1.0]], array![[1.0]]).unwrap();
        let agg = aggregate_pivots(&g, &s).unwrap();
        assert_eq!(agg.a_agg, array![[2.0, 0.0]]);
    }

    #[test]
    fn uniform_assignment_aggregate_is_degree_over_l() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = fixtures::random_graph(&mut rng, 6, 5, 7, 0.5);
        let l = 3;
        let s = AssignmentSet::new(
            Array2::from_elem((g.n_x(), l), 1.0 / l as f64),
            Array2::ones((g.n_y(), 1)),
            Array2::ones((g.n_z(), 1)),
        )
        .unwrap();
        let agg = aggregate_pivots(&g, &s).unwrap();
        for j in 0..g.n_y() {
            for li in 0..l {
                let want = g.deg_x()[j] / l as f64;
                assert!((agg.a_agg[[j, li]] - want).abs() <= 1e-12 * want.max(1.0));
            }
        }
    }

    #[test]
    fn aggregate_matches_direct_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let g = fixtures::random_graph(&mut rng, 5, 4, 6, 0.6);
        let s = fixtures::random_assignments(&mut rng, &g, [2, 3, 2]);
        let agg = aggregate_pivots(&g, &s).unwrap();
        for j in 0..g.n_y() {
            for li in 0..2 {
                let mut want = 0.0;
                for i in 0..g.n_x() {
                    for e in g.edges_xy() {
                        if e.node == i && e.pivot == j {
                            want += e.weight * s.s_x[[i, li]];
                        }
                    }
                }
                assert!((agg.a_agg[[j, li]] - want).abs() < 1e-12);
            }
            for ni in 0..2 {
                let mut want = 0.0;
                for k in 0..g.n_z() {
                    for e in g.edges_yz() {
                        if e.node == k && e.pivot == j {
                            want += e.weight * s.s_z[[k, ni]];
                        }
                    }
                }
                assert!((agg.c_agg[[j, ni]] - want).abs() < 1e-12);
            }
            assert!((agg.a_agg.row(j).sum() - g.deg_x()[j]).abs() <= 1e-9 * g.deg_x()[j]);
            assert!((agg.c_agg.row(j).sum() - g.deg_z()[j]).abs() <= 1e-9 * g.deg_z()[j]);
        }
    }

    #[test]
    fn unit_path_fraction() {
        let g = fixtures::unit_path();
        let s = AssignmentSet::single_community(&g);
        let agg = aggregate_pivots(&g, &s).unwrap();
        let t = triadic_fractions(&g, &agg, &s).unwrap();
        assert_eq!(t.e[[0, 0, 0]], 1.0);
        assert_eq!(t.a_x.to_vec(), vec![1.0]);
        assert_eq!(t.a_y.to_vec(), vec![1.0]);
        assert_eq!(t.a_z.to_vec(), vec![1.0]);
        let bf = brute_force_fractions(&g, &s).unwrap();
        assert_eq!(bf.e[[0, 0, 0]], 1.0);
    }

    #[test]
    fn two_disjoint_paths_fraction() {
        let g = fixtures::two_disjoint_paths();
        let s = fixtures::two_paths_diagonal(&g);
        let agg = aggregate_pivots(&g, &s).unwrap();
        let t = triadic_fractions(&g, &agg, &s).unwrap();
        for ((l, m, n), &v) in t.e.indexed_iter() {
            let want = if l == m && m == n { 0.5 } else { 0.0 };
            assert_eq!(v, want, "e[{l},{m},{n}]");
        }
    }

    #[test]
    fn factorized_matches_brute_force_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = fixtures::random_graph(&mut rng, 5, 4, 6, 0.5);
        let s = fixtures::random_assignments(&mut rng, &g, [2, 2, 2]);
        let agg = aggregate_pivots(&g, &s).unwrap();
        let t = triadic_fractions(&g, &agg, &s).unwrap();
        let bf = brute_force_fractions(&g, &s).unwrap();
        for (a, b) in t.e.iter().zip(bf.e.iter()) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert!((t.total() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn one_sided_pivot_contributes_nothing() {
        let g = fixtures::graph_from(
            &[("a1", "b1", 1.0), ("a2", "b2", 4.0)],
            &[("b1", "p1", 1.0)],
        );
        let s = AssignmentSet::single_community(&g);
        let bf = brute_force_fractions(&g, &s).unwrap();
        assert_eq!(bf.e[[0, 0, 0]], 1.0);
        let agg = aggregate_pivots(&g, &s).unwrap();
        let t = triadic_fractions(&g, &agg, &s).unwrap();
        assert_eq!(t.e[[0, 0, 0]], 1.0);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let g = fixtures::two_disjoint_paths();
        let s = AssignmentSet::new(
            Array2::ones((3, 1)),
            Array2::ones((2, 1)),
            Array2::ones((2, 1)),
        )
        .unwrap();
        assert!(matches!(
            aggregate_pivots(&g, &s),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn scale_guard() {
        let xy: Vec<_> = (0..101)
            .map(|i| (format!("x{i}"), "y0".to_string(), 1.0))
            .collect();
        let mut yz: Vec<_> = (0..100)
            .map(|k| ("y0".to_string(), format!("z{k}"), 1.0))
            .collect();
        yz.extend((1..100).map(|j| (format!("y{j}"), "z0".to_string(), 1.0)));
        let g = fixtures::graph_from_owned(&xy, &yz);
        let s = AssignmentSet::single_community(&g);
        assert!(matches!(
            brute_force_fractions(&g, &s),
            Err(Error::ScaleGuard(_))
        ));
    }

    #[test]
    fn rejects_non_stochastic_rows() {
        assert!(AssignmentSet::new(array![[0.5, 0.6]], array![[1.0]], array![[1.0]]).is_err());
        assert!(AssignmentSet::new(array![[1.5, -0.5]], array![[1.0]], array![[1.0]]).is_err());
    }
}
