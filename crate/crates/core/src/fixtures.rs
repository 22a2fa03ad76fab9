//! Small graphs and random instances shared by unit, integration and
//! acceptance tests.

use ndarray::Array2;
use rand::Rng;

use crate::copath::{row_softmax, AssignmentSet};
use crate::graph::{load_graph, EdgeRecord, NodeType, TripartiteGraph};
use crate::loss::{dmon3p_loss_with, Logits, LossGradient, Objective};

pub fn graph_from(xy: &[(&str, &str, f64)], yz: &[(&str, &str, f64)]) -> TripartiteGraph {
    load_graph(
        xy.iter().map(|&(a, b, w)| Ok(EdgeRecord::new(a, b, w))),
        yz.iter().map(|&(a, b, w)| Ok(EdgeRecord::new(a, b, w))),
    )
    .expect("fixture graph is valid")
}

pub fn graph_from_owned(
    xy: &[(String, String, f64)],
    yz: &[(String, String, f64)],
) -> TripartiteGraph {
    load_graph(
        xy.iter().map(|(a, b, w)| Ok(EdgeRecord::new(a, b, *w))),
        yz.iter().map(|(a, b, w)| Ok(EdgeRecord::new(a, b, *w))),
    )
    .expect("fixture graph is valid")
}

/// `a1 → b1 → p1` with unit weights.
pub fn unit_path() -> TripartiteGraph {
    graph_from(&[("a1", "b1", 1.0)], &[("b1", "p1", 1.0)])
}

/// Two unit paths `a1 → b1 → p1` and `a2 → b2 → p2` sharing no node.
pub fn two_disjoint_paths() -> TripartiteGraph {
    graph_from(
        &[("a1", "b1", 1.0), ("a2", "b2", 1.0)],
        &[("b1", "p1", 1.0), ("b2", "p2", 1.0)],
    )
}

/// Path `r` hard-assigned to community `r` in every node type.
pub fn two_paths_diagonal(g: &TripartiteGraph) -> AssignmentSet {
    let diag = Array2::from_shape_vec((2, 2), vec![1.0, 0.0, 0.0, 1.0]).unwrap();
    assert_eq!((g.n_x(), g.n_y(), g.n_z()), (2, 2, 2));
    AssignmentSet::new(diag.clone(), diag.clone(), diag).unwrap()
}

/// Random weighted graph in which every node lies on at least one co-path.
/// Each candidate edge is kept with probability `density`; weights are
/// uniform in `[0.1, 3)`.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    n_x: usize,
    n_y: usize,
    n_z: usize,
    density: f64,
) -> TripartiteGraph {
    let mut xy = vec![vec![0.0; n_y]; n_x];
    let mut yz = vec![vec![0.0; n_z]; n_y];
    for row in xy.iter_mut() {
        for w in row.iter_mut() {
            if rng.random::<f64>() < density {
                *w = rng.random_range(0.1..3.0);
            }
        }
    }
    for row in yz.iter_mut() {
        for w in row.iter_mut() {
            if rng.random::<f64>() < density {
                *w = rng.random_range(0.1..3.0);
            }
        }
    }
    // Patch coverage: every pivot needs both sides, every X/Z node a pivot.
    for j in 0..n_y {
        if (0..n_x).all(|i| xy[i][j] == 0.0) {
            xy[rng.random_range(0..n_x)][j] = rng.random_range(0.1..3.0);
        }
        if yz[j].iter().all(|&w| w == 0.0) {
            yz[j][rng.random_range(0..n_z)] = rng.random_range(0.1..3.0);
        }
    }
    for row in xy.iter_mut() {
        if row.iter().all(|&w| w == 0.0) {
            row[rng.random_range(0..n_y)] = rng.random_range(0.1..3.0);
        }
    }
    for k in 0..n_z {
        if (0..n_y).all(|j| yz[j][k] == 0.0) {
            yz[rng.random_range(0..n_y)][k] = rng.random_range(0.1..3.0);
        }
    }

    let mut exy = Vec::new();
    for (i, row) in xy.iter().enumerate() {
        for (j, &w) in row.iter().enumerate() {
            if w > 0.0 {
                exy.push((format!("x{i:04}"), format!("y{j:04}"), w));
            }
        }
    }
    let mut eyz = Vec::new();
    for (j, row) in yz.iter().enumerate() {
        for (k, &w) in row.iter().enumerate() {
            if w > 0.0 {
                eyz.push((format!("y{j:04}"), format!("z{k:04}"), w));
            }
        }
    }
    graph_from_owned(&exy, &eyz)
}

pub fn random_logits<R: Rng>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-scale..scale))
}

/// Row-softmax of random logits in `[-2, 2)`.
pub fn random_assignments<R: Rng>(
    rng: &mut R,
    g: &TripartiteGraph,
    capacities: [usize; 3],
) -> AssignmentSet {
    let sizes = [g.n_x(), g.n_y(), g.n_z()];
    let mut mats = sizes
        .iter()
        .zip(capacities)
        .map(|(&n, k)| row_softmax(random_logits(rng, n, k, 2.0).view()));
    let s_x = mats.next().unwrap();
    let s_y = mats.next().unwrap();
    let s_z = mats.next().unwrap();
    AssignmentSet::new(s_x, s_y, s_z).expect("softmax rows are stochastic")
}

/// Central finite differences of the total loss with respect to every logit.
/// Uses only the forward pass.
pub fn central_differences(
    g: &TripartiteGraph,
    logits: &Logits,
    obj: &Objective,
    step: f64,
) -> LossGradient {
    let f = |lg: &Logits| {
        dmon3p_loss_with(g, &lg.assignments(), obj)
            .expect("forward pass succeeds")
            .total
    };
    let mut work = logits.clone();
    let mut out = [&logits.z_x, &logits.z_y, &logits.z_z].map(|z| Array2::zeros(z.raw_dim()));
    for (t, d) in NodeType::ALL.into_iter().zip(out.iter_mut()) {
        let (rows, cols) = logits.get(t).dim();
        for r in 0..rows {
            for c in 0..cols {
                let orig = logits.get(t)[[r, c]];
                work.get_mut(t)[[r, c]] = orig + step;
                let up = f(&work);
                work.get_mut(t)[[r, c]] = orig - step;
                let down = f(&work);
                work.get_mut(t)[[r, c]] = orig;
                d[[r, c]] = (up - down) / (2.0 * step);
            }
        }
    }
    let [d_x, d_y, d_z] = out;
    LossGradient { d_x, d_y, d_z }
}
