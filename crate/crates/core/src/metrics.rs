//! Partition comparison and assignment diagnostics.

use std::collections::HashMap;
use std::io::Read;

use ndarray::{ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::copath::AssignmentSet;
use crate::error::{Error, Result};
use crate::graph::NodeType;

/// Normalized mutual information with arithmetic-mean normalization,
/// `2 I(a;b) / (H(a) + H(b))`. Two constant labelings count as identical (1).
pub fn nmi(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            what: "label vectors",
            expected: a.len(),
            found: b.len(),
        });
    }
    if a.is_empty() {
        return Err(Error::InvalidInput("cannot compare empty labelings".into()));
    }
    let n = a.len() as f64;
    let count = |labels: &[usize]| {
        let mut m: HashMap<usize, usize> = HashMap::new();
        for &l in labels {
            *m.entry(l).or_default() += 1;
        }
        m
    };
    let (ca, cb) = (count(a), count(b));
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
    }

    let ha = entropy_of_counts(ca.values().copied(), n);
    let hb = entropy_of_counts(cb.values().copied(), n);
    if ha + hb == 0.0 {
        return Ok(1.0);
    }
    // Terms are sorted before summation so that nmi(a, b) == nmi(b, a) bit for bit.
    let mut terms: Vec<f64> = joint
        .iter()
        .map(|(&(x, y), &c)| {
            let pxy = c as f64 / n;
            let px = ca[&x] as f64 / n;
            let py = cb[&y] as f64 / n;
            pxy * (pxy / (px * py)).ln()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    let mi: f64 = terms.iter().sum();
    Ok((2.0 * mi / (ha + hb)).clamp(0.0, 1.0))
}

fn entropy_of_counts(counts: impl Iterator<Item = usize>, n: f64) -> f64 {
    let mut terms: Vec<f64> = counts
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Shannon entropy (natural log) of a probability row.
pub fn shannon_entropy<'a>(p: impl IntoIterator<Item = &'a f64>) -> f64 {
    p.into_iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.ln())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeDiagnostics {
    pub active_count: usize,
    pub mean_entropy: f64,
}

pub const DEFAULT_MASS_THRESHOLD: f64 = 1e-3;

/// A community is active when its share of the total assignment mass exceeds
/// `mass_threshold`.
pub fn type_diagnostics(s: ArrayView2<f64>, mass_threshold: f64) -> TypeDiagnostics {
    let n = s.nrows();
    if n == 0 {
        return TypeDiagnostics {
            active_count: 0,
            mean_entropy: 0.0,
        };
    }
    let mass = s.sum_axis(Axis(0));
    let total = mass.sum();
    let active_count = mass.iter().filter(|&&m| m / total > mass_threshold).count();
    let mean_entropy = s
        .axis_iter(Axis(0))
        .map(|row| shannon_entropy(row.iter()))
        .sum::<f64>()
        / n as f64;
    TypeDiagnostics {
        active_count,
        mean_entropy,
    }
}

/// Per-type diagnostics in X, Y, Z order.
pub fn diagnostics(s: &AssignmentSet, mass_threshold: f64) -> [TypeDiagnostics; 3] {
    [
        type_diagnostics(s.s_x.view(), mass_threshold),
        type_diagnostics(s.s_y.view(), mass_threshold),
        type_diagnostics(s.s_z.view(), mass_threshold),
    ]
}

/// Row-wise argmax (first maximum on ties).
pub fn hard_labels(s: ArrayView2<f64>) -> Vec<usize> {
    s.axis_iter(Axis(0))
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect()
}

/// Diagnostics computable from hard labels alone: number of communities
/// holding more than `mass_threshold` of the nodes, and the entropy of the
/// community-size distribution.
pub fn label_diagnostics(labels: &[usize], mass_threshold: f64) -> (usize, f64) {
    let mut counts: HashMap<usize, usize> = HashMap::new();
    for &l in labels {
        *counts.entry(l).or_default() += 1;
    }
    let n = labels.len() as f64;
    let active = counts
        .values()
        .filter(|&&c| c as f64 / n > mass_threshold)
        .count();
    (active, entropy_of_counts(counts.values().copied(), n))
}

/// Hard labels per node type, in file order.
pub type LabelTable = [Vec<(String, usize)>; 3];

/// Reads `node_type,node_id,community[,…]` with a header row, the layout of
/// both `truth.csv` and `assignments.csv`. Extra columns are ignored.
pub fn read_label_csv<R: Read>(reader: R) -> Result<LabelTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(reader);
    let mut table: LabelTable = Default::default();
    let mut seen: [std::collections::HashSet<String>; 3] = Default::default();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec.position().map_or(idx + 2, |p| p.line() as usize);
        let malformed = |reason: String| Error::MalformedRecord { row, reason };
        if rec.len() < 3 {
            return Err(malformed(format!(
                "expected at least 3 fields, found {}",
                rec.len()
            )));
        }
        let t = NodeType::parse(&rec[0])
            .ok_or_else(|| malformed(format!("unknown node type `{}`", &rec[0])))?;
        let c: usize = rec[2]
            .parse()
            .map_err(|_| malformed(format!("unparseable community `{}`", &rec[2])))?;
        let id = crate::graph::nonempty_id(row, &rec[1])?.to_owned();
        if !seen[t.index()].insert(id.clone()) {
            return Err(malformed(format!("duplicate {t} node `{id}`")));
        }
        table[t.index()].push((id, c));
    }
    Ok(table)
}
