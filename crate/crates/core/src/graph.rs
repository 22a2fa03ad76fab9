//! Typed tripartite graph: two weighted bipartite layers X–Y and Y–Z that
//! meet only at the pivot set Y.
//!
//! Edges are stored grouped by pivot (CSR-style offsets), sorted by
//! `(pivot, neighbor)`, so every per-pivot reduction runs in a fixed order.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeType {
    X,
    Y,
    Z,
}

impl NodeType {
    pub const ALL: [NodeType; 3] = [NodeType::X, NodeType::Y, NodeType::Z];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NodeType::X => "x",
            NodeType::Y => "y",
            NodeType::Z => "z",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "x" => Some(NodeType::X),
            "y" => Some(NodeType::Y),
            "z" => Some(NodeType::Z),
            _ => None,
        }
    }
}

impl fmt::Display for NodeType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One raw edge as read from an edge file.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub src: String,
    pub dst: String,
    pub weight: f64,
}

impl EdgeRecord {
    pub fn new(src: impl Into<String>, dst: impl Into<String>, weight: f64) -> Self {
        Self {
            src: src.into(),
            dst: dst.into(),
            weight,
        }
    }
}

/// Edge between a pivot and a node of the adjacent layer (X for the X–Y
/// layer, Z for the Y–Z layer).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotEdge {
    pub pivot: usize,
    pub node: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    /// X or Z node whose pivot neighbors were all dropped.
    NoEffectivePivot,
    /// Pivot without any X neighbor.
    PivotMissingX,
    /// Pivot without any Z neighbor.
    PivotMissingZ,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedNode {
    pub id: String,
    pub reason: DropReason,
}

/// External id ↔ dense index maps for the three node types.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeUniverse {
    ids: [Vec<String>; 3],
    #[serde(skip)]
    lookup: [HashMap<String, usize>; 3],
    #[serde(default)]
    dropped: [Vec<DroppedNode>; 3],
}

impl NodeUniverse {
    pub fn from_ids(x: Vec<String>, y: Vec<String>, z: Vec<String>) -> Result<Self> {
        let mut u = NodeUniverse {
            ids: [x, y, z],
            ..Default::default()
        };
        u.rebuild_lookup()?;
        Ok(u)
    }

    fn rebuild_lookup(&mut self) -> Result<()> {
        for t in NodeType::ALL {
            let map = &mut self.lookup[t.index()];
            map.clear();
            for (idx, id) in self.ids[t.index()].iter().enumerate() {
                if map.insert(id.clone(), idx).is_some() {
                    return Err(Error::InvalidInput(format!(
                        "duplicate {t} node id `{id}` in id map"
                    )));
                }
            }
        }
        Ok(())
    }

    fn intern(&mut self, t: NodeType, id: &str) -> usize {
        let ids = &mut self.ids[t.index()];
        *self.lookup[t.index()]
            .entry(id.to_owned())
            .or_insert_with(|| {
                ids.push(id.to_owned());
                ids.len() - 1
            })
    }

    pub fn len(&self, t: NodeType) -> usize {
        self.ids[t.index()].len()
    }

    pub fn ids(&self, t: NodeType) -> &[String] {
        &self.ids[t.index()]
    }

    pub fn id(&self, t: NodeType, index: usize) -> &str {
        &self.ids[t.index()][index]
    }

    pub fn index_of(&self, t: NodeType, id: &str) -> Option<usize> {
        self.lookup[t.index()].get(id).copied()
    }

    pub fn dropped(&self, t: NodeType) -> &[DroppedNode] {
        &self.dropped[t.index()]
    }
}

/// Immutable tripartite graph with precomputed pivot degrees and flow
/// normalization weights.
#[derive(Debug, Clone, PartialEq)]
pub struct TripartiteGraph {
    universe: NodeUniverse,
    edges_xy: Vec<PivotEdge>,
    edges_yz: Vec<PivotEdge>,
    xy_offsets: Vec<usize>,
    yz_offsets: Vec<usize>,
    deg_x: Vec<f64>,
    deg_z: Vec<f64>,
    omega: Vec<f64>,
    effective_pivots: Vec<usize>,
}

impl TripartiteGraph {
    /// Builds a graph from index-based edges. Duplicate pairs are merged by
    /// summing their weights in input order.
    pub fn from_indexed(
        universe: NodeUniverse,
        edges_xy: Vec<(usize, usize, f64)>,
        edges_yz: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        if edges_xy.is_empty() {
            return Err(Error::NoTripartiteStructure("X–Y edge set is empty"));
        }
        if edges_yz.is_empty() {
            return Err(Error::NoTripartiteStructure("Y–Z edge set is empty"));
        }
        let (n_x, n_y, n_z) = (
            universe.len(NodeType::X),
            universe.len(NodeType::Y),
            universe.len(NodeType::Z),
        );
        let xy: Vec<PivotEdge> = edges_xy
            .into_iter()
            .enumerate()
            .map(|(row, (i, j, w))| check_edge(row + 1, i, n_x, j, n_y, w).map(|_| (j, i, w)))
            .map(|r| {
                r.map(|(pivot, node, weight)| PivotEdge {
                    pivot,
                    node,
                    weight,
                })
            })
            .collect::<Result<_>>()?;
        let yz: Vec<PivotEdge> = edges_yz
            .into_iter()
            .enumerate()
            .map(|(row, (j, k, w))| check_edge(row + 1, j, n_y, k, n_z, w).map(|_| (j, k, w)))
            .map(|r| {
                r.map(|(pivot, node, weight)| PivotEdge {
                    pivot,
                    node,
                    weight,
                })
            })
            .collect::<Result<_>>()?;

        let edges_xy = merge_sorted(xy);
        let edges_yz = merge_sorted(yz);
        let xy_offsets = offsets(&edges_xy, n_y);
        let yz_offsets = offsets(&edges_yz, n_y);

        let deg_x = degrees(&edges_xy, &xy_offsets);
        let deg_z = degrees(&edges_yz, &yz_offsets);
        let mut omega = vec![0.0; n_y];
        let mut effective_pivots = Vec::new();
        for j in 0..n_y {
            if deg_x[j] > 0.0 && deg_z[j] > 0.0 {
                omega[j] = 1.0 / (deg_x[j] * deg_z[j]);
                effective_pivots.push(j);
            }
        }

        Ok(Self {
            universe,
            edges_xy,
            edges_yz,
            xy_offsets,
            yz_offsets,
            deg_x,
            deg_z,
            omega,
            effective_pivots,
        })
    }

    pub fn universe(&self) -> &NodeUniverse {
        &self.universe
    }

    pub fn n_x(&self) -> usize {
        self.universe.len(NodeType::X)
    }

    pub fn n_y(&self) -> usize {
        self.universe.len(NodeType::Y)
    }

    pub fn n_z(&self) -> usize {
        self.universe.len(NodeType::Z)
    }

    pub fn node_count(&self, t: NodeType) -> usize {
        self.universe.len(t)
    }

    pub fn edges_xy(&self) -> &[PivotEdge] {
        &self.edges_xy
    }

    pub fn edges_yz(&self) -> &[PivotEdge] {
        &self.edges_yz
    }

    /// X–Y edges incident to pivot `j`, sorted by X index.
    pub fn pivot_edges_xy(&self, j: usize) -> &[PivotEdge] {
        &self.edges_xy[self.xy_offsets[j]..self.xy_offsets[j + 1]]
    }

    /// Y–Z edges incident to pivot `j`, sorted by Z index.
    pub fn pivot_edges_yz(&self, j: usize) -> &[PivotEdge] {
        &self.edges_yz[self.yz_offsets[j]..self.yz_offsets[j + 1]]
    }

    pub fn deg_x(&self) -> &[f64] {
        &self.deg_x
    }

    pub fn deg_z(&self) -> &[f64] {
        &self.deg_z
    }

    /// Flow normalization `1 / (deg_X(j) deg_Z(j))`; zero for pivots that are
    /// not effective.
    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn effective_pivots(&self) -> &[usize] {
        &self.effective_pivots
    }

    pub fn is_effective(&self) -> bool {
        self.effective_pivots.len() == self.n_y() && self.x_covered() && self.z_covered()
    }

    fn x_covered(&self) -> bool {
        let mut seen = vec![false; self.n_x()];
        for e in &self.edges_xy {
            seen[e.node] = true;
        }
        seen.into_iter().all(|s| s)
    }

    fn z_covered(&self) -> bool {
        let mut seen = vec![false; self.n_z()];
        for e in &self.edges_yz {
            seen[e.node] = true;
        }
        seen.into_iter().all(|s| s)
    }

    /// Removes every node that lies on no X→Y→Z co-path and reindexes the
    /// survivors densely, preserving their relative order.
    pub fn reduce_to_effective(&self) -> Result<(TripartiteGraph, NodeUniverse)> {
        if self.effective_pivots.is_empty() {
            return Err(Error::EmptyEffectiveGraph);
        }
        let u = &self.universe;
        let mut keep_y = vec![false; self.n_y()];
        for &j in &self.effective_pivots {
            keep_y[j] = true;
        }
        let mut keep_x = vec![false; self.n_x()];
        for e in self.edges_xy.iter().filter(|e| keep_y[e.pivot]) {
            keep_x[e.node] = true;
        }
        let mut keep_z = vec![false; self.n_z()];
        for e in self.edges_yz.iter().filter(|e| keep_y[e.pivot]) {
            keep_z[e.node] = true;
        }

        let mut dropped = u.dropped.clone();
        let remap = |t: NodeType, keep: &[bool], dropped: &mut Vec<DroppedNode>| {
            let mut map = vec![usize::MAX; keep.len()];
            let mut ids = Vec::new();
            for (old, &k) in keep.iter().enumerate() {
                if k {
                    map[old] = ids.len();
                    ids.push(u.id(t, old).to_owned());
                } else {
                    let reason = match t {
                        NodeType::Y if self.deg_x[old] <= 0.0 => DropReason::PivotMissingX,
                        NodeType::Y => DropReason::PivotMissingZ,
                        _ => DropReason::NoEffectivePivot,
                    };
                    dropped.push(DroppedNode {
                        id: u.id(t, old).to_owned(),
                        reason,
                    });
                }
            }
            (map, ids)
        };
        let (map_x, ids_x) = remap(NodeType::X, &keep_x, &mut dropped[0]);
        let (map_y, ids_y) = remap(NodeType::Y, &keep_y, &mut dropped[1]);
        let (map_z, ids_z) = remap(NodeType::Z, &keep_z, &mut dropped[2]);

        let xy: Vec<_> = self
            .edges_xy
            .iter()
            .filter(|e| keep_y[e.pivot])
            .map(|e| (map_x[e.node], map_y[e.pivot], e.weight))
            .collect();
        let yz: Vec<_> = self
            .edges_yz
            .iter()
            .filter(|e| keep_y[e.pivot])
            .map(|e| (map_y[e.pivot], map_z[e.node], e.weight))
            .collect();

        let mut universe = NodeUniverse::from_ids(ids_x, ids_y, ids_z)?;
        universe.dropped = dropped;
        let g = TripartiteGraph::from_indexed(universe.clone(), xy, yz)?;
        Ok((g, universe))
    }

    pub fn to_snapshot(&self) -> GraphSnapshot {
        GraphSnapshot {
            edges_xy: self
                .edges_xy
                .iter()
                .map(|e| (e.node, e.pivot, e.weight))
                .collect(),
            edges_yz: self
                .edges_yz
                .iter()
                .map(|e| (e.pivot, e.node, e.weight))
                .collect(),
            id_maps: self.universe.clone(),
        }
    }

    pub fn from_snapshot(snapshot: GraphSnapshot) -> Result<Self> {
        let GraphSnapshot {
            edges_xy,
            edges_yz,
            mut id_maps,
        } = snapshot;
        id_maps.rebuild_lookup()?;
        TripartiteGraph::from_indexed(id_maps, edges_xy, edges_yz)
    }

    /// Writes both edge layers as TSV, using external ids.
    pub fn write_tsv<W1: Write, W2: Write>(&self, xy: W1, yz: W2) -> Result<()> {
        let u = &self.universe;
        let mut xy = std::io::BufWriter::new(xy);
        for e in &self.edges_xy {
            writeln!(
                xy,
                "{}\t{}\t{}",
                u.id(NodeType::X, e.node),
                u.id(NodeType::Y, e.pivot),
                e.weight
            )?;
        }
        xy.flush()?;
        let mut yz = std::io::BufWriter::new(yz);
        for e in &self.edges_yz {
            writeln!(
                yz,
                "{}\t{}\t{}",
                u.id(NodeType::Y, e.pivot),
                u.id(NodeType::Z, e.node),
                e.weight
            )?;
        }
        yz.flush()?;
        Ok(())
    }
}

/// JSON snapshot of a graph: index-based edges plus the id maps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphSnapshot {
    pub edges_xy: Vec<(usize, usize, f64)>,
    pub edges_yz: Vec<(usize, usize, f64)>,
    pub id_maps: NodeUniverse,
}

fn check_edge(row: usize, a: usize, na: usize, b: usize, nb: usize, w: f64) -> Result<()> {
    if a >= na || b >= nb {
        return Err(Error::MalformedRecord {
            row,
            reason: format!("node index out of range ({a} of {na}, {b} of {nb})"),
        });
    }
    if !(w > 0.0) || !w.is_finite() {
        return Err(Error::NonPositiveWeight { row, weight: w });
    }
    Ok(())
}

fn merge_sorted(mut edges: Vec<PivotEdge>) -> Vec<PivotEdge> {
    edges.sort_by_key(|e| (e.pivot, e.node));
    let mut out: Vec<PivotEdge> = Vec::with_capacity(edges.len());
    for e in edges {
        match out.last_mut() {
            Some(last) if last.pivot == e.pivot && last.node == e.node => last.weight += e.weight,
            _ => out.push(e),
        }
    }
    out
}

fn offsets(edges: &[PivotEdge], n_pivots: usize) -> Vec<usize> {
    let mut off = vec![0usize; n_pivots + 1];
    for e in edges {
        off[e.pivot + 1] += 1;
    }
    for j in 0..n_pivots {
        off[j + 1] += off[j];
    }
    off
}

fn degrees(edges: &[PivotEdge], offsets: &[usize]) -> Vec<f64> {
    offsets
        .windows(2)
        .map(|w| edges[w[0]..w[1]].iter().map(|e| e.weight).sum())
        .collect()
}

/// Builds a graph from two streams of id-based edge records. Nodes are
/// indexed by order of first appearance: X and Y in the X–Y stream, then
/// remaining Y and Z in the Y–Z stream.
pub fn load_graph<I, J>(edges_xy: I, edges_yz: J) -> Result<TripartiteGraph>
where
    I: IntoIterator<Item = Result<EdgeRecord>>,
    J: IntoIterator<Item = Result<EdgeRecord>>,
{
    let mut universe = NodeUniverse::default();
    let mut xy = Vec::new();
    for (row, rec) in edges_xy.into_iter().enumerate() {
        let rec = rec?;
        validate_weight(row + 1, rec.weight)?;
        let i = universe.intern(NodeType::X, &rec.src);
        let j = universe.intern(NodeType::Y, &rec.dst);
        xy.push((i, j, rec.weight));
    }
    let mut yz = Vec::new();
    for (row, rec) in edges_yz.into_iter().enumerate() {
        let rec = rec?;
        validate_weight(row + 1, rec.weight)?;
        let j = universe.intern(NodeType::Y, &rec.src);
        let k = universe.intern(NodeType::Z, &rec.dst);
        yz.push((j, k, rec.weight));
    }
    TripartiteGraph::from_indexed(universe, xy, yz)
}

fn validate_weight(row: usize, weight: f64) -> Result<()> {
    if weight > 0.0 && weight.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositiveWeight { row, weight })
    }
}

/// Reads `src<TAB>dst<TAB>weight` lines. `#` lines are comments. The row
/// number in errors is the 1-based line number in the file.
pub fn read_edge_tsv<R: Read>(reader: R) -> Result<Vec<EdgeRecord>> {
    let mut out = Vec::new();
    for_each_tsv_row(reader, |row, fields| {
        let [src, dst, weight] = fields else {
            return Err(Error::MalformedRecord {
                row,
                reason: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        };
        let weight: f64 = weight.trim().parse().map_err(|_| Error::MalformedRecord {
            row,
            reason: format!("unparseable weight `{weight}`"),
        })?;
        validate_weight(row, weight)?;
        out.push(EdgeRecord::new(
            nonempty_id(row, src)?,
            nonempty_id(row, dst)?,
            weight,
        ));
        Ok(())
    })?;
    Ok(out)
}

pub(crate) fn nonempty_id(row: usize, id: &str) -> Result<&str> {
    let id = id.trim();
    if id.is_empty() {
        Err(Error::MalformedRecord {
            row,
            reason: "empty node id".into(),
        })
    } else {
        Ok(id)
    }
}

/// Calls `f(line_number, fields)` for every non-blank, non-comment line.
pub(crate) fn for_each_tsv_row<R: Read>(
    reader: R,
    mut f: impl FnMut(usize, &[&str]) -> Result<()>,
) -> Result<()> {
    for (idx, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        f(idx + 1, &fields)?;
    }
    Ok(())
}

/// Loads `edges_xy.tsv` and `edges_yz.tsv`. A missing file is reported as a
/// missing tripartite layer.
pub fn load_graph_files(xy_path: &Path, yz_path: &Path) -> Result<TripartiteGraph> {
    let open = |p: &Path, layer: &'static str| -> Result<Vec<EdgeRecord>> {
        match std::fs::File::open(p) {
            Ok(f) => read_edge_tsv(f),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                Err(Error::NoTripartiteStructure(layer))
            }
            Err(e) => Err(e.into()),
        }
    };
    let xy = open(xy_path, "X–Y edge file is missing")?;
    let yz = open(yz_path, "Y–Z edge file is missing")?;
    load_graph(xy.into_iter().map(Ok), yz.into_iter().map(Ok))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(a: &str, b: &str, w: f64) -> Result<EdgeRecord> {
        Ok(EdgeRecord::new(a, b, w))
    }

    #[test]
    fn unit_single_path() {
        let g = load_graph([rec("a1", "b1", 1.0)], [rec("b1", "p1", 1.0)]).unwrap();
        assert_eq!((g.n_x(), g.n_y(), g.n_z()), (1, 1, 1));
        assert_eq!(g.deg_x(), &[1.0]);
        assert_eq!(g.deg_z(), &[1.0]);
        assert_eq!(g.omega(), &[1.0]);
    }

    #[test]
    fn pivot_degrees_and_omega() {
        let g = load_graph(
            [rec("a1", "b1", 2.0), rec("a2", "b1", 3.0)],
            [rec("b1", "p1", 5.0)],
        )
        .unwrap();
        assert_eq!(g.deg_x(), &[5.0]);
        assert_eq!(g.deg_z(), &[5.0]);
        assert_eq!(g.omega(), &[1.0 / 25.0]);
    }

    #[test]
    fn duplicates_merge_by_sum() {
        let g = load_graph(
            [rec("a1", "b1", 1.0), rec("a1", "b1", 1.0)],
            [rec("b1", "p1", 1.0)],
        )
        .unwrap();
        assert_eq!(g.edges_xy().len(), 1);
        assert_eq!(g.edges_xy()[0].weight, 2.0);
    }

    #[test]
    fn rejects_non_positive_weight_with_row() {
        let err = load_graph(
            [rec("a1", "b1", 1.0), rec("a2", "b1", 0.0)],
            [rec("b1", "p1", 1.0)],
        )
        .unwrap_err();
        assert!(
            matches!(err, Error::NonPositiveWeight { row: 2, .. }),
            "{err}"
        );
    }

    #[test]
    fn rejects_empty_layer() {
        let err = load_graph([rec("a1", "b1", 1.0)], std::iter::empty()).unwrap_err();
        assert!(err.to_string().contains("no tripartite structure"));
    }

    #[test]
    fn indexation_is_first_appearance() {
        let g = load_graph(
            [rec("a2", "b9", 1.0), rec("a1", "b1", 1.0)],
            [
                rec("b1", "p1", 1.0),
                rec("b7", "p2", 1.0),
                rec("b9", "p2", 1.0),
            ],
        )
        .unwrap();
        let u = g.universe();
        assert_eq!(u.ids(NodeType::X), &["a2", "a1"]);
        assert_eq!(u.ids(NodeType::Y), &["b9", "b1", "b7"]);
        assert_eq!(u.ids(NodeType::Z), &["p1", "p2"]);
    }

    #[test]
    fn reduce_drops_one_sided_pivot_and_orphans() {
        let g = load_graph(
            [
                rec("a1", "b1", 1.0),
                rec("a2", "b2", 1.0),
                rec("a3", "b3", 1.0),
            ],
            [rec("b1", "p1", 1.0), rec("b3", "p2", 1.0)],
        )
        .unwrap();
        assert_eq!(g.effective_pivots().len(), 2);
        let (r, u) = g.reduce_to_effective().unwrap();
        assert_eq!(r.n_y(), 2);
        assert_eq!(u.ids(NodeType::X), &["a1", "a3"]);
        let dropped_y = u.dropped(NodeType::Y);
        assert_eq!(dropped_y.len(), 1);
        assert_eq!(dropped_y[0].id, "b2");
        assert_eq!(dropped_y[0].reason, DropReason::PivotMissingZ);
        assert_eq!(u.dropped(NodeType::X)[0].id, "a2");
        assert!(r.is_effective());
    }

    #[test]
    fn reduce_identity_on_unit_path() {
        let g = load_graph([rec("a1", "b1", 1.0)], [rec("b1", "p1", 1.0)]).unwrap();
        let (r, _) = g.reduce_to_effective().unwrap();
        assert_eq!(r, g);
    }

    #[test]
    fn reduce_is_idempotent() {
        let g = load_graph(
            [
                rec("a1", "b1", 1.0),
                rec("a2", "b2", 2.0),
                rec("a1", "b3", 1.5),
            ],
            [
                rec("b1", "p1", 1.0),
                rec("b4", "p9", 1.0),
                rec("b3", "p2", 0.5),
            ],
        )
        .unwrap();
        let (once, _) = g.reduce_to_effective().unwrap();
        let (twice, _) = once.reduce_to_effective().unwrap();
        assert_eq!(once.to_snapshot().edges_xy, twice.to_snapshot().edges_xy);
        assert_eq!(once.to_snapshot().edges_yz, twice.to_snapshot().edges_yz);
        assert_eq!(once.omega(), twice.omega());
    }

    #[test]
    fn empty_effective_graph_errors() {
        let g = load_graph([rec("a1", "b1", 1.0)], [rec("b2", "p1", 1.0)]).unwrap();
        assert!(matches!(
            g.reduce_to_effective(),
            Err(Error::EmptyEffectiveGraph)
        ));
    }

    #[test]
    fn tsv_parsing_and_errors() {
        let text = "# header comment\na1\tb1\t1.5\na2\tb1\t2\n";
        let recs = read_edge_tsv(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1], EdgeRecord::new("a2", "b1", 2.0));

        let bad = "a1\tb1\t1.0\na2\tb1\n";
        let err = read_edge_tsv(bad.as_bytes()).unwrap_err();
        assert!(
            matches!(err, Error::MalformedRecord { row: 2, .. }),
            "{err}"
        );

        let neg = "a1\tb1\t1.0\n# c\na2\tb1\t-3\n";
        let err = read_edge_tsv(neg.as_bytes()).unwrap_err();
        assert!(
            matches!(err, Error::NonPositiveWeight { row: 3, .. }),
            "{err}"
        );
    }

    #[test]
    fn snapshot_and_tsv_round_trip() {
        let g = load_graph(
            [rec("a1", "b1", 0.1), rec("a2", "b1", 1.0 / 3.0)],
            [rec("b1", "p1", std::f64::consts::E), rec("b1", "p2", 1e-7)],
        )
        .unwrap();
        let json = serde_json::to_string(&g.to_snapshot()).unwrap();
        let back = TripartiteGraph::from_snapshot(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, g);

        let (mut xy, mut yz) = (Vec::new(), Vec::new());
        g.write_tsv(&mut xy, &mut yz).unwrap();
        let g2 = load_graph(
            read_edge_tsv(&xy[..]).unwrap().into_iter().map(Ok),
            read_edge_tsv(&yz[..]).unwrap().into_iter().map(Ok),
        )
        .unwrap();
        assert_eq!(g2, g);
    }
}
