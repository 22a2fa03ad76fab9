//! Graph inputs derived from cadastral structure: log boundary weights between
//! parcels, the dual projection of parcel contiguity onto buildings, and
//! Fourier positional encodings.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::graph::{for_each_tsv_row, nonempty_id};

/// Undirected weighted edges over `n` nodes, each pair stored once with
/// `a < b`, sorted.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEdges {
    pub n: usize,
    pub edges: Vec<(usize, usize, f64)>,
}

impl SymmetricEdges {
    pub fn weight(&self, a: usize, b: usize) -> f64 {
        let key = (a.min(b), a.max(b));
        self.edges
            .binary_search_by(|e| (e.0, e.1).cmp(&key))
            .map(|i| self.edges[i].2)
            .unwrap_or(0.0)
    }

    /// Both directions of every edge, grouped by source node.
    pub fn neighbor_lists(&self) -> Vec<Vec<(usize, f64)>> {
        let mut out = vec![Vec::new(); self.n];
        for &(a, b, w) in &self.edges {
            out[a].push((b, w));
            out[b].push((a, w));
        }
        out
    }
}

/// Shared boundary lengths between parcels.
#[derive(Debug, Clone, PartialEq)]
pub struct ParcelAdjacency {
    n_parcels: usize,
    pairs: Vec<(usize, usize, f64)>,
}

impl ParcelAdjacency {
    /// Pairs may be listed in either orientation; a pair listed twice must
    /// carry the same length both times.
    pub fn new(
        n_parcels: usize,
        pairs: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut canon: Vec<(usize, usize, f64)> = Vec::new();
        for (i, j, len) in pairs {
            if i == j {
                return Err(Error::InvalidInput(format!(
                    "parcel {i} adjacent to itself"
                )));
            }
            if i >= n_parcels || j >= n_parcels {
                return Err(Error::DimensionMismatch {
                    what: "parcel index",
                    expected: n_parcels,
                    found: i.max(j) + 1,
                });
            }
            canon.push((i.min(j), i.max(j), len));
        }
        canon.sort_by_key(|e| (e.0, e.1));
        let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(canon.len());
        for p in canon {
            match pairs.last() {
                Some(last) if (last.0, last.1) == (p.0, p.1) => {
                    if last.2 != p.2 {
                        return Err(Error::InvalidInput(format!(
                            "parcels {} and {} listed with different lengths {} and {}",
                            p.0, p.1, last.2, p.2
                        )));
                    }
                }
                _ => pairs.push(p),
            }
        }
        Ok(Self { n_parcels, pairs })
    }

    pub fn n_parcels(&self) -> usize {
        self.n_parcels
    }

    pub fn pairs(&self) -> &[(usize, usize, f64)] {
        &self.pairs
    }

    pub fn length(&self, i: usize, j: usize) -> Option<f64> {
        let key = (i.min(j), i.max(j));
        self.pairs
            .binary_search_by(|p| (p.0, p.1).cmp(&key))
            .ok()
            .map(|idx| self.pairs[idx].2)
    }
}

/// `w = ln(1 + ℓ)`; pairs with `ℓ = 0` carry no weight and are dropped.
pub fn boundary_weights(adj: &ParcelAdjacency) -> Result<SymmetricEdges> {
    let mut edges = Vec::with_capacity(adj.pairs.len());
    for &(i, j, len) in &adj.pairs {
        if !(len >= 0.0) || !len.is_finite() {
            return Err(Error::InvalidInput(format!(
                "boundary length between parcels {i} and {j} must be finite and ≥ 0, got {len}"
            )));
        }
        let w = len.ln_1p();
        if w > 0.0 {
            edges.push((i, j, w));
        }
    }
    Ok(SymmetricEdges {
        n: adj.n_parcels,
        edges,
    })
}

/// Sparse building–parcel incidence, entries `(building, parcel, weight)`.
#[derive(Debug, Clone, PartialEq)]
pub struct IncidenceYZ {
    n_buildings: usize,
    n_parcels: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl IncidenceYZ {
    /// Repeated entries are summed.
    pub fn new(
        n_buildings: usize,
        n_parcels: usize,
        entries: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut v: Vec<_> = entries.into_iter().collect();
        for &(b, p, w) in &v {
            if b >= n_buildings {
                return Err(Error::DimensionMismatch {
                    what: "building index",
                    expected: n_buildings,
                    found: b + 1,
                });
            }
            if p >= n_parcels {
                return Err(Error::DimensionMismatch {
                    what: "parcel index",
                    expected: n_parcels,
                    found: p + 1,
                });
            }
            if !(w >= 0.0) || !w.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "incidence weight for building {b}, parcel {p} must be ≥ 0, got {w}"
                )));
            }
        }
        v.sort_by_key(|e| (e.0, e.1));
        let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(v.len());
        for e in v {
            match entries.last_mut() {
                Some(last) if (last.0, last.1) == (e.0, e.1) => last.2 += e.2,
                _ => entries.push(e),
            }
        }
        entries.retain(|e| e.2 > 0.0);
        Ok(Self {
            n_buildings,
            n_parcels,
            entries,
        })
    }

    /// Unit weights.
    pub fn binary(
        n_buildings: usize,
        n_parcels: usize,
        pairs: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        Self::new(
            n_buildings,
            n_parcels,
            pairs.into_iter().map(|(b, p)| (b, p, 1.0)),
        )
    }

    pub fn n_buildings(&self) -> usize {
        self.n_buildings
    }

    pub fn n_parcels(&self) -> usize {
        self.n_parcels
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }
}

/// Building adjacency `M · A · Mᵀ` with the diagonal removed, computed
/// row by row over sparse neighbor lists.
pub fn dual_projection(m: &IncidenceYZ, a_zz: &SymmetricEdges) -> Result<SymmetricEdges> {
    if m.n_parcels != a_zz.n {
        return Err(Error::DimensionMismatch {
            what: "parcel count of incidence vs adjacency",
            expected: a_zz.n,
            found: m.n_parcels,
        });
    }
    let nb = m.n_buildings;
    let mut parcels_of = vec![Vec::new(); nb];
    let mut buildings_on = vec![Vec::new(); m.n_parcels];
    for &(b, p, w) in &m.entries {
        parcels_of[b].push((p, w));
        buildings_on[p].push((b, w));
    }
    let zz = a_zz.neighbor_lists();

    let mut acc = vec![0.0f64; nb];
    let mut touched: Vec<usize> = Vec::new();
    let mut edges = Vec::new();
    for b in 0..nb {
        for &(p, m_bp) in &parcels_of[b] {
            for &(q, a_pq) in &zz[p] {
                for &(b2, m_b2q) in &buildings_on[q] {
                    if b2 <= b {
                        continue;
                    }
                    if acc[b2] == 0.0 {
                        touched.push(b2);
                    }
                    acc[b2] += m_bp * a_pq * m_b2q;
                }
            }
        }
        touched.sort_unstable();
        for &b2 in &touched {
            if acc[b2] > 0.0 {
                edges.push((b, b2, acc[b2]));
            }
            acc[b2] = 0.0;
        }
        touched.clear();
    }
    Ok(SymmetricEdges { n: nb, edges })
}

/// Per-node Fourier features, `4k` columns: sin/cos pairs for x at each
/// frequency, then the same for y.
#[derive(Debug, Clone, PartialEq)]
pub struct PositionalEncoding {
    pub frequencies: Vec<f64>,
    pub values: Array2<f64>,
}

/// Min-max normalizes each axis over the batch (a flat axis maps to 0.5),
/// then encodes with frequencies `2^(m-1)`, `m = 1..=k`.
pub fn fourier_encode(positions: &[(f64, f64)], k: usize) -> Result<PositionalEncoding> {
    if k == 0 {
        return Err(Error::InvalidInput("frequency count must be ≥ 1".into()));
    }
    if positions
        .iter()
        .any(|(x, y)| !x.is_finite() || !y.is_finite())
    {
        return Err(Error::InvalidInput("positions must be finite".into()));
    }
    let frequencies: Vec<f64> = (0..k).map(|m| (1u64 << m) as f64).collect();
    let normalize = |axis: Vec<f64>| -> Vec<f64> {
        let lo = axis.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = axis.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            axis.into_iter().map(|v| (v - lo) / (hi - lo)).collect()
        } else {
            vec![0.5; axis.len()]
        }
    };
    let xs = normalize(positions.iter().map(|p| p.0).collect());
    let ys = normalize(positions.iter().map(|p| p.1).collect());

    let mut values = Array2::zeros((positions.len(), 4 * k));
    for (r, (&x, &y)) in xs.iter().zip(&ys).enumerate() {
        for (axis, v) in [x, y].into_iter().enumerate() {
            for (m, &f) in frequencies.iter().enumerate() {
                let phase = 2.0 * PI * f * v;
                let col = axis * 2 * k + 2 * m;
                values[[r, col]] = phase.sin();
                values[[r, col + 1]] = phase.cos();
            }
        }
    }
    Ok(PositionalEncoding {
        frequencies,
        values,
    })
}

/// Id-keyed inputs for building the topological graph.
#[derive(Debug, Clone, Default)]
pub struct TopoInputs {
    /// `(parcel_i, parcel_j, shared length)`
    pub adjacency: Vec<(String, String, f64)>,
    /// `(building, parcel, weight)`
    pub incidence: Vec<(String, String, f64)>,
    /// `(node id, x, y)`
    pub positions: Vec<(String, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct TopoOutput {
    pub building_ids: Vec<String>,
    pub parcel_ids: Vec<String>,
    pub yy_edges: SymmetricEdges,
    /// Encodings in `positions` order, keyed by node id.
    pub pe_ids: Vec<String>,
    pub encoding: PositionalEncoding,
}

impl TopoOutput {
    pub fn yy_edges_by_id(&self) -> impl Iterator<Item = (&str, &str, f64)> {
        self.yy_edges.edges.iter().map(|&(a, b, w)| {
            (
                self.building_ids[a].as_str(),
                self.building_ids[b].as_str(),
                w,
            )
        })
    }
}

/// Interns ids in order of first appearance, incidence first so building
/// indices follow the incidence file.
pub fn build_topology(inputs: &TopoInputs, frequencies: usize) -> Result<TopoOutput> {
    let mut buildings: Vec<String> = Vec::new();
    let mut b_idx: HashMap<String, usize> = HashMap::new();
    let mut parcels: Vec<String> = Vec::new();
    let mut p_idx: HashMap<String, usize> = HashMap::new();
    let intern = |ids: &mut Vec<String>, map: &mut HashMap<String, usize>, id: &str| {
        *map.entry(id.to_owned()).or_insert_with(|| {
            ids.push(id.to_owned());
            ids.len() - 1
        })
    };

    let mut inc = Vec::with_capacity(inputs.incidence.len());
    for (b, p, w) in &inputs.incidence {
        let bi = intern(&mut buildings, &mut b_idx, b);
        let pi = intern(&mut parcels, &mut p_idx, p);
        inc.push((bi, pi, *w));
    }
    let mut adj = Vec::with_capacity(inputs.adjacency.len());
    for (a, b, len) in &inputs.adjacency {
        let ai = intern(&mut parcels, &mut p_idx, a);
        let bi = intern(&mut parcels, &mut p_idx, b);
        adj.push((ai, bi, *len));
    }

    let adjacency = ParcelAdjacency::new(parcels.len(), adj)?;
    let zz = boundary_weights(&adjacency)?;
    let incidence = IncidenceYZ::new(buildings.len(), parcels.len(), inc)?;
    let yy_edges = dual_projection(&incidence, &zz)?;

    let mut seen = vec![false; buildings.len()];
    let mut coords = Vec::with_capacity(inputs.positions.len());
    let mut pe_ids = Vec::with_capacity(inputs.positions.len());
    for (id, x, y) in &inputs.positions {
        let Some(&b) = b_idx.get(id) else {
            return Err(Error::InvalidInput(format!(
                "position given for unknown building `{id}`"
            )));
        };
        if std::mem::replace(&mut seen[b], true) {
            return Err(Error::InvalidInput(format!(
                "duplicate position for `{id}`"
            )));
        }
        coords.push((*x, *y));
        pe_ids.push(id.clone());
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidInput(format!(
            "no position for building `{}`",
            buildings[missing]
        )));
    }
    let encoding = fourier_encode(&coords, frequencies)?;

    Ok(TopoOutput {
        building_ids: buildings,
        parcel_ids: parcels,
        yy_edges,
        pe_ids,
        encoding,
    })
}

/// `parcel_i<TAB>parcel_j<TAB>length_m`.
pub fn read_parcel_adjacency_tsv<R: Read>(reader: R) -> Result<Vec<(String, String, f64)>> {
    let mut out = Vec::new();
    for_each_tsv_row(reader, |row, fields| {
        let [a, b, len] = fields else {
            return Err(Error::MalformedRecord {
                row,
                reason: format!("expected 3 fields, found {}", fields.len()),
            });
        };
        let len: f64 = len.trim().parse().map_err(|_| Error::MalformedRecord {
            row,
            reason: format!("unparseable length `{len}`"),
        })?;
        if !(len >= 0.0) || !len.is_finite() {
            return Err(Error::MalformedRecord {
                row,
                reason: format!("boundary length must be ≥ 0, got {len}"),
            });
        }
        out.push((
            nonempty_id(row, a)?.to_owned(),
            nonempty_id(row, b)?.to_owned(),
            len,
        ));
        Ok(())
    })?;
    Ok(out)
}

/// `building_id<TAB>parcel_id`, with an optional third weight column.
pub fn read_incidence_tsv<R: Read>(reader: R) -> Result<Vec<(String, String, f64)>> {
    let mut out = Vec::new();
    for_each_tsv_row(reader, |row, fields| {
        let (b, p, w) = match fields {
            [b, p] => (b, p, 1.0),
            [b, p, w] => (
                b,
                p,
                w.trim().parse().map_err(|_| Error::MalformedRecord {
                    row,
                    reason: format!("unparseable weight `{w}`"),
                })?,
            ),
            _ => {
                return Err(Error::MalformedRecord {
                    row,
                    reason: format!("expected 2 or 3 fields, found {}", fields.len()),
                })
            }
        };
        out.push((
            nonempty_id(row, b)?.to_owned(),
            nonempty_id(row, p)?.to_owned(),
            w,
        ));
        Ok(())
    })?;
    Ok(out)
}

/// `node_id,x,y`; a leading header row is skipped.
pub fn read_positions_csv<R: Read>(reader: R) -> Result<Vec<(String, f64, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec.position().map_or(idx + 1, |p| p.line() as usize);
        if rec.len() != 3 {
            return Err(Error::MalformedRecord {
                row,
                reason: format!("expected node_id,x,y, found {} fields", rec.len()),
            });
        }
        let parsed = (rec[1].parse::<f64>(), rec[2].parse::<f64>());
        match parsed {
            (Ok(x), Ok(y)) => out.push((nonempty_id(row, &rec[0])?.to_owned(), x, y)),
            _ if idx == 0 => continue,
            _ => {
                return Err(Error::MalformedRecord {
                    row,
                    reason: "unparseable coordinate".into(),
                })
            }
        }
    }
    Ok(out)
}

impl TopoOutput {
    /// `building_a<TAB>building_b<TAB>weight`, one line per undirected edge.
    pub fn write_yy_tsv<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        for (a, b, w) in self.yy_edges_by_id() {
            writeln!(out, "{a}\t{b}\t{w}")?;
        }
        out.flush()?;
        Ok(())
    }

    /// `node_id,pe0,pe1,…` with a header row.
    pub fn write_pe_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let cols = self.encoding.values.ncols();
        let header: Vec<String> = std::iter::once("node_id".to_owned())
            .chain((0..cols).map(|c| format!("pe{c}")))
            .collect();
        w.write_record(&header)?;
        for (id, row) in self.pe_ids.iter().zip(self.encoding.values.rows()) {
            let rec: Vec<String> = std::iter::once(id.clone())
                .chain(row.iter().map(|v| v.to_string()))
                .collect();
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Reads a `node_id,f0,f1,…` feature table with a header row.
pub fn read_feature_csv<R: Read>(reader: R) -> Result<(Vec<String>, Array2<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let width = rdr.headers()?.len();
    if width < 2 {
        return Err(Error::InvalidInput(
            "feature table needs an id and at least one column".into(),
        ));
    }
    let mut ids = Vec::new();
    let mut flat = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec.position().map_or(idx + 2, |p| p.line() as usize);
        if rec.len() != width {
            return Err(Error::MalformedRecord {
                row,
                reason: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        ids.push(nonempty_id(row, &rec[0])?.to_owned());
        for field in rec.iter().skip(1) {
            let v: f64 = field.parse().map_err(|_| Error::MalformedRecord {
                row,
                reason: format!("unparseable value `{field}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::MalformedRecord {
                    row,
                    reason: format!("non-finite value `{field}`"),
                });
            }
            flat.push(v);
        }
    }
    let values =
        Array2::from_shape_vec((ids.len(), width - 1), flat).expect("rows have equal width");
    Ok((ids, values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn boundary_weight_values() {
        let adj = ParcelAdjacency::new(
            4,
            [
                (0, 1, 0.0),
                (1, 2, std::f64::consts::E - 1.0),
                (2, 3, 100.0),
            ],
        )
        .unwrap();
        let w = boundary_weights(&adj).unwrap();
        assert_eq!(w.edges.len(), 2);
        assert!((w.weight(1, 2) - 1.0).abs() < 1e-15);
        assert!((w.weight(3, 2) - 101f64.ln()).abs() < 1e-15);
        assert!((w.weight(2, 3) - 4.61512).abs() < 1e-5);
        assert_eq!(w.weight(0, 1), 0.0);
    }

    #[test]
    fn boundary_rejects_negative() {
        let adj = ParcelAdjacency::new(2, [(0, 1, -1.0)]).unwrap();
        assert!(boundary_weights(&adj).is_err());
    }

    #[test]
    fn adjacency_validation() {
        assert!(ParcelAdjacency::new(2, [(1, 1, 3.0)]).is_err());
        assert!(ParcelAdjacency::new(2, [(0, 1, 3.0), (1, 0, 4.0)]).is_err());
        let a = ParcelAdjacency::new(2, [(0, 1, 3.0), (1, 0, 3.0)]).unwrap();
        assert_eq!(a.pairs().len(), 1);
        assert_eq!(a.length(1, 0), Some(3.0));
        assert!(ParcelAdjacency::new(2, [(0, 2, 1.0)]).is_err());
    }

    #[test]
    fn single_term_projection() {
        let zz = SymmetricEdges {
            n: 2,
            edges: vec![(0, 1, 0.7)],
        };
        let m = IncidenceYZ::binary(2, 2, [(0, 0), (1, 1)]).unwrap();
        let yy = dual_projection(&m, &zz).unwrap();
        assert_eq!(yy.edges, vec![(0, 1, 0.7)]);
    }

    #[test]
    fn building_on_adjacent_parcels_has_no_self_loop() {
        let zz = SymmetricEdges {
            n: 2,
            edges: vec![(0, 1, 0.7)],
        };
        let m = IncidenceYZ::binary(1, 2, [(0, 0), (0, 1)]).unwrap();
        assert!(dual_projection(&m, &zz).unwrap().edges.is_empty());
    }

    #[test]
    fn projection_dimension_mismatch() {
        let zz = SymmetricEdges {
            n: 3,
            edges: vec![],
        };
        let m = IncidenceYZ::binary(1, 2, [(0, 0)]).unwrap();
        assert!(matches!(
            dual_projection(&m, &zz),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn projection_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let (nb, np) = (6, 8);
        let (m, zz) = random_topology(&mut rng, nb, np);
        let yy = dual_projection(&m, &zz).unwrap();
        let dense = dense_triple_product(&m, &zz);
        for a in 0..nb {
            for b in 0..nb {
                if a != b {
                    assert!((yy.weight(a, b) - dense[a][b]).abs() <= 1e-12);
                }
            }
        }
    }

    pub(super) fn random_topology(
        rng: &mut ChaCha8Rng,
        nb: usize,
        np: usize,
    ) -> (IncidenceYZ, SymmetricEdges) {
        let mut inc = Vec::new();
        for b in 0..nb {
            for p in 0..np {
                if rng.random::<f64>() < 0.25 {
                    inc.push((
                        b,
                        p,
                        if rng.random() {
                            1.0
                        } else {
                            rng.random_range(0.5..2.0)
                        },
                    ));
                }
            }
        }
        let mut pairs = Vec::new();
        for i in 0..np {
            for j in i + 1..np {
                if rng.random::<f64>() < 0.35 {
                    pairs.push((i, j, rng.random_range(0.0..50.0)));
                }
            }
        }
        let adj = ParcelAdjacency::new(np, pairs).unwrap();
        (
            IncidenceYZ::new(nb, np, inc).unwrap(),
            boundary_weights(&adj).unwrap(),
        )
    }

    fn dense_triple_product(m: &IncidenceYZ, zz: &SymmetricEdges) -> Vec<Vec<f64>> {
        let (nb, np) = (m.n_buildings(), m.n_parcels());
        let mut md = vec![vec![0.0; np]; nb];
        for &(b, p, w) in m.entries() {
            md[b][p] = w;
        }
        let mut ad = vec![vec![0.0; np]; np];
        for &(i, j, w) in &zz.edges {
            ad[i][j] = w;
            ad[j][i] = w;
        }
        let mut out = vec![vec![0.0; nb]; nb];
        for a in 0..nb {
            for b in 0..nb {
                for p in 0..np {
                    for q in 0..np {
                        out[a][b] += md[a][p] * ad[p][q] * md[b][q];
                    }
                }
            }
        }
        out
    }

    #[test]
    fn fourier_origin_and_half_period() {
        let pe = fourier_encode(&[(0.0, 0.0), (0.5, 2.0), (1.0, 4.0)], 3).unwrap();
        assert_eq!(pe.values.ncols(), 12);
        assert_eq!(pe.frequencies, vec![1.0, 2.0, 4.0]);
        let row0 = pe.values.row(0);
        for m in 0..6 {
            assert_eq!(row0[2 * m], 0.0);
            assert_eq!(row0[2 * m + 1], 1.0);
        }
        let row1 = pe.values.row(1);
        assert!(row1[0].abs() < 1e-12);
        assert!((row1[1] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn fourier_degenerate_axis_and_determinism() {
        let pe = fourier_encode(&[(3.0, 7.0), (3.0, 7.0), (5.0, 7.0)], 2).unwrap();
        assert_eq!(pe.values.row(0), pe.values.row(1));
        // y is flat → 0.5 → sin(π) ≈ 0, cos(π) = −1 at ω₁
        assert!(pe.values[[2, 4]].abs() < 1e-12);
        assert!((pe.values[[2, 5]] + 1.0).abs() < 1e-15);
        assert!(pe.values.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(fourier_encode(&[(0.0, 0.0)], 0).is_err());
        assert!(fourier_encode(&[(f64::NAN, 0.0)], 1).is_err());
    }

    #[test]
    fn build_from_ids() {
        let inputs = TopoInputs {
            adjacency: vec![("P1".into(), "P2".into(), 12.0)],
            incidence: vec![
                ("B1".into(), "P1".into(), 1.0),
                ("B2".into(), "P2".into(), 1.0),
            ],
            positions: vec![("B2".into(), 1.0, 1.0), ("B1".into(), 0.0, 0.0)],
        };
        let out = build_topology(&inputs, 2).unwrap();
        let edges: Vec<_> = out.yy_edges_by_id().collect();
        assert_eq!(edges, vec![("B1", "B2", 13f64.ln())]);
        assert_eq!(out.pe_ids, vec!["B2", "B1"]);

        let mut missing = inputs.clone();
        missing.positions.pop();
        assert!(build_topology(&missing, 2).is_err());
        let mut unknown = inputs;
        unknown.positions.push(("B9".into(), 0.0, 0.0));
        assert!(build_topology(&unknown, 2).is_err());
    }

    #[test]
    fn feature_table_round_trip() {
        let inputs = TopoInputs {
            adjacency: vec![("p1".into(), "p2".into(), 3.0)],
            incidence: vec![
                ("b1".into(), "p1".into(), 1.0),
                ("b2".into(), "p2".into(), 1.0),
            ],
            positions: vec![("b2".into(), 1.0, 2.0), ("b1".into(), 0.3, -4.0)],
        };
        let out = build_topology(&inputs, 2).unwrap();
        let mut buf = Vec::new();
        out.write_pe_csv(&mut buf).unwrap();
        let (ids, values) = read_feature_csv(buf.as_slice()).unwrap();
        assert_eq!(ids, vec!["b2", "b1"]);
        assert_eq!(values, out.encoding.values);
        let mut yy = Vec::new();
        out.write_yy_tsv(&mut yy).unwrap();
        assert_eq!(
            String::from_utf8(yy).unwrap(),
            format!("b1\tb2\t{}\n", 4f64.ln())
        );
    }

    #[test]
    fn readers() {
        let adj = read_parcel_adjacency_tsv("# c\nP1\tP2\t3.5\n".as_bytes()).unwrap();
        assert_eq!(adj, vec![("P1".into(), "P2".into(), 3.5)]);
        assert!(read_parcel_adjacency_tsv("P1\tP2\t-1\n".as_bytes()).is_err());
        let inc = read_incidence_tsv("B1\tP1\nB2\tP2\t0.5\n".as_bytes()).unwrap();
        assert_eq!(inc[1], ("B2".into(), "P2".into(), 0.5));
        let pos = read_positions_csv("node_id,x,y\nB1,1.5,2\nB2, 3 ,4\n".as_bytes()).unwrap();
        assert_eq!(pos, vec![("B1".into(), 1.5, 2.0), ("B2".into(), 3.0, 4.0)]);
        assert!(read_positions_csv("B1,1,2\nB2,x,4\n".as_bytes()).is_err());
    }
}
