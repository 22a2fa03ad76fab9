use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use dmon3p::encoder::EncoderInputs;
use dmon3p::graph::{load_graph_files, read_edge_tsv};
use dmon3p::metrics::{hard_labels, label_diagnostics, read_label_csv, LabelTable};
use dmon3p::topo::{
    build_topology, read_feature_csv, read_incidence_tsv, read_parcel_adjacency_tsv,
    read_positions_csv, SymmetricEdges, TopoInputs,
};
use dmon3p::train::AblationPair;
use dmon3p::{nmi, Backend, NodeType, SynthSpec, TrainConfig, TrainReport, TripartiteGraph};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::manifest::{
    digest_file, read_config_json, write_atomic, write_json, InputDigest, RunManifest,
};
use crate::{CliError, Globals};

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// TrainConfig JSON, or a manifest of an earlier run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Same capacity for X, Y and Z.
    #[arg(long)]
    capacity: Option<usize>,
    /// Same collapse weight for X, Y and Z.
    #[arg(long)]
    lambda: Option<f64>,
    /// `free_logits` or `encoder`.
    #[arg(long)]
    backend: Option<String>,
}

fn validation(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Self {
        Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        }
    }

    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_atomic(&path, bytes)?;
        self.written.push(path);
        Ok(())
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let path = self.dir.join(name);
        write_json(&path, value)?;
        self.written.push(path);
        Ok(())
    }

    /// Writes `manifest.json` last so that its presence marks a finished run.
    fn finish(mut self, g: &Globals, run: Run) -> Result<(), CliError> {
        let path = self.dir.join("manifest.json");
        self.written.push(path.clone());
        let manifest = RunManifest {
            command: run.command.to_owned(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            seed: run.seed,
            config: run.config,
            overrides: run.overrides,
            inputs: run.inputs,
            outputs: self.written,
            threads: g.threads,
            wall_clock_secs: run.start.elapsed().as_secs_f64(),
        };
        write_json(&path, &manifest)
    }
}

/// What a command records about itself in the manifest.
struct Run {
    command: &'static str,
    config: Value,
    overrides: Map<String, Value>,
    seed: Option<u64>,
    inputs: Vec<InputDigest>,
    start: Instant,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

pub fn generate(g: &Globals, spec_path: &Path) -> Result<(), CliError> {
    let start = Instant::now();
    let raw = read_config_json(spec_path)?;
    let mut spec: SynthSpec = serde_json::from_value(raw)
        .map_err(|e| validation(format!("{}: invalid spec: {e}", spec_path.display())))?;
    let mut overrides = Map::new();
    if let Some(seed) = g.seed {
        spec.seed = seed;
        overrides.insert("seed".into(), seed.into());
    }
    let (graph, truth) = dmon3p::generate(&spec)?;

    let (mut xy, mut yz) = (Vec::new(), Vec::new());
    graph.write_tsv(&mut xy, &mut yz)?;
    let mut truth_csv = Vec::new();
    truth.write_csv(graph.universe(), &mut truth_csv)?;

    let mut out = Outputs::new(&g.out);
    out.bytes("edges_xy.tsv", &xy)?;
    out.bytes("edges_yz.tsv", &yz)?;
    out.bytes("truth.csv", &truth_csv)?;
    log::info!(
        "generated {} X–Y and {} Y–Z edges",
        graph.edges_xy().len(),
        graph.edges_yz().len()
    );
    let run = Run {
        command: "generate",
        config: to_value(&spec),
        overrides,
        seed: Some(spec.seed),
        inputs: vec![digest_file(spec_path)?],
        start,
    };
    out.finish(g, run)
}

pub fn build_topo(
    g: &Globals,
    adjacency: &Path,
    incidence: &Path,
    positions: &Path,
    frequencies: usize,
) -> Result<(), CliError> {
    let start = Instant::now();
    let open = |p: &Path| {
        fs::File::open(p).map_err(|e| validation(format!("cannot read {}: {e}", p.display())))
    };
    let inputs = TopoInputs {
        adjacency: read_parcel_adjacency_tsv(open(adjacency)?)?,
        incidence: read_incidence_tsv(open(incidence)?)?,
        positions: read_positions_csv(open(positions)?)?,
    };
    if inputs.adjacency.is_empty() {
        log::warn!("parcel adjacency is empty; the building graph has no edges");
    }
    let topo = build_topology(&inputs, frequencies)?;
    let (mut yy, mut pe) = (Vec::new(), Vec::new());
    topo.write_yy_tsv(&mut yy)?;
    topo.write_pe_csv(&mut pe)?;

    let mut out = Outputs::new(&g.out);
    out.bytes("yy_edges.tsv", &yy)?;
    out.bytes("pe.csv", &pe)?;
    let run = Run {
        command: "build-topo",
        config: serde_json::json!({ "frequencies": frequencies }),
        overrides: Map::new(),
        seed: None,
        inputs: vec![
            digest_file(adjacency)?,
            digest_file(incidence)?,
            digest_file(positions)?,
        ],
        start,
    };
    out.finish(g, run)
}

/// Config file (or defaults) with flags applied on top, as a partly filled
/// manifest record.
fn resolve_config(
    g: &Globals,
    args: &ConfigArgs,
    command: &'static str,
    start: Instant,
) -> Result<(TrainConfig, Run), CliError> {
    let mut inputs = Vec::new();
    let mut cfg = match &args.config {
        Some(path) => {
            inputs.push(digest_file(path)?);
            serde_json::from_value(read_config_json(path)?)
                .map_err(|e| validation(format!("{}: invalid config: {e}", path.display())))?
        }
        None => TrainConfig::default(),
    };
    let mut overrides = Map::new();
    if let Some(seed) = g.seed {
        cfg.seed = seed;
        overrides.insert("seed".into(), seed.into());
    }
    if let Some(v) = args.epochs {
        cfg.epochs = v;
        overrides.insert("epochs".into(), v.into());
    }
    if let Some(v) = args.learning_rate {
        cfg.learning_rate = v;
        overrides.insert("learning_rate".into(), v.into());
    }
    if let Some(v) = args.capacity {
        cfg.capacities = [v; 3];
        overrides.insert("capacities".into(), to_value(&cfg.capacities));
    }
    if let Some(v) = args.lambda {
        cfg.set_lambdas(v);
        overrides.insert("lambda".into(), v.into());
    }
    if let Some(b) = &args.backend {
        cfg.backend = serde_json::from_value(Value::String(b.clone()))
            .map_err(|_| validation(format!("unknown backend `{b}` (free_logits or encoder)")))?;
        overrides.insert("backend".into(), b.clone().into());
    }
    cfg.validate()?;
    let run = Run {
        command,
        config: to_value(&cfg),
        overrides,
        seed: Some(cfg.seed),
        inputs,
        start,
    };
    Ok((cfg, run))
}

struct GraphInputs {
    graph: TripartiteGraph,
    encoder: EncoderInputs,
    digests: Vec<InputDigest>,
}

/// Loads `edges_xy.tsv` and `edges_yz.tsv`, plus `yy_edges.tsv` and `pe.csv`
/// when the encoder backend is selected and they exist.
fn load_graph_dir(dir: &Path, backend: Backend) -> Result<GraphInputs, CliError> {
    let (xy, yz) = (dir.join("edges_xy.tsv"), dir.join("edges_yz.tsv"));
    let graph = load_graph_files(&xy, &yz)?;
    let mut digests = vec![digest_file(&xy)?, digest_file(&yz)?];
    let mut encoder = EncoderInputs::default();
    if backend == Backend::Encoder {
        let u = graph.universe();
        let yy_path = dir.join("yy_edges.tsv");
        if yy_path.exists() {
            let records = read_edge_tsv(open(&yy_path)?)?;
            let mut edges = Vec::with_capacity(records.len());
            let mut skipped = 0usize;
            for r in records {
                match (
                    u.index_of(NodeType::Y, &r.src),
                    u.index_of(NodeType::Y, &r.dst),
                ) {
                    (Some(a), Some(b)) if a != b => edges.push((a.min(b), a.max(b), r.weight)),
                    _ => skipped += 1,
                }
            }
            if skipped > 0 {
                log::warn!("{skipped} building edges refer to nodes outside the graph; ignored");
            }
            edges.sort_by_key(|e| (e.0, e.1));
            edges.dedup_by(|a, b| (a.0, a.1) == (b.0, b.1));
            encoder.yy = Some(SymmetricEdges {
                n: graph.n_y(),
                edges,
            });
            digests.push(digest_file(&yy_path)?);
        }
        let pe_path = dir.join("pe.csv");
        if pe_path.exists() {
            let (ids, values) = read_feature_csv(open(&pe_path)?)?;
            let rows: HashMap<&str, usize> = ids
                .iter()
                .enumerate()
                .map(|(i, id)| (id.as_str(), i))
                .collect();
            let mut features = ndarray::Array2::zeros((graph.n_y(), values.ncols()));
            for (j, id) in u.ids(NodeType::Y).iter().enumerate() {
                let r = rows
                    .get(id.as_str())
                    .ok_or_else(|| validation(format!("pe.csv has no row for Y node `{id}`")))?;
                features.row_mut(j).assign(&values.row(*r));
            }
            encoder.features[NodeType::Y.index()] = Some(features);
            digests.push(digest_file(&pe_path)?);
        }
    }
    Ok(GraphInputs {
        graph,
        encoder,
        digests,
    })
}

fn open(p: &Path) -> Result<fs::File, CliError> {
    fs::File::open(p).map_err(|e| validation(format!("cannot read {}: {e}", p.display())))
}

fn assignments_csv(report: &TrainReport, graph: &TripartiteGraph) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    report.write_assignments_csv(graph, &mut buf)?;
    Ok(buf)
}

pub fn train(g: &Globals, graph_dir: &Path, args: &ConfigArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let (cfg, mut run) = resolve_config(g, args, "train", start)?;
    let inputs = load_graph_dir(graph_dir, cfg.backend)?;
    run.inputs.extend(inputs.digests);
    let report = dmon3p::train(&inputs.graph, &inputs.encoder, &cfg)?;
    println!(
        "final total {:.6}, Q {:.6}, active X/Y/Z {:?}",
        report.final_loss.total,
        report.final_loss.q_tri_soft,
        report.final_diagnostics.map(|d| d.active_count)
    );

    let mut out = Outputs::new(&g.out);
    out.bytes("assignments.csv", &assignments_csv(&report, &inputs.graph)?)?;
    out.json("report.json", &report)?;
    out.finish(g, run)
}

#[derive(Debug, Serialize)]
struct TypeComparison {
    entropy_normalized: f64,
    entropy_ablated: f64,
    entropy_delta: f64,
    active_normalized: usize,
    active_ablated: usize,
    active_delta: i64,
    nmi_normalized: Option<f64>,
    nmi_ablated: Option<f64>,
}

#[derive(Debug, Serialize)]
struct Comparison {
    final_total_normalized: f64,
    final_total_ablated: f64,
    per_type: BTreeMap<&'static str, TypeComparison>,
}

/// Ground-truth labels in graph index order, one vector per type.
fn truth_by_index(
    table: &LabelTable,
    graph: &TripartiteGraph,
) -> Result<[Vec<usize>; 3], CliError> {
    let u = graph.universe();
    let mut out: [Vec<usize>; 3] = Default::default();
    for t in NodeType::ALL {
        let map: HashMap<&str, usize> = table[t.index()]
            .iter()
            .map(|(id, c)| (id.as_str(), *c))
            .collect();
        if map.len() != graph.node_count(t) {
            return Err(validation(format!(
                "truth.csv lists {} {t} nodes, the graph has {}",
                map.len(),
                graph.node_count(t)
            )));
        }
        out[t.index()] = u
            .ids(t)
            .iter()
            .map(|id| {
                map.get(id.as_str())
                    .copied()
                    .ok_or_else(|| validation(format!("truth.csv has no {t} node `{id}`")))
            })
            .collect::<Result<_, _>>()?;
    }
    Ok(out)
}

fn compare(pair: &AblationPair, truth: Option<&[Vec<usize>; 3]>) -> Result<Comparison, CliError> {
    let mut per_type = BTreeMap::new();
    for t in NodeType::ALL {
        let i = t.index();
        let (dn, da) = (
            pair.normalized.final_diagnostics[i],
            pair.ablated.final_diagnostics[i],
        );
        let score = |r: &TrainReport| -> Result<Option<f64>, CliError> {
            match truth {
                Some(tr) if !tr[i].is_empty() => Ok(Some(nmi(
                    &hard_labels(r.final_assignments().get(t).view()),
                    &tr[i],
                )?)),
                _ => Ok(None),
            }
        };
        per_type.insert(
            t.as_str(),
            TypeComparison {
                entropy_normalized: dn.mean_entropy,
                entropy_ablated: da.mean_entropy,
                entropy_delta: da.mean_entropy - dn.mean_entropy,
                active_normalized: dn.active_count,
                active_ablated: da.active_count,
                active_delta: da.active_count as i64 - dn.active_count as i64,
                nmi_normalized: score(&pair.normalized)?,
                nmi_ablated: score(&pair.ablated)?,
            },
        );
    }
    Ok(Comparison {
        final_total_normalized: pair.normalized.final_loss.total,
        final_total_ablated: pair.ablated.final_loss.total,
        per_type,
    })
}

pub fn ablate(g: &Globals, graph_dir: &Path, args: &ConfigArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let (cfg, mut run) = resolve_config(g, args, "ablate", start)?;
    let inputs = load_graph_dir(graph_dir, cfg.backend)?;
    run.inputs.extend(inputs.digests);
    let truth_path = graph_dir.join("truth.csv");
    let truth = if truth_path.exists() {
        run.inputs.push(digest_file(&truth_path)?);
        Some(truth_by_index(
            &read_label_csv(open(&truth_path)?)?,
            &inputs.graph,
        )?)
    } else {
        None
    };
    let pair = dmon3p::ablate_flow_normalization(&inputs.graph, &inputs.encoder, &cfg)?;
    let comparison = compare(&pair, truth.as_ref())?;
    let y = &comparison.per_type["y"];
    println!(
        "mean Y entropy: normalized {:.4}, ablated {:.4}",
        y.entropy_normalized, y.entropy_ablated
    );

    let mut out = Outputs::new(&g.out);
    out.bytes(
        "assignments_normalized.csv",
        &assignments_csv(&pair.normalized, &inputs.graph)?,
    )?;
    out.bytes(
        "assignments_ablated.csv",
        &assignments_csv(&pair.ablated, &inputs.graph)?,
    )?;
    out.json("report_normalized.json", &pair.normalized)?;
    out.json("report_ablated.json", &pair.ablated)?;
    out.json("comparison.json", &comparison)?;
    out.finish(g, run)
}

#[derive(Debug, Serialize)]
struct TypeMetrics {
    n_nodes: usize,
    nmi: Option<f64>,
    active_count: usize,
    /// Entropy of the community-size distribution of the hard labels.
    label_entropy: f64,
}

pub fn eval(
    g: &Globals,
    assignments: &Path,
    truth: &Path,
    mass_threshold: f64,
) -> Result<(), CliError> {
    let start = Instant::now();
    if !(0.0..1.0).contains(&mass_threshold) {
        return Err(validation(format!(
            "mass threshold must lie in [0, 1), got {mass_threshold}"
        )));
    }
    let predicted = read_label_csv(open(assignments)?)?;
    let expected = read_label_csv(open(truth)?)?;
    let mut per_type = BTreeMap::new();
    for t in NodeType::ALL {
        let i = t.index();
        let pred: HashMap<&str, usize> = predicted[i]
            .iter()
            .map(|(id, c)| (id.as_str(), *c))
            .collect();
        if pred.len() != expected[i].len() {
            return Err(validation(format!(
                "{t}: {} assigned nodes vs {} in the truth",
                pred.len(),
                expected[i].len()
            )));
        }
        let mut a = Vec::with_capacity(pred.len());
        let mut b = Vec::with_capacity(pred.len());
        for (id, c) in &expected[i] {
            let p = pred
                .get(id.as_str())
                .ok_or_else(|| validation(format!("{t} node `{id}` has no assignment")))?;
            a.push(*p);
            b.push(*c);
        }
        let score = if a.is_empty() {
            None
        } else {
            Some(nmi(&a, &b)?)
        };
        let (active_count, label_entropy) = label_diagnostics(&a, mass_threshold);
        match score {
            Some(s) => {
                println!("{t}: NMI {s:.4}, active {active_count}, entropy {label_entropy:.4}")
            }
            None => println!("{t}: no nodes"),
        }
        per_type.insert(
            t.as_str(),
            TypeMetrics {
                n_nodes: a.len(),
                nmi: score,
                active_count,
                label_entropy,
            },
        );
    }

    let mut out = Outputs::new(&g.out);
    out.json("metrics.json", &per_type)?;
    let run = Run {
        command: "eval",
        config: serde_json::json!({ "mass_threshold": mass_threshold }),
        overrides: Map::new(),
        seed: None,
        inputs: vec![digest_file(assignments)?, digest_file(truth)?],
        start,
    };
    out.finish(g, run)
}
