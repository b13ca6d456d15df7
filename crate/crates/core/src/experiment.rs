//! Method dispatch, target construction and the batch evaluation harness.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chordal_exact::exact_rates_chordal;
use crate::error::{Error, Result};
use crate::free_energy::{
    backoff_from_regions, bethe_rates, build_kikuchi_regions, kmax_rates_recursive, triangle_rates, BackoffVector,
    Method, ThroughputVector,
};
use crate::graph::{max_clique_size, random_geometric_graph, ConflictGraph};
use crate::oracle::{
    enumerate_independent_sets, forward_on, inverse_on, DEFAULT_MAX_ITER, DEFAULT_STATE_CAP, DEFAULT_TOL,
};
use crate::report::{to_json_bytes, write_atomic, Manifest, RatesReport, Timing};
use crate::simulator::{mean_relative_error, simulate, SimConfig};

/// Back-off rates for `phi` on `g` by the given method.
pub fn compute_rates(g: &ConflictGraph, phi: &ThroughputVector, method: Method) -> Result<BackoffVector> {
    phi.check_len(g.n())?;
    match method {
        Method::Bethe => bethe_rates(g, phi),
        Method::Triangle => triangle_rates(g, phi),
        Method::Kmax(k) => {
            let mut out = kmax_rates_recursive(g, phi, k.unwrap_or(g.n()).max(1))?;
            out.method = method;
            Ok(out)
        }
        Method::Kikuchi(k) => {
            let mut out = backoff_from_regions(&build_kikuchi_regions(g, k.unwrap_or(g.n()).max(2))?, phi)?;
            out.method = method;
            Ok(out)
        }
        Method::ChordalExact => Ok(exact_rates_chordal(g, phi)?.rates),
        Method::Oracle => inverse_on(&enumerate_independent_sets(g, DEFAULT_STATE_CAP)?, phi, DEFAULT_TOL, DEFAULT_MAX_ITER),
    }
}

/// Rates plus wall-clock time, averaged over `repeats` evaluations.
pub fn timed_rates(
    g: &ConflictGraph,
    phi: &ThroughputVector,
    method: Method,
    repeats: usize,
) -> Result<(BackoffVector, Timing)> {
    let repeats = repeats.max(1);
    let start = Instant::now();
    let mut out = compute_rates(g, phi, method)?;
    for _ in 1..repeats {
        out = compute_rates(g, phi, method)?;
    }
    let total_secs = start.elapsed().as_secs_f64() / repeats as f64;
    Ok((
        out,
        Timing {
            total_secs,
            per_node_secs: total_secs / g.n().max(1) as f64,
            repeats,
        },
    ))
}

/// Where target throughputs come from.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// Same value on every link.
    Uniform(f64),
    /// `φ / ω` with `ω` the largest clique size.
    OverMaxClique(f64),
    /// `c / (1 + d_i)`.
    DegreeScaled(f64),
    List(Vec<f64>),
    /// JSON array, or a rates CSV/JSON whose `phi` column is used.
    File(PathBuf),
}

impl TargetSpec {
    pub fn build(&self, g: &ConflictGraph) -> Result<ThroughputVector> {
        let phi = match self {
            TargetSpec::Uniform(v) => ThroughputVector::uniform(g.n(), *v)?,
            TargetSpec::OverMaxClique(v) => ThroughputVector::over_max_clique(g, *v)?,
            TargetSpec::DegreeScaled(c) => ThroughputVector::degree_scaled(g, *c)?,
            TargetSpec::List(v) => ThroughputVector::new(v.clone())?,
            TargetSpec::File(path) => load_targets(path)?,
        };
        phi.check_len(g.n())?;
        Ok(phi)
    }
}

fn load_targets(path: &Path) -> Result<ThroughputVector> {
    let text = std::fs::read_to_string(path)?;
    if let Ok(v) = serde_json::from_str::<Vec<f64>>(&text) {
        return ThroughputVector::new(v);
    }
    ThroughputVector::new(crate::report::load_rates(path)?.phi)
}

impl fmt::Display for TargetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetSpec::Uniform(v) => write!(f, "uniform:{v}"),
            TargetSpec::OverMaxClique(v) => write!(f, "max-clique:{v}"),
            TargetSpec::DegreeScaled(c) => write!(f, "degree:{c}"),
            TargetSpec::List(v) => {
                let parts: Vec<String> = v.iter().map(f64::to_string).collect();
                write!(f, "list:{}", parts.join(","))
            }
            TargetSpec::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for TargetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| Error::InvalidArgument(format!("target spec {s:?} needs the form kind:value")))?;
        let num = || {
            arg.parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad number in target spec {s:?}")))
        };
        match kind {
            "uniform" => Ok(TargetSpec::Uniform(num()?)),
            "max-clique" => Ok(TargetSpec::OverMaxClique(num()?)),
            "degree" => Ok(TargetSpec::DegreeScaled(num()?)),
            "list" => arg
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map(TargetSpec::List)
                .map_err(|_| Error::InvalidArgument(format!("bad number in target spec {s:?}"))),
            "file" => Ok(TargetSpec::File(PathBuf::from(arg))),
            _ => Err(Error::InvalidArgument(format!("unknown target kind {kind:?}"))),
        }
    }
}

impl Serialize for TargetSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for TargetSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GraphSource {
    Files(Vec<PathBuf>),
    /// One geometric graph per (radius, seed) pair.
    Geometric { n: usize, radii: Vec<f64>, seeds: Vec<u64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Evaluation {
    Simulate(SimConfig),
    /// Exact product-form marginals; needs `n` within the oracle cap.
    ExactForward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub graphs: GraphSource,
    pub targets: Vec<TargetSpec>,
    pub methods: Vec<Method>,
    pub evaluation: Evaluation,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::InvalidArgument("experiment needs at least one method".into()));
        }
        if self.targets.is_empty() {
            return Err(Error::InvalidArgument("experiment needs at least one target setting".into()));
        }
        match &self.graphs {
            GraphSource::Files(f) if f.is_empty() => {
                return Err(Error::InvalidArgument("no graph files given".into()));
            }
            GraphSource::Geometric { radii, seeds, .. } if radii.is_empty() || seeds.is_empty() => {
                return Err(Error::InvalidArgument("geometric source needs radii and seeds".into()));
            }
            _ => {}
        }
        if let Evaluation::Simulate(cfg) = &self.evaluation {
            cfg.validate()?;
        }
        Ok(())
    }
}

/// A graph of the batch with the labels reported next to its results.
#[derive(Debug, Clone)]
pub struct LabelledGraph {
    pub id: String,
    pub radius: Option<f64>,
    pub seed: Option<u64>,
    pub graph: ConflictGraph,
}

pub fn load_graphs(source: &GraphSource) -> Result<Vec<LabelledGraph>> {
    match source {
        GraphSource::Files(paths) => paths
            .iter()
            .map(|p| {
                let graph = ConflictGraph::load(p)?;
                Ok(LabelledGraph {
                    id: p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned()),
                    radius: None,
                    seed: graph.seed(),
                    graph,
                })
            })
            .collect(),
        GraphSource::Geometric { n, radii, seeds } => {
            let mut out = Vec::with_capacity(radii.len() * seeds.len());
            for &r in radii {
                for &s in seeds {
                    out.push(LabelledGraph {
                        id: format!("geo_n{n}_r{r}_s{s}"),
                        radius: Some(r),
                        seed: Some(s),
                        graph: random_geometric_graph(*n, r, s)?,
                    });
                }
            }
            Ok(out)
        }
    }
}

/// One (graph, targets, method) cell of an evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub graph: String,
    pub radius: Option<f64>,
    pub graph_seed: Option<u64>,
    pub n: usize,
    pub edges: usize,
    pub max_clique: usize,
    pub targets: String,
    pub method: String,
    pub k_max: Option<usize>,
    pub mre: f64,
    pub rates_secs: f64,
    pub eval_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub radius: Option<f64>,
    pub targets: String,
    pub method: String,
    pub graphs: usize,
    pub min_mre: f64,
    pub mean_mre: f64,
    pub max_mre: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluationReport {
    pub items: Vec<ItemResult>,
    pub summary: Vec<SummaryRow>,
}

#[derive(Serialize)]
struct ItemDetail<'a> {
    result: &'a ItemResult,
    rates: &'a RatesReport,
    achieved: &'a [f64],
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' { c } else { '_' })
        .collect()
}

fn run_item(
    lg: &LabelledGraph,
    targets: &TargetSpec,
    method: Method,
    evaluation: &Evaluation,
    out_dir: Option<&Path>,
) -> Result<ItemResult> {
    let g = &lg.graph;
    let phi = targets.build(g)?;
    let (nu, timing) = timed_rates(g, &phi, method, 1)?;
    let start = Instant::now();
    let achieved = match evaluation {
        Evaluation::Simulate(cfg) => simulate(g, &nu, cfg)?.achieved,
        Evaluation::ExactForward => forward_on(&enumerate_independent_sets(g, DEFAULT_STATE_CAP)?, &nu.nu)?.throughputs,
    };
    let result = ItemResult {
        graph: lg.id.clone(),
        radius: lg.radius,
        graph_seed: lg.seed,
        n: g.n(),
        edges: g.edge_count(),
        max_clique: max_clique_size(g),
        targets: targets.to_string(),
        method: method.to_string(),
        k_max: method.k_max(g.n()),
        mre: mean_relative_error(phi.as_slice(), &achieved)?,
        rates_secs: timing.total_secs,
        eval_secs: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out_dir {
        let rates = RatesReport::new(&phi, &nu, Some(timing));
        let detail = ItemDetail {
            result: &result,
            rates: &rates,
            achieved: &achieved,
        };
        let name = file_safe(&format!("{}__{}__{}", lg.id, targets, method));
        write_atomic(dir.join("items").join(format!("{name}.json")), &to_json_bytes(&detail)?)?;
    }
    Ok(result)
}

fn summarise(items: &[ItemResult]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Option<f64>, String, String)> = Vec::new();
    for it in items {
        let key = (it.radius, it.targets.clone(), it.method.clone());
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    keys.into_iter()
        .map(|(radius, targets, method)| {
            let mres: Vec<f64> = items
                .iter()
                .filter(|it| it.radius == radius && it.targets == targets && it.method == method)
                .map(|it| it.mre)
                .collect();
            SummaryRow {
                radius,
                targets,
                method,
                graphs: mres.len(),
                min_mre: mres.iter().copied().fold(f64::INFINITY, f64::min),
                mean_mre: mres.iter().sum::<f64>() / mres.len() as f64,
                max_mre: mres.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

/// Runs every (graph, targets, method) combination and aggregates the mean
/// relative errors per radius, target setting and method. Simulations of
/// one graph share the configured seed across methods. When the spec names
/// an output directory, per-item JSON, `results.csv`, `summary.csv` and
/// `manifest.json` are written there.
pub fn evaluate(spec: &ExperimentSpec) -> Result<EvaluationReport> {
    spec.validate()?;
    let graphs = load_graphs(&spec.graphs)?;
    if let Evaluation::ExactForward = spec.evaluation {
        if let Some(big) = graphs.iter().find(|g| g.graph.n() > DEFAULT_STATE_CAP) {
            return Err(Error::StateSpaceTooLarge {
                n: big.graph.n(),
                cap: DEFAULT_STATE_CAP,
            });
        }
    }
    let mut jobs = Vec::new();
    for lg in &graphs {
        for t in &spec.targets {
            for &m in &spec.methods {
                jobs.push((lg, t, m));
            }
        }
    }
    let out_dir = spec.output_dir.as_deref();
    let items: Vec<ItemResult> = jobs
        .into_par_iter()
        .map(|(lg, t, m)| run_item(lg, t, m, &spec.evaluation, out_dir))
        .collect::<Result<_>>()?;
    let report = EvaluationReport {
        summary: summarise(&items),
        items,
    };
    if let Some(dir) = out_dir {
        write_csv(dir.join("results.csv"), &report.items)?;
        write_csv(dir.join("summary.csv"), &report.summary)?;
        let mut manifest = Manifest::new("evaluate");
        manifest.seeds = graphs.iter().filter_map(|g| g.seed).collect();
        if let Evaluation::Simulate(cfg) = &spec.evaluation {
            manifest.seeds.push(cfg.seed);
        }
        manifest.spec = Some(serde_json::to_value(spec)?);
        manifest.outputs = vec!["results.csv".into(), "summary.csv".into(), "items/".into()];
        write_atomic(dir.join("manifest.json"), &to_json_bytes(&manifest)?)?;
    }
    Ok(report)
}

pub fn write_csv<T: Serialize>(path: impl AsRef<Path>, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    write_atomic(path, &bytes)
}
