//! Command-line front end.

use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiment::{evaluate, timed_rates, write_csv, Evaluation, ExperimentSpec, TargetSpec};
use crate::free_energy::{Method, ThroughputVector};
use crate::graph::{max_clique_size, random_geometric_graph, ConflictGraph};
use crate::oracle::{
    enumerate_independent_sets, feasibility_check, forward_on, Feasibility, DEFAULT_STATE_CAP,
};
use crate::report::{load_rates, to_json_bytes, write_atomic, write_rates_csv, Manifest, RatesReport};
use crate::simulator::{simulate, SimConfig, TimerMode};

#[derive(Debug, Parser)]
#[command(name = "csma", version, about = "Back-off rates for idealized CSMA networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Random geometric conflict graph in the unit square.
    Generate(GenerateArgs),
    /// Back-off rates for target throughputs, with timings.
    Rates(RatesArgs),
    /// Simulate the network under given or computed rates.
    Simulate(SimulateArgs),
    /// Run a batch experiment described by a JSON spec.
    Evaluate(EvaluateArgs),
    /// Brute-force feasibility, inverse rates or forward throughputs.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub radius: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    match s {
        "kmax" => Ok(Method::Kmax(None)),
        "kikuchi" => Ok(Method::Kikuchi(None)),
        _ => s.parse().map_err(|e: Error| e.to_string()),
    }
}

fn parse_targets(s: &str) -> std::result::Result<TargetSpec, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

#[derive(Debug, Args)]
pub struct RatesArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// uniform:V | max-clique:PHI | degree:C | list:a,b,.. | file:PATH
    #[arg(long, value_parser = parse_targets)]
    pub targets: TargetSpec,
    /// bethe | triangle | kmax[:K|:n] | kikuchi[:K|:n] | chordal-exact | oracle (repeatable)
    #[arg(long = "method", value_parser = parse_method, required = true)]
    pub methods: Vec<Method>,
    /// Cap applied to `kmax` and `kikuchi` methods given without one.
    #[arg(long)]
    pub k_max: Option<usize>,
    /// Rates CSV (stdout when omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Timing table CSV.
    #[arg(long)]
    pub timing: Option<PathBuf>,
    /// Evaluations averaged per timing.
    #[arg(long, default_value_t = 1)]
    pub repeats: usize,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum TimerModeArg {
    Suspend,
    Redraw,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Rates file (CSV or JSON) written by `rates`.
    #[arg(long, conflicts_with = "method")]
    pub rates: Option<PathBuf>,
    #[arg(long, value_parser = parse_method, requires = "targets")]
    pub method: Option<Method>,
    /// Targets for the method, and the reference for the error.
    #[arg(long, value_parser = parse_targets)]
    pub targets: Option<TargetSpec>,
    #[arg(long, default_value_t = 1e6)]
    pub horizon: f64,
    #[arg(long, default_value_t = 0.1)]
    pub warmup: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub replications: usize,
    #[arg(long, value_enum, default_value = "suspend")]
    pub timer_mode: TimerModeArg,
    /// Per-replication CSV.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary (stdout when omitted).
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub spec: PathBuf,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Overrides the simulation horizon of the spec.
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Overrides the simulation seed of the spec.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Check feasibility and solve for rates.
    #[arg(long, value_parser = parse_targets, required_unless_present = "rates")]
    pub targets: Option<TargetSpec>,
    /// Compute exact throughputs of these rates instead.
    #[arg(long, conflicts_with = "targets")]
    pub rates: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_STATE_CAP)]
    pub cap: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => write_atomic(p, bytes),
        None => {
            io::stdout().write_all(bytes)?;
            Ok(())
        }
    }
}

fn write_manifest(command: &str, out: &Path, seeds: Vec<u64>, outputs: &[&Path]) -> Result<()> {
    let mut m = Manifest::new(command);
    m.seeds = seeds;
    m.outputs = outputs.iter().map(|p| p.display().to_string()).collect();
    write_atomic(manifest_path(out), &to_json_bytes(&m)?)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Rates(a) => rates(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::Oracle(a) => oracle(a),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let g = random_geometric_graph(a.n, a.radius, a.seed)?;
    write_atomic(&a.out, g.to_json()?.as_bytes())?;
    write_manifest("generate", &a.out, vec![a.seed], &[&a.out])?;
    println!("edges: {}", g.edge_count());
    println!("max_clique: {}", max_clique_size(&g));
    Ok(())
}

#[derive(Serialize)]
struct TimingRow {
    method: String,
    k_max: Option<usize>,
    n: usize,
    max_clique: usize,
    total_secs: f64,
    per_node_secs: f64,
    repeats: usize,
}

fn rates(a: RatesArgs) -> Result<()> {
    let g = ConflictGraph::load(&a.graph)?;
    let phi = a.targets.build(&g)?;
    let omega = max_clique_size(&g);
    let mut reports = Vec::new();
    let mut rows = Vec::new();
    for &m in &a.methods {
        let m = match (m, a.k_max) {
            (Method::Kmax(None), Some(k)) => Method::Kmax(Some(k)),
            (Method::Kikuchi(None), Some(k)) => Method::Kikuchi(Some(k)),
            (m, _) => m,
        };
        let (nu, timing) = timed_rates(&g, &phi, m, a.repeats)?;
        if let Some(w) = &nu.warning {
            eprintln!("warning ({m}): {w}");
        }
        eprintln!(
            "{m}: total {:.6e} s, per node {:.6e} s",
            timing.total_secs, timing.per_node_secs
        );
        rows.push(TimingRow {
            method: m.to_string(),
            k_max: m.k_max(g.n()),
            n: g.n(),
            max_clique: omega,
            total_secs: timing.total_secs,
            per_node_secs: timing.per_node_secs,
            repeats: timing.repeats,
        });
        reports.push(RatesReport::new(&phi, &nu, Some(timing)));
    }
    let mut csv_bytes = Vec::new();
    write_rates_csv(&mut csv_bytes, &reports)?;
    emit(a.out.as_deref(), &csv_bytes)?;
    if let Some(p) = &a.json {
        let body = if reports.len() == 1 {
            to_json_bytes(&reports[0])?
        } else {
            to_json_bytes(&reports)?
        };
        write_atomic(p, &body)?;
    }
    if let Some(p) = &a.timing {
        write_csv(p, &rows)?;
    }
    let outputs: Vec<&Path> = [&a.out, &a.json, &a.timing].into_iter().flatten().map(PathBuf::as_path).collect();
    if let Some(first) = outputs.first() {
        write_manifest("rates", first, g.seed().into_iter().collect(), &outputs)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct SimSummary<'a> {
    method: Option<String>,
    horizon: f64,
    warmup_fraction: f64,
    seed: u64,
    replications: usize,
    achieved: &'a [f64],
    std_error: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_relative_error: Option<f64>,
    events: u64,
    wall_clock_secs: f64,
}

fn simulate_cmd(a: SimulateArgs) -> Result<()> {
    let g = ConflictGraph::load(&a.graph)?;
    let targets = a.targets.as_ref().map(|t| t.build(&g)).transpose()?;
    let (nu, reference) = match (&a.rates, a.method) {
        (Some(path), _) => {
            let rep = load_rates(path)?;
            let reference = targets.clone().map_or_else(|| ThroughputVector::new(rep.phi.clone()).ok(), Some);
            (rep.backoff()?, reference)
        }
        (None, Some(m)) => {
            let phi = targets.clone().expect("clap enforces targets with method");
            (crate::experiment::compute_rates(&g, &phi, m)?, Some(phi))
        }
        (None, None) => return Err(Error::InvalidArgument("give --rates or --method with --targets".into())),
    };
    let cfg = SimConfig {
        horizon: a.horizon,
        warmup_fraction: a.warmup,
        seed: a.seed,
        replications: a.replications,
        timer_mode: match a.timer_mode {
            TimerModeArg::Suspend => TimerMode::Suspend,
            TimerModeArg::Redraw => TimerMode::Redraw,
        },
    };
    let mut res = simulate(&g, &nu, &cfg)?;
    if let Some(phi) = &reference {
        res = res.with_target(phi.as_slice())?;
    }
    if let Some(p) = &a.out {
        let mut buf = Vec::new();
        res.write_csv(&mut buf)?;
        write_atomic(p, &buf)?;
    }
    let summary = SimSummary {
        method: Some(nu.method.to_string()),
        horizon: cfg.horizon,
        warmup_fraction: cfg.warmup_fraction,
        seed: cfg.seed,
        replications: cfg.replications,
        achieved: &res.achieved,
        std_error: &res.std_error,
        mean_relative_error: res.mean_relative_error,
        events: res.events,
        wall_clock_secs: res.wall_clock_secs,
    };
    emit(a.summary.as_deref(), &to_json_bytes(&summary)?)?;
    let outputs: Vec<&Path> = [&a.out, &a.summary].into_iter().flatten().map(PathBuf::as_path).collect();
    if let Some(first) = outputs.first() {
        let mut seeds: Vec<u64> = g.seed().into_iter().collect();
        seeds.push(cfg.seed);
        write_manifest("simulate", first, seeds, &outputs)?;
    }
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    let mut spec = ExperimentSpec::load(&a.spec)?;
    if a.out_dir.is_some() {
        spec.output_dir = a.out_dir;
    }
    if let Evaluation::Simulate(cfg) = &mut spec.evaluation {
        if let Some(h) = a.horizon {
            cfg.horizon = h;
        }
        if let Some(s) = a.seed {
            cfg.seed = s;
        }
    }
    let report = evaluate(&spec)?;
    let mut out = io::stdout().lock();
    writeln!(out, "radius,targets,method,graphs,min_mre,mean_mre,max_mre")?;
    for r in &report.summary {
        writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6}",
            r.radius.map_or_else(String::new, |v| v.to_string()),
            r.targets,
            r.method,
            r.graphs,
            r.min_mre,
            r.mean_mre,
            r.max_mre
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ForwardReport {
    throughputs: Vec<f64>,
    z: f64,
    states: usize,
}

fn oracle(a: OracleArgs) -> Result<()> {
    let g = ConflictGraph::load(&a.graph)?;
    if let Some(path) = &a.rates {
        let nu = load_rates(path)?.backoff()?;
        let space = enumerate_independent_sets(&g, a.cap)?;
        let f = forward_on(&space, &nu.nu)?;
        let body = to_json_bytes(&ForwardReport {
            throughputs: f.throughputs,
            z: f.z,
            states: space.len(),
        })?;
        return emit(a.out.as_deref(), &body);
    }
    let phi = a.targets.as_ref().expect("clap enforces targets or rates").build(&g)?;
    let report = feasibility_check(&g, &phi, a.cap)?;
    emit(a.out.as_deref(), &to_json_bytes(&report)?)?;
    if report.verdict == Feasibility::Infeasible {
        return Err(Error::Infeasible {
            region: report.heaviest_clique,
            sum: report.heaviest_clique_sum,
        });
    }
    Ok(())
}
