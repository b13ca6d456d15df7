//! Event-driven simulation of the ideal CSMA model: exponential back-offs
//! with rate `ν_i`, exponential transmissions with mean one.

use std::io;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::free_energy::BackoffVector;
use crate::graph::ConflictGraph;

/// Batches used for standard errors when there is a single replication.
pub const BATCHES: usize = 20;

/// What a link does with its back-off timer while a neighbour transmits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimerMode {
    /// A timer that expires while its link is blocked is dropped, and a
    /// fresh one starts when the link becomes unblocked (a timer still
    /// running at that point is kept). By memorylessness the residual
    /// back-off at unblocking is exponential either way, so this has the
    /// same law as `Redraw` without its repeated no-op expiries.
    #[default]
    Suspend,
    /// A blocked link's timer keeps running; on expiry it draws a new one.
    Redraw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub horizon: f64,
    pub warmup_fraction: f64,
    pub seed: u64,
    pub replications: usize,
    pub timer_mode: TimerMode,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            horizon: 1e6,
            warmup_fraction: 0.1,
            seed: 0,
            replications: 1,
            timer_mode: TimerMode::Suspend,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::InvalidArgument(format!("horizon must be positive, got {}", self.horizon)));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(Error::InvalidArgument(format!(
                "warm-up fraction must lie in [0, 1), got {}",
                self.warmup_fraction
            )));
        }
        if self.replications == 0 {
            return Err(Error::InvalidArgument("at least one replication is required".into()));
        }
        Ok(())
    }
}

/// RNG of replication `r`: the master seed with ChaCha stream number `r`.
pub fn replication_rng(seed: u64, r: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(r as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    /// Mean over replications of the fraction of measured time each link was active.
    pub achieved: Vec<f64>,
    pub std_error: Vec<f64>,
    pub per_replication: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_relative_error: Option<f64>,
    pub events: u64,
    pub wall_clock_secs: f64,
}

impl SimResult {
    pub fn with_target(mut self, target: &[f64]) -> Result<Self> {
        self.mean_relative_error = Some(mean_relative_error(target, &self.achieved)?);
        Ok(self)
    }

    /// Rows `replication,node,achieved`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["replication", "node", "achieved"])?;
        for (r, rep) in self.per_replication.iter().enumerate() {
            for (i, a) in rep.iter().enumerate() {
                out.write_record([r.to_string(), i.to_string(), a.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// `(1/n) Σ_i |a_i - φ_i| / φ_i`.
pub fn mean_relative_error(target: &[f64], achieved: &[f64]) -> Result<f64> {
    if target.len() != achieved.len() || target.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "target has {} entries, achieved {}",
            target.len(),
            achieved.len()
        )));
    }
    if let Some(i) = target.iter().position(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument(format!("target of link {i} must be positive")));
    }
    Ok(target
        .iter()
        .zip(achieved)
        .map(|(t, a)| (a - t).abs() / t)
        .sum::<f64>()
        / target.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    BackoffEnd,
    TxEnd,
}

/// Winner tree over the links holding each link's pending event time
/// (infinite when none). Every update re-plays one leaf-to-root path; equal
/// times resolve to the lower link id.
struct TimerHeap {
    size: usize,
    time: Vec<f64>,
    who: Vec<usize>,
    kind: Vec<Kind>,
}

impl TimerHeap {
    fn new(n: usize) -> Self {
        let size = n.max(1).next_power_of_two();
        let mut who = vec![0; 2 * size];
        for i in 0..size {
            who[size + i] = i;
        }
        for idx in (1..size).rev() {
            who[idx] = who[2 * idx];
        }
        Self {
            size,
            time: vec![f64::INFINITY; 2 * size],
            who,
            kind: vec![Kind::BackoffEnd; n],
        }
    }

    fn update(&mut self, node: usize, time: f64) {
        let mut idx = self.size + node;
        self.time[idx] = time;
        while idx > 1 {
            idx /= 2;
            let (l, r) = (2 * idx, 2 * idx + 1);
            let pick = if self.time[r] < self.time[l] { r } else { l };
            self.time[idx] = self.time[pick];
            self.who[idx] = self.who[pick];
        }
    }

    fn set(&mut self, node: usize, time: f64, kind: Kind) {
        self.kind[node] = kind;
        self.update(node, time);
    }

    fn remove(&mut self, node: usize) {
        self.update(node, f64::INFINITY);
    }

    fn is_pending(&self, node: usize) -> bool {
        self.time[self.size + node].is_finite()
    }

    fn peek(&self) -> Option<(usize, f64, Kind)> {
        let node = self.who[1];
        self.time[1]
            .is_finite()
            .then(|| (node, self.time[1], self.kind[node]))
    }
}

struct Run<'a> {
    g: &'a ConflictGraph,
    nu: &'a [f64],
    mode: TimerMode,
    rng: ChaCha8Rng,
    timers: TimerHeap,
    active: Vec<bool>,
    blocked: Vec<u32>,
    started: Vec<f64>,
    warmup: f64,
    horizon: f64,
    batch_len: f64,
    batches: Vec<Vec<f64>>,
    events: u64,
}

impl Run<'_> {
    fn exp(&mut self, rate: f64) -> f64 {
        let e: f64 = self.rng.sample(Exp1);
        e / rate
    }

    fn schedule_backoff(&mut self, i: usize, now: f64) {
        let time = now + self.exp(self.nu[i]);
        self.timers.set(i, time, Kind::BackoffEnd);
    }

    fn account(&mut self, i: usize, from: f64, to: f64) {
        let (mut a, b) = (from.max(self.warmup), to.min(self.horizon));
        let mut k = (((a - self.warmup) / self.batch_len) as usize).min(BATCHES - 1);
        while a < b {
            let end = if k + 1 == BATCHES {
                b
            } else {
                (self.warmup + (k + 1) as f64 * self.batch_len).min(b)
            };
            if end > a {
                self.batches[i][k] += end - a;
                a = end;
            }
            k += 1;
        }
    }

    fn activate(&mut self, i: usize, now: f64) {
        assert!(
            self.g.neighbors(i).iter().all(|&j| !self.active[j]),
            "link {i} activated next to an active neighbour at t = {now}"
        );
        self.active[i] = true;
        self.started[i] = now;
        let time = now + self.exp(1.0);
        self.timers.set(i, time, Kind::TxEnd);
        for &j in self.g.neighbors(i) {
            self.blocked[j] += 1;
        }
    }

    fn deactivate(&mut self, i: usize, now: f64) {
        self.active[i] = false;
        self.account(i, self.started[i], now);
        for idx in 0..self.g.degree(i) {
            let j = self.g.neighbors(i)[idx];
            self.blocked[j] -= 1;
            if self.blocked[j] == 0 && !self.timers.is_pending(j) {
                self.schedule_backoff(j, now);
            }
        }
        self.schedule_backoff(i, now);
    }

    fn run(mut self) -> (Vec<Vec<f64>>, u64) {
        for i in 0..self.g.n() {
            self.schedule_backoff(i, 0.0);
        }
        while let Some((i, time, kind)) = self.timers.peek() {
            if time > self.horizon {
                break;
            }
            self.events += 1;
            match kind {
                Kind::TxEnd => self.deactivate(i, time),
                Kind::BackoffEnd if self.blocked[i] == 0 => self.activate(i, time),
                Kind::BackoffEnd => match self.mode {
                    TimerMode::Suspend => self.timers.remove(i),
                    TimerMode::Redraw => self.schedule_backoff(i, time),
                },
            }
        }
        for i in 0..self.g.n() {
            if self.active[i] {
                self.account(i, self.started[i], self.horizon);
            }
        }
        (self.batches, self.events)
    }
}

/// Active time per link and batch for one replication.
fn replicate(g: &ConflictGraph, nu: &[f64], cfg: &SimConfig, r: usize) -> (Vec<Vec<f64>>, u64) {
    let warmup = cfg.warmup_fraction * cfg.horizon;
    Run {
        g,
        nu,
        mode: cfg.timer_mode,
        rng: replication_rng(cfg.seed, r),
        timers: TimerHeap::new(g.n()),
        active: vec![false; g.n()],
        blocked: vec![0; g.n()],
        started: vec![0.0; g.n()],
        warmup,
        horizon: cfg.horizon,
        batch_len: (cfg.horizon - warmup) / BATCHES as f64,
        batches: vec![vec![0.0; BATCHES]; g.n()],
        events: 0,
    }
    .run()
}

fn mean_and_se(samples: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let k = samples.clone().count() as f64;
    let mean = samples.clone().sum::<f64>() / k;
    let var = samples.map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    (mean, (var / k).sqrt())
}

/// Simulates `cfg.replications` independent runs. Standard errors come from
/// the spread across replications, or from batch means over the measured
/// window when there is only one.
pub fn simulate(g: &ConflictGraph, nu: &BackoffVector, cfg: &SimConfig) -> Result<SimResult> {
    cfg.validate()?;
    if nu.len() != g.n() {
        return Err(Error::InvalidArgument(format!("{} rates given for {} links", nu.len(), g.n())));
    }
    let start = Instant::now();
    let runs: Vec<(Vec<Vec<f64>>, u64)> = (0..cfg.replications)
        .into_par_iter()
        .map(|r| replicate(g, &nu.nu, cfg, r))
        .collect();
    let measured = cfg.horizon * (1.0 - cfg.warmup_fraction);
    let batch_len = measured / BATCHES as f64;
    let per_replication: Vec<Vec<f64>> = runs
        .iter()
        .map(|(b, _)| b.iter().map(|row| row.iter().sum::<f64>() / measured).collect())
        .collect();
    let (achieved, std_error): (Vec<f64>, Vec<f64>) = (0..g.n())
        .map(|i| {
            if cfg.replications > 1 {
                mean_and_se(per_replication.iter().map(|rep| rep[i]))
            } else {
                let (_, se) = mean_and_se(runs[0].0[i].iter().map(|t| t / batch_len));
                (per_replication[0][i], se)
            }
        })
        .unzip();
    Ok(SimResult {
        achieved,
        std_error,
        per_replication,
        mean_relative_error: None,
        events: runs.iter().map(|(_, e)| e).sum(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
    })
}
