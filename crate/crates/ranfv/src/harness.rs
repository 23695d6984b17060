//! Monte Carlo sweeps over one scenario parameter.

use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context};
use ranfv_core::orchestrator::{e_ac_asm, NfvPolicy, RadioPolicy};
use ranfv_core::scenario::{generate_scenario, Bounds};
use ranfv_core::{metrics, mix_seed, ScenarioConfig, SolveOptions};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Alternating radio steps with the proposed NFV heuristic.
    Proposed,
    /// Alternating radio steps with the baseline greedy NFV placement.
    GreedyBaseline,
    /// Random subcarriers with an even power split, proposed NFV heuristic.
    RadioRandom,
    /// Equal power and best-SNR subcarriers, proposed NFV heuristic.
    #[serde(rename = "radio-equal-maxsinr")]
    #[value(name = "radio-equal-maxsinr")]
    RadioEqualMaxSinr,
}

impl Policy {
    pub const ALL: [Policy; 4] = [
        Policy::Proposed,
        Policy::GreedyBaseline,
        Policy::RadioRandom,
        Policy::RadioEqualMaxSinr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Proposed => "proposed",
            Policy::GreedyBaseline => "greedy-baseline",
            Policy::RadioRandom => "radio-random",
            Policy::RadioEqualMaxSinr => "radio-equal-maxsinr",
        }
    }

    /// Solver options for this policy; `seed` drives the random radio baseline.
    pub fn options(self, base: &SolveOptions, seed: u64) -> SolveOptions {
        let (radio, nfv) = match self {
            Policy::Proposed => (RadioPolicy::Alternating, NfvPolicy::Heuristic),
            Policy::GreedyBaseline => (RadioPolicy::Alternating, NfvPolicy::GreedyBaseline),
            Policy::RadioRandom => (RadioPolicy::Random { seed }, NfvPolicy::Heuristic),
            Policy::RadioEqualMaxSinr => (RadioPolicy::EqualMaxSinr, NfvPolicy::Heuristic),
        };
        SolveOptions { radio, nfv, ..*base }
    }
}

/// The swept scenario parameter.
///
/// `Users` and `Servers` fix the count to the value. The range parameters
/// take the value as the midpoint: `Deadline` and `Rate` draw from
/// `[v/2, 3v/2]`, `Capacity` (server CPU) from `[2v/3, 4v/3]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Parameter {
    Users,
    Servers,
    Deadline,
    Rate,
    Capacity,
}

impl Parameter {
    pub fn name(self) -> &'static str {
        match self {
            Parameter::Users => "users",
            Parameter::Servers => "servers",
            Parameter::Deadline => "deadline",
            Parameter::Rate => "rate",
            Parameter::Capacity => "capacity",
        }
    }

    pub fn apply(self, base: &ScenarioConfig, v: f64) -> anyhow::Result<ScenarioConfig> {
        let mut c = base.clone();
        let count = || -> anyhow::Result<usize> {
            if v < 1.0 || v.fract() != 0.0 {
                bail!("{} must be a positive integer, got {v}", self.name());
            }
            Ok(v as usize)
        };
        match self {
            Parameter::Users => c.users = Bounds::new(count()?, count()?),
            Parameter::Servers => c.servers = Bounds::new(count()?, count()?),
            Parameter::Deadline => c.deadline = Bounds::new(0.5 * v, 1.5 * v),
            Parameter::Rate => c.min_rate = Bounds::new(0.5 * v, 1.5 * v),
            Parameter::Capacity => c.cpu_capacity = Bounds::new(2.0 * v / 3.0, 4.0 * v / 3.0),
        }
        c.validate()?;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: ScenarioConfig,
    pub parameter: Parameter,
    pub values: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub policies: Vec<Policy>,
    pub options: SolveOptions,
    /// Record wall-clock time per trial. Off by default so that output is
    /// reproducible byte for byte.
    pub timing: bool,
}

impl SweepSpec {
    pub fn new(base: ScenarioConfig) -> Self {
        Self {
            base,
            parameter: Parameter::Users,
            values: vec![5.0, 15.0, 25.0],
            trials: 500,
            seed: 0,
            policies: vec![Policy::Proposed],
            options: SolveOptions {
                admission: ranfv_core::orchestrator::AdmissionRule::Excess,
                ..SolveOptions::default()
            },
            timing: false,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        if self.trials == 0 {
            bail!("trials must be >= 1");
        }
        if self.values.is_empty() {
            bail!("sweep needs at least one value");
        }
        if self.policies.is_empty() {
            bail!("sweep needs at least one policy");
        }
        for &v in &self.values {
            self.parameter.apply(&self.base, v)?;
        }
        Ok(())
    }
}

/// Scenario seed of one trial. Independent of the policy, so every policy
/// sees the same instances.
pub fn trial_seed(base: u64, point: usize, trial: usize) -> u64 {
    mix_seed(mix_seed(base ^ mix_seed(point as u64)) ^ trial as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub policy: Policy,
    pub parameter: Parameter,
    pub value: f64,
    pub point: usize,
    pub trial: usize,
    pub seed: u64,
    pub users: usize,
    pub sar: f64,
    pub total_cost: f64,
    pub radio_cost: f64,
    pub nfv_cost: f64,
    pub active_servers: usize,
    pub servers: usize,
    pub utilization: f64,
    pub iterations: usize,
    pub converged: bool,
    pub runtime_s: Option<f64>,
    /// `ok`, or the failure message of a trial that could not run.
    pub status: String,
}

impl ResultRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

fn run_trial(spec: &SweepSpec, point: usize, trial: usize, policy: Policy) -> ResultRow {
    let value = spec.values[point];
    let seed = trial_seed(spec.seed, point, trial);
    let mut row = ResultRow {
        policy,
        parameter: spec.parameter,
        value,
        point,
        trial,
        seed,
        users: 0,
        sar: 0.0,
        total_cost: 0.0,
        radio_cost: 0.0,
        nfv_cost: 0.0,
        active_servers: 0,
        servers: 0,
        utilization: 0.0,
        iterations: 0,
        converged: false,
        runtime_s: None,
        status: "ok".into(),
    };
    let outcome = panic::catch_unwind(AssertUnwindSafe(|| -> anyhow::Result<()> {
        let config = spec.parameter.apply(&spec.base, value)?;
        let scenario = generate_scenario(&config, seed)?;
        let options = policy.options(&spec.options, seed);
        let start = Instant::now();
        let result = e_ac_asm(&scenario, &config.weights, &options);
        let elapsed = start.elapsed().as_secs_f64();

        let accepted = scenario.retain_users(&result.accepted_users);
        row.users = scenario.num_users();
        row.servers = scenario.num_servers();
        row.sar = metrics::sar(result.rejected_users.len(), scenario.num_users())?;
        row.total_cost = result.total_cost();
        row.radio_cost = result.cost_breakdown.radio();
        row.nfv_cost = result.cost_breakdown.servers;
        row.active_servers = result.schedule.active_count();
        row.utilization = metrics::utilization_ratio(&result.schedule, &accepted, &accepted.packet_sizes());
        row.iterations = result.iterations;
        row.converged = result.converged;
        if spec.timing {
            row.runtime_s = Some(elapsed);
        }
        Ok(())
    }));
    match outcome {
        Ok(Ok(())) => {}
        Ok(Err(e)) => row.status = format!("error: {e:#}"),
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown".into());
            row.status = format!("panic: {msg}");
        }
    }
    row
}

/// Run every (point, trial, policy) combination in parallel. Rows come back
/// in that nested order whatever the completion order was.
pub fn run_monte_carlo(spec: &SweepSpec) -> anyhow::Result<Vec<ResultRow>> {
    spec.validate()?;
    let jobs: Vec<(usize, usize, Policy)> = (0..spec.values.len())
        .flat_map(|p| (0..spec.trials).flat_map(move |t| spec.policies.iter().map(move |&pol| (p, t, pol))))
        .collect();
    Ok(jobs.into_par_iter().map(|(p, t, pol)| run_trial(spec, p, t, pol)).collect())
}

pub fn write_csv<W: std::io::Write>(rows: &[ResultRow], out: W) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        // serde only emits the header together with the first record
        w.write_record(CSV_HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub const CSV_HEADER: [&str; 18] = [
    "policy",
    "parameter",
    "value",
    "point",
    "trial",
    "seed",
    "users",
    "sar",
    "total_cost",
    "radio_cost",
    "nfv_cost",
    "active_servers",
    "servers",
    "utilization",
    "iterations",
    "converged",
    "runtime_s",
    "status",
];

pub fn export_csv(rows: &[ResultRow], path: &Path) -> anyhow::Result<()> {
    let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    write_csv(rows, std::io::BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))
}

pub fn import_csv(path: &Path) -> anyhow::Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let rows = r.deserialize().collect::<Result<Vec<ResultRow>, _>>();
    rows.with_context(|| format!("parsing {}", path.display()))
}

/// Mean and standard error of one metric at one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSummary {
    pub value: f64,
    pub n: usize,
    pub mean: f64,
    pub std_err: f64,
}

pub fn summarize(values: &[f64], x: f64) -> PointSummary {
    let n = values.len();
    if n == 0 {
        return PointSummary { value: x, n, mean: f64::NAN, std_err: f64::NAN };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = if n > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    PointSummary { value: x, n, mean, std_err: (var / n as f64).sqrt() }
}

/// Per-point summaries of `metric` over the successful rows of `policy`.
pub fn point_means(rows: &[ResultRow], policy: Policy, metric: impl Fn(&ResultRow) -> f64) -> Vec<PointSummary> {
    let points = rows.iter().map(|r| r.point + 1).max().unwrap_or(0);
    (0..points)
        .filter_map(|p| {
            let sel: Vec<&ResultRow> = rows.iter().filter(|r| r.point == p && r.policy == policy && r.ok()).collect();
            let x = sel.first()?.value;
            let vals: Vec<f64> = sel.iter().map(|r| metric(r)).collect();
            Some(summarize(&vals, x))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Increasing,
    Decreasing,
    NonIncreasing,
    NonDecreasing,
}

/// Whether `b` follows `a` in direction `dir`.
///
/// Strict directions need the difference of means to have the right sign.
/// Weak directions also accept a wrong-signed difference smaller than two
/// standard errors of that difference.
pub fn step_holds(a: &PointSummary, b: &PointSummary, dir: Direction) -> bool {
    let d = b.mean - a.mean;
    let guard = 2.0 * (a.std_err.powi(2) + b.std_err.powi(2)).sqrt();
    match dir {
        Direction::Increasing => d > 0.0,
        Direction::Decreasing => d < 0.0,
        Direction::NonIncreasing => d <= guard,
        Direction::NonDecreasing => d >= -guard,
    }
}

pub fn trend_holds(points: &[PointSummary], dir: Direction) -> bool {
    points.windows(2).all(|w| step_holds(&w[0], &w[1], dir))
}
