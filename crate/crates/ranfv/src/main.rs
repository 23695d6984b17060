use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use ranfv::config::FileConfig;
use ranfv::harness::{self, Policy};
use ranfv::{demo, io};
use ranfv_core::oracle::{exhaustive_joint, optimality_gap, SearchLimits};
use ranfv_core::orchestrator::e_ac_asm;
use ranfv_core::scenario::generate_scenario;
use ranfv_core::{NetworkScenario, SolveResult};

#[derive(Parser)]
#[command(name = "ranfv", version, about = "Joint radio and NFV resource allocation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and print the cost summary and iteration trace.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Scenario JSON; generated from the configuration and seed when absent.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "proposed")]
        policy: Policy,
    },
    /// Run a Monte Carlo sweep and write one CSV row per trial and policy.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trials: Option<usize>,
        /// Policies to run (repeatable); overrides the configuration.
        #[arg(long, value_enum)]
        policy: Vec<Policy>,
        /// Record per-trial runtimes (the CSV is then no longer reproducible).
        #[arg(long)]
        timing: bool,
    },
    /// Compare the pipeline with the exhaustive optimum on a tiny scenario.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "proposed")]
        policy: Policy,
        /// Power grid spacing as a fraction of the power budget.
        #[arg(long, default_value_t = 0.01)]
        grid: f64,
    },
    /// Place the five-server, two-user example with both NFV algorithms.
    #[command(name = "demo-v-c")]
    DemoVC,
    /// Write a generated scenario as JSON.
    Generate {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(path: &Option<PathBuf>) -> anyhow::Result<FileConfig> {
    match path {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

fn scenario_for(cfg: &FileConfig, file: &Option<PathBuf>, seed: Option<u64>) -> anyhow::Result<NetworkScenario> {
    match file {
        Some(p) => io::read_scenario(p),
        None => Ok(generate_scenario(&cfg.scenario_config()?, seed.unwrap_or(0))?),
    }
}

fn print_summary(out: &mut impl Write, r: &SolveResult, total_users: usize) -> std::io::Result<()> {
    writeln!(out, "accepted      {}/{}", r.accepted_users.len(), total_users)?;
    let rejected: Vec<String> = r.rejected_users.iter().map(|(id, g)| format!("{id} ({g:.4})")).collect();
    writeln!(out, "rejected      [{}]", rejected.join(", "))?;
    let c = &r.cost_breakdown;
    writeln!(out, "cost          {:.6} (power {:.6}, spectrum {:.6}, servers {:.6})", c.total(), c.power, c.spectrum, c.servers)?;
    writeln!(out, "elastic       {:.3e}", r.elastic)?;
    writeln!(out, "active        {}", r.schedule.active_count())?;
    writeln!(out, "iterations    {} (converged: {})", r.iterations, r.converged)?;
    Ok(())
}

fn main() -> anyhow::Result<()> {
    match run(Cli::parse()) {
        Err(e) if e.downcast_ref::<std::io::Error>().is_some_and(|e| e.kind() == std::io::ErrorKind::BrokenPipe) => Ok(()),
        r => r,
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Solve { common, scenario, policy } => {
            let cfg = load_config(&common.config)?;
            let s = scenario_for(&cfg, &scenario, common.seed)?;
            let options = policy.options(&cfg.solve_options()?, common.seed.unwrap_or(0));
            let r = e_ac_asm(&s, &cfg.weights(), &options);
            print_summary(&mut out, &r, s.num_users())?;
            writeln!(out, "round iter psi elastic objective")?;
            for t in &r.trace {
                writeln!(out, "{} {} {:.6} {:.3e} {:.6}", t.round, t.iteration, t.psi, t.elastic, t.objective)?;
            }
            if let Some(path) = &common.out {
                io::write_json(&r, path)?;
            }
        }
        Command::Sweep { common, trials, policy, timing } => {
            let cfg = load_config(&common.config)?;
            let mut spec = cfg.sweep_spec()?;
            if let Some(t) = trials {
                spec.trials = t;
            }
            if let Some(s) = common.seed {
                spec.seed = s;
            }
            if !policy.is_empty() {
                spec.policies = policy;
            }
            spec.timing |= timing;
            let rows = harness::run_monte_carlo(&spec)?;
            match &common.out {
                Some(p) => harness::export_csv(&rows, p)?,
                None => harness::write_csv(&rows, &mut out)?,
            }
            let failed = rows.iter().filter(|r| !r.ok()).count();
            if failed > 0 {
                eprintln!("{failed} of {} trials failed; see the status column", rows.len());
            }
        }
        Command::Oracle { common, scenario, policy, grid } => {
            let cfg = load_config(&common.config)?;
            let s = scenario_for(&cfg, &scenario, common.seed)?;
            if s.num_users() > 3 || s.num_subcarriers > 6 || s.num_servers() > 4 {
                bail!(
                    "oracle needs at most 3 users, 6 subcarriers and 4 servers (got {}, {}, {})",
                    s.num_users(),
                    s.num_subcarriers,
                    s.num_servers()
                );
            }
            if !(grid > 0.0 && grid <= 1.0) {
                bail!("--grid must be in (0, 1], got {grid}");
            }
            let weights = cfg.weights();
            let options = policy.options(&cfg.solve_options()?, common.seed.unwrap_or(0));
            let r = e_ac_asm(&s, &weights, &options);
            let o = exhaustive_joint(&s, &weights, grid * s.max_power_w, &SearchLimits::default());
            print_summary(&mut out, &r, s.num_users())?;
            writeln!(out, "oracle cost   {:.6} ({} nodes, proven optimal: {})", o.best_objective, o.nodes_explored, o.proven_optimal)?;
            if !r.rejected_users.is_empty() {
                writeln!(out, "gap           undefined: the pipeline rejected users")?;
            } else {
                match optimality_gap(r.total_cost(), o.best_objective) {
                    Ok(g) => writeln!(out, "gap           {:.4}", g)?,
                    Err(e) => writeln!(out, "gap           {e}")?,
                }
            }
            if let Some(path) = &common.out {
                io::write_json(&o, path)?;
            }
        }
        Command::DemoVC => {
            let (h, g) = demo::run();
            for (name, p) in [("heuristic", &h), ("greedy baseline", &g)] {
                let completions: Vec<String> = p.completions.iter().map(|c| format!("{c}")).collect();
                writeln!(out, "{name}")?;
                writeln!(out, "  active servers  {} {:?}", p.active_capacities.len(), p.active_capacities)?;
                writeln!(out, "  completions     [{}]", completions.join(", "))?;
                writeln!(out, "  utilization     {:.4}", p.utilization)?;
                writeln!(out, "  feasible        {}", p.feasible)?;
            }
        }
        Command::Generate { common } => {
            let cfg = load_config(&common.config)?;
            let s = generate_scenario(&cfg.scenario_config()?, common.seed.unwrap_or(0))?;
            match &common.out {
                Some(p) => io::write_json(&s, p)?,
                None => writeln!(out, "{}", serde_json::to_string_pretty(&s).context("serializing scenario")?)?,
            }
        }
    }
    Ok(())
}
