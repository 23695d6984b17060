//! Cost model, the alternating radio/NFV solve and elastic admission control.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::baselines;
use crate::error::Error;
use crate::math::mix_seed;
use crate::nfv::{self, ScheduleAssignment};
use crate::radio::{self, RadioAllocation};
use crate::scenario::NetworkScenario;

/// Elastic values at or below this count as zero.
pub const ELASTIC_ZERO: f64 = 1e-6;

/// Cost and admission-score weights.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CostWeights {
    /// Per Watt.
    pub mu1: f64,
    /// Per kHz of assigned spectrum.
    pub mu2: f64,
    /// Per active server.
    pub mu3: f64,
    /// Rate-gap weight, per bps/Hz.
    pub kappa1: f64,
    /// Storage-gap weight, per MB.
    pub kappa2: f64,
    /// CPU-gap weight, per cycle/s.
    pub kappa3: f64,
    /// Penalty on the elastic variable.
    pub w: f64,
}

impl Default for CostWeights {
    fn default() -> Self {
        Self {
            mu1: 1.0,
            mu2: 1.0,
            mu3: 10.0,
            kappa1: 50.0,
            kappa2: 1.0,
            kappa3: 1.0,
            w: 1e4,
        }
    }
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), Error> {
        let all = [
            ("mu1", self.mu1),
            ("mu2", self.mu2),
            ("mu3", self.mu3),
            ("kappa1", self.kappa1),
            ("kappa2", self.kappa2),
            ("kappa3", self.kappa3),
        ];
        for (name, v) in all {
            if !(v >= 0.0) {
                return Err(Error::InvalidConfig(format!("{name} must be >= 0, got {v}")));
            }
        }
        if !(self.w >= 1e3) {
            return Err(Error::InvalidConfig(format!("w must be >= 1e3, got {}", self.w)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CostBreakdown {
    pub power: f64,
    pub spectrum: f64,
    pub servers: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.power + self.spectrum + self.servers
    }

    pub fn radio(&self) -> f64 {
        self.power + self.spectrum
    }
}

/// `mu1 * sum(rho p) + mu2 * B * sum(rho) + mu3 * sum(eta)`.
pub fn cost(radio: &RadioAllocation, active: &[bool], bandwidth_khz: f64, weights: &CostWeights) -> (f64, CostBreakdown) {
    let b = CostBreakdown {
        power: weights.mu1 * radio.total_power(),
        spectrum: weights.mu2 * bandwidth_khz * radio.assigned_count() as f64,
        servers: weights.mu3 * active.iter().filter(|a| **a).count() as f64,
    };
    (b.total(), b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum RadioPolicy {
    /// Alternating subcarrier and elastic power steps.
    #[default]
    Alternating,
    /// Random subcarrier owners, budget split evenly; seeded.
    Random { seed: u64 },
    /// Equal power per subcarrier, each subcarrier to the best-SNR user.
    EqualMaxSinr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum NfvPolicy {
    #[default]
    Heuristic,
    GreedyBaseline,
}

/// How the admission score measures the storage and CPU gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum AdmissionRule {
    /// `|sum_n (load of u on n - capacity of n)|`.
    #[default]
    Absolute,
    /// Overload of the servers hosting the user, `sum_{n hosts u} max(0, load_n - capacity_n)`;
    /// the rate gap counts only shortfalls.
    Excess,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SolveOptions {
    pub eps: f64,
    pub max_iter: usize,
    pub radio: RadioPolicy,
    pub nfv: NfvPolicy,
    pub admission: AdmissionRule,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            eps: 1e-4,
            max_iter: 30,
            radio: RadioPolicy::Alternating,
            nfv: NfvPolicy::Heuristic,
            admission: AdmissionRule::Absolute,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TraceRecord {
    /// Admission round (0 before any rejection).
    pub round: usize,
    pub iteration: usize,
    /// Network cost without the elastic penalty.
    pub psi: f64,
    pub elastic: f64,
    pub objective: f64,
    pub breakdown: CostBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SolveResult {
    /// Allocation over `accepted_users`, in their scenario order.
    pub radio: RadioAllocation,
    pub schedule: ScheduleAssignment,
    /// `max(radio_elastic, nfv_elastic)`.
    pub elastic: f64,
    pub radio_elastic: f64,
    pub nfv_elastic: f64,
    pub cost_breakdown: CostBreakdown,
    /// Objective `psi + W * elastic` per iteration of the last solve.
    pub objective_trace: Vec<f64>,
    /// Every iteration of every admission round.
    pub trace: Vec<TraceRecord>,
    pub iterations: usize,
    pub converged: bool,
    pub rates: Vec<f64>,
    pub accepted_users: Vec<u32>,
    /// Rejected user ids in rejection order with their admission scores.
    pub rejected_users: Vec<(u32, f64)>,
}

impl SolveResult {
    pub fn total_cost(&self) -> f64 {
        self.cost_breakdown.total()
    }

    pub fn objective(&self) -> f64 {
        self.objective_trace.last().copied().unwrap_or(0.0)
    }
}

fn schedule_for(scenario: &NetworkScenario, packet_sizes: &[f64], policy: NfvPolicy) -> ScheduleAssignment {
    match policy {
        NfvPolicy::Heuristic => nfv::heuristic_nfv_ra(scenario, packet_sizes),
        NfvPolicy::GreedyBaseline => nfv::greedy_baseline_nfv_ra(scenario, packet_sizes),
    }
}

/// Largest rate shortfall `max(0, floor_u - R_u)`.
fn rate_shortfall(alloc: &RadioAllocation, scenario: &NetworkScenario) -> f64 {
    (0..scenario.num_users())
        .map(|u| scenario.rate_floor(u) - radio::user_rate(alloc, scenario, u))
        .fold(0.0, f64::max)
}

/// One elastic solve over all users of `scenario`: alternate subcarrier
/// assignment (at fixed powers), elastic power allocation (at fixed
/// assignment) and NFV placement until the objective changes by at most
/// `eps` or `max_iter` iterations ran.
///
/// The NFV step depends only on the packet sizes, so it runs once. Its excess
/// over the CPU, storage and deadline limits shares the elastic variable with
/// the rate floors. An iterate that would raise the objective is discarded and
/// the solve stops at the previous one.
pub fn asm_solve(scenario: &NetworkScenario, weights: &CostWeights, options: &SolveOptions) -> SolveResult {
    asm_round(scenario, weights, options, 0)
}

fn asm_round(scenario: &NetworkScenario, weights: &CostWeights, options: &SolveOptions, round: usize) -> SolveResult {
    let users = scenario.num_users();
    let k = scenario.num_subcarriers;
    let b = scenario.subcarrier_bandwidth_khz;
    let y = scenario.packet_sizes();
    let schedule = schedule_for(scenario, &y, options.nfv);
    let nfv_elastic = nfv::check_schedule(&schedule, scenario, &y).elastic();

    let mut trace = Vec::new();
    let record = |iteration: usize, alloc: &RadioAllocation, radio_elastic: f64| {
        let elastic = radio_elastic.max(nfv_elastic);
        let (psi, breakdown) = cost(alloc, &schedule.active, b, weights);
        TraceRecord {
            round,
            iteration,
            psi,
            elastic,
            objective: psi + weights.w * elastic,
            breakdown,
        }
    };

    let (alloc, radio_elastic, converged) = match options.radio {
        RadioPolicy::Alternating if users > 0 => {
            let floors = scenario.rate_floors();
            let mut power = vec![vec![scenario.max_power_w / (users * k) as f64; k]; users];
            let mut best: Option<(RadioAllocation, f64)> = None;
            let mut converged = false;
            for z in 1..=options.max_iter.max(1) {
                let relax = best.as_ref().map_or(0.0, |b| b.1);
                let targets: Vec<f64> = floors.iter().map(|f| (f - relax).max(0.0)).collect();
                let assignment = match radio::solve_subcarrier_with_floors(&power, scenario, &targets) {
                    Ok(a) => a,
                    Err(_) => match &best {
                        Some((prev, _)) => prev.assignment.clone(),
                        None => radio::seed_assignment(&power, scenario, &targets),
                    },
                };
                let out = radio::solve_power_elastic(&assignment, scenario, weights.w);
                let alloc = RadioAllocation::new(assignment, out.power);
                let rec = record(z, &alloc, out.elastic);
                let prev = trace.last().map(|r: &TraceRecord| r.objective);
                if let Some(p) = prev {
                    if rec.objective > p {
                        converged = true;
                        break;
                    }
                }
                let delta = prev.map(|p| (rec.objective - p).abs());
                trace.push(rec);
                power = alloc.power.clone();
                best = Some((alloc, out.elastic));
                if delta.is_some_and(|d| d <= options.eps) {
                    converged = true;
                    break;
                }
            }
            let (alloc, a) = best.expect("at least one iteration");
            (alloc, a, converged)
        }
        RadioPolicy::Alternating => {
            let alloc = RadioAllocation::empty(0, k);
            trace.push(record(1, &alloc, 0.0));
            (alloc, 0.0, true)
        }
        RadioPolicy::Random { seed } => {
            let alloc = baselines::baseline_radio_random(scenario, mix_seed(seed ^ round as u64));
            let a = rate_shortfall(&alloc, scenario);
            trace.push(record(1, &alloc, a));
            (alloc, a, true)
        }
        RadioPolicy::EqualMaxSinr => {
            let alloc = baselines::baseline_radio_equal_maxsinr(scenario);
            let a = rate_shortfall(&alloc, scenario);
            trace.push(record(1, &alloc, a));
            (alloc, a, true)
        }
    };

    let last = trace.last().expect("trace is non-empty").clone();
    SolveResult {
        rates: radio::user_rates(&alloc, scenario),
        radio: alloc,
        schedule,
        elastic: last.elastic,
        radio_elastic,
        nfv_elastic,
        cost_breakdown: last.breakdown,
        objective_trace: trace.iter().map(|r| r.objective).collect(),
        iterations: trace.len(),
        trace,
        converged,
        accepted_users: scenario.users.iter().map(|u| u.id).collect(),
        rejected_users: Vec::new(),
    }
}

/// Admission score of the user at index `u`: weighted absolute gaps between
/// the rate floor and the achieved rate, and between the user's storage and
/// CPU load summed over servers and the servers' capacities.
pub fn admission_score(
    u: usize,
    rate_achieved: f64,
    schedule: &ScheduleAssignment,
    scenario: &NetworkScenario,
    weights: &CostWeights,
) -> f64 {
    let residual = nfv::residual_violation(schedule, scenario, &scenario.packet_sizes());
    score_from_parts(scenario.rate_floor(u), rate_achieved, residual[u], weights)
}

fn score_from_parts(floor: f64, rate: f64, residual: (f64, f64, f64), weights: &CostWeights) -> f64 {
    weights.kappa1 * (floor - rate).abs() + weights.kappa2 * residual.1 + weights.kappa3 * residual.2
}

/// Admission scores of every user of a solve, by user index.
pub fn admission_scores(
    result: &SolveResult,
    scenario: &NetworkScenario,
    weights: &CostWeights,
    rule: AdmissionRule,
) -> Vec<f64> {
    let y = scenario.packet_sizes();
    match rule {
        AdmissionRule::Absolute => {
            let residual = nfv::residual_violation(&result.schedule, scenario, &y);
            (0..scenario.num_users())
                .map(|u| score_from_parts(scenario.rate_floor(u), result.rates[u], residual[u], weights))
                .collect()
        }
        AdmissionRule::Excess => {
            let report = nfv::check_schedule(&result.schedule, scenario, &y);
            let over = |load: &[f64], cap: &dyn Fn(usize) -> f64| -> Vec<f64> {
                load.iter().enumerate().map(|(n, l)| (l - cap(n)).max(0.0)).collect()
            };
            let cpu = over(&report.cpu_load, &|n| scenario.servers[n].cpu_capacity);
            let storage = over(&report.storage_load, &|n| scenario.servers[n].storage_capacity);
            (0..scenario.num_users())
                .map(|u| {
                    let mut hosts: Vec<usize> = result.schedule.placement[u].iter().flatten().copied().collect();
                    hosts.sort_unstable();
                    hosts.dedup();
                    let s: f64 = hosts.iter().map(|&n| storage[n]).sum();
                    let c: f64 = hosts.iter().map(|&n| cpu[n]).sum();
                    let gap = (scenario.rate_floor(u) - result.rates[u]).max(0.0);
                    weights.kappa1 * gap + weights.kappa2 * s + weights.kappa3 * c
                })
                .collect()
        }
    }
}

/// Elastic solve with admission control: while the elastic variable is
/// positive, reject the user with the largest admission score (higher id on
/// ties) and solve again without it.
pub fn e_ac_asm(scenario: &NetworkScenario, weights: &CostWeights, options: &SolveOptions) -> SolveResult {
    let mut current = scenario.clone();
    let mut rejected: Vec<(u32, f64)> = Vec::new();
    let mut trace = Vec::new();
    let mut round = 0;
    loop {
        let mut result = asm_round(&current, weights, options, round);
        trace.extend(result.trace.iter().cloned());
        if result.elastic <= ELASTIC_ZERO || current.users.is_empty() {
            result.trace = trace;
            result.rejected_users = rejected;
            return result;
        }
        let scores = admission_scores(&result, &current, weights, options.admission);
        // scores this close are ties, so rescaling the weights cannot flip them
        let tie = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
        let mut pick = 0;
        for u in 1..scores.len() {
            let better = if tie(scores[u], scores[pick]) {
                current.users[u].id > current.users[pick].id
            } else {
                scores[u] > scores[pick]
            };
            if better {
                pick = u;
            }
        }
        let id = current.users[pick].id;
        rejected.push((id, scores[pick]));
        current = current.without_user(id);
        round += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, Bounds, ScenarioConfig};

    #[test]
    fn cost_examples() {
        let w = CostWeights::default();
        let empty = RadioAllocation::empty(2, 4);
        assert_eq!(cost(&empty, &[false; 3], 15.0, &w).0, 0.0);

        let mut alloc = RadioAllocation::empty(1, 10);
        for k in 0..10 {
            alloc.assignment[0][k] = true;
            alloc.power[0][k] = 4.0;
        }
        let mut active = vec![false; 12];
        active[..9].iter_mut().for_each(|a| *a = true);
        let (total, b) = cost(&alloc, &active, 15.0, &w);
        assert!((total - 280.0).abs() < 1e-12);
        assert_eq!((b.power, b.spectrum, b.servers), (40.0, 150.0, 90.0));

        let scaled = CostWeights { mu1: 3.0, mu2: 3.0, mu3: 30.0, ..w };
        assert!((cost(&alloc, &active, 15.0, &scaled).0 - 840.0).abs() < 1e-9);
    }

    #[test]
    fn weights_validation() {
        assert!(CostWeights::default().validate().is_ok());
        assert!(CostWeights { mu2: -1.0, ..CostWeights::default() }.validate().is_err());
        assert!(CostWeights { w: 999.0, ..CostWeights::default() }.validate().is_err());
    }

    fn easy_config() -> ScenarioConfig {
        ScenarioConfig {
            users: Bounds::new(3, 3),
            servers: Bounds::new(4, 4),
            services: Bounds::new(2, 2),
            nfs_per_service: Bounds::new(2, 2),
            num_functions: 4,
            deadline: Bounds::new(50.0, 50.0),
            min_rate: Bounds::new(0.0, 0.0),
            num_subcarriers: 8,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn zero_floors_converge_at_second_iteration() {
        let s = generate_scenario(&easy_config(), 4).unwrap();
        let r = asm_solve(&s, &CostWeights::default(), &SolveOptions::default());
        assert_eq!(r.elastic, 0.0);
        assert_eq!(r.iterations, 2);
        assert!(r.converged);
        assert_eq!(r.schedule.active_count(), 1);
        assert_eq!(r.radio.assigned_count(), 0);
    }

    #[test]
    fn ample_scenario_rejects_nobody() {
        let s = generate_scenario(&easy_config(), 8).unwrap();
        let r = e_ac_asm(&s, &CostWeights::default(), &SolveOptions::default());
        assert!(r.rejected_users.is_empty());
        assert_eq!(r.accepted_users, vec![1, 2, 3]);
    }

    #[test]
    fn admission_score_rate_term() {
        let s = generate_scenario(&easy_config(), 1).unwrap();
        let w = CostWeights { kappa1: 50.0, kappa2: 0.0, kappa3: 0.0, ..CostWeights::default() };
        let sched = ScheduleAssignment::empty(&s);
        let mut s10 = s.clone();
        for c in &mut s10.services {
            c.min_rate = 10.0;
        }
        assert_eq!(admission_score(0, 5.0, &sched, &s10, &w), 250.0);
        assert_eq!(admission_score(0, 10.0, &sched, &s10, &w), 0.0);
    }
}
