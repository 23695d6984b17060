//! Exhaustive reference solvers for tiny instances.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::math;
use crate::nfv::{self, ScheduleAssignment, TIME_TOL};
use crate::orchestrator::CostWeights;
use crate::radio::{RadioAllocation, RATE_TOL};
use crate::scenario::NetworkScenario;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SearchLimits {
    /// Search nodes before giving up with the best schedule found so far.
    pub max_nodes: u64,
}

impl Default for SearchLimits {
    fn default() -> Self {
        Self { max_nodes: 20_000_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct OracleResult {
    /// Active-server count for [`exhaustive_nfv`], network cost for
    /// [`exhaustive_joint`]; infinite when nothing feasible was found.
    pub best_objective: f64,
    pub best_schedule: Option<ScheduleAssignment>,
    pub best_radio: Option<RadioAllocation>,
    /// Latest completion time of `best_schedule`.
    pub makespan: f64,
    pub nodes_explored: u64,
    pub proven_optimal: bool,
    pub time_limited: bool,
}

struct NfvSearch<'a> {
    scenario: &'a NetworkScenario,
    tau: Vec<Vec<Vec<f64>>>,
    /// `tail[u][m]`: sum over positions `m..` of the fastest processing time.
    tail: Vec<Vec<f64>>,
    cpu_need: Vec<Vec<f64>>,
    storage_need: Vec<Vec<f64>>,
    deadline: Vec<f64>,
    limit: u64,

    next: Vec<usize>,
    ready: Vec<f64>,
    release: Vec<f64>,
    cpu: Vec<f64>,
    storage: Vec<f64>,
    hosted: Vec<usize>,
    used: usize,
    last_start: f64,
    makespan: f64,
    sched: ScheduleAssignment,

    nodes: u64,
    aborted: bool,
    best: Option<(usize, f64, ScheduleAssignment)>,
}

impl NfvSearch<'_> {
    /// Servers that must still be opened to fit the remaining CPU and storage
    /// demand into the spare capacity.
    fn extra_servers_needed(&self) -> usize {
        let mut cpu_left = 0.0;
        let mut storage_left = 0.0;
        for u in 0..self.next.len() {
            for m in self.next[u]..self.cpu_need[u].len() {
                cpu_left += self.cpu_need[u][m];
                storage_left += self.storage_need[u][m];
            }
        }
        let servers = &self.scenario.servers;
        for n in 0..servers.len() {
            if self.hosted[n] > 0 {
                cpu_left -= servers[n].cpu_capacity - self.cpu[n];
                storage_left -= servers[n].storage_capacity - self.storage[n];
            }
        }
        let cover = |mut left: f64, cap: &dyn Fn(usize) -> f64| -> usize {
            if left <= 1e-9 {
                return 0;
            }
            let mut spare: Vec<f64> = (0..servers.len()).filter(|&n| self.hosted[n] == 0).map(cap).collect();
            spare.sort_by(|a, b| b.total_cmp(a));
            let mut k = 0;
            for c in spare {
                if left <= 1e-9 {
                    break;
                }
                left -= c;
                k += 1;
            }
            if left > 1e-9 {
                usize::MAX / 2
            } else {
                k
            }
        };
        cover(cpu_left, &|n| servers[n].cpu_capacity).max(cover(storage_left, &|n| servers[n].storage_capacity))
    }

    fn makespan_bound(&self) -> f64 {
        (0..self.next.len())
            .map(|u| self.ready[u] + self.tail[u][self.next[u]])
            .fold(self.makespan, f64::max)
    }

    fn search(&mut self) {
        self.nodes += 1;
        if self.nodes > self.limit {
            self.aborted = true;
            return;
        }
        let lb = self.used + self.extra_servers_needed();
        let ms_lb = self.makespan_bound();
        if let Some((bu, bm, _)) = &self.best {
            if lb > *bu || (lb == *bu && ms_lb >= *bm) {
                return;
            }
        }
        let done_all = (0..self.next.len()).all(|u| self.next[u] == self.tau[u].len());
        if done_all {
            let mut sched = self.sched.clone();
            for (n, h) in self.hosted.iter().enumerate() {
                sched.active[n] = *h > 0;
            }
            sched.derive_ordering();
            self.best = Some((self.used, self.makespan, sched));
            return;
        }
        let servers = self.scenario.servers.len();
        for u in 0..self.next.len() {
            let m = self.next[u];
            if m == self.tau[u].len() {
                continue;
            }
            for n in 0..servers {
                if self.hosted[n] == 0 && self.is_twin_of_earlier_idle(n) {
                    continue;
                }
                let start = self.ready[u].max(self.release[n]);
                if start < self.last_start - 1e-12 {
                    continue;
                }
                let end = start + self.tau[u][m][n];
                if end + self.tail[u][m + 1] > self.deadline[u] + TIME_TOL {
                    continue;
                }
                let s = &self.scenario.servers[n];
                if self.cpu[n] + self.cpu_need[u][m] > s.cpu_capacity * (1.0 + 1e-12)
                    || self.storage[n] + self.storage_need[u][m] > s.storage_capacity * (1.0 + 1e-12)
                {
                    continue;
                }
                let saved = (self.ready[u], self.release[n], self.last_start, self.makespan);
                self.next[u] += 1;
                self.ready[u] = end;
                self.release[n] = end;
                self.last_start = start;
                self.makespan = self.makespan.max(end);
                self.cpu[n] += self.cpu_need[u][m];
                self.storage[n] += self.storage_need[u][m];
                if self.hosted[n] == 0 {
                    self.used += 1;
                }
                self.hosted[n] += 1;
                self.sched.placement[u][m] = Some(n);
                self.sched.start_time[u][m] = start;

                self.search();

                self.sched.placement[u][m] = None;
                self.sched.start_time[u][m] = 0.0;
                self.hosted[n] -= 1;
                if self.hosted[n] == 0 {
                    self.used -= 1;
                }
                self.cpu[n] -= self.cpu_need[u][m];
                self.storage[n] -= self.storage_need[u][m];
                (self.ready[u], self.release[n], self.last_start, self.makespan) = saved;
                self.next[u] -= 1;
                if self.aborted {
                    return;
                }
            }
        }
    }

    /// Idle servers with identical capacities are interchangeable; only the
    /// first of each group is branched on.
    fn is_twin_of_earlier_idle(&self, n: usize) -> bool {
        let s = &self.scenario.servers[n];
        (0..n).any(|j| {
            let o = &self.scenario.servers[j];
            self.hosted[j] == 0 && o.cpu_capacity == s.cpu_capacity && o.storage_capacity == s.storage_capacity
        })
    }
}

/// Minimum number of active servers over every placement and every per-server
/// execution order that meets chain order, CPU, storage and deadline limits;
/// ties go to the smaller makespan.
///
/// Each function is started as early as its chain predecessor and its server
/// allow, so searching insertion sequences with non-decreasing start times
/// covers all schedules up to left-shifting.
pub fn exhaustive_nfv(scenario: &NetworkScenario, packet_sizes: &[f64], limits: &SearchLimits) -> OracleResult {
    let tau = nfv::latency_table(scenario, packet_sizes);
    let min_tau: Vec<Vec<f64>> = tau
        .iter()
        .map(|row| row.iter().map(|t| t.iter().cloned().fold(f64::INFINITY, f64::min)).collect())
        .collect();
    let tail: Vec<Vec<f64>> = min_tau
        .iter()
        .map(|row: &Vec<f64>| {
            let mut t = vec![0.0; row.len() + 1];
            for m in (0..row.len()).rev() {
                t[m] = t[m + 1] + row[m];
            }
            t
        })
        .collect();
    let chains: Vec<_> = (0..scenario.num_users()).map(|u| scenario.chain_of(u)).collect();
    let cpu_need = chains
        .iter()
        .enumerate()
        .map(|(u, c)| c.iter().map(|f| packet_sizes[u] * f.cycles_per_bit).collect())
        .collect();
    let storage_need = chains
        .iter()
        .enumerate()
        .map(|(u, c)| c.iter().map(|f| f.storage_demand + packet_sizes[u]).collect())
        .collect();
    let n = scenario.num_servers();
    let users = scenario.num_users();
    let mut s = NfvSearch {
        scenario,
        tau,
        tail,
        cpu_need,
        storage_need,
        deadline: (0..users).map(|u| scenario.deadline(u)).collect(),
        limit: limits.max_nodes,
        next: vec![0; users],
        ready: vec![0.0; users],
        release: vec![0.0; n],
        cpu: vec![0.0; n],
        storage: vec![0.0; n],
        hosted: vec![0; n],
        used: 0,
        last_start: 0.0,
        makespan: 0.0,
        sched: ScheduleAssignment::empty(scenario),
        nodes: 0,
        aborted: false,
        best: None,
    };
    s.search();
    let time_limited = s.aborted;
    match s.best {
        Some((used, makespan, sched)) => OracleResult {
            best_objective: used as f64,
            best_schedule: Some(sched),
            best_radio: None,
            makespan,
            nodes_explored: s.nodes,
            proven_optimal: !time_limited,
            time_limited,
        },
        None => OracleResult {
            best_objective: f64::INFINITY,
            best_schedule: None,
            best_radio: None,
            makespan: f64::INFINITY,
            nodes_explored: s.nodes,
            proven_optimal: !time_limited,
            time_limited,
        },
    }
}

/// Grid minimisation of the power reaching `target` on subcarriers with
/// inverse qualities `c` (noise over gain): the first `len - 1` powers are
/// scanned on a grid of spacing `step` and the last one is the exact power
/// closing the remaining rate gap. The grid is then repeatedly narrowed around
/// the incumbent at a tenth of the spacing.
fn grid_min_power(c: &[f64], target: f64, budget: f64, step: f64) -> f64 {
    if target <= RATE_TOL {
        return 0.0;
    }
    let Some((&c_last, free)) = c.split_last() else {
        return f64::INFINITY;
    };
    let eval = |p: &[f64]| -> f64 {
        let mut rate = 0.0;
        let mut total = 0.0;
        for (&pi, &ci) in p.iter().zip(free) {
            rate += math::log2(1.0 + pi / ci);
            total += pi;
        }
        let rem = target - rate;
        if rem > 0.0 {
            total += c_last * (math::exp2(rem) - 1.0);
        }
        total
    };
    let d = free.len();
    if d == 0 {
        return eval(&[]);
    }
    let mut center = vec![0.0; d];
    let mut lo = vec![0.0; d];
    let mut steps = ((budget / step) as usize).max(1);
    let mut h = step;
    let mut best = f64::INFINITY;
    let mut point = vec![0.0; d];
    loop {
        // odometer over steps+1 points per coordinate
        let mut idx = vec![0usize; d];
        loop {
            let mut sum = 0.0;
            for i in 0..d {
                point[i] = lo[i] + idx[i] as f64 * h;
                sum += point[i];
            }
            if sum <= budget {
                let v = eval(&point);
                if v < best {
                    best = v;
                    center.copy_from_slice(&point);
                }
            }
            let mut i = 0;
            while i < d {
                idx[i] += 1;
                if idx[i] <= steps {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == d {
                break;
            }
        }
        if h < 1e-10 * budget.max(1.0) {
            return best;
        }
        for i in 0..d {
            lo[i] = (center[i] - h).max(0.0);
        }
        h /= 10.0;
        steps = 20;
    }
}

/// Exact joint minimum of the network cost on a tiny instance.
///
/// Radio and NFV decouple once packet sizes are fixed: the radio part
/// enumerates every subcarrier assignment with per-user grid-searched powers
/// (spacing `power_grid_step`, refined until converged) under the budget and
/// rate floors, and the server part is [`exhaustive_nfv`].
pub fn exhaustive_joint(
    scenario: &NetworkScenario,
    weights: &CostWeights,
    power_grid_step: f64,
    limits: &SearchLimits,
) -> OracleResult {
    let users = scenario.num_users();
    let k = scenario.num_subcarriers;
    let budget = scenario.max_power_w;
    let b = scenario.subcarrier_bandwidth_khz;
    let floors = scenario.rate_floors();

    // min power of user u on subcarrier subset mask
    let subsets = 1usize << k;
    let mut table = vec![vec![f64::INFINITY; subsets]; users];
    for u in 0..users {
        for mask in 0..subsets {
            let c: Vec<f64> = (0..k)
                .filter(|&j| mask >> j & 1 == 1)
                .map(|j| scenario.noise_power[u][j] / scenario.channel_gain[u][j])
                .collect();
            table[u][mask] = grid_min_power(&c, floors[u], budget, power_grid_step);
        }
    }

    let mut nodes = 0u64;
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut owner = vec![0usize; k];
    loop {
        nodes += 1;
        let mut masks = vec![0usize; users];
        let mut used = 0;
        for (j, &o) in owner.iter().enumerate() {
            if o > 0 {
                masks[o - 1] |= 1 << j;
                used += 1;
            }
        }
        let power: f64 = (0..users).map(|u| table[u][masks[u]]).sum();
        if power <= budget * (1.0 + 1e-12) {
            let c = weights.mu1 * power + weights.mu2 * b * used as f64;
            if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
                best = Some((c, owner.clone()));
            }
        }
        let mut i = 0;
        while i < k {
            owner[i] += 1;
            if owner[i] <= users {
                break;
            }
            owner[i] = 0;
            i += 1;
        }
        if i == k {
            break;
        }
    }

    let nfv = exhaustive_nfv(scenario, &scenario.packet_sizes(), limits);
    let Some((radio_cost, owner)) = best else {
        return OracleResult {
            best_objective: f64::INFINITY,
            best_radio: None,
            nodes_explored: nodes + nfv.nodes_explored,
            ..nfv
        };
    };
    let mut radio = RadioAllocation::empty(users, k);
    for (j, &o) in owner.iter().enumerate() {
        if o > 0 {
            radio.assignment[o - 1][j] = true;
        }
    }
    // report continuous powers for the chosen assignment
    for u in 0..users {
        let cols: Vec<usize> = (0..k).filter(|&j| radio.assignment[u][j]).collect();
        let g: Vec<f64> = cols.iter().map(|&j| scenario.channel_gain[u][j]).collect();
        let s: Vec<f64> = cols.iter().map(|&j| scenario.noise_power[u][j]).collect();
        if let Ok(p) = crate::radio::min_power_for_rate(&g, &s, floors[u]) {
            for (i, &j) in cols.iter().enumerate() {
                radio.power[u][j] = p[i];
            }
        }
    }
    OracleResult {
        best_objective: radio_cost + weights.mu3 * nfv.best_objective,
        best_radio: Some(radio),
        nodes_explored: nodes + nfv.nodes_explored,
        ..nfv
    }
}

/// `(heuristic - oracle) / oracle`.
pub fn optimality_gap(heuristic_objective: f64, oracle_objective: f64) -> Result<f64, Error> {
    if !(oracle_objective > 0.0) || !oracle_objective.is_finite() {
        return Err(Error::UndefinedGap);
    }
    Ok((heuristic_objective - oracle_objective) / oracle_objective)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_scenario, Bounds, NetworkFunction, ScenarioConfig, Server, ServiceChain, UserRequest};

    #[test]
    fn gap_examples() {
        assert!((optimality_gap(232.0, 217.0).unwrap() - 0.0691).abs() < 1e-4);
        assert_eq!(optimality_gap(5.0, 5.0).unwrap(), 0.0);
        assert!((optimality_gap(9.0, 7.0).unwrap() - 0.2857).abs() < 1e-4);
        assert_eq!(optimality_gap(1.0, 0.0), Err(Error::UndefinedGap));
    }

    fn single(floor: f64, k: usize, servers: &[f64], deadline: f64) -> NetworkScenario {
        NetworkScenario {
            users: vec![UserRequest { id: 1, service: 1, distance_m: 100.0, packet_size_bits: 10.0 }],
            servers: servers
                .iter()
                .enumerate()
                .map(|(i, &c)| Server { id: i as u32 + 1, cpu_capacity: c, storage_capacity: 1000.0 })
                .collect(),
            services: vec![ServiceChain {
                id: 1,
                source_node: 0,
                destination_node: 1,
                functions: vec![1],
                deadline_s: deadline,
                min_rate: floor,
            }],
            nf_catalog: vec![NetworkFunction { id: 1, cycles_per_bit: 20.0, storage_demand: 5.0 }],
            channel_gain: vec![vec![2e-7; k]],
            noise_power: vec![vec![1e-7; k]],
            num_subcarriers: k,
            subcarrier_bandwidth_khz: 15.0,
            max_power_w: 40.0,
            rng_seed: 0,
        }
    }

    #[test]
    fn one_function_picks_one_server() {
        let s = single(0.0, 1, &[1000.0, 3000.0], 10.0);
        let r = exhaustive_nfv(&s, &s.packet_sizes(), &SearchLimits::default());
        assert_eq!(r.best_objective, 1.0);
        assert!(r.proven_optimal);
        // makespan tie-break prefers the faster server
        assert_eq!(r.best_schedule.unwrap().placement[0][0], Some(1));
    }

    #[test]
    fn joint_closed_forms() {
        let w = CostWeights::default();
        let s = single(0.0, 2, &[2000.0], 10.0);
        let r = exhaustive_joint(&s, &w, 0.4, &SearchLimits::default());
        assert_eq!(r.best_objective, w.mu3);

        let s = single(3.0, 1, &[2000.0], 10.0);
        let r = exhaustive_joint(&s, &w, 0.4, &SearchLimits::default());
        let p = 1e-7 * (8.0 - 1.0) / 2e-7;
        let expected = w.mu1 * p + w.mu2 * 15.0 + w.mu3;
        assert!((r.best_objective - expected).abs() < 1e-9, "{} vs {expected}", r.best_objective);
    }

    #[test]
    fn grid_power_matches_water_filling() {
        let c = [0.5, 1.0, 2.0];
        let grid = grid_min_power(&c, 4.0, 40.0, 0.4);
        let g: Vec<f64> = c.iter().map(|x| 1e-7 / x).collect();
        let wf: f64 = crate::radio::min_power_for_rate(&g, &[1e-7; 3], 4.0).unwrap().iter().sum();
        assert!((grid - wf).abs() < 1e-7, "{grid} vs {wf}");
        assert!(grid >= wf - 1e-12);
    }

    #[test]
    fn infeasible_deadline_reports_infinity() {
        let s = single(0.0, 1, &[1000.0], 0.01);
        let r = exhaustive_nfv(&s, &s.packet_sizes(), &SearchLimits::default());
        assert!(r.best_objective.is_infinite());
        assert!(r.proven_optimal);
    }

    #[test]
    fn node_limit_marks_time_limited() {
        let cfg = ScenarioConfig {
            users: Bounds::new(3, 3),
            servers: Bounds::new(4, 4),
            nfs_per_service: Bounds::new(4, 4),
            deadline: Bounds::new(50.0, 50.0),
            ..ScenarioConfig::default()
        };
        let s = generate_scenario(&cfg, 1).unwrap();
        let r = exhaustive_nfv(&s, &s.packet_sizes(), &SearchLimits { max_nodes: 10 });
        assert!(r.time_limited && !r.proven_optimal);
    }
}
