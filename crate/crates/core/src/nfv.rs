//! VNF placement and scheduling: latency model, the proposed heuristic, the
//! queue-time greedy baseline and a schedule validator.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scenario::{NetworkFunction, NetworkScenario, Server};

/// Slack used when comparing times.
pub const TIME_TOL: f64 = 1e-9;

/// A function instance: position `position` in the chain of user `user`
/// (both are indices, not ids).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TaskRef {
    pub user: usize,
    pub position: usize,
}

/// Placement and timing of every function instance.
///
/// `placement[u][m]` is a server index, `start_time[u][m]` is in seconds.
/// `ordering` holds `(later, earlier)` pairs of consecutive tasks on the same
/// server and is rebuilt from the start times.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScheduleAssignment {
    pub placement: Vec<Vec<Option<usize>>>,
    pub start_time: Vec<Vec<f64>>,
    pub ordering: Vec<(TaskRef, TaskRef)>,
    pub active: Vec<bool>,
}

impl ScheduleAssignment {
    /// Nothing placed, all servers idle.
    pub fn empty(scenario: &NetworkScenario) -> Self {
        let lens: Vec<usize> = (0..scenario.num_users())
            .map(|u| scenario.service_of(u).functions.len())
            .collect();
        Self {
            placement: lens.iter().map(|&l| vec![None; l]).collect(),
            start_time: lens.iter().map(|&l| vec![0.0; l]).collect(),
            ordering: Vec::new(),
            active: vec![false; scenario.num_servers()],
        }
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|a| **a).count()
    }

    /// Tasks placed on server `n`, sorted by start time.
    pub fn tasks_on(&self, n: usize) -> Vec<TaskRef> {
        let mut tasks: Vec<TaskRef> = Vec::new();
        for (u, row) in self.placement.iter().enumerate() {
            for (m, p) in row.iter().enumerate() {
                if *p == Some(n) {
                    tasks.push(TaskRef { user: u, position: m });
                }
            }
        }
        tasks.sort_by(|a, b| {
            self.start_time[a.user][a.position]
                .total_cmp(&self.start_time[b.user][b.position])
                .then(a.cmp(b))
        });
        tasks
    }

    /// Rebuilds `ordering` from placements and start times.
    pub fn derive_ordering(&mut self) {
        let mut pairs = Vec::new();
        for n in 0..self.active.len() {
            let tasks = self.tasks_on(n);
            for w in tasks.windows(2) {
                pairs.push((w[1], w[0]));
            }
        }
        self.ordering = pairs;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum ConstraintKind {
    /// Per-server CPU load above capacity.
    Cpu,
    /// Per-server storage load above capacity.
    Storage,
    /// Two execution intervals overlap on one server.
    Overlap,
    /// A function starts before its chain predecessor completes.
    Precedence,
    /// Placement on an inactive or unknown server.
    Activation,
    /// A function has no server.
    Unplaced,
    NegativeStart,
    /// Chain latency above the deadline.
    Deadline,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Violation {
    pub kind: ConstraintKind,
    pub magnitude: f64,
    pub user: Option<usize>,
    pub server: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ScheduleReport {
    /// Chain latency per user, `None` when a function is unplaced.
    pub latency: Vec<Option<f64>>,
    pub cpu_load: Vec<f64>,
    pub storage_load: Vec<f64>,
    pub violations: Vec<Violation>,
    pub feasible: bool,
}

impl ScheduleReport {
    pub fn count(&self, kind: ConstraintKind) -> usize {
        self.violations.iter().filter(|v| v.kind == kind).count()
    }

    /// Largest excess over the CPU, storage and deadline limits (zero if none).
    pub fn elastic(&self) -> f64 {
        self.violations
            .iter()
            .filter(|v| matches!(v.kind, ConstraintKind::Cpu | ConstraintKind::Storage | ConstraintKind::Deadline))
            .map(|v| v.magnitude)
            .fold(0.0, f64::max)
    }
}

/// `alpha * y / L` seconds.
pub fn processing_latency(nf: &NetworkFunction, server: &Server, packet_size_bits: f64) -> f64 {
    nf.cycles_per_bit * packet_size_bits / server.cpu_capacity
}

/// Per-user, per-position, per-server processing latency.
pub(crate) fn latency_table(scenario: &NetworkScenario, packet_sizes: &[f64]) -> Vec<Vec<Vec<f64>>> {
    (0..scenario.num_users())
        .map(|u| {
            scenario
                .chain_of(u)
                .iter()
                .map(|f| {
                    scenario
                        .servers
                        .iter()
                        .map(|s| processing_latency(f, s, packet_sizes[u]))
                        .collect()
                })
                .collect()
        })
        .collect()
}

/// User indices by ascending deadline, ties by ascending id.
pub(crate) fn deadline_order(scenario: &NetworkScenario) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scenario.num_users()).collect();
    order.sort_by(|&a, &b| {
        scenario
            .deadline(a)
            .total_cmp(&scenario.deadline(b))
            .then(scenario.users[a].id.cmp(&scenario.users[b].id))
    });
    order
}

/// Server indices by ascending `sum over the catalog of alpha / L_n`, ties by
/// lower id.
pub fn server_rank(scenario: &NetworkScenario) -> Vec<usize> {
    let alpha: f64 = scenario.nf_catalog.iter().map(|f| f.cycles_per_bit).sum();
    let mut order: Vec<usize> = (0..scenario.num_servers()).collect();
    let key = |n: usize| alpha / scenario.servers[n].cpu_capacity;
    order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then(scenario.servers[a].id.cmp(&scenario.servers[b].id)));
    order
}

/// Schedules every function on the servers in `pool`, each on the server
/// giving the earliest completion (first in `pool` order on ties).
fn earliest_completion_schedule(
    scenario: &NetworkScenario,
    tau: &[Vec<Vec<f64>>],
    users: &[usize],
    pool: &[usize],
) -> ScheduleAssignment {
    let mut sched = ScheduleAssignment::empty(scenario);
    let mut release = vec![0.0f64; scenario.num_servers()];
    for &u in users {
        let mut ready = 0.0f64;
        for m in 0..tau[u].len() {
            let mut best: Option<(usize, f64, f64)> = None;
            for &n in pool {
                let start = ready.max(release[n]);
                let done = start + tau[u][m][n];
                if best.is_none_or(|(_, _, b)| done < b) {
                    best = Some((n, start, done));
                }
            }
            let (n, start, done) = best.expect("pool is non-empty");
            sched.placement[u][m] = Some(n);
            sched.start_time[u][m] = start;
            release[n] = done;
            ready = done;
        }
    }
    for &n in pool {
        sched.active[n] = true;
    }
    sched.derive_ordering();
    sched
}

/// Proposed heuristic: activate servers one at a time in [`server_rank`]
/// order, rescheduling all users (ascending deadline) each time, until the CPU,
/// storage and deadline limits hold. If they never hold, the schedule with all
/// servers active is returned and the caller sees its violations through
/// [`check_schedule`].
pub fn heuristic_nfv_ra(scenario: &NetworkScenario, packet_sizes: &[f64]) -> ScheduleAssignment {
    let rank = server_rank(scenario);
    let users = deadline_order(scenario);
    let tau = latency_table(scenario, packet_sizes);
    let mut last = ScheduleAssignment::empty(scenario);
    if tau.iter().all(Vec::is_empty) {
        return last;
    }
    for active in 1..=rank.len() {
        let sched = earliest_completion_schedule(scenario, &tau, &users, &rank[..active]);
        let report = check_schedule(&sched, scenario, packet_sizes);
        if report.feasible {
            return sched;
        }
        last = sched;
    }
    last
}

/// Baseline greedy: for each function (users by ascending deadline) keep the
/// servers with CPU and storage headroom, then pick the shortest queueing
/// time, ties to the faster server, then lower id. Falls back to every server
/// when none has headroom. Active servers are those hosting a function.
pub fn greedy_baseline_nfv_ra(scenario: &NetworkScenario, packet_sizes: &[f64]) -> ScheduleAssignment {
    let n_servers = scenario.num_servers();
    let tau = latency_table(scenario, packet_sizes);
    let mut sched = ScheduleAssignment::empty(scenario);
    let mut release = vec![0.0f64; n_servers];
    let mut cpu = vec![0.0f64; n_servers];
    let mut storage = vec![0.0f64; n_servers];
    for u in deadline_order(scenario) {
        let chain = scenario.chain_of(u);
        let y = packet_sizes[u];
        let mut ready = 0.0f64;
        for (m, f) in chain.iter().enumerate() {
            let need_cpu = y * f.cycles_per_bit;
            let need_storage = f.storage_demand + y;
            let fits = |n: usize| {
                let s = &scenario.servers[n];
                cpu[n] + need_cpu <= s.cpu_capacity && storage[n] + need_storage <= s.storage_capacity
            };
            let mut candidates: Vec<usize> = (0..n_servers).filter(|&n| fits(n)).collect();
            if candidates.is_empty() {
                candidates = (0..n_servers).collect();
            }
            let queue = |n: usize| (release[n] - ready).max(0.0);
            let n = candidates
                .into_iter()
                .min_by(|&a, &b| {
                    queue(a)
                        .total_cmp(&queue(b))
                        .then(tau[u][m][a].total_cmp(&tau[u][m][b]))
                        .then(scenario.servers[a].id.cmp(&scenario.servers[b].id))
                })
                .expect("at least one server");
            let start = ready.max(release[n]);
            let done = start + tau[u][m][n];
            sched.placement[u][m] = Some(n);
            sched.start_time[u][m] = start;
            sched.active[n] = true;
            release[n] = done;
            cpu[n] += need_cpu;
            storage[n] += need_storage;
            ready = done;
        }
    }
    sched.derive_ordering();
    sched
}

/// Completion time of the user's last function, measured from time zero.
pub fn total_chain_latency(
    schedule: &ScheduleAssignment,
    scenario: &NetworkScenario,
    packet_sizes: &[f64],
    u: usize,
) -> Result<f64, Error> {
    let chain = scenario.chain_of(u);
    let mut latest = 0.0f64;
    for (m, f) in chain.iter().enumerate() {
        let n = schedule.placement[u][m].ok_or(Error::UndefinedLatency { user: u, position: m })?;
        let server = scenario
            .servers
            .get(n)
            .ok_or(Error::UndefinedLatency { user: u, position: m })?;
        latest = latest.max(schedule.start_time[u][m] + processing_latency(f, server, packet_sizes[u]));
    }
    Ok(latest)
}

/// Validates a schedule against capacity, sequencing, activation and deadline
/// constraints, reporting each violation with its magnitude.
pub fn check_schedule(schedule: &ScheduleAssignment, scenario: &NetworkScenario, packet_sizes: &[f64]) -> ScheduleReport {
    let n_servers = scenario.num_servers();
    let mut violations = Vec::new();
    let mut cpu_load = vec![0.0; n_servers];
    let mut storage_load = vec![0.0; n_servers];
    let mut push = |kind, magnitude, user, server| {
        violations.push(Violation { kind, magnitude, user, server });
    };

    for u in 0..scenario.num_users() {
        let chain = scenario.chain_of(u);
        let y = packet_sizes[u];
        let mut prev_done: Option<f64> = None;
        for (m, f) in chain.iter().enumerate() {
            let start = schedule.start_time[u][m];
            if start < 0.0 {
                push(ConstraintKind::NegativeStart, -start, Some(u), None);
            }
            let placed = schedule.placement[u][m].filter(|&n| n < n_servers);
            let Some(n) = placed else {
                if schedule.placement[u][m].is_some() {
                    push(ConstraintKind::Activation, 1.0, Some(u), None);
                } else {
                    push(ConstraintKind::Unplaced, 1.0, Some(u), None);
                }
                prev_done = None;
                continue;
            };
            if !schedule.active[n] {
                push(ConstraintKind::Activation, 1.0, Some(u), Some(n));
            }
            cpu_load[n] += y * f.cycles_per_bit;
            storage_load[n] += f.storage_demand + y;
            if let Some(done) = prev_done {
                if start < done - TIME_TOL {
                    push(ConstraintKind::Precedence, done - start, Some(u), Some(n));
                }
            }
            prev_done = Some(start + processing_latency(f, &scenario.servers[n], y));
        }
    }

    for n in 0..n_servers {
        let mut horizon: Option<f64> = None;
        for t in schedule.tasks_on(n) {
            let f = scenario.chain_of(t.user)[t.position];
            let start = schedule.start_time[t.user][t.position];
            let end = start + processing_latency(f, &scenario.servers[n], packet_sizes[t.user]);
            if let Some(h) = horizon {
                // zero-length intervals never overlap
                if start < h - TIME_TOL && end > start {
                    push(ConstraintKind::Overlap, h - start, Some(t.user), Some(n));
                }
            }
            horizon = Some(horizon.map_or(end, |h| h.max(end)));
        }
        let s = &scenario.servers[n];
        if cpu_load[n] > s.cpu_capacity * (1.0 + 1e-12) {
            push(ConstraintKind::Cpu, cpu_load[n] - s.cpu_capacity, None, Some(n));
        }
        if storage_load[n] > s.storage_capacity * (1.0 + 1e-12) {
            push(ConstraintKind::Storage, storage_load[n] - s.storage_capacity, None, Some(n));
        }
    }

    let mut latency = Vec::with_capacity(scenario.num_users());
    for u in 0..scenario.num_users() {
        let d = total_chain_latency(schedule, scenario, packet_sizes, u).ok();
        if let Some(d) = d {
            let max = scenario.deadline(u);
            if d > max + TIME_TOL {
                push(ConstraintKind::Deadline, d - max, Some(u), None);
            }
        }
        latency.push(d);
    }

    let feasible = violations.is_empty();
    ScheduleReport {
        latency,
        cpu_load,
        storage_load,
        violations,
        feasible,
    }
}

/// Per-user `(0, storage term, cpu term)` of the admission score: the absolute
/// value of `sum_n (load of u on n - capacity of n)` for storage and CPU.
/// The first entry is a placeholder for the rate gap.
pub fn residual_violation(
    schedule: &ScheduleAssignment,
    scenario: &NetworkScenario,
    packet_sizes: &[f64],
) -> Vec<(f64, f64, f64)> {
    let total_storage: f64 = scenario.servers.iter().map(|s| s.storage_capacity).sum();
    let total_cpu: f64 = scenario.servers.iter().map(|s| s.cpu_capacity).sum();
    (0..scenario.num_users())
        .map(|u| {
            let y = packet_sizes[u];
            let mut storage = 0.0;
            let mut cpu = 0.0;
            for (m, f) in scenario.chain_of(u).iter().enumerate() {
                if schedule.placement[u][m].is_some_and(|n| n < scenario.num_servers()) {
                    storage += f.storage_demand + y;
                    cpu += y * f.cycles_per_bit;
                }
            }
            (0.0, (storage - total_storage).abs(), (cpu - total_cpu).abs())
        })
        .collect()
}

/// Re-times a schedule with fixed placements and per-server order: each
/// function starts at the later of its predecessor's completion and the
/// previous task's completion on its server.
pub fn retime(schedule: &ScheduleAssignment, scenario: &NetworkScenario, packet_sizes: &[f64]) -> ScheduleAssignment {
    let tau = latency_table(scenario, packet_sizes);
    let mut out = schedule.clone();
    let queues: Vec<Vec<TaskRef>> = (0..scenario.num_servers()).map(|n| schedule.tasks_on(n)).collect();
    let mut next = vec![0usize; queues.len()];
    let mut done: Vec<Vec<Option<f64>>> = schedule.placement.iter().map(|r| vec![None; r.len()]).collect();
    let mut release = vec![0.0f64; queues.len()];
    // list scheduling in the fixed per-server order; terminates because the
    // original schedule's start times give a topological order
    loop {
        let mut progressed = false;
        for n in 0..queues.len() {
            while let Some(&t) = queues[n].get(next[n]) {
                let ready = if t.position == 0 {
                    Some(0.0)
                } else {
                    done[t.user][t.position - 1]
                };
                let Some(ready) = ready else { break };
                let start = ready.max(release[n]);
                out.start_time[t.user][t.position] = start;
                let end = start + tau[t.user][t.position][n];
                done[t.user][t.position] = Some(end);
                release[n] = end;
                next[n] += 1;
                progressed = true;
            }
        }
        if !progressed {
            break;
        }
    }
    out.derive_ordering();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ServiceChain, UserRequest};

    pub(crate) fn demo_scenario() -> NetworkScenario {
        let caps = [1000.0, 2000.0, 1500.0, 3000.0, 1800.0];
        NetworkScenario {
            users: vec![
                UserRequest { id: 1, service: 1, distance_m: 100.0, packet_size_bits: 10.0 },
                UserRequest { id: 2, service: 2, distance_m: 100.0, packet_size_bits: 10.0 },
            ],
            servers: caps
                .iter()
                .enumerate()
                .map(|(i, &c)| Server { id: i as u32 + 1, cpu_capacity: c, storage_capacity: 1000.0 })
                .collect(),
            services: vec![
                ServiceChain { id: 1, source_node: 0, destination_node: 1, functions: vec![1, 2], deadline_s: 0.3, min_rate: 10.0 },
                ServiceChain { id: 2, source_node: 0, destination_node: 1, functions: vec![1, 2], deadline_s: 0.7, min_rate: 10.0 },
            ],
            nf_catalog: vec![
                NetworkFunction { id: 1, cycles_per_bit: 20.0, storage_demand: 10.0 },
                NetworkFunction { id: 2, cycles_per_bit: 40.0, storage_demand: 10.0 },
            ],
            channel_gain: vec![vec![1e-6; 4]; 2],
            noise_power: vec![vec![1e-7; 4]; 2],
            num_subcarriers: 4,
            subcarrier_bandwidth_khz: 15.0,
            max_power_w: 40.0,
            rng_seed: 0,
        }
    }

    #[test]
    fn processing_latency_examples() {
        let s = Server { id: 1, cpu_capacity: 3000.0, storage_capacity: 1.0 };
        let f20 = NetworkFunction { id: 1, cycles_per_bit: 20.0, storage_demand: 0.0 };
        let f40 = NetworkFunction { id: 2, cycles_per_bit: 40.0, storage_demand: 0.0 };
        assert!((processing_latency(&f20, &s, 10.0) - 0.066667).abs() < 1e-6);
        assert!((processing_latency(&f40, &s, 10.0) - 0.133333).abs() < 1e-6);
        assert_eq!(processing_latency(&f20, &s, 0.0), 0.0);
    }

    #[test]
    fn heuristic_uses_one_server_on_demo() {
        let s = demo_scenario();
        let y = s.packet_sizes();
        let sched = heuristic_nfv_ra(&s, &y);
        assert_eq!(sched.active_count(), 1);
        assert!(sched.active[3]);
        let d1 = total_chain_latency(&sched, &s, &y, 0).unwrap();
        let d2 = total_chain_latency(&sched, &s, &y, 1).unwrap();
        assert!((d1 - 0.2).abs() < 1e-12 && (d2 - 0.4).abs() < 1e-12);
        assert!(check_schedule(&sched, &s, &y).feasible);
    }

    #[test]
    fn greedy_spreads_to_second_server_on_demo() {
        let s = demo_scenario();
        let y = s.packet_sizes();
        let sched = greedy_baseline_nfv_ra(&s, &y);
        assert_eq!(sched.active, vec![false, true, false, true, false]);
        let d2 = total_chain_latency(&sched, &s, &y, 1).unwrap();
        assert!((d2 - 0.3).abs() < 1e-12);
    }

    #[test]
    fn chain_latency_telescopes() {
        let mut s = demo_scenario();
        s.users.truncate(1);
        s.channel_gain.truncate(1);
        s.noise_power.truncate(1);
        s.nf_catalog.push(NetworkFunction { id: 3, cycles_per_bit: 60.0, storage_demand: 1.0 });
        s.services[0].functions = vec![1, 2, 3];
        s.servers = vec![Server { id: 1, cpu_capacity: 2000.0, storage_capacity: 1e4 }];
        let y = s.packet_sizes();
        // tau = 0.1, 0.2, 0.3
        let sched = heuristic_nfv_ra(&s, &y);
        assert_eq!(sched.start_time[0], vec![0.0, 0.1, 0.30000000000000004]);
        let d = total_chain_latency(&sched, &s, &y, 0).unwrap();
        assert!((d - 0.6).abs() < 1e-12);
    }

    #[test]
    fn unplaced_function_has_no_latency() {
        let s = demo_scenario();
        let sched = ScheduleAssignment::empty(&s);
        assert_eq!(
            total_chain_latency(&sched, &s, &s.packet_sizes(), 1),
            Err(Error::UndefinedLatency { user: 1, position: 0 })
        );
    }

    #[test]
    fn overlap_and_activation_are_reported() {
        let s = demo_scenario();
        let y = s.packet_sizes();
        let mut sched = heuristic_nfv_ra(&s, &y);
        // user 2's first function now starts while user 1's second runs
        sched.start_time[1][0] = 0.15;
        let r = check_schedule(&sched, &s, &y);
        assert_eq!(r.count(ConstraintKind::Overlap), 1);

        let mut sched = heuristic_nfv_ra(&s, &y);
        sched.placement[0][0] = Some(0);
        let r = check_schedule(&sched, &s, &y);
        assert_eq!(r.count(ConstraintKind::Activation), 1);
    }

    #[test]
    fn residual_terms() {
        let s = demo_scenario();
        let y = s.packet_sizes();
        let empty = ScheduleAssignment::empty(&s);
        let r = residual_violation(&empty, &s, &y);
        assert_eq!(r[0], (0.0, 5000.0, 9300.0));

        let mut one = s.clone();
        one.servers = vec![Server { id: 1, cpu_capacity: 600.0, storage_capacity: 40.0 }];
        one.users.truncate(1);
        let sched = heuristic_nfv_ra(&one, &[10.0]);
        assert_eq!(residual_violation(&sched, &one, &[10.0])[0], (0.0, 0.0, 0.0));
    }

    #[test]
    fn retime_is_identity_on_compact_schedules() {
        let s = demo_scenario();
        let y = s.packet_sizes();
        let sched = heuristic_nfv_ra(&s, &y);
        assert_eq!(retime(&sched, &s, &y), sched);
    }
}
