//! The five-server, two-user placement example.

use ranfv_core::nfv::{check_schedule, greedy_baseline_nfv_ra, heuristic_nfv_ra, total_chain_latency};
use ranfv_core::scenario::{NetworkFunction, Server, ServiceChain, UserRequest};
use ranfv_core::{metrics, NetworkScenario, ScheduleAssignment};

/// Servers of 1000, 2000, 1500, 3000 and 1800 cycles/s; both users run the
/// chain (alpha 20, alpha 40) on 10-bit packets, with deadlines 0.3 s and 0.7 s.
pub fn worked_example() -> NetworkScenario {
    let caps = [1000.0, 2000.0, 1500.0, 3000.0, 1800.0];
    let chain = |id, deadline_s| ServiceChain {
        id,
        source_node: 0,
        destination_node: 1,
        functions: vec![1, 2],
        deadline_s,
        min_rate: 10.0,
    };
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
        services: vec![chain(1, 0.3), chain(2, 0.7)],
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

#[derive(Debug, Clone, PartialEq)]
pub struct PlacementSummary {
    pub schedule: ScheduleAssignment,
    /// Capacities of the active servers, in server order.
    pub active_capacities: Vec<f64>,
    pub completions: Vec<f64>,
    pub utilization: f64,
    pub feasible: bool,
}

fn summarize(s: &NetworkScenario, schedule: ScheduleAssignment) -> PlacementSummary {
    let y = s.packet_sizes();
    let completions = (0..s.num_users())
        .map(|u| total_chain_latency(&schedule, s, &y, u).unwrap_or(f64::INFINITY))
        .collect();
    PlacementSummary {
        active_capacities: (0..s.num_servers())
            .filter(|&n| schedule.active[n])
            .map(|n| s.servers[n].cpu_capacity)
            .collect(),
        completions,
        utilization: metrics::utilization_ratio(&schedule, s, &y),
        feasible: check_schedule(&schedule, s, &y).feasible,
        schedule,
    }
}

/// Heuristic and baseline placements of the worked example.
pub fn run() -> (PlacementSummary, PlacementSummary) {
    let s = worked_example();
    let y = s.packet_sizes();
    (summarize(&s, heuristic_nfv_ra(&s, &y)), summarize(&s, greedy_baseline_nfv_ra(&s, &y)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn worked_example_numbers() {
        let (h, g) = run();
        assert_eq!(h.active_capacities, vec![3000.0]);
        assert_eq!(g.active_capacities, vec![2000.0, 3000.0]);
        assert!(h.feasible && g.feasible);
        assert!((h.utilization - 1200.0 / 9300.0).abs() < 1e-15);
    }
}
