//! Solver outputs checked against brute-force references and hand-built
//! instances.

use ranfv_core::nfv::{self, check_schedule, greedy_baseline_nfv_ra, heuristic_nfv_ra, residual_violation};
use ranfv_core::oracle::{exhaustive_nfv, SearchLimits};
use ranfv_core::orchestrator::{admission_score, asm_solve, cost, e_ac_asm, AdmissionRule};
use ranfv_core::radio::solve_power_elastic;
use ranfv_core::scenario::{generate_scenario, Bounds, NetworkFunction, Server, ServiceChain, UserRequest};
use ranfv_core::{CostWeights, NetworkScenario, RadioAllocation, ScenarioConfig, SolveOptions};

fn scenario(caps: &[f64], chains: &[(Vec<u32>, f64)], alphas: &[f64], y: f64) -> NetworkScenario {
    let users = chains.len();
    NetworkScenario {
        users: (0..users)
            .map(|u| UserRequest { id: u as u32 + 1, service: u as u32 + 1, distance_m: 100.0, packet_size_bits: y })
            .collect(),
        servers: caps
            .iter()
            .enumerate()
            .map(|(i, &c)| Server { id: i as u32 + 1, cpu_capacity: c, storage_capacity: 1000.0 })
            .collect(),
        services: chains
            .iter()
            .enumerate()
            .map(|(i, (f, d))| ServiceChain {
                id: i as u32 + 1,
                source_node: 0,
                destination_node: 1,
                functions: f.clone(),
                deadline_s: *d,
                min_rate: 10.0,
            })
            .collect(),
        nf_catalog: alphas
            .iter()
            .enumerate()
            .map(|(i, &a)| NetworkFunction { id: i as u32 + 1, cycles_per_bit: a, storage_demand: 10.0 })
            .collect(),
        channel_gain: vec![vec![1e-6; 4]; users],
        noise_power: vec![vec![1e-7; 4]; users],
        num_subcarriers: 4,
        subcarrier_bandwidth_khz: 15.0,
        max_power_w: 40.0,
        rng_seed: 0,
    }
}

fn worked() -> NetworkScenario {
    scenario(
        &[1000.0, 2000.0, 1500.0, 3000.0, 1800.0],
        &[(vec![1, 2], 0.3), (vec![1, 2], 0.7)],
        &[20.0, 40.0],
        10.0,
    )
}

#[test]
fn single_function_single_server() {
    let s = scenario(&[2000.0], &[(vec![1], 1.0)], &[20.0], 10.0);
    let sched = heuristic_nfv_ra(&s, &[10.0]);
    assert_eq!(sched.placement[0][0], Some(0));
    assert_eq!(sched.start_time[0][0], 0.0);
    assert_eq!(nfv::total_chain_latency(&sched, &s, &[10.0], 0).unwrap(), 0.1);
    assert_eq!(greedy_baseline_nfv_ra(&s, &[10.0]), sched);
}

#[test]
fn identical_users_queue_back_to_back() {
    let s = scenario(&[1e6], &[(vec![1], 100.0), (vec![1], 100.0)], &[20.0], 10.0);
    let sched = heuristic_nfv_ra(&s, &[10.0, 10.0]);
    assert_eq!(sched.active_count(), 1);
    let tau = 20.0 * 10.0 / 1e6;
    assert_eq!(sched.start_time[0][0], 0.0);
    assert_eq!(sched.start_time[1][0], tau);
}

#[test]
fn worked_example_oracle_needs_one_server() {
    let s = worked();
    let o = exhaustive_nfv(&s, &s.packet_sizes(), &SearchLimits::default());
    assert_eq!(o.best_objective, 1.0);
    assert!(o.proven_optimal && !o.time_limited);
    assert!(check_schedule(o.best_schedule.as_ref().unwrap(), &s, &s.packet_sizes()).feasible);
}

#[test]
fn worked_example_residuals_and_score() {
    let s = worked();
    let y = s.packet_sizes();
    let sched = heuristic_nfv_ra(&s, &y);
    // storage: 2 * (10 + 10) against 5 * 1000; cpu: 10 * (20 + 40) against 9300
    let r = residual_violation(&sched, &s, &y);
    assert_eq!(r, vec![(0.0, 4960.0, 8700.0); 2]);
    let w = CostWeights::default();
    assert_eq!(admission_score(0, 10.0, &sched, &s, &w), 4960.0 + 8700.0);
    assert_eq!(admission_score(1, 8.0, &sched, &s, &w), 50.0 * 2.0 + 4960.0 + 8700.0);
}

#[test]
fn baseline_never_uses_fewer_servers_on_worked_family() {
    // the two-user, two-function example with shuffled capacities, scaled
    // requirements and loose-enough deadlines
    let base = [1000.0, 2000.0, 1500.0, 3000.0, 1800.0];
    let mut checked = 0;
    for rot in 0..5 {
        let caps: Vec<f64> = (0..5).map(|i| base[(i + rot) % 5]).collect();
        for (a1, a2) in [(20.0, 40.0), (10.0, 30.0), (40.0, 20.0), (25.0, 25.0)] {
            for (d1, d2) in [(0.3, 0.7), (0.5, 0.5), (1.0, 2.0), (0.25, 10.0)] {
                let s = scenario(&caps, &[(vec![1, 2], d1), (vec![1, 2], d2)], &[a1, a2], 10.0);
                let y = s.packet_sizes();
                let h = heuristic_nfv_ra(&s, &y);
                if !check_schedule(&h, &s, &y).feasible {
                    continue;
                }
                let g = greedy_baseline_nfv_ra(&s, &y);
                assert!(g.active_count() >= h.active_count(), "caps {caps:?} alpha ({a1},{a2}) deadlines ({d1},{d2})");
                checked += 1;
            }
        }
    }
    assert!(checked >= 40);
}

fn tiny_config() -> ScenarioConfig {
    ScenarioConfig {
        users: Bounds::new(2, 2),
        servers: Bounds::new(3, 3),
        services: Bounds::new(2, 2),
        nfs_per_service: Bounds::new(3, 3),
        num_functions: 4,
        num_subcarriers: 4,
        ..ScenarioConfig::default()
    }
}

#[test]
fn nfv_oracle_dominates_heuristics() {
    for seed in 0..40 {
        let s = generate_scenario(&tiny_config(), seed).unwrap();
        let y = s.packet_sizes();
        let o = exhaustive_nfv(&s, &y, &SearchLimits::default());
        assert!(o.proven_optimal);
        for sched in [heuristic_nfv_ra(&s, &y), greedy_baseline_nfv_ra(&s, &y)] {
            if check_schedule(&sched, &s, &y).feasible {
                assert!(o.best_objective <= sched.active_count() as f64, "seed {seed}");
            }
        }
    }
}

#[test]
fn nfv_oracle_beats_random_valid_schedules() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
    let s = generate_scenario(&tiny_config(), 3).unwrap();
    let y = s.packet_sizes();
    let o = exhaustive_nfv(&s, &y, &SearchLimits::default());
    let tau = |u: usize, m: usize, n: usize| nfv::processing_latency(s.chain_of(u)[m], &s.servers[n], y[u]);
    let mut valid = 0;
    for _ in 0..2000 {
        // random placement, then list-schedule users in random order
        let mut sched = ranfv_core::ScheduleAssignment::empty(&s);
        let mut release = vec![0.0f64; s.num_servers()];
        let mut order: Vec<usize> = (0..s.num_users()).collect();
        if rng.random_bool(0.5) {
            order.reverse();
        }
        for &u in &order {
            let mut ready = 0.0f64;
            for m in 0..s.chain_of(u).len() {
                let n = rng.random_range(0..s.num_servers());
                let start = ready.max(release[n]);
                sched.placement[u][m] = Some(n);
                sched.start_time[u][m] = start;
                sched.active[n] = true;
                ready = start + tau(u, m, n);
                release[n] = ready;
            }
        }
        sched.derive_ordering();
        if check_schedule(&sched, &s, &y).feasible {
            valid += 1;
            assert!(o.best_objective <= sched.active_count() as f64);
        }
        if valid == 100 {
            break;
        }
    }
    assert!(valid > 0);
}

/// Least total power for `target` on two subcarriers with inverse qualities
/// `c`: a fine grid on the first power, the second closes the rate gap.
fn grid_pair_power(c: [f64; 2], target: f64, budget: f64) -> f64 {
    if target <= 0.0 {
        return 0.0;
    }
    let eval = |p: f64| p + c[1] * ((target - (1.0 + p / c[0]).log2()).max(0.0).exp2() - 1.0);
    let (mut lo, mut hi, mut best) = (0.0f64, budget, f64::INFINITY);
    for _ in 0..8 {
        let steps = 200;
        let h = (hi - lo) / steps as f64;
        let mut arg = lo;
        for i in 0..=steps {
            let p = lo + i as f64 * h;
            let v = eval(p);
            if v < best {
                best = v;
                arg = p;
            }
        }
        lo = (arg - h).max(0.0);
        hi = arg + h;
    }
    best
}

#[test]
fn throttled_elastic_power_matches_grid() {
    let config = ScenarioConfig { users: Bounds::new(2, 2), num_subcarriers: 4, min_rate: Bounds::new(4.0, 8.0), ..tiny_config() };
    let w = 1e4;
    for seed in 0..10 {
        let mut s = generate_scenario(&config, seed).unwrap();
        let assignment = vec![vec![true, true, false, false], vec![false, false, true, true]];
        let c = |u: usize, k: usize| s.noise_power[u][k] / s.channel_gain[u][k];
        let cs = [[c(0, 0), c(0, 1)], [c(1, 2), c(1, 3)]];
        let floors = s.rate_floors();
        let need: f64 = (0..2).map(|u| grid_pair_power(cs[u], floors[u], 1e9)).sum();
        s.max_power_w = need / 2.0;

        // grid over A, zooming on the first feasible value
        let feasible = |a: f64| (0..2).map(|u| grid_pair_power(cs[u], floors[u] - a, 1e9)).sum::<f64>() <= s.max_power_w;
        let (mut lo, mut hi) = (0.0, floors[0].max(floors[1]));
        while hi - lo > 1e-10 {
            let steps = 50;
            let h = (hi - lo) / steps as f64;
            let first = (0..=steps).map(|i| lo + i as f64 * h).find(|&a| feasible(a)).unwrap();
            hi = first;
            lo = (first - h).max(0.0);
        }
        let oracle_a = hi;
        let oracle = (0..2).map(|u| grid_pair_power(cs[u], floors[u] - oracle_a, 1e9)).sum::<f64>() + w * oracle_a;

        let out = solve_power_elastic(&assignment, &s, w);
        assert!(out.elastic > 0.0);
        assert!((out.elastic - oracle_a).abs() <= 2e-6, "A {} vs {}", out.elastic, oracle_a);
        assert!((out.objective - oracle).abs() <= 1e-3 * oracle, "objective {} vs {}", out.objective, oracle);
        let alloc = RadioAllocation::new(assignment.clone(), out.power.clone());
        assert!(alloc.total_power() <= s.max_power_w * (1.0 + 1e-12));
    }
}

#[test]
fn default_scale_instance_converges_monotonically() {
    let config = ScenarioConfig {
        users: Bounds::new(30, 30),
        num_functions: 15,
        services: Bounds::new(10, 10),
        servers: Bounds::new(20, 20),
        ..ScenarioConfig::default()
    };
    for seed in 0..5 {
        let s = generate_scenario(&config, seed).unwrap();
        let r = asm_solve(&s, &config.weights, &SolveOptions::default());
        assert!(r.converged && r.iterations <= 30);
        assert!(r.objective_trace.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9)));
    }
}

#[test]
fn objective_recomputes_from_returned_variables() {
    let config = ScenarioConfig { users: Bounds::new(5, 20), servers: Bounds::new(15, 20), ..ScenarioConfig::default() };
    for seed in 0..10 {
        let s = generate_scenario(&config, seed).unwrap();
        let w = config.weights;
        let r = e_ac_asm(&s, &w, &SolveOptions::default());
        let (total, b) = cost(&r.radio, &r.schedule.active, s.subcarrier_bandwidth_khz, &w);
        assert!((total - r.total_cost()).abs() <= 1e-9 * total.max(1.0));
        assert_eq!(b, r.cost_breakdown);
        assert!((r.objective() - (total + w.w * r.elastic)).abs() <= 1e-9 * r.objective().max(1.0));
    }
}

#[test]
fn hopeless_user_is_rejected_first() {
    let config = ScenarioConfig {
        users: Bounds::new(4, 4),
        servers: Bounds::new(6, 6),
        deadline: Bounds::new(50.0, 50.0),
        min_rate: Bounds::new(0.5, 1.0),
        cell_radius_m: 100.0,
        ..ScenarioConfig::default()
    };
    let mut s = generate_scenario(&config, 2).unwrap();
    let ok = e_ac_asm(&s, &config.weights, &SolveOptions::default());
    assert!(ok.rejected_users.is_empty());

    // user 3 gets its own service with a floor no subcarrier set can reach
    let mut svc = s.service_of(2).clone();
    svc.id = 99;
    svc.min_rate = 1e4;
    s.services.push(svc);
    s.users[2].service = 99;
    for rule in [AdmissionRule::Absolute, AdmissionRule::Excess] {
        let r = e_ac_asm(&s, &config.weights, &SolveOptions { admission: rule, ..SolveOptions::default() });
        assert_eq!(r.rejected_users[0].0, 3, "{rule:?}");
        assert_eq!(r.rejected_users.len(), 1);
        assert_eq!(r.accepted_users, vec![1, 2, 4]);
    }
}
