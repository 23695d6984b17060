//! Radio allocations used as comparison points.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::radio::{snr, RadioAllocation};
use crate::scenario::NetworkScenario;

/// Each subcarrier goes to a uniformly drawn user or stays idle (probability
/// `1 / (U + 1)` each); the power budget is split evenly over the assigned
/// subcarriers.
pub fn baseline_radio_random(scenario: &NetworkScenario, seed: u64) -> RadioAllocation {
    let users = scenario.num_users();
    let k = scenario.num_subcarriers;
    let mut alloc = RadioAllocation::empty(users, k);
    if users == 0 {
        return alloc;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for col in 0..k {
        let pick = rng.random_range(0..=users);
        if pick < users {
            alloc.assignment[pick][col] = true;
        }
    }
    let used = alloc.assigned_count();
    if used > 0 {
        let p = scenario.max_power_w / used as f64;
        for (a, row) in alloc.assignment.iter().zip(alloc.power.iter_mut()) {
            for (&on, p_k) in a.iter().zip(row.iter_mut()) {
                if on {
                    *p_k = p;
                }
            }
        }
    }
    alloc
}

/// `P_max / K` on every subcarrier, each given to the user with the highest
/// SNR on it (lower user index on ties).
pub fn baseline_radio_equal_maxsinr(scenario: &NetworkScenario) -> RadioAllocation {
    let users = scenario.num_users();
    let k = scenario.num_subcarriers;
    let mut alloc = RadioAllocation::empty(users, k);
    if users == 0 {
        return alloc;
    }
    let p = scenario.max_power_w / k as f64;
    for col in 0..k {
        let gamma = |u: usize| snr(p, scenario.channel_gain[u][col], scenario.noise_power[u][col]).unwrap_or(0.0);
        let mut best = 0;
        for u in 1..users {
            if gamma(u) > gamma(best) {
                best = u;
            }
        }
        alloc.assignment[best][col] = true;
        alloc.power[best][col] = p;
    }
    alloc
}
