//! Scalar performance metrics.

use crate::error::Error;
use crate::nfv::ScheduleAssignment;
use crate::scenario::NetworkScenario;

/// Service acceptance ratio `1 - rejected / total`.
pub fn sar(rejected: usize, total: usize) -> Result<f64, Error> {
    if total == 0 {
        return Err(Error::Domain("no users"));
    }
    if rejected > total {
        return Err(Error::Domain("more rejections than users"));
    }
    Ok(1.0 - rejected as f64 / total as f64)
}

/// CPU demand of the placed functions over the total CPU capacity.
pub fn utilization_ratio(schedule: &ScheduleAssignment, scenario: &NetworkScenario, packet_sizes: &[f64]) -> f64 {
    let capacity: f64 = scenario.servers.iter().map(|s| s.cpu_capacity).sum();
    if capacity <= 0.0 {
        return 0.0;
    }
    let mut used = 0.0;
    for u in 0..scenario.num_users() {
        for (m, f) in scenario.chain_of(u).iter().enumerate() {
            if schedule.placement[u][m].is_some() {
                used += packet_sizes[u] * f.cycles_per_bit;
            }
        }
    }
    used / capacity
}
