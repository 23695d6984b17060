//! OFDMA radio sub-problems: elastic power allocation and subcarrier assignment.

use alloc::vec;
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::math;
use crate::scenario::NetworkScenario;

/// Absolute slack when comparing an achieved rate with its floor (bps/Hz).
pub const RATE_TOL: f64 = 1e-9;
/// Bisection resolution on the elastic variable.
pub const ELASTIC_TOL: f64 = 1e-6;
/// Largest `U * K` solved exactly by branch-and-bound.
pub const EXACT_SUBCARRIER_LIMIT: usize = 64;
const BNB_NODE_LIMIT: u64 = 2_000_000;

/// Subcarrier assignment and transmit powers, both `U x K`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct RadioAllocation {
    pub assignment: Vec<Vec<bool>>,
    pub power: Vec<Vec<f64>>,
}

impl RadioAllocation {
    pub fn empty(users: usize, subcarriers: usize) -> Self {
        Self {
            assignment: vec![vec![false; subcarriers]; users],
            power: vec![vec![0.0; subcarriers]; users],
        }
    }

    /// Builds an allocation, zeroing power wherever the assignment is off.
    pub fn new(assignment: Vec<Vec<bool>>, mut power: Vec<Vec<f64>>) -> Self {
        for (arow, prow) in assignment.iter().zip(power.iter_mut()) {
            for (&a, p) in arow.iter().zip(prow.iter_mut()) {
                if !a {
                    *p = 0.0;
                }
            }
        }
        Self { assignment, power }
    }

    /// `sum(rho * p)`.
    pub fn total_power(&self) -> f64 {
        self.assignment
            .iter()
            .zip(&self.power)
            .flat_map(|(a, p)| a.iter().zip(p))
            .filter(|(a, _)| **a)
            .fold(0.0, |acc, (_, p)| acc + p)
    }

    pub fn assigned_count(&self) -> usize {
        self.assignment.iter().flatten().filter(|a| **a).count()
    }

    /// Human-readable list of broken invariants (empty when valid).
    pub fn violations(&self, max_power_w: f64) -> Vec<alloc::string::String> {
        use alloc::format;
        let mut out = Vec::new();
        let k = self.assignment.first().map_or(0, Vec::len);
        for col in 0..k {
            let n = self.assignment.iter().filter(|row| row[col]).count();
            if n > 1 {
                out.push(format!("subcarrier {col} assigned to {n} users"));
            }
        }
        for (u, (a, p)) in self.assignment.iter().zip(&self.power).enumerate() {
            for (k, (&a, &p)) in a.iter().zip(p).enumerate() {
                if p < 0.0 {
                    out.push(format!("power[{u}][{k}] negative"));
                }
                if !a && p != 0.0 {
                    out.push(format!("power[{u}][{k}] nonzero on unassigned subcarrier"));
                }
            }
        }
        let total = self.total_power();
        if total > max_power_w * (1.0 + 1e-9) {
            out.push(format!("total power {total} exceeds budget {max_power_w}"));
        }
        out
    }
}

/// Result of the elastic power sub-problem.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PowerSolveOutcome {
    pub power: Vec<Vec<f64>>,
    pub elastic: f64,
    /// `sum(p) + W * elastic`.
    pub objective: f64,
    pub iterations: usize,
}

pub fn snr(power_w: f64, gain: f64, noise_w: f64) -> Result<f64, Error> {
    if !(noise_w > 0.0) {
        return Err(Error::Domain("noise power must be positive"));
    }
    Ok(power_w * gain / noise_w)
}

#[inline]
fn rate_of(power: f64, gain: f64, noise: f64) -> f64 {
    math::log2(1.0 + power * gain / noise)
}

/// Achievable rate of user `u` in bps/Hz, `sum_k rho * log2(1 + snr)`.
pub fn user_rate(alloc: &RadioAllocation, scenario: &NetworkScenario, u: usize) -> f64 {
    let gains = &scenario.channel_gain[u];
    let noise = &scenario.noise_power[u];
    alloc.assignment[u]
        .iter()
        .zip(&alloc.power[u])
        .enumerate()
        .filter(|(_, (a, _))| **a)
        .map(|(k, (_, &p))| rate_of(p, gains[k], noise[k]))
        .sum()
}

pub fn user_rates(alloc: &RadioAllocation, scenario: &NetworkScenario) -> Vec<f64> {
    (0..scenario.num_users()).map(|u| user_rate(alloc, scenario, u)).collect()
}

/// Water-filling solution for one user.
#[derive(Debug, Clone, PartialEq)]
pub struct WaterFill {
    /// Power per input subcarrier, in input order.
    pub power: Vec<f64>,
    /// Common water level; `p_k = max(0, level - noise_k / gain_k)`.
    pub level: f64,
}

/// Subcarriers of one user pre-sorted by inverse channel quality, so the
/// minimal power for any rate target is an O(K) scan.
#[derive(Debug, Clone)]
struct WaterTable {
    /// `(noise/gain, original position)` ascending.
    floors: Vec<(f64, usize)>,
    /// `prefix_log[m] = sum_{i<m} log2(floors[i])`.
    prefix_log: Vec<f64>,
}

impl WaterTable {
    fn new(gains: &[f64], noise: &[f64]) -> Self {
        let mut floors: Vec<(f64, usize)> = gains
            .iter()
            .zip(noise)
            .enumerate()
            .map(|(i, (&g, &s))| (if g > 0.0 { s / g } else { f64::INFINITY }, i))
            .filter(|(c, _)| c.is_finite())
            .collect();
        floors.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut prefix_log = Vec::with_capacity(floors.len() + 1);
        prefix_log.push(0.0);
        let mut acc = 0.0;
        for (c, _) in &floors {
            acc += math::log2(*c);
            prefix_log.push(acc);
        }
        Self { floors, prefix_log }
    }

    /// Active-set size and water level for `target > 0`.
    fn level(&self, target: f64) -> Option<(usize, f64)> {
        let n = self.floors.len();
        if n == 0 {
            return None;
        }
        for m in 1..=n {
            let level = math::exp2((target + self.prefix_log[m]) / m as f64);
            if m == n || level <= self.floors[m].0 {
                return Some((m, level));
            }
        }
        unreachable!()
    }

    fn min_total_power(&self, target: f64) -> f64 {
        if target <= 0.0 {
            return 0.0;
        }
        match self.level(target) {
            Some((m, level)) => self.floors[..m].iter().map(|(c, _)| level - c).sum(),
            None => f64::INFINITY,
        }
    }

    fn fill(&self, target: f64, len: usize) -> Option<WaterFill> {
        let mut power = vec![0.0; len];
        if target <= 0.0 {
            return Some(WaterFill { power, level: 0.0 });
        }
        let (m, level) = self.level(target)?;
        for &(c, i) in &self.floors[..m] {
            power[i] = level - c;
        }
        Some(WaterFill { power, level })
    }
}

/// Minimum-power allocation reaching `target_rate` over the given subcarriers.
///
/// The active set and water level come from the closed form over subcarriers
/// sorted by `noise/gain`, so the achieved rate equals the target up to
/// rounding.
pub fn water_fill(gains: &[f64], noise: &[f64], target_rate: f64) -> Result<WaterFill, Error> {
    if gains.len() != noise.len() {
        return Err(Error::Domain("gain and noise vectors differ in length"));
    }
    if noise.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Domain("noise power must be positive"));
    }
    WaterTable::new(gains, noise)
        .fill(target_rate, gains.len())
        .ok_or(Error::Infeasible)
}

pub fn min_power_for_rate(gains: &[f64], noise: &[f64], target_rate: f64) -> Result<Vec<f64>, Error> {
    water_fill(gains, noise, target_rate).map(|w| w.power)
}

/// Elastic power allocation for a fixed assignment, using each user's
/// service rate floor.
pub fn solve_power_elastic(assignment: &[Vec<bool>], scenario: &NetworkScenario, w: f64) -> PowerSolveOutcome {
    solve_power_elastic_with_floors(assignment, scenario, &scenario.rate_floors(), w)
}

/// Minimises `sum(p) + W*A` subject to `floor_u - R_u <= A`, the power budget,
/// `p >= 0` and `A >= 0`.
///
/// Total minimal power is non-increasing in `A`, so `A` is the smallest value
/// (bisection to [`ELASTIC_TOL`]) whose water-filling powers fit the budget.
/// A user with a positive floor and no subcarriers forces `A >= floor`.
pub fn solve_power_elastic_with_floors(
    assignment: &[Vec<bool>],
    scenario: &NetworkScenario,
    floors: &[f64],
    w: f64,
) -> PowerSolveOutcome {
    let users = assignment.len();
    let k = scenario.num_subcarriers;
    let mut tables = Vec::with_capacity(users);
    let mut columns = Vec::with_capacity(users);
    let mut forced = 0.0f64;
    for u in 0..users {
        let cols: Vec<usize> = (0..k).filter(|&c| assignment[u][c]).collect();
        let gains: Vec<f64> = cols.iter().map(|&c| scenario.channel_gain[u][c]).collect();
        let noise: Vec<f64> = cols.iter().map(|&c| scenario.noise_power[u][c]).collect();
        let table = WaterTable::new(&gains, &noise);
        if table.floors.is_empty() && floors[u] > 0.0 {
            forced = forced.max(floors[u]);
        }
        tables.push(table);
        columns.push(cols);
    }

    let total_at = |a: f64| -> f64 {
        tables
            .iter()
            .zip(floors)
            .map(|(t, &f)| {
                let target = f - a;
                if target <= 0.0 {
                    0.0
                } else {
                    t.min_total_power(target)
                }
            })
            .sum()
    };

    let budget = scenario.max_power_w;
    let mut iterations = 0;
    let elastic = if total_at(forced) <= budget {
        forced
    } else {
        let mut lo = forced;
        let mut hi = floors.iter().cloned().fold(0.0, f64::max);
        while hi - lo > ELASTIC_TOL {
            iterations += 1;
            let mid = 0.5 * (lo + hi);
            if total_at(mid) <= budget {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    };

    let mut power = vec![vec![0.0; k]; users];
    for u in 0..users {
        let target = floors[u] - elastic;
        if target <= 0.0 {
            continue;
        }
        if let Some(fill) = tables[u].fill(target, columns[u].len()) {
            for (i, &c) in columns[u].iter().enumerate() {
                power[u][c] = fill.power[i];
            }
        }
    }
    let total: f64 = power.iter().flatten().sum();
    PowerSolveOutcome {
        power,
        elastic,
        objective: total + w * elastic,
        iterations: iterations.max(1),
    }
}

/// Per-(user, subcarrier) rates at fixed powers; zero power gives zero rate.
fn rate_matrix(power: &[Vec<f64>], scenario: &NetworkScenario) -> Vec<Vec<f64>> {
    power
        .iter()
        .enumerate()
        .map(|(u, row)| {
            row.iter()
                .enumerate()
                .map(|(k, &p)| {
                    if p > 0.0 {
                        rate_of(p, scenario.channel_gain[u][k], scenario.noise_power[u][k])
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Subcarrier assignment at fixed powers with each service's rate floor.
pub fn solve_subcarrier(power: &[Vec<f64>], scenario: &NetworkScenario) -> Result<Vec<Vec<bool>>, Error> {
    solve_subcarrier_with_floors(power, scenario, &scenario.rate_floors())
}

/// Minimises the number of assigned subcarriers such that each subcarrier
/// serves at most one user, `sum(rho * p) <= P_max` and every user reaches its
/// floor at the given powers.
///
/// Exact branch-and-bound when `U * K <= 64`, otherwise [`subcarrier_greedy`].
pub fn solve_subcarrier_with_floors(
    power: &[Vec<f64>],
    scenario: &NetworkScenario,
    floors: &[f64],
) -> Result<Vec<Vec<bool>>, Error> {
    let rates = rate_matrix(power, scenario);
    let users = rates.len();
    if users * scenario.num_subcarriers <= EXACT_SUBCARRIER_LIMIT {
        subcarrier_branch_and_bound(&rates, power, floors, scenario.max_power_w)
    } else {
        subcarrier_greedy(&rates, power, floors, scenario.max_power_w)
    }
}

/// Users in descending floor order, ties by lower index.
fn floor_order(floors: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..floors.len()).collect();
    order.sort_by(|&a, &b| floors[b].total_cmp(&floors[a]).then(a.cmp(&b)));
    order
}

fn best_free_subcarrier(rates: &[f64], taken: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (k, &r) in rates.iter().enumerate() {
        if taken[k] || !(r > 0.0) {
            continue;
        }
        match best {
            Some(b) if rates[b] >= r => {}
            _ => best = Some(k),
        }
    }
    best
}

fn within_budget(assign: &[Vec<bool>], power: &[Vec<f64>], budget: f64) -> bool {
    let used: f64 = assign
        .iter()
        .zip(power)
        .flat_map(|(a, p)| a.iter().zip(p))
        .filter(|(a, _)| **a)
        .map(|(_, p)| *p)
        .sum();
    used <= budget * (1.0 + 1e-12)
}

/// Users in descending floor order each take their highest-rate free
/// subcarriers (lowest index on ties) until their floor is met.
pub fn subcarrier_greedy(
    rates: &[Vec<f64>],
    power: &[Vec<f64>],
    floors: &[f64],
    budget: f64,
) -> Result<Vec<Vec<bool>>, Error> {
    let users = rates.len();
    let k = rates.first().map_or(0, Vec::len);
    let mut assign = vec![vec![false; k]; users];
    let mut taken = vec![false; k];
    for u in floor_order(floors) {
        let mut acc = 0.0;
        while acc < floors[u] - RATE_TOL {
            let Some(best) = best_free_subcarrier(&rates[u], &taken) else {
                return Err(Error::Infeasible);
            };
            taken[best] = true;
            assign[u][best] = true;
            acc += rates[u][best];
        }
    }
    if !within_budget(&assign, power, budget) {
        return Err(Error::Infeasible);
    }
    Ok(assign)
}

/// Best-effort assignment used when no assignment meets every floor: users
/// still below their floor take turns (descending floor order) picking their
/// best free subcarrier until floors are met or nothing useful is left.
pub fn seed_assignment(power: &[Vec<f64>], scenario: &NetworkScenario, floors: &[f64]) -> Vec<Vec<bool>> {
    let rates = rate_matrix(power, scenario);
    let users = rates.len();
    let k = scenario.num_subcarriers;
    let mut assign = vec![vec![false; k]; users];
    let mut taken = vec![false; k];
    let mut acc = vec![0.0; users];
    let order = floor_order(floors);
    loop {
        let mut progressed = false;
        for &u in &order {
            if acc[u] >= floors[u] - RATE_TOL {
                continue;
            }
            if let Some(best) = best_free_subcarrier(&rates[u], &taken) {
                taken[best] = true;
                assign[u][best] = true;
                acc[u] += rates[u][best];
                progressed = true;
            }
        }
        if !progressed {
            return assign;
        }
    }
}

struct Bnb<'a> {
    rates: &'a [Vec<f64>],
    power: &'a [Vec<f64>],
    floors: &'a [f64],
    budget: f64,
    users: usize,
    k: usize,
    choice: Vec<Option<usize>>,
    acc: Vec<f64>,
    best: Option<(usize, f64, Vec<Option<usize>>)>,
    upper: usize,
    nodes: u64,
}

impl Bnb<'_> {
    /// Lower bound on subcarriers still needed from columns `from..`, or
    /// `None` if some floor cannot be reached.
    fn remaining_need(&self, from: usize) -> Option<usize> {
        let mut need = 0;
        let mut buf: Vec<f64> = Vec::with_capacity(self.k - from);
        for u in 0..self.users {
            let deficit = self.floors[u] - RATE_TOL - self.acc[u];
            if deficit <= 0.0 {
                continue;
            }
            buf.clear();
            buf.extend(self.rates[u][from..].iter().copied().filter(|r| *r > 0.0));
            buf.sort_by(|a, b| b.total_cmp(a));
            let mut got = 0.0;
            let mut n = 0;
            for r in &buf {
                if got >= deficit - 1e-12 {
                    break;
                }
                got += r;
                n += 1;
            }
            if got < deficit - 1e-12 {
                return None;
            }
            need += n;
        }
        Some(need)
    }

    fn search(&mut self, col: usize, count: usize, used: f64) {
        self.nodes += 1;
        if self.nodes > BNB_NODE_LIMIT {
            return;
        }
        let Some(need) = self.remaining_need(col) else {
            return;
        };
        let lb = count + need;
        if lb > self.upper {
            return;
        }
        if let Some((bc, bp, _)) = &self.best {
            if lb > *bc || (lb == *bc && used >= *bp) {
                return;
            }
        }
        if col == self.k {
            // need == 0 here, so every floor is met
            let better = match &self.best {
                None => true,
                Some((bc, bp, _)) => count < *bc || (count == *bc && used < *bp),
            };
            if better {
                self.best = Some((count, used, self.choice.clone()));
            }
            return;
        }
        self.choice[col] = None;
        self.search(col + 1, count, used);
        for u in 0..self.users {
            let r = self.rates[u][col];
            if !(r > 0.0) || self.acc[u] >= self.floors[u] - RATE_TOL {
                continue;
            }
            let p = self.power[u][col];
            if used + p > self.budget * (1.0 + 1e-12) {
                continue;
            }
            self.choice[col] = Some(u);
            self.acc[u] += r;
            self.search(col + 1, count + 1, used + p);
            self.acc[u] -= r;
        }
        self.choice[col] = None;
    }
}

/// Exact minimum-count assignment by depth-first branch-and-bound over
/// subcarriers.
///
/// Among minimum-count assignments the one with least total power wins, then
/// the first in lexicographic column order (idle before user 0 before user 1).
pub fn subcarrier_branch_and_bound(
    rates: &[Vec<f64>],
    power: &[Vec<f64>],
    floors: &[f64],
    budget: f64,
) -> Result<Vec<Vec<bool>>, Error> {
    let users = rates.len();
    let k = rates.first().map_or(0, Vec::len);
    let greedy = subcarrier_greedy(rates, power, floors, budget);
    let upper = match &greedy {
        Ok(a) => a.iter().flatten().filter(|x| **x).count(),
        Err(_) => usize::MAX,
    };
    let mut bnb = Bnb {
        rates,
        power,
        floors,
        budget,
        users,
        k,
        choice: vec![None; k],
        acc: vec![0.0; users],
        best: None,
        upper,
        nodes: 0,
    };
    bnb.search(0, 0, 0.0);
    if bnb.nodes > BNB_NODE_LIMIT {
        // search truncated; fall back to the best found or the greedy answer
        if let Some((_, _, choice)) = bnb.best {
            return Ok(columns_to_matrix(&choice, users));
        }
        return greedy;
    }
    match bnb.best {
        Some((_, _, choice)) => Ok(columns_to_matrix(&choice, users)),
        None => Err(Error::Infeasible),
    }
}

pub(crate) fn columns_to_matrix(choice: &[Option<usize>], users: usize) -> Vec<Vec<bool>> {
    let mut m = vec![vec![false; choice.len()]; users];
    for (k, c) in choice.iter().enumerate() {
        if let Some(u) = c {
            m[*u][k] = true;
        }
    }
    m
}
