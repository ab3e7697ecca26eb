//! Exhaustive grid solver for the centralized problem
//! `max sum_i log U_i(sum_l r_li)` subject to per-carrier capacity.
//!
//! The objective depends only on per-user totals, so the search runs over
//! totals on a grid `{res, 2 res, ...}`. A vector of totals is feasible when
//! it can be routed through the coverage graph, which (by max-flow/min-cut)
//! holds iff for every set `C` of carriers the users covered only by `C`
//! demand no more than `C` can supply. The totals are then split into
//! per-carrier rates with a max-flow.

use std::collections::{BTreeMap, VecDeque};

use rayon::prelude::*;
use serde::Serialize;

use crate::allocation::AllocationMatrix;
use crate::engine::RunTrace;
use crate::error::OracleError;
use crate::ids::{CarrierId, UeId};
use crate::scenario::Scenario;
use crate::utility::Rate;

/// Upper bound on the number of enumerated grid points.
pub const GRID_LIMIT: f64 = 1e8;

/// Most carriers the subset-based feasibility test accepts.
pub const MAX_CARRIERS: usize = 16;

const SLACK_EPS: f64 = 1e-9;

/// `sum_i log U_i(total_i)`.
pub fn primal_objective(scenario: &Scenario, alloc: &AllocationMatrix) -> Result<f64, OracleError> {
    scenario.validate()?;
    let mut problems = Vec::new();
    for (ue, carrier, r) in alloc.iter() {
        match scenario.user(ue) {
            None => problems.push(format!("unknown user {ue}")),
            Some(u) if !u.coverage.contains(&carrier) => {
                problems.push(format!("user {ue} is not covered by carrier {carrier}"))
            }
            _ => {}
        }
        if !(r.is_finite() && r >= 0.0) {
            problems.push(format!("rate of user {ue} on carrier {carrier} is {r}"));
        }
    }
    for c in &scenario.carriers {
        let load = alloc.carrier_load(c.id);
        if load > c.capacity * (1.0 + SLACK_EPS) + SLACK_EPS {
            problems.push(format!("carrier {} carries {load} > capacity {}", c.id, c.capacity));
        }
    }
    let mut objective = 0.0;
    for u in &scenario.users {
        let total = alloc.total(u.id);
        if total.is_finite() && total > 0.0 {
            objective += u.utility.log_evaluate(Rate::new(total).expect("positive"));
        } else {
            problems.push(format!("user {} has total rate {total}", u.id));
        }
    }
    if problems.is_empty() {
        Ok(objective)
    } else {
        Err(OracleError::Infeasible(problems))
    }
}

/// Carrier subsets as bitmasks plus each user's coverage mask.
struct Layout {
    users: Vec<UeId>,
    carriers: Vec<CarrierId>,
    cover: Vec<u32>,
    /// Capacity of every carrier subset, indexed by mask.
    cap: Vec<f64>,
}

impl Layout {
    fn new(scenario: &Scenario) -> Result<Layout, OracleError> {
        scenario.validate()?;
        let carriers = scenario.carrier_ids();
        if carriers.len() > MAX_CARRIERS {
            return Err(OracleError::ShapeMismatch(format!(
                "{} carriers, at most {MAX_CARRIERS} supported",
                carriers.len()
            )));
        }
        let bit = |c: &CarrierId| 1u32 << carriers.binary_search(c).expect("validated coverage");
        let cover = scenario
            .users
            .iter()
            .map(|u| u.coverage.iter().fold(0u32, |m, c| m | bit(c)))
            .collect();
        let caps: Vec<f64> = carriers
            .iter()
            .map(|&c| scenario.carrier(c).expect("listed").capacity)
            .collect();
        let cap = (0..1u32 << carriers.len())
            .map(|mask| {
                caps.iter()
                    .enumerate()
                    .filter(|(j, _)| mask & (1 << j) != 0)
                    .map(|(_, c)| c)
                    .sum()
            })
            .collect();
        Ok(Layout {
            users: scenario.users.iter().map(|u| u.id).collect(),
            carriers,
            cover,
            cap,
        })
    }

    fn supersets(&self, mask: u32) -> Vec<usize> {
        (0..self.cap.len()).filter(|&s| s as u32 & mask == mask).collect()
    }
}

struct Search<'a> {
    res: f64,
    /// `log_u[i][k - 1] = log U_i(k * res)`.
    log_u: Vec<Vec<f64>>,
    supersets: Vec<Vec<usize>>,
    layout: &'a Layout,
}

#[derive(Clone)]
struct Best {
    objective: f64,
    ks: Vec<u64>,
}

impl Best {
    fn better(self, other: Best) -> Best {
        match self.objective.total_cmp(&other.objective) {
            std::cmp::Ordering::Greater => self,
            std::cmp::Ordering::Less => other,
            std::cmp::Ordering::Equal => {
                if other.ks < self.ks {
                    other
                } else {
                    self
                }
            }
        }
    }
}

impl Search<'_> {
    fn kmax(&self, i: usize, slack: &[f64]) -> u64 {
        let room = self.supersets[i]
            .iter()
            .map(|&s| slack[s])
            .fold(f64::INFINITY, f64::min);
        if room <= 0.0 {
            0
        } else {
            ((room / self.res) + SLACK_EPS).floor() as u64
        }
    }

    fn take(&self, i: usize, k: u64, slack: &mut [f64]) {
        let t = k as f64 * self.res;
        for &s in &self.supersets[i] {
            slack[s] -= t;
        }
    }

    fn give(&self, i: usize, k: u64, slack: &mut [f64]) {
        let t = k as f64 * self.res;
        for &s in &self.supersets[i] {
            slack[s] += t;
        }
    }

    fn dfs(&self, i: usize, slack: &mut [f64], ks: &mut Vec<u64>, partial: f64, best: &mut Option<Best>) {
        let m = self.log_u.len();
        let kmax = self.kmax(i, slack).min(self.log_u[i].len() as u64);
        if kmax == 0 {
            return;
        }
        if i + 1 == m {
            // utility is increasing, so the last user takes all it can
            ks.push(kmax);
            let candidate = Best {
                objective: partial + self.log_u[i][kmax as usize - 1],
                ks: ks.clone(),
            };
            ks.pop();
            *best = Some(match best.take() {
                Some(b) => b.better(candidate),
                None => candidate,
            });
            return;
        }
        for k in 1..=kmax {
            self.take(i, k, slack);
            ks.push(k);
            self.dfs(i + 1, slack, ks, partial + self.log_u[i][k as usize - 1], best);
            ks.pop();
            self.give(i, k, slack);
        }
    }
}

/// Exhaustive search over per-user totals on the grid `{res, 2 res, ...}`.
///
/// Returns the argmax of [`primal_objective`] split into per-carrier rates;
/// ties go to the lexicographically smallest vector of totals in scenario
/// user order.
pub fn grid_solve(scenario: &Scenario, resolution: f64) -> Result<AllocationMatrix, OracleError> {
    if !(resolution.is_finite() && resolution > 0.0) {
        return Err(OracleError::BadResolution(resolution));
    }
    let layout = Layout::new(scenario)?;
    let m = layout.users.len();
    let full = layout.cap.len() - 1;
    let kcap: Vec<u64> = layout
        .cover
        .iter()
        .map(|&c| ((layout.cap[c as usize] / resolution) + SLACK_EPS).floor() as u64)
        .collect();
    let points: f64 = kcap[..m - 1].iter().map(|&k| k as f64).product();
    if points > GRID_LIMIT {
        return Err(OracleError::GridTooLarge { points, limit: GRID_LIMIT });
    }
    if kcap.iter().any(|&k| k == 0) {
        return Err(OracleError::NoFeasiblePoint);
    }

    let log_u = scenario
        .users
        .iter()
        .zip(&kcap)
        .map(|(u, &kmax)| {
            (1..=kmax)
                .map(|k| u.utility.log_evaluate(Rate::new(k as f64 * resolution).expect("positive")))
                .collect()
        })
        .collect();
    let supersets = layout.cover.iter().map(|&c| layout.supersets(c)).collect();
    let search = Search { res: resolution, log_u, supersets, layout: &layout };
    debug_assert_eq!(search.layout.cap.len(), full + 1);

    let root: Vec<f64> = layout.cap.clone();
    let best = if m == 1 {
        let mut best = None;
        search.dfs(0, &mut root.clone(), &mut Vec::new(), 0.0, &mut best);
        best
    } else {
        let first = search.kmax(0, &root);
        (1..=first)
            .into_par_iter()
            .map(|k| {
                let mut slack = root.clone();
                search.take(0, k, &mut slack);
                let mut ks = vec![k];
                let mut best = None;
                search.dfs(1, &mut slack, &mut ks, search.log_u[0][k as usize - 1], &mut best);
                best
            })
            .reduce(|| None, |a, b| match (a, b) {
                (Some(a), Some(b)) => Some(a.better(b)),
                (a, None) => a,
                (None, b) => b,
            })
    };
    let best = best.ok_or(OracleError::NoFeasiblePoint)?;
    let totals: Vec<f64> = best.ks.iter().map(|&k| k as f64 * resolution).collect();
    split_totals(scenario, &layout, &totals)
}

/// Routes per-user totals through the coverage graph with Edmonds-Karp.
fn split_totals(scenario: &Scenario, layout: &Layout, totals: &[f64]) -> Result<AllocationMatrix, OracleError> {
    let m = layout.users.len();
    let k = layout.carriers.len();
    let n = m + k + 2;
    let (src, sink) = (m + k, m + k + 1);
    let mut cap = vec![vec![0.0f64; n]; n];
    for (i, &t) in totals.iter().enumerate() {
        cap[src][i] = t;
        for j in 0..k {
            if layout.cover[i] & (1 << j) != 0 {
                cap[i][m + j] = f64::INFINITY;
            }
        }
    }
    for (j, c) in layout.carriers.iter().enumerate() {
        cap[m + j][sink] = scenario.carrier(*c).expect("listed").capacity;
    }
    let mut flow = vec![vec![0.0f64; n]; n];
    let residual = |flow: &Vec<Vec<f64>>, u: usize, v: usize| cap[u][v] - flow[u][v];
    loop {
        let mut parent = vec![usize::MAX; n];
        parent[src] = src;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if parent[v] == usize::MAX && residual(&flow, u, v) > 1e-12 {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[sink] == usize::MAX {
            break;
        }
        let mut push = f64::INFINITY;
        let mut v = sink;
        while v != src {
            push = push.min(residual(&flow, parent[v], v));
            v = parent[v];
        }
        let mut v = sink;
        while v != src {
            let u = parent[v];
            flow[u][v] += push;
            flow[v][u] -= push;
            v = u;
        }
    }

    let mut alloc = AllocationMatrix::new();
    let mut problems = Vec::new();
    for (i, &ue) in layout.users.iter().enumerate() {
        for (j, &c) in layout.carriers.iter().enumerate() {
            if layout.cover[i] & (1 << j) != 0 {
                alloc.set(ue, c, flow[i][m + j].max(0.0));
            }
        }
        let short = totals[i] - alloc.total(ue);
        if short > 1e-9 * totals[i].max(1.0) {
            problems.push(format!("user {ue} short by {short}"));
        }
    }
    if problems.is_empty() {
        Ok(alloc)
    } else {
        Err(OracleError::Infeasible(problems))
    }
}

/// Distributed result measured against an oracle allocation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    /// `(distributed, oracle)` total per user.
    pub totals: BTreeMap<UeId, (f64, f64)>,
    pub max_abs: f64,
    pub mean_abs: f64,
    pub distributed_objective: f64,
    pub oracle_objective: f64,
    /// `distributed_objective - oracle_objective`.
    pub objective_gap: f64,
}

impl DeviationReport {
    /// Whether every user is within `max(rel * oracle, abs)` of the oracle total.
    pub fn within(&self, rel: f64, abs: f64) -> bool {
        self.totals
            .values()
            .all(|&(d, o)| (d - o).abs() <= (rel * o.abs()).max(abs))
    }
}

pub fn compare(
    scenario: &Scenario,
    trace: &RunTrace,
    oracle_alloc: &AllocationMatrix,
) -> Result<DeviationReport, OracleError> {
    let dist_totals = trace.allocation.totals();
    let oracle_totals = oracle_alloc.totals();
    for u in &scenario.users {
        if !dist_totals.contains_key(&u.id) || !oracle_totals.contains_key(&u.id) {
            return Err(OracleError::ShapeMismatch(format!("user {} missing from an allocation", u.id)));
        }
    }
    if dist_totals.len() != scenario.users.len() || oracle_totals.len() != scenario.users.len() {
        return Err(OracleError::ShapeMismatch(
            "allocations cover users outside the scenario".to_string(),
        ));
    }
    let totals: BTreeMap<UeId, (f64, f64)> = scenario
        .users
        .iter()
        .map(|u| (u.id, (dist_totals[&u.id], oracle_totals[&u.id])))
        .collect();
    let devs: Vec<f64> = totals.values().map(|(d, o)| (d - o).abs()).collect();
    let distributed_objective = primal_objective(scenario, &trace.allocation)?;
    let oracle_objective = primal_objective(scenario, oracle_alloc)?;
    Ok(DeviationReport {
        max_abs: devs.iter().copied().fold(0.0, f64::max),
        mean_abs: devs.iter().sum::<f64>() / devs.len() as f64,
        totals,
        distributed_objective,
        oracle_objective,
        objective_gap: distributed_objective - oracle_objective,
    })
}
