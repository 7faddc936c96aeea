//! The offline threshold mechanism.
//!
//! For a buck-per-bang threshold `gamma`, let `M(gamma)` be the greedy matching
//! on the pruned graph `G(gamma)`. A threshold is feasible when
//! `gamma * u(M(gamma)) <= budget`. The mechanism picks the largest feasible
//! threshold and accepts every edge of `M(gamma)`.
//!
//! `u(M(gamma))` is non-decreasing in `gamma`, so the feasible set is
//! down-closed. Between two consecutive buck-per-bang breakpoints the pruned
//! graph is constant and the constraint is linear in `gamma`; the maximum is
//! therefore reached at a breakpoint, just below the next breakpoint, or at an
//! interval's budget cap `budget / u(M)`. [`threshold_sweep`] returns the
//! largest feasible double among those candidates, which is the largest
//! feasible double overall.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{edge_bpb, prune_graph, BipartiteInstance, Matching};
use crate::offline::greedy_matching;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    pub gamma: f64,
    pub matching: Matching,
    /// `gamma * u(matching)`, never above the budget.
    pub spent_bound: f64,
}

/// Greedy matching on `G(gamma)`.
pub fn matching_at(instance: &BipartiteInstance, gamma: f64) -> Matching {
    greedy_matching(&prune_graph(instance, gamma))
}

pub fn is_gamma_feasible(instance: &BipartiteInstance, budget: f64, gamma: f64) -> bool {
    gamma * matching_at(instance, gamma).utility() <= budget
}

fn result_at(instance: &BipartiteInstance, gamma: f64) -> ThresholdResult {
    let matching = matching_at(instance, gamma);
    ThresholdResult {
        gamma,
        spent_bound: gamma * matching.utility(),
        matching,
    }
}

/// Sorted, deduplicated buck-per-bang values of all edges.
pub fn breakpoints(instance: &BipartiteInstance) -> Vec<f64> {
    let mut bs: Vec<f64> = instance.edges.iter().map(|e| edge_bpb(instance, e)).collect();
    bs.sort_by(f64::total_cmp);
    bs.dedup();
    bs
}

pub(crate) fn next_down(x: f64) -> f64 {
    if x > 0.0 {
        f64::from_bits(x.to_bits() - 1)
    } else {
        x
    }
}

pub(crate) fn next_up(x: f64) -> f64 {
    if (0.0..f64::INFINITY).contains(&x) {
        f64::from_bits(x.to_bits() + 1)
    } else {
        x
    }
}

/// Largest double in the feasible set, found from a finite candidate set.
///
/// The feasible doubles form a down-closed set, so the answer is either a
/// breakpoint, the double just below a breakpoint (the pruned graph of the
/// interval ending there is still in force), or a budget cap
/// `budget / u(M(b))` rounded in either direction. Candidates are tried
/// from the largest down and the first feasible one wins.
pub fn threshold_sweep(instance: &BipartiteInstance, budget: f64) -> Result<ThresholdResult> {
    if !(budget >= 0.0) {
        return Err(Error::InvalidArgument(format!("budget {budget} must be non-negative")));
    }
    let bps = breakpoints(instance);
    let mut candidates = vec![0.0];
    if bps.is_empty() {
        // Nothing to prune: every threshold is feasible.
        candidates.push(f64::MAX);
    }
    for &b in &bps {
        candidates.extend([b, next_down(b)]);
        let u = matching_at(instance, b).utility();
        if u > 0.0 {
            let cap = budget / u;
            candidates.extend([
                next_down(next_down(cap)),
                next_down(cap),
                cap,
                next_up(cap),
                next_up(next_up(cap)),
            ]);
        }
    }
    candidates.retain(|c| c.is_finite() && *c >= 0.0);
    candidates.sort_by(|a, b| b.total_cmp(a));
    candidates.dedup();

    let gamma = crate::par::find_first(&candidates, |&g| is_gamma_feasible(instance, budget, g))
        .copied()
        .unwrap_or(0.0);
    Ok(result_at(instance, gamma))
}

/// Bisection on the down-closed feasible set; a cross-check for [`threshold_sweep`].
pub fn threshold_bisection(instance: &BipartiteInstance, budget: f64, tol: f64) -> Result<ThresholdResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let u_min = instance
        .edges
        .iter()
        .map(|e| e.utility)
        .fold(f64::INFINITY, f64::min);
    let max_b = breakpoints(instance).last().copied().unwrap_or(0.0);
    if !u_min.is_finite() {
        return Ok(result_at(instance, f64::MAX));
    }
    let mut hi = budget / u_min + max_b;
    let mut lo = 0.0;
    if is_gamma_feasible(instance, budget, hi) {
        return Ok(result_at(instance, hi));
    }
    while hi - lo >= tol {
        let mid = lo + (hi - lo) / 2.0;
        if mid <= lo || mid >= hi {
            break;
        }
        if is_gamma_feasible(instance, budget, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(result_at(instance, lo))
}
