//! Greedy matching and exhaustive ground-truth oracles.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BipartiteInstance, Edge, Matching};

/// Default edge-count cap for the exhaustive oracles.
pub const DEFAULT_ORACLE_CAP: usize = 22;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub value: f64,
    pub matching: Matching,
    /// Sum of bids over matched left vertices.
    pub total_cost: f64,
}

/// Scan order used by the greedy subroutine: utility descending, then left id, then right id.
fn greedy_order(a: &Edge, b: &Edge) -> Ordering {
    b.utility
        .total_cmp(&a.utility)
        .then(a.left.cmp(&b.left))
        .then(a.right.cmp(&b.right))
}

/// Textbook greedy: take edges by descending utility whenever both endpoints are free.
pub fn greedy_matching(instance: &BipartiteInstance) -> Matching {
    let mut order: Vec<&Edge> = instance.edges.iter().collect();
    order.sort_by(|a, b| greedy_order(a, b));

    let mut left_used = vec![false; instance.lefts.len()];
    let mut right_used = vec![false; instance.rights.len()];
    let mut picked = Vec::new();
    for e in order {
        if !left_used[e.left] && !right_used[e.right] {
            left_used[e.left] = true;
            right_used[e.right] = true;
            picked.push(*e);
        }
    }
    Matching::new(picked).expect("greedy never reuses an endpoint")
}

pub fn max_weight_matching_bruteforce(instance: &BipartiteInstance) -> Result<OracleResult> {
    max_weight_matching_bruteforce_capped(instance, DEFAULT_ORACLE_CAP)
}

pub fn max_weight_matching_bruteforce_capped(
    instance: &BipartiteInstance,
    cap: usize,
) -> Result<OracleResult> {
    exhaustive(instance, None, cap)
}

/// Best integral matching whose matched bids sum to at most `budget`.
///
/// Bids are treated as payments here; no truthfulness is required of the optimum.
pub fn opt_budgeted_integral(instance: &BipartiteInstance, budget: f64) -> Result<OracleResult> {
    opt_budgeted_integral_capped(instance, budget, DEFAULT_ORACLE_CAP)
}

pub fn opt_budgeted_integral_capped(
    instance: &BipartiteInstance,
    budget: f64,
    cap: usize,
) -> Result<OracleResult> {
    exhaustive(instance, Some(budget), cap)
}

struct Search<'a> {
    instance: &'a BipartiteInstance,
    budget: Option<f64>,
    /// Edge indices incident to each right vertex, by descending utility.
    by_right: Vec<Vec<usize>>,
    /// `suffix_bound[r]` = sum over rights `r..` of their best incident utility.
    suffix_bound: Vec<f64>,
    left_used: Vec<bool>,
    chosen: Vec<usize>,
    best: Option<(f64, Vec<usize>)>,
}

// Relative slack for pruning decisions taken on incrementally summed floats.
// Leaves are always re-evaluated exactly in canonical order.
const PRUNE_SLACK: f64 = 1e-9;

fn exhaustive(instance: &BipartiteInstance, budget: Option<f64>, cap: usize) -> Result<OracleResult> {
    if instance.edges.len() > cap {
        return Err(Error::OracleTooLarge {
            edges: instance.edges.len(),
            cap,
        });
    }
    let mut by_right = vec![Vec::new(); instance.rights.len()];
    for (i, e) in instance.edges.iter().enumerate() {
        by_right[e.right].push(i);
    }
    for list in &mut by_right {
        list.sort_by(|&a, &b| {
            instance.edges[b]
                .utility
                .total_cmp(&instance.edges[a].utility)
                .then(a.cmp(&b))
        });
    }
    let mut suffix_bound = vec![0.0; by_right.len() + 1];
    for r in (0..by_right.len()).rev() {
        let best = by_right[r]
            .first()
            .map_or(0.0, |&i| instance.edges[i].utility);
        suffix_bound[r] = suffix_bound[r + 1] + best;
    }

    let mut search = Search {
        instance,
        budget,
        by_right,
        suffix_bound,
        left_used: vec![false; instance.lefts.len()],
        chosen: Vec::new(),
        best: None,
    };
    search.descend(0, 0.0, 0.0);

    let (_, ids) = search.best.expect("the empty matching is always a candidate");
    let matching = Matching::new(ids.iter().map(|&i| instance.edges[i]).collect())
        .expect("search only builds matchings");
    let total_cost = matched_cost(instance, &matching);
    Ok(OracleResult {
        value: matching.utility(),
        matching,
        total_cost,
    })
}

fn matched_cost(instance: &BipartiteInstance, matching: &Matching) -> f64 {
    matching.edges().iter().map(|e| instance.cost(e.left)).fold(0.0, |acc, c| acc + c)
}

impl Search<'_> {
    fn descend(&mut self, right: usize, value: f64, cost: f64) {
        if let Some((best, _)) = &self.best {
            let bound = value + self.suffix_bound[right];
            if bound * (1.0 + PRUNE_SLACK) < *best {
                return;
            }
        }
        if right == self.by_right.len() {
            self.offer_leaf();
            return;
        }
        for k in 0..self.by_right[right].len() {
            let idx = self.by_right[right][k];
            let e = self.instance.edges[idx];
            if self.left_used[e.left] {
                continue;
            }
            let c = self.instance.cost(e.left);
            if let Some(b) = self.budget {
                if cost + c > b * (1.0 + PRUNE_SLACK) + f64::MIN_POSITIVE {
                    continue;
                }
            }
            self.left_used[e.left] = true;
            self.chosen.push(idx);
            self.descend(right + 1, value + e.utility, cost + c);
            self.chosen.pop();
            self.left_used[e.left] = false;
        }
        self.descend(right + 1, value, cost);
    }

    fn offer_leaf(&mut self) {
        let mut ids = self.chosen.clone();
        ids.sort_unstable();
        let mut edges: Vec<Edge> = ids.iter().map(|&i| self.instance.edges[i]).collect();
        edges.sort_by_key(|e| (e.left, e.right));
        let value: f64 = edges.iter().map(|e| e.utility).fold(0.0, |acc, u| acc + u);
        if let Some(b) = self.budget {
            let cost: f64 = edges.iter().map(|e| self.instance.cost(e.left)).fold(0.0, |acc, c| acc + c);
            if cost > b {
                return;
            }
        }
        let better = match &self.best {
            None => true,
            Some((best, best_ids)) => value > *best || (value == *best && ids < *best_ids),
        };
        if better {
            self.best = Some((value, ids));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;

    /// Plain enumeration of every edge subset; independent of the branch-and-bound search.
    fn subset_oracle(g: &BipartiteInstance, budget: Option<f64>) -> f64 {
        let m = g.edges.len();
        let mut best = 0.0f64;
        for mask in 0u32..(1 << m) {
            let picked: Vec<Edge> = (0..m).filter(|i| mask >> i & 1 == 1).map(|i| g.edges[i]).collect();
            let Ok(matching) = Matching::new(picked) else { continue };
            if let Some(b) = budget {
                if matched_cost(g, &matching) > b {
                    continue;
                }
            }
            best = best.max(matching.utility());
        }
        best
    }

    #[test]
    fn greedy_on_i2() {
        let g = i2();
        let m = greedy_matching(&g);
        assert_eq!(m.edges(), &[g.edges[0]]);
        assert_eq!(m.utility(), 5.0);
    }

    #[test]
    fn greedy_trivial_cases() {
        let mut g = i2();
        g.edges.clear();
        assert!(greedy_matching(&g).is_empty());
        let g = i1();
        assert_eq!(greedy_matching(&g).edges(), &g.edges[..]);
    }

    #[test]
    fn greedy_ties_prefer_lower_left_then_right() {
        let g = instance(&[0.0, 0.0], 2, &[(1, 0, 3.0), (0, 1, 3.0), (0, 0, 3.0)]);
        // Scan order (0,0), (0,1), (1,0): the first blocks both others.
        let m = greedy_matching(&g);
        assert_eq!(m.edges(), &[g.edges[2]]);
    }

    #[test]
    fn max_weight_examples() {
        let g = i2();
        let r = max_weight_matching_bruteforce(&g).unwrap();
        assert_eq!(r.value, 8.5);
        assert_eq!(r.matching.edges(), &[g.edges[1], g.edges[2]]);
        assert_eq!(r.value, subset_oracle(&g, None));

        let g = i1();
        assert_eq!(max_weight_matching_bruteforce(&g).unwrap().value, 2.0);

        let g = instance(&[1.0], 2, &[(0, 0, 3.0), (0, 1, 7.0)]);
        assert_eq!(max_weight_matching_bruteforce(&g).unwrap().value, 7.0);
    }

    #[test]
    fn budgeted_examples() {
        let g = i2();
        let r = opt_budgeted_integral(&g, 1.0).unwrap();
        assert_eq!(r.value, 5.0);
        assert_eq!(r.matching.edges(), &[g.edges[0]]);
        assert_eq!(r.total_cost, 1.0);

        let r = opt_budgeted_integral(&g, 2.0).unwrap();
        assert_eq!(r.value, 8.5);
        assert_eq!(r.matching.edges(), &[g.edges[1], g.edges[2]]);

        let r = opt_budgeted_integral(&g, 0.0).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.matching.is_empty());
    }

    #[test]
    fn oracle_cap_enforced() {
        let edges: Vec<_> = (0..23).map(|i| (i, 0, 1.0)).collect();
        let g = instance(&[1.0; 23], 1, &edges);
        assert!(matches!(
            max_weight_matching_bruteforce(&g),
            Err(Error::OracleTooLarge { edges: 23, cap: 22 })
        ));
        assert!(max_weight_matching_bruteforce_capped(&g, 30).is_ok());
    }

    #[test]
    fn oracle_tie_break_is_lexicographic_on_edge_ids() {
        // Both single edges are optimal; edge 0 wins.
        let g = instance(&[1.0, 1.0], 1, &[(1, 0, 2.0), (0, 0, 2.0)]);
        let r = max_weight_matching_bruteforce(&g).unwrap();
        assert_eq!(r.matching.edges(), &[g.edges[0]]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small_instance() -> impl Strategy<Value = BipartiteInstance> {
            (1usize..6, 1usize..4)
                .prop_flat_map(|(nl, nr)| {
                    let costs = prop::collection::vec(0u32..8, nl);
                    let cells = prop::collection::vec(prop::option::of(1u32..9), nl * nr);
                    (Just(nl), Just(nr), costs, cells)
                })
                .prop_map(|(_, nr, costs, cells)| {
                    let costs: Vec<f64> = costs.into_iter().map(|c| c as f64 / 2.0).collect();
                    let edges: Vec<_> = cells
                        .into_iter()
                        .enumerate()
                        .filter_map(|(k, u)| u.map(|u| (k / nr, k % nr, u as f64)))
                        .collect();
                    instance(&costs, nr, &edges)
                })
        }

        proptest! {
            #[test]
            fn oracles_match_subset_enumeration(g in small_instance(), budget in 0u32..10) {
                let budget = budget as f64 / 2.0;
                prop_assert_eq!(max_weight_matching_bruteforce(&g).unwrap().value, subset_oracle(&g, None));
                let r = opt_budgeted_integral(&g, budget).unwrap();
                prop_assert_eq!(r.value, subset_oracle(&g, Some(budget)));
                prop_assert!(r.total_cost <= budget);
            }

            #[test]
            fn greedy_is_maximal_and_half_optimal(g in small_instance()) {
                let m = greedy_matching(&g);
                for e in &g.edges {
                    let free = m.edge_of_left(e.left).is_none() && m.edge_of_right(e.right).is_none();
                    prop_assert!(!free, "edge ({}, {}) could extend the greedy matching", e.left, e.right);
                }
                let opt = max_weight_matching_bruteforce(&g).unwrap().value;
                prop_assert!(2.0 * m.utility() >= opt);
            }

            #[test]
            fn budgeted_opt_monotone_in_budget(g in small_instance(), b1 in 0u32..10, b2 in 0u32..10) {
                let (lo, hi) = (b1.min(b2) as f64 / 2.0, b1.max(b2) as f64 / 2.0);
                prop_assert!(opt_budgeted_integral(&g, hi).unwrap().value >= opt_budgeted_integral(&g, lo).unwrap().value);
            }
        }
    }
}
