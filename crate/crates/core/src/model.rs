//! Domain types for the budgeted bipartite matching market.
//!
//! Left vertices are sellers that arrive online and carry a bid (`cost`).
//! Right vertices are known upfront. Every edge has a strictly positive
//! utility so that the buck per bang `cost / utility` is finite.
//!
//! All floating-point comparisons in this crate are exact; nothing here
//! applies a tolerance.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeftVertex {
    pub id: usize,
    /// The bid, in currency units. The same value applies to every incident edge.
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RightVertex {
    pub id: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub left: usize,
    pub right: usize,
    pub utility: f64,
}

/// A bipartite market with a payment budget and a declared utility-spread bound.
///
/// Vertex ids are dense and equal to their position in `lefts` / `rights`.
/// The JSON form is exactly the serde representation of this struct.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BipartiteInstance {
    pub lefts: Vec<LeftVertex>,
    pub rights: Vec<RightVertex>,
    pub edges: Vec<Edge>,
    pub budget: f64,
    pub beta: f64,
}

/// Summary statistics of a validated instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub u_max: f64,
    pub u_min: f64,
    pub realized_beta: f64,
    /// `u_max` over the integral budgeted optimum; only set once an oracle value is known.
    pub large_market_ratio: Option<f64>,
}

impl InstanceStats {
    pub fn with_opt_value(mut self, opt_value: f64) -> Self {
        self.large_market_ratio = if opt_value > 0.0 {
            Some(self.u_max / opt_value)
        } else {
            None
        };
        self
    }
}

/// A permutation of left-vertex ids giving the arrival order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArrivalOrder(Vec<usize>);

impl ArrivalOrder {
    pub fn new(permutation: Vec<usize>) -> Result<Self> {
        let n = permutation.len();
        let mut seen = vec![false; n];
        for &id in &permutation {
            if id >= n || seen[id] {
                return Err(Error::InvalidArgument(format!(
                    "arrival order is not a permutation of 0..{n}"
                )));
            }
            seen[id] = true;
        }
        Ok(Self(permutation))
    }

    pub fn identity(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A set of edges with pairwise distinct left and right endpoints.
///
/// Edges are kept sorted by `(left, right)` so that equal matchings compare
/// equal and utilities are always summed in the same order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matching(Vec<Edge>);

impl Matching {
    pub fn new(mut edges: Vec<Edge>) -> Result<Self> {
        edges.sort_by_key(|e| (e.left, e.right));
        let mut lefts = HashSet::new();
        let mut rights = HashSet::new();
        for e in &edges {
            if !lefts.insert(e.left) || !rights.insert(e.right) {
                return Err(Error::InvalidArgument(format!(
                    "edge ({}, {}) shares an endpoint with another matching edge",
                    e.left, e.right
                )));
            }
        }
        Ok(Self(edges))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn edges(&self) -> &[Edge] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn utility(&self) -> f64 {
        self.0.iter().map(|e| e.utility).fold(0.0, |acc, u| acc + u)
    }

    pub fn contains_left(&self, left: usize) -> bool {
        self.0.iter().any(|e| e.left == left)
    }

    pub fn edge_of_left(&self, left: usize) -> Option<&Edge> {
        self.0.iter().find(|e| e.left == left)
    }

    pub fn edge_of_right(&self, right: usize) -> Option<&Edge> {
        self.0.iter().find(|e| e.right == right)
    }
}

impl BipartiteInstance {
    pub fn cost(&self, left: usize) -> f64 {
        self.lefts[left].cost
    }

    /// Replace the bid of one left vertex, leaving everything else untouched.
    pub fn with_cost(&self, left: usize, cost: f64) -> Result<Self> {
        if left >= self.lefts.len() {
            return Err(Error::InvalidReference(format!("left vertex {left}")));
        }
        let mut out = self.clone();
        out.lefts[left].cost = cost;
        Ok(out)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<InstanceStats> {
        validate_instance(self)
    }
}

/// `b(e) = c(e) / u(e)`.
pub fn buck_per_bang(edge: &Edge, instance: &BipartiteInstance) -> Result<f64> {
    let known = instance
        .edges
        .iter()
        .any(|e| e.left == edge.left && e.right == edge.right && e.utility == edge.utility);
    if !known {
        return Err(Error::InvalidReference(format!(
            "edge ({}, {}) is not part of the instance",
            edge.left, edge.right
        )));
    }
    Ok(edge_bpb(instance, edge))
}

/// Unchecked buck per bang for an edge already known to belong to `instance`.
#[inline]
pub(crate) fn edge_bpb(instance: &BipartiteInstance, edge: &Edge) -> f64 {
    instance.lefts[edge.left].cost / edge.utility
}

/// `G(gamma)`: drop every edge whose buck per bang strictly exceeds `gamma`.
///
/// Edges with `b(e) == gamma` survive. A NaN `gamma` keeps nothing.
pub fn prune_graph(instance: &BipartiteInstance, gamma: f64) -> BipartiteInstance {
    BipartiteInstance {
        lefts: instance.lefts.clone(),
        rights: instance.rights.clone(),
        edges: instance
            .edges
            .iter()
            .filter(|e| edge_bpb(instance, e) <= gamma)
            .copied()
            .collect(),
        budget: instance.budget,
        beta: instance.beta,
    }
}

/// Remove every edge incident to a left vertex outside `keep`.
///
/// Removed left vertices stay in `lefts` as isolated vertices so that ids
/// remain dense and identical to those of the parent instance.
pub fn restrict_to_left_subset(
    instance: &BipartiteInstance,
    keep: &[usize],
) -> Result<BipartiteInstance> {
    let mut kept = vec![false; instance.lefts.len()];
    for &id in keep {
        if id >= kept.len() {
            return Err(Error::InvalidReference(format!("left vertex {id}")));
        }
        kept[id] = true;
    }
    Ok(BipartiteInstance {
        lefts: instance.lefts.clone(),
        rights: instance.rights.clone(),
        edges: instance
            .edges
            .iter()
            .filter(|e| kept[e.left])
            .copied()
            .collect(),
        budget: instance.budget,
        beta: instance.beta,
    })
}

/// Check every structural and market assumption, reporting all violations at once.
pub fn validate_instance(instance: &BipartiteInstance) -> Result<InstanceStats> {
    let mut violations = Vec::new();

    for (position, v) in instance.lefts.iter().enumerate() {
        if v.id != position {
            violations.push(Violation::NonDenseLeftIds { position, id: v.id });
        }
        if !(v.cost.is_finite() && v.cost >= 0.0) {
            violations.push(Violation::InvalidCost { left: v.id });
        }
    }
    for (position, v) in instance.rights.iter().enumerate() {
        if v.id != position {
            violations.push(Violation::NonDenseRightIds { position, id: v.id });
        }
    }
    if !(instance.budget.is_finite() && instance.budget > 0.0) {
        violations.push(Violation::InvalidBudget);
    }
    if !(instance.beta.is_finite() && instance.beta >= 1.0) {
        violations.push(Violation::InvalidBeta);
    }

    if instance.edges.is_empty() {
        violations.push(Violation::NoEdges);
    }

    let mut seen = HashSet::new();
    let mut u_max = f64::NEG_INFINITY;
    let mut u_min = f64::INFINITY;
    for e in &instance.edges {
        if e.left >= instance.lefts.len() || e.right >= instance.rights.len() {
            violations.push(Violation::DanglingEdge {
                left: e.left,
                right: e.right,
            });
        }
        if !seen.insert((e.left, e.right)) {
            violations.push(Violation::DuplicateEdge {
                left: e.left,
                right: e.right,
            });
        }
        if !(e.utility.is_finite() && e.utility > 0.0) {
            violations.push(Violation::NonPositiveUtility {
                left: e.left,
                right: e.right,
            });
            continue;
        }
        u_max = u_max.max(e.utility);
        u_min = u_min.min(e.utility);
    }

    let realized_beta = u_max / u_min;
    if u_min.is_finite() && instance.beta.is_finite() && realized_beta > instance.beta {
        violations.push(Violation::BetaViolated {
            realized: realized_beta,
            declared: instance.beta,
        });
    }

    if violations.is_empty() {
        Ok(InstanceStats {
            u_max,
            u_min,
            realized_beta,
            large_market_ratio: None,
        })
    } else {
        Err(Error::Validation(violations))
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn instance(costs: &[f64], n_right: usize, edges: &[(usize, usize, f64)]) -> BipartiteInstance {
        BipartiteInstance {
            lefts: costs
                .iter()
                .enumerate()
                .map(|(id, &cost)| LeftVertex { id, cost })
                .collect(),
            rights: (0..n_right).map(|id| RightVertex { id }).collect(),
            edges: edges
                .iter()
                .map(|&(left, right, utility)| Edge {
                    left,
                    right,
                    utility,
                })
                .collect(),
            budget: 1.0,
            beta: 1e9,
        }
    }

    /// Single edge, u = 2, c = 1, B = 4.
    pub fn i1() -> BipartiteInstance {
        let mut g = instance(&[1.0], 1, &[(0, 0, 2.0)]);
        g.budget = 4.0;
        g.beta = 1.0;
        g
    }

    /// Two lefts, two rights, three edges; unit costs.
    pub fn i2() -> BipartiteInstance {
        let mut g = instance(&[1.0, 1.0], 2, &[(0, 0, 5.0), (0, 1, 4.0), (1, 0, 4.5)]);
        g.budget = 2.0;
        g.beta = 1.25;
        g
    }

    /// Four lefts on a single right vertex; beta = 3, B = 9.
    pub fn i3() -> BipartiteInstance {
        let mut g = instance(
            &[1.0, 2.0, 4.0, 1.0],
            1,
            &[(0, 0, 2.0), (1, 0, 2.0), (2, 0, 3.0), (3, 0, 1.0)],
        );
        g.budget = 9.0;
        g.beta = 3.0;
        g
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;

    #[test]
    fn empty_matching_utility_is_positive_zero() {
        // Serialises as 0.0, not -0.0.
        assert!(Matching::empty().utility().is_sign_positive());
    }

    #[test]
    fn buck_per_bang_examples() {
        let g = instance(&[1.0, 0.0, 4.0], 1, &[(0, 0, 2.0), (1, 0, 5.0), (2, 0, 3.0)]);
        assert_eq!(buck_per_bang(&g.edges[0], &g).unwrap(), 0.5);
        assert_eq!(buck_per_bang(&g.edges[1], &g).unwrap(), 0.0);
        assert_eq!(buck_per_bang(&g.edges[2], &g).unwrap(), 4.0 / 3.0);
    }

    #[test]
    fn buck_per_bang_unknown_edge() {
        let g = i1();
        let stray = Edge {
            left: 0,
            right: 1,
            utility: 2.0,
        };
        assert!(matches!(
            buck_per_bang(&stray, &g),
            Err(Error::InvalidReference(_))
        ));
    }

    #[test]
    fn prune_extremes() {
        let g = i2();
        let bs: Vec<f64> = g.edges.iter().map(|e| edge_bpb(&g, e)).collect();
        let max = bs.iter().cloned().fold(0.0, f64::max);
        let min = bs.iter().cloned().fold(f64::INFINITY, f64::min);
        assert_eq!(prune_graph(&g, max).edges, g.edges);
        assert!(prune_graph(&g, min * 0.99).edges.is_empty());
        // b = {0.2, 0.25, 0.2222}; 0.23 keeps the first and third.
        let pruned = prune_graph(&g, 0.23);
        assert_eq!(pruned.edges, vec![g.edges[0], g.edges[2]]);
        assert_eq!(pruned.lefts, g.lefts);
        assert_eq!(pruned.rights, g.rights);
    }

    #[test]
    fn prune_keeps_ties() {
        let g = i1();
        assert_eq!(prune_graph(&g, 0.5).edges.len(), 1);
        assert!(prune_graph(&g, f64::from_bits(0.5f64.to_bits() - 1)).edges.is_empty());
    }

    #[test]
    fn restrict_examples() {
        let g = i3();
        assert_eq!(restrict_to_left_subset(&g, &[0, 1, 2, 3]).unwrap(), g);
        assert!(restrict_to_left_subset(&g, &[]).unwrap().edges.is_empty());
        let obs = restrict_to_left_subset(&g, &[0, 1]).unwrap();
        assert_eq!(obs.edges, vec![g.edges[0], g.edges[1]]);
        assert!(matches!(
            restrict_to_left_subset(&g, &[7]),
            Err(Error::InvalidReference(_))
        ));
    }

    #[test]
    fn validate_examples() {
        let mut g = instance(&[1.0, 1.0], 1, &[(0, 0, 2.0), (1, 0, 3.0)]);
        g.beta = 3.0;
        let stats = validate_instance(&g).unwrap();
        assert_eq!(stats.realized_beta, 1.5);
        assert_eq!(stats.u_max, 3.0);
        assert_eq!(stats.u_min, 2.0);

        g.edges[1].utility = 5.0;
        g.edges[0].utility = 1.0;
        let err = validate_instance(&g).unwrap_err();
        assert!(err.to_string().contains("beta violated"), "{err}");

        g.edges.clear();
        let err = validate_instance(&g).unwrap_err();
        assert!(err.to_string().contains("no edges"), "{err}");
    }

    #[test]
    fn validate_lists_every_violation() {
        let mut g = instance(&[-1.0, 1.0], 1, &[(0, 0, 2.0), (0, 0, 2.0), (1, 3, 0.0)]);
        g.budget = 0.0;
        match validate_instance(&g) {
            Err(Error::Validation(v)) => {
                assert!(v.contains(&Violation::InvalidCost { left: 0 }));
                assert!(v.contains(&Violation::DuplicateEdge { left: 0, right: 0 }));
                assert!(v.contains(&Violation::DanglingEdge { left: 1, right: 3 }));
                assert!(v.contains(&Violation::NonPositiveUtility { left: 1, right: 3 }));
                assert!(v.contains(&Violation::InvalidBudget));
            }
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn matching_rejects_shared_endpoints() {
        let e = |l, r| Edge {
            left: l,
            right: r,
            utility: 1.0,
        };
        assert!(Matching::new(vec![e(0, 0), e(0, 1)]).is_err());
        assert!(Matching::new(vec![e(0, 0), e(1, 0)]).is_err());
        let m = Matching::new(vec![e(1, 0), e(0, 1)]).unwrap();
        assert_eq!(m.edges()[0].left, 0);
        assert_eq!(m.utility(), 2.0);
    }

    #[test]
    fn arrival_order_must_be_permutation() {
        assert!(ArrivalOrder::new(vec![1, 0, 2]).is_ok());
        assert!(ArrivalOrder::new(vec![1, 1, 2]).is_err());
        assert!(ArrivalOrder::new(vec![0, 3]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let g = i3();
        let back = BipartiteInstance::from_json(&g.to_json().unwrap()).unwrap();
        assert_eq!(back, g);
    }
}
