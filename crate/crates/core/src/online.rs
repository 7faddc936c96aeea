//! The online mechanism and the sample-and-price baseline.
//!
//! Left vertices arrive in random order. The first half is only observed: the
//! threshold mechanism runs on it with the reduced budget `B / beta`, giving a
//! threshold `gamma_half` and a value `v(r)` for every right vertex it matched.
//! Each later arrival drops its edges with buck per bang above `gamma_half`,
//! picks its best surviving edge that beats the value of the right vertex, and
//! is paid `beta * gamma_half * v(r)` if accepted.

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{edge_bpb, restrict_to_left_subset, ArrivalOrder, BipartiteInstance, Edge, Matching};
use crate::offline::greedy_matching;
use crate::rng;
use crate::threshold::{matching_at, threshold_sweep};

/// How the decision phase chooses among right vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Argmax over every eligible right vertex; the arrival is rejected if the winner is taken.
    LiteralArgmax,
    /// Argmax over eligible right vertices not yet matched online.
    #[default]
    UnmatchedRestricted,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" | "literal-argmax" => Ok(Variant::LiteralArgmax),
            "restricted" | "unmatched-restricted" => Ok(Variant::UnmatchedRestricted),
            other => Err(Error::InvalidArgument(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MechanismConfig {
    pub budget: f64,
    pub beta: f64,
    pub variant: Variant,
    pub seed: u64,
}

impl MechanismConfig {
    pub fn new(budget: f64, beta: f64) -> Self {
        Self {
            budget,
            beta,
            variant: Variant::default(),
            seed: 0,
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    fn check(&self) -> Result<()> {
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(Error::InvalidArgument(format!("budget {} must be positive", self.budget)));
        }
        if !(self.beta.is_finite() && self.beta >= 1.0) {
            return Err(Error::InvalidArgument(format!("beta {} must be at least 1", self.beta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RightVertexValue {
    pub right: usize,
    pub value: f64,
    /// False when the observation matching left this right vertex unmatched.
    pub eligible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OnlineOutcome {
    pub matching: Matching,
    /// Payment per left id; zero for unmatched vertices.
    pub payments: Vec<f64>,
    pub gamma_half: f64,
    pub observation_matching: Matching,
    pub values: Vec<RightVertexValue>,
    pub arrival: ArrivalOrder,
}

impl OnlineOutcome {
    pub fn payment(&self, left: usize) -> f64 {
        self.payments[left]
    }

    pub fn total_payment(&self) -> f64 {
        self.payments.iter().fold(0.0, |acc, p| acc + p)
    }

    pub fn observation_size(&self) -> usize {
        self.arrival.len() / 2
    }

    pub fn is_matched(&self, left: usize) -> bool {
        self.matching.contains_left(left)
    }
}

/// Seeded Fisher-Yates shuffle of `0..n`.
pub fn make_arrival_order(n: usize, seed: u64) -> Result<ArrivalOrder> {
    if n == 0 {
        return Err(Error::InvalidArgument("arrival order needs at least one vertex".into()));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut rng::stream(seed, rng::STREAM_PERMUTATION));
    ArrivalOrder::new(perm)
}

/// Payment for an accepted left vertex.
#[inline]
pub fn payment_for(beta: f64, gamma_half: f64, value: f64) -> f64 {
    beta * gamma_half * value
}

/// Exact test of `sum(values) <= bound` with no rounding in the sum.
pub fn exact_sum_le(values: impl IntoIterator<Item = f64>, bound: f64) -> bool {
    let to_rat = |x: f64| BigRational::from_float(x).expect("finite value");
    let total = values
        .into_iter()
        .fold(BigRational::from_integer(BigInt::from(0)), |acc, v| acc + to_rat(v));
    total <= to_rat(bound)
}

/// Step `gamma` down until the worst-case total payment fits the budget in exact arithmetic.
///
/// The threshold constraint `gamma * u(M) <= B / beta` only guarantees the
/// budget up to floating-point rounding of the individual payments. Each step
/// re-runs greedy at the lowered threshold, so the pair stays consistent.
fn budget_safe_threshold(
    observed: &BipartiteInstance,
    mut gamma: f64,
    mut matching: Matching,
    config: &MechanismConfig,
) -> (f64, Matching) {
    let mut step = 1u64;
    loop {
        let worst = matching
            .edges()
            .iter()
            .map(|e| payment_for(config.beta, gamma, e.utility));
        if gamma == 0.0 || exact_sum_le(worst, config.budget) {
            return (gamma, matching);
        }
        gamma = f64::from_bits(gamma.to_bits().saturating_sub(step)).max(0.0);
        step = step.saturating_mul(2);
        matching = matching_at(observed, gamma);
    }
}

fn edges_by_left(instance: &BipartiteInstance) -> Vec<Vec<Edge>> {
    let mut out = vec![Vec::new(); instance.lefts.len()];
    for e in &instance.edges {
        out[e.left].push(*e);
    }
    out
}

fn check_arrival(instance: &BipartiteInstance, arrival: &ArrivalOrder) -> Result<()> {
    if arrival.len() != instance.lefts.len() {
        return Err(Error::InvalidArgument(format!(
            "arrival order has {} entries for {} left vertices",
            arrival.len(),
            instance.lefts.len()
        )));
    }
    Ok(())
}

pub fn run_on(
    instance: &BipartiteInstance,
    arrival: &ArrivalOrder,
    config: &MechanismConfig,
) -> Result<OnlineOutcome> {
    config.check()?;
    check_arrival(instance, arrival)?;
    let n = instance.lefts.len();
    if n < 2 {
        return Err(Error::Degenerate(format!("{n} left vertices; at least 2 required")));
    }

    let half = n / 2;
    let order = arrival.as_slice();
    let observed = restrict_to_left_subset(instance, &order[..half])?;
    let offline = threshold_sweep(&observed, config.budget / config.beta)?;
    let (gamma_half, observation_matching) =
        budget_safe_threshold(&observed, offline.gamma, offline.matching, config);

    let values: Vec<RightVertexValue> = instance
        .rights
        .iter()
        .map(|r| match observation_matching.edge_of_right(r.id) {
            Some(e) => RightVertexValue {
                right: r.id,
                value: e.utility,
                eligible: true,
            },
            None => RightVertexValue {
                right: r.id,
                value: 0.0,
                eligible: false,
            },
        })
        .collect();

    let adjacency = edges_by_left(instance);
    let mut right_taken = vec![false; instance.rights.len()];
    let mut payments = vec![0.0; n];
    let mut accepted = Vec::new();

    for &left in &order[half..] {
        let mut best: Option<Edge> = None;
        for e in &adjacency[left] {
            let value = &values[e.right];
            if !value.eligible || edge_bpb(instance, e) > gamma_half || e.utility <= value.value {
                continue;
            }
            if config.variant == Variant::UnmatchedRestricted && right_taken[e.right] {
                continue;
            }
            let wins = match best {
                None => true,
                Some(b) => e.utility > b.utility || (e.utility == b.utility && e.right < b.right),
            };
            if wins {
                best = Some(*e);
            }
        }
        let Some(e) = best else { continue };
        if right_taken[e.right] {
            // Literal variant: the chosen right vertex is gone, so this arrival is rejected.
            continue;
        }
        right_taken[e.right] = true;
        payments[left] = payment_for(config.beta, gamma_half, values[e.right].value);
        accepted.push(e);
    }

    Ok(OnlineOutcome {
        matching: Matching::new(accepted).expect("each right vertex is taken at most once"),
        payments,
        gamma_half,
        observation_matching,
        values,
        arrival: arrival.clone(),
    })
}

/// Sample-and-price: greedy on a binomial-size prefix sets values, later arrivals
/// take their best edge whose utility reaches the value, if its right vertex is free.
pub fn sample_and_price(
    instance: &BipartiteInstance,
    arrival: &ArrivalOrder,
    p: f64,
    seed: u64,
) -> Result<Matching> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("probability {p} outside [0, 1]")));
    }
    check_arrival(instance, arrival)?;
    let n = instance.lefts.len();
    let binomial = Binomial::new(n as u64, p).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let k = binomial.sample(&mut rng::stream(seed, rng::STREAM_BINOMIAL)) as usize;

    let order = arrival.as_slice();
    let sample = greedy_matching(&restrict_to_left_subset(instance, &order[..k])?);
    let value = |r: usize| sample.edge_of_right(r).map_or(0.0, |e| e.utility);

    let adjacency = edges_by_left(instance);
    let mut right_taken = vec![false; instance.rights.len()];
    let mut picked = Vec::new();
    for &left in &order[k..] {
        let best = adjacency[left]
            .iter()
            .filter(|e| e.utility >= value(e.right))
            .fold(None::<Edge>, |best, e| match best {
                Some(b) if b.utility > e.utility || (b.utility == e.utility && b.right < e.right) => Some(b),
                _ => Some(*e),
            });
        if let Some(e) = best {
            if !right_taken[e.right] {
                right_taken[e.right] = true;
                picked.push(e);
            }
        }
    }
    Matching::new(picked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;

    fn i3_config() -> MechanismConfig {
        MechanismConfig::new(9.0, 3.0)
    }

    #[test]
    fn i3_walkthrough() {
        let g = i3();
        let out = run_on(&g, &ArrivalOrder::identity(4), &i3_config()).unwrap();
        assert_eq!(out.gamma_half, 1.5);
        assert_eq!(out.observation_matching.edges(), &[g.edges[0]]);
        assert_eq!(
            out.values,
            vec![RightVertexValue {
                right: 0,
                value: 2.0,
                eligible: true
            }]
        );
        assert_eq!(out.matching.edges(), &[g.edges[2]]);
        assert_eq!(out.payments, vec![0.0, 0.0, 9.0, 0.0]);
        assert_eq!(out.total_payment(), 9.0);
    }

    #[test]
    fn i3_overbid_is_pruned() {
        let g = i3().with_cost(2, 10.0).unwrap();
        let out = run_on(&g, &ArrivalOrder::identity(4), &i3_config()).unwrap();
        assert!(out.matching.is_empty());
        assert!(out.payments.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn everything_pruned_means_no_payments() {
        let mut g = i3();
        g.lefts[2].cost = 100.0;
        g.lefts[3].cost = 100.0;
        let out = run_on(&g, &ArrivalOrder::identity(4), &i3_config()).unwrap();
        assert!(out.matching.is_empty());
        assert_eq!(out.total_payment(), 0.0);
    }

    /// Straightforward re-implementation used only as a cross-check on I3-shaped inputs.
    fn naive_single_right(costs: &[f64], utils: &[f64], budget: f64, beta: f64) -> (f64, Option<usize>, f64) {
        let half = costs.len() / 2;
        let reduced = budget / beta;
        // Threshold on the observed prefix, single right vertex: greedy takes the best edge in G(gamma).
        let mut best_gamma = 0.0f64;
        let mut cands = vec![0.0];
        for i in 0..half {
            let b = costs[i] / utils[i];
            cands.push(b);
        }
        let greedy_u = |g: f64| {
            (0..half)
                .filter(|&i| costs[i] / utils[i] <= g)
                .map(|i| utils[i])
                .fold(0.0, f64::max)
        };
        for &b in cands.clone().iter() {
            let u = greedy_u(b);
            if u > 0.0 {
                cands.push(reduced / u);
            }
        }
        for c in cands {
            if c * greedy_u(c) <= reduced {
                best_gamma = best_gamma.max(c);
            }
        }
        let v = greedy_u(best_gamma);
        for i in half..costs.len() {
            if v > 0.0 && costs[i] / utils[i] <= best_gamma && utils[i] > v {
                return (best_gamma, Some(i), beta * best_gamma * v);
            }
        }
        (best_gamma, None, 0.0)
    }

    #[test]
    fn i3_matches_naive_reimplementation() {
        let g = i3();
        let costs: Vec<f64> = g.lefts.iter().map(|l| l.cost).collect();
        let utils: Vec<f64> = g.edges.iter().map(|e| e.utility).collect();
        let (gamma, winner, pay) = naive_single_right(&costs, &utils, 9.0, 3.0);
        let out = run_on(&g, &ArrivalOrder::identity(4), &i3_config()).unwrap();
        assert_eq!(out.gamma_half, gamma);
        assert_eq!(winner, Some(2));
        assert_eq!(out.payment(2), pay);
    }

    #[test]
    fn degenerate_and_mismatched_inputs() {
        let g = i1();
        assert!(matches!(
            run_on(&g, &ArrivalOrder::identity(1), &MechanismConfig::new(4.0, 1.0)),
            Err(Error::Degenerate(_))
        ));
        assert!(run_on(&i3(), &ArrivalOrder::identity(3), &i3_config()).is_err());
        assert!(run_on(&i3(), &ArrivalOrder::identity(4), &MechanismConfig::new(0.0, 3.0)).is_err());
    }

    #[test]
    fn literal_variant_rejects_when_argmax_taken() {
        // Observation: lefts 0,1 set values 1 on both rights. Decision: left 2 takes r0 (u=3),
        // left 3 prefers r0 (u=2.5) over r1 (u=2): literal rejects, restricted takes r1.
        let mut g = instance(
            &[0.1, 0.1, 0.1, 0.1],
            2,
            &[(0, 0, 1.0), (1, 1, 1.0), (2, 0, 3.0), (3, 0, 2.5), (3, 1, 2.0)],
        );
        g.beta = 3.0;
        let cfg = MechanismConfig::new(100.0, 3.0);
        let lit = run_on(&g, &ArrivalOrder::identity(4), &cfg.with_variant(Variant::LiteralArgmax)).unwrap();
        let res = run_on(&g, &ArrivalOrder::identity(4), &cfg).unwrap();
        assert_eq!(lit.matching.len(), 1);
        assert!(!lit.is_matched(3));
        assert_eq!(res.matching.len(), 2);
        assert_eq!(res.matching.edge_of_left(3).unwrap().right, 1);
    }

    #[test]
    fn arrival_order_examples() {
        assert_eq!(make_arrival_order(1, 99).unwrap().as_slice(), &[0]);
        assert_eq!(make_arrival_order(9, 5).unwrap(), make_arrival_order(9, 5).unwrap());
        assert!(make_arrival_order(0, 1).is_err());
    }

    #[test]
    fn arrival_order_is_uniform() {
        // Each (position, vertex) cell should be hit with frequency 1/5.
        let n = 5;
        let trials = 100_000u64;
        let mut counts = vec![[0u64; 5]; n];
        for seed in 0..trials {
            let order = make_arrival_order(n, seed).unwrap();
            for (pos, &v) in order.as_slice().iter().enumerate() {
                counts[pos][v] += 1;
            }
        }
        let p = 1.0 / n as f64;
        let mean = trials as f64 * p;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        let mut chi2 = 0.0;
        for row in &counts {
            for &c in row {
                assert!((c as f64 - mean).abs() <= 4.0 * sigma, "count {c} vs {mean}");
                chi2 += (c as f64 - mean).powi(2) / mean;
            }
        }
        // Permutation-matrix tables: (n-1)/n * chi2 is approximately chi-square with
        // (n-1)^2 = 16 degrees of freedom; 99.9th percentile is 39.25.
        let scaled = chi2 * (n as f64 - 1.0) / n as f64;
        assert!(scaled < 39.25, "chi2 {scaled}");
    }

    #[test]
    fn sample_and_price_examples() {
        let g = i2();
        let order = ArrivalOrder::identity(2);
        assert!(sample_and_price(&g, &order, 1.0, 3).unwrap().is_empty());
        let m = sample_and_price(&g, &order, 0.0, 3).unwrap();
        assert_eq!(m.edges(), &[g.edges[0]]);
        let g = i1();
        let m = sample_and_price(&g, &ArrivalOrder::identity(1), 0.0, 0).unwrap();
        assert_eq!(m.edges(), &g.edges[..]);
        assert!(sample_and_price(&g, &ArrivalOrder::identity(1), 1.5, 0).is_err());
    }

    #[test]
    fn exact_sum_detects_rounding() {
        // 0.1 + 0.2 rounds to 0.30000000000000004 but the exact sum is below that double.
        assert!(exact_sum_le([0.1, 0.2], 0.1 + 0.2));
        assert!(!exact_sum_le([0.1, 0.2], 0.3));
        assert!(exact_sum_le([], 0.0));
    }
}
