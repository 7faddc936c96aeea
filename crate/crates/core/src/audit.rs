//! Executable checks of the online mechanism's economic guarantees.
//!
//! Budget feasibility and individual rationality are checked exactly on a
//! single outcome. Allocation monotonicity and overbid rejection re-run the
//! mechanism with one bid changed. [`deviation_scan`] goes further and
//! searches a bid grid for strictly profitable misreports.

use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ArrivalOrder, BipartiteInstance, Edge};
use crate::offline::{opt_budgeted_integral_capped, DEFAULT_ORACLE_CAP};
use crate::online::{exact_sum_le, make_arrival_order, run_on, MechanismConfig, OnlineOutcome, Variant};
use crate::par::{self, compensated_sum, Exec};

/// Default bid multipliers for the monotonicity probe.
pub const DEFAULT_MONOTONICITY_GRID: [f64; 6] = [0.1, 0.25, 0.5, 0.75, 0.9, 1.0];
/// Default absolute overbid increments.
pub const DEFAULT_OVERBID_EPSILONS: [f64; 4] = [1e-6, 1e-3, 0.1, 1.0];
/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationFinding {
    pub left: usize,
    pub true_cost: f64,
    pub reported_bid: f64,
    pub truthful_utility: f64,
    pub deviating_utility: f64,
    pub gain: f64,
    /// Right vertex won under the misreport.
    pub won_right: usize,
    /// `gamma_half * u(e)` for the edge won under the misreport.
    pub pruning_threshold: f64,
    /// Payment received under the misreport.
    pub payment: f64,
}

impl DeviationFinding {
    /// An under-bid by a vertex whose true cost lies strictly between the
    /// pruning threshold of the won edge and the payment for it.
    pub fn is_classified_underbid(&self, gamma_half: f64, won_utility: f64) -> bool {
        let rat = |x: f64| BigRational::from_float(x).expect("finite");
        let threshold = rat(gamma_half) * rat(won_utility);
        self.reported_bid < self.true_cost && threshold < rat(self.true_cost) && self.true_cost < self.payment
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityViolation {
    pub left: usize,
    pub multiplier: f64,
    pub original_bid: f64,
    pub lowered_bid: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverbidViolation {
    pub left: usize,
    pub payment: f64,
    pub bid: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityCheck {
    pub ok: bool,
    pub probes: usize,
    pub violations: Vec<MonotonicityViolation>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OverbidCheck {
    pub ok: bool,
    pub probes: usize,
    pub violations: Vec<OverbidViolation>,
}

/// Aggregate verdicts over one or more arrival orders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub variant: Variant,
    pub runs: usize,
    pub budget_ok: bool,
    pub ir_ok: bool,
    pub monotonicity_ok: bool,
    pub overbid_rejection_ok: bool,
    /// Every finding satisfies the under-bid classification.
    pub classification_ok: bool,
    pub findings: Vec<DeviationFinding>,
    pub monotonicity_violations: Vec<MonotonicityViolation>,
    pub overbid_violations: Vec<OverbidViolation>,
    /// Seeds of the arrival orders that produced a check failure or finding.
    pub reproducer_seeds: Vec<u64>,
}

impl AuditReport {
    /// Pass criterion: budget, IR and overbid rejection always; monotonicity only
    /// for the restricted variant, where it is expected to hold.
    pub fn passed(&self) -> bool {
        let mono = self.monotonicity_ok || self.variant == Variant::LiteralArgmax;
        self.budget_ok && self.ir_ok && self.overbid_rejection_ok && self.classification_ok && mono
    }
}

/// Budget feasibility (exact sum of payments) and individual rationality.
pub fn check_budget_and_ir(
    outcome: &OnlineOutcome,
    instance: &BipartiteInstance,
    budget: f64,
) -> Result<(bool, bool)> {
    if outcome.payments.len() != instance.lefts.len() {
        return Err(Error::InvalidReference(format!(
            "outcome has {} payments for {} left vertices",
            outcome.payments.len(),
            instance.lefts.len()
        )));
    }
    for e in outcome.matching.edges() {
        if e.left >= instance.lefts.len() || e.right >= instance.rights.len() {
            return Err(Error::InvalidReference(format!(
                "outcome edge ({}, {}) not in instance",
                e.left, e.right
            )));
        }
    }
    let budget_ok = exact_sum_le(outcome.payments.iter().copied(), budget);
    let ir_ok = outcome
        .matching
        .edges()
        .iter()
        .all(|e| outcome.payments[e.left] >= instance.cost(e.left));
    Ok((budget_ok, ir_ok))
}

fn decision_half_matched(outcome: &OnlineOutcome) -> Vec<Edge> {
    outcome.matching.edges().to_vec()
}

/// Lowering a winner's bid by any multiplier in `probe_grid` must keep it matched.
pub fn check_allocation_monotonicity(
    instance: &BipartiteInstance,
    arrival: &ArrivalOrder,
    config: &MechanismConfig,
    probe_grid: &[f64],
) -> Result<MonotonicityCheck> {
    if let Some(m) = probe_grid.iter().find(|m| !(**m > 0.0 && **m <= 1.0)) {
        return Err(Error::InvalidArgument(format!("multiplier {m} outside (0, 1]")));
    }
    let base = run_on(instance, arrival, config)?;
    let probes: Vec<(usize, f64)> = decision_half_matched(&base)
        .iter()
        .flat_map(|e| probe_grid.iter().map(move |&m| (e.left, m)))
        .collect();
    let results = par::map_slice(Exec::default(), &probes, |&(left, m)| {
        let original = instance.cost(left);
        let lowered = m * original;
        let out = run_on(&instance.with_cost(left, lowered)?, arrival, config)?;
        Ok::<_, Error>((!out.is_matched(left)).then_some(MonotonicityViolation {
            left,
            multiplier: m,
            original_bid: original,
            lowered_bid: lowered,
        }))
    });
    let mut violations = Vec::new();
    for r in results {
        violations.extend(r?);
    }
    Ok(MonotonicityCheck {
        ok: violations.is_empty(),
        probes: probes.len(),
        violations,
    })
}

/// A winner that bids strictly above its payment must lose.
pub fn check_overbid_rejection(
    instance: &BipartiteInstance,
    arrival: &ArrivalOrder,
    config: &MechanismConfig,
    epsilons: &[f64],
) -> Result<OverbidCheck> {
    if let Some(eps) = epsilons.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::InvalidArgument(format!("epsilon {eps} must be positive")));
    }
    let base = run_on(instance, arrival, config)?;
    let probes: Vec<(usize, f64)> = decision_half_matched(&base)
        .iter()
        .flat_map(|e| epsilons.iter().map(move |&eps| (e.left, eps)))
        .collect();
    let results = par::map_slice(Exec::default(), &probes, |&(left, eps)| {
        let payment = base.payment(left);
        let mut bid = payment + eps;
        if bid <= payment {
            bid = f64::from_bits(payment.to_bits() + 1);
        }
        let out = run_on(&instance.with_cost(left, bid)?, arrival, config)?;
        Ok::<_, Error>(out.is_matched(left).then_some(OverbidViolation { left, payment, bid }))
    });
    let mut violations = Vec::new();
    for r in results {
        violations.extend(r?);
    }
    Ok(OverbidCheck {
        ok: violations.is_empty(),
        probes: probes.len(),
        violations,
    })
}

fn next_up(x: f64) -> f64 {
    if x >= 0.0 {
        f64::from_bits(x.to_bits() + 1)
    } else {
        x
    }
}

fn next_down(x: f64) -> f64 {
    if x > 0.0 {
        f64::from_bits(x.to_bits() - 1)
    } else {
        x
    }
}

/// Reported bids probed for one left vertex: a geometric grid on `(0, upper]`
/// plus every pruning breakpoint `gamma_half * u(e)` and its ulp neighbours.
pub fn bid_grid(
    instance: &BipartiteInstance,
    left: usize,
    gamma_half: f64,
    upper: f64,
    resolution: usize,
) -> Vec<f64> {
    const DECADES: f64 = 12.0; // grid spans upper / 2^12 ..= upper
    let mut grid: Vec<f64> = (0..resolution)
        .map(|k| {
            let t = k as f64 / (resolution - 1) as f64;
            upper * (-(DECADES * (1.0 - t)) * std::f64::consts::LN_2).exp()
        })
        .collect();
    grid.push(upper);
    for e in instance.edges.iter().filter(|e| e.left == left) {
        let b = gamma_half * e.utility;
        grid.extend([next_down(b), b, next_up(b)]);
    }
    grid.retain(|&b| b > 0.0 && b <= upper && b.is_finite());
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

/// Search for strictly profitable misreports by decision-half vertices.
///
/// Each vertex's instance cost is taken as its true cost; arrival order and
/// all other bids stay fixed.
pub fn deviation_scan(
    instance: &BipartiteInstance,
    arrival: &ArrivalOrder,
    config: &MechanismConfig,
    bid_grid_resolution: usize,
) -> Result<Vec<DeviationFinding>> {
    if bid_grid_resolution < 2 {
        return Err(Error::InvalidArgument("bid grid resolution must be at least 2".into()));
    }
    let truthful = run_on(instance, arrival, config)?;
    let u_max = instance.edges.iter().map(|e| e.utility).fold(0.0, f64::max);
    let upper = config.beta * truthful.gamma_half * u_max;
    // No right vertex is eligible when the observation half matched nothing.
    if truthful.observation_matching.is_empty() || !(upper > 0.0 && upper.is_finite()) {
        return Ok(Vec::new());
    }
    let half = truthful.observation_size();

    let mut probes = Vec::new();
    for &left in &arrival.as_slice()[half..] {
        for bid in bid_grid(instance, left, truthful.gamma_half, upper, bid_grid_resolution) {
            probes.push((left, bid));
        }
    }

    let results = par::map_slice(Exec::default(), &probes, |&(left, bid)| {
        let true_cost = instance.cost(left);
        let truthful_utility = if truthful.is_matched(left) {
            truthful.payment(left) - true_cost
        } else {
            0.0
        };
        let out = run_on(&instance.with_cost(left, bid)?, arrival, config)?;
        let Some(won) = out.matching.edge_of_left(left).copied() else {
            return Ok(None);
        };
        let payment = out.payment(left);
        let deviating_utility = payment - true_cost;
        let gain = deviating_utility - truthful_utility;
        Ok::<_, Error>((gain > 0.0).then_some(DeviationFinding {
            left,
            true_cost,
            reported_bid: bid,
            truthful_utility,
            deviating_utility,
            gain,
            won_right: won.right,
            pruning_threshold: out.gamma_half * won.utility,
            payment,
        }))
    });
    let mut findings = Vec::new();
    for r in results {
        findings.extend(r?);
    }
    Ok(findings)
}

/// The most profitable finding per left vertex, lowest bid first on ties.
pub fn best_per_vertex(findings: &[DeviationFinding]) -> Vec<DeviationFinding> {
    let mut best: Vec<DeviationFinding> = Vec::new();
    for f in findings {
        match best.iter_mut().find(|b| b.left == f.left) {
            Some(b) if f.gain > b.gain => *b = f.clone(),
            Some(_) => {}
            None => best.push(f.clone()),
        }
    }
    best.sort_by_key(|f| f.left);
    best
}

/// Check the classification of every finding against the truthful run it came from.
pub fn findings_classified(
    instance: &BipartiteInstance,
    arrival: &ArrivalOrder,
    config: &MechanismConfig,
    findings: &[DeviationFinding],
) -> Result<bool> {
    if findings.is_empty() {
        return Ok(true);
    }
    let truthful = run_on(instance, arrival, config)?;
    Ok(findings.iter().all(|f| {
        let won = instance
            .edges
            .iter()
            .find(|e| e.left == f.left && e.right == f.won_right)
            .expect("finding references an instance edge");
        f.gain > 0.0 && f.is_classified_underbid(truthful.gamma_half, won.utility)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AuditOptions {
    pub permutations: usize,
    pub grid_resolution: usize,
    pub exec: Exec,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            permutations: 1,
            grid_resolution: 32,
            exec: Exec::default(),
        }
    }
}

/// Run every check over `permutations` arrival orders seeded `seed, seed + 1, ...`.
pub fn audit(
    instance: &BipartiteInstance,
    config: &MechanismConfig,
    seed: u64,
    options: &AuditOptions,
) -> Result<AuditReport> {
    if options.permutations == 0 {
        return Err(Error::InvalidArgument("audit needs at least one permutation".into()));
    }
    let n = instance.lefts.len();
    struct PerRun {
        seed: u64,
        budget_ok: bool,
        ir_ok: bool,
        classified: bool,
        mono: MonotonicityCheck,
        overbid: OverbidCheck,
        findings: Vec<DeviationFinding>,
    }
    let runs = par::map_indexed(options.exec, options.permutations, |i| {
        let seed = seed.wrapping_add(i as u64);
        let arrival = make_arrival_order(n, seed)?;
        let outcome = run_on(instance, &arrival, config)?;
        let (budget_ok, ir_ok) = check_budget_and_ir(&outcome, instance, config.budget)?;
        let mono = check_allocation_monotonicity(instance, &arrival, config, &DEFAULT_MONOTONICITY_GRID)?;
        let overbid = check_overbid_rejection(instance, &arrival, config, &DEFAULT_OVERBID_EPSILONS)?;
        let findings = deviation_scan(instance, &arrival, config, options.grid_resolution)?;
        let classified = findings_classified(instance, &arrival, config, &findings)?;
        Ok::<_, Error>(PerRun {
            seed,
            budget_ok,
            ir_ok,
            classified,
            mono,
            overbid,
            findings,
        })
    });

    let mut report = AuditReport {
        variant: config.variant,
        runs: options.permutations,
        budget_ok: true,
        ir_ok: true,
        monotonicity_ok: true,
        overbid_rejection_ok: true,
        classification_ok: true,
        findings: Vec::new(),
        monotonicity_violations: Vec::new(),
        overbid_violations: Vec::new(),
        reproducer_seeds: Vec::new(),
    };
    for run in runs {
        let run = run?;
        let flagged = !(run.budget_ok && run.ir_ok && run.classified && run.mono.ok && run.overbid.ok)
            || !run.findings.is_empty();
        report.budget_ok &= run.budget_ok;
        report.ir_ok &= run.ir_ok;
        report.classification_ok &= run.classified;
        report.monotonicity_ok &= run.mono.ok;
        report.overbid_rejection_ok &= run.overbid.ok;
        report.findings.extend(run.findings);
        report.monotonicity_violations.extend(run.mono.violations);
        report.overbid_violations.extend(run.overbid.violations);
        if flagged {
            report.reproducer_seeds.push(run.seed);
        }
    }
    Ok(report)
}

/// Write findings as CSV with the columns
/// `left,true_cost,reported_bid,truthful_utility,deviating_utility,gain`.
pub fn write_findings_csv<W: std::io::Write>(findings: &[DeviationFinding], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["left", "true_cost", "reported_bid", "truthful_utility", "deviating_utility", "gain"])?;
    for f in findings {
        w.write_record([
            f.left.to_string(),
            f.true_cost.to_string(),
            f.reported_bid.to_string(),
            f.truthful_utility.to_string(),
            f.deviating_utility.to_string(),
            f.gain.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<findings csv>", e))?;
    Ok(())
}

/// Sample mean with a 95% normal-approximation half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub halfwidth: f64,
}

impl MeanCi {
    pub fn of(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Self { mean: 0.0, halfwidth: 0.0 };
        }
        let mean = compensated_sum(samples.iter().copied()) / n as f64;
        if n == 1 {
            return Self { mean, halfwidth: 0.0 };
        }
        let var = compensated_sum(samples.iter().map(|x| (x - mean) * (x - mean))) / (n - 1) as f64;
        Self {
            mean,
            halfwidth: Z_95 * (var / n as f64).sqrt(),
        }
    }
}

/// One mechanism run inside a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub index: usize,
    pub seed: u64,
    pub half_utility: f64,
    pub on_utility: f64,
    pub total_payment: f64,
    /// Every right vertex was matched by the observation phase.
    pub all_rights_observed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub permutations: usize,
    pub mean_on_utility: f64,
    pub mean_half_utility: f64,
    /// 95% half-width for `mean_on_utility`.
    pub ci_halfwidth: f64,
    /// 95% half-width for `mean_half_utility`.
    pub ci_halfwidth_half: f64,
    /// Integral budgeted optimum at budget `B`.
    pub opt_value: f64,
    /// Integral budgeted optimum at budget `B / beta`.
    pub opt_value_reduced: f64,
    /// `opt_value / mean_on_utility`; absent when the online mean is zero.
    pub ratio: Option<f64>,
}

fn record_run(instance: &BipartiteInstance, config: &MechanismConfig, index: usize, seed: u64, arrival: &ArrivalOrder) -> Result<RunRecord> {
    let out = run_on(instance, arrival, config)?;
    Ok(RunRecord {
        index,
        seed,
        half_utility: out.observation_matching.utility(),
        on_utility: out.matching.utility(),
        total_payment: out.total_payment(),
        all_rights_observed: out.values.iter().all(|v| v.eligible),
    })
}

/// Run the mechanism over arrival orders seeded `base_seed + i`.
pub fn run_permutations(
    instance: &BipartiteInstance,
    config: &MechanismConfig,
    permutations: usize,
    base_seed: u64,
    exec: Exec,
) -> Result<Vec<RunRecord>> {
    let n = instance.lefts.len();
    par::map_indexed(exec, permutations, |i| {
        let seed = base_seed.wrapping_add(i as u64);
        record_run(instance, config, i, seed, &make_arrival_order(n, seed)?)
    })
    .into_iter()
    .collect()
}

/// Summarize run records against the integral oracle values.
pub fn summarize_runs(records: &[RunRecord], opt_value: f64, opt_value_reduced: f64) -> RatioEstimate {
    let on: Vec<f64> = records.iter().map(|r| r.on_utility).collect();
    let half: Vec<f64> = records.iter().map(|r| r.half_utility).collect();
    let on_ci = MeanCi::of(&on);
    let half_ci = MeanCi::of(&half);
    RatioEstimate {
        permutations: records.len(),
        mean_on_utility: on_ci.mean,
        mean_half_utility: half_ci.mean,
        ci_halfwidth: on_ci.halfwidth,
        ci_halfwidth_half: half_ci.halfwidth,
        opt_value,
        opt_value_reduced,
        ratio: (on_ci.mean > 0.0).then(|| opt_value / on_ci.mean),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimateOptions {
    pub oracle_cap: usize,
    pub exec: Exec,
}

impl Default for EstimateOptions {
    fn default() -> Self {
        Self {
            oracle_cap: DEFAULT_ORACLE_CAP,
            exec: Exec::default(),
        }
    }
}

/// Minimum permutation count accepted by [`estimate_competitive_ratio`].
pub const MIN_PERMUTATIONS: usize = 100;

pub fn estimate_competitive_ratio(
    instance: &BipartiteInstance,
    config: &MechanismConfig,
    permutations: usize,
    base_seed: u64,
) -> Result<RatioEstimate> {
    estimate_competitive_ratio_with(instance, config, permutations, base_seed, &EstimateOptions::default())
}

pub fn estimate_competitive_ratio_with(
    instance: &BipartiteInstance,
    config: &MechanismConfig,
    permutations: usize,
    base_seed: u64,
    options: &EstimateOptions,
) -> Result<RatioEstimate> {
    if permutations < MIN_PERMUTATIONS {
        return Err(Error::InvalidArgument(format!(
            "{permutations} permutations; at least {MIN_PERMUTATIONS} required"
        )));
    }
    let opt = opt_budgeted_integral_capped(instance, config.budget, options.oracle_cap)?;
    let opt_reduced = opt_budgeted_integral_capped(instance, config.budget / config.beta, options.oracle_cap)?;
    let records = run_permutations(instance, config, permutations, base_seed, options.exec)?;
    Ok(summarize_runs(&records, opt.value, opt_reduced.value))
}

/// Same estimate over explicitly given arrival orders (no minimum count).
pub fn estimate_over_orders(
    instance: &BipartiteInstance,
    config: &MechanismConfig,
    orders: &[ArrivalOrder],
    options: &EstimateOptions,
) -> Result<RatioEstimate> {
    let opt = opt_budgeted_integral_capped(instance, config.budget, options.oracle_cap)?;
    let opt_reduced = opt_budgeted_integral_capped(instance, config.budget / config.beta, options.oracle_cap)?;
    let records: Vec<RunRecord> = par::map_slice(options.exec, orders, |order| {
        record_run(instance, config, 0, 0, order)
    })
    .into_iter()
    .enumerate()
    .map(|(i, r)| r.map(|r| RunRecord { index: i, ..r }))
    .collect::<Result<_>>()?;
    Ok(summarize_runs(&records, opt.value, opt_reduced.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::*;

    fn i3_config() -> MechanismConfig {
        MechanismConfig::new(9.0, 3.0)
    }

    fn identity() -> ArrivalOrder {
        ArrivalOrder::identity(4)
    }

    #[test]
    fn budget_and_ir_examples() {
        let g = i3();
        let out = run_on(&g, &identity(), &i3_config()).unwrap();
        assert_eq!(check_budget_and_ir(&out, &g, 9.0).unwrap(), (true, true));

        let empty = run_on(&g.with_cost(2, 10.0).unwrap(), &identity(), &i3_config()).unwrap();
        assert_eq!(check_budget_and_ir(&empty, &g, 9.0).unwrap(), (true, true));

        let mut forged = out.clone();
        forged.payments[2] = 10.0;
        assert_eq!(check_budget_and_ir(&forged, &g, 9.0).unwrap(), (false, true));

        let mut cheap = out.clone();
        cheap.payments[2] = 3.0;
        assert_eq!(check_budget_and_ir(&cheap, &g, 9.0).unwrap(), (true, false));

        let mut bad = out;
        bad.payments.pop();
        assert!(check_budget_and_ir(&bad, &g, 9.0).is_err());
    }

    #[test]
    fn monotonicity_examples() {
        let g = i3();
        let c = check_allocation_monotonicity(&g, &identity(), &i3_config(), &[0.25, 0.5, 0.75, 1.0]).unwrap();
        assert!(c.ok);
        assert_eq!(c.probes, 4);
        let c = check_allocation_monotonicity(&g, &identity(), &i3_config(), &[1.0]).unwrap();
        assert!(c.ok);
        assert!(check_allocation_monotonicity(&g, &identity(), &i3_config(), &[1.5]).is_err());
    }

    #[test]
    fn overbid_examples() {
        let g = i3();
        let c = check_overbid_rejection(&g, &identity(), &i3_config(), &[0.1]).unwrap();
        assert!(c.ok);
        assert_eq!(c.probes, 1);
        let none = g.with_cost(2, 10.0).unwrap();
        let c = check_overbid_rejection(&none, &identity(), &i3_config(), &[0.1]).unwrap();
        assert!(c.ok && c.probes == 0);
        let c = check_overbid_rejection(&g, &identity(), &i3_config(), &[]).unwrap();
        assert!(c.ok && c.probes == 0);
    }

    #[test]
    fn deviation_scan_finds_underbid_when_true_cost_in_gap() {
        let g = i3().with_cost(2, 5.0).unwrap();
        let findings = deviation_scan(&g, &identity(), &i3_config(), 64).unwrap();
        assert!(!findings.is_empty());
        for f in &findings {
            assert_eq!(f.left, 2);
            assert_eq!(f.gain, 4.0);
            assert_eq!(f.payment, 9.0);
            assert!(f.reported_bid <= 4.5);
        }
        let best = best_per_vertex(&findings);
        assert_eq!(best.len(), 1);
        assert!(findings_classified(&g, &identity(), &i3_config(), &findings).unwrap());
    }

    #[test]
    fn deviation_scan_clean_on_truthful_i3() {
        let g = i3();
        let findings = deviation_scan(&g, &identity(), &i3_config(), 64).unwrap();
        assert!(findings.iter().all(|f| f.left != 2));
        assert!(findings.is_empty());
    }

    #[test]
    fn deviation_scan_bid_independent_payment() {
        // Decision half is a single vertex; whenever it wins it is paid the same amount.
        let mut g = instance(&[0.5, 0.5], 1, &[(0, 0, 1.0), (1, 0, 2.0)]);
        g.beta = 2.0;
        let cfg = MechanismConfig::new(4.0, 2.0);
        let findings = deviation_scan(&g, &ArrivalOrder::identity(2), &cfg, 16).unwrap();
        assert!(findings.is_empty());
    }

    #[test]
    fn bid_grid_contains_breakpoints() {
        let g = i3();
        let grid = bid_grid(&g, 2, 1.5, 13.5, 8);
        assert!(grid.contains(&4.5));
        assert!(grid.contains(&next_down(4.5)));
        assert!(grid.contains(&next_up(4.5)));
        assert!(grid.contains(&13.5));
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn estimate_identity_order_on_i3() {
        let g = i3();
        let est = estimate_over_orders(&g, &i3_config(), &[identity()], &EstimateOptions::default()).unwrap();
        assert_eq!(est.mean_on_utility, 3.0);
        assert_eq!(est.mean_half_utility, 2.0);
        assert_eq!(est.permutations, 1);
        assert_eq!(est.ci_halfwidth, 0.0);
    }

    #[test]
    fn estimate_is_deterministic_and_guards_count() {
        let g = i3();
        let a = estimate_competitive_ratio(&g, &i3_config(), 100, 7).unwrap();
        let b = estimate_competitive_ratio(&g, &i3_config(), 100, 7).unwrap();
        assert_eq!(a, b);
        assert!(estimate_competitive_ratio(&g, &i3_config(), 99, 7).is_err());
    }

    #[test]
    fn audit_on_i3_passes() {
        let report = audit(&i3(), &i3_config(), 1, &AuditOptions { permutations: 5, ..Default::default() }).unwrap();
        assert!(report.passed());
        assert_eq!(report.runs, 5);
    }

    #[test]
    fn findings_csv_header() {
        let mut buf = Vec::new();
        write_findings_csv(&[], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "left,true_cost,reported_bid,truthful_utility,deviating_utility,gain\n"
        );
    }

    #[test]
    fn mean_ci_matches_hand_computation() {
        let ci = MeanCi::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(ci.mean, 2.5);
        // sample sd = sqrt(5/3); se = sd / 2
        let expected = Z_95 * (5.0f64 / 3.0).sqrt() / 2.0;
        assert!((ci.halfwidth - expected).abs() < 1e-15);
    }
}
