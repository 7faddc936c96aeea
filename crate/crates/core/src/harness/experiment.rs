//! Monte Carlo experiment runner and report persistence.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::{
    check_allocation_monotonicity, check_budget_and_ir, check_overbid_rejection, deviation_scan,
    findings_classified, summarize_runs, RunRecord, DEFAULT_MONOTONICITY_GRID, DEFAULT_OVERBID_EPSILONS,
};
use crate::error::{Error, Result};
use crate::harness::generate::{generate_instance, GeneratorParams};
use crate::model::{restrict_to_left_subset, validate_instance, BipartiteInstance, InstanceStats};
use crate::offline::{opt_budgeted_integral_capped, DEFAULT_ORACLE_CAP};
use crate::online::{make_arrival_order, run_on, MechanismConfig, Variant};
use crate::par::{self, Exec};
use crate::rng;
use crate::threshold::threshold_sweep;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Check {
    /// Threshold matching is within a factor 3 of the budgeted optimum, up to `u_max`.
    Lemma2,
    /// Removing left vertices never lowers the threshold.
    Lemma4,
    /// Observation matching is worth at least 1/12 of the optimum at `B / beta`.
    Lemma5,
    /// Online matching is worth at least half the observation matching.
    Lemma6,
    /// Payments fit the budget and cover every winner's bid.
    Lemma7,
    /// Online matching is within `24 beta` of the budgeted optimum.
    Theorem1,
    /// Allocation monotonicity and overbid rejection.
    Myerson,
    /// Profitable-misreport scan.
    Deviation,
}

impl std::str::FromStr for Check {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidArgument(format!("unknown check {s:?}")))
    }
}

fn default_oracle_cap() -> usize {
    DEFAULT_ORACLE_CAP
}

fn default_grid() -> usize {
    16
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub generator: GeneratorParams,
    pub permutations: usize,
    #[serde(default)]
    pub variant: Variant,
    pub checks: BTreeSet<Check>,
    #[serde(default = "default_oracle_cap")]
    pub oracle_cap: usize,
    #[serde(default = "default_grid")]
    pub grid_resolution: usize,
}

impl ExperimentConfig {
    pub fn new(generator: GeneratorParams, permutations: usize, checks: impl IntoIterator<Item = Check>) -> Self {
        Self {
            generator,
            permutations,
            variant: Variant::default(),
            checks: checks.into_iter().collect(),
            oracle_cap: DEFAULT_ORACLE_CAP,
            grid_resolution: default_grid(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.permutations == 0 {
            return Err(Error::InvalidArgument("permutations must be at least 1".into()));
        }
        if self.checks.is_empty() {
            return Err(Error::InvalidArgument("at least one check is required".into()));
        }
        if self.grid_resolution < 2 {
            return Err(Error::InvalidArgument("grid resolution must be at least 2".into()));
        }
        self.generator.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckVerdict {
    pub check: Check,
    pub passed: bool,
    pub violations: usize,
    pub measured: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub generation: u64,
    pub permutation_base: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub instance_digest: String,
    pub instance_stats: InstanceStats,
    pub seeds: Seeds,
    pub passed: bool,
    pub verdicts: Vec<CheckVerdict>,
    pub runs: Vec<RunRecord>,
}

/// SHA-256 of the instance's compact JSON form.
pub fn instance_digest(instance: &BipartiteInstance) -> Result<String> {
    let json = serde_json::to_string(instance)?;
    Ok(hex::encode(Sha256::digest(json.as_bytes())))
}

struct PermutationOutcome {
    record: RunRecord,
    budget_ok: bool,
    ir_ok: bool,
    mono_violations: usize,
    mono_probes: usize,
    overbid_violations: usize,
    overbid_probes: usize,
    findings: usize,
    classified: bool,
}

/// Budgets probed by the threshold-vs-optimum check, as multiples of `B`.
pub const LEMMA2_BUDGET_FACTORS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_with(config, Exec::default())
}

pub fn run_experiment_with(config: &ExperimentConfig, exec: Exec) -> Result<ExperimentReport> {
    config.validate()?;
    let instance = generate_instance(&config.generator)?;
    let mut stats = validate_instance(&instance)?;
    let gen = &config.generator;
    let mech = MechanismConfig {
        budget: gen.budget,
        beta: gen.beta,
        variant: config.variant,
        seed: gen.seed,
    };
    let checks = &config.checks;
    let want_myerson = checks.contains(&Check::Myerson);
    let want_deviation = checks.contains(&Check::Deviation);
    let n = instance.lefts.len();

    let outcomes = par::map_indexed(exec, config.permutations, |i| {
        let seed = gen.seed.wrapping_add(i as u64);
        let arrival = make_arrival_order(n, seed)?;
        let out = run_on(&instance, &arrival, &mech)?;
        let (budget_ok, ir_ok) = check_budget_and_ir(&out, &instance, mech.budget)?;
        let mut po = PermutationOutcome {
            record: RunRecord {
                index: i,
                seed,
                half_utility: out.observation_matching.utility(),
                on_utility: out.matching.utility(),
                total_payment: out.total_payment(),
                all_rights_observed: out.values.iter().all(|v| v.eligible),
            },
            budget_ok,
            ir_ok,
            mono_violations: 0,
            mono_probes: 0,
            overbid_violations: 0,
            overbid_probes: 0,
            findings: 0,
            classified: true,
        };
        if want_myerson {
            let m = check_allocation_monotonicity(&instance, &arrival, &mech, &DEFAULT_MONOTONICITY_GRID)?;
            let o = check_overbid_rejection(&instance, &arrival, &mech, &DEFAULT_OVERBID_EPSILONS)?;
            po.mono_violations = m.violations.len();
            po.mono_probes = m.probes;
            po.overbid_violations = o.violations.len();
            po.overbid_probes = o.probes;
        }
        if want_deviation {
            let f = deviation_scan(&instance, &arrival, &mech, config.grid_resolution)?;
            po.findings = f.len();
            po.classified = findings_classified(&instance, &arrival, &mech, &f)?;
        }
        Ok::<_, Error>(po)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let runs: Vec<RunRecord> = outcomes.iter().map(|o| o.record).collect();
    let needs_oracle = checks.iter().any(|c| matches!(c, Check::Lemma2 | Check::Lemma5 | Check::Theorem1));
    let (opt_full, opt_reduced) = if needs_oracle {
        let full = opt_budgeted_integral_capped(&instance, gen.budget, config.oracle_cap)?.value;
        let reduced = opt_budgeted_integral_capped(&instance, gen.budget / gen.beta, config.oracle_cap)?.value;
        stats = stats.with_opt_value(full);
        (full, reduced)
    } else {
        (f64::NAN, f64::NAN)
    };
    let est = summarize_runs(&runs, opt_full, opt_reduced);

    let mut verdicts = Vec::new();
    for &check in checks {
        let mut measured = BTreeMap::new();
        let (passed, violations) = match check {
            Check::Lemma2 => {
                let mut violations = 0;
                for factor in LEMMA2_BUDGET_FACTORS {
                    let budget = gen.budget * factor;
                    let opt = opt_budgeted_integral_capped(&instance, budget, config.oracle_cap)?.value;
                    let thr = threshold_sweep(&instance, budget)?.matching.utility();
                    if opt > 3.0 * thr + stats.u_max {
                        violations += 1;
                    }
                    measured.insert(format!("opt_at_{factor}b"), opt);
                    measured.insert(format!("threshold_utility_at_{factor}b"), thr);
                }
                measured.insert("u_max".into(), stats.u_max);
                (violations == 0, violations)
            }
            Check::Lemma4 => {
                let full_gamma = threshold_sweep(&instance, gen.budget)?.gamma;
                let violations = par::map_indexed(exec, config.permutations, |i| {
                    let mut rng = rng::stream(gen.seed.wrapping_add(i as u64), rng::STREAM_SUBSET);
                    let keep: Vec<usize> = (0..n).filter(|_| rng.random::<bool>()).collect();
                    let sub = restrict_to_left_subset(&instance, &keep)?;
                    Ok::<_, Error>(threshold_sweep(&sub, gen.budget)?.gamma < full_gamma)
                })
                .into_iter()
                .collect::<Result<Vec<bool>>>()?
                .into_iter()
                .filter(|&v| v)
                .count();
                measured.insert("gamma_full".into(), full_gamma);
                measured.insert("subsets".into(), config.permutations as f64);
                (violations == 0, violations)
            }
            Check::Lemma5 => {
                let bound = opt_reduced / 12.0;
                measured.insert("mean_half_utility".into(), est.mean_half_utility);
                measured.insert("ci_halfwidth".into(), est.ci_halfwidth_half);
                measured.insert("opt_reduced".into(), opt_reduced);
                measured.insert("bound".into(), bound);
                let ok = est.mean_half_utility >= bound - est.ci_halfwidth_half;
                (ok, usize::from(!ok))
            }
            Check::Lemma6 => {
                let bound = est.mean_half_utility / 2.0;
                measured.insert("mean_on_utility".into(), est.mean_on_utility);
                measured.insert("mean_half_utility".into(), est.mean_half_utility);
                measured.insert("ci_halfwidth".into(), est.ci_halfwidth);
                measured.insert("bound".into(), bound);
                let ok = est.mean_on_utility >= bound - est.ci_halfwidth;
                (ok, usize::from(!ok))
            }
            Check::Lemma7 => {
                let budget_violations = outcomes.iter().filter(|o| !o.budget_ok).count();
                let ir_violations = outcomes.iter().filter(|o| !o.ir_ok).count();
                measured.insert("budget_violations".into(), budget_violations as f64);
                measured.insert("ir_violations".into(), ir_violations as f64);
                let max_payment = runs.iter().map(|r| r.total_payment).fold(0.0, f64::max);
                measured.insert("max_total_payment".into(), max_payment);
                let v = budget_violations + ir_violations;
                (v == 0, v)
            }
            Check::Theorem1 => {
                let bound = opt_full / (24.0 * gen.beta);
                measured.insert("mean_on_utility".into(), est.mean_on_utility);
                measured.insert("ci_halfwidth".into(), est.ci_halfwidth);
                measured.insert("opt".into(), opt_full);
                measured.insert("bound".into(), bound);
                if let Some(r) = est.ratio {
                    measured.insert("ratio".into(), r);
                }
                let ok = est.mean_on_utility >= bound - est.ci_halfwidth;
                (ok, usize::from(!ok))
            }
            Check::Myerson => {
                let mono: usize = outcomes.iter().map(|o| o.mono_violations).sum();
                let overbid: usize = outcomes.iter().map(|o| o.overbid_violations).sum();
                measured.insert("monotonicity_probes".into(), outcomes.iter().map(|o| o.mono_probes).sum::<usize>() as f64);
                measured.insert("monotonicity_violations".into(), mono as f64);
                measured.insert("overbid_probes".into(), outcomes.iter().map(|o| o.overbid_probes).sum::<usize>() as f64);
                measured.insert("overbid_violations".into(), overbid as f64);
                // Literal-argmax monotonicity violations are reported, not failed.
                let counted = overbid + if config.variant == Variant::UnmatchedRestricted { mono } else { 0 };
                (counted == 0, counted)
            }
            Check::Deviation => {
                let findings: usize = outcomes.iter().map(|o| o.findings).sum();
                let unclassified = outcomes.iter().filter(|o| !o.classified).count();
                measured.insert("findings".into(), findings as f64);
                measured.insert("unclassified_runs".into(), unclassified as f64);
                (unclassified == 0, unclassified)
            }
        };
        verdicts.push(CheckVerdict {
            check,
            passed,
            violations,
            measured,
        });
    }

    Ok(ExperimentReport {
        config: config.clone(),
        instance_digest: instance_digest(&instance)?,
        instance_stats: stats,
        seeds: Seeds {
            generation: gen.seed,
            permutation_base: gen.seed,
        },
        passed: verdicts.iter().all(|v| v.passed),
        verdicts,
        runs,
    })
}

pub const REPORT_FILE: &str = "report.json";
pub const RUNS_FILE: &str = "runs.csv";

pub fn report_json(report: &ExperimentReport) -> Result<String> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn runs_csv(runs: &[RunRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "seed", "half_utility", "on_utility", "total_payment", "all_rights_observed"])?;
    for r in runs {
        w.write_record([
            r.index.to_string(),
            r.seed.to_string(),
            r.half_utility.to_string(),
            r.on_utility.to_string(),
            r.total_payment.to_string(),
            r.all_rights_observed.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("<runs csv>", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Write `report.json` and `runs.csv` into `dir`, creating it if needed.
pub fn export_report(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join(REPORT_FILE);
    fs::write(&json_path, report_json(report)?).map_err(|e| Error::io(&json_path, e))?;
    let csv_path = dir.join(RUNS_FILE);
    fs::write(&csv_path, runs_csv(&report.runs)?).map_err(|e| Error::io(&csv_path, e))?;
    Ok(())
}

pub fn import_report(dir: &Path) -> Result<ExperimentReport> {
    let path = dir.join(REPORT_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}
