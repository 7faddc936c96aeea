//! `obtm`: generate instances, run the mechanisms and audit them from the shell.
//!
//! Exit status is 0 when every requested check passes, 1 when a check fails
//! and 2 on usage or I/O errors.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use obtm_core::audit::{audit, best_per_vertex, check_budget_and_ir, write_findings_csv, AuditOptions};
use obtm_core::harness::{export_report, generate_instance, run_experiment, ExperimentConfig, GeneratorKind, GeneratorParams};
use obtm_core::offline::{max_weight_matching_bruteforce_capped, opt_budgeted_integral_capped, DEFAULT_ORACLE_CAP};
use obtm_core::{
    make_arrival_order, run_on, threshold_bisection, threshold_sweep, ArrivalOrder, BipartiteInstance, MechanismConfig,
    Variant,
};
use serde_json::json;

#[derive(Parser)]
#[command(name = "obtm", version, about = "Online budgeted truthful matching")]
struct Cli {
    /// Worker threads for parallel sections (default: one per core).
    #[arg(long, global = true, env = "OBTM_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance.
    Gen(GenArgs),
    /// Offline threshold mechanism, optionally with the exhaustive oracles.
    SolveOffline(SolveArgs),
    /// One run of the online mechanism under a seeded (or given) arrival order.
    RunOnline(OnlineArgs),
    /// Budget, IR, monotonicity, overbid and deviation checks.
    Audit(AuditArgs),
    /// Run a Monte Carlo experiment from a JSON config and export its report.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct GenArgs {
    /// Generator parameters as JSON; individual flags override its fields.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    kind: Option<GeneratorKind>,
    #[arg(long)]
    n_left: Option<usize>,
    #[arg(long)]
    n_right: Option<usize>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    budget: Option<f64>,
    #[arg(long)]
    density: Option<f64>,
    /// Do not bias toward instances whose first half covers every right vertex.
    #[arg(long)]
    assumption_free: bool,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Budget (default: the instance's).
    #[arg(long)]
    budget: Option<f64>,
    /// Use bisection instead of the breakpoint sweep.
    #[arg(long)]
    bisection: bool,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Also report the exhaustive max-weight and budgeted optima.
    #[arg(long)]
    oracle: bool,
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    oracle_cap: usize,
}

#[derive(Args)]
struct MechanismArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Budget (default: the instance's).
    #[arg(long)]
    budget: Option<f64>,
    /// Utility ratio bound (default: the instance's).
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `unmatched-restricted` (default) or `literal-argmax`.
    #[arg(long, default_value = "unmatched-restricted")]
    variant: Variant,
}

#[derive(Args)]
struct OnlineArgs {
    #[command(flatten)]
    mech: MechanismArgs,
    /// Arrival order as a JSON array of left ids; overrides the seeded order.
    #[arg(long)]
    permutation: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    #[command(flatten)]
    mech: MechanismArgs,
    /// Points in the geometric part of the deviation bid grid.
    #[arg(long, default_value_t = 32)]
    grid: usize,
    /// Arrival orders to audit, seeded `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 1)]
    permutations: usize,
    /// Findings CSV path (default: `findings.csv` next to `--output`, else not written).
    #[arg(long)]
    findings: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment config JSON.
    #[arg(long)]
    input: PathBuf,
    /// Directory for `report.json` and `runs.csv`.
    #[arg(long)]
    output: PathBuf,
    /// Overrides the generator seed in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn read_instance(path: &Path) -> Result<BipartiteInstance> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let instance = BipartiteInstance::from_json(&text).with_context(|| format!("parsing {}", path.display()))?;
    instance.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(instance)
}

fn emit(output: Option<&Path>, text: &str) -> Result<()> {
    match output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn pretty(value: &impl serde::Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

impl MechanismArgs {
    fn load(&self) -> Result<(BipartiteInstance, MechanismConfig)> {
        let instance = read_instance(&self.input)?;
        let mut config = MechanismConfig::new(
            self.budget.unwrap_or(instance.budget),
            self.beta.unwrap_or(instance.beta),
        )
        .with_variant(self.variant);
        config.seed = self.seed;
        Ok((instance, config))
    }
}

fn gen(args: GenArgs) -> Result<bool> {
    let mut params = match &args.input {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => GeneratorParams::default(),
    };
    if let Some(v) = args.seed {
        params.seed = v;
    }
    if let Some(v) = args.kind {
        params.kind = v;
    }
    if let Some(v) = args.n_left {
        params.n_left = v;
    }
    if let Some(v) = args.n_right {
        params.n_right = v;
    }
    if let Some(v) = args.beta {
        params.beta = v;
    }
    if let Some(v) = args.budget {
        params.budget = v;
    }
    if let Some(v) = args.density {
        params.edge_density = v;
    }
    params.assumption_free |= args.assumption_free;
    let instance = generate_instance(&params)?;
    emit(args.output.as_deref(), &(instance.to_json()? + "\n"))?;
    Ok(true)
}

fn solve_offline(args: SolveArgs) -> Result<bool> {
    let instance = read_instance(&args.input)?;
    let budget = args.budget.unwrap_or(instance.budget);
    let threshold = if args.bisection {
        threshold_bisection(&instance, budget, args.tol)?
    } else {
        threshold_sweep(&instance, budget)?
    };
    let mut out = json!({ "budget": budget, "threshold": threshold });
    if args.oracle {
        out["max_weight_matching"] = serde_json::to_value(max_weight_matching_bruteforce_capped(&instance, args.oracle_cap)?)?;
        out["budgeted_optimum"] = serde_json::to_value(opt_budgeted_integral_capped(&instance, budget, args.oracle_cap)?)?;
    }
    emit(args.output.as_deref(), &pretty(&out)?)?;
    Ok(threshold.spent_bound <= budget)
}

fn run_online(args: OnlineArgs) -> Result<bool> {
    let (instance, config) = args.mech.load()?;
    let arrival = match &args.permutation {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            ArrivalOrder::new(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)?
        }
        None => make_arrival_order(instance.lefts.len(), config.seed)?,
    };
    let outcome = run_on(&instance, &arrival, &config)?;
    let (budget_ok, ir_ok) = check_budget_and_ir(&outcome, &instance, config.budget)?;
    let out = json!({
        "config": config,
        "outcome": outcome,
        "utility": outcome.matching.utility(),
        "total_payment": outcome.total_payment(),
        "budget_ok": budget_ok,
        "ir_ok": ir_ok,
    });
    emit(args.mech.output.as_deref(), &pretty(&out)?)?;
    Ok(budget_ok && ir_ok)
}

fn run_audit(args: AuditArgs) -> Result<bool> {
    let (instance, config) = args.mech.load()?;
    if args.grid < 2 {
        bail!("--grid must be at least 2");
    }
    let options = AuditOptions {
        permutations: args.permutations,
        grid_resolution: args.grid,
        ..AuditOptions::default()
    };
    let report = audit(&instance, &config, config.seed, &options)?;
    let findings_path = args.findings.clone().or_else(|| {
        args.mech
            .output
            .as_ref()
            .map(|p| p.parent().unwrap_or(Path::new(".")).join("findings.csv"))
    });
    if let Some(path) = findings_path {
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        write_findings_csv(&report.findings, file).with_context(|| format!("writing {}", path.display()))?;
    }
    let out = json!({
        "report": report,
        "passed": report.passed(),
        "best_per_vertex": best_per_vertex(&report.findings),
    });
    emit(args.mech.output.as_deref(), &pretty(&out)?)?;
    Ok(report.passed())
}

fn experiment(args: ExperimentArgs) -> Result<bool> {
    let text = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    let mut config: ExperimentConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", args.input.display()))?;
    if let Some(seed) = args.seed {
        config.generator.seed = seed;
    }
    let report = run_experiment(&config)?;
    export_report(&report, &args.output)?;
    for v in &report.verdicts {
        eprintln!(
            "{} {:?}: {} violations",
            if v.passed { "PASS" } else { "FAIL" },
            v.check,
            v.violations
        );
    }
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: configuring {n} workers: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::SolveOffline(a) => solve_offline(a),
        Command::RunOnline(a) => run_online(a),
        Command::Audit(a) => run_audit(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
