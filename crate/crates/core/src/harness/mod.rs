//! Instance generation, Monte Carlo experiments and report export.

pub mod experiment;
pub mod generate;

pub use experiment::{
    export_report, import_report, instance_digest, run_experiment, run_experiment_with, Check, CheckVerdict,
    ExperimentConfig, ExperimentReport,
};
pub use generate::{generate_instance, GeneratorKind, GeneratorParams};
