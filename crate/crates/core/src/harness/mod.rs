//! Orchestration of training runs, evaluation, sweeps, configuration, and
//! artifact I/O; the machinery behind the CLI.

mod checkpoint;
mod config;
mod evaluate;
mod sweep;
mod train;

pub use checkpoint::{load_artifacts, model_key, save_artifacts};
pub use config::{DataSource, RunConfig, OUT_ROOT_ENV};
pub use evaluate::{
    evaluate_methods, evaluate_run, render_summary_markdown, write_eval_files, EvalOutput,
    MethodReport, ReductionRow,
};
pub use sweep::{sweep, sweep_in_memory, SweepAxis, SweepOutput, SweepRow};
pub use train::{train, train_on, Artifacts, EpochLog, StepLog, TrainOutput, TrainingLog};
