//! Harness for the least-squares, local SGD, power iteration and sub-linear
//! simulation experiments. Runs are deterministic given the config and seed;
//! seeds run in parallel.

mod config;
mod data;
mod harness;
mod power;
mod records;
mod training;

pub use config::{ExperimentConfig, ExperimentKind, QuantizerChoice, YRule, DEFAULT_SEEDS};
pub use data::{
    extra_batch, gen_least_squares, parse_libsvm, parse_libsvm_str, planted_covariance, shuffled_batches,
    top_eigenvector, Dataset,
};
pub use harness::build_codec;
pub use power::{run_power_iteration, PowerProblem, CONVERGED_ALIGNMENT, SPECTRUM};
pub use records::{emit, mean_across_seeds, read_csv, read_records, write_csv, OutputFormat, ResultRecord, CSV_COLUMNS};
pub use training::{load_dataset, run_dsgd, run_local_sgd, run_sublinear_sim};

use crate::error::Result;

/// Dispatches on `cfg.experiment`.
pub fn run(cfg: &ExperimentConfig) -> Result<Vec<ResultRecord>> {
    match cfg.experiment {
        ExperimentKind::Dsgd => run_dsgd(cfg),
        ExperimentKind::LocalSgd => run_local_sgd(cfg),
        ExperimentKind::PowerIter => run_power_iteration(cfg),
        ExperimentKind::SublinearSim => run_sublinear_sim(cfg),
    }
}
