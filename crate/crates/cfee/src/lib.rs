//! Std companion to `cfee-core`: configuration files, channel datasets,
//! prediction files, the Monte-Carlo driver and the `cfee` command line tool.

pub mod config_file;
pub mod dataset;
pub mod harness;
pub mod predictions;
pub mod records;
pub mod seeds;

pub use config_file::ConfigFile;
pub use dataset::{export_dataset, read_dataset, Dataset, DatasetHeader};
pub use harness::{run_monte_carlo, HarnessOptions, RunReport, Scheme, TrialRecord};
pub use predictions::{evaluate_predictions, read_predictions, PredictionRecord};
