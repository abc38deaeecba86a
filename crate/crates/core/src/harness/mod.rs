//! Configuration, datasets, the end-to-end link, metrics and the stages
//! run by the command-line tool.

pub mod config;
pub mod dataset;
pub mod link;
pub mod metrics;
pub mod run;
pub mod seed;

pub use config::{DelayProfile, Estimator, EvalRecords, RunConfig};
pub use dataset::{DatasetReader, DatasetWriter, Record};
pub use link::{Link, Reception};
pub use metrics::{evm, MetricsRow};
pub use run::{generate_dataset, run_eval, train_model, write_report, EvalOutput, RunPaths};
