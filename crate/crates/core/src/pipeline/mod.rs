//! Synthetic sweeps and real-data evaluation, end to end.

pub mod aggregate;
pub mod config;
pub mod emit;
pub mod engine;
pub mod grouped;
pub mod ingest;
pub mod run;

pub use aggregate::{aggregate, find_mean, AggregateRow};
pub use config::{EvaluateConfig, Layout, RunConfig};
pub use emit::{emit_results, Manifest};
pub use engine::{run_replication, run_synthetic, RunResults, Scores};
pub use grouped::{group_generation, subsample_evaluate, true_hte, GroupedDataset, SampleSize};
pub use ingest::{ingest_csv, ColumnMap};
