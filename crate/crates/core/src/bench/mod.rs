//! Datasets, designs, test functions, metrics and the benchmark pipelines.

pub mod dataset;
pub mod design;
pub mod experiment;
pub mod functions;
pub mod metrics;

pub use dataset::{load_csv, load_features, write_csv, Dataset, Scaling, StandardizeOptions};
pub use design::{maximin_lhd, maximin_lhd_with_trace, min_distance};
pub use experiment::{cross_validate, fit_and_score, run_pepelyshev_bench, run_sine_bench, FitOutcome, FitSettings};
pub use functions::{pepelyshev, pepelyshev_dataset, pepelyshev_raw, simulate_sine, simulate_sine_raw, PepelyshevConfig, SineSimConfig};
pub use metrics::{kfold_split, mad, mse};
