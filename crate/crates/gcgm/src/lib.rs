//! Experiment harness around `gcgm-core`: data generation and loading, run
//! configuration, CSV/JSON outputs and the `gcgm` command line.

pub mod config;
mod error;
pub mod experiment;
pub mod idx;
pub mod output;
pub mod synthetic;
pub mod textio;

pub use config::{Experiment, ExperimentConfig, GridPoint};
pub use error::Error;
pub use idx::load_mnist_pair;
pub use synthetic::gen_synthetic;
