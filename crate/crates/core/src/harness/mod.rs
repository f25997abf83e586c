//! Config files, experiments and CSV output.

pub mod config;
pub mod curves;
pub mod experiment;
pub mod output;

pub use config::{parse_config, ExperimentSpec, GainSource, LGrid, Preset, SpecDraft};
pub use experiment::{run_experiment, AggregateResult};
pub use output::emit_csv;
