//! Scenario configuration, experiment orchestration and result persistence
//! for the movable-antenna ISAC simulator.

pub mod acceptance;
pub mod config;
pub mod experiment;

pub use config::{config_hash, dump_config, load_config, parse_config};
pub use experiment::{run_experiment, write_csv, ExperimentResult, Method, Plan, Row, Sweep, SweepParam};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] maisac_core::Error),
    #[error(transparent)]
    Gnn(#[from] maisac_gnn::GnnError),
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Cell(String),
}

pub type Result<T> = std::result::Result<T, HarnessError>;
