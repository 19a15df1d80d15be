//! Structure-aware graph transformer that maps a cell-free ISAC deployment
//! to beamformers and movable-antenna positions.

pub mod graph;
pub mod loss;
pub mod model;
pub mod params;
pub mod train;

pub use graph::{build_graph, HetGraph};
pub use params::{ModelSpec, Params};
pub use train::{infer, train, TrainReport};

#[derive(Debug, thiserror::Error)]
pub enum GnnError {
    #[error(transparent)]
    Core(#[from] maisac_core::Error),
    #[error("invalid graph: {0}")]
    Graph(String),
    #[error("checkpoint {0}")]
    Checkpoint(String),
    #[error("non-finite loss or gradient at step {0}")]
    NonFinite(usize),
    #[error("training diverged at step {step}: loss {loss} against initial {initial}")]
    Diverged { step: usize, loss: f64, initial: f64 },
}

pub type Result<T> = std::result::Result<T, GnnError>;
