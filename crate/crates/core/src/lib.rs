//! Reputation engine that labels news URLs as fake or reliable from the
//! bipartite graph of who shared them.

pub mod engine;
pub mod error;
pub mod eval;
pub mod graph;
pub mod ingest;
pub mod label;
pub mod logistic;
pub mod synth;

pub use error::{Error, Result};
pub use label::Label;
