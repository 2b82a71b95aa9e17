//! Minimal neural-network machinery: tensors, a reverse-mode autodiff graph,
//! an LSTM cell with a dense projection, and SGD/Adam.

pub mod graph;
pub mod lstm;
pub mod optim;
pub mod tensor;

pub use graph::{Graph, NodeId};
pub use lstm::{dense, lstm_step, Dense, LstmParams, LstmVars};
pub use optim::{OptimizerConfig, OptimizerKind, OptimizerState};
pub use tensor::Tensor;
