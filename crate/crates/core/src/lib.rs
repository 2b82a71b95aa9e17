pub mod classifiers;
pub mod error;
pub mod experiment;
pub mod gan;
pub mod metrics;
pub mod mixture;
pub mod nn;
pub mod oracle;
pub mod signal;

pub use error::{Error, Result};
