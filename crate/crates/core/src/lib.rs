pub mod adapters;
pub mod autograd;
pub mod compose;
pub mod dataio;
pub mod encode;
pub mod error;
pub mod experiment;
pub mod featurize;
pub mod interact;
pub mod metrics;
pub mod molparse;
pub mod nn;
pub mod train;

pub use error::{Error, Result};
