pub mod artifact;
pub mod baselines;
pub mod cli;
pub mod continuous;
pub mod data;
pub mod discrete;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod linalg;
pub mod nodeset;
pub mod scm;

pub use error::{Error, Result};
pub use nodeset::NodeSet;
