//! Value-equivalent versus maximum-likelihood model learning on tabular MDPs.

pub mod env;
pub mod error;
pub mod experiment;
pub mod function_set;
pub mod linalg;
pub mod mdp;
pub mod model;
pub mod planning;
pub mod rng;
pub mod theory;

pub use error::{Result, VeqError};
