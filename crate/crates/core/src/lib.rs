pub mod data;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod linalg;
pub mod metrics;
pub mod pipeline;
pub mod pooling;
pub mod rng;
pub mod selftest;
pub mod stats;

pub use error::{Error, Result};
