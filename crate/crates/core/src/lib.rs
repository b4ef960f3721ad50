pub mod anomaly;
pub mod bse;
pub mod cli;
pub mod cloud;
pub mod coupling;
pub mod eigensolve;
pub mod error;
pub mod graph;
pub mod knn;
pub mod matching;
pub mod pca;
pub mod registration;
pub mod sparse;
pub mod synth;

pub use error::{Error, Result};
