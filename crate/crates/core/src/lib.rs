pub mod error;
pub mod experiment;
pub mod fom;
pub mod linalg;
pub mod metrics;
pub mod nn;
pub mod pod;
pub mod rom;

pub use error::{Error, Result};

/// Sizes the global worker pool; must run before any parallel work.
pub fn set_threads(n: usize) -> std::result::Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}
