//! Training-free open-vocabulary change detection for bi-temporal imagery.
//!
//! Two pipeline orders are provided over pluggable components:
//! [`mci::run_mci`] proposes masks, compares them across time and then
//! identifies their class; [`imc::run_imc`] identifies targets first,
//! promotes them to masks and then compares. Deterministic synthetic
//! backends in [`components::synthetic`] let both run without model weights.

pub mod cli;
pub mod components;
pub mod error;
pub mod geometry;
pub mod imc;
pub mod ingest;
pub mod mci;
pub mod model;
pub mod pipeline;

pub use error::{Error, Result};
pub use pipeline::{run_pipeline, run_tiled};
