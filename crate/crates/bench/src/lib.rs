//! Simulation designs, Monte Carlo harness, contaminated LOOCV protocol and output
//! emission for the rank regression estimators in `rpcr-core`.

pub mod emit;
pub mod loocv;
pub mod manifest;
pub mod metrics;
pub mod monte_carlo;
pub mod simgen;

pub use emit::{emit_loocv, emit_simulation, render_svg};
pub use loocv::{run_loocv, screen_predictors, LoocvConfig, LoocvResult};
pub use manifest::{ExperimentManifest, SimConfig};
pub use metrics::{paired_summary, prediction_error, PairedSummary};
pub use monte_carlo::{run_monte_carlo, ExperimentResult, ReplicateRecord};
pub use simgen::{gen_design, gen_noise, Contamination, ErrorLaw, Model, NoiseSpec, SimDesign};
