//! Welfare-aware recommendation workbench.
//!
//! The crate bundles a synthetic shopper simulator whose ground-truth
//! willingness-to-pay (WTP) is known, three matrix-factorization choice models
//! trained on the simulated sales log, greedy slate construction under four
//! value objectives, and welfare metrics scored against the simulator.
//!
//! ```text
//! sim        world generation, pricing, noisy shopper sessions
//! model      RUM-MF / MF-SM / MF-PCLICK choice probabilities and WTP
//! train      analytic gradients, sparse Adam, fitting loop
//! slate      expected value per sale and greedy top-k slates
//! metrics    Welfare / Utility / Revenue / Sales / Precision @k
//! experiment presets, end-to-end runs, multi-seed tables
//! io         JSON and CSV file formats
//! ```
//!
//! The runnable programs under `examples/` walk through each capability.

pub mod error;
pub mod experiment;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod sim;
pub mod slate;
pub mod train;

pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, ExperimentOutput, Preset};
pub use matrix::Matrix;
pub use metrics::{compute_metrics, eval_choice, MetricReport, RunMetrics};
pub use model::{Family, ModelParams};
pub use sim::{generate_world, simulate_sessions, Choice, EnvConfig, LatentWorld, SessionEvent};
pub use slate::{Method, Objective, SlateSpec};
pub use train::{fit, AdamState, FitResult, TrainConfig};
