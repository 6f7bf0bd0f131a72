//! Adaptive signal separation of multicomponent AM-FM signals.
//!
//! A signal `x(t) = A₀(t) + Σ_k A_k(t) cos(2π φ_k(t))` is split into its
//! trend and components by an STFT whose Gaussian window width varies with
//! time. Components are pulled out one at a time: find the strongest ridge,
//! tighten the window locally, estimate the chirp rate along the ridge,
//! reconstruct from the on-ridge coefficients with the linear-chirp
//! correction `√(1 - j2πσ²r)`, subtract, repeat.
//!
//! Module map:
//!
//! - [`gauss`]: closed-form window and chirp formulas.
//! - [`stft`]: adaptive STFT, discrete operator cross-check, trend.
//! - [`ridge`]: peak seeding, ridge tracking, chirp-rate fitting.
//! - [`recovery`]: component reconstruction formulas and error bound.
//! - [`tuning`]: Rényi-entropy window selection and local refinement.
//! - [`pipeline`]: the full extraction loop.
//! - [`bench`]: synthetic cases, noise, metrics, model comparison.
//! - [`io`]: CSV/WAV ingestion and result export.

// `!(x > 0.0)` is used deliberately to reject NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod cli;
pub mod config;
pub mod error;
pub mod gauss;
pub mod io;
pub mod pipeline;
pub mod recovery;
pub mod ridge;
pub mod signal;
pub mod stft;
pub mod tuning;

pub use config::{AssoConfig, Lambda0Convention, RecoveryModel};
pub use error::{AssoError, Result};
pub use pipeline::{separate, SeparationResult, StopReason};
pub use recovery::RecoveredComponent;
pub use ridge::{ChirpRateTrack, Ridge};
pub use signal::{GroundTruthComponent, SampledSignal, Sample, WindowSpec};
pub use stft::{FrequencyGrid, SigmaTrack, TFRepresentation};
