//! Subband adaptive filtering for channel identification.
//!
//! The crate provides the pieces needed to identify an unknown FIR channel
//! from colored excitation with a multiband structure:
//!
//! - [`signal_model`]: AR(4) excitation, random channels and noisy desired signals.
//! - [`filterbank`]: cosine-modulated analysis bank, decimation and per-block regressors.
//! - [`nsaf`]: the NSAF and set-membership NSAF weight updates.
//! - [`de`]: a DE/rand/1/bin differential evolution engine.
//! - [`de_nsaf`]: the subband cost and the DE-trained subband filter.
//! - [`harness`]: Monte Carlo trials, ensemble learning curves and CSV reports.

// `!(x > 0.0)` style checks deliberately reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod de;
pub mod de_nsaf;
pub mod error;
pub mod filterbank;
pub mod harness;
pub mod nsaf;
pub mod rng;
pub mod signal_model;

pub use de::{DeConfig, DePopulation};
pub use de_nsaf::{DeNsafConfig, LearningCurve};
pub use error::{Error, Result};
pub use filterbank::{AnalysisBank, SubbandBlock};
pub use harness::{AggregateResult, Algorithm, ExperimentConfig};
pub use nsaf::{BlockErrors, FilterState};
pub use signal_model::{Ar4Params, ChannelScenario};

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
