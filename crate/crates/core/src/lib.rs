//! Street-level hazard analysis for city-scale image corpora.
//!
//! Pipeline stages live in their own modules: [`ingest`] reads manifests and
//! rasters, [`geolabel`] assigns accident labels, [`hazard`] turns classifier
//! outputs into hazard indices, [`scene`] measures layouts, [`mirror`] finds
//! safer look-alike scenes, [`insight`] aggregates and [`metrics`] evaluates.
//! [`pipeline`] strings them together for the command-line tool.

// `!(x > 0.0)` is used on purpose so that NaN is rejected along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod geolabel;
pub mod hazard;
pub mod ingest;
pub mod insight;
pub mod metrics;
pub mod mirror;
pub mod pipeline;
pub mod scene;
pub mod synth;

pub use error::{Error, Result};

/// Rounds to 9 significant digits, the precision used in every output file.
pub fn round_sig9(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.8e}").parse().unwrap_or(x)
}
