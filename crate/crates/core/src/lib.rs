//! Detection and quantification of synchronization events across
//! independently recorded sensor channels.
//!
//! The analysis chain is:
//!
//! 1. [`ingest`]: parse per-device CSV logs and align them on a common tick grid.
//! 2. [`detrend`]: fit an order-`n` polynomial trend by Levenberg-Marquardt and
//!    take the residual.
//! 3. [`filtering`]: causal Butterworth low-pass of the residuals.
//! 4. [`synccorr`]: streaming rolling Pearson correlation over every channel pair.
//! 5. [`metrics`]: rolling mean correlation, pair fractions, event detection,
//!    event rates, window scans and subset ratios.
//!
//! [`simulator`] produces synthetic sessions with known injected events, and
//! [`pipeline`] glues the stages together the way the CLI runs them.

pub mod detrend;
pub mod error;
pub mod filtering;
pub mod ingest;
pub mod metrics;
pub mod pipeline;
pub mod report;
pub mod simulator;
pub mod synccorr;

pub use error::{Error, Result};
