use thiserror::Error;

use crate::detrend::DetrendError;
use crate::filtering::FilterError;
use crate::ingest::IngestError;
use crate::metrics::MetricsError;
use crate::report::ReportError;
use crate::simulator::SimError;
use crate::synccorr::CorrError;

/// Crate-level error wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Detrend(#[from] DetrendError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Corr(#[from] CorrError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
