//! Sensor log ingestion.
//!
//! Every acquisition device writes its own CSV log: one header row, then one
//! row per reading with a timestamp, one impedance and one fluid temperature
//! value per cell, and any number of auxiliary environment channels. A
//! [`Schema`] maps CSV columns to channel roles. [`parse_log`] turns a log into
//! [`SampleRecord`]s, [`align`] matches several device streams onto a shared
//! tick grid and yields a [`Session`], and [`Session::slice_frame`] /
//! [`Session::reject_initial`] cut the session into analysis frames.
//!
//! Missing values are carried as `NaN` everywhere downstream. They are never
//! zero-filled.

mod align;
mod parse;
mod schema;
mod session;
mod session_io;

use thiserror::Error;

pub use align::{align, AlignOptions, AlignmentReport, DeviceAlignment, DeviceStream};
pub use parse::{parse_log, write_log, LineError, LineErrorKind, ParseOptions, ParsedLog, SampleRecord};
pub use schema::{ColumnRole, Schema};
pub use session::{ChannelKind, ChannelSeries, Provenance, Session};
pub use session_io::{read_session, read_session_file, write_session, write_session_file, SESSION_MAGIC};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(String),
    #[error("schema line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("unknown column {column:?}")]
    UnknownColumn { column: String },
    #[error("schema has no timestamp column")]
    MissingTimestamp,
    #[error("column {column:?} named in schema is absent from the header")]
    MissingColumn { column: String },
    #[error("{0}")]
    Line(#[from] LineError),
    #[error("no input streams")]
    NoStreams,
    #[error("device {0:?} appears more than once")]
    DuplicateDevice(String),
    #[error("streams have zero temporal overlap")]
    NoOverlap,
    #[error("cannot estimate sample period: {0}")]
    SamplePeriod(String),
    #[error("ambiguous match for device {device:?} at tick {tick_time}: timestamps {timestamps:?}")]
    AmbiguousMatch {
        device: String,
        tick_time: f64,
        timestamps: Vec<f64>,
    },
    #[error("range {start}..{end} outside session of {n_samples} samples")]
    OutOfRange {
        start: usize,
        end: usize,
        n_samples: usize,
    },
    #[error("frame entirely within rejection window ({skip} of {n_samples} samples)")]
    RejectionWindow { skip: usize, n_samples: usize },
    #[error("invalid session: {0}")]
    InvalidSession(String),
    #[error("session file line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
