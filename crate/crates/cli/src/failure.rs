use std::fmt;

use cellsync::simulator::SimError;
use cellsync::Error;

/// Error carrying the process exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    Input(anyhow::Error),
    Config(anyhow::Error),
    Other(anyhow::Error),
}

impl Failure {
    pub fn input(msg: impl fmt::Display) -> Self {
        Failure::Input(anyhow::anyhow!("{msg}"))
    }

    pub fn config(msg: impl fmt::Display) -> Self {
        Failure::Config(anyhow::anyhow!("{msg}"))
    }

    pub fn other(msg: impl fmt::Display) -> Self {
        Failure::Other(anyhow::anyhow!("{msg}"))
    }

    pub fn code(&self) -> u8 {
        match self {
            Failure::Other(_) => 1,
            Failure::Input(_) => 2,
            Failure::Config(_) => 3,
        }
    }

    pub fn context(self, ctx: impl fmt::Display + Send + Sync + 'static) -> Self {
        match self {
            Failure::Input(e) => Failure::Input(e.context(ctx)),
            Failure::Config(e) => Failure::Config(e.context(ctx)),
            Failure::Other(e) => Failure::Other(e.context(ctx)),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (Failure::Input(e) | Failure::Config(e) | Failure::Other(e)) = self;
        write!(f, "{e:#}")
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Ingest(_) => Failure::Input(e.into()),
            Error::Sim(SimError::Session(_)) => Failure::Input(e.into()),
            Error::Sim(_) | Error::Config(_) | Error::Filter(_) | Error::Metrics(_) => {
                Failure::Config(e.into())
            }
            Error::Detrend(_) | Error::Corr(_) | Error::Report(_) => Failure::Other(e.into()),
        }
    }
}

impl From<SimError> for Failure {
    fn from(e: SimError) -> Self {
        Error::from(e).into()
    }
}

impl From<cellsync::ingest::IngestError> for Failure {
    fn from(e: cellsync::ingest::IngestError) -> Self {
        Failure::Input(e.into())
    }
}

impl From<cellsync::report::ReportError> for Failure {
    fn from(e: cellsync::report::ReportError) -> Self {
        Failure::Other(e.into())
    }
}
