use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parameter `{name}` out of range: {detail}")]
    OutOfRange { name: &'static str, detail: String },

    #[error("unphysical parameters: {0}")]
    Unphysical(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("peaks overlap: spacing {spacing} ps is not larger than twice the half window {half_window} ps")]
    OverlappingPeaks { spacing: f64, half_window: f64 },

    #[error("fit `{model}` did not converge: {reason}")]
    FitFailed { model: String, reason: String },

    #[error("missing input: {0}")]
    Missing(String),

    #[error("{0}")]
    Format(String),

    #[error("config error at {location}: {message}")]
    Config { location: String, message: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("step `{step}` failed: {source}")]
    Step { step: String, source: Box<Error> },
}

impl Error {
    /// Stable machine-readable kind.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::OutOfRange { .. } => "out_of_range",
            Error::Unphysical(_) => "unphysical",
            Error::Degenerate(_) => "degenerate",
            Error::OverlappingPeaks { .. } => "overlapping_peaks",
            Error::FitFailed { .. } => "fit_failed",
            Error::Missing(_) => "missing",
            Error::Format(_) => "format",
            Error::Config { .. } => "config",
            Error::Io(_) => "io",
            Error::Step { .. } => "step",
        }
    }

    pub fn in_step(self, step: &str) -> Self {
        Error::Step { step: step.to_string(), source: Box::new(self) }
    }
}

impl Error {
    pub(crate) fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        Error::Io(format!("{}: {e}", path.display()))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if value.is_nan() || value < lo || value > hi {
        return Err(Error::OutOfRange { name, detail: format!("{value} not in [{lo}, {hi}]") });
    }
    Ok(())
}
