//! Correlation histograms and the estimators built on them.

pub mod fit;
pub mod histogram;
pub mod peaks;
pub mod tomography;
pub mod tpi;

pub use histogram::{correlate, CoincidenceHistogram};
pub use peaks::{g2_zero, integrate_peaks, G2Value, PeakAreas};
