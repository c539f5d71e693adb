//! Monte Carlo simulation of a quantum-dot biexciton-exciton cascade and the
//! photon-correlation analysis that turns detector time tags into g²(0),
//! polarization contrasts, entanglement fidelity, two-photon interference
//! visibilities, lifetimes and coherence times.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod constants;
pub mod detection;
pub mod error;
pub mod experiments;
pub mod formats;
pub mod quantum_state;
pub mod report;
pub mod reproduce;
pub mod rng;
pub mod run;
pub mod source;
pub mod timetag;

pub use analysis::CoincidenceHistogram;
pub use config::{ExperimentKind, RunConfig};
pub use error::{Error, Result};
pub use experiments::ExperimentConfig;
pub use quantum_state::{Basis, CascadeStateParams, PolarizationVector, TwoQubitDensity};
pub use report::Report;
pub use source::{Channel, PhotonEvent, SourceParams};
pub use timetag::{TimeTag, TimeTagStream};
