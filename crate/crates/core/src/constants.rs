//! Physical constants in the unit system used throughout the crate
//! (picoseconds, micro-electronvolts, seconds for integration times).

/// Reduced Planck constant in µeV·ps.
pub const HBAR_UEV_PS: f64 = 658.2119;

/// Planck constant in µeV·ns.
pub const PLANCK_UEV_NS: f64 = 4.135667;

/// Time-bandwidth product of a transform-limited Gaussian pulse.
pub const GAUSSIAN_TBP_LIMIT: f64 = 0.441;

/// Laser repetition period for a 76 MHz oscillator, in ps.
pub const REP_PERIOD_PS: i64 = 13_158;

/// Picoseconds per second.
pub const PS_PER_S: f64 = 1e12;
