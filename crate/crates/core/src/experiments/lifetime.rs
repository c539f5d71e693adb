use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::CoincidenceHistogram;
use crate::detection::detect;
use crate::error::{Error, Result};
use crate::quantum_state::{Basis, ProductBasis};
use crate::source::{emit_cascade, Channel};
use crate::timetag::TimeTagStream;

use super::{experiment_key, run_periods, ExperimentConfig};

/// Histogram range of detection times relative to the preceding pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifetimeWindow {
    pub bin_width_ps: i64,
    /// Start of the first bin relative to the pulse (negative to show the rise).
    pub start_ps: i64,
    pub bins: usize,
}

impl Default for LifetimeWindow {
    fn default() -> Self {
        Self { bin_width_ps: 16, start_ps: -1024, bins: 512 }
    }
}

/// Histogram of `(t - pulse)` for every tag, folding each tag onto the
/// pulse train of period `period_ps` starting at 0.
pub fn start_stop_histogram(s: &TimeTagStream, period_ps: i64, w: &LifetimeWindow) -> Result<CoincidenceHistogram> {
    if w.bin_width_ps <= 0 || w.bins == 0 || period_ps <= 0 {
        return Err(Error::OutOfRange { name: "lifetime window", detail: format!("{w:?}, period {period_ps}") });
    }
    let span = w.bin_width_ps * w.bins as i64;
    if span > period_ps {
        return Err(Error::OutOfRange {
            name: "lifetime window",
            detail: format!("span {span} ps exceeds the period {period_ps} ps"),
        });
    }
    let mut counts = vec![0u64; w.bins];
    for tag in &s.tags {
        let delta = (tag.timestamp - w.start_ps).rem_euclid(period_ps);
        let j = (delta / w.bin_width_ps) as usize;
        if j < w.bins {
            counts[j] += 1;
        }
    }
    let mut h = CoincidenceHistogram::new(w.bin_width_ps, w.start_ps, counts)?;
    h.integration_time_s = s.duration_s();
    h.singles_rates = (s.singles_rate(), 0.0);
    h.period_ps = period_ps;
    Ok(h)
}

/// Time-resolved photoluminescence of one channel on detector 0, histogrammed
/// against the laser pulses.
pub fn run_lifetime(cfg: &ExperimentConfig, channel: Channel, window: &LifetimeWindow) -> Result<CoincidenceHistogram> {
    let p_prep = cfg.prepared_probability();
    let key = experiment_key("lifetime", channel as u64);
    let (a, _) = run_periods(cfg, key, |t0, rng, out| {
        let prepared = rng.random::<f64>() < p_prep;
        if let Some((xx, x)) = emit_cascade(&cfg.source, ProductBasis::same(Basis::Linear), t0, prepared, 0, rng)? {
            let ev = if channel == Channel::XX { xx } else { x };
            if let Some(tag) = detect(&ev, &cfg.detectors[0], rng) {
                out[0].push(tag);
            }
        }
        Ok(())
    })?;
    start_stop_histogram(&a, cfg.source.rep_period_ps, window)
}
