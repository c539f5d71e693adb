use crate::detection::{detect, route_single};
use crate::error::Result;
use crate::quantum_state::{Basis, ProductBasis};
use crate::source::{emit_cascade, Channel};
use crate::timetag::TimeTagStream;
use rand::Rng;

use super::{experiment_key, run_periods, ExperimentConfig};

/// Autocorrelation of one channel: its photons split on the beamsplitter
/// onto the two detectors.
pub fn run_hbt(cfg: &ExperimentConfig, channel: Channel) -> Result<(TimeTagStream, TimeTagStream)> {
    let p_prep = cfg.prepared_probability();
    let key = experiment_key("hbt", channel as u64);
    let (a, b) = run_periods(cfg, key, |t0, rng, out| {
        for offset in cfg.source.pulse_offsets() {
            let prepared = rng.random::<f64>() < p_prep;
            let Some((xx, x)) =
                emit_cascade(&cfg.source, ProductBasis::same(Basis::Linear), t0 + offset, prepared, 0, rng)?
            else {
                continue;
            };
            let ev = if channel == Channel::XX { xx } else { x };
            let port = route_single(&cfg.beamsplitter, rng).index();
            if let Some(tag) = detect(&ev, &cfg.detectors[port], rng) {
                out[port].push(tag);
            }
        }
        Ok(())
    })?;
    Ok((
        a.with_meta("experiment", "hbt").with_meta("channel", channel.name()),
        b.with_meta("experiment", "hbt").with_meta("channel", channel.name()),
    ))
}
