use rand::Rng;

use crate::detection::{hom_coalesce, jittered, route_single, Port, Wavepacket};
use crate::error::{Error, Result};
use crate::quantum_state::{Basis, PolarizationVector, ProductBasis};
use crate::source::{emit_cascade, Channel, PhotonEvent};
use crate::timetag::TimeTagStream;

use super::{experiment_key, run_periods, ExperimentConfig};

struct InFlight {
    ev: PhotonEvent,
    path_delay: i64,
    arrival: i64,
    pulse: usize,
    /// Detection draw, compared against the efficiency of the exit port.
    u_detect: f64,
}

/// Two-photon interference in the unbalanced Mach–Zehnder interferometer.
///
/// Each period holds two excitation pulses. Photons of `channel` pass an H
/// polarizer, take the short or long arm at random, and meet at the second
/// beamsplitter. For `parallel = false` the long arm rotates the photon to V.
/// Photons of different pulses arriving within `hom_window_ps` interfere;
/// all others route independently. With a balanced beamsplitter the overlap
/// is only evaluated when both photons can be detected, since a lone click
/// leaves through either port with probability 1/2 either way.
pub fn run_tpi(cfg: &ExperimentConfig, channel: Channel, parallel: bool) -> Result<(TimeTagStream, TimeTagStream)> {
    if cfg.source.double_pulse_delay_ps <= 0 {
        return Err(Error::Config {
            location: "source.double_pulse_delay_ps".into(),
            message: "two-photon interference needs double-pulse excitation".into(),
        });
    }
    let p_prep = cfg.prepared_probability();
    let key = experiment_key("tpi", (channel as u64) << 1 | u64::from(parallel));
    let source = &cfg.source;
    let max_eff = cfg.detectors[0].efficiency.max(cfg.detectors[1].efficiency);
    let balanced = cfg.beamsplitter.transmittance == 0.5;
    let (a, b) = run_periods(cfg, key, |t0, rng, out| {
        let mut photons: Vec<InFlight> = Vec::with_capacity(2);
        for (pulse, offset) in source.pulse_offsets().into_iter().enumerate() {
            let prepared = rng.random::<f64>() < p_prep;
            let Some((xx, x)) =
                emit_cascade(source, ProductBasis::same(Basis::Linear), t0 + offset, prepared, pulse as u64, rng)?
            else {
                continue;
            };
            let mut ev = if channel == Channel::XX { xx } else { x };
            if ev.polarization.inner(&PolarizationVector::h()).norm_sqr() < 0.5 {
                continue;
            }
            let long = rng.random::<bool>();
            let path_delay = if long { cfg.mzi_delay_ps } else { 0 };
            if long && !parallel {
                ev.polarization = PolarizationVector::v();
            }
            let u_detect = rng.random::<f64>();
            photons.push(InFlight { arrival: ev.emission_time + path_delay, ev, path_delay, pulse, u_detect });
        }
        photons.sort_by_key(|p| p.arrival);

        let mut ports: Vec<Option<Port>> = vec![None; photons.len()];
        let mut i = 0;
        while i + 1 < photons.len() {
            let (p, q) = (&photons[i], &photons[i + 1]);
            if p.pulse != q.pulse && (q.arrival - p.arrival).abs() < cfg.hom_window_ps {
                if balanced && !(p.u_detect < max_eff && q.u_detect < max_eff) {
                    i += 2;
                    continue;
                }
                let wp = Wavepacket::of(&p.ev, source, p.path_delay);
                let wq = Wavepacket::of(&q.ev, source, q.path_delay);
                let (a, b) = hom_coalesce((&p.ev, &wp), (&q.ev, &wq), &cfg.beamsplitter, parallel, rng)?;
                ports[i] = Some(a);
                ports[i + 1] = Some(b);
                i += 2;
            } else {
                i += 1;
            }
        }
        for (photon, port) in photons.iter().zip(ports) {
            let port = port.unwrap_or_else(|| route_single(&cfg.beamsplitter, rng)).index();
            let d = &cfg.detectors[port];
            if photon.u_detect < d.efficiency {
                out[port].push(jittered(photon.arrival, d, rng));
            }
        }
        Ok(())
    })?;
    let tag = |s: TimeTagStream| {
        s.with_meta("experiment", "tpi")
            .with_meta("channel", channel.name())
            .with_meta("polarization", if parallel { "parallel" } else { "cross" })
    };
    Ok((tag(a), tag(b)))
}
