//! Detection chain: detector thinning and jitter, dark counts, beamsplitter
//! routing and two-photon coalescence.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::constants::PS_PER_S;
use crate::error::{check_range, Error, Result};
use crate::rng::{Domain, Substreams};
use crate::source::{phase_trajectory, PhotonEvent, SourceParams};
use crate::timetag::TimeTag;

/// Envelope window in units of T1 used for overlap integrals.
pub const OVERLAP_WINDOW_T1: f64 = 8.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    pub efficiency: f64,
    /// Dark count rate in counts/s.
    pub dark_rate: f64,
    /// Gaussian timing jitter, standard deviation in ps.
    pub jitter_sigma_ps: f64,
    pub id: u32,
}

impl DetectorParams {
    pub fn ideal(id: u32) -> Self {
        Self { efficiency: 1.0, dark_rate: 0.0, jitter_sigma_ps: 0.0, id }
    }

    pub fn validate(&self) -> Result<()> {
        check_range("efficiency", self.efficiency, 0.0, 1.0)?;
        check_range("dark_rate", self.dark_rate, 0.0, f64::MAX)?;
        check_range("jitter_sigma_ps", self.jitter_sigma_ps, 0.0, f64::MAX)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BeamsplitterParams {
    pub transmittance: f64,
    /// Spatial mode overlap `1 - ε` of the two inputs.
    pub mode_overlap: f64,
}

impl Default for BeamsplitterParams {
    fn default() -> Self {
        Self { transmittance: 0.5, mode_overlap: 1.0 }
    }
}

impl BeamsplitterParams {
    pub fn validate(&self) -> Result<()> {
        check_range("transmittance", self.transmittance, 0.0, 1.0)?;
        check_range("mode_overlap", self.mode_overlap, 0.0, 1.0)
    }
}

/// Beamsplitter output port.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Port {
    Zero,
    One,
}

impl Port {
    pub fn index(self) -> usize {
        match self {
            Port::Zero => 0,
            Port::One => 1,
        }
    }
}

/// Click time for a photon reaching the detector at `arrival_ps`, if detected.
pub fn detect_at<R: Rng + ?Sized>(arrival_ps: i64, d: &DetectorParams, rng: &mut R) -> Option<TimeTag> {
    if rng.random::<f64>() >= d.efficiency {
        return None;
    }
    Some(jittered(arrival_ps, d, rng))
}

/// Click time of a detected photon: `arrival_ps` plus Gaussian jitter.
pub fn jittered<R: Rng + ?Sized>(arrival_ps: i64, d: &DetectorParams, rng: &mut R) -> TimeTag {
    let jitter = if d.jitter_sigma_ps > 0.0 {
        Normal::new(0.0, d.jitter_sigma_ps).expect("finite sigma").sample(rng)
    } else {
        0.0
    };
    TimeTag::new(d.id, arrival_ps + jitter.round() as i64)
}

/// Thins and jitters one photon at its emission time.
pub fn detect<R: Rng + ?Sized>(event: &PhotonEvent, d: &DetectorParams, rng: &mut R) -> Option<TimeTag> {
    detect_at(event.emission_time, d, rng)
}

/// Homogeneous Poisson clicks on `[t_start, t_end)`.
pub fn dark_counts<R: Rng + ?Sized>(d: &DetectorParams, t_start: i64, t_end: i64, rng: &mut R) -> Vec<TimeTag> {
    let mut out = Vec::new();
    if d.dark_rate <= 0.0 || t_end <= t_start {
        return out;
    }
    let gap = Exp::new(d.dark_rate / PS_PER_S).expect("positive rate");
    let mut t = t_start as f64;
    loop {
        t += gap.sample(rng);
        if t >= t_end as f64 {
            break;
        }
        out.push(TimeTag::new(d.id, t.floor() as i64));
    }
    out
}

/// Dark counts of `d` over `[0, duration)`, generated in fixed-size chunks
/// on independent substreams so the result does not depend on threading.
pub fn dark_counts_chunked(d: &DetectorParams, duration_ps: i64, chunk_ps: i64, streams: &Substreams) -> Vec<TimeTag> {
    let mut out = Vec::new();
    if d.dark_rate <= 0.0 {
        return out;
    }
    let chunks = (duration_ps + chunk_ps - 1) / chunk_ps;
    for c in 0..chunks {
        let start = c * chunk_ps;
        let end = (start + chunk_ps).min(duration_ps);
        let index = (u64::from(d.id) << 40) | c as u64;
        out.extend(dark_counts(d, start, end, &mut streams.stream(Domain::Dark, index)));
    }
    out
}

/// Routes one photon: port 0 with probability `transmittance`.
pub fn route_single<R: Rng + ?Sized>(bs: &BeamsplitterParams, rng: &mut R) -> Port {
    if rng.random::<f64>() < bs.transmittance {
        Port::Zero
    } else {
        Port::One
    }
}

/// Single-photon temporal mode at the beamsplitter: exponential envelope
/// from `start` with lifetime `t1`, Wiener phase set by `t2` and `seed`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavepacket {
    pub start: i64,
    pub t1: f64,
    pub t2: f64,
    pub seed: u64,
}

impl Wavepacket {
    /// Mode of `ev` after an extra propagation delay `path_delay_ps`.
    pub fn of(ev: &PhotonEvent, params: &SourceParams, path_delay_ps: i64) -> Self {
        Self {
            start: ev.excitation_time + path_delay_ps,
            t1: params.lifetime(ev.channel),
            t2: params.coherence_time(ev.channel),
            seed: ev.coherence_seed,
        }
    }

    fn samples(&self, lo: i64, hi: i64) -> Result<Vec<Complex64>> {
        let n = (hi - lo) as usize;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        let offset = (self.start - lo) as usize;
        if offset >= n {
            return Ok(out);
        }
        let len = n - offset;
        let mut rng = Substreams::new(self.seed).stream(Domain::Phase, 0);
        let phi = phase_trajectory(self.t1, self.t2, len as f64, 1.0, &mut rng)?;
        for k in 0..len {
            let amp = (-(k as f64) / (2.0 * self.t1)).exp();
            out[offset + k] = Complex64::from_polar(amp, phi[k]);
        }
        Ok(out)
    }
}

/// `∫ ψ_a*(t) ψ_b(t) dt` on a 1 ps grid, each mode normalized on the grid.
pub fn wavepacket_overlap(a: &Wavepacket, b: &Wavepacket) -> Result<Complex64> {
    let lo = a.start.min(b.start);
    let end_a = a.start + (OVERLAP_WINDOW_T1 * a.t1).ceil() as i64;
    let end_b = b.start + (OVERLAP_WINDOW_T1 * b.t1).ceil() as i64;
    let hi = end_a.max(end_b);
    let mut pa = a.samples(lo, hi)?;
    let mut pb = b.samples(lo, hi)?;
    // Truncate each envelope at its own window.
    for (p, end) in [(&mut pa, end_a), (&mut pb, end_b)] {
        for z in p.iter_mut().skip((end - lo) as usize) {
            *z = Complex64::new(0.0, 0.0);
        }
    }
    let na: f64 = pa.iter().map(|z| z.norm_sqr()).sum();
    let nb: f64 = pb.iter().map(|z| z.norm_sqr()).sum();
    if na == 0.0 || nb == 0.0 {
        return Err(Error::Degenerate("empty wavepacket".into()));
    }
    let s: Complex64 = pa.iter().zip(&pb).map(|(x, y)| x.conj() * y).sum();
    Ok(s / (na * nb).sqrt())
}

/// Probability that two photons meeting at the beamsplitter leave through
/// different ports, given the squared temporal overlap.
pub fn coincidence_probability(overlap_sq: f64, bs: &BeamsplitterParams, parallel: bool) -> f64 {
    let t = bs.transmittance;
    let r = 1.0 - t;
    let m = if parallel { bs.mode_overlap * bs.mode_overlap * overlap_sq } else { 0.0 };
    (1.0 - m) * (t * t + r * r) + m * (t - r) * (t - r)
}

/// Output ports of two photons meeting at the beamsplitter.
///
/// Cross-polarized photons route independently. Parallel photons leave
/// through different ports with probability `(1 - M)/2` for a balanced
/// splitter, `M = mode_overlap²·|O_ab|²·|⟨p_a|p_b⟩|²`.
pub fn hom_coalesce<R: Rng + ?Sized>(
    photon_a: (&PhotonEvent, &Wavepacket),
    photon_b: (&PhotonEvent, &Wavepacket),
    bs: &BeamsplitterParams,
    parallel: bool,
    rng: &mut R,
) -> Result<(Port, Port)> {
    if !parallel {
        return Ok((route_single(bs, rng), route_single(bs, rng)));
    }
    let pol = photon_a.0.polarization.inner(&photon_b.0.polarization).norm_sqr();
    let o = wavepacket_overlap(photon_a.1, photon_b.1)?;
    let p_diff = coincidence_probability(o.norm_sqr() * pol, bs, true);
    let split = rng.random::<f64>() < p_diff;
    let first_zero = rng.random::<f64>() < 0.5;
    Ok(match (split, first_zero) {
        (true, true) => (Port::Zero, Port::One),
        (true, false) => (Port::One, Port::Zero),
        (false, true) => (Port::Zero, Port::Zero),
        (false, false) => (Port::One, Port::One),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum_state::PolarizationVector;
    use crate::source::Channel;
    use approx::assert_abs_diff_eq;

    fn photon(t: i64) -> PhotonEvent {
        PhotonEvent {
            channel: Channel::XX,
            pair_id: 0,
            emission_time: t,
            excitation_time: t,
            polarization: PolarizationVector::h(),
            coherence_seed: 5,
        }
    }

    #[test]
    fn detect_ideal_and_blind() {
        let mut rng = Substreams::new(1).stream(Domain::Aux(0), 0);
        let ev = photon(1234);
        assert_eq!(detect(&ev, &DetectorParams::ideal(3), &mut rng), Some(TimeTag::new(3, 1234)));
        let blind = DetectorParams { efficiency: 0.0, ..DetectorParams::ideal(0) };
        assert!((0..1000).all(|_| detect(&ev, &blind, &mut rng).is_none()));
    }

    #[test]
    fn jitter_spread() {
        let mut rng = Substreams::new(2).stream(Domain::Aux(0), 0);
        let d = DetectorParams { jitter_sigma_ps: 50.0, ..DetectorParams::ideal(0) };
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| detect_at(0, &d, &mut rng).unwrap().timestamp as f64).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        assert!((sd - 50.0).abs() < 2.0, "sd {sd}");
    }

    #[test]
    fn dark_count_statistics() {
        let d = DetectorParams { dark_rate: 250.0, ..DetectorParams::ideal(0) };
        let mut rng = Substreams::new(3).stream(Domain::Aux(0), 0);
        assert!(dark_counts(&DetectorParams::ideal(0), 0, 1_000_000, &mut rng).is_empty());
        // 1000 s of dark counts at 250 /s.
        let tags = dark_counts(&d, 0, 1_000 * 1_000_000_000_000, &mut rng);
        let expect = 250_000.0;
        assert!((tags.len() as f64 - expect).abs() < 3.0 * expect.sqrt());
        let gaps: Vec<f64> = tags.windows(2).map(|w| (w[1].timestamp - w[0].timestamp) as f64).collect();
        let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
        let want = 1e12 / 250.0;
        assert!((mean / want - 1.0).abs() < 3.0 / (gaps.len() as f64).sqrt(), "mean gap {mean}");
        // Exponential gaps: the fraction shorter than the mean is 1 - 1/e.
        let frac = gaps.iter().filter(|&&g| g < want).count() as f64 / gaps.len() as f64;
        let p = 1.0 - (-1.0f64).exp();
        let sigma = (p * (1.0 - p) / gaps.len() as f64).sqrt();
        assert!((frac - p).abs() < 4.0 * sigma, "frac {frac}");
    }

    #[test]
    fn chunked_dark_counts_are_sorted_and_reproducible() {
        let d = DetectorParams { dark_rate: 1e6, ..DetectorParams::ideal(2) };
        let s = Substreams::new(11);
        let a = dark_counts_chunked(&d, 50_000_000, 1_000_000, &s);
        let b = dark_counts_chunked(&d, 50_000_000, 1_000_000, &s);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].timestamp <= w[1].timestamp));
        assert!(a.iter().all(|t| t.detector_id == 2 && t.timestamp < 50_000_000));
    }

    #[test]
    fn routing_statistics() {
        let mut rng = Substreams::new(4).stream(Domain::Aux(0), 0);
        let always = BeamsplitterParams { transmittance: 1.0, mode_overlap: 1.0 };
        assert!((0..1000).all(|_| route_single(&always, &mut rng) == Port::Zero));
        for t in [0.5, 0.3] {
            let bs = BeamsplitterParams { transmittance: t, mode_overlap: 1.0 };
            let n = 10_000;
            let zeros = (0..n).filter(|_| route_single(&bs, &mut rng) == Port::Zero).count() as f64;
            let sigma = (n as f64 * t * (1.0 - t)).sqrt();
            assert!((zeros - n as f64 * t).abs() < 3.0 * sigma);
        }
    }

    #[test]
    fn identical_modes_fully_overlap() {
        let w = Wavepacket { start: 100, t1: 220.0, t2: 192.0, seed: 77 };
        let o = wavepacket_overlap(&w, &w).unwrap();
        assert_abs_diff_eq!(o.norm(), 1.0, epsilon = 1e-12);
        let bs = BeamsplitterParams::default();
        assert_abs_diff_eq!(coincidence_probability(1.0, &bs, true), 0.0);
        assert_abs_diff_eq!(coincidence_probability(1.0, &bs, false), 0.5);
        assert_abs_diff_eq!(coincidence_probability(0.3, &bs, true), 0.35, epsilon = 1e-15);
    }

    #[test]
    fn delayed_lifetime_limited_overlap() {
        // Without dephasing two exponentials offset by Δ overlap with |O|² = exp(-Δ/T1).
        let a = Wavepacket { start: 0, t1: 400.0, t2: 800.0, seed: 1 };
        let b = Wavepacket { start: 200, t1: 400.0, t2: 800.0, seed: 2 };
        let o = wavepacket_overlap(&a, &b).unwrap().norm_sqr();
        assert!((o - (-0.5f64).exp()).abs() < 2e-3, "{o}");
    }

    #[test]
    fn coalescence_outcomes() {
        let mut rng = Substreams::new(5).stream(Domain::Aux(0), 0);
        let ev = photon(0);
        let w = Wavepacket { start: 0, t1: 220.0, t2: 440.0, seed: 3 };
        let bs = BeamsplitterParams::default();
        for _ in 0..500 {
            let (a, b) = hom_coalesce((&ev, &w), (&ev, &w), &bs, true, &mut rng).unwrap();
            assert_eq!(a, b);
        }
        let n = 10_000;
        let split = (0..n)
            .filter(|_| {
                let (a, b) = hom_coalesce((&ev, &w), (&ev, &w), &bs, false, &mut rng).unwrap();
                a != b
            })
            .count() as f64;
        assert!((split - 0.5 * n as f64).abs() < 3.0 * (n as f64 * 0.25).sqrt());
    }

    #[test]
    fn coincidence_monotone_in_overlap() {
        let mut prev = f64::INFINITY;
        for i in 0..=20 {
            let bs = BeamsplitterParams { transmittance: 0.5, mode_overlap: i as f64 / 20.0 };
            let p = coincidence_probability(0.7, &bs, true);
            assert!(p <= prev);
            prev = p;
        }
        let bs = BeamsplitterParams::default();
        let mut prev = f64::INFINITY;
        for i in 0..=20 {
            let p = coincidence_probability(i as f64 / 20.0, &bs, true);
            assert!(p <= prev);
            prev = p;
        }
    }
}
