//! Peak integration, g²(0) normalization and dark-count background.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::histogram::CoincidenceHistogram;
use crate::error::{Error, Result};

/// Integrated peak areas keyed by peak index (0 = zero delay).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakAreas {
    pub areas: BTreeMap<i64, f64>,
    /// Raw (uncorrected) counts, kept for Poisson error propagation.
    pub raw: BTreeMap<i64, f64>,
    /// Number of histogram bins summed for each peak.
    pub bins: BTreeMap<i64, usize>,
    /// Set when background subtraction drove an area below zero.
    pub clamped: bool,
}

impl PeakAreas {
    pub fn from_areas(areas: BTreeMap<i64, f64>, bins_per_peak: usize) -> Self {
        let bins = areas.keys().map(|&k| (k, bins_per_peak)).collect();
        Self { raw: areas.clone(), areas, bins, clamped: false }
    }

    pub fn get(&self, index: i64) -> Option<f64> {
        self.areas.get(&index).copied()
    }

    pub fn center(&self) -> Option<f64> {
        self.get(0)
    }

    /// Areas of all peaks other than the centre.
    pub fn side_areas(&self) -> Vec<f64> {
        self.areas.iter().filter(|(&k, _)| k != 0).map(|(_, &v)| v).collect()
    }

    fn side_raw(&self) -> Vec<f64> {
        self.raw.iter().filter(|(&k, _)| k != 0).map(|(_, &v)| v).collect()
    }
}

/// Sum of the bins whose centres lie in `[center - half_window, center + half_window)`.
/// Returns the area and the number of bins used.
pub fn integrate_window(h: &CoincidenceHistogram, center: f64, half_window: f64) -> Option<(f64, usize)> {
    integrate_range(h, center - half_window, center + half_window)
}

/// Sum of the bins whose centres lie in `[lo, hi)`.
pub fn integrate_range(h: &CoincidenceHistogram, lo: f64, hi: f64) -> Option<(f64, usize)> {
    let bw = h.bin_width_ps as f64;
    let first_center = h.origin_ps as f64 + 0.5 * bw;
    let first = ((lo - first_center) / bw).ceil() as i64;
    let end = ((hi - first_center) / bw).ceil() as i64;
    if first < 0 || end > h.len() as i64 || end <= first {
        return None;
    }
    let sum: u64 = h.counts[first as usize..end as usize].iter().sum();
    Some((sum as f64, (end - first) as usize))
}

/// Integrates every peak at `k·spacing` whose window lies inside the
/// histogram.
pub fn integrate_peaks(h: &CoincidenceHistogram, spacing: f64, half_window: f64) -> Result<PeakAreas> {
    if !(spacing > 2.0 * half_window) {
        return Err(Error::OverlappingPeaks { spacing, half_window });
    }
    let (lo, hi) = h.span();
    let kmin = ((lo as f64 + half_window) / spacing).ceil() as i64;
    let kmax = ((hi as f64 - half_window) / spacing).floor() as i64;
    let mut areas = BTreeMap::new();
    let mut bins = BTreeMap::new();
    for k in kmin..=kmax {
        if let Some((a, n)) = integrate_window(h, k as f64 * spacing, half_window) {
            areas.insert(k, a);
            bins.insert(k, n);
        }
    }
    if areas.is_empty() {
        return Err(Error::Degenerate("histogram too short for any peak window".into()));
    }
    Ok(PeakAreas { raw: areas.clone(), areas, bins, clamped: false })
}

/// g²(0) and its first-order Poisson error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct G2Value {
    pub value: f64,
    pub sigma: f64,
}

/// Centre area divided by the mean side-peak area.
pub fn g2_zero(p: &PeakAreas) -> Result<f64> {
    g2_zero_with_error(p).map(|g| g.value)
}

pub fn g2_zero_with_error(p: &PeakAreas) -> Result<G2Value> {
    let center = p.center().ok_or_else(|| Error::Missing("zero-delay peak".into()))?;
    let sides = p.side_areas();
    if sides.len() < 2 {
        return Err(Error::Degenerate(format!("need at least 2 side peaks, have {}", sides.len())));
    }
    let mean = sides.iter().sum::<f64>() / sides.len() as f64;
    if mean <= 0.0 {
        return Err(Error::Degenerate("zero side-peak mean".into()));
    }
    let value = center / mean;
    let raw_center = p.raw.get(&0).copied().unwrap_or(center).max(0.0);
    let raw_sides = p.side_raw();
    let var_mean = raw_sides.iter().sum::<f64>().max(0.0) / (raw_sides.len() as f64).powi(2);
    let sigma = (raw_center / (mean * mean) + value * value * var_mean / (mean * mean)).sqrt();
    Ok(G2Value { value, sigma })
}

/// Uncorrelated coincidences per histogram channel from dark counts:
/// `(n_s1 + n_s2)·n_dc·τ_c·T`.
pub fn dark_coincidence_estimate(n_s1: f64, n_s2: f64, n_dc: f64, tau_c_s: f64, t_s: f64) -> f64 {
    (n_s1 + n_s2) * n_dc * tau_c_s * t_s
}

/// Removes `per_channel` counts from every bin of every peak.
pub fn subtract_background(p: &PeakAreas, per_channel: f64, bins_per_peak: Option<usize>) -> PeakAreas {
    let mut out = p.clone();
    for (k, a) in out.areas.iter_mut() {
        let n = bins_per_peak.unwrap_or_else(|| p.bins.get(k).copied().unwrap_or(1));
        let v = *a - per_channel * n as f64;
        if v < 0.0 {
            out.clamped = true;
            *a = 0.0;
        } else {
            *a = v;
        }
    }
    out
}

/// Flat background per histogram channel when the recorded singles rates
/// already contain the dark counts: the dark-dark term is counted once.
pub fn accidentals_per_channel(h: &CoincidenceHistogram, dark_rate: f64) -> f64 {
    let tau = h.bin_width_ps as f64 * 1e-12;
    let both = dark_coincidence_estimate(h.singles_rates.0, h.singles_rates.1, dark_rate, tau, h.integration_time_s);
    (both - dark_rate * dark_rate * tau * h.integration_time_s).max(0.0)
}

/// Dark-corrected copy of `p`, with the per-channel background computed from
/// the histogram metadata.
pub fn dark_correct(h: &CoincidenceHistogram, p: &PeakAreas, dark_rate: f64) -> PeakAreas {
    subtract_background(p, accidentals_per_channel(h, dark_rate), None)
}
