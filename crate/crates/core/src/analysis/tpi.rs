//! Two-photon interference visibilities from five-peak coincidence clusters.
//!
//! The unbalanced interferometer delay `δt` splits each repetition period
//! into a cluster of peaks at `-2δt..2δt`. Peak `A1..A5` of the zero-delay
//! cluster sits at `-2δt..2δt`; when the period is short the outer peaks of
//! the neighbouring clusters (`B_L`, `B_R`) fall near `A2` and `A4`, giving
//! the composite areas `A2*` and `A4*`.

use serde::{Deserialize, Serialize};

use super::histogram::CoincidenceHistogram;
use super::peaks::{accidentals_per_channel, integrate_range};
use crate::error::{Error, Result};
use crate::source::Channel;

/// `(A2, A4)` from the composite areas, using `B = A/2`.
pub fn rescale_overlapped_peaks(a2_star: f64, a4_star: f64) -> (f64, f64) {
    (a2_star * 2.0 / 3.0, a4_star * 2.0 / 3.0)
}

/// `1 - A3 / ((A2* + A4*)/3)`.
pub fn tpi_visibility_sidepeak(a2_star: f64, a3: f64, a4_star: f64) -> Result<f64> {
    let denom = (a2_star + a4_star) / 3.0;
    if !(denom > 0.0) {
        return Err(Error::Degenerate("A2* + A4* = 0".into()));
    }
    Ok(1.0 - a3 / denom)
}

/// `1 - g∥(0)/g⊥(0)`.
pub fn tpi_visibility_crosspol(g2_parallel_center: f64, g2_cross_center: f64) -> Result<f64> {
    if !(g2_cross_center > 0.0) {
        return Err(Error::Degenerate("zero cross-polarized reference".into()));
    }
    Ok(1.0 - g2_parallel_center / g2_cross_center)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityMethod {
    SidePeak,
    CrossPol,
}

/// Raw, dark-corrected and fully corrected visibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub raw: f64,
    pub apd_corrected: f64,
    pub fully_corrected: f64,
    pub method: VisibilityMethod,
    pub channel: Channel,
}

/// Visibility after removing accidentals that make up `accidental_fraction`
/// of the reference peak area.
pub fn apd_correct(v: f64, accidental_fraction: f64) -> Result<f64> {
    let factor = 1.0 - accidental_fraction;
    if !(factor > 0.0) {
        return Err(Error::Degenerate(format!("accidental fraction {accidental_fraction} ≥ 1")));
    }
    Ok(v / factor)
}

/// Divides out the beamsplitter mode overlap and the residual multi-photon
/// probability: `v / ((1-ε)²·(1 - 2g²))`, capped at 1.
pub fn bs_correct(v_apd: f64, mode_overlap_1me: f64, g2_residual: f64) -> Result<f64> {
    let factor = mode_overlap_1me * mode_overlap_1me * (1.0 - 2.0 * g2_residual);
    if !(factor > 0.0) {
        return Err(Error::Degenerate(format!("correction factor {factor} ≤ 0")));
    }
    Ok((v_apd / factor).min(1.0))
}

/// Runs both correction stages.
pub fn correct_visibility(
    v: f64,
    accidental_fraction: f64,
    mode_overlap_1me: f64,
    g2_residual: f64,
    method: VisibilityMethod,
    channel: Channel,
) -> Result<VisibilityReport> {
    if !(0.0..=1.0).contains(&mode_overlap_1me) || g2_residual < 0.0 || accidental_fraction < 0.0 {
        return Err(Error::OutOfRange {
            name: "correction inputs",
            detail: format!("accidental fraction {accidental_fraction}, overlap {mode_overlap_1me}, g2 {g2_residual}"),
        });
    }
    let apd = apd_correct(v, accidental_fraction)?;
    let full = bs_correct(apd, mode_overlap_1me, g2_residual)?;
    Ok(VisibilityReport { raw: v, apd_corrected: apd, fully_corrected: full, method, channel })
}

/// Cluster geometry of the interference histogram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpiGeometry {
    pub period_ps: f64,
    pub delay_ps: f64,
    pub half_window_ps: f64,
}

impl TpiGeometry {
    pub fn paper_default() -> Self {
        Self { period_ps: crate::constants::REP_PERIOD_PS as f64, delay_ps: 4000.0, half_window_ps: 1500.0 }
    }

    /// Centre of sub-peak `sub` (-2..=2) of cluster `cluster`.
    pub fn peak_center(&self, cluster: i64, sub: i64) -> f64 {
        cluster as f64 * self.period_ps + sub as f64 * self.delay_ps
    }
}

/// Area with the number of bins it spans.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    pub counts: f64,
    pub bins: usize,
}

impl Area {
    /// Area minus a flat background of `per_bin` counts per bin, floored at 0.
    pub fn minus(&self, per_bin: f64) -> f64 {
        (self.counts - per_bin * self.bins as f64).max(0.0)
    }
}

/// Raw areas of one sub-peak: `±half_window` around its centre.
pub fn sub_peak_area(h: &CoincidenceHistogram, g: &TpiGeometry, cluster: i64, sub: i64) -> Result<Area> {
    let c = g.peak_center(cluster, sub);
    integrate_range(h, c - g.half_window_ps, c + g.half_window_ps)
        .map(|(counts, bins)| Area { counts, bins })
        .ok_or_else(|| Error::Degenerate(format!("peak ({cluster}, {sub}) outside histogram")))
}

/// Zero-delay cluster areas `A2*`, `A3`, `A4*`.
///
/// `A2*` integrates the union of the windows around `A2` (at `-δt`) and the
/// outer peak of the previous cluster (at `-(T - 2δt)`); `A4*` mirrors it.
/// When the period is long enough that the neighbour sits outside the window
/// reach, only the `A2`/`A4` windows are used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroCluster {
    pub a2_star: Area,
    pub a3: Area,
    pub a4_star: Area,
    /// `true` when the neighbouring outer peaks were folded into `A2*`/`A4*`.
    pub overlapped: bool,
}

pub fn zero_cluster(h: &CoincidenceHistogram, g: &TpiGeometry) -> Result<ZeroCluster> {
    let hw = g.half_window_ps;
    let a2 = -g.delay_ps;
    let bl = -(g.period_ps - 2.0 * g.delay_ps);
    let overlapped = (a2 - bl).abs() < 2.0 * hw;
    let (lo, hi) = if overlapped { (a2.min(bl) - hw, a2.max(bl) + hw) } else { (a2 - hw, a2 + hw) };
    let get = |lo: f64, hi: f64| {
        integrate_range(h, lo, hi)
            .map(|(counts, bins)| Area { counts, bins })
            .ok_or_else(|| Error::Degenerate("zero cluster outside histogram".into()))
    };
    Ok(ZeroCluster { a2_star: get(lo, hi)?, a3: get(-hw, hw)?, a4_star: get(-hi, -lo)?, overlapped })
}

/// Poisson error of the raw side-peak visibility.
pub fn sidepeak_sigma(zc: &ZeroCluster) -> f64 {
    let s = (zc.a2_star.counts + zc.a4_star.counts) / 3.0;
    let r = zc.a3.counts / s;
    r * (1.0 / zc.a3.counts.max(1.0) + 1.0 / (3.0 * s).max(1.0)).sqrt()
}

/// Mean area of the centre peaks of the delayed clusters `1..=clusters`
/// on both sides, the Poisson reference for normalizing `A3`.
pub fn delayed_center_level(h: &CoincidenceHistogram, g: &TpiGeometry, clusters: i64) -> Result<Area> {
    let mut total = 0.0;
    let mut bins = 0;
    let mut n = 0;
    for m in 1..=clusters {
        for c in [-m, m] {
            let a = sub_peak_area(h, g, c, 0)?;
            total += a.counts;
            bins += a.bins;
            n += 1;
        }
    }
    Ok(Area { counts: total / n as f64, bins: bins / n })
}

/// Visibilities of one parallel/cross pair of histograms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TpiAnalysis {
    pub channel: Channel,
    pub sidepeak: VisibilityReport,
    pub crosspol: VisibilityReport,
    pub sidepeak_sigma: f64,
    pub crosspol_sigma: f64,
    /// Dark accidentals per bin in the parallel histogram.
    pub accidentals_per_bin: f64,
    pub g2_parallel: f64,
    pub g2_cross: f64,
}

/// Correction inputs for the setup-imperfection stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetupCorrection {
    pub mode_overlap_1me: f64,
    pub g2_residual: f64,
    pub dark_rate: f64,
}

/// Side-peak and cross-polarized visibilities with both correction stages.
///
/// The side-peak method works on the parallel histogram alone. The
/// cross-polarized method normalizes each zero-delay peak by the delayed
/// cluster centres of its own histogram.
pub fn analyze_tpi(
    parallel: &CoincidenceHistogram,
    cross: &CoincidenceHistogram,
    g: &TpiGeometry,
    corr: &SetupCorrection,
    channel: Channel,
) -> Result<TpiAnalysis> {
    let clusters = 3;
    let zc = zero_cluster(parallel, g)?;
    let acc = accidentals_per_channel(parallel, corr.dark_rate);

    let v_side = tpi_visibility_sidepeak(zc.a2_star.counts, zc.a3.counts, zc.a4_star.counts)?;
    let v_side_apd = tpi_visibility_sidepeak(zc.a2_star.minus(acc), zc.a3.minus(acc), zc.a4_star.minus(acc))?;
    let side_sigma = sidepeak_sigma(&zc);

    let ref_par = delayed_center_level(parallel, g, clusters)?;
    let ref_cross = delayed_center_level(cross, g, clusters)?;
    let zc_cross = zero_cluster(cross, g)?;
    let acc_cross = accidentals_per_channel(cross, corr.dark_rate);
    let g_par = zc.a3.counts / ref_par.counts;
    let g_cross = zc_cross.a3.counts / ref_cross.counts;
    let v_cross = tpi_visibility_crosspol(g_par, g_cross)?;
    let g_par_apd = zc.a3.minus(acc) / ref_par.minus(acc);
    let g_cross_apd = zc_cross.a3.minus(acc_cross) / ref_cross.minus(acc_cross);
    let v_cross_apd = tpi_visibility_crosspol(g_par_apd, g_cross_apd)?;
    let cross_sigma = {
        let r = g_par / g_cross;
        let n_ref = 2.0 * clusters as f64;
        r * (1.0 / zc.a3.counts.max(1.0)
            + 1.0 / zc_cross.a3.counts.max(1.0)
            + 1.0 / (ref_par.counts * n_ref).max(1.0)
            + 1.0 / (ref_cross.counts * n_ref).max(1.0))
        .sqrt()
    };

    let report = |raw: f64, apd: f64, method| -> Result<VisibilityReport> {
        Ok(VisibilityReport {
            raw,
            apd_corrected: apd,
            fully_corrected: bs_correct(apd, corr.mode_overlap_1me, corr.g2_residual)?,
            method,
            channel,
        })
    };
    Ok(TpiAnalysis {
        channel,
        sidepeak: report(v_side, v_side_apd, VisibilityMethod::SidePeak)?,
        crosspol: report(v_cross, v_cross_apd, VisibilityMethod::CrossPol)?,
        sidepeak_sigma: side_sigma,
        crosspol_sigma: cross_sigma,
        accidentals_per_bin: acc,
        g2_parallel: g_par,
        g2_cross: g_cross,
    })
}
