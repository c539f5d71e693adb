//! Polarization-correlation contrasts and the fidelity bound from the six
//! co/cross-polarized XX–X cross-correlation histograms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::histogram::CoincidenceHistogram;
use super::peaks::{dark_correct, g2_zero_with_error, integrate_peaks, G2Value};
use crate::error::{Error, Result};
use crate::quantum_state::{fidelity_from_contrasts, Basis};

/// `(g_co - g_cross)/(g_co + g_cross)`.
pub fn contrast(g2_co: f64, g2_cross: f64) -> Result<f64> {
    let sum = g2_co + g2_cross;
    if !(sum > 0.0) {
        return Err(Error::Degenerate(format!("g2_co + g2_cross = {sum}")));
    }
    Ok((g2_co - g2_cross) / sum)
}

/// Contrast with first-order error propagation.
pub fn contrast_with_error(co: G2Value, cross: G2Value) -> Result<(f64, f64)> {
    let c = contrast(co.value, cross.value)?;
    let s = co.value + cross.value;
    let d_co = 2.0 * cross.value / (s * s);
    let d_cross = 2.0 * co.value / (s * s);
    Ok((c, ((d_co * co.sigma).powi(2) + (d_cross * cross.sigma).powi(2)).sqrt()))
}

/// One histogram per `(basis, co_polarized)` setting.
#[derive(Debug, Clone, Default)]
pub struct TomographyInput {
    pub histograms: BTreeMap<(Basis, bool), CoincidenceHistogram>,
    /// Dark count rate of each detector, counts/s.
    pub dark_rate: f64,
}

/// Peak geometry for the cross-correlation histograms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TomographyAnalysis {
    pub spacing_ps: f64,
    pub half_window_ps: f64,
}

impl Default for TomographyAnalysis {
    fn default() -> Self {
        Self { spacing_ps: crate::constants::REP_PERIOD_PS as f64, half_window_ps: 2000.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisResult {
    pub basis: Basis,
    pub g2_co: G2Value,
    pub g2_cross: G2Value,
    pub contrast: f64,
    pub contrast_sigma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TomographyResult {
    pub bases: Vec<BasisResult>,
    pub fidelity: f64,
    pub fidelity_sigma: f64,
    /// Any setting needed clamping after background subtraction.
    pub clamped: bool,
}

impl TomographyResult {
    pub fn contrast(&self, basis: Basis) -> f64 {
        self.bases.iter().find(|b| b.basis == basis).map(|b| b.contrast).unwrap_or(f64::NAN)
    }
}

/// Dark-corrected zero-delay g² of one setting.
pub fn setting_g2(h: &CoincidenceHistogram, dark_rate: f64, geometry: &TomographyAnalysis) -> Result<(G2Value, bool)> {
    let peaks = integrate_peaks(h, geometry.spacing_ps, geometry.half_window_ps)?;
    let corrected = dark_correct(h, &peaks, dark_rate);
    Ok((g2_zero_with_error(&corrected)?, corrected.clamped))
}

/// Integrates, dark-corrects and normalizes every setting, then forms the
/// three contrasts and the fidelity bound.
pub fn tomography_pipeline(input: &TomographyInput, geometry: &TomographyAnalysis) -> Result<TomographyResult> {
    let mut bases = Vec::with_capacity(3);
    let mut clamped = false;
    for basis in Basis::ALL {
        let get = |co: bool| {
            input.histograms.get(&(basis, co)).ok_or_else(|| {
                Error::Missing(format!(
                    "{} {} histogram",
                    basis.name(),
                    if co { "co-polarized" } else { "cross-polarized" }
                ))
            })
        };
        let (g_co, c1) = setting_g2(get(true)?, input.dark_rate, geometry)?;
        let (g_cross, c2) = setting_g2(get(false)?, input.dark_rate, geometry)?;
        clamped |= c1 | c2;
        let (c, sigma) = contrast_with_error(g_co, g_cross)?;
        bases.push(BasisResult { basis, g2_co: g_co, g2_cross: g_cross, contrast: c, contrast_sigma: sigma });
    }
    let fidelity = fidelity_from_contrasts(bases[0].contrast, bases[1].contrast, bases[2].contrast);
    let fidelity_sigma = bases.iter().map(|b| b.contrast_sigma.powi(2)).sum::<f64>().sqrt() / 4.0;
    Ok(TomographyResult { bases, fidelity, fidelity_sigma, clamped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contrast_values() {
        assert!((contrast(2.40, 0.17).unwrap() - 0.867).abs() < 1e-3);
        assert!((contrast(0.31, 1.70).unwrap() + 0.691).abs() < 1e-3);
        assert_eq!(contrast(1.3, 1.3).unwrap(), 0.0);
        assert!(contrast(0.0, 0.0).is_err());
    }

    #[test]
    fn reference_values_give_reference_fidelity() {
        let lin = contrast(2.40, 0.17).unwrap();
        let diag = contrast(2.18, 0.43).unwrap();
        let circ = contrast(0.31, 1.70).unwrap();
        let f = fidelity_from_contrasts(lin, diag, circ);
        assert!((f - 0.81).abs() < 0.005, "{f}");
    }

    #[test]
    fn missing_setting_is_reported() {
        let input = TomographyInput::default();
        let err = tomography_pipeline(&input, &TomographyAnalysis::default()).unwrap_err();
        assert!(matches!(err, Error::Missing(_)));
    }
}
