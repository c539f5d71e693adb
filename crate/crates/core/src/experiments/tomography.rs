use rand::Rng;

use crate::detection::detect;
use crate::error::{Error, Result};
use crate::quantum_state::{Basis, PolarizationVector, ProductBasis};
use crate::source::emit_cascade;
use crate::timetag::TimeTagStream;

use super::{experiment_key, run_periods, ExperimentConfig};

fn outcome_index(basis: Basis, pol: &PolarizationVector) -> usize {
    usize::from(basis.states()[0].inner(pol).norm_sqr() < 0.5)
}

/// XX–X cross-correlation behind polarizers. The XX photon reaches detector
/// 0 when it is found in state `xx_outcome` of `basis.xx`, the X photon
/// reaches detector 1 when found in state `x_outcome` of `basis.x`.
pub fn run_tomography_setting(
    cfg: &ExperimentConfig,
    basis: ProductBasis,
    xx_outcome: usize,
    x_outcome: usize,
) -> Result<(TimeTagStream, TimeTagStream)> {
    if xx_outcome > 1 || x_outcome > 1 {
        return Err(Error::OutOfRange {
            name: "outcome",
            detail: format!("({xx_outcome}, {x_outcome}) must be 0 or 1"),
        });
    }
    let p_prep = cfg.prepared_probability();
    let setting = (basis.xx as u64) << 3 | (basis.x as u64) << 2 | (xx_outcome as u64) << 1 | x_outcome as u64;
    let key = experiment_key("tomography", setting);
    let (a, b) = run_periods(cfg, key, |t0, rng, out| {
        for offset in cfg.source.pulse_offsets() {
            let prepared = rng.random::<f64>() < p_prep;
            let Some((xx, x)) = emit_cascade(&cfg.source, basis, t0 + offset, prepared, 0, rng)? else {
                continue;
            };
            if outcome_index(basis.xx, &xx.polarization) == xx_outcome {
                if let Some(tag) = detect(&xx, &cfg.detectors[0], rng) {
                    out[0].push(tag);
                }
            }
            if outcome_index(basis.x, &x.polarization) == x_outcome {
                if let Some(tag) = detect(&x, &cfg.detectors[1], rng) {
                    out[1].push(tag);
                }
            }
        }
        Ok(())
    })?;
    let tag = |s: TimeTagStream| {
        s.with_meta("experiment", "tomography")
            .with_meta("basis", basis.xx.name())
            .with_meta("outcomes", format!("{xx_outcome}{x_outcome}"))
    };
    Ok((tag(a), tag(b)))
}

/// One of the six co/cross-polarized settings: XX stream on detector 0, X
/// stream on detector 1.
pub fn run_tomography(
    cfg: &ExperimentConfig,
    basis: Basis,
    co_polarized: bool,
) -> Result<(TimeTagStream, TimeTagStream)> {
    run_tomography_setting(cfg, ProductBasis::same(basis), 0, usize::from(!co_polarized))
}
