use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::detect;
use crate::error::{Error, Result};
use crate::quantum_state::{Basis, ProductBasis};
use crate::rng::{splitmix64, Domain, Substreams};
use crate::source::{biexciton_population, emit_cascade};

use super::{experiment_key, in_pool, ExperimentConfig};

/// Detected photons per channel at one pulse area.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerPoint {
    pub theta: f64,
    pub i_x: u64,
    pub i_xx: u64,
}

/// Excitation power sweep: XX photons counted on detector 0, X photons on
/// detector 1, dark counts excluded.
pub fn run_power_series(cfg: &ExperimentConfig, theta_grid: &[f64], pulses_per_point: u64) -> Result<Vec<PowerPoint>> {
    cfg.validate()?;
    if theta_grid.is_empty() {
        return Err(Error::Degenerate("empty pulse-area grid".into()));
    }
    let streams = Substreams::new(splitmix64(cfg.seed ^ experiment_key("power", 0)));
    let s = &cfg.source;
    let work = || {
        theta_grid
            .par_iter()
            .enumerate()
            .map(|(k, &theta)| -> Result<PowerPoint> {
                let p = biexciton_population(theta, s.rabi_damping, s.incoherent_slope);
                let (mut i_x, mut i_xx) = (0, 0);
                for i in 0..pulses_per_point {
                    let mut rng = streams.stream(Domain::Aux(k as u32), i);
                    let prepared = rng.random::<f64>() < p;
                    if let Some((xx, x)) = emit_cascade(s, ProductBasis::same(Basis::Linear), 0, prepared, i, &mut rng)?
                    {
                        i_xx += u64::from(detect(&xx, &cfg.detectors[0], &mut rng).is_some());
                        i_x += u64::from(detect(&x, &cfg.detectors[1], &mut rng).is_some());
                    }
                }
                Ok(PowerPoint { theta, i_x, i_xx })
            })
            .collect::<Result<Vec<_>>>()
    };
    in_pool(cfg.workers, work)?
}
