//! Virtual experiments. Each one drives the source and detection chain over
//! a pulse train and returns time-tag streams, histograms or sampled curves.

mod hbt;
mod lifetime;
mod power;
mod tomography;
mod tpi;

pub use hbt::run_hbt;
pub use lifetime::{run_lifetime, start_stop_histogram, LifetimeWindow};
pub use power::{run_power_series, PowerPoint};
pub use tomography::{run_tomography, run_tomography_setting};
pub use tpi::run_tpi;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::fit::CoherenceModel;
use crate::constants::PS_PER_S;
use crate::detection::{dark_counts_chunked, BeamsplitterParams, DetectorParams};
use crate::error::{check_range, Error, Result};
use crate::rng::{splitmix64, Domain, SimRng, Substreams};
use crate::source::{biexciton_population, SourceParams};
use crate::timetag::{TimeTag, TimeTagStream};

/// Detector click rate of the paper's HBT runs, counts/s per detector.
pub const PAPER_SINGLES_RATE: f64 = 3000.0;
/// Detector dark count rate, counts/s.
pub const PAPER_DARK_RATE: f64 = 250.0;
/// Detector timing jitter (standard deviation), ps.
pub const PAPER_JITTER_PS: f64 = 50.0;
/// Mode overlap `1 - ε` at the interference beamsplitter.
pub const PAPER_MODE_OVERLAP: f64 = 0.95;

/// Periods simulated per parallel work item.
const CHUNK_PERIODS: u64 = 8192;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: SourceParams,
    pub detectors: [DetectorParams; 2],
    pub beamsplitter: BeamsplitterParams,
    /// Pulse area θ in radians.
    pub pulse_area: f64,
    /// Simulated time in seconds.
    pub duration_s: f64,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
    /// Path-length difference of the unbalanced interferometer, ps.
    pub mzi_delay_ps: i64,
    /// Photons closer than this at the second beamsplitter interfere, ps.
    pub hom_window_ps: i64,
    /// Dark counts are drawn in chunks of this length, ps.
    pub dark_chunk_ps: i64,
}

impl ExperimentConfig {
    /// Paper parameters at the paper's detector rates (1000 s of data).
    pub fn paper_default() -> Self {
        let source = SourceParams::paper_default();
        let eff = paper_efficiency(&source);
        let det =
            |id| DetectorParams { efficiency: eff, dark_rate: PAPER_DARK_RATE, jitter_sigma_ps: PAPER_JITTER_PS, id };
        Self {
            source,
            detectors: [det(0), det(1)],
            beamsplitter: BeamsplitterParams { transmittance: 0.5, mode_overlap: PAPER_MODE_OVERLAP },
            pulse_area: std::f64::consts::PI,
            duration_s: 1000.0,
            seed: 0,
            workers: 0,
            mzi_delay_ps: 4000,
            hom_window_ps: 2000,
            dark_chunk_ps: 1_000_000_000,
        }
    }

    /// Raises both detector efficiencies to `efficiency`, scaling the dark
    /// rates by the same factor, and shortens the run to `periods`.
    pub fn desk_scaled(mut self, efficiency: f64, periods: u64) -> Self {
        for d in &mut self.detectors {
            if d.efficiency > 0.0 {
                d.dark_rate *= efficiency / d.efficiency;
            }
            d.efficiency = efficiency;
        }
        self.duration_s = periods as f64 * self.source.rep_period_ps as f64 / PS_PER_S;
        self
    }

    /// Double-pulse excitation matched to the interferometer delay.
    pub fn with_double_pulse(mut self) -> Self {
        self.source.double_pulse_delay_ps = self.mzi_delay_ps;
        self
    }

    pub fn periods(&self) -> u64 {
        (self.duration_s * PS_PER_S / self.source.rep_period_ps as f64).round() as u64
    }

    pub fn duration_ps(&self) -> i64 {
        self.periods() as i64 * self.source.rep_period_ps
    }

    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        for d in &self.detectors {
            d.validate()?;
        }
        if self.detectors[0].id == self.detectors[1].id {
            return Err(Error::Config {
                location: "detectors".into(),
                message: format!("both detectors have id {}", self.detectors[0].id),
            });
        }
        self.beamsplitter.validate()?;
        check_range("pulse_area", self.pulse_area, 0.0, 100.0)?;
        if !(self.duration_s > 0.0) || self.periods() == 0 {
            return Err(Error::OutOfRange {
                name: "duration_s",
                detail: format!("{} s is shorter than one period", self.duration_s),
            });
        }
        for (name, v) in [
            ("mzi_delay_ps", self.mzi_delay_ps),
            ("hom_window_ps", self.hom_window_ps),
            ("dark_chunk_ps", self.dark_chunk_ps),
        ] {
            if v <= 0 {
                return Err(Error::OutOfRange { name, detail: format!("{v} must be > 0") });
            }
        }
        Ok(())
    }

    fn prepared_probability(&self) -> f64 {
        biexciton_population(self.pulse_area, self.source.rabi_damping, self.source.incoherent_slope)
    }
}

/// Detector efficiency that gives the paper's singles rate on each HBT
/// detector under π-pulse excitation.
pub fn paper_efficiency(source: &SourceParams) -> f64 {
    let f_rep = PS_PER_S / source.rep_period_ps as f64;
    let p = biexciton_population(std::f64::consts::PI, source.rabi_damping, source.incoherent_slope);
    2.0 * PAPER_SINGLES_RATE / (f_rep * p)
}

/// Runs `body` once per repetition period and returns the clicks of the two
/// detectors, dark counts included, as sorted streams.
///
/// Period `i` always draws from substream `i` of the experiment's key, so the
/// output does not depend on the worker count.
pub(crate) fn run_periods<F>(cfg: &ExperimentConfig, key: u64, body: F) -> Result<(TimeTagStream, TimeTagStream)>
where
    F: Fn(i64, &mut SimRng, &mut [Vec<TimeTag>; 2]) -> Result<()> + Sync,
{
    cfg.validate()?;
    let streams = Substreams::new(splitmix64(cfg.seed ^ splitmix64(key)));
    let periods = cfg.periods();
    let period = cfg.source.rep_period_ps;
    let chunks = periods.div_ceil(CHUNK_PERIODS);
    let work = || -> Result<Vec<[Vec<TimeTag>; 2]>> {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut out = [Vec::new(), Vec::new()];
                let end = ((c + 1) * CHUNK_PERIODS).min(periods);
                for i in c * CHUNK_PERIODS..end {
                    let mut rng = streams.stream(Domain::Pulse, i);
                    body(i as i64 * period, &mut rng, &mut out)?;
                }
                Ok(out)
            })
            .collect()
    };
    let parts = in_pool(cfg.workers, work)??;
    let duration = cfg.duration_ps();
    let mut per_detector: [Vec<Vec<TimeTag>>; 2] = [Vec::new(), Vec::new()];
    for [p0, p1] in parts {
        per_detector[0].push(p0);
        per_detector[1].push(p1);
    }
    let mut result = Vec::with_capacity(2);
    for (d, mut all) in cfg.detectors.iter().zip(per_detector) {
        all.push(dark_counts_chunked(d, duration, cfg.dark_chunk_ps, &streams));
        result.push(
            TimeTagStream::merged(all, duration)
                .with_meta("seed", cfg.seed)
                .with_meta("detector", d.id)
                .with_meta("period_ps", period),
        );
    }
    let b = result.pop().expect("two detectors");
    let a = result.pop().expect("two detectors");
    Ok((a, b))
}

/// Substream key of one experiment setting.
pub(crate) fn experiment_key(name: &str, setting: u64) -> u64 {
    name.bytes().fold(splitmix64(setting), |h, b| splitmix64(h ^ u64::from(b)))
}

/// Runs `f` on a pool of `workers` threads (0 = the global pool).
pub(crate) fn in_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config { location: "workers".into(), message: e.to_string() })?;
    Ok(pool.install(f))
}

/// Analytic first-order coherence with decay time `t2` (ps).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineshapeModel {
    pub kind: CoherenceModel,
    pub t2: f64,
}

/// Samples `g¹(τ)` of `model` on `tau_grid`.
pub fn g1_curve(model: &LineshapeModel, tau_grid: &[f64]) -> Result<Vec<(f64, f64)>> {
    if !(model.t2 > 0.0) {
        return Err(Error::OutOfRange { name: "t2", detail: format!("{} must be > 0", model.t2) });
    }
    if tau_grid.is_empty() {
        return Err(Error::Degenerate("empty tau grid".into()));
    }
    Ok(tau_grid.iter().map(|&t| (t, model.kind.eval(t, model.t2))).collect())
}

/// `(I_max - I_min)/(I_max + I_min)`.
pub fn fringe_contrast(i_max: f64, i_min: f64) -> Result<f64> {
    if i_min < 0.0 || i_max < i_min {
        return Err(Error::OutOfRange {
            name: "fringe intensities",
            detail: format!("need i_max ≥ i_min ≥ 0, got ({i_max}, {i_min})"),
        });
    }
    let s = i_max + i_min;
    if s <= 0.0 {
        return Err(Error::Degenerate("i_max + i_min = 0".into()));
    }
    Ok((i_max - i_min) / s)
}
