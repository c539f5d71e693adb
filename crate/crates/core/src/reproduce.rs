//! One-shot reproduction of every quantitative result: HBT, tomography, TPI,
//! lifetimes, coherence, Rabi sweep and pulse time-bandwidth product.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::analysis::fit::{fit_coherence, fit_lifetimes, fit_rabi, CoherenceModel};
use crate::analysis::peaks::{dark_correct, g2_zero_with_error, integrate_peaks};
use crate::analysis::tomography::{tomography_pipeline, TomographyAnalysis, TomographyInput};
use crate::analysis::tpi::{analyze_tpi, correct_visibility, SetupCorrection, TpiGeometry, VisibilityMethod};
use crate::analysis::{correlate, CoincidenceHistogram};
use crate::config::{hash_text, preset, ExperimentKind, RunConfig};
use crate::constants::GAUSSIAN_TBP_LIMIT;
use crate::error::{Error, Result};
use crate::experiments::{
    g1_curve, run_hbt, run_lifetime, run_power_series, run_tomography, run_tpi, ExperimentConfig, LifetimeWindow,
    LineshapeModel, PAPER_MODE_OVERLAP,
};
use crate::formats::{write_histogram, write_table};
use crate::quantum_state::Basis;
use crate::report::{Provenance, Report, Table};
use crate::rng::{splitmix64, Domain, Substreams};
use crate::source::{preparation_fidelity_bound, time_bandwidth_product, Channel, PulseParams};

/// Run lengths and detector efficiencies of a reproduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scale {
    /// Detector efficiency for HBT, tomography and lifetime runs.
    pub efficiency: f64,
    /// Detector efficiency for the interference runs.
    pub tpi_efficiency: f64,
    /// Periods per HBT channel, tomography setting and lifetime channel.
    pub periods: u64,
    /// Double-pulse periods per TPI run.
    pub tpi_periods: u64,
    /// Pulses per point of the Rabi sweep.
    pub power_pulses: u64,
}

impl Scale {
    /// The acceptance scale: 10⁶ periods per run.
    pub fn desk() -> Self {
        Self { efficiency: 0.3, tpi_efficiency: 0.5, periods: 1_000_000, tpi_periods: 1_000_000, power_pulses: 20_000 }
    }

    /// A fast smoke-test scale.
    pub fn quick() -> Self {
        Self { efficiency: 0.3, tpi_efficiency: 0.5, periods: 30_000, tpi_periods: 30_000, power_pulses: 3_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReproduceOptions {
    pub seed: u64,
    /// Plot data and histograms go here when set.
    pub outdir: Option<PathBuf>,
    pub workers: usize,
    pub scale: Scale,
}

impl ReproduceOptions {
    pub fn new(seed: u64) -> Self {
        Self { seed, outdir: None, workers: 0, scale: Scale::desk() }
    }
}

/// Paper visibilities fed through the correction chain: (raw side-peak,
/// raw cross-polarized, accidental fraction, residual g²) per channel.
pub const PAPER_TPI_INPUTS: [(Channel, f64, f64, f64, f64); 2] =
    [(Channel::XX, 0.59, 0.58, 0.23, 0.0031), (Channel::X, 0.46, 0.44, 0.28, 0.0037)];

/// Coherence times of the paper with the observed line shape: X and XX
/// under non-resonant and two-photon excitation.
pub const PAPER_COHERENCE: [(&str, CoherenceModel, f64); 4] = [
    ("x_nre", CoherenceModel::Gaussian, 229.0),
    ("x_tpe", CoherenceModel::Gaussian, 357.0),
    ("xx_nre", CoherenceModel::Gaussian, 114.0),
    ("xx_tpe", CoherenceModel::Exponential, 192.0),
];

const HBT_HALF_WINDOW_PS: f64 = 640.0;
const HBT_BIN_PS: i64 = 256;
const TPI_BIN_PS: i64 = 100;

fn step<T>(name: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    f().map_err(|e| e.in_step(name))
}

fn lower(ch: Channel) -> &'static str {
    match ch {
        Channel::XX => "xx",
        Channel::X => "x",
    }
}

struct Out<'a>(Option<&'a Path>);

impl Out<'_> {
    fn table(&self, name: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        match self.0 {
            Some(d) => write_table(&d.join(name), columns, rows),
            None => Ok(()),
        }
    }

    fn histogram(&self, name: &str, h: &CoincidenceHistogram) -> Result<()> {
        match self.0 {
            Some(d) => write_histogram(h, &d.join(name)),
            None => Ok(()),
        }
    }
}

fn histogram_rows(h: &CoincidenceHistogram) -> Vec<Vec<f64>> {
    (0..h.len()).map(|j| vec![h.bin_center(j), h.counts[j] as f64]).collect()
}

/// Runs every step with the paper-default preset scaled to `opts.scale`.
pub fn reproduce_paper(opts: &ReproduceOptions) -> Result<Report> {
    let mut base = preset("paper-default")?;
    base.seed = opts.seed;
    base.workers = opts.workers;
    let sc = opts.scale;
    let cfg = base.desk_scaled(sc.efficiency, sc.periods);
    let tpi_cfg = base.desk_scaled(sc.tpi_efficiency, sc.tpi_periods).with_double_pulse();

    let hash = {
        let (mut c, mut t) = (cfg, tpi_cfg);
        c.workers = 0;
        t.workers = 0;
        hash_text(&serde_json::to_string(&(c, t, sc)).expect("config serializes"))
    };
    let mut report = Report::new(Provenance::new(hash, opts.seed, "paper-default"));
    if let Some(d) = &opts.outdir {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let out = Out(opts.outdir.as_deref());

    let g2_residual = step("hbt", || hbt(&cfg, &mut report, &out))?;
    step("tomography", || tomography(&cfg, &mut report, &out))?;
    step("tpi", || tpi(&tpi_cfg, &g2_residual, &mut report, &out))?;
    step("tpi_tables", || tpi_tables(&mut report))?;
    step("lifetime", || lifetime(&cfg, &mut report, &out))?;
    step("coherence", || coherence(opts.seed, &mut report, &out))?;
    step("rabi", || rabi(&cfg, sc.power_pulses, &mut report, &out))?;
    step("tbp", || {
        let tbp = time_bandwidth_product(&PulseParams::paper_default())?;
        report.scalar("tbp", tbp, 0.0, "", "duration × linewidth / h")?;
        report.scalar("tbp_gaussian_limit", GAUSSIAN_TBP_LIMIT, 0.0, "", "constant")
    })?;
    Ok(report)
}

fn hbt(cfg: &ExperimentConfig, report: &mut Report, out: &Out) -> Result<BTreeMap<Channel, f64>> {
    let mut residual = BTreeMap::new();
    let period = cfg.source.rep_period_ps;
    let dark = cfg.detectors[0].dark_rate;
    for ch in [Channel::XX, Channel::X] {
        let (a, b) = run_hbt(cfg, ch)?;
        let h = correlate(&a, &b, HBT_BIN_PS, 10 * period + 1000)?;
        let peaks = integrate_peaks(&h, period as f64, HBT_HALF_WINDOW_PS)?;
        let raw = g2_zero_with_error(&peaks)?;
        let corrected_peaks = dark_correct(&h, &peaks, dark);
        let corrected = g2_zero_with_error(&corrected_peaks)?;
        let n = lower(ch);
        report.scalar(&format!("hbt_g2_raw_{n}"), raw.value, raw.sigma, "", "centre / mean side peak")?;
        report.scalar(
            &format!("hbt_g2_corrected_{n}"),
            corrected.value,
            corrected.sigma,
            "",
            "dark-count subtracted",
        )?;
        report.scalar(
            &format!("hbt_coincidences_{n}"),
            h.total() as f64,
            (h.total() as f64).sqrt(),
            "counts",
            "histogram total",
        )?;
        if corrected_peaks.clamped {
            report.note(format!("hbt {}: zero-delay area clamped at 0 after dark subtraction", ch.name()));
        }
        residual.insert(ch, corrected.value);
        out.table(&format!("fig2_hbt_{n}.csv"), &["delay_ps", "counts"], &histogram_rows(&h))?;
    }
    Ok(residual)
}

fn tomography(cfg: &ExperimentConfig, report: &mut Report, out: &Out) -> Result<()> {
    let period = cfg.source.rep_period_ps;
    let analysis = RunConfig::default_analysis(ExperimentKind::Tomography);
    let mut input = TomographyInput { dark_rate: cfg.detectors[0].dark_rate, ..Default::default() };
    for basis in Basis::ALL {
        for co in [true, false] {
            let (a, b) = run_tomography(cfg, basis, co)?;
            let h = correlate(&a, &b, analysis.bin_width_ps, 10 * period + 2500)?;
            out.table(
                &format!("fig4_{}_{}.csv", basis.name(), if co { "co" } else { "cross" }),
                &["delay_ps", "counts"],
                &histogram_rows(&h),
            )?;
            input.histograms.insert((basis, co), h);
        }
    }
    let geometry = TomographyAnalysis { spacing_ps: period as f64, half_window_ps: analysis.half_window_ps };
    let r = tomography_pipeline(&input, &geometry)?;
    let mut table = Table::new(&["g2_co", "g2_cross", "contrast", "sigma"]);
    for b in &r.bases {
        let name = b.basis.name();
        report.scalar(
            &format!("contrast_{name}"),
            b.contrast,
            b.contrast_sigma,
            "",
            "(g_co - g_cross)/(g_co + g_cross)",
        )?;
        table = table.row(name, vec![b.g2_co.value, b.g2_cross.value, b.contrast, b.contrast_sigma]);
    }
    report.scalar("fidelity", r.fidelity, r.fidelity_sigma, "", "(1 + C_lin + C_diag - C_circ)/4")?;
    report.table("tomography", table)?;
    if r.clamped {
        report.note("tomography: a setting was clamped at 0 after dark subtraction");
    }
    Ok(())
}

fn tpi(cfg: &ExperimentConfig, g2_residual: &BTreeMap<Channel, f64>, report: &mut Report, out: &Out) -> Result<()> {
    let period = cfg.source.rep_period_ps;
    let geometry = TpiGeometry { period_ps: period as f64, delay_ps: cfg.mzi_delay_ps as f64, half_window_ps: 1500.0 };
    let mut side = Table::new(&["raw", "apd_corrected", "bs_corrected", "sigma"]);
    let mut cross = side.clone();
    for ch in [Channel::XX, Channel::X] {
        let n = lower(ch);
        let mut hist = Vec::with_capacity(2);
        for parallel in [true, false] {
            let (a, b) = run_tpi(cfg, ch, parallel)?;
            let h = correlate(&a, &b, TPI_BIN_PS, 4 * period + 10_000)?;
            out.table(
                &format!("fig5_tpi_{n}_{}.csv", if parallel { "parallel" } else { "cross" }),
                &["delay_ps", "counts"],
                &histogram_rows(&h),
            )?;
            out.histogram(&format!("tpi_{n}_{}.hist.csv", if parallel { "parallel" } else { "cross" }), &h)?;
            hist.push(h);
        }
        let corr = SetupCorrection {
            mode_overlap_1me: cfg.beamsplitter.mode_overlap,
            g2_residual: g2_residual.get(&ch).copied().unwrap_or(0.0),
            dark_rate: cfg.detectors[0].dark_rate,
        };
        let t = analyze_tpi(&hist[0], &hist[1], &geometry, &corr, ch)?;
        for (tag, v, s, table) in [
            ("sidepeak", t.sidepeak, t.sidepeak_sigma, &mut side),
            ("crosspol", t.crosspol, t.crosspol_sigma, &mut cross),
        ] {
            report.scalar(&format!("tpi_{tag}_raw_{n}"), v.raw, s, "", tag)?;
            report.scalar(&format!("tpi_{tag}_apd_{n}"), v.apd_corrected, s, "", tag)?;
            report.scalar(&format!("tpi_{tag}_bs_{n}"), v.fully_corrected, s, "", tag)?;
            *table = std::mem::take(table).row(ch.name(), vec![v.raw, v.apd_corrected, v.fully_corrected, s]);
        }
    }
    report.table("tpi_sidepeak", side)?;
    report.table("tpi_crosspol", cross)
}

/// The correction chain applied to the paper's raw visibilities.
fn tpi_tables(report: &mut Report) -> Result<()> {
    let mut t1 = Table::new(&["raw", "apd_corrected", "bs_corrected"]);
    let mut t2 = t1.clone();
    for (ch, v_side, v_cross, alpha, g2) in PAPER_TPI_INPUTS {
        let a = correct_visibility(v_side, alpha, PAPER_MODE_OVERLAP, g2, VisibilityMethod::SidePeak, ch)?;
        let b = correct_visibility(v_cross, alpha, PAPER_MODE_OVERLAP, g2, VisibilityMethod::CrossPol, ch)?;
        t1 = t1.row(ch.name(), vec![a.raw, a.apd_corrected, a.fully_corrected]);
        t2 = t2.row(ch.name(), vec![b.raw, b.apd_corrected, b.fully_corrected]);
    }
    report.table("visibility_chain_sidepeak", t1)?;
    report.table("visibility_chain_crosspol", t2)
}

fn lifetime(cfg: &ExperimentConfig, report: &mut Report, out: &Out) -> Result<()> {
    let window = LifetimeWindow::default();
    let xx = run_lifetime(cfg, Channel::XX, &window)?;
    let x = run_lifetime(cfg, Channel::X, &window)?;
    let fit = fit_lifetimes(&xx, &x, cfg.detectors[0].jitter_sigma_ps)?;
    report.scalar("t1_xx", fit.value("t1_xx"), fit.std_error("t1_xx"), "ps", "joint cascade fit ⊗ Gaussian IRF")?;
    report.scalar("t1_x", fit.value("t1_x"), fit.std_error("t1_x"), "ps", "joint cascade fit ⊗ Gaussian IRF")?;
    report.scalar("lifetime_photons_xx", xx.total() as f64, (xx.total() as f64).sqrt(), "counts", "histogram total")?;
    report.scalar("lifetime_photons_x", x.total() as f64, (x.total() as f64).sqrt(), "counts", "histogram total")?;
    let rows: Vec<Vec<f64>> =
        (0..xx.len()).map(|j| vec![xx.bin_center(j), xx.counts[j] as f64, x.counts[j] as f64]).collect();
    out.table("supp_fig2_lifetime.csv", &["t_ps", "xx", "x"], &rows)
}

/// Analytic g¹ curves with 1% additive noise, fitted with both models.
fn coherence(seed: u64, report: &mut Report, out: &Out) -> Result<()> {
    let streams = Substreams::new(splitmix64(seed ^ 0xc0_4e_2e_4c_e0));
    let noise = Normal::new(0.0, 0.01).expect("valid normal");
    let tau: Vec<f64> = (0..60).map(|i| i as f64 * 20.0).collect();
    let mut table = Table::new(&["t2_true", "t2_fit", "sigma", "gaussian"]);
    let mut rows = vec![Vec::new(); tau.len()];
    for (k, (name, kind, t2)) in PAPER_COHERENCE.into_iter().enumerate() {
        let mut rng = streams.stream(Domain::Aux(k as u32), 0);
        let samples: Vec<(f64, f64)> = g1_curve(&LineshapeModel { kind, t2 }, &tau)?
            .into_iter()
            .map(|(t, g)| (t, g + noise.sample(&mut rng)))
            .collect();
        let fit = fit_coherence(&samples)?;
        let found = fit.model == CoherenceModel::Gaussian.name();
        report.scalar(&format!("t2_{name}"), fit.value("t2"), fit.std_error("t2"), "ps", &fit.model)?;
        if fit.ambiguous() {
            report.note(format!("coherence {name}: Gaussian and exponential fits are within 1%"));
        }
        table = table.row(name, vec![t2, fit.value("t2"), fit.std_error("t2"), if found { 1.0 } else { 0.0 }]);
        for (row, (t, g)) in rows.iter_mut().zip(&samples) {
            if k == 0 {
                row.push(*t);
            }
            row.push(*g);
        }
    }
    report.table("coherence", table)?;
    let mut cols = vec!["tau_ps"];
    cols.extend(PAPER_COHERENCE.iter().map(|c| c.0));
    out.table("supp_fig3_coherence.csv", &cols, &rows)
}

fn rabi(cfg: &ExperimentConfig, pulses: u64, report: &mut Report, out: &Out) -> Result<()> {
    let pi = std::f64::consts::PI;
    let grid: Vec<f64> = (0..=32).map(|i| i as f64 * pi / 8.0).collect();
    let mut rows = Vec::with_capacity(grid.len());
    let mut bounds = Vec::with_capacity(2);
    for damped in [true, false] {
        let mut c = *cfg;
        if !damped {
            c.source.rabi_damping = 0.0;
            c.source.incoherent_slope = 0.0;
        }
        let pts = run_power_series(&c, &grid, pulses)?;
        let at = |theta: f64| {
            pts.iter()
                .min_by(|a, b| (a.theta - theta).abs().total_cmp(&(b.theta - theta).abs()))
                .expect("non-empty grid")
                .i_xx as f64
        };
        let (i_pi, i_2pi) = (at(pi), at(2.0 * pi));
        let bound = preparation_fidelity_bound(i_pi, i_2pi)?;
        let s = i_pi + i_2pi;
        let sigma = if s > 0.0 { (i_pi * i_2pi).sqrt() * (i_pi + i_2pi).sqrt() / (s * s) } else { 0.0 };
        bounds.push((bound, sigma));
        if damped {
            let fit = fit_rabi(&pts.iter().map(|p| (p.theta, p.i_xx as f64)).collect::<Vec<_>>())?;
            for (k, unit) in [("kappa", "1/rad"), ("c", "1/rad")] {
                report.scalar(&format!("rabi_{k}"), fit.value(k), fit.std_error(k), unit, "damped Rabi fit")?;
            }
            rows = pts.iter().map(|p| vec![p.theta, p.i_xx as f64, p.i_x as f64]).collect();
        }
    }
    report.scalar("preparation_bound", bounds[0].0, bounds[0].1, "", "I(π)/(I(π)+I(2π))")?;
    report.scalar("preparation_bound_undamped", bounds[1].0, bounds[1].1, "", "I(π)/(I(π)+I(2π))")?;
    out.table("fig3_rabi.csv", &["theta", "i_xx", "i_x"], &rows)
}
