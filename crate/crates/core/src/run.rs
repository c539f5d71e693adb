//! Single-experiment runs driven by a [`RunConfig`]: simulate and write the
//! raw data, or analyze previously written files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rand_distr::{Distribution, Normal};

use crate::analysis::fit::{fit_coherence, fit_lifetimes, fit_rabi};
use crate::analysis::peaks::{dark_correct, g2_zero_with_error, integrate_peaks};
use crate::analysis::tomography::{setting_g2, tomography_pipeline, TomographyAnalysis, TomographyInput};
use crate::analysis::tpi::{
    analyze_tpi, sidepeak_sigma, tpi_visibility_sidepeak, zero_cluster, SetupCorrection, TpiGeometry,
};
use crate::analysis::{correlate, CoincidenceHistogram};
use crate::config::{ExperimentKind, RunConfig};
use crate::error::{Error, Result};
use crate::experiments::{g1_curve, run_hbt, run_lifetime, run_power_series, run_tomography, run_tpi, LineshapeModel};
use crate::formats::{
    read_histogram, read_timetags, read_timetags_binary, write_histogram, write_table, write_timetags,
    write_timetags_binary, SortPolicy,
};
use crate::quantum_state::Basis;
use crate::report::{Provenance, Report, Table};
use crate::rng::{splitmix64, Domain, Substreams};
use crate::source::{preparation_fidelity_bound, Channel};
use crate::timetag::TimeTagStream;

/// Time-tag file encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TagFormat {
    #[default]
    Csv,
    Binary,
}

impl TagFormat {
    fn extension(self) -> &'static str {
        match self {
            TagFormat::Csv => "tags.csv",
            TagFormat::Binary => "qdtt",
        }
    }
}

/// Files written by a run plus its report.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub report: Report,
    pub files: Vec<PathBuf>,
}

struct Writer<'a> {
    dir: &'a Path,
    format: TagFormat,
    files: Vec<PathBuf>,
}

impl Writer<'_> {
    fn tags(&mut self, stem: &str, s: &TimeTagStream) -> Result<()> {
        let p = self.dir.join(format!("{stem}.{}", self.format.extension()));
        match self.format {
            TagFormat::Csv => write_timetags(s, &p)?,
            TagFormat::Binary => write_timetags_binary(s, &p)?,
        }
        self.files.push(p);
        Ok(())
    }

    fn histogram(&mut self, stem: &str, h: &CoincidenceHistogram) -> Result<()> {
        let p = self.dir.join(format!("{stem}.hist.csv"));
        write_histogram(h, &p)?;
        self.files.push(p);
        Ok(())
    }

    fn table(&mut self, name: &str, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
        let p = self.dir.join(name);
        write_table(&p, columns, rows)?;
        self.files.push(p);
        Ok(())
    }

    fn report(&mut self, r: &Report) -> Result<()> {
        let p = self.dir.join("report.json");
        r.write(&p)?;
        self.files.push(p);
        let s = self.dir.join("summary.txt");
        std::fs::write(&s, r.summary()).map_err(|e| Error::io(&s, e))?;
        self.files.push(s);
        Ok(())
    }
}

fn new_report(cfg: &RunConfig) -> Report {
    Report::new(Provenance::new(cfg.hash(), cfg.seed(), &cfg.preset))
}

fn lower(ch: Channel) -> &'static str {
    match ch {
        Channel::XX => "xx",
        Channel::X => "x",
    }
}

fn dark_rate(cfg: &RunConfig) -> f64 {
    cfg.setup.detectors[0].dark_rate
}

fn period(cfg: &RunConfig) -> f64 {
    cfg.setup.source.rep_period_ps as f64
}

fn tpi_geometry(cfg: &RunConfig) -> TpiGeometry {
    TpiGeometry {
        period_ps: period(cfg),
        delay_ps: cfg.setup.mzi_delay_ps as f64,
        half_window_ps: cfg.analysis.half_window_ps,
    }
}

fn g2_scalars(report: &mut Report, prefix: &str, h: &CoincidenceHistogram, cfg: &RunConfig) -> Result<()> {
    let peaks = integrate_peaks(h, period(cfg), cfg.analysis.half_window_ps)?;
    let raw = g2_zero_with_error(&peaks)?;
    let corrected_peaks = dark_correct(h, &peaks, dark_rate(cfg));
    let corrected = g2_zero_with_error(&corrected_peaks)?;
    report.scalar(&format!("{prefix}g2_raw"), raw.value, raw.sigma, "", "centre / mean side peak")?;
    report.scalar(&format!("{prefix}g2_corrected"), corrected.value, corrected.sigma, "", "dark-count subtracted")?;
    if corrected_peaks.clamped {
        report.note(format!("{prefix}g2: a peak was clamped at 0 after dark subtraction"));
    }
    Ok(())
}

fn tpi_sidepeak_scalar(report: &mut Report, h: &CoincidenceHistogram, cfg: &RunConfig) -> Result<()> {
    let zc = zero_cluster(h, &tpi_geometry(cfg))?;
    let v = tpi_visibility_sidepeak(zc.a2_star.counts, zc.a3.counts, zc.a4_star.counts)?;
    report.scalar("tpi_sidepeak_raw", v, sidepeak_sigma(&zc), "", "sidepeak")?;
    for (name, a) in [("a2_star", zc.a2_star), ("a3", zc.a3), ("a4_star", zc.a4_star)] {
        report.scalar(&format!("tpi_area_{name}"), a.counts, a.counts.sqrt(), "counts", "zero-delay cluster")?;
    }
    Ok(())
}

/// Simulates the configured experiment, writes its time tags, histograms and
/// report to `cfg.out`, and returns the report.
pub fn simulate(cfg: &RunConfig, format: TagFormat) -> Result<RunOutput> {
    let dir = cfg.out.as_path();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = Writer { dir, format, files: Vec::new() };
    let mut report = new_report(cfg);
    let s = &cfg.settings;
    let a = &cfg.analysis;
    match cfg.experiment {
        ExperimentKind::Hbt => {
            let (d0, d1) = run_hbt(&cfg.setup, s.channel)?;
            let stem = format!("hbt_{}", lower(s.channel));
            w.tags(&format!("{stem}_det0"), &d0)?;
            w.tags(&format!("{stem}_det1"), &d1)?;
            let h = correlate(&d0, &d1, a.bin_width_ps, a.window_ps)?;
            w.histogram(&stem, &h)?;
            g2_scalars(&mut report, "", &h, cfg)?;
        }
        ExperimentKind::Tomography => {
            let (d0, d1) = run_tomography(&cfg.setup, s.basis, s.co_polarized)?;
            let stem = format!("tomography_{}_{}", s.basis.name(), if s.co_polarized { "co" } else { "cross" });
            w.tags(&format!("{stem}_xx"), &d0)?;
            w.tags(&format!("{stem}_x"), &d1)?;
            let h = correlate(&d0, &d1, a.bin_width_ps, a.window_ps)?;
            w.histogram(&stem, &h)?;
            let geometry = TomographyAnalysis { spacing_ps: period(cfg), half_window_ps: a.half_window_ps };
            let (g, clamped) = setting_g2(&h, dark_rate(cfg), &geometry)?;
            report.scalar("g2_corrected", g.value, g.sigma, "", "dark-count subtracted")?;
            if clamped {
                report.note("zero-delay area clamped at 0 after dark subtraction");
            }
        }
        ExperimentKind::Tpi => {
            let (d0, d1) = run_tpi(&cfg.setup, s.channel, s.parallel)?;
            let stem = format!("tpi_{}_{}", lower(s.channel), if s.parallel { "parallel" } else { "cross" });
            w.tags(&format!("{stem}_det0"), &d0)?;
            w.tags(&format!("{stem}_det1"), &d1)?;
            let h = correlate(&d0, &d1, a.bin_width_ps, a.window_ps)?;
            w.histogram(&stem, &h)?;
            tpi_sidepeak_scalar(&mut report, &h, cfg)?;
        }
        ExperimentKind::Lifetime => {
            let xx = run_lifetime(&cfg.setup, Channel::XX, &s.lifetime)?;
            let x = run_lifetime(&cfg.setup, Channel::X, &s.lifetime)?;
            w.histogram("lifetime_xx", &xx)?;
            w.histogram("lifetime_x", &x)?;
            lifetime_scalars(&mut report, &xx, &x, cfg)?;
        }
        ExperimentKind::Power => {
            let n = s.theta_points.max(2);
            let grid: Vec<f64> = (0..n).map(|i| s.theta_max * i as f64 / (n - 1) as f64).collect();
            let pts = run_power_series(&cfg.setup, &grid, s.pulses_per_point)?;
            let rows: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.theta, p.i_xx as f64, p.i_x as f64]).collect();
            w.table("power.csv", &["theta", "i_xx", "i_x"], &rows)?;
            let pi = std::f64::consts::PI;
            let at = |theta: f64| pts.iter().find(|p| (p.theta - theta).abs() < 1e-9).map(|p| p.i_xx as f64);
            match (at(pi), at(2.0 * pi)) {
                (Some(a), Some(b)) => {
                    let bound = preparation_fidelity_bound(a, b)?;
                    let sigma = if a + b > 0.0 { (a * b / (a + b).powi(3)).sqrt() } else { 0.0 };
                    report.scalar("preparation_bound", bound, sigma, "", "I(π)/(I(π)+I(2π))")?;
                }
                _ => report.note("grid does not contain θ = π and 2π; no preparation bound"),
            }
            let fit = fit_rabi(&pts.iter().map(|p| (p.theta, p.i_xx as f64)).collect::<Vec<_>>())?;
            for p in &fit.params {
                report.scalar(&format!("rabi_{}", p.name), p.value, p.std_error, &p.unit, "damped Rabi fit")?;
            }
        }
        ExperimentKind::Coherence => {
            let tau: Vec<f64> = (0..s.tau_points).map(|i| i as f64 * s.tau_step_ps).collect();
            let mut curve = g1_curve(&LineshapeModel { kind: s.coherence_model, t2: s.coherence_t2 }, &tau)?;
            if s.coherence_noise > 0.0 {
                let noise = Normal::new(0.0, s.coherence_noise)
                    .map_err(|e| Error::OutOfRange { name: "noise", detail: e.to_string() })?;
                let mut rng = Substreams::new(splitmix64(cfg.seed() ^ splitmix64(0x6731))).stream(Domain::Aux(0), 0);
                for (_, g) in &mut curve {
                    *g += noise.sample(&mut rng);
                }
            }
            let rows: Vec<Vec<f64>> = curve.iter().map(|&(t, g)| vec![t, g]).collect();
            w.table("g1.csv", &["tau_ps", "g1"], &rows)?;
            coherence_scalars(&mut report, &curve)?;
        }
    }
    w.report(&report)?;
    Ok(RunOutput { report, files: w.files })
}

fn lifetime_scalars(
    report: &mut Report,
    xx: &CoincidenceHistogram,
    x: &CoincidenceHistogram,
    cfg: &RunConfig,
) -> Result<()> {
    let fit = fit_lifetimes(xx, x, cfg.setup.detectors[0].jitter_sigma_ps)?;
    for k in ["t1_xx", "t1_x"] {
        report.scalar(k, fit.value(k), fit.std_error(k), "ps", "joint cascade fit ⊗ Gaussian IRF")?;
    }
    Ok(())
}

fn coherence_scalars(report: &mut Report, samples: &[(f64, f64)]) -> Result<()> {
    let fit = fit_coherence(samples)?;
    report.scalar("t2", fit.value("t2"), fit.std_error("t2"), "ps", &fit.model)?;
    if let Some(alt) = &fit.alternative {
        report.note(format!("ambiguous line shape: {} fit within 1% (t2 = {:.1} ps)", alt.model, alt.value("t2")));
    }
    Ok(())
}

fn is_histogram(path: &Path) -> bool {
    path.to_string_lossy().ends_with(".hist.csv")
}

fn read_tags(path: &Path, sort: SortPolicy) -> Result<TimeTagStream> {
    let binary = path.extension().is_some_and(|e| e == "qdtt");
    if binary {
        read_timetags_binary(path, sort)
    } else {
        read_timetags(path, sort)
    }
}

/// Histograms of the inputs: pairs of time-tag files are correlated with
/// the configured binning, histogram files are read as they are.
fn histograms(files: &[PathBuf], cfg: &RunConfig, sort: SortPolicy) -> Result<Vec<(PathBuf, CoincidenceHistogram)>> {
    let mut out = Vec::new();
    let mut pending: Option<(PathBuf, TimeTagStream)> = None;
    for f in files {
        if is_histogram(f) {
            out.push((f.clone(), read_histogram(f)?));
            continue;
        }
        let s = read_tags(f, sort)?;
        match pending.take() {
            None => pending = Some((f.clone(), s)),
            Some((p, a)) => out.push((p, correlate(&a, &s, cfg.analysis.bin_width_ps, cfg.analysis.window_ps)?)),
        }
    }
    if let Some((p, _)) = pending {
        return Err(Error::Missing(format!("{} has no partner stream to correlate with", p.display())));
    }
    Ok(out)
}

fn need(n: usize, got: usize, what: &str) -> Result<()> {
    if got != n {
        return Err(Error::Config {
            location: "files".into(),
            message: format!("{what} needs {n} histogram(s) or time-tag pair(s), got {got}"),
        });
    }
    Ok(())
}

/// Tomography setting encoded in a file name such as `tomography_linear_co`.
fn tomography_setting(path: &Path) -> Result<(Basis, bool)> {
    let name = path.file_name().map(|n| n.to_string_lossy().to_lowercase()).unwrap_or_default();
    let basis = Basis::ALL.into_iter().find(|b| name.contains(b.name())).ok_or_else(|| Error::Config {
        location: path.display().to_string(),
        message: "file name names no basis".into(),
    })?;
    let co = if name.contains("_co") {
        true
    } else if name.contains("_cross") {
        false
    } else {
        return Err(Error::Config {
            location: path.display().to_string(),
            message: "file name has neither _co nor _cross".into(),
        });
    };
    Ok((basis, co))
}

/// Analyzes existing files for the configured experiment and writes
/// `report.json` and `summary.txt` to `cfg.out`.
///
/// HBT: one histogram or tag pair. Tomography: six, named by basis and
/// `_co`/`_cross`. TPI: parallel then cross-polarized. Lifetime: XX then X.
pub fn analyze(cfg: &RunConfig, files: &[PathBuf], sort: SortPolicy) -> Result<RunOutput> {
    if files.is_empty() {
        return Err(Error::Config { location: "files".into(), message: "no input files".into() });
    }
    let dir = cfg.out.as_path();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut w = Writer { dir, format: TagFormat::Csv, files: Vec::new() };
    let mut report = new_report(cfg);
    match cfg.experiment {
        ExperimentKind::Hbt => {
            let hs = histograms(files, cfg, sort)?;
            need(1, hs.len(), "hbt")?;
            g2_scalars(&mut report, "", &hs[0].1, cfg)?;
        }
        ExperimentKind::Tomography => {
            let hs = histograms(files, cfg, sort)?;
            need(6, hs.len(), "tomography")?;
            let mut input = TomographyInput { dark_rate: dark_rate(cfg), histograms: BTreeMap::new() };
            for (p, h) in hs {
                input.histograms.insert(tomography_setting(&p)?, h);
            }
            let geometry = TomographyAnalysis { spacing_ps: period(cfg), half_window_ps: cfg.analysis.half_window_ps };
            let r = tomography_pipeline(&input, &geometry)?;
            let mut table = Table::new(&["g2_co", "g2_cross", "contrast", "sigma"]);
            for b in &r.bases {
                report.scalar(
                    &format!("contrast_{}", b.basis.name()),
                    b.contrast,
                    b.contrast_sigma,
                    "",
                    "(g_co - g_cross)/(g_co + g_cross)",
                )?;
                table = table.row(b.basis.name(), vec![b.g2_co.value, b.g2_cross.value, b.contrast, b.contrast_sigma]);
            }
            report.scalar("fidelity", r.fidelity, r.fidelity_sigma, "", "(1 + C_lin + C_diag - C_circ)/4")?;
            report.table("tomography", table)?;
        }
        ExperimentKind::Tpi => {
            let hs = histograms(files, cfg, sort)?;
            match hs.len() {
                1 => tpi_sidepeak_scalar(&mut report, &hs[0].1, cfg)?,
                2 => {
                    let corr = SetupCorrection {
                        mode_overlap_1me: cfg.setup.beamsplitter.mode_overlap,
                        g2_residual: 0.0,
                        dark_rate: dark_rate(cfg),
                    };
                    let t = analyze_tpi(&hs[0].1, &hs[1].1, &tpi_geometry(cfg), &corr, cfg.settings.channel)?;
                    for (tag, v, s) in
                        [("sidepeak", t.sidepeak, t.sidepeak_sigma), ("crosspol", t.crosspol, t.crosspol_sigma)]
                    {
                        report.scalar(&format!("tpi_{tag}_raw"), v.raw, s, "", tag)?;
                        report.scalar(&format!("tpi_{tag}_apd"), v.apd_corrected, s, "", tag)?;
                        report.scalar(&format!("tpi_{tag}_bs"), v.fully_corrected, s, "", tag)?;
                    }
                }
                n => need(2, n, "tpi")?,
            }
        }
        ExperimentKind::Lifetime => {
            need(2, files.len(), "lifetime")?;
            let xx = read_histogram(&files[0])?;
            let x = read_histogram(&files[1])?;
            lifetime_scalars(&mut report, &xx, &x, cfg)?;
        }
        ExperimentKind::Coherence => {
            need(1, files.len(), "coherence")?;
            let samples = read_pairs(&files[0])?;
            coherence_scalars(&mut report, &samples)?;
        }
        ExperimentKind::Power => {
            need(1, files.len(), "power")?;
            let samples = read_pairs(&files[0])?;
            let fit = fit_rabi(&samples)?;
            for p in &fit.params {
                report.scalar(&format!("rabi_{}", p.name), p.value, p.std_error, &p.unit, "damped Rabi fit")?;
            }
        }
    }
    w.report(&report)?;
    Ok(RunOutput { report, files: w.files })
}

/// First two numeric columns of a CSV table, skipping `#` and header lines.
fn read_pairs(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut cols = t.split(',');
        let parsed = (cols.next().map(|c| c.trim().parse::<f64>()), cols.next().map(|c| c.trim().parse::<f64>()));
        match parsed {
            (Some(Ok(a)), Some(Ok(b))) => out.push((a, b)),
            _ if out.is_empty() => continue,
            _ => return Err(Error::Format(format!("{}:{}: expected two numbers", path.display(), i + 1))),
        }
    }
    Ok(out)
}
