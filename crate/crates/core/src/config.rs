//! Run configuration: named presets overlaid with a TOML document.
//!
//! ```toml
//! experiment = "hbt"
//! preset = "desk"
//! seed = 7
//!
//! [source]
//! t1_xx = 220.0
//!
//! [hbt]
//! channel = "XX"
//! ```

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::fit::CoherenceModel;
use crate::error::{Error, Result};
use crate::experiments::{ExperimentConfig, LifetimeWindow};
use crate::quantum_state::{Basis, CascadeStateParams};
use crate::source::Channel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    Hbt,
    Tomography,
    Tpi,
    Lifetime,
    Power,
    Coherence,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 6] = [
        ExperimentKind::Hbt,
        ExperimentKind::Tomography,
        ExperimentKind::Tpi,
        ExperimentKind::Lifetime,
        ExperimentKind::Power,
        ExperimentKind::Coherence,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Hbt => "hbt",
            ExperimentKind::Tomography => "tomography",
            ExperimentKind::Tpi => "tpi",
            ExperimentKind::Lifetime => "lifetime",
            ExperimentKind::Power => "power",
            ExperimentKind::Coherence => "coherence",
        }
    }
}

impl std::str::FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| Error::Config {
            location: "experiment".into(),
            message: format!("unknown experiment {s:?}"),
        })
    }
}

/// Correlation and peak-integration settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub bin_width_ps: i64,
    /// Correlation range on each side of zero delay.
    pub window_ps: i64,
    pub half_window_ps: f64,
}

/// Per-experiment settings. Only the block of the selected experiment is used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Settings {
    pub channel: Channel,
    pub basis: Basis,
    pub co_polarized: bool,
    pub parallel: bool,
    pub lifetime: LifetimeWindow,
    pub theta_max: f64,
    pub theta_points: usize,
    pub pulses_per_point: u64,
    pub coherence_model: CoherenceModel,
    pub coherence_t2: f64,
    pub tau_step_ps: f64,
    pub tau_points: usize,
    /// Standard deviation of additive noise on simulated g¹ samples.
    pub coherence_noise: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Self {
            channel: Channel::XX,
            basis: Basis::Linear,
            co_polarized: true,
            parallel: true,
            lifetime: LifetimeWindow::default(),
            theta_max: 4.0 * std::f64::consts::PI,
            theta_points: 33,
            pulses_per_point: 20_000,
            coherence_model: CoherenceModel::Gaussian,
            coherence_t2: 357.0,
            tau_step_ps: 25.0,
            tau_points: 40,
            coherence_noise: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub experiment: ExperimentKind,
    pub preset: String,
    pub out: PathBuf,
    pub setup: ExperimentConfig,
    pub analysis: AnalysisSettings,
    pub settings: Settings,
}

impl RunConfig {
    pub fn seed(&self) -> u64 {
        self.setup.seed
    }

    /// SHA-256 of the canonical JSON form, leaving out the worker count and
    /// output directory.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.setup.workers = 0;
        c.out = PathBuf::new();
        hash_text(&serde_json::to_string(&c).expect("config serializes"))
    }

    /// Analysis settings suited to `experiment`.
    pub fn default_analysis(experiment: ExperimentKind) -> AnalysisSettings {
        match experiment {
            ExperimentKind::Hbt => {
                AnalysisSettings { bin_width_ps: 256, window_ps: 10 * 13_158 + 1_000, half_window_ps: 640.0 }
            }
            ExperimentKind::Tpi => {
                AnalysisSettings { bin_width_ps: 100, window_ps: 4 * 13_158 + 10_000, half_window_ps: 1500.0 }
            }
            _ => AnalysisSettings { bin_width_ps: 256, window_ps: 10 * 13_158 + 2_500, half_window_ps: 2000.0 },
        }
    }
}

/// Hex SHA-256 of `text`.
pub fn hash_text(text: &str) -> String {
    Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
}

pub const PRESETS: [(&str, &str); 3] = [
    ("paper-default", "paper parameters and detector rates (3000 cts/s singles, 250 cts/s dark), 1000 s"),
    ("desk", "paper parameters, detector efficiency 0.3 with dark rate scaled alike, 10^6 periods"),
    ("ideal", "pure |ψ+⟩, no damping, lossless noiseless detectors, 10^5 periods"),
];

/// The experiment setup of a named preset.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let paper = ExperimentConfig::paper_default();
    match name {
        "paper-default" => Ok(paper),
        "desk" => Ok(paper.desk_scaled(0.3, 1_000_000)),
        "ideal" => {
            let mut c = paper.desk_scaled(1.0, 100_000);
            c.source.state = CascadeStateParams::ideal();
            c.source.rabi_damping = 0.0;
            c.source.incoherent_slope = 0.0;
            for d in &mut c.detectors {
                d.dark_rate = 0.0;
                d.jitter_sigma_ps = 0.0;
            }
            Ok(c)
        }
        other => Err(Error::Config {
            location: "preset".into(),
            message: format!(
                "unknown preset {other:?}; available: {}",
                PRESETS.iter().map(|p| p.0).collect::<Vec<_>>().join(", ")
            ),
        }),
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<String>,
    preset: Option<String>,
    seed: Option<u64>,
    workers: Option<usize>,
    out: Option<PathBuf>,
    scale: Option<RawScale>,
    source: Option<RawSource>,
    detector: Option<RawDetector>,
    setup: Option<RawSetup>,
    analysis: Option<RawAnalysis>,
    hbt: Option<RawChannel>,
    tpi: Option<RawTpi>,
    tomography: Option<RawTomography>,
    lifetime: Option<RawLifetime>,
    power: Option<RawPower>,
    coherence: Option<RawCoherence>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScale {
    efficiency: f64,
    periods: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    t1_xx: Option<f64>,
    t1_x: Option<f64>,
    t2_xx: Option<f64>,
    t2_x: Option<f64>,
    rabi_damping: Option<f64>,
    incoherent_slope: Option<f64>,
    cross_coherence: Option<f64>,
    background_fraction: Option<f64>,
    fss_uev: Option<f64>,
    rep_period_ps: Option<i64>,
    double_pulse_delay_ps: Option<i64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDetector {
    efficiency: Option<f64>,
    dark_rate: Option<f64>,
    jitter_ps: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSetup {
    pulse_area: Option<f64>,
    duration_s: Option<f64>,
    mzi_delay_ps: Option<i64>,
    hom_window_ps: Option<i64>,
    mode_overlap: Option<f64>,
    transmittance: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAnalysis {
    bin_width_ps: Option<i64>,
    window_ps: Option<i64>,
    half_window_ps: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawChannel {
    channel: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTpi {
    channel: Option<String>,
    parallel: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTomography {
    basis: Option<String>,
    co_polarized: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLifetime {
    bin_width_ps: Option<i64>,
    start_ps: Option<i64>,
    bins: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPower {
    theta_max: Option<f64>,
    points: Option<usize>,
    pulses_per_point: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoherence {
    model: Option<String>,
    t2: Option<f64>,
    tau_step_ps: Option<f64>,
    points: Option<usize>,
    noise: Option<f64>,
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].bytes().filter(|&b| b == b'\n').count() + 1
}

/// `section.key` plus the line where `key` is set, when it can be found.
fn locate(text: &str, section: &str, key: &str) -> String {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            current = name.trim().to_string();
        } else if current == section && t.split('=').next().map(str::trim) == Some(key) {
            return format!(
                "{}{key} (line {})",
                if section.is_empty() { String::new() } else { format!("{section}.") },
                i + 1
            );
        }
    }
    if section.is_empty() {
        key.to_string()
    } else {
        format!("{section}.{key}")
    }
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

/// Values that take precedence over the document, typically from the
/// command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub experiment: Option<String>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
}

/// Parses and validates a run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &Overrides::default())
}

/// [`parse_config`] with `overrides` applied on top of the document.
pub fn parse_config_with(text: &str, overrides: &Overrides) -> Result<RunConfig> {
    let mut raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config {
        location: e.span().map(|s| format!("line {}", line_of(text, s.start))).unwrap_or_else(|| "document".into()),
        message: e.message().to_string(),
    })?;
    let o = overrides.clone();
    raw.experiment = o.experiment.or(raw.experiment);
    raw.preset = o.preset.or(raw.preset);
    raw.seed = o.seed.or(raw.seed);
    raw.workers = o.workers.or(raw.workers);
    raw.out = o.out.or(raw.out);
    let field_err =
        |section: &str, key: &str, message: String| Error::Config { location: locate(text, section, key), message };

    let experiment = match raw.experiment.as_deref() {
        None | Some("") => return Err(field_err("", "experiment", "missing required field `experiment`".into())),
        Some(s) => s.parse::<ExperimentKind>().map_err(|e| match e {
            Error::Config { message, .. } => field_err("", "experiment", message),
            other => other,
        })?,
    };
    let preset_name = raw.preset.unwrap_or_else(|| "paper-default".into());
    let mut setup = preset(&preset_name).map_err(|e| match e {
        Error::Config { message, .. } => field_err("", "preset", message),
        other => other,
    })?;
    set(&mut setup.seed, raw.seed);
    set(&mut setup.workers, raw.workers);
    if experiment == ExperimentKind::Tpi {
        setup = setup.with_double_pulse();
    }

    if let Some(s) = raw.source {
        let src = &mut setup.source;
        set(&mut src.t1_xx, s.t1_xx);
        set(&mut src.t1_x, s.t1_x);
        set(&mut src.t2_xx, s.t2_xx);
        set(&mut src.t2_x, s.t2_x);
        set(&mut src.rabi_damping, s.rabi_damping);
        set(&mut src.incoherent_slope, s.incoherent_slope);
        set(&mut src.state.cross_coherence, s.cross_coherence);
        set(&mut src.state.background_fraction, s.background_fraction);
        set(&mut src.state.fss_uev, s.fss_uev);
        set(&mut src.rep_period_ps, s.rep_period_ps);
        set(&mut src.double_pulse_delay_ps, s.double_pulse_delay_ps);
    }
    if let Some(d) = raw.detector {
        for det in &mut setup.detectors {
            set(&mut det.efficiency, d.efficiency);
            set(&mut det.dark_rate, d.dark_rate);
            set(&mut det.jitter_sigma_ps, d.jitter_ps);
        }
    }
    if let Some(s) = raw.setup {
        set(&mut setup.pulse_area, s.pulse_area);
        set(&mut setup.duration_s, s.duration_s);
        if let Some(m) = s.mzi_delay_ps {
            setup.mzi_delay_ps = m;
            if experiment == ExperimentKind::Tpi {
                setup.source.double_pulse_delay_ps = m;
            }
        }
        set(&mut setup.hom_window_ps, s.hom_window_ps);
        set(&mut setup.beamsplitter.mode_overlap, s.mode_overlap);
        set(&mut setup.beamsplitter.transmittance, s.transmittance);
    }
    if let Some(sc) = raw.scale {
        if !(sc.efficiency > 0.0 && sc.efficiency <= 1.0) {
            return Err(field_err("scale", "efficiency", format!("{} not in (0, 1]", sc.efficiency)));
        }
        if sc.periods == 0 {
            return Err(field_err("scale", "periods", "must be > 0".into()));
        }
        setup = setup.desk_scaled(sc.efficiency, sc.periods);
    }

    let mut analysis = RunConfig::default_analysis(experiment);
    if let Some(a) = raw.analysis {
        set(&mut analysis.bin_width_ps, a.bin_width_ps);
        set(&mut analysis.window_ps, a.window_ps);
        set(&mut analysis.half_window_ps, a.half_window_ps);
    }
    if analysis.bin_width_ps <= 0 {
        return Err(field_err("analysis", "bin_width_ps", "must be > 0".into()));
    }
    if analysis.window_ps <= 0 || analysis.half_window_ps <= 0.0 {
        return Err(field_err("analysis", "window_ps", "windows must be > 0".into()));
    }

    let mut settings = Settings::default();
    let channel = |section: &str, v: Option<String>| -> Result<Option<Channel>> {
        v.map(|c| c.parse::<Channel>().map_err(|e| field_err(section, "channel", e.to_string()))).transpose()
    };
    if let Some(h) = raw.hbt {
        set(&mut settings.channel, channel("hbt", h.channel)?);
    }
    if let Some(t) = raw.tpi {
        set(&mut settings.channel, channel("tpi", t.channel)?);
        set(&mut settings.parallel, t.parallel);
    }
    if let Some(t) = raw.tomography {
        if let Some(b) = t.basis {
            settings.basis = b.parse().map_err(|e: Error| field_err("tomography", "basis", e.to_string()))?;
        }
        set(&mut settings.co_polarized, t.co_polarized);
    }
    if let Some(l) = raw.lifetime {
        set(&mut settings.lifetime.bin_width_ps, l.bin_width_ps);
        set(&mut settings.lifetime.start_ps, l.start_ps);
        set(&mut settings.lifetime.bins, l.bins);
    }
    if let Some(p) = raw.power {
        set(&mut settings.theta_max, p.theta_max);
        set(&mut settings.theta_points, p.points);
        set(&mut settings.pulses_per_point, p.pulses_per_point);
        if settings.theta_points == 0 {
            return Err(field_err("power", "points", "must be > 0".into()));
        }
    }
    if let Some(c) = raw.coherence {
        if let Some(m) = c.model {
            settings.coherence_model = m.parse().map_err(|e: Error| field_err("coherence", "model", e.to_string()))?;
        }
        set(&mut settings.coherence_t2, c.t2);
        set(&mut settings.tau_step_ps, c.tau_step_ps);
        set(&mut settings.tau_points, c.points);
        set(&mut settings.coherence_noise, c.noise);
        if !(settings.coherence_noise >= 0.0) {
            return Err(field_err("coherence", "noise", "must be ≥ 0".into()));
        }
        if !(settings.coherence_t2 > 0.0) {
            return Err(field_err("coherence", "t2", "must be > 0".into()));
        }
    }

    setup.validate().map_err(|e| {
        let (section, key) = match &e {
            Error::OutOfRange { name, .. } => {
                let section = match *name {
                    "efficiency" | "dark_rate" => "detector",
                    "jitter_sigma_ps" => return field_err("detector", "jitter_ps", e.to_string()),
                    "pulse_area" | "duration_s" | "mzi_delay_ps" | "hom_window_ps" | "mode_overlap"
                    | "transmittance" => "setup",
                    _ => "source",
                };
                (section, name.to_string())
            }
            Error::Unphysical(m) => ("source", m.split_whitespace().next().unwrap_or("").to_string()),
            _ => ("setup", String::new()),
        };
        field_err(section, &key, e.to_string())
    })?;

    Ok(RunConfig {
        experiment,
        preset: preset_name,
        out: raw.out.unwrap_or_else(|| PathBuf::from("out")),
        setup,
        analysis,
        settings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_default_values() {
        let c = parse_config("experiment = \"hbt\"\n").unwrap();
        assert_eq!(c.preset, "paper-default");
        assert_eq!(c.setup.source.t1_xx, 220.0);
        assert_eq!(c.setup.source.t1_x, 400.0);
        assert_eq!(c.setup.detectors[0].dark_rate, 250.0);
        assert_eq!(c.setup.source.rep_period_ps, 13_158);
    }

    #[test]
    fn missing_experiment_named() {
        for text in ["seed = 1\n", "experiment = \"\"\n"] {
            match parse_config(text).unwrap_err() {
                Error::Config { location, .. } => assert!(location.starts_with("experiment"), "{location}"),
                e => panic!("{e}"),
            }
        }
    }

    #[test]
    fn unknown_key_has_line() {
        let err = parse_config("experiment = \"hbt\"\n[source]\nt1_xy = 3.0\n").unwrap_err();
        match err {
            Error::Config { location, message } => {
                assert_eq!(location, "line 3");
                assert!(message.contains("t1_xy"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn t2_above_twice_t1_rejected() {
        let err = parse_config("experiment = \"hbt\"\n[source]\nt1_x = 100.0\nt2_x = 250.0\n").unwrap_err();
        let text = err.to_string();
        assert!(text.contains("source.t2_x (line 4)") && text.contains("2·t1_x"), "{text}");
    }

    #[test]
    fn out_of_range_names_field() {
        let err = parse_config("experiment = \"hbt\"\n[detector]\nefficiency = 1.5\n").unwrap_err();
        assert!(err.to_string().contains("detector.efficiency (line 3)"), "{err}");
    }

    #[test]
    fn overrides_and_scale() {
        let c = parse_config(
            "experiment = \"tpi\"\npreset = \"paper-default\"\nseed = 9\n[scale]\nefficiency = 0.5\nperiods = 1000\n[tpi]\nchannel = \"X\"\nparallel = false\n",
        )
        .unwrap();
        assert_eq!(c.seed(), 9);
        assert_eq!(c.setup.periods(), 1000);
        assert_eq!(c.setup.detectors[1].efficiency, 0.5);
        assert_eq!(c.setup.source.double_pulse_delay_ps, 4000);
        assert_eq!(c.settings.channel, Channel::X);
        assert!(!c.settings.parallel);
        let same = "experiment = \"tpi\"\nseed = 9\n[scale]\nefficiency = 0.5\nperiods = 1000\n[tpi]\nchannel = \"X\"\nparallel = false\n";
        assert_eq!(c.hash(), parse_config(same).unwrap().hash());
    }

    #[test]
    fn presets_resolve() {
        for (name, _) in PRESETS {
            preset(name).unwrap().validate().unwrap();
        }
        assert!(preset("nope").is_err());
    }
}
