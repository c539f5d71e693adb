use qdcascade::analysis::correlate;
use qdcascade::analysis::peaks::{g2_zero_with_error, integrate_peaks, integrate_window};
use qdcascade::config::preset;
use qdcascade::detection::{dark_counts, wavepacket_overlap, DetectorParams, Wavepacket};
use qdcascade::experiments::{run_hbt, run_power_series, run_tomography, run_tomography_setting, ExperimentConfig};
use qdcascade::quantum_state::{Basis, ProductBasis};
use qdcascade::rng::{Domain, Substreams};
use qdcascade::source::biexciton_population;
use qdcascade::{Channel, TimeTagStream};

const PERIOD: f64 = 13_158.0;

fn dark_free(periods: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::paper_default().desk_scaled(0.3, periods);
    c.seed = 5;
    for d in &mut c.detectors {
        d.dark_rate = 0.0;
    }
    c
}

fn centre_and_side(a: &TimeTagStream, b: &TimeTagStream) -> (f64, f64) {
    let h = correlate(a, b, 256, 4 * 13_158 + 2_500).unwrap();
    let p = integrate_peaks(&h, PERIOD, 2000.0).unwrap();
    let sides = p.side_areas();
    (p.center().unwrap(), sides.iter().sum::<f64>() / sides.len() as f64)
}

#[test]
fn psi_plus_bunches_linear_and_antibunches_circular() {
    let mut c = preset("ideal").unwrap().desk_scaled(1.0, 20_000);
    c.seed = 2;
    let (a, b) = run_tomography(&c, Basis::Linear, true).unwrap();
    let (centre, side) = centre_and_side(&a, &b);
    assert!(centre > 1.9 * side, "linear co: centre {centre}, side {side}");
    let (a, b) = run_tomography(&c, Basis::Circular, true).unwrap();
    let (centre, side) = centre_and_side(&a, &b);
    assert!(centre < 0.02 * side, "circular co: centre {centre}, side {side}");
}

#[test]
fn projection_settings_add_up_to_all_pairs() {
    let n = 200_000u64;
    let c = dark_free(n);
    let eff = c.detectors[0].efficiency;
    let p = biexciton_population(c.pulse_area, c.source.rabi_damping, c.source.incoherent_slope);
    for basis in Basis::ALL {
        let mut total = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let (a, b) = run_tomography_setting(&c, ProductBasis::same(basis), i, j).unwrap();
                total += centre_and_side(&a, &b).0;
            }
        }
        // X photons later than the window edge are lost from the centre peak.
        let inside = 1.0 - (-2000.0 / c.source.t1_x).exp();
        let expected = n as f64 * p * eff * eff * inside;
        assert!((total - expected).abs() < 3.0 * expected.sqrt(), "{basis:?}: {total} vs {expected}");
    }
}

#[test]
fn single_photons_never_coincide_at_zero_delay() {
    let c = dark_free(100_000);
    for ch in [Channel::XX, Channel::X] {
        let (a, b) = run_hbt(&c, ch).unwrap();
        let h = correlate(&a, &b, 256, 3 * 13_158).unwrap();
        let (centre, _) = integrate_window(&h, 0.0, 2000.0).unwrap();
        assert_eq!(centre, 0.0, "{ch:?}");
        assert!(h.total() > 1000);
    }
}

#[test]
fn poisson_streams_have_unit_g2() {
    let duration = 100_000_000_000i64;
    let streams = Substreams::new(99);
    let s = |id: u32| {
        let d = DetectorParams { efficiency: 1.0, dark_rate: 1e7, jitter_sigma_ps: 0.0, id };
        TimeTagStream::new(dark_counts(&d, 0, duration, &mut streams.stream(Domain::Aux(id), 0)), duration)
    };
    let h = correlate(&s(0), &s(1), 256, 10 * 13_158 + 1000).unwrap();
    let g = g2_zero_with_error(&integrate_peaks(&h, PERIOD, 640.0).unwrap()).unwrap();
    assert!((g.value - 1.0).abs() < 3.0 * g.sigma, "{g:?}");
}

#[test]
fn hom_overlap_matches_coherence_ratio() {
    let (t1, t2) = (220.0, 192.0);
    let n = 3000u64;
    let samples: Vec<f64> = (0..n)
        .map(|i| {
            let a = Wavepacket { start: 0, t1, t2, seed: 2 * i + 1 };
            let b = Wavepacket { start: 0, t1, t2, seed: 2 * i + 2 };
            wavepacket_overlap(&a, &b).unwrap().norm_sqr()
        })
        .collect();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let err = (var / n as f64).sqrt();
    let expected = t2 / (2.0 * t1);
    assert!((mean - expected).abs() < 3.0 * err, "{mean} ± {err} vs {expected}");
}

#[test]
fn identical_wavepackets_overlap_fully() {
    let a = Wavepacket { start: 10, t1: 400.0, t2: 800.0, seed: 3 };
    let b = Wavepacket { start: 10, t1: 400.0, t2: 800.0, seed: 4 };
    assert!((wavepacket_overlap(&a, &b).unwrap().norm_sqr() - 1.0).abs() < 1e-9);
    let same = wavepacket_overlap(&a, &a).unwrap();
    assert!((same.re - 1.0).abs() < 1e-12 && same.im.abs() < 1e-12);
}

#[test]
fn power_series_follows_population() {
    let c = dark_free(1000);
    let pi = std::f64::consts::PI;
    let pts = run_power_series(&c, &[0.0, pi, 2.0 * pi], 20_000).unwrap();
    assert_eq!(pts[0].i_xx, 0);
    for p in &pts[1..] {
        let expected = 20_000.0
            * biexciton_population(p.theta, c.source.rabi_damping, c.source.incoherent_slope)
            * c.detectors[0].efficiency;
        assert!((p.i_xx as f64 - expected).abs() < 4.0 * expected.sqrt().max(1.0), "{p:?} vs {expected}");
    }
}
