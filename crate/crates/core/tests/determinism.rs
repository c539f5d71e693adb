use qdcascade::experiments::{
    run_hbt, run_lifetime, run_power_series, run_tomography, run_tpi, ExperimentConfig, LifetimeWindow,
};
use qdcascade::reproduce::{reproduce_paper, ReproduceOptions, Scale};
use qdcascade::{Basis, Channel, TimeTagStream};

fn cfg(seed: u64, workers: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig::paper_default().desk_scaled(0.3, 20_000);
    c.seed = seed;
    c.workers = workers;
    c
}

type Streams = (TimeTagStream, TimeTagStream);

fn check(name: &str, run: impl Fn(&ExperimentConfig) -> Streams) {
    let a = run(&cfg(4, 1));
    let b = run(&cfg(4, 3));
    let c = run(&cfg(4, 0));
    assert_eq!(a, b, "{name}: 1 vs 3 workers");
    assert_eq!(a, c, "{name}: 1 worker vs global pool");
    assert_ne!(a, run(&cfg(5, 1)), "{name}: seed has no effect");
    assert!(!a.0.is_empty() && !a.1.is_empty(), "{name}: empty streams");
}

#[test]
fn hbt_is_deterministic() {
    check("hbt", |c| run_hbt(c, Channel::X).unwrap());
}

#[test]
fn tomography_is_deterministic() {
    check("tomography", |c| run_tomography(c, Basis::Diagonal, false).unwrap());
}

#[test]
fn tpi_is_deterministic() {
    check("tpi", |c| run_tpi(&c.with_double_pulse(), Channel::XX, true).unwrap());
}

#[test]
fn lifetime_is_deterministic() {
    let w = LifetimeWindow::default();
    let a = run_lifetime(&cfg(4, 1), Channel::XX, &w).unwrap();
    assert_eq!(a, run_lifetime(&cfg(4, 3), Channel::XX, &w).unwrap());
    assert_ne!(a, run_lifetime(&cfg(5, 1), Channel::XX, &w).unwrap());
}

#[test]
fn power_series_is_deterministic() {
    let grid = [0.5, 1.0, 2.0, 3.0];
    let a = run_power_series(&cfg(4, 1), &grid, 2000).unwrap();
    assert_eq!(a, run_power_series(&cfg(4, 3), &grid, 2000).unwrap());
    assert_ne!(a, run_power_series(&cfg(5, 1), &grid, 2000).unwrap());
}

#[test]
fn reproduction_is_deterministic() {
    let opts = |workers| ReproduceOptions { seed: 8, outdir: None, workers, scale: Scale::quick() };
    let a = reproduce_paper(&opts(1)).unwrap();
    let b = reproduce_paper(&opts(1)).unwrap();
    let c = reproduce_paper(&opts(8)).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    assert_eq!(a.to_json(), c.to_json());
}
