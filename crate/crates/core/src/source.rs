//! Stochastic model of the quantum dot: two-photon Rabi preparation of the
//! biexciton, cascade timing, pair polarization and dephasing.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::constants::{PLANCK_UEV_NS, REP_PERIOD_PS};
use crate::error::{check_range, Error, Result};
use crate::quantum_state::{
    cascade_state, project_pair, CascadeStateParams, PolarizationVector, ProductBasis, TwoQubitDensity,
};

/// Which transition a photon came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Channel {
    #[serde(rename = "X")]
    X,
    #[serde(rename = "XX")]
    XX,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::X => "X",
            Channel::XX => "XX",
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "X" | "x" => Ok(Channel::X),
            "XX" | "xx" => Ok(Channel::XX),
            other => Err(Error::Format(format!("unknown channel `{other}`"))),
        }
    }
}

/// Quantum-dot parameters. Times in ps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub t1_xx: f64,
    pub t1_x: f64,
    pub t2_xx: f64,
    pub t2_x: f64,
    /// Exponential damping of the Rabi envelope per radian of pulse area.
    pub rabi_damping: f64,
    /// Incoherent population added per radian of pulse area.
    pub incoherent_slope: f64,
    pub state: CascadeStateParams,
    pub rep_period_ps: i64,
    /// Second excitation pulse delay within a period; 0 disables it.
    pub double_pulse_delay_ps: i64,
}

impl SourceParams {
    /// Lifetimes, resonant-excitation coherence times and the 76 MHz laser.
    pub fn paper_default() -> Self {
        Self {
            t1_xx: 220.0,
            t1_x: 400.0,
            t2_xx: 192.0,
            t2_x: 357.0,
            rabi_damping: 0.08,
            incoherent_slope: 0.035,
            state: CascadeStateParams::calibrate_from_contrasts(0.87, 0.67, -0.69)
                .expect("reference contrasts are in range"),
            rep_period_ps: REP_PERIOD_PS,
            double_pulse_delay_ps: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t1_xx", self.t1_xx), ("t1_x", self.t1_x), ("t2_xx", self.t2_xx), ("t2_x", self.t2_x)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::OutOfRange { name, detail: format!("{v} must be > 0") });
            }
        }
        if self.t2_x > 2.0 * self.t1_x {
            return Err(Error::Unphysical(format!(
                "t2_x = {} ps exceeds the lifetime limit 2·t1_x = {} ps",
                self.t2_x,
                2.0 * self.t1_x
            )));
        }
        if self.t2_xx > 2.0 * self.t1_xx {
            return Err(Error::Unphysical(format!(
                "t2_xx = {} ps exceeds the lifetime limit 2·t1_xx = {} ps",
                self.t2_xx,
                2.0 * self.t1_xx
            )));
        }
        check_range("rabi_damping", self.rabi_damping, 0.0, f64::MAX)?;
        check_range("incoherent_slope", self.incoherent_slope, 0.0, f64::MAX)?;
        self.state.validate()?;
        if self.rep_period_ps <= 0 {
            return Err(Error::OutOfRange {
                name: "rep_period_ps",
                detail: format!("{} must be > 0", self.rep_period_ps),
            });
        }
        if self.double_pulse_delay_ps < 0 || self.double_pulse_delay_ps >= self.rep_period_ps {
            return Err(Error::OutOfRange {
                name: "double_pulse_delay_ps",
                detail: format!("{} not in [0, rep_period_ps = {})", self.double_pulse_delay_ps, self.rep_period_ps),
            });
        }
        Ok(())
    }

    pub fn lifetime(&self, ch: Channel) -> f64 {
        match ch {
            Channel::X => self.t1_x,
            Channel::XX => self.t1_xx,
        }
    }

    pub fn coherence_time(&self, ch: Channel) -> f64 {
        match ch {
            Channel::X => self.t2_x,
            Channel::XX => self.t2_xx,
        }
    }

    /// Pulse offsets within one repetition period.
    pub fn pulse_offsets(&self) -> Vec<i64> {
        if self.double_pulse_delay_ps > 0 {
            vec![0, self.double_pulse_delay_ps]
        } else {
            vec![0]
        }
    }
}

/// One emitted photon. Times are integer picoseconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotonEvent {
    pub channel: Channel,
    pub pair_id: u64,
    pub emission_time: i64,
    /// When the emitting level was populated: the pulse for XX photons, the
    /// XX emission for X photons. The wavepacket envelope starts here.
    pub excitation_time: i64,
    pub polarization: PolarizationVector,
    pub coherence_seed: u64,
}

/// Excitation pulse characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseParams {
    pub duration_fwhm_ps: f64,
    pub linewidth_fwhm_uev: f64,
}

impl PulseParams {
    pub fn paper_default() -> Self {
        Self { duration_fwhm_ps: 21.4, linewidth_fwhm_uev: 95.0 }
    }
}

/// Biexciton occupation after a pulse of area `theta`:
/// `clamp(sin²(θ/2)·exp(-κθ) + cθ, 0, 1)`.
pub fn biexciton_population(theta: f64, kappa: f64, incoherent: f64) -> f64 {
    let s = (0.5 * theta).sin();
    (s * s * (-kappa * theta).exp() + incoherent * theta).clamp(0.0, 1.0)
}

/// `I(π) / (I(π) + I(2π))`, a lower bound on the preparation fidelity.
pub fn preparation_fidelity_bound(i_pi: f64, i_2pi: f64) -> Result<f64> {
    if i_pi < 0.0 || i_2pi < 0.0 {
        return Err(Error::OutOfRange { name: "intensity", detail: format!("negative intensity ({i_pi}, {i_2pi})") });
    }
    let sum = i_pi + i_2pi;
    if sum <= 0.0 {
        return Err(Error::Degenerate("I(π) + I(2π) = 0".into()));
    }
    Ok(i_pi / sum)
}

/// Closed-form solution of the three-level rate equations with the
/// biexciton initially occupied. Returns `(n_XX, n_X)` at `t`.
pub fn cascade_populations(t: f64, t1_xx: f64, t1_x: f64) -> (f64, f64) {
    let t = t.max(0.0);
    let g_xx = 1.0 / t1_xx;
    let g_x = 1.0 / t1_x;
    let n_xx = (-g_xx * t).exp();
    let dg = g_x - g_xx;
    let n_x = if (dg * t).abs() < 1e-9 {
        // Degenerate rates: the limit of the biexponential.
        g_xx * t * (-g_xx * t).exp()
    } else {
        g_xx / dg * ((-g_xx * t).exp() - (-g_x * t).exp())
    };
    (n_xx, n_x)
}

/// Photon emission rate of a channel at `t` after the pulse, per ps.
pub fn emission_rate(ch: Channel, t: f64, t1_xx: f64, t1_x: f64) -> f64 {
    if t < 0.0 {
        return 0.0;
    }
    let (n_xx, n_x) = cascade_populations(t, t1_xx, t1_x);
    match ch {
        Channel::XX => n_xx / t1_xx,
        Channel::X => n_x / t1_x,
    }
}

/// Draws the four-outcome product measurement of `rho`: the XX outcome from
/// its marginal, then the X outcome from the conditional.
pub fn sample_pair_polarization<R: Rng + ?Sized>(
    rho: &TwoQubitDensity,
    basis: ProductBasis,
    rng: &mut R,
) -> (PolarizationVector, PolarizationVector) {
    let (xx, x) = sample_pair_outcome(rho, basis, rng);
    (basis.xx.states()[xx], basis.x.states()[x])
}

/// Same as [`sample_pair_polarization`] but returns basis indices.
pub fn sample_pair_outcome<R: Rng + ?Sized>(rho: &TwoQubitDensity, basis: ProductBasis, rng: &mut R) -> (usize, usize) {
    let a = basis.xx.states();
    let b = basis.x.states();
    let p00 = project_pair(rho, &a[0], &b[0]);
    let p01 = project_pair(rho, &a[0], &b[1]);
    let p10 = project_pair(rho, &a[1], &b[0]);
    let p11 = project_pair(rho, &a[1], &b[1]);
    let p_xx0 = p00 + p01;
    let total = p_xx0 + p10 + p11;
    let u: f64 = rng.random::<f64>() * total;
    let xx = usize::from(u >= p_xx0);
    let (q0, q1) = if xx == 0 { (p00, p01) } else { (p10, p11) };
    let v: f64 = rng.random::<f64>() * (q0 + q1);
    let x = usize::from(v >= q0);
    (xx, x)
}

fn draw_delay<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    Exp::new(1.0 / mean).expect("positive lifetime").sample(rng)
}

/// Runs one radiative cascade after an excitation pulse at `pulse_time`.
///
/// Returns `(XX photon, X photon)` when the biexciton was prepared. The
/// pair polarization is sampled in `basis` from the cascade state at the
/// exciton dwell time.
pub fn emit_cascade<R: Rng + ?Sized>(
    params: &SourceParams,
    basis: ProductBasis,
    pulse_time: i64,
    prepared: bool,
    pair_id: u64,
    rng: &mut R,
) -> Result<Option<(PhotonEvent, PhotonEvent)>> {
    if !prepared {
        return Ok(None);
    }
    let d1 = draw_delay(params.t1_xx, rng);
    let d2 = draw_delay(params.t1_x, rng);
    let t_xx = pulse_time + d1.round() as i64;
    let t_x = t_xx + (d2.round() as i64).max(1);
    let rho = cascade_state(&params.state, d2)?;
    let (pol_xx, pol_x) = sample_pair_polarization(&rho, basis, rng);
    let seed_xx: u64 = rng.random();
    let seed_x: u64 = rng.random();
    let xx = PhotonEvent {
        channel: Channel::XX,
        pair_id,
        emission_time: t_xx,
        excitation_time: pulse_time,
        polarization: pol_xx,
        coherence_seed: seed_xx,
    };
    let x = PhotonEvent {
        channel: Channel::X,
        pair_id,
        emission_time: t_x,
        excitation_time: t_xx,
        polarization: pol_x,
        coherence_seed: seed_x,
    };
    Ok(Some((xx, x)))
}

/// Pure-dephasing rate `1/T2 - 1/(2·T1)` in 1/ps.
pub fn pure_dephasing_rate(t1: f64, t2: f64) -> Result<f64> {
    if !(t1 > 0.0 && t2 > 0.0) {
        return Err(Error::OutOfRange { name: "t1/t2", detail: format!("({t1}, {t2}) must be > 0") });
    }
    if t2 > 2.0 * t1 * (1.0 + 1e-12) {
        return Err(Error::Unphysical(format!("T2 = {t2} ps exceeds 2·T1 = {} ps", 2.0 * t1)));
    }
    Ok((1.0 / t2 - 0.5 / t1).max(0.0))
}

/// Wiener phase path sampled every `dt` ps over `duration` ps, starting at 0.
/// Increments are Gaussian with variance `2·γ*·dt`.
pub fn phase_trajectory<R: Rng + ?Sized>(t1: f64, t2: f64, duration: f64, dt: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(duration >= 0.0) {
        return Err(Error::OutOfRange { name: "dt/duration", detail: format!("dt = {dt}, duration = {duration}") });
    }
    let gamma = pure_dephasing_rate(t1, t2)?;
    let steps = (duration / dt).ceil() as usize;
    let mut phi = Vec::with_capacity(steps + 1);
    phi.push(0.0);
    if gamma == 0.0 {
        phi.resize(steps + 1, 0.0);
        return Ok(phi);
    }
    let step = Normal::new(0.0, (2.0 * gamma * dt).sqrt()).expect("finite sigma");
    let mut acc = 0.0;
    for _ in 0..steps {
        acc += step.sample(rng);
        phi.push(acc);
    }
    Ok(phi)
}

/// Duration × spectral width, with the width converted to Hz via `Δν = ΔE/h`.
pub fn time_bandwidth_product(p: &PulseParams) -> Result<f64> {
    if !(p.duration_fwhm_ps > 0.0 && p.linewidth_fwhm_uev > 0.0) {
        return Err(Error::OutOfRange { name: "pulse", detail: format!("{p:?} must have positive fields") });
    }
    let dnu_hz = p.linewidth_fwhm_uev / PLANCK_UEV_NS * 1e9;
    Ok(p.duration_fwhm_ps * 1e-12 * dnu_hz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum_state::{bell_psi_plus, Basis};
    use crate::rng::{Domain, Substreams};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn rabi_limits() {
        assert_abs_diff_eq!(biexciton_population(PI, 0.0, 0.0), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(biexciton_population(2.0 * PI, 0.0, 0.0), 0.0, epsilon = 1e-15);
        assert_eq!(biexciton_population(PI, 0.0, 1.0), 1.0);
    }

    #[test]
    fn bound_values() {
        assert_abs_diff_eq!(preparation_fidelity_bound(3.0, 1.0).unwrap(), 0.75);
        assert_abs_diff_eq!(preparation_fidelity_bound(1.0, 0.0).unwrap(), 1.0);
        assert_abs_diff_eq!(preparation_fidelity_bound(1.0, 1.0).unwrap(), 0.5);
        assert!(preparation_fidelity_bound(0.0, 0.0).is_err());
    }

    #[test]
    fn default_damping_clears_the_bound() {
        let p = SourceParams::paper_default();
        let i_pi = biexciton_population(PI, p.rabi_damping, p.incoherent_slope);
        let i_2pi = biexciton_population(2.0 * PI, p.rabi_damping, p.incoherent_slope);
        assert!(preparation_fidelity_bound(i_pi, i_2pi).unwrap() >= 0.75);
    }

    /// Classical RK4 on the rate equations.
    fn rk4_populations(t_end: f64, a: f64, b: f64, steps: usize) -> (f64, f64) {
        let f = |y: [f64; 2]| [-y[0] / a, y[0] / a - y[1] / b];
        let h = t_end / steps as f64;
        let mut y = [1.0, 0.0];
        for _ in 0..steps {
            let k1 = f(y);
            let k2 = f([y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]]);
            let k3 = f([y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]]);
            let k4 = f([y[0] + h * k3[0], y[1] + h * k3[1]]);
            for i in 0..2 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        (y[0], y[1])
    }

    #[test]
    fn populations_match_rk4() {
        assert_eq!(cascade_populations(0.0, 220.0, 400.0), (1.0, 0.0));
        for t in [50.0, 200.0, 1000.0] {
            let (a, b) = cascade_populations(t, 220.0, 400.0);
            let (ra, rb) = rk4_populations(t, 220.0, 400.0, 20_000);
            assert_abs_diff_eq!(a, ra, epsilon = 1e-8);
            assert_abs_diff_eq!(b, rb, epsilon = 1e-8);
        }
        let (a, b) = cascade_populations(50_000.0, 220.0, 400.0);
        assert!(a < 1e-20 && b < 1e-20);
        let (_, b) = cascade_populations(300.0, 300.0, 300.0);
        let (_, rb) = rk4_populations(300.0, 300.0, 300.0, 20_000);
        assert_abs_diff_eq!(b, rb, epsilon = 1e-8);
    }

    #[test]
    fn ground_population_nondecreasing() {
        let mut prev = 0.0;
        for i in 0..500 {
            let (a, b) = cascade_populations(i as f64 * 10.0, 220.0, 400.0);
            let n0 = 1.0 - a - b;
            assert!(n0 >= prev - 1e-15);
            prev = n0;
        }
    }

    #[test]
    fn cascade_ordering_and_reproducibility() {
        let p = SourceParams::paper_default();
        let basis = ProductBasis::same(Basis::Linear);
        let s = Substreams::new(9);
        for i in 0..5000 {
            let (xx, x) = emit_cascade(&p, basis, 1000, true, i, &mut s.stream(Domain::Pulse, i)).unwrap().unwrap();
            assert!(x.emission_time > xx.emission_time);
            assert_eq!(x.excitation_time, xx.emission_time);
            let again = emit_cascade(&p, basis, 1000, true, i, &mut s.stream(Domain::Pulse, i)).unwrap().unwrap();
            assert_eq!(again.0, xx);
            assert_eq!(again.1, x);
        }
        assert!(emit_cascade(&p, basis, 0, false, 0, &mut s.stream(Domain::Pulse, 0)).unwrap().is_none());
    }

    #[test]
    fn deterministic_state_sampling() {
        let mut m = nalgebra::Matrix4::zeros();
        m[(0, 0)] = num_complex::Complex64::new(1.0, 0.0);
        let rho = TwoQubitDensity::from_matrix(m).unwrap();
        let mut rng = Substreams::new(1).stream(Domain::Aux(0), 0);
        for _ in 0..1000 {
            let (a, b) = sample_pair_outcome(&rho, ProductBasis::same(Basis::Linear), &mut rng);
            assert_eq!((a, b), (0, 0));
        }
        let _ = bell_psi_plus();
    }

    #[test]
    fn trajectory_limits_and_errors() {
        let mut rng = Substreams::new(3).stream(Domain::Aux(0), 0);
        let phi = phase_trajectory(400.0, 800.0, 100.0, 1.0, &mut rng).unwrap();
        assert_eq!(phi.len(), 101);
        assert!(phi.iter().all(|&x| x == 0.0));
        assert!(phase_trajectory(400.0, 900.0, 100.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn tbp_values() {
        let tbp = time_bandwidth_product(&PulseParams::paper_default()).unwrap();
        assert!((tbp - 0.492).abs() <= 0.002, "{tbp}");
        let tiny = PulseParams { duration_fwhm_ps: 21.4, linewidth_fwhm_uev: 1e-9 };
        assert!(time_bandwidth_product(&tiny).unwrap() < 1e-9);
        assert_eq!(crate::constants::GAUSSIAN_TBP_LIMIT, 0.441);
    }

    #[test]
    fn validation_rejects_superlifetime_coherence() {
        let mut p = SourceParams::paper_default();
        p.t2_x = 900.0;
        assert!(matches!(p.validate(), Err(Error::Unphysical(_))));
    }
}
