//! Two-qubit polarization algebra for the XX/X photon pair.
//!
//! Basis order is `{HH, HV, VH, VV}` with the biexciton photon as the first
//! qubit. Circular states follow `R = (H - iV)/√2`, `L = (H + iV)/√2`.

use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::{Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::HBAR_UEV_PS;
use crate::error::{check_range, Error, Result};

pub const NORM_TOL: f64 = 1e-12;
pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Normalized Jones vector in the H/V basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationVector(Vector2<Complex64>);

impl PolarizationVector {
    pub fn new(h: Complex64, v: Complex64) -> Result<Self> {
        let norm = (h.norm_sqr() + v.norm_sqr()).sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(Error::OutOfRange { name: "polarization norm", detail: format!("|ψ| = {norm}, expected 1") });
        }
        Ok(Self(Vector2::new(h, v)))
    }

    /// Builds a vector from unnormalized amplitudes.
    pub fn normalized(h: Complex64, v: Complex64) -> Result<Self> {
        let norm = (h.norm_sqr() + v.norm_sqr()).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Degenerate("zero polarization vector".into()));
        }
        Ok(Self(Vector2::new(h / norm, v / norm)))
    }

    fn unchecked(h: Complex64, v: Complex64) -> Self {
        Self(Vector2::new(h, v))
    }

    pub fn h() -> Self {
        Self::unchecked(ONE, ZERO)
    }
    pub fn v() -> Self {
        Self::unchecked(ZERO, ONE)
    }
    pub fn d() -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Self::unchecked(s, s)
    }
    pub fn a() -> Self {
        let s = Complex64::new(FRAC_1_SQRT_2, 0.0);
        Self::unchecked(s, -s)
    }
    pub fn r() -> Self {
        Self::unchecked(Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(0.0, -FRAC_1_SQRT_2))
    }
    pub fn l() -> Self {
        Self::unchecked(Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::new(0.0, FRAC_1_SQRT_2))
    }

    pub fn amplitudes(&self) -> (Complex64, Complex64) {
        (self.0[0], self.0[1])
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> Complex64 {
        self.0[0].conj() * other.0[0] + self.0[1].conj() * other.0[1]
    }

    /// Product state `|self ⊗ other⟩` in `{HH, HV, VH, VV}` order.
    pub fn tensor(&self, other: &Self) -> Vector4<Complex64> {
        Vector4::new(self.0[0] * other.0[0], self.0[0] * other.0[1], self.0[1] * other.0[0], self.0[1] * other.0[1])
    }
}

/// One of the three mutually unbiased polarization bases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Basis {
    Linear,
    Diagonal,
    Circular,
}

impl Basis {
    pub const ALL: [Basis; 3] = [Basis::Linear, Basis::Diagonal, Basis::Circular];

    /// `[H, V]`, `[D, A]` or `[R, L]`.
    pub fn states(self) -> [PolarizationVector; 2] {
        match self {
            Basis::Linear => [PolarizationVector::h(), PolarizationVector::v()],
            Basis::Diagonal => [PolarizationVector::d(), PolarizationVector::a()],
            Basis::Circular => [PolarizationVector::r(), PolarizationVector::l()],
        }
    }

    pub fn labels(self) -> [&'static str; 2] {
        match self {
            Basis::Linear => ["H", "V"],
            Basis::Diagonal => ["D", "A"],
            Basis::Circular => ["R", "L"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Basis::Linear => "linear",
            Basis::Diagonal => "diagonal",
            Basis::Circular => "circular",
        }
    }
}

impl std::str::FromStr for Basis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(Basis::Linear),
            "diagonal" => Ok(Basis::Diagonal),
            "circular" => Ok(Basis::Circular),
            other => Err(Error::Format(format!("unknown basis `{other}`"))),
        }
    }
}

/// Measurement basis for the pair: one single-photon basis per photon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ProductBasis {
    pub xx: Basis,
    pub x: Basis,
}

impl ProductBasis {
    pub fn same(basis: Basis) -> Self {
        Self { xx: basis, x: basis }
    }

    /// The four product outcomes `(i, j)` with their projector vectors.
    pub fn outcomes(&self) -> [((usize, usize), PolarizationVector, PolarizationVector); 4] {
        let a = self.xx.states();
        let b = self.x.states();
        [((0, 0), a[0], b[0]), ((0, 1), a[0], b[1]), ((1, 0), a[1], b[0]), ((1, 1), a[1], b[1])]
    }
}

/// Validated 4×4 density matrix of the photon pair.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoQubitDensity(Matrix4<Complex64>);

impl TwoQubitDensity {
    /// Wraps `m` after checking hermiticity, unit trace and positivity.
    pub fn from_matrix(m: Matrix4<Complex64>) -> Result<Self> {
        let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if herm > HERMITIAN_TOL {
            return Err(Error::Unphysical(format!("density matrix not Hermitian (deviation {herm:e})")));
        }
        let tr = m.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Unphysical(format!("trace {tr} ≠ 1")));
        }
        let rho = Self(m);
        let min_eig = rho.min_eigenvalue();
        if min_eig < -PSD_TOL {
            return Err(Error::Unphysical(format!("negative eigenvalue {min_eig:e}")));
        }
        Ok(rho)
    }

    pub fn matrix(&self) -> &Matrix4<Complex64> {
        &self.0
    }

    pub fn element(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn maximally_mixed() -> Self {
        Self(Matrix4::identity().map(|z: Complex64| z * 0.25))
    }

    pub fn pure(state: &Vector4<Complex64>) -> Result<Self> {
        let n = state.norm();
        if n == 0.0 {
            return Err(Error::Degenerate("zero state vector".into()));
        }
        let psi = state / Complex64::new(n, 0.0);
        Self::from_matrix(psi * psi.adjoint())
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = self.0.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }
}

/// Knobs of the phenomenological cascade state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CascadeStateParams {
    /// Coherence `k` between the |HH⟩ and |VV⟩ decay paths.
    pub cross_coherence: f64,
    /// Exciton fine-structure splitting in µeV.
    pub fss_uev: f64,
    /// Weight `b` of the unpolarized background.
    pub background_fraction: f64,
}

impl Default for CascadeStateParams {
    fn default() -> Self {
        Self::ideal()
    }
}

impl CascadeStateParams {
    pub fn ideal() -> Self {
        Self { cross_coherence: 1.0, fss_uev: 0.0, background_fraction: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        check_range("cross_coherence", self.cross_coherence, 0.0, 1.0)?;
        check_range("background_fraction", self.background_fraction, 0.0, 1.0)?;
        if !self.fss_uev.is_finite() {
            return Err(Error::OutOfRange { name: "fss_uev", detail: "not finite".into() });
        }
        Ok(())
    }

    /// Solves `C_lin = 1 - b` and `C_diag = -C_circ = (1 - b) k` in the
    /// least-squares sense. The diagonal and circular contrasts enter
    /// symmetrically, so `k` uses their mean magnitude.
    pub fn calibrate_from_contrasts(c_lin: f64, c_diag: f64, c_circ: f64) -> Result<Self> {
        let b = 1.0 - c_lin;
        if !(0.0..1.0).contains(&b) {
            return Err(Error::OutOfRange {
                name: "c_linear",
                detail: format!("{c_lin} gives background fraction {b}"),
            });
        }
        let k = (c_diag - c_circ) / (2.0 * (1.0 - b));
        let params = Self { cross_coherence: k, fss_uev: 0.0, background_fraction: b };
        params.validate()?;
        Ok(params)
    }
}

/// `|ψ⁺⟩⟨ψ⁺|` with `|ψ⁺⟩ = (|HH⟩ + |VV⟩)/√2`.
pub fn bell_psi_plus() -> TwoQubitDensity {
    let mut m = Matrix4::zeros();
    for &(r, c) in &[(0, 0), (0, 3), (3, 0), (3, 3)] {
        m[(r, c)] = Complex64::new(0.5, 0.0);
    }
    TwoQubitDensity(m)
}

/// Phase `S·τ/ħ` accumulated between the two exciton paths.
pub fn fss_phase(fss_uev: f64, tau_ps: f64) -> f64 {
    fss_uev * tau_ps / HBAR_UEV_PS
}

/// `b·I/4 + (1 - b)·ρ_k`, where `ρ_k` keeps the |HH⟩/|VV⟩ populations at
/// 1/2 and carries coherence `(k/2)·exp(iSτ/ħ)`.
pub fn cascade_state(params: &CascadeStateParams, tau_ps: f64) -> Result<TwoQubitDensity> {
    params.validate()?;
    if !(tau_ps >= 0.0) {
        return Err(Error::OutOfRange { name: "tau", detail: format!("{tau_ps} < 0") });
    }
    let b = params.background_fraction;
    let k = params.cross_coherence;
    let phase = fss_phase(params.fss_uev, tau_ps);
    let coh = Complex64::from_polar(0.5 * k * (1.0 - b), phase);
    let mut m = Matrix4::<Complex64>::identity().map(|z| z * (0.25 * b));
    m[(0, 0)] += Complex64::new(0.5 * (1.0 - b), 0.0);
    m[(3, 3)] += Complex64::new(0.5 * (1.0 - b), 0.0);
    m[(0, 3)] = coh;
    m[(3, 0)] = coh.conj();
    // Eigenvalues b/4 (twice) and b/4 + (1-b)(1 ± k)/2 are non-negative for
    // validated parameters.
    Ok(TwoQubitDensity(m))
}

/// `⟨a ⊗ b|ρ|a ⊗ b⟩` for XX polarization `pol_xx` and X polarization `pol_x`.
pub fn project_pair(rho: &TwoQubitDensity, pol_xx: &PolarizationVector, pol_x: &PolarizationVector) -> f64 {
    let psi = pol_xx.tensor(pol_x);
    let p = (psi.adjoint() * rho.matrix() * psi)[(0, 0)].re;
    p.clamp(0.0, 1.0)
}

/// Correlation contrast `(P_co - P_cross)/(P_co + P_cross)` in `basis`,
/// where co-polarized means both photons in the first basis state.
pub fn expected_contrast(rho: &TwoQubitDensity, basis: Basis) -> Result<f64> {
    let [s0, s1] = basis.states();
    let p_co = project_pair(rho, &s0, &s0);
    let p_cross = project_pair(rho, &s0, &s1);
    let sum = p_co + p_cross;
    if sum <= 0.0 {
        return Err(Error::Degenerate(format!("no weight in the {} basis projections", basis.name())));
    }
    Ok((p_co - p_cross) / sum)
}

/// Lower bound on the fidelity with `|ψ⁺⟩` from the three contrasts.
pub fn fidelity_from_contrasts(c_lin: f64, c_diag: f64, c_circ: f64) -> f64 {
    (1.0 + c_lin + c_diag - c_circ) / 4.0
}
