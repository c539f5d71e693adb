//! Least-squares model fits: cascade lifetimes, coherence times and Rabi
//! oscillations.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{DMatrix, DVector, Dyn, Owned};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::histogram::CoincidenceHistogram;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitParam {
    pub name: String,
    pub value: f64,
    pub std_error: f64,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: String,
    pub params: Vec<FitParam>,
    /// Euclidean norm of the (weighted) residual vector.
    pub residual_norm: f64,
    pub evaluations: usize,
    /// Competing model whose residual was within 1% of the selected one.
    pub alternative: Option<Box<FitResult>>,
}

impl FitResult {
    pub fn get(&self, name: &str) -> Option<&FitParam> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn value(&self, name: &str) -> f64 {
        self.get(name).map(|p| p.value).unwrap_or(f64::NAN)
    }

    pub fn std_error(&self, name: &str) -> f64 {
        self.get(name).map(|p| p.std_error).unwrap_or(f64::NAN)
    }

    pub fn ambiguous(&self) -> bool {
        self.alternative.is_some()
    }
}

/// Weighted residuals `w·(model(p) - y)` with a central-difference Jacobian.
struct Problem<'a, M> {
    model: &'a M,
    y: &'a [f64],
    w: &'a [f64],
    p: DVector<f64>,
}

impl<M: Fn(&[f64]) -> Vec<f64>> Problem<'_, M> {
    fn eval(&self, p: &[f64]) -> Option<DVector<f64>> {
        let m = (self.model)(p);
        let r: Vec<f64> = m.iter().zip(self.y).zip(self.w).map(|((m, y), w)| w * (m - y)).collect();
        r.iter().all(|v| v.is_finite()).then(|| DVector::from_vec(r))
    }
}

impl<M: Fn(&[f64]) -> Vec<f64>> LeastSquaresProblem<f64, Dyn, Dyn> for Problem<'_, M> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.p.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.p.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        self.eval(self.p.as_slice())
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let n = self.p.len();
        let mut j = DMatrix::zeros(self.y.len(), n);
        let mut q = self.p.as_slice().to_vec();
        for k in 0..n {
            let h = 1e-6 * self.p[k].abs().max(1e-6);
            q[k] = self.p[k] + h;
            let up = self.eval(&q)?;
            q[k] = self.p[k] - h;
            let down = self.eval(&q)?;
            q[k] = self.p[k];
            j.set_column(k, &((up - down) / (2.0 * h)));
        }
        Some(j)
    }
}

/// Minimizes `Σ w²(model(p) - y)²` from `p0`. Standard errors come from
/// `(JᵀJ)⁻¹` scaled by the reduced χ².
pub fn least_squares<M: Fn(&[f64]) -> Vec<f64>>(
    model_name: &str,
    model: &M,
    y: &[f64],
    weights: &[f64],
    p0: &[f64],
    names: &[(&str, &str)],
) -> Result<FitResult> {
    let fail = |reason: String| Error::FitFailed { model: model_name.to_string(), reason };
    if y.len() != weights.len() || names.len() != p0.len() {
        return Err(fail("inconsistent input lengths".into()));
    }
    if y.len() <= p0.len() {
        return Err(fail(format!("{} points for {} parameters", y.len(), p0.len())));
    }
    let problem = Problem { model, y, w: weights, p: DVector::from_column_slice(p0) };
    if problem.residuals().is_none() {
        return Err(fail("model not finite at the initial guess".into()));
    }
    let (problem, report) = LevenbergMarquardt::new().with_patience(400).minimize(problem);
    if !report.termination.was_successful() {
        return Err(fail(format!("{:?} after {} evaluations", report.termination, report.number_of_evaluations)));
    }
    let r = problem.residuals().ok_or_else(|| fail("non-finite residuals at the solution".into()))?;
    let j = problem.jacobian().ok_or_else(|| fail("non-finite Jacobian at the solution".into()))?;
    let chi2 = r.norm_squared();
    let dof = (y.len() - p0.len()) as f64;
    let cov = (j.transpose() * &j).try_inverse().ok_or_else(|| fail("singular normal matrix".into()))?;
    let p = problem.params();
    let params = names
        .iter()
        .enumerate()
        .map(|(k, (name, unit))| FitParam {
            name: name.to_string(),
            value: p[k],
            std_error: (cov[(k, k)].max(0.0) * chi2 / dof).sqrt(),
            unit: unit.to_string(),
        })
        .collect();
    Ok(FitResult {
        model: model_name.to_string(),
        params,
        residual_norm: chi2.sqrt(),
        evaluations: report.number_of_evaluations,
        alternative: None,
    })
}

/// Unit-area exponential decay of rate `g` starting at 0, convolved with a
/// centred Gaussian of width `sigma`.
pub fn exp_gauss(t: f64, g: f64, sigma: f64) -> f64 {
    if sigma <= 0.0 {
        return if t >= 0.0 { g * (-g * t).exp() } else { 0.0 };
    }
    let expo = g * (0.5 * sigma * sigma * g - t);
    if expo > 700.0 {
        return 0.0;
    }
    0.5 * g * expo.exp() * erfc((sigma * sigma * g - t) / (std::f64::consts::SQRT_2 * sigma))
}

/// Detection-time density of each channel after a pulse at `t = 0`,
/// convolved with the Gaussian IRF.
pub fn cascade_density(xx: bool, t: f64, t1_xx: f64, t1_x: f64, sigma: f64) -> f64 {
    let ga = 1.0 / t1_xx;
    if xx {
        return exp_gauss(t, ga, sigma);
    }
    let mut gb = 1.0 / t1_x;
    if ((gb - ga) / ga).abs() < 1e-6 {
        gb = ga * (1.0 + 1e-6);
    }
    ga * gb / (gb - ga) * (exp_gauss(t, ga, sigma) / ga - exp_gauss(t, gb, sigma) / gb)
}

fn histogram_xy(h: &CoincidenceHistogram) -> (Vec<f64>, Vec<f64>) {
    let x = (0..h.len()).map(|j| h.bin_center(j)).collect();
    let y = h.counts.iter().map(|&c| c as f64).collect();
    (x, y)
}

fn poisson_weights(y: &[f64]) -> Vec<f64> {
    y.iter().map(|&v| 1.0 / v.max(1.0).sqrt()).collect()
}

fn mean_delay(x: &[f64], y: &[f64]) -> f64 {
    let n: f64 = y.iter().sum();
    x.iter().zip(y).map(|(x, y)| x * y).sum::<f64>() / n.max(1.0)
}

/// Joint fit of the XX and X detection-time histograms (bin centres relative
/// to the pulse). Parameters: per-channel amplitude (detected photons) and
/// flat offset (counts/bin), `t1_xx`, `t1_x`.
pub fn fit_lifetimes(xx: &CoincidenceHistogram, x: &CoincidenceHistogram, irf_sigma: f64) -> Result<FitResult> {
    if xx.is_empty() || x.is_empty() || xx.total() == 0 || x.total() == 0 {
        return Err(Error::Degenerate("empty lifetime histogram".into()));
    }
    let (tx, yx) = histogram_xy(xx);
    let (t_x, y_x) = histogram_xy(x);
    let (bw_xx, bw_x) = (xx.bin_width_ps as f64, x.bin_width_ps as f64);
    let nxx = tx.len();
    let y: Vec<f64> = yx.iter().chain(&y_x).copied().collect();
    let w = poisson_weights(&y);
    let model = |p: &[f64]| -> Vec<f64> {
        let (t1xx, t1x) = (p[4].abs(), p[5].abs());
        let a = tx.iter().map(|&t| p[0] * bw_xx * cascade_density(true, t, t1xx, t1x, irf_sigma) + p[1]);
        let b = t_x.iter().map(|&t| p[2] * bw_x * cascade_density(false, t, t1xx, t1x, irf_sigma) + p[3]);
        a.chain(b).collect()
    };
    let m_xx = mean_delay(&tx, &yx).max(20.0);
    let m_x = (mean_delay(&t_x, &y_x) - m_xx).max(20.0);
    let p0 = [
        yx.iter().sum::<f64>(),
        0.0,
        y_x.iter().sum::<f64>(),
        0.0,
        m_xx,
        if (m_x - m_xx).abs() < 1.0 { m_xx * 1.5 } else { m_x },
    ];
    debug_assert_eq!(y.len(), nxx + t_x.len());
    let mut r = least_squares(
        "cascade_lifetimes",
        &model,
        &y,
        &w,
        &p0,
        &[
            ("amplitude_xx", "counts"),
            ("offset_xx", "counts/bin"),
            ("amplitude_x", "counts"),
            ("offset_x", "counts/bin"),
            ("t1_xx", "ps"),
            ("t1_x", "ps"),
        ],
    )?;
    for k in [4, 5] {
        r.params[k].value = r.params[k].value.abs();
    }
    Ok(r)
}

/// Single-exponential fit of one XX histogram restricted to `t ≥ t_min`,
/// returning the tail decay time.
pub fn fit_tail(h: &CoincidenceHistogram, t_min: f64) -> Result<FitResult> {
    let (x, y): (Vec<f64>, Vec<f64>) =
        (0..h.len()).filter(|&j| h.bin_center(j) >= t_min).map(|j| (h.bin_center(j), h.counts[j] as f64)).unzip();
    if x.len() < 3 {
        return Err(Error::Degenerate("too few bins in the tail".into()));
    }
    let w = poisson_weights(&y);
    let model = |p: &[f64]| x.iter().map(|&t| p[0] * (-(t - t_min) / p[1].abs()).exp()).collect::<Vec<_>>();
    let tau0 = (mean_delay(&x, &y) - t_min).max(10.0);
    least_squares("exponential_tail", &model, &y, &w, &[y[0].max(1.0), tau0], &[("amplitude", "counts"), ("tau", "ps")])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoherenceModel {
    Gaussian,
    Exponential,
}

impl CoherenceModel {
    pub fn name(self) -> &'static str {
        match self {
            Self::Gaussian => "gaussian",
            Self::Exponential => "exponential",
        }
    }

    /// Normalized `g¹(τ)` for coherence time `t2`.
    pub fn eval(self, tau: f64, t2: f64) -> f64 {
        let u = tau.abs() / t2;
        match self {
            Self::Gaussian => (-std::f64::consts::FRAC_PI_2 * u * u).exp(),
            Self::Exponential => (-u).exp(),
        }
    }
}

impl std::str::FromStr for CoherenceModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" => Ok(Self::Gaussian),
            "exponential" => Ok(Self::Exponential),
            other => Err(Error::Format(format!("unknown lineshape model {other:?}"))),
        }
    }
}

/// Fits `A·g¹(τ)` with one model.
pub fn fit_coherence_model(samples: &[(f64, f64)], kind: CoherenceModel) -> Result<FitResult> {
    let (x, y): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
    let y0 = y.iter().cloned().fold(f64::MIN, f64::max);
    let t2_0 = samples
        .iter()
        .find(|(_, v)| *v < y0 / std::f64::consts::E)
        .map(|(t, _)| t.abs())
        .unwrap_or_else(|| x.iter().fold(0.0, |m: f64, t| m.max(t.abs())))
        .max(1.0);
    let model = |p: &[f64]| x.iter().map(|&t| p[0] * kind.eval(t, p[1].abs())).collect::<Vec<_>>();
    let w = vec![1.0; y.len()];
    let mut r = least_squares(kind.name(), &model, &y, &w, &[y0, t2_0], &[("amplitude", ""), ("t2", "ps")])?;
    r.params[1].value = r.params[1].value.abs();
    Ok(r)
}

/// Fits both lineshapes and keeps the one with the smaller residual. When the
/// two residual norms are within 1% the other fit is attached as
/// `alternative`.
pub fn fit_coherence(samples: &[(f64, f64)]) -> Result<FitResult> {
    if samples.len() < 5 {
        return Err(Error::Degenerate(format!("{} samples, need at least 5", samples.len())));
    }
    let g = fit_coherence_model(samples, CoherenceModel::Gaussian);
    let e = fit_coherence_model(samples, CoherenceModel::Exponential);
    let (best, other) = match (g, e) {
        (Ok(g), Ok(e)) => {
            if g.residual_norm <= e.residual_norm {
                (g, Some(e))
            } else {
                (e, Some(g))
            }
        }
        (Ok(g), Err(_)) => (g, None),
        (Err(_), Ok(e)) => (e, None),
        (Err(err), Err(_)) => return Err(err),
    };
    let mut best = best;
    if let Some(o) = other {
        if o.residual_norm <= best.residual_norm * 1.01 {
            best.alternative = Some(Box::new(o));
        }
    }
    Ok(best)
}

/// `scale·[sin²(sx/2)·e^(−κsx) + c·sx]`.
pub fn rabi_model(x: f64, scale: f64, s: f64, kappa: f64, c: f64) -> f64 {
    let th = s * x;
    scale * ((0.5 * th).sin().powi(2) * (-kappa * th).exp() + c * th)
}

/// Fits a power series `(√P or θ, intensity)`. Parameters: `scale`, axis
/// scaling `s` (θ = s·x), damping `kappa`, incoherent slope `c`.
pub fn fit_rabi(series: &[(f64, f64)]) -> Result<FitResult> {
    if series.len() < 8 {
        return Err(Error::Degenerate(format!("{} points, need at least 8", series.len())));
    }
    let mut pts = series.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (x, y): (Vec<f64>, Vec<f64>) = pts.iter().copied().unzip();
    let peak = first_maximum(&y).ok_or_else(|| Error::FitFailed {
        model: "rabi".into(),
        reason: "fewer than one visible oscillation".into(),
    })?;
    let s0 = std::f64::consts::PI / x[peak];
    let w = vec![1.0; y.len()];
    let model = |p: &[f64]| x.iter().map(|&v| rabi_model(v, p[0], p[1], p[2], p[3])).collect::<Vec<_>>();
    least_squares(
        "rabi",
        &model,
        &y,
        &w,
        &[y[peak], s0, 0.02, 0.01],
        &[("scale", "counts"), ("s", "rad/unit"), ("kappa", "1/rad"), ("c", "1/rad")],
    )
}

/// Index of the first local maximum followed by a drop of at least 20% of
/// its height.
fn first_maximum(y: &[f64]) -> Option<usize> {
    let mut best = 0;
    for i in 1..y.len() {
        if y[i] > y[best] {
            best = i;
        } else if y[i] < 0.8 * y[best] && y[best] > 0.0 {
            return Some(best);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_gauss_matches_numeric_convolution() {
        let (g, s) = (1.0 / 220.0, 50.0);
        for t in [-150.0f64, 0.0, 80.0, 600.0] {
            let dt = 0.05;
            let mut acc = 0.0;
            let mut u: f64 = 0.0;
            while u < 8000.0 {
                let k = (-(t - u) * (t - u) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
                let wt = if u == 0.0 { 0.5 } else { 1.0 };
                acc += wt * g * (-g * u).exp() * k * dt;
                u += dt;
            }
            assert!((exp_gauss(t, g, s) / acc - 1.0).abs() < 1e-5, "{t}");
        }
    }

    #[test]
    fn coherence_models_at_t2() {
        assert!((CoherenceModel::Exponential.eval(100.0, 100.0) - (-1.0f64).exp()).abs() < 1e-15);
        assert!((CoherenceModel::Gaussian.eval(100.0, 100.0) - 0.2079).abs() < 1e-4);
        assert_eq!(CoherenceModel::Gaussian.eval(0.0, 10.0), 1.0);
    }

    #[test]
    fn coherence_fit_exact() {
        for (kind, t2) in [(CoherenceModel::Gaussian, 357.0), (CoherenceModel::Exponential, 192.0)] {
            let s: Vec<_> = (0..40).map(|i| i as f64 * 20.0).map(|t| (t, kind.eval(t, t2))).collect();
            let r = fit_coherence(&s).unwrap();
            assert_eq!(r.model, kind.name());
            assert!((r.value("t2") / t2 - 1.0).abs() < 1e-3);
            assert!(!r.ambiguous());
        }
    }

    #[test]
    fn coherence_needs_five_samples() {
        assert!(fit_coherence(&[(0.0, 1.0), (1.0, 0.5)]).is_err());
    }

    #[test]
    fn rabi_round_trip() {
        let s: Vec<_> =
            (1..=40).map(|i| i as f64 * 0.1).map(|x| (x, rabi_model(x, 1000.0, 2.5, 0.08, 0.035))).collect();
        let r = fit_rabi(&s).unwrap();
        for (name, v) in [("scale", 1000.0), ("s", 2.5), ("kappa", 0.08), ("c", 0.035)] {
            assert!((r.value(name) / v - 1.0).abs() < 1e-3, "{name} {}", r.value(name));
        }
    }

    #[test]
    fn rabi_rejects_monotone_series() {
        let s: Vec<_> = (0..10).map(|i| (i as f64, i as f64)).collect();
        assert!(fit_rabi(&s).is_err());
    }

    #[test]
    fn least_squares_line() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 * v - 1.0).collect();
        let m = |p: &[f64]| x.iter().map(|v| p[0] * v + p[1]).collect::<Vec<_>>();
        let r = least_squares("line", &m, &y, &[1.0; 10], &[1.0, 0.0], &[("a", ""), ("b", "")]).unwrap();
        assert!((r.value("a") - 3.0).abs() < 1e-9 && (r.value("b") + 1.0).abs() < 1e-9);
        assert!(r.std_error("a") >= 0.0);
    }
}
