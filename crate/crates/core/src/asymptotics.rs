//! Limit laws under weak identifiability.
//!
//! In the contiguous regimes the spike is of order `1/√n` or smaller and
//! Anderson's statistic no longer converges to χ²_{p-1}. Its limit is a
//! functional of the eigen-decomposition of `Z + diag(v, 0, ..., 0)`, which
//! [`qa_limit_sample`] simulates directly.

use crate::distributions::{chi2_quantile, noncentral_chi2_cdf, LimitMatrixLaw};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, sym_eigen, EigenSystem, Matrix};
use crate::rng::Rng;
use crate::statistics::SampleSummary;

/// The four asymptotic regimes for the spike rate `r_n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    /// `r_n ≡ 1`.
    I,
    /// `r_n → 0`, `√n r_n → ∞`.
    II,
    /// `r_n = 1/√n`.
    III,
    /// `r_n = o(1/√n)`.
    IV,
}

impl Regime {
    /// Regime of the rate `r_n = n^{-ℓ/6}`.
    pub fn from_exponent(l: u8) -> Result<Self> {
        match l {
            0 => Ok(Regime::I),
            1 | 2 => Ok(Regime::II),
            3 => Ok(Regime::III),
            4 | 5 => Ok(Regime::IV),
            _ => Err(Error::validation(format!("rate exponent {l} outside 0..=5"))),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::I => "i",
            Regime::II => "ii",
            Regime::III => "iii",
            Regime::IV => "iv",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "i" | "1" => Ok(Regime::I),
            "ii" | "2" => Ok(Regime::II),
            "iii" | "3" => Ok(Regime::III),
            "iv" | "4" => Ok(Regime::IV),
            _ => Err(Error::validation(format!("unknown regime '{s}'"))),
        }
    }
}

/// Eigenvalues (descending) and the orthogonal matrix `E` whose row `j` is
/// the `j`-th unit eigenvector, oriented so that its first entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenvectorFrame {
    pub values: Vec<f64>,
    pub frame: Matrix,
}

impl EigenvectorFrame {
    pub fn from_eigen(es: &EigenSystem) -> Self {
        let mut frame = es.vectors.transpose();
        let p = es.dim();
        for j in 0..p {
            if frame[(j, 0)] < 0.0 {
                for k in 0..p {
                    frame[(j, k)] = -frame[(j, k)];
                }
            }
        }
        EigenvectorFrame {
            values: es.values.clone(),
            frame,
        }
    }

    /// `w_{j1}`, 1-based `j`.
    pub fn first_coordinate(&self, j: usize) -> f64 {
        self.frame[(j - 1, 0)]
    }
}

/// Sampler for the null limit of Anderson's statistic in regimes (iii)/(iv)
/// (`v = 0` is regime (iv)). With `kappa != 0` the elliptical matrix `Z_f`
/// replaces `Z` and draws are divided by `1 + kappa`, i.e. they follow the
/// limit of the pseudo-Gaussian statistic.
#[derive(Debug, Clone, Copy)]
pub struct QaLimit {
    law: LimitMatrixLaw,
    v: f64,
}

impl QaLimit {
    pub fn new(p: usize, v: f64, kappa: f64) -> Result<Self> {
        if p < 2 {
            return Err(Error::validation("dimension must be at least 2"));
        }
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::validation(format!("spike size must be >= 0, got {v}")));
        }
        Ok(QaLimit {
            law: LimitMatrixLaw::new(p, 0.0, kappa)?,
            v,
        })
    }

    pub fn draw(&self, rng: &mut Rng) -> f64 {
        let mut z = self.law.sample(rng);
        z[(0, 0)] += self.v;
        let es = sym_eigen(&z).expect("symmetric finite draw");
        let l1 = es.values[0];
        let q: f64 = (1..es.dim())
            .map(|j| {
                let d = l1 - es.values[j];
                let w = es.vectors[(0, j)];
                d * d * w * w
            })
            .sum();
        q / (1.0 + self.law.kappa())
    }
}

pub fn qa_limit_sample(p: usize, v: f64, kappa: f64, rng: &mut Rng) -> Result<f64> {
    Ok(QaLimit::new(p, v, kappa)?.draw(rng))
}

/// A Monte Carlo proportion with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub freq: f64,
    pub se: f64,
    pub m: usize,
}

impl RiskEstimate {
    pub fn from_counts(hits: usize, m: usize) -> Self {
        let f = hits as f64 / m as f64;
        RiskEstimate {
            freq: f,
            se: (f * (1.0 - f) / m as f64).sqrt(),
            m,
        }
    }
}

/// Approximate asymptotic type-I risk of Anderson's test in regime (iii):
/// the frequency with which the limit law exceeds `χ²_{p-1,1-α}`.
pub fn type1_risk_iii(p: usize, v: f64, alpha: f64, m: usize, rng: &mut Rng) -> Result<RiskEstimate> {
    if m == 0 {
        return Err(Error::validation("need at least one replicate"));
    }
    let crit = chi2_quantile(1.0 - alpha, p.saturating_sub(1).max(1))?;
    let sampler = QaLimit::new(p, v, 0.0)?;
    let hits = (0..m).filter(|_| sampler.draw(rng) > crit).count();
    Ok(RiskEstimate::from_counts(hits, m))
}

/// Regime (iv) counterpart, i.e. [`type1_risk_iii`] at `v = 0`.
pub fn type1_risk_iv(p: usize, alpha: f64, m: usize, rng: &mut Rng) -> Result<RiskEstimate> {
    type1_risk_iii(p, 0.0, alpha, m, rng)
}

/// One draw of the limiting (standardized) sample eigenvalues, and in regimes
/// (iii)/(iv) of the limiting eigenvector frame.
///
/// * (i)/(ii): `ℓ₁` is the (1,1) entry of `Z_f(v)` (`v` is ignored in (ii)),
///   `ℓ₂..ℓ_p` the eigenvalues of its trailing block.
/// * (iii): `ℓ₁` is the top eigenvalue of `Z_f + diag(v,0,..)` minus `v`
///   (equivalently the top eigenvalue of `Z_f - diag(0,v,..,v)`), `ℓ₂..ℓ_p`
///   its remaining eigenvalues; the frame is that of `Z_f + diag(v,0,..)`.
/// * (iv): spectrum and frame of `Z_f`.
pub fn eigen_limit_sample(
    p: usize,
    v: f64,
    regime: Regime,
    kappa: f64,
    rng: &mut Rng,
) -> Result<(Vec<f64>, Option<EigenvectorFrame>)> {
    if p < 2 {
        return Err(Error::validation("dimension must be at least 2"));
    }
    let v_eff = match regime {
        Regime::I | Regime::III => v,
        Regime::II | Regime::IV => 0.0,
    };
    match regime {
        Regime::I | Regime::II => {
            let z = LimitMatrixLaw::new(p, v_eff, kappa)?.sample(rng);
            let mut block = Matrix::zeros(p - 1, p - 1);
            for a in 1..p {
                for b in 1..p {
                    block[(a - 1, b - 1)] = z[(a, b)];
                }
            }
            let mut values = vec![z[(0, 0)]];
            values.extend(sym_eigen(&block)?.values);
            Ok((values, None))
        }
        Regime::III | Regime::IV => {
            let mut z = LimitMatrixLaw::new(p, 0.0, kappa)?.sample(rng);
            z[(0, 0)] += v_eff;
            let es = sym_eigen(&z)?;
            let frame = EigenvectorFrame::from_eigen(&es);
            let mut values = es.values;
            values[0] -= v_eff;
            Ok((values, Some(frame)))
        }
    }
}

/// Unnormalized joint density of the ordered eigenvalues of `Z_f`:
/// `exp(-{Σℓ² - κ/((p+2)κ+2) (Σℓ)²} / (4(1+κ))) Π_{k<j}(ℓ_k - ℓ_j)`.
pub fn joint_eigenvalue_density(ell: &[f64], kappa: f64) -> Result<f64> {
    let p = ell.len();
    if p == 0 {
        return Err(Error::validation("empty eigenvalue vector"));
    }
    if ell.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::validation("eigenvalues must be in non-increasing order"));
    }
    let pf = p as f64;
    if !(kappa > -1.0) || !((pf + 2.0) * kappa + 2.0 > 0.0) {
        return Err(Error::validation(format!("inadmissible kurtosis {kappa}")));
    }
    let sum: f64 = ell.iter().sum();
    let sum_sq: f64 = ell.iter().map(|l| l * l).sum();
    let expo = -(sum_sq - kappa / ((pf + 2.0) * kappa + 2.0) * sum * sum) / (4.0 * (1.0 + kappa));
    let mut vandermonde = 1.0;
    for k in 0..p {
        for j in k + 1..p {
            vandermonde *= ell[k] - ell[j];
        }
    }
    Ok(expo.exp() * vandermonde)
}

fn check_delta(delta: u8) -> Result<f64> {
    if delta > 1 {
        return Err(Error::validation(format!("delta must be 0 or 1, got {delta}")));
    }
    Ok(delta as f64)
}

/// Noncentrality of the optimal test in regimes (i)/(ii): `v²/(1+δv) ‖τ‖²`.
pub fn ncp_regime12(v: f64, delta: u8, tau_norm: f64) -> Result<f64> {
    let d = check_delta(delta)?;
    if !(tau_norm >= 0.0) {
        return Err(Error::validation("tau norm must be non-negative"));
    }
    Ok(v * v / (1.0 + d * v) * tau_norm * tau_norm)
}

fn check_hemisphere(tau_norm: f64) -> Result<f64> {
    if !(tau_norm >= 0.0) || tau_norm > std::f64::consts::SQRT_2 + 1e-12 {
        return Err(Error::validation(format!(
            "tau norm {tau_norm} outside [0, sqrt(2)]"
        )));
    }
    Ok(tau_norm * tau_norm)
}

/// Regime-(iii) noncentrality of the HPV test:
/// `(v²/16) t²(4 - t²)(2 - t²)²`, `t = ‖τ‖`.
pub fn ncp_hpv_iii(v: f64, tau_norm: f64) -> Result<f64> {
    let t2 = check_hemisphere(tau_norm)?;
    Ok(v * v / 16.0 * t2 * (4.0 - t2) * (2.0 - t2) * (2.0 - t2))
}

/// Regime-(iii) noncentrality of the oracle test:
/// `(v²/16) t²(4 - t²)(4 - 2t² + t⁴/2)`.
pub fn ncp_oracle_iii(v: f64, tau_norm: f64) -> Result<f64> {
    let t2 = check_hemisphere(tau_norm)?;
    Ok(v * v / 16.0 * t2 * (4.0 - t2) * (4.0 - 2.0 * t2 + 0.5 * t2 * t2))
}

/// `1 - F(χ²_{df,1-α}; df, ncp)`.
pub fn asymptotic_power(df: usize, ncp: f64, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!("level {alpha} outside (0, 1)")));
    }
    if ncp == 0.0 {
        return Ok(alpha);
    }
    let crit = chi2_quantile(1.0 - alpha, df)?;
    Ok(1.0 - noncentral_chi2_cdf(crit, df, ncp)?)
}

/// Perturbation `θ₀ + ν τ` of a unit vector that stays on the unit sphere,
/// which forces `θ₀ᵀτ = -(ν/2)‖τ‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalAlternative {
    pub tau: Vec<f64>,
    pub nu: f64,
    pub residual: f64,
}

impl LocalAlternative {
    pub fn new(theta0: &[f64], tau: Vec<f64>, nu: f64) -> Result<Self> {
        if tau.len() != theta0.len() {
            return Err(Error::validation("tau and theta0 differ in length"));
        }
        let residual = dot(theta0, &tau) + 0.5 * nu * dot(&tau, &tau);
        if residual.abs() > 1e-10 {
            return Err(Error::validation(format!(
                "perturbation leaves the unit sphere (constraint residual {residual:e})"
            )));
        }
        Ok(LocalAlternative { tau, nu, residual })
    }

    pub fn tau_norm(&self) -> f64 {
        norm(&self.tau)
    }

    pub fn perturbed(&self, theta0: &[f64]) -> Vec<f64> {
        theta0.iter().zip(&self.tau).map(|(t, d)| t + self.nu * d).collect()
    }
}

/// The `k`-th alternative of the power grid: `θ₁ = (cos(kπ/40), sin(kπ/40), 0, ...)`
/// against `θ₀ = e₁`, returned as `(θ₁, τ)` with `τ = θ₁ - θ₀` and
/// `‖τ‖ = 2 sin(kπ/80)`.
pub fn power_grid_alternative(p: usize, k: u32) -> Result<(Vec<f64>, LocalAlternative)> {
    if p < 2 {
        return Err(Error::validation("dimension must be at least 2"));
    }
    let a = k as f64 * std::f64::consts::PI / 40.0;
    let mut theta0 = vec![0.0; p];
    theta0[0] = 1.0;
    let mut theta1 = vec![0.0; p];
    theta1[0] = a.cos();
    theta1[1] = a.sin();
    let tau: Vec<f64> = theta1.iter().zip(&theta0).map(|(x, y)| x - y).collect();
    let alt = LocalAlternative::new(&theta0, tau, 1.0)?;
    Ok((theta1, alt))
}

/// Central sequence `Δ` and information `Γ` of the local experiment at `θ₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalExperiment {
    pub delta: u8,
    pub central: Vec<f64>,
    pub info: Matrix,
    /// Moore-Penrose inverse of `info`.
    pub info_pinv: Matrix,
}

impl LocalExperiment {
    /// `Δᵀ Γ⁻ Δ`.
    pub fn quadratic(&self) -> f64 {
        dot(&self.central, &self.info_pinv.mul_vec(&self.central).expect("shapes agree"))
    }
}

/// `Δ = (√n v/(1+δv)) (I - θ₀θ₀ᵀ)(S - Σ_n)θ₀`, `Γ = (v²/(1+δv)) (I - θ₀θ₀ᵀ)`.
pub fn local_experiment(
    s: &SampleSummary,
    theta0: &[f64],
    v: f64,
    delta: u8,
    sigma_n: &Matrix,
) -> Result<LocalExperiment> {
    let d = check_delta(delta)?;
    if !(v > 0.0) {
        return Err(Error::validation("spike size must be positive"));
    }
    if theta0.len() != s.p() || (norm(theta0) - 1.0).abs() > 1e-10 {
        return Err(Error::validation("theta0 must be a unit p-vector"));
    }
    let p = s.p();
    let proj = Matrix::identity(p).sub(&Matrix::outer(theta0, theta0))?;
    let a = s.cov().sub(sigma_n)?.mul_vec(theta0)?;
    let c = (s.n() as f64).sqrt() * v / (1.0 + d * v);
    let central: Vec<f64> = proj.mul_vec(&a)?.iter().map(|x| c * x).collect();
    let g = v * v / (1.0 + d * v);
    Ok(LocalExperiment {
        delta,
        central,
        info: proj.scale(g),
        info_pinv: proj.scale(1.0 / g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::chi2_cdf;

    #[test]
    fn regimes_from_exponent() {
        let r: Vec<_> = (0..6).map(|l| Regime::from_exponent(l).unwrap()).collect();
        assert_eq!(r, vec![Regime::I, Regime::II, Regime::II, Regime::III, Regime::IV, Regime::IV]);
        assert!(Regime::from_exponent(6).is_err());
        assert_eq!("iii".parse::<Regime>().unwrap(), Regime::III);
    }

    #[test]
    fn ncp_values() {
        let s2 = std::f64::consts::SQRT_2;
        assert_eq!(ncp_hpv_iii(1.0, 0.0).unwrap(), 0.0);
        assert_eq!(ncp_oracle_iii(1.0, 0.0).unwrap(), 0.0);
        assert!(ncp_hpv_iii(1.0, s2).unwrap().abs() < 1e-15);
        assert!(ncp_oracle_iii(1.0, s2).unwrap() > 0.0);
        assert!(ncp_hpv_iii(1.0, 1.5).is_err());
        assert_eq!(ncp_regime12(1.0, 1, 1.0).unwrap(), 0.5);
        assert_eq!(ncp_regime12(1.0, 0, 0.0).unwrap(), 0.0);
        for i in 1..100 {
            let t = i as f64 * 0.001;
            let diff = ncp_oracle_iii(2.0, t).unwrap() - ncp_hpv_iii(2.0, t).unwrap();
            assert!((diff / t.powi(4)).abs() < 10.0);
        }
        for i in 1..141 {
            assert!(ncp_hpv_iii(1.0, i as f64 * 0.01).unwrap() > 0.0);
        }
    }

    #[test]
    fn power_basics() {
        assert_eq!(asymptotic_power(3, 0.0, 0.05).unwrap(), 0.05);
        for ncp in [0.5, 2.0, 6.0] {
            assert!(asymptotic_power(1, ncp, 0.05).unwrap() > asymptotic_power(2, ncp, 0.05).unwrap());
        }
    }

    #[test]
    fn grid_alternatives_on_sphere() {
        for k in 0..=20 {
            let (t1, alt) = power_grid_alternative(3, k).unwrap();
            assert!((norm(&t1) - 1.0).abs() < 1e-15);
            let want = 2.0 * (k as f64 * std::f64::consts::PI / 80.0).sin();
            assert!((alt.tau_norm() - want).abs() < 1e-12);
            assert!(alt.residual.abs() < 1e-12);
        }
        assert!(LocalAlternative::new(&[1.0, 0.0], vec![0.1, 0.0], 1.0).is_err());
    }

    #[test]
    fn density_ties_and_p2_ratio() {
        assert_eq!(joint_eigenvalue_density(&[1.0, 1.0, 0.0], 0.0).unwrap(), 0.0);
        assert!(joint_eigenvalue_density(&[0.0, 1.0], 0.0).is_err());
        let closed = |l1: f64, l2: f64| {
            (l1 - l2) * (-(l1 * l1 + l2 * l2) / 4.0).exp() / (4.0 * (2.0 * std::f64::consts::PI).sqrt())
        };
        let pts = [(1.0, -0.5), (2.5, 0.3), (0.2, -3.0)];
        for a in pts {
            for b in pts {
                let r = joint_eigenvalue_density(&[a.0, a.1], 0.0).unwrap()
                    / joint_eigenvalue_density(&[b.0, b.1], 0.0).unwrap();
                let want = closed(a.0, a.1) / closed(b.0, b.1);
                assert!((r / want - 1.0).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn frame_orientation() {
        let mut rng = Rng::new(3);
        for regime in [Regime::III, Regime::IV] {
            let (vals, frame) = eigen_limit_sample(4, 1.0, regime, 0.0, &mut rng).unwrap();
            let f = frame.unwrap();
            assert_eq!(vals.len(), 4);
            for j in 0..4 {
                assert!(f.frame[(j, 0)] > 0.0);
            }
            let g = f.frame.matmul(&f.frame.transpose()).unwrap();
            assert!(g.sub(&Matrix::identity(4)).unwrap().max_abs() < 1e-10);
        }
    }

    #[test]
    fn qa_limit_p2_small_ks() {
        let mut rng = Rng::new(10);
        let xs: Vec<f64> = (0..20_000).map(|_| qa_limit_sample(2, 0.0, 0.0, &mut rng).unwrap()).collect();
        let d = crate::distributions::ks_statistic(&xs, |x| chi2_cdf(x / 4.0, 1));
        assert!(d < 1.63 / (20_000f64).sqrt(), "KS {d}");
    }

    #[test]
    fn local_experiment_matches_q_delta() {
        use crate::model::{sample, RadialFamily, SpikeRate, SpikedModel};
        let theta = vec![0.6, 0.8, 0.0];
        let m = SpikedModel::new(1.0, 1.5, SpikeRate::Constant(1.0), theta.clone()).unwrap();
        let sigma = m.covariance_at(200);
        let x = sample(&m, 200, RadialFamily::Gaussian, &mut Rng::new(4)).unwrap();
        let s = SampleSummary::new(&x).unwrap();
        for delta in [0, 1] {
            let le = local_experiment(&s, &theta, 1.5, delta, &sigma).unwrap();
            let q = crate::statistics::q_delta(&s, &theta, 1.5, delta).unwrap();
            assert!((le.quadratic() - q).abs() < 1e-8 * q.max(1.0));
        }
        let exact = SampleSummary::from_covariance(200, sigma.clone()).unwrap();
        let le = local_experiment(&exact, &theta, 1.5, 1, &sigma).unwrap();
        assert!(le.central.iter().all(|x| x.abs() < 1e-12));
    }
}
