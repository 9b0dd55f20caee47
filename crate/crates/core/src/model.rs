//! Single-spiked population model `Σ_n = σ²(I + r_n v θ₁θ₁ᵀ)` and data
//! generation under Gaussian and Student-t laws.

use rand_distr::{ChiSquared, Distribution};

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Matrix};
use crate::rng::Rng;

/// How the spike shrinks with the sample size.
#[derive(Debug, Clone, Copy)]
pub enum SpikeRate {
    /// `r_n = n^{-ℓ/6}`, `ℓ ∈ {0, ..., 5}`.
    Exponent(u8),
    Constant(f64),
    Function(fn(usize) -> f64),
}

impl SpikeRate {
    pub fn at(&self, n: usize) -> f64 {
        match *self {
            SpikeRate::Exponent(l) => (n as f64).powf(-(l as f64) / 6.0),
            SpikeRate::Constant(r) => r,
            SpikeRate::Function(f) => f(n),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            SpikeRate::Exponent(l) if l > 5 => {
                Err(Error::validation(format!("rate exponent {l} outside 0..=5")))
            }
            SpikeRate::Constant(r) if !(r > 0.0 && r.is_finite()) => {
                Err(Error::validation(format!("constant rate must be positive, got {r}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpikedModel {
    p: usize,
    sigma: f64,
    v: f64,
    rate: SpikeRate,
    theta1: Vec<f64>,
    mu: Vec<f64>,
}

impl SpikedModel {
    /// A model centred at the origin. `v = 0` (no spike) is accepted so that
    /// spike-size grids can start at zero.
    pub fn new(sigma: f64, v: f64, rate: SpikeRate, theta1: Vec<f64>) -> Result<Self> {
        let p = theta1.len();
        if p < 2 {
            return Err(Error::validation("dimension must be at least 2"));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::validation(format!("sigma must be positive, got {sigma}")));
        }
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::validation(format!("spike size must be >= 0, got {v}")));
        }
        if (norm(&theta1) - 1.0).abs() > 1e-10 {
            return Err(Error::validation("theta1 must be a unit vector"));
        }
        rate.validate()?;
        Ok(SpikedModel {
            p,
            sigma,
            v,
            rate,
            theta1,
            mu: vec![0.0; p],
        })
    }

    pub fn with_mean(mut self, mu: Vec<f64>) -> Result<Self> {
        if mu.len() != self.p || mu.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("location must be a finite p-vector"));
        }
        self.mu = mu;
        Ok(self)
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn rate(&self) -> SpikeRate {
        self.rate
    }

    pub fn theta1(&self) -> &[f64] {
        &self.theta1
    }

    pub fn mean(&self) -> &[f64] {
        &self.mu
    }

    /// The spike `r_n v` carried on top of the identity.
    pub fn spike_at(&self, n: usize) -> f64 {
        self.rate.at(n) * self.v
    }

    pub fn covariance_at(&self, n: usize) -> Matrix {
        let s2 = self.sigma * self.sigma;
        Matrix::identity(self.p)
            .add(&Matrix::outer(&self.theta1, &self.theta1).scale(self.spike_at(n)))
            .expect("shapes agree")
            .scale(s2)
    }

    /// `Σ^{1/2} = σ(I + (√(1 + r_n v) - 1) θ₁θ₁ᵀ)`.
    pub fn sqrt_covariance_at(&self, n: usize) -> Matrix {
        let c = (1.0 + self.spike_at(n)).sqrt() - 1.0;
        Matrix::identity(self.p)
            .add(&Matrix::outer(&self.theta1, &self.theta1).scale(c))
            .expect("shapes agree")
            .scale(self.sigma)
    }
}

/// Radial law of the elliptical observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialFamily {
    Gaussian,
    /// Student t with `ν > 4` degrees of freedom.
    StudentT(f64),
}

impl RadialFamily {
    pub fn student_t(nu: f64) -> Result<Self> {
        let f = RadialFamily::StudentT(nu);
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            RadialFamily::StudentT(nu) if !(nu > 4.0 && nu.is_finite()) => Err(Error::validation(
                format!("Student t needs more than 4 degrees of freedom, got {nu}"),
            )),
            _ => Ok(()),
        }
    }

    /// Elliptical kurtosis κ_p(f). It does not depend on `p` for these two
    /// families.
    pub fn kurtosis(&self, _p: usize) -> f64 {
        match *self {
            RadialFamily::Gaussian => 0.0,
            RadialFamily::StudentT(nu) => 2.0 / (nu - 4.0),
        }
    }

    pub fn label(&self) -> String {
        match *self {
            RadialFamily::Gaussian => "gaussian".to_string(),
            RadialFamily::StudentT(nu) => format!("t{nu}"),
        }
    }
}

pub fn kurtosis_of(family: RadialFamily, p: usize) -> f64 {
    family.kurtosis(p)
}

/// Draws an `n x p` sample whose rows have mean `μ` and covariance exactly
/// `Σ_n`. Student-t rows are rescaled by `√((ν-2)/ν)` for that purpose.
pub fn sample(model: &SpikedModel, n: usize, family: RadialFamily, rng: &mut Rng) -> Result<Matrix> {
    if n < model.p + 1 {
        return Err(Error::validation(format!(
            "need at least p + 1 = {} observations, got {n}",
            model.p + 1
        )));
    }
    draw(model, n, family, rng)
}

/// [`sample`] without the `n >= p + 1` requirement, for high-dimensional
/// designs in which the sample covariance is necessarily singular.
pub fn sample_high_dim(
    model: &SpikedModel,
    n: usize,
    family: RadialFamily,
    rng: &mut Rng,
) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::validation("need at least two observations"));
    }
    draw(model, n, family, rng)
}

fn draw(model: &SpikedModel, n: usize, family: RadialFamily, rng: &mut Rng) -> Result<Matrix> {
    let p = model.p;
    family.validate()?;
    let chi = match family {
        RadialFamily::StudentT(nu) => Some((
            ChiSquared::new(nu).map_err(|e| Error::validation(e.to_string()))?,
            nu,
        )),
        RadialFamily::Gaussian => None,
    };
    let c = (1.0 + model.spike_at(n)).sqrt() - 1.0;
    let theta = &model.theta1;
    let mut data = Vec::with_capacity(n * p);
    let mut g = vec![0.0; p];
    for _ in 0..n {
        for gi in g.iter_mut() {
            *gi = rng.std_normal();
        }
        let mut scale = model.sigma;
        if let Some((dist, nu)) = &chi {
            let w: f64 = dist.sample(rng);
            scale *= ((nu - 2.0) / w).sqrt();
        }
        let proj = c * dot(theta, &g);
        for k in 0..p {
            data.push(model.mu[k] + scale * (g[k] + proj * theta[k]));
        }
    }
    Matrix::from_row_major(n, p, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigen;

    fn e1(p: usize) -> Vec<f64> {
        let mut v = vec![0.0; p];
        v[0] = 1.0;
        v
    }

    fn sample_cov(x: &Matrix) -> (Vec<f64>, Matrix) {
        let (n, p) = (x.rows(), x.cols());
        let mut mean = vec![0.0; p];
        for i in 0..n {
            for k in 0..p {
                mean[k] += x[(i, k)] / n as f64;
            }
        }
        let mut s = Matrix::zeros(p, p);
        for i in 0..n {
            for a in 0..p {
                for b in 0..p {
                    s[(a, b)] += (x[(i, a)] - mean[a]) * (x[(i, b)] - mean[b]) / n as f64;
                }
            }
        }
        (mean, s)
    }

    #[test]
    fn covariance_small_case() {
        let m = SpikedModel::new(1.0, 1.0, SpikeRate::Constant(1.0), e1(2)).unwrap();
        assert_eq!(m.covariance_at(10), Matrix::from_diag(&[2.0, 1.0]));
    }

    #[test]
    fn exponent_rate_at_root_n() {
        let m = SpikedModel::new(1.0, 2.0, SpikeRate::Exponent(3), e1(3)).unwrap();
        assert!((m.spike_at(1_000_000) - 2e-3).abs() < 1e-15);
    }

    #[test]
    fn covariance_spectrum() {
        let t = vec![0.6, 0.0, 0.8];
        let m = SpikedModel::new(1.5, 3.0, SpikeRate::Exponent(1), t).unwrap();
        let n = 500;
        let es = sym_eigen(&m.covariance_at(n)).unwrap();
        let s2 = 2.25;
        assert!((es.values[0] - s2 * (1.0 + m.spike_at(n))).abs() < 1e-12);
        for &l in &es.values[1..] {
            assert!((l - s2).abs() < 1e-12);
        }
        let root = m.sqrt_covariance_at(n);
        let sq = root.matmul(&root).unwrap();
        assert!(sq.sub(&m.covariance_at(n)).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(SpikedModel::new(1.0, 1.0, SpikeRate::Exponent(6), e1(2)).is_err());
        assert!(SpikedModel::new(1.0, 1.0, SpikeRate::Exponent(0), vec![1.0, 1.0]).is_err());
        assert!(SpikedModel::new(0.0, 1.0, SpikeRate::Exponent(0), e1(2)).is_err());
        assert!(RadialFamily::student_t(4.0).is_err());
        let m = SpikedModel::new(1.0, 1.0, SpikeRate::Exponent(0), e1(3)).unwrap();
        assert!(sample(&m, 3, RadialFamily::Gaussian, &mut Rng::new(0)).is_err());
    }

    #[test]
    fn kurtosis_closed_form() {
        assert_eq!(kurtosis_of(RadialFamily::Gaussian, 4), 0.0);
        assert!((kurtosis_of(RadialFamily::StudentT(9.0), 4) - 0.4).abs() < 1e-15);
        assert!((kurtosis_of(RadialFamily::StudentT(6.0), 4) - 1.0).abs() < 1e-15);
    }

    /// κ_p(f) = p μ_{p-1} μ_{p+3} / ((p+2) μ_{p+1}²) - 1 with
    /// μ_ℓ = ∫ r^ℓ f(r) dr and f(r) = (1 + r²/(ν-2))^{-(p+ν)/2}.
    fn kurtosis_by_quadrature(p: usize, nu: f64) -> f64 {
        let f = |r: f64| (1.0 + r * r / (nu - 2.0)).powf(-(p as f64 + nu) / 2.0);
        // r = tan(u) maps (0, π/2) onto (0, ∞).
        let moment = |l: i32| {
            let n = 200_000;
            let h = std::f64::consts::FRAC_PI_2 / n as f64;
            (0..n)
                .map(|i| {
                    let u = (i as f64 + 0.5) * h;
                    let r = u.tan();
                    let c = u.cos();
                    r.powi(l) * f(r) / (c * c) * h
                })
                .sum::<f64>()
        };
        let pf = p as f64;
        let (m1, m2, m3) = (moment(p as i32 - 1), moment(p as i32 + 3), moment(p as i32 + 1));
        pf * m1 * m2 / ((pf + 2.0) * m3 * m3) - 1.0
    }

    #[test]
    fn kurtosis_matches_quadrature() {
        for &(p, nu) in &[(2, 9.0), (5, 9.0), (3, 6.0), (10, 6.0)] {
            let q = kurtosis_by_quadrature(p, nu);
            let closed = kurtosis_of(RadialFamily::StudentT(nu), p);
            assert!((q - closed).abs() < 1e-4, "p {p} nu {nu}: {q} vs {closed}");
        }
    }

    #[test]
    fn sample_covariance_converges() {
        let m = SpikedModel::new(1.0, 1.0, SpikeRate::Constant(1.0), vec![0.6, 0.8])
            .unwrap()
            .with_mean(vec![5.0, 5.0])
            .unwrap();
        let sigma = m.covariance_at(100_000);
        for (seed, fam) in [(1, RadialFamily::Gaussian), (2, RadialFamily::StudentT(9.0))] {
            let x = sample(&m, 100_000, fam, &mut Rng::new(seed)).unwrap();
            let (mean, s) = sample_cov(&x);
            assert!(s.sub(&sigma).unwrap().max_abs() < 0.05, "{fam:?}");
            assert!(mean.iter().all(|&x| (x - 5.0).abs() < 0.05));
        }
    }
}
