//! Finite-sample test statistics for a hypothesized eigenvector.
//!
//! All statistics are built from a [`SampleSummary`] (mean, covariance with
//! divisor `n`, and its eigensystem). Eigenvector indices `j` are 1-based:
//! `j = 1` targets the leading principal direction.

use crate::distributions::chi2_sf;
use crate::error::{Error, Result};
use crate::linalg::{dot, gram_schmidt, norm, sym_eigen, Cholesky, EigenSystem, Matrix};

/// Smallest-to-largest eigenvalue ratio below which `S` is treated as singular.
pub const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct SampleSummary {
    n: usize,
    mean: Vec<f64>,
    cov: Matrix,
    eigen: EigenSystem,
}

impl SampleSummary {
    /// Summary of an `n x p` data matrix. Requires `n >= p + 1` and a
    /// nonsingular sample covariance.
    pub fn new(x: &Matrix) -> Result<Self> {
        if x.rows() < x.cols() + 1 {
            return Err(Error::validation(format!(
                "need at least p + 1 = {} observations, got {}",
                x.cols() + 1,
                x.rows()
            )));
        }
        let s = Self::new_unchecked(x)?;
        s.check_rank()?;
        Ok(s)
    }

    /// Like [`SampleSummary::new`] but accepts `p >= n`, where `S` is
    /// necessarily singular. Only statistics that do not invert `S` are
    /// meaningful on such a summary.
    pub fn new_unchecked(x: &Matrix) -> Result<Self> {
        let (n, p) = (x.rows(), x.cols());
        if n < 2 || p == 0 {
            return Err(Error::validation("need at least two observations"));
        }
        if !x.is_finite() {
            return Err(Error::validation("data contain non-finite values"));
        }
        let mut mean = vec![0.0; p];
        for i in 0..n {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);

        // Upper triangle, row-major, accumulated in place.
        let mut acc = vec![0.0; p * p];
        let mut centred = vec![0.0; p];
        for i in 0..n {
            for ((c, v), m) in centred.iter_mut().zip(x.row(i)).zip(&mean) {
                *c = v - m;
            }
            for a in 0..p {
                let ca = centred[a];
                for (r, cb) in acc[a * p + a..(a + 1) * p].iter_mut().zip(&centred[a..]) {
                    *r += ca * cb;
                }
            }
        }
        let mut cov = Matrix::zeros(p, p);
        for a in 0..p {
            for b in a..p {
                let v = acc[a * p + b] / n as f64;
                cov[(a, b)] = v;
                cov[(b, a)] = v;
            }
        }
        let eigen = sym_eigen(&cov)?;
        Ok(SampleSummary { n, mean, cov, eigen })
    }

    /// Summary built directly from a covariance matrix (divisor `n`), e.g. a
    /// published one. The mean is unknown and set to zero.
    pub fn from_covariance(n: usize, cov: Matrix) -> Result<Self> {
        if n < cov.rows() + 1 {
            return Err(Error::validation("need n >= p + 1"));
        }
        let eigen = sym_eigen(&cov)?;
        let s = SampleSummary {
            n,
            mean: vec![0.0; cov.rows()],
            cov,
            eigen,
        };
        s.check_rank()?;
        Ok(s)
    }

    fn check_rank(&self) -> Result<()> {
        let top = self.eigen.values[0];
        let bottom = *self.eigen.values.last().expect("p >= 1");
        if !(top > 0.0) || bottom < RANK_TOL * top {
            return Err(Error::degenerate(format!(
                "sample covariance is singular (eigenvalues {top:e} .. {bottom:e})"
            )));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.cov.rows()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    pub fn eigen(&self) -> &EigenSystem {
        &self.eigen
    }
}

/// Shorthand for [`SampleSummary::new`].
pub fn summarize(x: &Matrix) -> Result<SampleSummary> {
    SampleSummary::new(x)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome {
    pub statistic: f64,
    pub df: usize,
    pub pvalue: f64,
    pub alpha: f64,
    pub reject: bool,
}

/// Compares `statistic` with the upper `alpha` quantile of χ²_df.
pub fn decide(statistic: f64, df: usize, alpha: f64) -> Result<TestOutcome> {
    if statistic.is_nan() {
        return Err(Error::validation("statistic is NaN"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::validation(format!("level {alpha} outside (0, 1)")));
    }
    if df == 0 {
        return Err(Error::validation("degrees of freedom must be at least 1"));
    }
    let pvalue = chi2_sf(statistic, df);
    Ok(TestOutcome {
        statistic,
        df,
        pvalue,
        alpha,
        reject: pvalue < alpha,
    })
}

fn check_direction(s: &SampleSummary, theta0: &[f64]) -> Result<()> {
    if theta0.len() != s.p() {
        return Err(Error::validation(format!(
            "theta0 has length {}, data have {} variables",
            theta0.len(),
            s.p()
        )));
    }
    if (norm(theta0) - 1.0).abs() > 1e-10 {
        return Err(Error::validation(format!(
            "theta0 must be a unit vector (norm {})",
            norm(theta0)
        )));
    }
    Ok(())
}

/// Validates `j` and rejects exact ties around `λ̂_j`; returns the 0-based index.
fn check_index(s: &SampleSummary, j: usize) -> Result<usize> {
    let p = s.p();
    if j == 0 || j > p {
        return Err(Error::validation(format!("eigenvector index {j} outside 1..={p}")));
    }
    let vals = &s.eigen.values;
    let k = j - 1;
    let tied = |a: f64, b: f64| (a - b).abs() <= 1e-14 * vals[0].abs();
    if (k > 0 && tied(vals[k - 1], vals[k])) || (k + 1 < p && tied(vals[k], vals[k + 1])) {
        return Err(Error::degenerate(format!(
            "eigenvalue {j} is tied with a neighbour; the target direction is not identified"
        )));
    }
    Ok(k)
}

/// Anderson's statistic `n(λ̂_j θ₀ᵀS⁻¹θ₀ + θ₀ᵀSθ₀/λ̂_j - 2)`, with `p - 1`
/// degrees of freedom.
pub fn anderson_statistic(s: &SampleSummary, theta0: &[f64], j: usize) -> Result<f64> {
    check_direction(s, theta0)?;
    let k = check_index(s, j)?;
    s.check_rank()?;
    let chol = Cholesky::new(&s.cov)?;
    let lam = s.eigen.values[k];
    let q = s.n as f64
        * (lam * chol.inv_quad_form(theta0) + s.cov.quad_form(theta0)? / lam - 2.0);
    Ok(q.max(0.0))
}

/// The same statistic in spectral form,
/// `(n/λ̂_j) Σ_{k≠j} λ̂_k⁻¹ (λ̂_j - λ̂_k)² (θ̂_kᵀθ₀)²`.
pub fn anderson_statistic_spectral(s: &SampleSummary, theta0: &[f64], j: usize) -> Result<f64> {
    check_direction(s, theta0)?;
    let k0 = check_index(s, j)?;
    s.check_rank()?;
    let vals = &s.eigen.values;
    let lam = vals[k0];
    let mut sum = 0.0;
    for (k, &lk) in vals.iter().enumerate() {
        if k == k0 {
            continue;
        }
        let c = dot(&s.eigen.vector(k), theta0);
        sum += (lam - lk) * (lam - lk) / lk * c * c;
    }
    Ok(s.n as f64 * sum / lam)
}

/// The Le Cam optimal statistic `(n/λ̂_j) Σ_{k≠j} λ̂_k⁻¹ (θ̃_kᵀSθ₀)²`, with
/// `p - 1` degrees of freedom.
///
/// The `θ̃_k` come from Gram-Schmidt on `θ̂_1, …, θ̂_{j-1}, θ₀, θ̂_{j+1}, …, θ̂_p`
/// (sample eigenvectors in order of decreasing eigenvalue, `θ₀` in slot `j`).
/// For `j = 1` they complete `θ₀` to an orthonormal basis.
pub fn hpv_statistic(s: &SampleSummary, theta0: &[f64], j: usize) -> Result<f64> {
    check_direction(s, theta0)?;
    let k0 = check_index(s, j)?;
    let vecs: Vec<Vec<f64>> = (0..s.p())
        .map(|k| if k == k0 { theta0.to_vec() } else { s.eigen.vector(k) })
        .collect();
    let seq: Vec<&[f64]> = vecs.iter().map(Vec::as_slice).collect();
    // Positions in the sequence coincide with eigenvector indices.
    let tilde = gram_schmidt(&seq)?;
    let s_theta = s.cov.mul_vec(theta0)?;
    let vals = &s.eigen.values;
    let sum: f64 = (0..s.p())
        .filter(|&k| k != k0)
        .map(|k| {
            let c = dot(&tilde[k], &s_theta);
            c * c / vals[k]
        })
        .sum();
    Ok(s.n as f64 * sum / vals[k0])
}

/// Kurtosis estimate `(1/(n p (p+2))) Σ_i d_i⁴ - 1`, `d_i²` being the squared
/// Mahalanobis distance of observation `i` under `S` (divisor `n`).
pub fn kurtosis_estimate(x: &Matrix) -> Result<f64> {
    kurtosis_estimate_with(x, &SampleSummary::new(x)?)
}

/// [`kurtosis_estimate`] reusing a summary already computed from `x`.
pub fn kurtosis_estimate_with(x: &Matrix, s: &SampleSummary) -> Result<f64> {
    if x.cols() != s.p() {
        return Err(Error::validation("data and summary disagree on p"));
    }
    s.check_rank()?;
    let chol = Cholesky::new(&s.cov)?;
    let p = s.p();
    let mut centred = vec![0.0; p];
    let mut sum = 0.0;
    for i in 0..x.rows() {
        for ((c, v), m) in centred.iter_mut().zip(x.row(i)).zip(&s.mean) {
            *c = v - m;
        }
        chol.forward_in_place(&mut centred);
        let d2 = dot(&centred, &centred);
        sum += d2 * d2;
    }
    let pf = p as f64;
    Ok(sum / (x.rows() as f64 * pf * (pf + 2.0)) - 1.0)
}

/// `statistic / (1 + κ̂)`.
pub fn pseudo_gaussian(statistic: f64, kappa_hat: f64) -> Result<f64> {
    if !(1.0 + kappa_hat > 0.0) {
        return Err(Error::validation(format!(
            "pseudo-Gaussian correction needs 1 + kappa > 0, got kappa = {kappa_hat}"
        )));
    }
    Ok(statistic / (1.0 + kappa_hat))
}

/// `(n/(1+δv)) θ₀ᵀS(I - θ₀θ₀ᵀ)Sθ₀` for `δ ∈ {0, 1}`, with `p - 1` degrees
/// of freedom.
pub fn q_delta(s: &SampleSummary, theta0: &[f64], v: f64, delta: u8) -> Result<f64> {
    check_direction(s, theta0)?;
    if delta > 1 {
        return Err(Error::validation(format!("delta must be 0 or 1, got {delta}")));
    }
    let denom = 1.0 + delta as f64 * v;
    if !(denom > 0.0) {
        return Err(Error::validation("1 + delta v must be positive"));
    }
    let st = s.cov.mul_vec(theta0)?;
    let a = dot(&st, &st);
    let b = dot(theta0, &st);
    Ok((s.n as f64 / denom) * (a - b * b).max(0.0))
}

/// `n θ₀ᵀ(S - Σ)(I - ½θ₀θ₀ᵀ)(S - Σ)θ₀`, compared with χ²_p.
pub fn oracle_statistic(s: &SampleSummary, theta0: &[f64], sigma_n: &Matrix) -> Result<f64> {
    check_direction(s, theta0)?;
    let a = s.cov.sub(sigma_n)?.mul_vec(theta0)?;
    let t = dot(theta0, &a);
    Ok(s.n as f64 * (dot(&a, &a) - 0.5 * t * t))
}
