//! Chi-square distribution functions and the Gaussian/elliptical random
//! matrices that appear as limits of the standardized sample covariance.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::Rng;

const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 100_000;

pub fn std_normal(rng: &mut Rng) -> f64 {
    rng.std_normal()
}

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection.
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn gamma_prefactor(a: f64, x: f64) -> f64 {
    (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut del = 1.0 / a;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * gamma_prefactor(a, x)
}

fn gamma_q_fraction(a: f64, x: f64) -> f64 {
    // Modified Lentz.
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    gamma_prefactor(a, x) * h
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x.is_infinite() {
        1.0
    } else if x < a + 1.0 {
        gamma_p_series(a, x)
    } else {
        1.0 - gamma_q_fraction(a, x)
    }
}

/// Regularized upper incomplete gamma `Q(a, x) = 1 - P(a, x)`.
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else if x.is_infinite() {
        0.0
    } else if x < a + 1.0 {
        1.0 - gamma_p_series(a, x)
    } else {
        gamma_q_fraction(a, x)
    }
}

fn chi2_cdf_f(x: f64, df: f64) -> f64 {
    gamma_p(0.5 * df, 0.5 * x)
}

pub fn chi2_cdf(x: f64, df: usize) -> f64 {
    chi2_cdf_f(x, df as f64)
}

/// Upper tail `P[χ²_df > x]`, computed directly rather than as `1 - cdf`.
pub fn chi2_sf(x: f64, df: usize) -> f64 {
    gamma_q(0.5 * df as f64, 0.5 * x)
}

pub fn chi2_pdf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return if df == 2 { 0.5 } else { 0.0 };
    }
    let k = 0.5 * df as f64;
    ((k - 1.0) * x.ln() - 0.5 * x - k * std::f64::consts::LN_2 - ln_gamma(k)).exp()
}

/// The `q`-quantile of χ²_df: bisection to a tight bracket, then Newton.
pub fn chi2_quantile(q: f64, df: usize) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::validation(format!("quantile level {q} outside (0, 1)")));
    }
    if df == 0 {
        return Err(Error::validation("degrees of freedom must be at least 1"));
    }
    let mut hi = (df as f64).max(1.0);
    while chi2_cdf(hi, df) < q {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf(mid, df) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let f = chi2_pdf(x, df);
        if !(f > 0.0) {
            break;
        }
        let step = (chi2_cdf(x, df) - q) / f;
        let next = x - step;
        if !(next > lo && next < hi) {
            break;
        }
        x = next;
    }
    Ok(x)
}

/// CDF of the noncentral χ² law as a Poisson mixture of central χ² CDFs.
///
/// Terms are added until the Poisson mass not yet accounted for drops below
/// `1e-12`.
pub fn noncentral_chi2_cdf(x: f64, df: usize, ncp: f64) -> Result<f64> {
    if df == 0 {
        return Err(Error::validation("degrees of freedom must be at least 1"));
    }
    if !(ncp >= 0.0) || !ncp.is_finite() {
        return Err(Error::validation(format!("invalid noncentrality {ncp}")));
    }
    if x.is_nan() {
        return Err(Error::validation("x is NaN"));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if ncp == 0.0 {
        return Ok(chi2_cdf(x, df));
    }
    let lambda = 0.5 * ncp;
    let ln_lambda = lambda.ln();
    let mut mass = 0.0;
    let mut total = 0.0;
    let limit = (lambda + 60.0 * lambda.sqrt() + 1000.0) as usize;
    for k in 0..=limit {
        let kf = k as f64;
        let w = (-lambda + kf * ln_lambda - ln_gamma(kf + 1.0)).exp();
        mass += w;
        total += w * chi2_cdf_f(x, df as f64 + 2.0 * kf);
        if 1.0 - mass < 1e-12 && kf > lambda {
            break;
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Kolmogorov-Smirnov distance between the empirical law of `sample` and `cdf`.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let m = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / m).abs().max((i as f64 + 1.0) / m - f)
        })
        .fold(0.0, f64::max)
}

/// `Z = (G + Gᵀ)/√2` with `G` a matrix of iid standard normals, so that
/// `vec(Z) ~ N(0, I + K_p)`.
pub fn sample_goe(p: usize, rng: &mut Rng) -> Matrix {
    let mut g = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..p {
            g[(i, j)] = rng.std_normal();
        }
    }
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut z = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..=i {
            let x = s * (g[(i, j)] + g[(j, i)]);
            z[(i, j)] = x;
            z[(j, i)] = x;
        }
    }
    z
}

/// Conjugates by `Λ(v)^{1/2}`, `Λ(v) = diag(1+v, 1, ..., 1)`.
fn scale_first(z: &mut Matrix, v: f64) {
    if v == 0.0 {
        return;
    }
    let p = z.rows();
    let s = (1.0 + v).sqrt();
    for k in 0..p {
        z[(0, k)] *= s;
        z[(k, 0)] *= s;
    }
}

/// `Z(v) = Λ(v)^{1/2} Z Λ(v)^{1/2}`.
///
/// # Panics
/// If `v` is negative.
pub fn sample_z_v(p: usize, v: f64, rng: &mut Rng) -> Matrix {
    assert!(v >= 0.0, "spike size must be non-negative, got {v}");
    let mut z = sample_goe(p, rng);
    scale_first(&mut z, v);
    z
}

/// Smallest admissible elliptical kurtosis in dimension `p`.
pub fn kappa_lower_bound(p: usize) -> f64 {
    -2.0 / (p as f64 + 2.0)
}

/// `Z_f` with `vec(Z_f) ~ N(0, (1+κ)(I + K_p) + κ vec(I) vec(I)ᵀ)`.
pub fn sample_z_elliptical(p: usize, kappa: f64, rng: &mut Rng) -> Result<Matrix> {
    check_kappa(p, kappa)?;
    Ok(draw_z_elliptical(p, kappa, rng))
}

fn check_kappa(p: usize, kappa: f64) -> Result<()> {
    if !kappa.is_finite() || kappa < kappa_lower_bound(p) {
        return Err(Error::validation(format!(
            "kurtosis {kappa} below the admissible bound {} for p = {p}",
            kappa_lower_bound(p)
        )));
    }
    Ok(())
}

fn draw_z_elliptical(p: usize, kappa: f64, rng: &mut Rng) -> Matrix {
    if kappa == 0.0 {
        return sample_goe(p, rng);
    }
    if kappa > 0.0 {
        let mut z = sample_goe(p, rng).scale((1.0 + kappa).sqrt());
        let g = kappa.sqrt() * rng.std_normal();
        for i in 0..p {
            z[(i, i)] += g;
        }
        return z;
    }
    // Negative kurtosis: off-diagonal entries are independent N(0, 1+κ); the
    // diagonal has covariance 2(1+κ) I + κ 11ᵀ, whose symmetric square root
    // acts as √(2+(p+2)κ) along 1 and √(2(1+κ)) on its complement.
    let off = (1.0 + kappa).sqrt();
    let mut z = Matrix::zeros(p, p);
    for i in 0..p {
        for j in 0..i {
            let x = off * rng.std_normal();
            z[(i, j)] = x;
            z[(j, i)] = x;
        }
    }
    let g: Vec<f64> = (0..p).map(|_| rng.std_normal()).collect();
    let mean = g.iter().sum::<f64>() / p as f64;
    let a = (2.0 * (1.0 + kappa)).sqrt();
    let b = (2.0 + (p as f64 + 2.0) * kappa).max(0.0).sqrt();
    for i in 0..p {
        z[(i, i)] = a * (g[i] - mean) + b * mean;
    }
    z
}

/// Law of `Z_f(v) = Λ(v)^{1/2} Z_f Λ(v)^{1/2}`; `κ = 0` gives `Z(v)`, `v = 0`
/// gives `Z_f`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LimitMatrixLaw {
    p: usize,
    v: f64,
    kappa: f64,
}

impl LimitMatrixLaw {
    pub fn new(p: usize, v: f64, kappa: f64) -> Result<Self> {
        if p == 0 {
            return Err(Error::validation("dimension must be at least 1"));
        }
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::validation(format!("spike size must be >= 0, got {v}")));
        }
        check_kappa(p, kappa)?;
        Ok(LimitMatrixLaw { p, v, kappa })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn sample(&self, rng: &mut Rng) -> Matrix {
        let mut z = draw_z_elliptical(self.p, self.kappa, rng);
        scale_first(&mut z, self.v);
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{commutation_matrix, vec};

    /// Composite Simpson on `[a, b]` with `n` (even) panels.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!((ln_gamma(1.0)).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn quantile_matches_integrated_density() {
        // df = 1 via the substitution x = u², which removes the singularity:
        // P[χ²₁ ≤ q] = ∫_0^{√q} 2 φ(u) du.
        let q1 = chi2_quantile(0.95, 1).unwrap();
        let phi = |u: f64| (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let mass = simpson(|u| 2.0 * phi(u), 0.0, q1.sqrt(), 2000);
        assert!((mass - 0.95).abs() < 1e-10);
        assert!((q1 - 3.84146).abs() < 1e-4);

        let q9 = chi2_quantile(0.95, 9).unwrap();
        let mass = simpson(|x| chi2_pdf(x, 9), 0.0, q9, 20_000);
        assert!((mass - 0.95).abs() < 1e-10);
        assert!((q9 - 16.9190).abs() < 1e-3);
    }

    #[test]
    fn quantile_round_trip_grid() {
        for df in 1..=30 {
            for q in [0.001, 0.01, 0.05, 0.5, 0.95, 0.99, 0.999] {
                let x = chi2_quantile(q, df).unwrap();
                assert!((chi2_cdf(x, df) - q).abs() < 1e-9, "df {df} q {q}");
            }
        }
    }

    #[test]
    fn cdf_edges() {
        assert_eq!(chi2_cdf(0.0, 3), 0.0);
        assert_eq!(chi2_sf(0.0, 3), 1.0);
        assert!((chi2_cdf(1e4, 3) - 1.0).abs() < 1e-15);
        // χ²₂ is exponential with mean 2.
        for x in [0.1, 1.0, 5.0, 30.0] {
            assert!((chi2_sf(x, 2) - (-0.5 * x).exp()).abs() < 1e-14);
        }
        assert!(chi2_quantile(0.0, 1).is_err());
        assert!(chi2_quantile(1.0, 1).is_err());
    }

    #[test]
    fn noncentral_reduces_and_saturates() {
        for x in [0.5, 3.0, 10.0] {
            assert_eq!(noncentral_chi2_cdf(x, 4, 0.0).unwrap(), chi2_cdf(x, 4));
        }
        assert!((noncentral_chi2_cdf(1e4, 3, 10.0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noncentral_monotone() {
        let mut prev = 0.0;
        for i in 1..100 {
            let c = noncentral_chi2_cdf(i as f64 * 0.3, 3, 4.0).unwrap();
            assert!(c >= prev);
            prev = c;
        }
        let mut prev = 1.0;
        for i in 0..50 {
            let c = noncentral_chi2_cdf(7.0, 3, i as f64 * 0.5).unwrap();
            assert!(c <= prev + 1e-15);
            prev = c;
        }
    }

    #[test]
    fn noncentral_matches_monte_carlo() {
        let x = chi2_quantile(0.95, 3).unwrap();
        let power = 1.0 - noncentral_chi2_cdf(x, 3, 4.0).unwrap();
        let mut rng = Rng::new(2024);
        let m = 1_000_000;
        let mut hits = 0usize;
        for _ in 0..m {
            let a = rng.std_normal() + 2.0;
            let b = rng.std_normal();
            let c = rng.std_normal();
            if a * a + b * b + c * c > x {
                hits += 1;
            }
        }
        let mc = hits as f64 / m as f64;
        assert!((mc - power).abs() < 2e-3, "mc {mc} vs series {power}");
    }

    fn vec_covariance(draws: &[Vec<f64>]) -> Matrix {
        let d = draws[0].len();
        let m = draws.len() as f64;
        let mut mean = vec![0.0; d];
        for x in draws {
            for (a, b) in mean.iter_mut().zip(x) {
                *a += b / m;
            }
        }
        let mut c = Matrix::zeros(d, d);
        for x in draws {
            for i in 0..d {
                for j in 0..d {
                    c[(i, j)] += (x[i] - mean[i]) * (x[j] - mean[j]) / m;
                }
            }
        }
        c
    }

    fn target_cov(p: usize, v: f64, kappa: f64) -> Matrix {
        let mut lam = vec![1.0; p];
        lam[0] = 1.0 + v;
        let l = Matrix::from_diag(&lam);
        let ll = crate::linalg::kron(&l, &l);
        let ipk = Matrix::identity(p * p).add(&commutation_matrix(p)).unwrap();
        let vl = vec(&l);
        ipk.matmul(&ll)
            .unwrap()
            .scale(1.0 + kappa)
            .add(&Matrix::outer(&vl, &vl).scale(kappa))
            .unwrap()
    }

    /// Entrywise comparison within 5 standard errors, the SE of a sample
    /// covariance of Gaussians being √((σ_ii σ_jj + σ_ij²)/M).
    fn assert_cov_close(emp: &Matrix, target: &Matrix, m: usize) {
        let d = target.rows();
        for i in 0..d {
            for j in 0..d {
                let se = ((target[(i, i)] * target[(j, j)] + target[(i, j)].powi(2)) / m as f64)
                    .sqrt();
                let diff = (emp[(i, j)] - target[(i, j)]).abs();
                assert!(diff <= 5.0 * se + 1e-12, "entry ({i},{j}): {} vs {}", emp[(i, j)], target[(i, j)]);
            }
        }
    }

    #[test]
    fn goe_moments() {
        let mut rng = Rng::new(1);
        let m = 100_000;
        let draws: Vec<Vec<f64>> = (0..m).map(|_| vec(&sample_goe(3, &mut rng))).collect();
        let c = vec_covariance(&draws);
        assert!((c[(0, 0)] - 2.0).abs() < 0.05);
        assert!((c[(1, 1)] - 1.0).abs() < 0.03);
        assert_cov_close(&c, &target_cov(3, 0.0, 0.0), m);
    }

    #[test]
    fn z_v_moments() {
        let mut rng = Rng::new(2);
        let m = 100_000;
        let v = 1.5;
        let draws: Vec<Vec<f64>> = (0..m).map(|_| vec(&sample_z_v(3, v, &mut rng))).collect();
        let c = vec_covariance(&draws);
        assert!((c[(0, 0)] / (2.0 * (1.0 + v) * (1.0 + v)) - 1.0).abs() < 0.05);
        assert!((c[(1, 1)] / (1.0 + v) - 1.0).abs() < 0.05);
        assert_cov_close(&c, &target_cov(3, v, 0.0), m);
    }

    #[test]
    fn z_v_at_zero_is_goe() {
        let a = sample_z_v(4, 0.0, &mut Rng::new(3));
        let b = sample_goe(4, &mut Rng::new(3));
        assert_eq!(a, b);
        let c = sample_z_elliptical(4, 0.0, &mut Rng::new(3)).unwrap();
        assert_eq!(c, b);
    }

    #[test]
    fn elliptical_moments_positive_kappa() {
        let mut rng = Rng::new(4);
        let m = 100_000;
        let kappa = 0.4;
        let draws: Vec<Vec<f64>> = (0..m)
            .map(|_| vec(&sample_z_elliptical(3, kappa, &mut rng).unwrap()))
            .collect();
        let c = vec_covariance(&draws);
        assert!((c[(0, 0)] / 3.2 - 1.0).abs() < 0.05);
        // (Z_f)_11 and (Z_f)_22 sit at vec positions 0 and 4.
        assert!((c[(0, 4)] - kappa).abs() < 0.05);
        assert_cov_close(&c, &target_cov(3, 0.0, kappa), m);
    }

    #[test]
    fn elliptical_moments_negative_kappa() {
        let mut rng = Rng::new(5);
        let m = 100_000;
        let p = 3;
        let kappa = -0.3; // bound is -0.4 at p = 3
        let law = LimitMatrixLaw::new(p, 0.7, kappa).unwrap();
        let draws: Vec<Vec<f64>> = (0..m).map(|_| vec(&law.sample(&mut rng))).collect();
        assert_cov_close(&vec_covariance(&draws), &target_cov(p, 0.7, kappa), m);
    }

    #[test]
    fn elliptical_rejects_small_kappa() {
        let mut rng = Rng::new(6);
        assert!(sample_z_elliptical(3, -0.41, &mut rng).is_err());
        assert!(sample_z_elliptical(3, -0.4, &mut rng).is_ok());
        assert!(LimitMatrixLaw::new(3, -1.0, 0.0).is_err());
    }

    #[test]
    fn ks_against_own_cdf_is_small() {
        let mut rng = Rng::new(7);
        let xs: Vec<f64> = (0..20_000)
            .map(|_| {
                let z = rng.std_normal();
                z * z
            })
            .collect();
        let d = ks_statistic(&xs, |x| chi2_cdf(x, 1));
        assert!(d < 1.63 / (20_000f64).sqrt());
    }
}
