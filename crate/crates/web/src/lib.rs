//! Browser bindings for the demo page in `www/`.
//!
//! Three operations, each returning a flat `Float64Array`-friendly vector:
//! the Anderson type-I risk as a function of the spike size, the regime-(iii)
//! power curves of the HPV and oracle tests, and a histogram of the Anderson
//! limit law against its nominal χ² reference. Everything runs on the calling
//! thread.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use wasm_bindgen::prelude::*;

use weakpca::asymptotics::{asymptotic_power, ncp_hpv_iii, ncp_oracle_iii, type1_risk_iii, QaLimit};
use weakpca::distributions::chi2_pdf;
use weakpca::Rng;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// `[v_0, risk_0, se_0, v_1, risk_1, se_1, ...]` over `steps + 1` equispaced
/// spike sizes in `[0, v_max]`, `m` limit draws each.
#[wasm_bindgen]
pub fn anderson_risk_curve(
    p: usize,
    alpha: f64,
    v_max: f64,
    steps: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    if steps == 0 || !(v_max >= 0.0) {
        return Err(js_err("need steps >= 1 and v_max >= 0"));
    }
    let mut out = Vec::with_capacity(3 * (steps + 1));
    for i in 0..=steps {
        let v = v_max * i as f64 / steps as f64;
        let mut rng = Rng::for_replicate(seed, 0, i as u64);
        let r = type1_risk_iii(p, v, alpha, m, &mut rng).map_err(js_err)?;
        out.extend([v, r.freq, r.se]);
    }
    Ok(out)
}

/// `[t, power_hpv, power_oracle, ...]` for `‖τ‖ = t` on `steps + 1` points of
/// `[0, √2]`.
#[wasm_bindgen]
pub fn power_curves(p: usize, v: f64, alpha: f64, steps: usize) -> Result<Vec<f64>, JsError> {
    if p < 2 || steps == 0 {
        return Err(js_err("need p >= 2 and steps >= 1"));
    }
    let mut out = Vec::with_capacity(3 * (steps + 1));
    for i in 0..=steps {
        let t = std::f64::consts::SQRT_2 * i as f64 / steps as f64;
        let h = asymptotic_power(p - 1, ncp_hpv_iii(v, t).map_err(js_err)?, alpha).map_err(js_err)?;
        let o = asymptotic_power(p, ncp_oracle_iii(v, t).map_err(js_err)?, alpha).map_err(js_err)?;
        out.extend([t, h, o]);
    }
    Ok(out)
}

/// Histogram of `m` draws from the Anderson limit law on `[0, x_max]`:
/// `[x_mid, density, chi2_density, ...]` per bin, followed by the fraction of
/// draws beyond `x_max`.
#[wasm_bindgen]
pub fn qa_limit_histogram(
    p: usize,
    v: f64,
    kappa: f64,
    m: usize,
    bins: usize,
    x_max: f64,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    if m == 0 || bins == 0 || !(x_max > 0.0) {
        return Err(js_err("need m >= 1, bins >= 1 and x_max > 0"));
    }
    let sampler = QaLimit::new(p, v, kappa).map_err(js_err)?;
    let mut rng = Rng::new(seed);
    let width = x_max / bins as f64;
    let mut counts = vec![0usize; bins];
    let mut beyond = 0;
    for _ in 0..m {
        let q = sampler.draw(&mut rng);
        let b = (q / width) as usize;
        if b < bins {
            counts[b] += 1;
        } else {
            beyond += 1;
        }
    }
    let mut out = Vec::with_capacity(3 * bins + 1);
    for (b, &c) in counts.iter().enumerate() {
        let mid = (b as f64 + 0.5) * width;
        out.extend([mid, c as f64 / (m as f64 * width), chi2_pdf(mid, p - 1)]);
    }
    out.push(beyond as f64 / m as f64);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn risk_curve_starts_high_and_decreases() {
        let r = anderson_risk_curve(2, 0.05, 8.0, 2, 20_000, 1).unwrap();
        assert_eq!(r.len(), 9);
        assert!((r[1] - 0.327).abs() < 0.02);
        assert!(r[1] > r[4] && r[4] > r[7]);
    }

    #[test]
    fn power_curve_endpoints() {
        let c = power_curves(2, 1.0, 0.05, 10).unwrap();
        assert_eq!(c.len(), 33);
        assert_eq!(c[1], 0.05);
        assert_eq!(c[2], 0.05);
        assert!((c[31] - 0.05).abs() < 1e-9);
        assert!(c[32] > 0.05);
    }

    #[test]
    fn histogram_is_a_density() {
        let h = qa_limit_histogram(2, 0.0, 0.0, 20_000, 40, 40.0, 3).unwrap();
        assert_eq!(h.len(), 121);
        let mass: f64 = h[..120].chunks(3).map(|c| c[1]).sum::<f64>() + h[120]; // bin width 1
        assert!((mass - 1.0).abs() < 1e-9);
    }
}
