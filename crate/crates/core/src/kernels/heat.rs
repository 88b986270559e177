use num_complex::Complex64;

use super::{lambda_factors, QuadratureConfig};
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::quadrature::integrate_breaks;

pub(crate) fn heat_prefactor(n: usize, h: f64) -> f64 {
    0.5 / (4.0 * std::f64::consts::PI * h).powi(n as i32 + 1)
}

/// `exp((λ/4h)(it - r² coth λ)) (λ/sinh λ)^n`.
#[inline]
pub(crate) fn heat_integrand(n: usize, r2: f64, t: f64, h: f64, lam: f64) -> Complex64 {
    let (lc, s) = lambda_factors(lam);
    if s == 0.0 {
        return Complex64::new(0.0, 0.0);
    }
    let amp = (-r2 * lc / (4.0 * h)).exp() * s.powi(n as i32);
    let ph = lam * t / (4.0 * h);
    Complex64::new(amp * ph.cos(), amp * ph.sin())
}

/// Symmetric breakpoints on `[-Λ, Λ]`.
pub(crate) fn symmetric_breaks(pos: &[f64]) -> Vec<f64> {
    let mut b: Vec<f64> = pos.iter().rev().map(|v| -v).collect();
    b.extend(pos.iter().skip(1));
    b
}

/// Heat kernel `p_h(g)` by adaptive quadrature of the complex λ-integrand on `[-Λ, Λ]`.
pub fn heat_kernel(g: &GroupElement, h: f64, cfg: &QuadratureConfig) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::NonPositiveTime(h));
    }
    let n = g.n();
    let r2 = g.z_norm_sq();
    let t = g.t;
    let breaks = symmetric_breaks(&cfg.lambda_breaks(n));
    // The integrand is bounded by 1; tighten so cancellation far out keeps digits.
    let mut tol = cfg.tol();
    tol.abs_tol = cfg.abs_tol * 1e-4;
    tol.rel_tol = cfg.rel_tol * 1e-3;
    let v = integrate_breaks(|lam| heat_integrand(n, r2, t, h, lam), &breaks, &tol)?.value;
    Ok(heat_prefactor(n, h) * v.re)
}
