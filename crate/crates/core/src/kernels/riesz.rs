//! Riesz kernels `K_l = π^{-1/2} ∫_0^∞ h^{-1/2} X_l p_h dh`.
//!
//! Writing `X_l` acting on the heat integrand as multiplication by
//! `(λ/4h) A_l(λ)` with `A_l = -2(p coth λ + i q)`, where `(p, q) = (x_l, y_l)`
//! for `l ≤ n` and `(y_m, -x_m)` for `l = n + m`, the `h`-integral is a Gamma
//! function and `K_l = d_K^{-(2n+3)} (p P(φ) + q Q(φ))`.

use num_complex::Complex64;

use super::heat::{heat_integrand, heat_prefactor, symmetric_breaks};
use super::{gamma_half, lambda_factors, ln_cosh, QuadratureConfig};
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::quadrature::{integrate_breaks, QuadTolerance, Vector};

/// The coordinate pair `(p, q)` paired with the field index `l`.
pub(crate) fn field_pair(n: usize, l: usize, v: &[f64]) -> (f64, f64) {
    if l <= n {
        (v[l - 1], v[n + l - 1])
    } else {
        (v[l - 1], -v[l - 1 - n])
    }
}

fn check_index(n: usize, l: usize) -> Result<()> {
    if l == 0 || l > 2 * n {
        return Err(Error::FieldIndex {
            index: l,
            max: 2 * n,
        });
    }
    Ok(())
}

/// `X_l p_h(g)` by differentiating under the λ-integral.
pub fn riesz_heat_derivative(
    l: usize,
    g: &GroupElement,
    h: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let n = g.n();
    check_index(n, l)?;
    let v = g.to_flat();
    let (p, q) = field_pair(n, l, &v);
    let r2 = g.z_norm_sq();
    let scale = (p.abs() + q.abs()).max(1e-300) / h;
    let tol = QuadTolerance {
        abs_tol: cfg.abs_tol * 1e-4 * scale,
        rel_tol: cfg.rel_tol * 1e-2,
        max_evals: cfg.max_evals,
    };
    let raw = inner_derivative(n, p, q, r2, g.t, h, cfg, &tol)?;
    Ok(heat_prefactor(n, h) * raw)
}

#[allow(clippy::too_many_arguments)]
fn inner_derivative(
    n: usize,
    p: f64,
    q: f64,
    r2: f64,
    t: f64,
    h: f64,
    cfg: &QuadratureConfig,
    tol: &QuadTolerance,
) -> Result<f64> {
    // Beyond λ ≈ 160h/r² the Gaussian factor is below e^{-40}.
    let big = cfg.cutoff_for(n);
    let lam_max = if r2 > 0.0 {
        big.min(160.0 * h / r2)
    } else {
        big
    };
    let k = cfg.lambda_nodes.max(1);
    let pos: Vec<f64> = (0..=k).map(|i| lam_max * i as f64 / k as f64).collect();
    let breaks = symmetric_breaks(&pos);
    let f = |lam: f64| {
        let (lc, _) = lambda_factors(lam);
        // (λ/4h) A_l = -(p λ coth λ + i q λ) / (2h)
        let m = Complex64::new(-p * lc, -q * lam) / (2.0 * h);
        heat_integrand(n, r2, t, h, lam) * m
    };
    Ok(integrate_breaks(f, &breaks, tol)?.value.re)
}

/// Riesz kernel by the two-dimensional subordination quadrature in `(u, λ)`, `h = e^u`.
pub fn riesz_kernel(l: usize, g: &GroupElement, cfg: &QuadratureConfig) -> Result<f64> {
    let n = g.n();
    check_index(n, l)?;
    if g.is_origin() {
        return Err(Error::AtOrigin);
    }
    let v = g.to_flat();
    let (p, q) = field_pair(n, l, &v);
    let r2 = g.z_norm_sq();
    let rho2 = g.rho().powi(2);
    let (u0, u1) = (rho2.ln() - cfg.h_lo, rho2.ln() + cfg.h_hi);
    let k = cfg.h_nodes.max(1);
    let breaks: Vec<f64> = (0..=k)
        .map(|i| u0 + (u1 - u0) * i as f64 / k as f64)
        .collect();
    let kscale = rho2.powf(-(n as f64 + 1.0));
    let outer_tol = QuadTolerance {
        abs_tol: cfg.abs_tol * kscale,
        rel_tol: cfg.rel_tol,
        max_evals: cfg.max_evals,
    };
    let mut failure = None;
    let f = |u: f64| {
        let h = u.exp();
        let scale = (p.abs() + q.abs()).max(1e-300) / h;
        let tol = QuadTolerance {
            abs_tol: cfg.abs_tol * 1e-3 * scale,
            rel_tol: cfg.rel_tol * 1e-2,
            max_evals: cfg.max_evals,
        };
        match inner_derivative(n, p, q, r2, g.t, h, cfg, &tol) {
            Ok(raw) => (0.5 * u).exp() * heat_prefactor(n, h) * raw,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let out = integrate_breaks(f, &breaks, &outer_tol)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(out.value / std::f64::consts::PI.sqrt())
}

/// `ln(sinh λ / λ)` for `λ ≥ 0`.
#[inline]
fn ln_sinhc(lam: f64) -> f64 {
    if lam < 1e-4 {
        lam * lam / 6.0
    } else if lam > 20.0 {
        lam - std::f64::consts::LN_2 - lam.ln() + (-(-2.0 * lam).exp()).ln_1p()
    } else {
        (lam.sinh() / lam).ln()
    }
}

/// Breakpoints on `[0, Λ]` refined geometrically near `λ = cos φ`.
pub(crate) fn pole_breaks(cfg: &QuadratureConfig, n: usize, phi: f64) -> Vec<f64> {
    let lam = cfg.cutoff_for(n);
    let c = phi.cos().max(0.0);
    let mut b = vec![0.0];
    let mut s = c;
    while s < 0.5 && s > 0.0 {
        b.push(s);
        s *= 4.0;
    }
    let k = cfg.lambda_nodes.max(1);
    let first = b.last().copied().unwrap_or(0.0);
    for i in 1..=k {
        let x = lam * i as f64 / k as f64;
        if x > first {
            b.push(x);
        }
    }
    b
}

/// The profiles `(P(φ), Q(φ))` for dimension `n`, `|φ| < π/2`.
pub fn riesz_profiles(n: usize, phi: f64, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    let m = n as f64 + 1.5;
    let c_r = gamma_half(2 * n as u32 + 3)
        / (std::f64::consts::PI.sqrt() * 2.0 * (4.0 * std::f64::consts::PI).powi(n as i32 + 1));
    let pref = -2.0 * 4f64.powf(m - 1.0) * c_r * 2.0;
    let f = |lam: f64| {
        let w = (1.5 * ln_sinhc(lam) - m * ln_cosh(Complex64::new(lam, -phi))).exp();
        let (lc, _) = lambda_factors(lam);
        // Re(w lc) and Re(i λ w)
        Vector([w.re * lc, -w.im * lam])
    };
    // Near the poles the integrand peaks at (cos φ)^{-m} over a width cos φ,
    // and the real parts cancel; the attainable absolute accuracy scales with it.
    let peak = phi.cos().max(1e-300).powf(1.0 - m);
    let tol = QuadTolerance {
        abs_tol: (cfg.abs_tol * 1e-4).max(1e-13 * peak),
        rel_tol: cfg.rel_tol * 1e-4,
        max_evals: cfg.max_evals,
    };
    let out = integrate_breaks(f, &pole_breaks(cfg, n, phi), &tol)?;
    Ok((pref * out.value.0[0], pref * out.value.0[1]))
}

/// Riesz kernel through the one-dimensional Gamma-reduced profiles.
pub fn riesz_kernel_gamma(l: usize, g: &GroupElement, cfg: &QuadratureConfig) -> Result<f64> {
    let n = g.n();
    check_index(n, l)?;
    if g.is_origin() {
        return Err(Error::AtOrigin);
    }
    let (pp, qq) = riesz_profiles(n, g.koranyi_phase(), cfg)?;
    let v = g.to_flat();
    let (p, q) = field_pair(n, l, &v);
    Ok(g.koranyi_norm().powf(-(2.0 * n as f64 + 3.0)) * (p * pp + q * qq))
}
