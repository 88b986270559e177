//! Second-order kernels: `𝒯(-Δ)^{-1}` and `X_j X_k (-Δ)^{-1}`.

use num_complex::Complex64;

use super::heat::{heat_integrand, heat_prefactor, symmetric_breaks};
use super::riesz::field_pair;
use super::{c1, gamma_half, lambda_factors, sech_integral, QuadratureConfig};
use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::quadrature::{integrate_breaks, QuadTolerance};

fn nonzero(g: &GroupElement) -> Result<()> {
    if g.is_origin() {
        Err(Error::AtOrigin)
    } else {
        Ok(())
    }
}

/// `G = ∫_0^∞ p_h dh = C₁ S_n d_K^{-2n}`, `S_n = ∫ sech^n`.
pub fn fundamental_solution(g: &GroupElement) -> Result<f64> {
    nonzero(g)?;
    let n = g.n();
    Ok(c1(n) * sech_integral(n as u32) * g.koranyi_norm().powi(-2 * n as i32))
}

/// `C₂ = -n i C₁`.
pub fn second_order_t_constant(n: usize) -> Complex64 {
    Complex64::new(0.0, -(n as f64) * c1(n))
}

pub(crate) fn closed_form_flat(n: usize, v: &[f64]) -> f64 {
    let r2: f64 = v[..2 * n].iter().map(|a| a * a).sum();
    let t = v[2 * n];
    let d2 = r2.hypot(t);
    n as f64 * c1(n) * sech_integral(n as u32) * t * d2.powi(-(n as i32) - 2)
}

/// `n C₁ S_n t d_K^{-2n-4}`; for `n = 1` this is `t / (8π d_K⁶)`.
pub fn closed_form_t_kernel(g: &GroupElement) -> Result<f64> {
    nonzero(g)?;
    Ok(closed_form_flat(g.n(), &g.to_flat()))
}

/// `F(φ) = ∫_ℝ sech^{n+1} λ sinh(λ + iφ) dλ` by quadrature over both half-lines.
pub fn t_profile(n: usize, phi: f64, cfg: &QuadratureConfig) -> Result<Complex64> {
    let breaks = symmetric_breaks(&cfg.lambda_breaks(n));
    let f = |lam: f64| {
        let s = Complex64::new(lam, phi).sinh();
        s * (1.0 / lam.cosh()).powi(n as i32 + 1)
    };
    Ok(integrate_breaks(f, &breaks, &cfg.tol())?.value)
}

/// `Re(C₂ F(φ)) d_K^{-(2n+2)}` with `F` by quadrature.
pub fn second_order_t_kernel(g: &GroupElement, cfg: &QuadratureConfig) -> Result<f64> {
    nonzero(g)?;
    let n = g.n();
    let f = t_profile(n, g.koranyi_phase(), cfg)?;
    Ok((second_order_t_constant(n) * f).re * g.koranyi_norm().powi(-(2 * n as i32 + 2)))
}

/// `∫_0^∞ ∂_t p_h dh` by two-dimensional quadrature; the kernel of `𝒯(-Δ)^{-1}`.
pub fn t_kernel_subordination(g: &GroupElement, cfg: &QuadratureConfig) -> Result<f64> {
    nonzero(g)?;
    let n = g.n();
    let r2 = g.z_norm_sq();
    let t = g.t;
    let rho2 = g.rho().powi(2);
    let (u0, u1) = (rho2.ln() - cfg.h_lo, rho2.ln() + cfg.h_hi);
    let k = cfg.h_nodes.max(1);
    let outer: Vec<f64> = (0..=k)
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
        let lam_max = if r2 > 0.0 {
            cfg.cutoff_for(n).min(160.0 * h / r2)
        } else {
            cfg.cutoff_for(n)
        };
        let m = cfg.lambda_nodes.max(1);
        let pos: Vec<f64> = (0..=m).map(|i| lam_max * i as f64 / m as f64).collect();
        let tol = QuadTolerance {
            abs_tol: cfg.abs_tol * 1e-3 / h,
            rel_tol: cfg.rel_tol * 1e-2,
            max_evals: cfg.max_evals,
        };
        let inner = integrate_breaks(
            |lam| heat_integrand(n, r2, t, h, lam) * Complex64::new(0.0, lam / (4.0 * h)),
            &symmetric_breaks(&pos),
            &tol,
        );
        match inner {
            Ok(o) => h * heat_prefactor(n, h) * o.value.re,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let out = integrate_breaks(f, &outer, &outer_tol)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(out.value),
    }
}

fn check_pair(n: usize, j: usize, k: usize) -> Result<()> {
    for i in [j, k] {
        if i == 0 || i > 2 * n {
            return Err(Error::FieldIndex {
                index: i,
                max: 2 * n,
            });
        }
    }
    Ok(())
}

/// `X_j X_k (-Δ)^{-1}` kernel: `X_j X_k` under the heat integral, then the
/// `h`-integral in closed form via `∫ h^{-s-1} e^{-c/h} dh = Γ(s) c^{-s}`.
pub(crate) fn xx_gamma(
    j: usize,
    k: usize,
    g: &GroupElement,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    nonzero(g)?;
    let n = g.n();
    check_pair(n, j, k)?;
    let v = g.to_flat();
    let (pj, qj) = field_pair(n, j, &v);
    let (pk, qk) = field_pair(n, k, &v);
    let r2 = g.z_norm_sq();
    let t = g.t;
    let same = (j <= n) == (k <= n);
    let g1 = gamma_half(2 * n as u32 + 2);
    let g2 = gamma_half(2 * n as u32 + 4);
    let f = |lam: f64| {
        let (lc, s) = lambda_factors(lam);
        if s == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        // c = (λ/4)(r² coth λ - it)
        let c = Complex64::new(r2 * lc, -lam * t) / 4.0;
        // (λ/4) D_jk
        let d = if same {
            Complex64::new(if j == k { -0.5 * lc } else { 0.0 }, 0.0)
        } else if j <= n && k == n + j {
            Complex64::new(0.0, 0.5 * lam)
        } else if k <= n && j == n + k {
            Complex64::new(0.0, -0.5 * lam)
        } else {
            Complex64::new(0.0, 0.0)
        };
        // λ A_l = -2(p λ coth λ + i q λ)
        let aj = Complex64::new(pj * lc, qj * lam) * -2.0;
        let ak = Complex64::new(pk * lc, qk * lam) * -2.0;
        let inv = c.inv();
        let cn1 = inv.powi(n as i32 + 1);
        (d * g1 * cn1 + aj * ak / 16.0 * g2 * cn1 * inv) * s.powi(n as i32)
    };
    let scale = g.koranyi_norm().powi(-(2 * n as i32 + 2));
    let tol = QuadTolerance {
        abs_tol: cfg.abs_tol * 1e-2 * scale,
        rel_tol: cfg.rel_tol * 1e-2,
        max_evals: cfg.max_evals,
    };
    let out = integrate_breaks(f, &cfg.lambda_breaks(n), &tol)?;
    Ok(2.0 * out.value.re / (2.0 * (4.0 * std::f64::consts::PI).powi(n as i32 + 1)))
}

/// `X_j X_k (-Δ)^{-1}` kernel via the Gamma-reduced subordination integral.
pub fn second_order_xx_kernel(
    j: usize,
    k: usize,
    g: &GroupElement,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    Ok(Complex64::new(xx_gamma(j, k, g, cfg)?, 0.0))
}

/// `∫_ℝ sech^{n+2} λ cosh(λ + iφ)² dλ` reduced by parity:
/// `cos²φ S_n - sin²φ (S_n - S_{n+2})`.
pub fn sech_cosh_sq_parity(n: usize, phi: f64) -> f64 {
    let sn = sech_integral(n as u32);
    let sn2 = sech_integral(n as u32 + 2);
    phi.cos().powi(2) * sn - phi.sin().powi(2) * (sn - sn2)
}

fn printed_integral<F: Fn(Complex64) -> Complex64>(
    n: usize,
    cfg: &QuadratureConfig,
    f: F,
) -> Result<Complex64> {
    let breaks = symmetric_breaks(&cfg.lambda_breaks(n));
    let tol = QuadTolerance {
        abs_tol: cfg.abs_tol * 1e-2,
        rel_tol: cfg.rel_tol * 1e-2,
        max_evals: cfg.max_evals,
    };
    Ok(integrate_breaks(
        |lam: f64| f(Complex64::new(lam, 0.0)) * (1.0 / lam.cosh()).powi(n as i32 + 2),
        &breaks,
        &tol,
    )?
    .value)
}

/// `∫_ℝ sech^{n+2} λ cosh(λ + iφ)² dλ` by brute quadrature.
pub fn sech_cosh_sq_quadrature(n: usize, phi: f64, cfg: &QuadratureConfig) -> Result<Complex64> {
    let w = Complex64::new(0.0, phi);
    printed_integral(n, cfg, |l| (l + w).cosh().powi(2))
}

/// The four-term display `d_K^{-2n-4}(F₁ + iF₂ + F₃ + iF₄)` for `j ≤ n < k`,
/// with `C₃ = 2n(2n+2)C₁` and `C₄ = 2(2n+2)C₂`. `F₂` and `F₃` diverge for `n = 1`.
pub fn second_order_xx_printed(
    j: usize,
    k: usize,
    g: &GroupElement,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    nonzero(g)?;
    let n = g.n();
    check_pair(n, j, k)?;
    if !(j <= n && n < k) {
        return Err(Error::IndexPattern { j, k });
    }
    if n == 1 {
        return Err(Error::Divergent("sech^3 cosh sinh^2 is not integrable"));
    }
    let v = g.to_flat();
    let w = Complex64::new(0.0, g.koranyi_phase());
    let i1 = printed_integral(n, cfg, |l| (l + w).cosh().powi(2))?;
    let i2 = printed_integral(n, cfg, |l| (l + w).cosh() * (l + w).sinh().powi(2))?;
    let i4 = printed_integral(n, cfg, |l| (l + w).sinh().powi(2))?;
    let nf = n as f64;
    let c3 = 2.0 * nf * (2.0 * nf + 2.0) * c1(n);
    let c4 = second_order_t_constant(n) * (2.0 * (2.0 * nf + 2.0));
    let x = |i: usize| v[i - 1];
    let f1 = c3 * x(j) * x(k) * i1;
    let f2 = -c3 * x(n + j) * x(k) * i2;
    let f3 = c4 * x(k - n) * x(j) * i2;
    let f4 = -c4 * x(k - n) * x(n + j) * i4;
    let i = Complex64::new(0.0, 1.0);
    Ok((f1 + i * f2 + f3 + i * f4) * g.koranyi_norm().powi(-(2 * n as i32 + 4)))
}
