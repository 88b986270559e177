//! Convolution kernels on the Heisenberg group.
//!
//! Every kernel here is built from the heat kernel
//! `p_h(z,t) = (2(4πh)^{n+1})^{-1} ∫ exp((λ/4h)(it - |z|² coth λ)) (λ/sinh λ)^n dλ`.
//! Phases use the Koranyi form `|z|² + it = d_K² e^{iφ}`.

pub mod certify;
pub mod heat;
pub mod riesz;
pub mod scan;
pub mod second_order;
pub mod table;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupElement;
use crate::quadrature::QuadTolerance;

pub use certify::{nondegen_certify, Certificate, SearchConfig};
pub use heat::heat_kernel;
pub use riesz::{riesz_kernel, riesz_kernel_gamma, riesz_profiles};
pub use scan::{sphere_scan, SphereScan};
pub use second_order::{
    closed_form_t_kernel, fundamental_solution, second_order_t_constant, second_order_t_kernel,
    second_order_xx_kernel, second_order_xx_printed,
};
pub use table::SphereTable;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelKind {
    /// `X_l (-Δ)^{-1/2}`, `l` in `1..=2n`.
    Riesz { l: usize },
    /// `c / (|z|² + it)^{n+1}`.
    CauchySzego { c: f64 },
    /// `𝒯 (-Δ)^{-1}` in the sign convention `C₂ = -n i C₁`.
    SecondOrderT,
    /// `X_j X_k (-Δ)^{-1}`.
    SecondOrderXx { j: usize, k: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub n: usize,
    #[serde(flatten)]
    pub kind: KernelKind,
}

impl KernelSpec {
    pub fn riesz(n: usize, l: usize) -> Self {
        Self {
            n,
            kind: KernelKind::Riesz { l },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n;
        let check = |i: usize| {
            if i == 0 || i > 2 * n {
                Err(Error::FieldIndex {
                    index: i,
                    max: 2 * n,
                })
            } else {
                Ok(())
            }
        };
        if n == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        match self.kind {
            KernelKind::Riesz { l } => check(l),
            KernelKind::SecondOrderXx { j, k } => check(j).and(check(k)),
            _ => Ok(()),
        }
    }

    /// Every kind is homogeneous of degree `-(2n+2)`.
    pub fn degree(&self) -> f64 {
        -((2 * self.n + 2) as f64)
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.kind, KernelKind::CauchySzego { .. })
    }

    pub fn label(&self) -> String {
        match self.kind {
            KernelKind::Riesz { l } => format!("riesz{l}"),
            KernelKind::CauchySzego { .. } => "cauchy_szego".into(),
            KernelKind::SecondOrderT => "second_order_t".into(),
            KernelKind::SecondOrderXx { j, k } => format!("second_order_xx{j}{k}"),
        }
    }
}

/// Quadrature settings for the λ-integral and the subordination integral.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    /// Λ; `0` selects the smallest Λ with `e^{-nΛ} Λ^{n+2} < abs_tol`.
    pub lambda_cutoff: f64,
    /// Initial equal panels on `[0, Λ]`.
    pub lambda_nodes: usize,
    pub h_substitution: String,
    /// Initial equal panels for the subordination variable `u`.
    pub h_nodes: usize,
    /// `h` runs over `[ρ² e^{-h_lo}, ρ² e^{h_hi}]`.
    pub h_lo: f64,
    pub h_hi: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_evals: usize,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            lambda_cutoff: 0.0,
            lambda_nodes: 4,
            h_substitution: "h = exp(u)".into(),
            h_nodes: 8,
            h_lo: 7.0,
            h_hi: 16.0,
            abs_tol: 1e-10,
            rel_tol: 1e-8,
            max_evals: 400_000,
        }
    }
}

impl QuadratureConfig {
    /// Doubled nodes, doubled cutoff and wider `h` range.
    pub fn refined(&self) -> Self {
        let mut c = self.clone();
        c.lambda_nodes *= 2;
        c.h_nodes *= 2;
        c.lambda_cutoff = 2.0 * self.cutoff_for(1);
        c.h_lo += 1.0;
        c.h_hi += 4.0;
        c.abs_tol *= 0.1;
        c.rel_tol *= 0.1;
        c.max_evals *= 2;
        c
    }

    pub fn cutoff_for(&self, n: usize) -> f64 {
        if self.lambda_cutoff > 0.0 {
            return self.lambda_cutoff;
        }
        let nf = n as f64;
        let mut lam = 1.0_f64;
        while (-nf * lam).exp() * lam.powf(nf + 2.0) >= self.abs_tol * 1e-3 {
            lam += 0.5;
        }
        lam
    }

    pub(crate) fn tol(&self) -> QuadTolerance {
        QuadTolerance {
            abs_tol: self.abs_tol,
            rel_tol: self.rel_tol,
            max_evals: self.max_evals,
        }
    }

    pub(crate) fn lambda_breaks(&self, n: usize) -> Vec<f64> {
        let lam = self.cutoff_for(n);
        let k = self.lambda_nodes.max(1);
        (0..=k).map(|i| lam * i as f64 / k as f64).collect()
    }
}

/// `Γ(k/2)` for positive integers `k`, exact closed forms.
pub fn gamma_half(k: u32) -> f64 {
    assert!(k > 0, "Gamma has a pole at 0");
    if k.is_multiple_of(2) {
        (1..k / 2).map(|i| i as f64).product()
    } else {
        // Γ(m + 1/2) = (2m)! √π / (4^m m!)
        let m = (k - 1) / 2;
        let mut v = std::f64::consts::PI.sqrt();
        for i in 0..m {
            v *= i as f64 + 0.5;
        }
        v
    }
}

/// `∫_ℝ sech^m λ dλ = √π Γ(m/2) / Γ((m+1)/2)`.
pub fn sech_integral(m: u32) -> f64 {
    std::f64::consts::PI.sqrt() * gamma_half(m) / gamma_half(m + 1)
}

/// `C₁ = Γ(n) / (8 π^{n+1})`.
pub fn c1(n: usize) -> f64 {
    gamma_half(2 * n as u32) / (8.0 * std::f64::consts::PI.powi(n as i32 + 1))
}

/// Principal `ln cosh z` for `Re z ≥ 0`, stable for large `Re z`.
#[inline]
pub(crate) fn ln_cosh(z: Complex64) -> Complex64 {
    if z.re > 12.0 {
        z - std::f64::consts::LN_2 + (-2.0 * z).exp().ln_1p_c()
    } else {
        z.cosh().ln()
    }
}

trait Ln1p {
    fn ln_1p_c(self) -> Complex64;
}

impl Ln1p for Complex64 {
    fn ln_1p_c(self) -> Complex64 {
        if self.norm() < 1e-4 {
            self - self * self / 2.0 + self * self * self / 3.0
        } else {
            (Complex64::new(1.0, 0.0) + self).ln()
        }
    }
}

/// `(λ coth λ, λ / sinh λ)` with the removable singularity at 0 filled in.
#[inline]
pub(crate) fn lambda_factors(lam: f64) -> (f64, f64) {
    let a = lam.abs();
    if a < 1e-6 {
        let l2 = lam * lam;
        (1.0 + l2 / 3.0, 1.0 - l2 / 6.0)
    } else if a > 700.0 {
        (a, 0.0)
    } else {
        (lam / lam.tanh(), lam / lam.sinh())
    }
}

/// Fast kernel evaluation for operator assembly and scans.
#[derive(Clone, Debug)]
pub enum KernelEvaluator {
    RieszTable(SphereTable),
    SecondOrderT {
        n: usize,
    },
    CauchySzego {
        n: usize,
        c: f64,
    },
    /// Direct Gamma-route quadrature per call.
    SecondOrderXx {
        n: usize,
        j: usize,
        k: usize,
        cfg: QuadratureConfig,
    },
}

impl KernelEvaluator {
    /// Builds (or reuses) whatever tables the kind needs.
    pub fn new(
        spec: &KernelSpec,
        cfg: &QuadratureConfig,
        table_nodes: usize,
        cache: Option<&std::path::Path>,
    ) -> Result<Self> {
        spec.validate()?;
        Ok(match spec.kind {
            KernelKind::Riesz { .. } => KernelEvaluator::RieszTable(SphereTable::load_or_build(
                spec,
                table_nodes,
                cfg,
                cache,
            )?),
            KernelKind::SecondOrderT => KernelEvaluator::SecondOrderT { n: spec.n },
            KernelKind::CauchySzego { c } => KernelEvaluator::CauchySzego { n: spec.n, c },
            KernelKind::SecondOrderXx { j, k } => KernelEvaluator::SecondOrderXx {
                n: spec.n,
                j,
                k,
                cfg: cfg.clone(),
            },
        })
    }

    pub fn n(&self) -> usize {
        match self {
            KernelEvaluator::RieszTable(t) => t.spec.n,
            KernelEvaluator::SecondOrderT { n } => *n,
            KernelEvaluator::CauchySzego { n, .. } => *n,
            KernelEvaluator::SecondOrderXx { n, .. } => *n,
        }
    }

    pub fn is_complex(&self) -> bool {
        matches!(self, KernelEvaluator::CauchySzego { .. })
    }

    /// Kernel at the flat point `[x.., y.., t]`; `g ≠ o`.
    pub fn eval_flat(&self, v: &[f64]) -> Complex64 {
        let n = self.n();
        match self {
            KernelEvaluator::RieszTable(t) => Complex64::new(t.eval_flat(v), 0.0),
            KernelEvaluator::SecondOrderT { .. } => {
                Complex64::new(second_order::closed_form_flat(n, v), 0.0)
            }
            KernelEvaluator::CauchySzego { c, .. } => {
                let r2: f64 = v[..2 * n].iter().map(|a| a * a).sum();
                *c / Complex64::new(r2, v[2 * n]).powi(n as i32 + 1)
            }
            KernelEvaluator::SecondOrderXx { j, k, cfg, .. } => {
                let g = GroupElement::from_flat(v).expect("flat layout");
                Complex64::new(
                    second_order::xx_gamma(*j, *k, &g, cfg).unwrap_or(f64::NAN),
                    0.0,
                )
            }
        }
    }

    /// Identifies the evaluator in artifact hashes.
    pub fn provenance(&self) -> String {
        match self {
            KernelEvaluator::RieszTable(t) => {
                format!("{}_n{}_table_{}", t.spec.label(), t.spec.n, t.build_hash)
            }
            KernelEvaluator::SecondOrderT { n } => format!("second_order_t_n{n}_closed_form"),
            KernelEvaluator::CauchySzego { n, c } => format!("cauchy_szego_n{n}_c{c:e}"),
            KernelEvaluator::SecondOrderXx { n, j, k, cfg } => {
                format!(
                    "second_order_xx_{j}{k}_n{n}_{}",
                    serde_json::to_string(cfg).unwrap_or_default()
                )
            }
        }
    }

    pub fn eval(&self, g: &GroupElement) -> Result<Complex64> {
        if g.is_origin() {
            return Err(Error::AtOrigin);
        }
        Ok(self.eval_flat(&g.to_flat()))
    }

    pub fn eval_real(&self, g: &GroupElement) -> Result<f64> {
        Ok(self.eval(g)?.re)
    }
}

/// Cauchy–Szegő kernel `c / (|z|² + it)^{n+1}`.
pub fn cauchy_szego_kernel(g: &GroupElement, c: f64) -> Result<Complex64> {
    if g.is_origin() {
        return Err(Error::AtOrigin);
    }
    Ok(c / Complex64::new(g.z_norm_sq(), g.t).powi(g.n() as i32 + 1))
}
