//! Estimators of the homogeneous Besov norm `B^α_{p,p}`, `α = (2n+2)/p` in
//! the experiments, for symbols given on the fine tiles of a region.
//!
//! Off the region a grid symbol takes its base value `β` (the most common
//! grid value), matching the support convention of the commutator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{gauge_norm_flat, left_quotient_flat, GroupElement};
use crate::tiling::{SymbolGrid, TileSystem};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BesovMethod {
    Direct,
    Shell,
    Martingale,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovEstimate {
    pub method: BesovMethod,
    pub p: f64,
    pub alpha: f64,
    pub value: f64,
    /// One standard error on `value` for Monte-Carlo estimates.
    pub errbar: Option<f64>,
    pub params: BesovParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BesovParams {
    /// Tile levels `(lo, hi)` of the window.
    pub levels: (i32, i32),
    /// Contribution to the `p`-th power per level, coarse to fine.
    pub per_level: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub samples_per_shell: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    /// Closed-form contribution of shifts beyond the outermost shell.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tail: Option<f64>,
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(Error::Exponent {
            p,
            constraint: "1 <= p < inf",
        });
    }
    Ok(())
}

/// Default window: one level below the root down to one level above the fine level.
pub fn default_window(b: &SymbolGrid) -> (i32, i32) {
    (b.region.fine_level() + 1, b.region.root.level - 1)
}

fn check_window(b: &SymbolGrid, (lo, hi): (i32, i32)) -> Result<()> {
    if lo > hi {
        return Err(Error::Depth {
            depth: b.region.depth,
            need: "a nonempty level window",
        });
    }
    if lo - 1 < b.region.fine_level() || hi > b.region.root.level {
        return Err(Error::Depth {
            depth: b.region.depth,
            need: "one level below the window",
        });
    }
    Ok(())
}

fn support(b: &SymbolGrid) -> (f64, Vec<usize>) {
    let beta = crate::commutator::base_value(&b.values);
    (
        beta,
        (0..b.values.len())
            .filter(|&i| b.values[i] != beta)
            .collect(),
    )
}

/// `(Σ_j λ^{-Qj} ‖E_{j-1} b - E_j b‖_p^p)^{1/p}` over tile levels `j` of the window.
pub fn besov_martingale(
    sys: &TileSystem,
    b: &SymbolGrid,
    p: f64,
    window: Option<(i32, i32)>,
) -> Result<BesovEstimate> {
    check_p(p)?;
    let (lo, hi) = window.unwrap_or_else(|| default_window(b));
    check_window(b, (lo, hi))?;
    let q = sys.q();
    let lam = sys.lambda() as f64;
    let mu = b.cell_measure(sys);
    let mut per_level = Vec::new();
    for j in (lo..=hi).rev() {
        let fine = b.conditional_expectation(sys, j - 1)?;
        let coarse = b.conditional_expectation(sys, j)?;
        let s: f64 = fine
            .values
            .iter()
            .zip(&coarse.values)
            .map(|(a, c)| (a - c).abs().powf(p))
            .sum::<f64>()
            * mu;
        per_level.push(lam.powf(-q * j as f64) * s);
    }
    let total: f64 = per_level.iter().sum();
    Ok(BesovEstimate {
        method: BesovMethod::Martingale,
        p,
        alpha: q / p,
        value: total.powf(1.0 / p),
        errbar: None,
        params: BesovParams {
            levels: (lo, hi),
            per_level,
            samples_per_shell: None,
            seed: None,
            tail: None,
        },
    })
}

/// `(Σ_j λ^{-2Qj} Σ_{d(T,T') ≤ width(j-1)} |b_T - b_{T'}|^p μ²)^{1/p}` over ordered
/// pairs of fine tiles.
pub fn besov_shell(
    sys: &TileSystem,
    b: &SymbolGrid,
    p: f64,
    window: Option<(i32, i32)>,
) -> Result<BesovEstimate> {
    check_p(p)?;
    let (lo, hi) = window.unwrap_or_else(|| default_window(b));
    check_window(b, (lo, hi))?;
    let n = sys.n();
    let k = 2 * n + 1;
    let q = sys.q();
    let lam = sys.lambda() as f64;
    let mu = b.cell_measure(sys);
    let centers = b.region.fine_centers(sys);
    let (_, supp) = support(b);
    let mut in_s = vec![false; b.values.len()];
    supp.iter().for_each(|&i| in_s[i] = true);
    let mut per_level = Vec::new();
    for j in (lo..=hi).rev() {
        let r = sys.width(j - 1) * (1.0 + 1e-9);
        // Ordered pairs with i in the support, plus the mirror of (i ∈ S, j ∉ S).
        let s: f64 = supp
            .par_iter()
            .map(|&i| {
                let mut qv = vec![0.0; k];
                let ci = &centers[i * k..(i + 1) * k];
                let mut acc = 0.0;
                for m in 0..b.values.len() {
                    if m == i {
                        continue;
                    }
                    left_quotient_flat(n, &centers[m * k..(m + 1) * k], ci, &mut qv);
                    if gauge_norm_flat(&qv) <= r {
                        let d = (b.values[i] - b.values[m]).abs().powf(p);
                        acc += if in_s[m] { d } else { 2.0 * d };
                    }
                }
                acc
            })
            .collect::<Vec<f64>>()
            .iter()
            .sum();
        per_level.push(lam.powf(-2.0 * q * j as f64) * s * mu * mu);
    }
    let total: f64 = per_level.iter().sum();
    Ok(BesovEstimate {
        method: BesovMethod::Shell,
        p,
        alpha: q / p,
        value: total.powf(1.0 / p),
        errbar: None,
        params: BesovParams {
            levels: (lo, hi),
            per_level,
            samples_per_shell: None,
            seed: None,
            tail: None,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DirectConfig {
    pub samples_per_shell: usize,
    /// Shell levels `(lo, hi)`: `ρ(g) ∈ [width(j-1), width(j))`. Defaults to
    /// one level above the fine level up to two levels above the root.
    pub shells: Option<(i32, i32)>,
    /// Largest admissible relative error bar.
    pub max_rel_error: f64,
}

impl Default for DirectConfig {
    fn default() -> Self {
        Self {
            samples_per_shell: 200,
            shells: None,
            max_rel_error: 0.2,
        }
    }
}

/// Measure of `{ρ ≤ 1}`: `2 ω_{2n}` with `ω_{2n} = π^n / n!`.
pub fn rho_ball_measure(n: usize) -> f64 {
    let fact: f64 = (1..=n).map(|i| i as f64).product();
    2.0 * std::f64::consts::PI.powi(n as i32) / fact
}

/// Uniform point of `{r_in ≤ ρ < r_out}` by rejection from the outer cylinder.
fn shell_point(rng: &mut ChaCha8Rng, n: usize, r_in: f64, r_out: f64) -> Vec<f64> {
    loop {
        let mut v = vec![0.0; 2 * n + 1];
        for c in v.iter_mut().take(2 * n) {
            *c = rng.random_range(-r_out..r_out);
        }
        let r2: f64 = v[..2 * n].iter().map(|a| a * a).sum();
        if r2 >= r_out * r_out {
            continue;
        }
        v[2 * n] = rng.random_range(-r_out * r_out..r_out * r_out);
        let rho = r2.sqrt().max(v[2 * n].abs().sqrt());
        if rho >= r_in {
            return v;
        }
    }
}

/// Monte-Carlo estimate of `(∫ ‖b(g·) - b‖_p^p ρ(g)^{-Q-pα} dg)^{1/p}`, with the
/// inner norm summed on the grid.
pub fn besov_direct(
    sys: &TileSystem,
    b: &SymbolGrid,
    p: f64,
    alpha: f64,
    cfg: &DirectConfig,
    seed: u64,
) -> Result<BesovEstimate> {
    check_p(p)?;
    if !(alpha > 0.0) {
        return Err(Error::Exponent {
            p: alpha,
            constraint: "alpha > 0",
        });
    }
    let region = &b.region;
    let (lo, hi) = cfg
        .shells
        .unwrap_or((region.fine_level() + 1, region.root.level + 2));
    if hi - lo + 1 < 3 {
        return Err(Error::Config(
            "the direct estimator needs at least 3 shells".into(),
        ));
    }
    if cfg.samples_per_shell < 2 {
        return Err(Error::Config("at least 2 samples per shell".into()));
    }
    let n = sys.n();
    let k = 2 * n + 1;
    let q = sys.q();
    let expo = q + p * alpha;
    let mu = b.cell_measure(sys);
    let centers = region.fine_centers(sys);
    let (beta, supp) = support(b);
    let mut in_s = vec![false; b.values.len()];
    supp.iter().for_each(|&i| in_s[i] = true);
    let lookup = |pt: &[f64]| -> Result<(f64, bool)> {
        Ok(match region.locate_flat(sys, pt, 1e-9)? {
            Some(i) => (b.values[i], in_s[i]),
            None => (beta, false),
        })
    };
    // ‖b(g·) - b‖_p^p: pairs (x, gx) with x ∈ S, then gx ∈ S with x ∉ S.
    let inner = |g: &[f64]| -> Result<f64> {
        let gel = GroupElement::from_flat(g)?;
        let ginv = gel.inverse();
        let mut acc = 0.0;
        for &i in &supp {
            let x = GroupElement::from_flat(&centers[i * k..(i + 1) * k])?;
            let (v, _) = lookup(&gel.multiply(&x)?.to_flat())?;
            acc += (v - b.values[i]).abs().powf(p);
            let (_, pre_in_s) = lookup(&ginv.multiply(&x)?.to_flat())?;
            if !pre_in_s {
                acc += (b.values[i] - beta).abs().powf(p);
            }
        }
        Ok(acc * mu)
    };
    let c_rho = rho_ball_measure(n);
    let mut per_level = Vec::new();
    let (mut total, mut var) = (0.0, 0.0);
    for (s_idx, j) in (lo..=hi).rev().enumerate() {
        let (r_in, r_out) = (sys.width(j - 1), sys.width(j));
        let mut rng = ChaCha8Rng::seed_from_u64(
            seed.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(s_idx as u64 + 1)),
        );
        let pts: Vec<Vec<f64>> = (0..cfg.samples_per_shell)
            .map(|_| shell_point(&mut rng, n, r_in, r_out))
            .collect();
        let vals: Vec<f64> = pts
            .par_iter()
            .map(|g| {
                let rho = gauge_rho(g, n);
                Ok(inner(g)? * rho.powf(-expo))
            })
            .collect::<Result<_>>()?;
        let m = cfg.samples_per_shell as f64;
        let mean = vals.iter().sum::<f64>() / m;
        let sd2 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let vol = c_rho * (r_out.powf(q) - r_in.powf(q));
        per_level.push(vol * mean);
        total += vol * mean;
        var += vol * vol * sd2 / m;
    }
    // Beyond the outer shell the translate misses the support.
    let r_max = sys.width(hi);
    let norm_p: f64 = supp
        .iter()
        .map(|&i| (b.values[i] - beta).abs().powf(p))
        .sum::<f64>()
        * mu;
    let tail = 2.0 * norm_p * c_rho * q * r_max.powf(q - expo) / (expo - q);
    total += tail;
    let value = total.powf(1.0 / p);
    let rel = if total > 0.0 {
        var.sqrt() / total / p
    } else {
        0.0
    };
    if rel > cfg.max_rel_error {
        return Err(Error::InsufficientSamples { rel });
    }
    Ok(BesovEstimate {
        method: BesovMethod::Direct,
        p,
        alpha,
        value,
        errbar: Some(rel * value),
        params: BesovParams {
            levels: (lo, hi),
            per_level,
            samples_per_shell: Some(cfg.samples_per_shell),
            seed: Some(seed),
            tail: Some(tail),
        },
    })
}

fn gauge_rho(v: &[f64], n: usize) -> f64 {
    let r2: f64 = v[..2 * n].iter().map(|a| a * a).sum();
    r2.sqrt().max(v[2 * n].abs().sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rho_ball_measure_by_sampling() {
        // {|z| ≤ 1, |t| ≤ 1} in H¹: π · 2.
        assert!((rho_ball_measure(1) - 2.0 * std::f64::consts::PI).abs() < 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let v = shell_point(&mut rng, 1, 0.5, 1.0);
            let r = gauge_rho(&v, 1);
            assert!((0.5..1.0).contains(&r));
        }
    }
}
