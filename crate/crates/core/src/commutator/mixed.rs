//! Mixed norms `‖K_b‖_{L^p, L^{p',∞}}` of the commutator kernel
//! `K_b(g, ĝ) = (b(g) - b(ĝ)) K(ĝ⁻¹ g)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::OperatorMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedNorm {
    pub p: f64,
    /// Inner `L^p` in `g`, outer weak `L^{p'}` in `ĝ`.
    pub mixed: f64,
    /// The same for the adjoint kernel.
    pub adjoint: f64,
}

/// `max_k c_(k) (k μ)^{1/q}` over the decreasing rearrangement.
pub fn weak_lorentz(values: &[f64], mu: f64, q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v.iter()
        .enumerate()
        .map(|(k, c)| c * ((k + 1) as f64 * mu).powf(1.0 / q))
        .fold(0.0, f64::max)
}

pub fn mixed_norm(a: &OperatorMatrix, p: f64) -> Result<MixedNorm> {
    if !(p > 2.0) {
        return Err(Error::Exponent {
            p,
            constraint: "p > 2",
        });
    }
    if a.is_zero() {
        return Ok(MixedNorm {
            p,
            mixed: 0.0,
            adjoint: 0.0,
        });
    }
    let dim = a.dim();
    let mu = a.mu;
    let in_s = a.in_support();
    let all: Vec<usize> = (0..dim).collect();
    let partners = |i: usize| if in_s[i] { &all } else { &a.support };
    // |K_b|^p μ summed in a fixed order.
    let lp = |vals: &mut dyn Iterator<Item = f64>| {
        (vals.map(|v| (v / mu).powf(p)).sum::<f64>() * mu).powf(1.0 / p)
    };
    let cols: Vec<f64> = (0..dim)
        .into_par_iter()
        .map(|j| lp(&mut partners(j).iter().map(|&i| a.entry(i, j).norm())))
        .collect();
    let rows: Vec<f64> = (0..dim)
        .into_par_iter()
        .map(|i| lp(&mut partners(i).iter().map(|&j| a.entry(i, j).norm())))
        .collect();
    let q = p / (p - 1.0);
    Ok(MixedNorm {
        p,
        mixed: weak_lorentz(&cols, mu, q),
        adjoint: weak_lorentz(&rows, mu, q),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weak_lorentz_of_a_step() {
        // c = (2, 1, 1), μ = 1, q = 1: max(2·1, 1·2, 1·3) = 3.
        assert_eq!(weak_lorentz(&[1.0, 2.0, 1.0], 1.0, 1.0), 3.0);
    }
}
