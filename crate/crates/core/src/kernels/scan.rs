//! Sign and zero-set scans on the Koranyi unit sphere.
//!
//! Points are `z = √cos φ (cos θ e_{x1} + sin θ e_{y1})`, `t = sin φ`. In these
//! coordinates the cone measure is `cos^{n-1} φ dφ dθ`, uniform for `n = 1`.
//! For `n > 1` only the `(x₁, y₁)` slice of the z-sphere is visited.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::KernelEvaluator;

pub const MIN_RESOLUTION: usize = 1000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SphereScan {
    pub kernel: String,
    pub n: usize,
    pub n_phi: usize,
    pub n_theta: usize,
    pub threshold: f64,
    /// Measure fraction with `|K| d_K^{2n+2} < threshold`.
    pub zero_fraction: f64,
    pub positive_fraction: f64,
    pub negative_fraction: f64,
    /// Connected components of `{Re K > 0}` and `{Re K < 0}` on the grid graph.
    pub sign_regions: usize,
    pub min_abs: f64,
    pub max_abs: f64,
    /// Fraction of samples where `sign K ≠ sign t` (strict signs only).
    pub sign_mismatch_t: f64,
    /// `Re K` on the grid, row-major `[phi][theta]`.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub values: Vec<f64>,
}

pub fn sphere_point(n: usize, phi: f64, theta: f64) -> Vec<f64> {
    let mut v = vec![0.0; 2 * n + 1];
    let r = phi.cos().max(0.0).sqrt();
    v[0] = r * theta.cos();
    v[n] = r * theta.sin();
    v[2 * n] = phi.sin();
    v
}

/// Grid midpoints `(φ, θ)`.
pub fn sphere_grid(resolution: usize) -> (usize, usize, Vec<(f64, f64)>) {
    let res = resolution.max(MIN_RESOLUTION);
    let n_phi = ((res as f64 / 2.0).sqrt().round() as usize).max(2);
    let n_theta = 2 * n_phi;
    let mut pts = Vec::with_capacity(n_phi * n_theta);
    for i in 0..n_phi {
        let phi =
            -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * (i as f64 + 0.5) / n_phi as f64;
        for k in 0..n_theta {
            pts.push((
                phi,
                std::f64::consts::TAU * (k as f64 + 0.5) / n_theta as f64,
            ));
        }
    }
    (n_phi, n_theta, pts)
}

pub fn sphere_scan(
    eval: &KernelEvaluator,
    label: &str,
    resolution: usize,
    threshold: f64,
    keep_values: bool,
) -> SphereScan {
    let n = eval.n();
    let (n_phi, n_theta, pts) = sphere_grid(resolution);
    let samples: Vec<(f64, f64, f64)> = pts
        .par_iter()
        .map(|&(phi, theta)| {
            let k = eval.eval_flat(&sphere_point(n, phi, theta));
            (k.re, k.norm(), phi.cos().powi(n as i32 - 1))
        })
        .collect();
    let total_w: f64 = samples.iter().map(|s| s.2).sum();
    let (mut zero, mut pos, mut neg, mut mismatch) = (0.0, 0.0, 0.0, 0usize);
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut sign = vec![0i8; samples.len()];
    for (idx, &(re, mag, w)) in samples.iter().enumerate() {
        lo = lo.min(mag);
        hi = hi.max(mag);
        if mag < threshold {
            zero += w;
        } else if re > 0.0 {
            pos += w;
            sign[idx] = 1;
        } else if re < 0.0 {
            neg += w;
            sign[idx] = -1;
        }
        let t = pts[idx].0.sin();
        if sign[idx] != 0 && (sign[idx] as f64) * t < 0.0 {
            mismatch += 1;
        }
    }
    SphereScan {
        kernel: label.to_string(),
        n,
        n_phi,
        n_theta,
        threshold,
        zero_fraction: zero / total_w,
        positive_fraction: pos / total_w,
        negative_fraction: neg / total_w,
        sign_regions: count_regions(&sign, n_phi, n_theta),
        min_abs: lo,
        max_abs: hi,
        sign_mismatch_t: mismatch as f64 / samples.len() as f64,
        values: if keep_values {
            samples.iter().map(|s| s.0).collect()
        } else {
            Vec::new()
        },
    }
}

/// Components of equal nonzero sign; periodic in θ.
fn count_regions(sign: &[i8], n_phi: usize, n_theta: usize) -> usize {
    let mut seen = vec![false; sign.len()];
    let mut regions = 0;
    let mut stack = Vec::new();
    for start in 0..sign.len() {
        if seen[start] || sign[start] == 0 {
            continue;
        }
        regions += 1;
        seen[start] = true;
        stack.push(start);
        while let Some(c) = stack.pop() {
            let (i, k) = (c / n_theta, c % n_theta);
            let mut nb = vec![
                i * n_theta + (k + 1) % n_theta,
                i * n_theta + (k + n_theta - 1) % n_theta,
            ];
            if i > 0 {
                nb.push(c - n_theta);
            }
            if i + 1 < n_phi {
                nb.push(c + n_theta);
            }
            for d in nb {
                if !seen[d] && sign[d] == sign[start] {
                    seen[d] = true;
                    stack.push(d);
                }
            }
        }
    }
    regions
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regions_wrap_in_theta() {
        // Two rows, one positive band crossing the θ seam.
        let sign = [1, 0, 0, 1, 1, 0, 0, 1];
        assert_eq!(count_regions(&sign, 2, 4), 1);
        let sign = [1, -1, 1, -1];
        assert_eq!(count_regions(&sign, 1, 4), 4);
    }
}
