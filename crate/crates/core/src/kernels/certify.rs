//! Search for partner tiles on which a kernel keeps one sign and stays
//! bounded below at the scale `(2n+1)^{N+j}`.

use serde::{Deserialize, Serialize};

use super::scan::{sphere_grid, sphere_point};
use super::KernelEvaluator;
use crate::group::{left_quotient_flat, GroupElement};
use crate::tiling::{Region, TileId, TileSystem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Partners are searched inside the ancestor `T_{N+A₀}`.
    pub a0: u32,
    /// Per-axis strata for tile samples; `per_axis^{2n+1}` points per tile.
    pub per_axis: usize,
    /// Candidate distances in units of `(2n+1)^{N+j}`.
    pub sigmas: Vec<f64>,
    /// Number of sphere directions tried, strongest kernel values first.
    pub directions: usize,
    /// Minimum of `|K| (2n+1)^{(2n+2)(N+j)}` over the sampled pairs.
    pub threshold: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            a0: 3,
            per_axis: 4,
            sigmas: vec![4.0, 6.0, 8.0, 3.0],
            directions: 64,
            threshold: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub tile: TileId,
    pub big_n: u32,
    pub partner: Option<TileId>,
    pub sign: i8,
    /// The achieved constant `C`.
    pub min_scaled_magnitude: f64,
    pub a0: u32,
    /// Center distance of the pair in units of `(2n+1)^{N+j}`.
    pub distance_ratio: Option<f64>,
    pub candidates_tried: usize,
}

impl Certificate {
    pub fn certified(&self) -> bool {
        self.partner.is_some()
    }
}

/// Unit-sphere directions sorted by decreasing `|K|`.
pub fn ranked_directions(eval: &KernelEvaluator, count: usize) -> Vec<Vec<f64>> {
    let n = eval.n();
    let (_, _, pts) = sphere_grid(4 * count.max(250));
    let mut scored: Vec<(f64, Vec<f64>)> = pts
        .iter()
        .map(|&(phi, theta)| {
            let v = sphere_point(n, phi, theta);
            (eval.eval_flat(&v).re.abs(), v)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored.into_iter().take(count).map(|s| s.1).collect()
}

/// Sign and minimum magnitude of `K(ĝ⁻¹g)` over `g ∈ T`, `ĝ ∈ T̂` samples;
/// sign `0` when the samples disagree.
pub fn pair_sign(
    sys: &TileSystem,
    eval: &KernelEvaluator,
    t: &TileId,
    partner: &TileId,
    per_axis: usize,
) -> (i8, f64) {
    let n = sys.n();
    let gs: Vec<Vec<f64>> = sys
        .sample_points(t, per_axis)
        .iter()
        .map(GroupElement::to_flat)
        .collect();
    let hs: Vec<Vec<f64>> = sys
        .sample_points(partner, per_axis)
        .iter()
        .map(GroupElement::to_flat)
        .collect();
    let mut q = vec![0.0; 2 * n + 1];
    let (mut pos, mut neg) = (false, false);
    let mut min_abs = f64::INFINITY;
    for g in &gs {
        for h in &hs {
            left_quotient_flat(n, h, g, &mut q);
            let k = eval.eval_flat(&q).re;
            pos |= k > 0.0;
            neg |= k <= 0.0;
            min_abs = min_abs.min(k.abs());
        }
    }
    let sign = match (pos, neg) {
        (true, false) => 1,
        (false, true) => -1,
        _ => 0,
    };
    (sign, min_abs)
}

/// Searches partners `T̂` of `t` at the level of `t` inside `T_{N+A₀}`.
/// With `within`, partners must lie in the region; when the directed search
/// fails there, all region tiles at least one width away are tried.
pub fn nondegen_certify(
    sys: &TileSystem,
    eval: &KernelEvaluator,
    t: &TileId,
    big_n: u32,
    cfg: &SearchConfig,
    directions: &[Vec<f64>],
    within: Option<&Region>,
) -> Certificate {
    let n = sys.n();
    let j = t.level;
    let scale = sys.width(j + big_n as i32);
    let boost = scale.powi(2 * n as i32 + 2);
    let anc_level = j + big_n as i32 + cfg.a0 as i32;
    let anc = sys.ancestor(t, anc_level);
    let mut c = vec![0.0; 2 * n + 1];
    sys.center_flat(t, &mut c);
    let mut tried = 0;
    let mut seen: Vec<TileId> = Vec::new();
    for &sigma in &cfg.sigmas {
        for w in directions {
            // ĝ = c_T δ_s(w)^{-1}, so ĝ⁻¹ g ≈ δ_s(w).
            let s = sigma * scale;
            let mut off: Vec<f64> = w.iter().map(|v| -s * v).collect();
            off[2 * n] = -s * s * w[2 * n];
            let p = GroupElement::from_flat(&c)
                .and_then(|cg| cg.multiply(&GroupElement::from_flat(&off)?))
                .expect("flat layout");
            let Ok(cand) = sys.tile_of(&p, j, 1e-9) else {
                continue;
            };
            if cand == *t || seen.contains(&cand) || sys.ancestor(&cand, anc_level) != anc {
                continue;
            }
            if within.is_some_and(|r| r.block(sys, &cand).is_err()) {
                continue;
            }
            seen.push(cand.clone());
            tried += 1;
            let (sign, min_abs) = pair_sign(sys, eval, t, &cand, cfg.per_axis);
            let scaled = min_abs * boost;
            if sign != 0 && scaled > cfg.threshold {
                let mut cc = vec![0.0; 2 * n + 1];
                sys.center_flat(&cand, &mut cc);
                let mut q = vec![0.0; 2 * n + 1];
                left_quotient_flat(n, &cc, &c, &mut q);
                let dist = crate::group::gauge_norm_flat(&q);
                return Certificate {
                    tile: t.clone(),
                    big_n,
                    partner: Some(cand),
                    sign,
                    min_scaled_magnitude: scaled,
                    a0: cfg.a0,
                    distance_ratio: Some(dist / scale),
                    candidates_tried: tried,
                };
            }
        }
    }
    if let Some(region) = within {
        // Every in-region tile of the level, nearest first.
        let mut pool: Vec<(f64, TileId)> = region
            .tiles_at(sys, j)
            .unwrap_or_default()
            .into_iter()
            .filter(|u| u != t && !seen.contains(u) && sys.ancestor(u, anc_level) == anc)
            .map(|u| {
                let mut cc = vec![0.0; 2 * n + 1];
                sys.center_flat(&u, &mut cc);
                let mut q = vec![0.0; 2 * n + 1];
                left_quotient_flat(n, &cc, &c, &mut q);
                (crate::group::gauge_norm_flat(&q) / scale, u)
            })
            .filter(|(d, _)| *d >= 1.0)
            .collect();
        pool.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        for (dist, cand) in pool {
            tried += 1;
            let (sign, min_abs) = pair_sign(sys, eval, t, &cand, cfg.per_axis);
            let scaled = min_abs * boost;
            if sign != 0 && scaled > cfg.threshold {
                return Certificate {
                    tile: t.clone(),
                    big_n,
                    partner: Some(cand),
                    sign,
                    min_scaled_magnitude: scaled,
                    a0: cfg.a0,
                    distance_ratio: Some(dist),
                    candidates_tried: tried,
                };
            }
        }
    }
    Certificate {
        tile: t.clone(),
        big_n,
        partner: None,
        sign: 0,
        min_scaled_magnitude: 0.0,
        a0: cfg.a0,
        distance_ratio: None,
        candidates_tried: tried,
    }
}
