//! Oscillation profiles of `E_{k+B₀} b` over tiles and the subtile sign witness.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tiling::{SymbolGrid, TileId, TileSystem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OscillationProfile {
    pub b0: u32,
    /// Tile levels, coarse to fine.
    pub levels: Vec<i32>,
    /// `Σ_T (⨍_T ⨍_T |E b(g') - E b(g'')|)^{2n+2}` per level.
    pub per_level: Vec<f64>,
    pub cumulative: Vec<f64>,
}

/// `(1/m²) Σ_{i,i'} |a_i - a_{i'}|` through the sorted order.
pub fn mean_abs_difference(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len() as f64;
    let s: f64 = v
        .iter()
        .enumerate()
        .map(|(i, a)| a * (2.0 * i as f64 - m + 1.0))
        .sum();
    2.0 * s / (m * m)
}

/// Tile levels `hi` down to `lo`; the default window is the root down to
/// `fine + B₀`.
pub fn oscillation_profile(
    sys: &TileSystem,
    b: &SymbolGrid,
    b0: u32,
    window: Option<(i32, i32)>,
) -> Result<OscillationProfile> {
    if b0 == 0 {
        return Err(Error::Config("B0 must be positive".into()));
    }
    let region = &b.region;
    if region.depth < b0 {
        return Err(Error::Depth {
            depth: region.depth,
            need: "B0 levels below the window",
        });
    }
    let (lo, hi) = window.unwrap_or((region.fine_level() + b0 as i32, region.root.level));
    if lo - (b0 as i32) < region.fine_level() || hi > region.root.level || lo > hi {
        return Err(Error::Depth {
            depth: region.depth,
            need: "the window plus B0 levels",
        });
    }
    let m = sys.children_count().pow(b0);
    let q = 2 * sys.n() as i32 + 2;
    let mut levels = Vec::new();
    let mut per_level = Vec::new();
    for k in (lo..=hi).rev() {
        let avgs = b.level_averages(sys, k - b0 as i32)?;
        let s: f64 = avgs.chunks(m).map(|c| mean_abs_difference(c).powi(q)).sum();
        levels.push(k);
        per_level.push(s);
    }
    let cumulative = per_level
        .iter()
        .scan(0.0, |acc, v| {
            *acc += v;
            Some(*acc)
        })
        .collect();
    Ok(OscillationProfile {
        b0,
        levels,
        per_level,
        cumulative,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignWitness {
    pub tile: TileId,
    pub patterns: usize,
    pub found: usize,
    /// Depth at which each pattern was first separated, `None` if not within `B₀`.
    pub depths: Vec<Option<u32>>,
    /// Smallest separation `min_j a_j (g_j - h_j)` in units of `width(T)`.
    pub min_margin: f64,
}

impl SignWitness {
    pub fn complete(&self) -> bool {
        self.found == self.patterns
    }
}

/// z-box `[lo, hi]` per coordinate; a tile's z-projection is a cube.
fn z_box(sys: &TileSystem, t: &TileId) -> Vec<(f64, f64)> {
    let s = sys.width(t.level);
    t.z.iter()
        .map(|&z| (s * (z as f64 - 0.5), s * (z as f64 + 0.5)))
        .collect()
}

/// For every sign pattern `a ∈ {±1}^{2n}`, searches subtiles `T', T'' ⊂ T`
/// with `a_j (g_j - h_j) > 0` for all `g ∈ T''`, `h ∈ T'`, depth 1 to `B₀`.
pub fn sign_pattern_witness(sys: &TileSystem, t: &TileId, b0: u32) -> SignWitness {
    let dims = 2 * sys.n();
    let patterns = 1usize << dims;
    let width = sys.width(t.level);
    let mut depths = vec![None; patterns];
    let mut margins = vec![f64::NEG_INFINITY; patterns];
    let mut layer = vec![t.clone()];
    for d in 1..=b0 {
        layer = layer.iter().flat_map(|u| sys.children(u)).collect();
        let boxes: Vec<Vec<(f64, f64)>> = layer.iter().map(|u| z_box(sys, u)).collect();
        for (pat, depth) in depths.iter_mut().enumerate() {
            if depth.is_some() {
                continue;
            }
            let sign = |j: usize| if pat >> j & 1 == 0 { 1.0 } else { -1.0 };
            let mut best = f64::NEG_INFINITY;
            for g in &boxes {
                for h in &boxes {
                    let mut m = f64::INFINITY;
                    for j in 0..dims {
                        let sep = if sign(j) > 0.0 {
                            g[j].0 - h[j].1
                        } else {
                            h[j].0 - g[j].1
                        };
                        m = m.min(sep);
                    }
                    best = best.max(m);
                }
            }
            if best > 0.0 {
                *depth = Some(d);
                margins[pat] = best / width;
            }
        }
        if depths.iter().all(Option::is_some) {
            break;
        }
    }
    let found = depths.iter().filter(|d| d.is_some()).count();
    let min_margin = if found == patterns {
        margins.iter().copied().fold(f64::INFINITY, f64::min)
    } else {
        0.0
    };
    SignWitness {
        tile: t.clone(),
        patterns,
        found,
        depths,
        min_margin,
    }
}
