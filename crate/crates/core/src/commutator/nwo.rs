//! Sums `Σ_T Σ_s |⟨A e_T, f_T⟩|^p` over nearly weakly orthogonal families.
//!
//! For a tile `T` with certified partner `T̂` and `α = median of b on T̂`:
//! `E₁ = {b < α} ∩ T`, `E₂ = {b > α} ∩ T`, `F₁ = {b ≥ α} ∩ T̂`, `F₂ = {b ≤ α} ∩ T̂`,
//! `e_T = |T|^{-1/2} χ_{F_s}` and `f_T = |T|^{-1/2} χ_{E_s}`. On `E_s × F_s`
//! the factor `b(g) - b(ĝ)` has one sign, so each term is a sum without
//! cancellation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::OperatorMatrix;
use crate::error::{Error, Result};
use crate::kernels::certify::ranked_directions;
use crate::kernels::{nondegen_certify, SearchConfig};
use crate::tiling::{TileId, TileSystem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NwoTerm {
    pub tile: TileId,
    pub partner: TileId,
    pub s: u8,
    pub median: f64,
    /// `|⟨A e_T, f_T⟩|`.
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NwoReport {
    pub p: f64,
    pub level: i32,
    pub value: f64,
    pub tiles: usize,
    pub skipped: usize,
    pub skipped_fraction: f64,
    pub terms: Vec<NwoTerm>,
}

pub fn nwo_sum(
    sys: &TileSystem,
    a: &OperatorMatrix,
    p: f64,
    level: i32,
    search: &SearchConfig,
) -> Result<NwoReport> {
    if !(p > 0.0) {
        return Err(Error::Exponent {
            p,
            constraint: "p > 0",
        });
    }
    let region = &a.region;
    region.check_level(level)?;
    if level == region.fine_level() {
        return Err(Error::NoChildren(level));
    }
    let tiles = region.tiles_at(sys, level)?;
    let eval = a.evaluator();
    let dirs = ranked_directions(eval, search.directions);
    let measure = sys.measure(level);
    let b = &a.symbol.values;
    let per_tile: Vec<Result<Option<Vec<NwoTerm>>>> = tiles
        .par_iter()
        .map(|t| {
            let cert = nondegen_certify(sys, eval, t, 0, search, &dirs, Some(region));
            let Some(partner) = cert.partner else {
                return Ok(None);
            };
            let alpha = a.symbol.median_on_tile(sys, &partner)?;
            let rt = region.block(sys, t)?;
            let rp = region.block(sys, &partner)?;
            let mut out = Vec::with_capacity(2);
            for s in [1u8, 2] {
                let e: Vec<usize> = rt
                    .clone()
                    .filter(|&i| if s == 1 { b[i] < alpha } else { b[i] > alpha })
                    .collect();
                let f: Vec<usize> = rp
                    .clone()
                    .filter(|&j| if s == 1 { b[j] >= alpha } else { b[j] <= alpha })
                    .collect();
                let mut acc = num_complex::Complex64::new(0.0, 0.0);
                for &i in &e {
                    for v in a.row_values(i, &f) {
                        acc += v;
                    }
                }
                out.push(NwoTerm {
                    tile: t.clone(),
                    partner: partner.clone(),
                    s,
                    median: alpha,
                    value: acc.norm() * a.mu / measure,
                });
            }
            Ok(Some(out))
        })
        .collect();
    let mut terms = Vec::new();
    let mut skipped = 0;
    for r in per_tile {
        match r? {
            Some(t) => terms.extend(t),
            None => skipped += 1,
        }
    }
    let value = terms
        .iter()
        .map(|t| t.value.powf(p))
        .sum::<f64>()
        .powf(1.0 / p);
    Ok(NwoReport {
        p,
        level,
        value,
        tiles: tiles.len(),
        skipped,
        skipped_fraction: skipped as f64 / tiles.len() as f64,
        terms,
    })
}
