//! Haar functions on tiles: mean-zero, child-constant, L²-normalized.
//!
//! All tiles are congruent, so one orthonormal system on the `M_n` children
//! of a unit-measure tile serves every tile after rescaling by `|T|^{-1/2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tiling::{Region, SymbolGrid, TileId, TileSystem};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarFunction {
    pub tile: TileId,
    /// `1..=M_n - 1`
    pub eps: usize,
    /// Value on each child, in canonical child order.
    pub child_coeffs: Vec<f64>,
}

impl HaarFunction {
    /// `(sum |c_i|^p |child|)^{1/p}`, with `p = inf` allowed.
    pub fn lp_norm(&self, sys: &TileSystem, p: f64) -> f64 {
        if p.is_infinite() {
            return self.child_coeffs.iter().fold(0.0, |m, v| m.max(v.abs()));
        }
        let mu = sys.measure(self.tile.level - 1);
        (self
            .child_coeffs
            .iter()
            .map(|c| c.abs().powf(p))
            .sum::<f64>()
            * mu)
            .powf(1.0 / p)
    }

    pub fn integral(&self, sys: &TileSystem) -> f64 {
        self.child_coeffs.iter().sum::<f64>() * sys.measure(self.tile.level - 1)
    }
}

/// Unit system: rows `u_1..u_{M-1}` orthonormal for the inner product
/// `<u, v> = sum u_i v_i / M` and orthogonal to constants.
#[derive(Clone, Debug)]
pub struct HaarBasis {
    m: usize,
    rows: Vec<Vec<f64>>,
}

impl HaarBasis {
    /// Modified Gram–Schmidt over the differences of normalized child
    /// indicators `M(e_i - e_{i+1})`.
    pub fn new(sys: &TileSystem) -> Self {
        let m = sys.children_count();
        let inner =
            |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / m as f64;
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m - 1);
        for i in 0..m - 1 {
            let mut v = vec![0.0; m];
            v[i] = m as f64;
            v[i + 1] = -(m as f64);
            for r in &rows {
                let c = inner(&v, r);
                v.iter_mut().zip(r).for_each(|(a, b)| *a -= c * b);
            }
            let norm = inner(&v, &v).sqrt();
            v.iter_mut().for_each(|a| *a /= norm);
            rows.push(v);
        }
        Self { m, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn unit_row(&self, eps: usize) -> &[f64] {
        &self.rows[eps - 1]
    }

    /// The `M_n - 1` Haar functions of `t`, which must have children in `region`.
    pub fn build(
        &self,
        sys: &TileSystem,
        region: &Region,
        t: &TileId,
    ) -> Result<Vec<HaarFunction>> {
        region.block(sys, t)?;
        if t.level <= region.fine_level() {
            return Err(Error::NoChildren(t.level));
        }
        let scale = sys.measure(t.level).powf(-0.5);
        Ok((1..self.m)
            .map(|eps| HaarFunction {
                tile: t.clone(),
                eps,
                child_coeffs: self.rows[eps - 1].iter().map(|u| u * scale).collect(),
            })
            .collect())
    }

    /// `<b, h_T^eps>` for all `eps`, from the child averages of `t`.
    pub fn coefficients_from_averages(
        &self,
        sys: &TileSystem,
        level: i32,
        child_avgs: &[f64],
    ) -> Vec<f64> {
        let s = sys.measure(level).sqrt() / self.m as f64;
        self.rows
            .iter()
            .map(|r| r.iter().zip(child_avgs).map(|(u, a)| u * a).sum::<f64>() * s)
            .collect()
    }
}

/// Haar coefficients of a grid, level by level from the root down.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarCoefficients {
    pub region: Region,
    /// Average of `b` over the root tile.
    pub coarse_average: f64,
    /// `levels[k][tile][eps - 1]` for tile level `root.level - k`.
    pub levels: Vec<Vec<Vec<f64>>>,
}

/// Keyed form `(level, base, eps) -> value` used for serialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub level: i32,
    pub z: Vec<i64>,
    pub m: i64,
    pub eps: usize,
    pub value: f64,
}

impl HaarCoefficients {
    pub fn entries(&self, sys: &TileSystem) -> Result<Vec<CoefficientEntry>> {
        let mut out = Vec::new();
        for (k, lev) in self.levels.iter().enumerate() {
            let level = self.region.root.level - k as i32;
            let tiles = self.region.tiles_at(sys, level)?;
            for (t, cs) in tiles.iter().zip(lev) {
                for (e, v) in cs.iter().enumerate() {
                    out.push(CoefficientEntry {
                        level,
                        z: t.z.clone(),
                        m: t.m,
                        eps: e + 1,
                        value: *v,
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn from_entries(
        sys: &TileSystem,
        region: Region,
        coarse_average: f64,
        entries: &[CoefficientEntry],
    ) -> Result<Self> {
        let mm = sys.children_count();
        let mut levels: Vec<Vec<Vec<f64>>> = (0..region.depth)
            .map(|k| vec![vec![0.0; mm - 1]; mm.pow(k)])
            .collect();
        for e in entries {
            let t = TileId {
                level: e.level,
                z: e.z.clone(),
                m: e.m,
            };
            if e.level <= region.fine_level() || e.eps == 0 || e.eps >= mm {
                return Err(Error::Inconsistent(format!(
                    "coefficient at level {} eps {}",
                    e.level, e.eps
                )));
            }
            let k = (region.root.level - e.level) as usize;
            let blk = region.block(sys, &t)?;
            let idx = blk.start / blk.len();
            levels[k][idx][e.eps - 1] = e.value;
        }
        Ok(Self {
            region,
            coarse_average,
            levels,
        })
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.levels.iter().flatten().flatten().map(|c| c * c).sum()
    }
}

pub fn haar_expand(
    sys: &TileSystem,
    basis: &HaarBasis,
    b: &SymbolGrid,
) -> Result<HaarCoefficients> {
    let region = &b.region;
    let root_level = region.root.level;
    let mut levels = Vec::with_capacity(region.depth as usize);
    for k in 0..region.depth as i32 {
        let level = root_level - k;
        let child_avgs = b.level_averages(sys, level - 1)?;
        let per = sys.children_count();
        levels.push(
            child_avgs
                .chunks(per)
                .map(|a| basis.coefficients_from_averages(sys, level, a))
                .collect(),
        );
    }
    let coarse_average = b.values.iter().sum::<f64>() / b.values.len() as f64;
    Ok(HaarCoefficients {
        region: region.clone(),
        coarse_average,
        levels,
    })
}

pub fn haar_reconstruct(
    sys: &TileSystem,
    basis: &HaarBasis,
    c: &HaarCoefficients,
) -> Result<SymbolGrid> {
    let region = &c.region;
    let mm = sys.children_count();
    if c.levels.len() != region.depth as usize {
        return Err(Error::Inconsistent(
            "coefficient levels do not match the region depth".into(),
        ));
    }
    let mut vals = vec![c.coarse_average];
    for (k, lev) in c.levels.iter().enumerate() {
        if lev.len() != vals.len() {
            return Err(Error::Inconsistent(format!(
                "level {k} has {} tiles, expected {}",
                lev.len(),
                vals.len()
            )));
        }
        let level = region.root.level - k as i32;
        let scale = sys.measure(level).powf(-0.5);
        let mut next = Vec::with_capacity(vals.len() * mm);
        for (parent_val, coeffs) in vals.iter().zip(lev) {
            for i in 0..mm {
                let h: f64 = coeffs
                    .iter()
                    .enumerate()
                    .map(|(e, cv)| cv * basis.rows[e][i])
                    .sum();
                next.push(parent_val + h * scale);
            }
        }
        vals = next;
    }
    SymbolGrid::from_values(sys, region.clone(), vals)
}

/// `(eps*, <b, h_T^{eps*}>)` maximizing `|<b, h_T^eps>|`, smallest `eps` on ties.
pub fn select_max_haar(
    sys: &TileSystem,
    basis: &HaarBasis,
    b: &SymbolGrid,
    t: &TileId,
) -> Result<(usize, f64)> {
    if t.level <= b.region.fine_level() {
        return Err(Error::NoChildren(t.level));
    }
    let blk = b.region.block(sys, t)?;
    let per = blk.len() / sys.children_count();
    let avgs: Vec<f64> = b.values[blk]
        .chunks(per)
        .map(|c| c.iter().sum::<f64>() / per as f64)
        .collect();
    let coeffs = basis.coefficients_from_averages(sys, t.level, &avgs);
    let scale = sys.measure(t.level).sqrt() * avgs.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let tie = 1e-12 * scale;
    let mut best = (1, coeffs[0]);
    for (e, c) in coeffs.iter().enumerate().skip(1) {
        if c.abs() > best.1.abs() + tie {
            best = (e + 1, *c);
        }
    }
    Ok(best)
}

/// `(⨍_T |E_{k+1}b - E_k b|^p)^{1/p} / (|T|^{-1/2} |<b, h_T>|)` with `h_T`
/// the maximal Haar function; `None` when the coefficient vanishes.
pub fn oscillation_ratio(
    sys: &TileSystem,
    basis: &HaarBasis,
    b: &SymbolGrid,
    t: &TileId,
    p: f64,
) -> Result<Option<f64>> {
    let (_, c) = select_max_haar(sys, basis, b, t)?;
    let blk = b.region.block(sys, t)?;
    let per = blk.len() / sys.children_count();
    let avgs: Vec<f64> = b.values[blk]
        .chunks(per)
        .map(|c| c.iter().sum::<f64>() / per as f64)
        .collect();
    let mean = avgs.iter().sum::<f64>() / avgs.len() as f64;
    let lhs = (avgs.iter().map(|a| (a - mean).abs().powf(p)).sum::<f64>() / avgs.len() as f64)
        .powf(1.0 / p);
    let rhs = sys.measure(t.level).powf(-0.5) * c.abs();
    Ok(if rhs > 0.0 { Some(lhs / rhs) } else { None })
}
