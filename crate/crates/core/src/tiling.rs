//! Self-similar tiles of the Heisenberg group.
//!
//! The basic tile is `T_o = {(z,t) : z in [-1/2,1/2)^{2n}, f(z) - 1/(2n) <= t < f(z)}`
//! where `f` is the unique solution of the refinement equation induced by
//! `δ_λ(T_o) = ∪_{e∈Δ} e·T_o`, `λ = 2n+1`:
//!
//! `f(z) = (n + 1 + ω(d, w) + f(w)) / λ²`, with `λz = d + w`, `d` integer,
//! `w ∈ [-1/2,1/2)^{2n}` and `ω(a, b) = 2(<a_y, b_x> - <a_x, b_y>)`.
//!
//! A tile at level `j` is `δ_{λ^j}(b·T_o)` with `b = (d, m/(2n))` in the
//! integer lattice; [`TileId`] stores `j`, the integer z-coordinates `d` and
//! the integer `m`.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupElement, Symbol};

/// Largest supported `n` (keeps hot loops on the stack).
pub const MAX_N: usize = 8;

/// Default tolerance for [`TileSystem::boundary_f`].
pub const F_TOL: f64 = 1e-14;

/// Default boundary tolerance for membership, relative to tile height.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TileId {
    pub level: i32,
    /// Integer z-coordinates of the base point, `[x_1..x_n, y_1..y_n]`.
    pub z: Vec<i64>,
    /// t-coordinate of the base point in units of `1/(2n)`.
    pub m: i64,
}

impl TileId {
    pub fn basic(n: usize) -> Self {
        TileId {
            level: 0,
            z: vec![0; 2 * n],
            m: 0,
        }
    }

    pub fn n(&self) -> usize {
        self.z.len() / 2
    }

    /// The same lattice base at another level, i.e. a dilate of this tile.
    pub fn at_level(&self, level: i32) -> Self {
        TileId {
            level,
            z: self.z.clone(),
            m: self.m,
        }
    }
}

#[inline]
fn omega_f(n: usize, a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        s += a[n + i] * b[i] - a[i] * b[n + i];
    }
    2.0 * s
}

#[inline]
fn omega_i(n: usize, a: &[i64], b: &[i64]) -> i64 {
    let mut s = 0;
    for i in 0..n {
        s += a[n + i] * b[i] - a[i] * b[n + i];
    }
    2 * s
}

#[derive(Clone, Debug)]
pub struct TileSystem {
    n: usize,
    lambda: i64,
    lambda2: i64,
    two_n: i64,
    children: usize,
    f_digits: usize,
    /// `f` is approximated by the mean `1/(4n)` past the last digit.
    f_tail: f64,
}

impl TileSystem {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > MAX_N {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: n,
            });
        }
        let lambda = 2 * n as i64 + 1;
        let lambda2 = lambda * lambda;
        let children = (lambda as usize).pow(2 * n as u32 + 2);
        let f_digits = digits_for(lambda2 as f64, F_TOL);
        Ok(Self {
            n,
            lambda,
            lambda2,
            two_n: 2 * n as i64,
            children,
            f_digits,
            f_tail: 1.0 / (4.0 * n as f64),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `λ = 2n + 1`.
    pub fn lambda(&self) -> i64 {
        self.lambda
    }

    /// `M_n = λ^{2n+2}`, the number of children of every tile.
    pub fn children_count(&self) -> usize {
        self.children
    }

    /// Homogeneous dimension `Q = 2n + 2`.
    pub fn q(&self) -> f64 {
        (2 * self.n + 2) as f64
    }

    pub fn width(&self, level: i32) -> f64 {
        (self.lambda as f64).powi(level)
    }

    pub fn height(&self, level: i32) -> f64 {
        (self.lambda2 as f64).powi(level) / self.two_n as f64
    }

    pub fn measure(&self, level: i32) -> f64 {
        (self.lambda as f64).powi((2 * self.n as i32 + 2) * level) / self.two_n as f64
    }

    /// `f(z)` to within `tol`.
    pub fn boundary_f(&self, z: &[f64], tol: f64) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::InvalidTolerance(tol));
        }
        if z.len() != 2 * self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: z.len() / 2,
            });
        }
        if z.iter().any(|&c| !(-0.5..0.5).contains(&c)) {
            return Err(Error::OutsideCube);
        }
        let k = digits_for(self.lambda2 as f64, tol).max(1);
        Ok(self.f_with_digits(z, k))
    }

    #[inline]
    fn f_with_digits(&self, z: &[f64], digits: usize) -> f64 {
        let n = self.n;
        let lam = self.lambda as f64;
        let inv_l2 = 1.0 / self.lambda2 as f64;
        let mut w = [0.0f64; 2 * MAX_N];
        let mut d = [0.0f64; 2 * MAX_N];
        w[..2 * n].copy_from_slice(z);
        let mut acc = 0.0;
        let mut scale = inv_l2;
        for _ in 0..digits {
            for c in 0..2 * n {
                let big = lam * w[c];
                let dc = (big + 0.5).floor();
                d[c] = dc;
                w[c] = big - dc;
            }
            acc += scale * (n as f64 + 1.0 + omega_f(n, &d[..2 * n], &w[..2 * n]));
            scale *= inv_l2;
        }
        acc + scale * self.lambda2 as f64 * self.f_tail
    }

    #[inline]
    pub(crate) fn f_fast(&self, z: &[f64]) -> f64 {
        self.f_with_digits(z, self.f_digits)
    }

    pub fn center(&self, t: &TileId) -> GroupElement {
        let n = self.n;
        let s = self.width(t.level);
        GroupElement {
            x: t.z[..n].iter().map(|&v| s * v as f64).collect(),
            y: t.z[n..].iter().map(|&v| s * v as f64).collect(),
            t: s * s * t.m as f64 / self.two_n as f64,
        }
    }

    /// Flat center coordinates `[x.., y.., t]` written into `out`.
    pub fn center_flat(&self, t: &TileId, out: &mut [f64]) {
        let s = self.width(t.level);
        for (o, &v) in out.iter_mut().zip(&t.z) {
            *o = s * v as f64;
        }
        out[2 * self.n] = s * s * t.m as f64 / self.two_n as f64;
    }

    /// The tile of level `level` containing `g`. Points whose t-coordinate
    /// lies within `rel_tol` tile heights of the fractal boundary are refused.
    pub fn tile_of(&self, g: &GroupElement, level: i32, rel_tol: f64) -> Result<TileId> {
        if g.n() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: g.n(),
            });
        }
        let mut flat = [0.0f64; 2 * MAX_N + 1];
        flat[..self.n].copy_from_slice(&g.x);
        flat[self.n..2 * self.n].copy_from_slice(&g.y);
        flat[2 * self.n] = g.t;
        self.tile_of_flat(&flat[..2 * self.n + 1], level, rel_tol)
    }

    pub fn tile_of_flat(&self, g: &[f64], level: i32, rel_tol: f64) -> Result<TileId> {
        let n = self.n;
        let s = 1.0 / self.width(level);
        let mut z = [0.0f64; 2 * MAX_N];
        let mut d = [0.0f64; 2 * MAX_N];
        let mut w = [0.0f64; 2 * MAX_N];
        for c in 0..2 * n {
            z[c] = g[c] * s;
            d[c] = (z[c] + 0.5).floor();
            w[c] = z[c] - d[c];
        }
        let tau = g[2 * n] * s * s;
        let f = self.f_fast(&w[..2 * n]);
        let u = self.two_n as f64 * (tau - omega_f(n, &d[..2 * n], &w[..2 * n]) - f);
        let dist = (u - u.round()).abs();
        if dist < rel_tol {
            return Err(Error::Boundary {
                level,
                distance: dist * self.height(level),
            });
        }
        Ok(TileId {
            level,
            z: d[..2 * n].iter().map(|&v| v as i64).collect(),
            m: u.floor() as i64 + 1,
        })
    }

    pub fn contains(&self, t: &TileId, g: &GroupElement, rel_tol: f64) -> Result<bool> {
        Ok(self.tile_of(g, t.level, rel_tol)? == *t)
    }

    /// Child with canonical index `idx`; the order is lexicographic on the
    /// z-digits (each in `-n..=n`), then on the t-digit.
    pub fn child(&self, t: &TileId, idx: usize) -> TileId {
        let n = self.n;
        let l2 = self.lambda2 as usize;
        let half_t = self.two_n * (n as i64 + 1);
        let m_e = (idx % l2) as i64 - half_t;
        let mut rest = idx / l2;
        let mut e = vec![0i64; 2 * n];
        for c in (0..2 * n).rev() {
            e[c] = (rest % self.lambda as usize) as i64 - n as i64;
            rest /= self.lambda as usize;
        }
        let scaled: Vec<i64> = t.z.iter().map(|&v| self.lambda * v).collect();
        let m = self.lambda2 * t.m + m_e + self.two_n * omega_i(n, &scaled, &e);
        let z = scaled.iter().zip(&e).map(|(a, b)| a + b).collect();
        TileId {
            level: t.level - 1,
            z,
            m,
        }
    }

    pub fn children(&self, t: &TileId) -> Vec<TileId> {
        (0..self.children).map(|i| self.child(t, i)).collect()
    }

    /// Parent tile and the canonical index of `t` among its children.
    pub fn parent_with_index(&self, t: &TileId) -> (TileId, usize) {
        let n = self.n;
        let mut d = vec![0i64; 2 * n];
        let mut e = vec![0i64; 2 * n];
        let mut zidx = 0usize;
        for c in 0..2 * n {
            d[c] = (t.z[c] + n as i64).div_euclid(self.lambda);
            e[c] = t.z[c] - self.lambda * d[c];
            zidx = zidx * self.lambda as usize + (e[c] + n as i64) as usize;
        }
        let scaled: Vec<i64> = d.iter().map(|&v| self.lambda * v).collect();
        let half_t = self.two_n * (n as i64 + 1);
        let shifted = t.m - self.two_n * omega_i(n, &scaled, &e) + half_t;
        let m = shifted.div_euclid(self.lambda2);
        let tdig = shifted - self.lambda2 * m;
        let idx = zidx * self.lambda2 as usize + tdig as usize;
        (
            TileId {
                level: t.level + 1,
                z: d,
                m,
            },
            idx,
        )
    }

    pub fn parent(&self, t: &TileId) -> TileId {
        self.parent_with_index(t).0
    }

    pub fn ancestor(&self, t: &TileId, level: i32) -> TileId {
        let mut a = t.clone();
        while a.level < level {
            a = self.parent(&a);
        }
        a
    }

    /// Stratified points inside `t`: `per_axis` strata in each z-coordinate
    /// and in the t-fiber, `per_axis^{2n+1}` points in total. All lie
    /// strictly inside the tile.
    pub fn sample_points(&self, t: &TileId, per_axis: usize) -> Vec<GroupElement> {
        let n = self.n;
        let q = per_axis.max(1);
        let total_z = q.pow(2 * n as u32);
        let mut out = Vec::with_capacity(total_z * q);
        let mut w = vec![0.0; 2 * n];
        for zi in 0..total_z {
            let mut r = zi;
            for c in (0..2 * n).rev() {
                w[c] = -0.5 + ((r % q) as f64 + 0.5) / q as f64;
                r /= q;
            }
            let f = self.f_fast(&w);
            for ti in 0..q {
                let s = (ti as f64 + 0.5) / q as f64;
                out.push(self.from_unit(t, &w, f - s / self.two_n as f64));
            }
        }
        out
    }

    /// Maps a point `(w, tau)` of the basic tile into tile `t`.
    pub fn from_unit(&self, t: &TileId, w: &[f64], tau: f64) -> GroupElement {
        let n = self.n;
        let base: Vec<f64> = t.z.iter().map(|&v| v as f64).collect();
        let tt = t.m as f64 / self.two_n as f64 + tau + omega_f(n, &base, w);
        let s = self.width(t.level);
        GroupElement {
            x: (0..n).map(|i| s * (base[i] + w[i])).collect(),
            y: (0..n).map(|i| s * (base[n + i] + w[n + i])).collect(),
            t: s * s * tt,
        }
    }
}

fn digits_for(lambda2: f64, tol: f64) -> usize {
    ((0.5 / tol).ln() / lambda2.ln()).ceil().max(1.0) as usize
}

/// A root tile and all of its descendants down to `depth` levels below.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub root: TileId,
    pub depth: u32,
}

impl Region {
    pub fn new(root: TileId, depth: u32) -> Self {
        Self { root, depth }
    }

    pub fn fine_level(&self) -> i32 {
        self.root.level - self.depth as i32
    }

    pub fn len(&self, sys: &TileSystem) -> usize {
        sys.children_count().pow(self.depth)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Tiles of the region at `level`, in canonical order.
    pub fn tiles_at(&self, sys: &TileSystem, level: i32) -> Result<Vec<TileId>> {
        self.check_level(level)?;
        let mut cur = vec![self.root.clone()];
        for _ in level..self.root.level {
            cur = cur.iter().flat_map(|t| sys.children(t)).collect();
        }
        Ok(cur)
    }

    pub fn fine_tiles(&self, sys: &TileSystem) -> Vec<TileId> {
        self.tiles_at(sys, self.fine_level())
            .expect("fine level is in range")
    }

    /// Flat centers of the fine tiles, `2n+1` values per tile.
    pub fn fine_centers(&self, sys: &TileSystem) -> Vec<f64> {
        let k = 2 * sys.n() + 1;
        let tiles = self.fine_tiles(sys);
        let mut out = vec![0.0; tiles.len() * k];
        for (i, t) in tiles.iter().enumerate() {
            sys.center_flat(t, &mut out[i * k..(i + 1) * k]);
        }
        out
    }

    pub fn check_level(&self, level: i32) -> Result<()> {
        if level < self.fine_level() || level > self.root.level {
            return Err(Error::LevelOutOfRange {
                level,
                lo: self.fine_level(),
                hi: self.root.level,
            });
        }
        Ok(())
    }

    /// Range of fine-tile indices covered by `t`.
    pub fn block(&self, sys: &TileSystem, t: &TileId) -> Result<Range<usize>> {
        self.check_level(t.level)?;
        let mut idx = 0usize;
        let mut mult = 1usize;
        let mut cur = t.clone();
        while cur.level < self.root.level {
            let (p, i) = sys.parent_with_index(&cur);
            idx += i * mult;
            mult *= sys.children_count();
            cur = p;
        }
        if cur != self.root {
            return Err(Error::NotInRegion);
        }
        let size = sys
            .children_count()
            .pow((t.level - self.fine_level()) as u32);
        Ok(idx * size..(idx + 1) * size)
    }

    pub fn index_of(&self, sys: &TileSystem, t: &TileId) -> Result<usize> {
        if t.level != self.fine_level() {
            return Err(Error::LevelOutOfRange {
                level: t.level,
                lo: self.fine_level(),
                hi: self.fine_level(),
            });
        }
        Ok(self.block(sys, t)?.start)
    }

    /// Fine-tile index containing `g`, or `None` outside the region.
    pub fn locate(
        &self,
        sys: &TileSystem,
        g: &GroupElement,
        rel_tol: f64,
    ) -> Result<Option<usize>> {
        let t = sys.tile_of(g, self.fine_level(), rel_tol)?;
        match self.index_of(sys, &t) {
            Ok(i) => Ok(Some(i)),
            Err(Error::NotInRegion) => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn locate_flat(&self, sys: &TileSystem, g: &[f64], rel_tol: f64) -> Result<Option<usize>> {
        let t = sys.tile_of_flat(g, self.fine_level(), rel_tol)?;
        match self.index_of(sys, &t) {
            Ok(i) => Ok(Some(i)),
            Err(Error::NotInRegion) => Ok(None),
            Err(e) => Err(e),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sampling {
    CenterValue,
    /// Average over `per_axis^{2n+1}` stratified points of each tile.
    CellAverage {
        per_axis: usize,
    },
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling::CellAverage { per_axis: 1 }
    }
}

/// One value per fine tile of a region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SymbolGrid {
    pub n: usize,
    pub region: Region,
    pub sampling: Sampling,
    pub values: Vec<f64>,
}

impl SymbolGrid {
    pub fn from_values(sys: &TileSystem, region: Region, values: Vec<f64>) -> Result<Self> {
        if values.len() != region.len(sys) {
            return Err(Error::Inconsistent(format!(
                "{} values for {} fine tiles",
                values.len(),
                region.len(sys)
            )));
        }
        Ok(Self {
            n: sys.n(),
            region,
            sampling: Sampling::CenterValue,
            values,
        })
    }

    pub fn constant(sys: &TileSystem, region: Region, c: f64) -> Self {
        let len = region.len(sys);
        Self {
            n: sys.n(),
            region,
            sampling: Sampling::CenterValue,
            values: vec![c; len],
        }
    }

    pub fn sample(
        sys: &TileSystem,
        region: Region,
        b: &dyn Symbol,
        sampling: Sampling,
    ) -> Result<Self> {
        use rayon::prelude::*;
        if b.dim() != sys.n() {
            return Err(Error::DimensionMismatch {
                expected: sys.n(),
                found: b.dim(),
            });
        }
        let tiles = region.fine_tiles(sys);
        let values = tiles
            .par_iter()
            .map(|t| match sampling {
                Sampling::CenterValue | Sampling::CellAverage { per_axis: 0 | 1 } => {
                    b.value(&sys.center(t))
                }
                Sampling::CellAverage { per_axis } => {
                    let pts = sys.sample_points(t, per_axis);
                    pts.iter().map(|p| b.value(p)).sum::<f64>() / pts.len() as f64
                }
            })
            .collect();
        Ok(Self {
            n: sys.n(),
            region,
            sampling,
            values,
        })
    }

    /// Measure of one fine tile.
    pub fn cell_measure(&self, sys: &TileSystem) -> f64 {
        sys.measure(self.region.fine_level())
    }

    /// `(sum |b_T|^p μ)^{1/p}`; `p = inf` gives the max.
    pub fn lp_norm(&self, sys: &TileSystem, p: f64) -> f64 {
        if p.is_infinite() {
            return self.values.iter().fold(0.0, |m, v| m.max(v.abs()));
        }
        let mu = self.cell_measure(sys);
        (self.values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * mu).powf(1.0 / p)
    }

    pub fn inner(&self, sys: &TileSystem, other: &SymbolGrid) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            * self.cell_measure(sys)
    }

    /// `E_k b` for the tile level `level = -k`: block averages broadcast back
    /// to the fine tiles.
    pub fn conditional_expectation(&self, sys: &TileSystem, level: i32) -> Result<SymbolGrid> {
        self.region.check_level(level)?;
        let size = sys
            .children_count()
            .pow((level - self.region.fine_level()) as u32);
        let mut values = self.values.clone();
        for chunk in values.chunks_mut(size) {
            let avg = chunk.iter().sum::<f64>() / size as f64;
            chunk.iter_mut().for_each(|v| *v = avg);
        }
        Ok(SymbolGrid {
            values,
            ..self.clone()
        })
    }

    /// Averages of the tiles at `level`, in canonical order.
    pub fn level_averages(&self, sys: &TileSystem, level: i32) -> Result<Vec<f64>> {
        self.region.check_level(level)?;
        let size = sys
            .children_count()
            .pow((level - self.region.fine_level()) as u32);
        Ok(self
            .values
            .chunks(size)
            .map(|c| c.iter().sum::<f64>() / size as f64)
            .collect())
    }

    pub fn median_on_tile(&self, sys: &TileSystem, t: &TileId) -> Result<f64> {
        let r = self.region.block(sys, t)?;
        Ok(median(&self.values[r]))
    }
}

/// Median with the midpoint rule for an even number of values.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let k = v.len();
    if k == 0 {
        return f64::NAN;
    }
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f_at_origin() {
        let sys = TileSystem::new(1).unwrap();
        assert!((sys.boundary_f(&[0.0, 0.0], 1e-14).unwrap() - 0.25).abs() < 1e-13);
        let sys2 = TileSystem::new(2).unwrap();
        assert!((sys2.boundary_f(&[0.0; 4], 1e-14).unwrap() - 0.125).abs() < 1e-13);
        assert!(matches!(
            sys.boundary_f(&[0.5, 0.0], 1e-9),
            Err(Error::OutsideCube)
        ));
        assert!(matches!(
            sys.boundary_f(&[0.0, 0.0], 0.0),
            Err(Error::InvalidTolerance(_))
        ));
    }

    #[test]
    fn children_and_parent() {
        let sys = TileSystem::new(1).unwrap();
        let t = TileId {
            level: 2,
            z: vec![3, -7],
            m: 11,
        };
        let kids = sys.children(&t);
        assert_eq!(kids.len(), 81);
        for (i, k) in kids.iter().enumerate() {
            assert_eq!(sys.parent_with_index(k), (t.clone(), i));
            assert_eq!(sys.tile_of(&sys.center(k), 2, 1e-9).unwrap(), t);
        }
    }

    #[test]
    fn median_rule() {
        assert_eq!(median(&[1.0, 2.0, 3.0]), 2.0);
        assert_eq!(median(&[1.0, 1.0, 5.0, 5.0]), 3.0);
        assert_eq!(median(&[4.0; 6]), 4.0);
    }

    #[test]
    fn block_ranges() {
        let sys = TileSystem::new(1).unwrap();
        let region = Region::new(
            TileId {
                level: 1,
                z: vec![0, 0],
                m: 0,
            },
            2,
        );
        let fine = region.fine_tiles(&sys);
        assert_eq!(fine.len(), 6561);
        for i in [0, 17, 6560] {
            assert_eq!(region.index_of(&sys, &fine[i]).unwrap(), i);
        }
        let mid = &region.tiles_at(&sys, 0).unwrap()[5];
        assert_eq!(region.block(&sys, mid).unwrap(), 405..486);
    }
}
