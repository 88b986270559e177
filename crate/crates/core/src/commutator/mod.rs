//! Nyström discretization of `[b, K]` on a region and the test quantities
//! built from it.
//!
//! Rows index outputs `g`, columns inputs `ĝ`; on L²-normalized indicators
//! `M[T, T'] = (b_T - b_{T'}) K(c_{T'}⁻¹ c_T) μ`.
//!
//! When `b` equals a base value `β` off a small support `S`, the rest-rest
//! block vanishes. The matrix is then held as the support block `A = M[S, S]`
//! with the Gram matrices `BB*` and `C*C` of the off-diagonal blocks, which
//! determine the nonzero singular values.

mod mixed;
mod nwo;
mod oscillation;

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use ndarray::{Array2, Axis};
use ndarray_linalg::{Lapack, Scalar};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use mixed::{mixed_norm, MixedNorm};
pub use nwo::{nwo_sum, NwoReport, NwoTerm};
pub use oscillation::{oscillation_profile, sign_pattern_witness, OscillationProfile, SignWitness};

use crate::error::{Error, Result};
use crate::group::{gauge_norm_flat, left_quotient_flat, GroupElement};
use crate::kernels::{KernelEvaluator, KernelSpec};
use crate::tiling::{Region, SymbolGrid, TileId, TileSystem};

/// Matrix scalar: `f64` for real kernels, `Complex64` otherwise.
pub trait Entry: Lapack<Real = f64> + Scalar<Real = f64> + Send + Sync + 'static {
    fn from_complex(z: Complex64) -> Self;
    fn to_complex(self) -> Complex64;
}

impl Entry for f64 {
    fn from_complex(z: Complex64) -> Self {
        z.re
    }
    fn to_complex(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
}

impl Entry for Complex64 {
    fn from_complex(z: Complex64) -> Self {
        z
    }
    fn to_complex(self) -> Complex64 {
        self
    }
}

/// Sub-sampled kernel averages for tile pairs closer than `radius` fine widths.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NearDiagonal {
    pub radius: f64,
    pub per_axis: usize,
}

impl Default for NearDiagonal {
    fn default() -> Self {
        Self {
            radius: 1.5,
            per_axis: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AssemblyConfig {
    pub near_diagonal: Option<NearDiagonal>,
    /// Largest dimension stored as a dense matrix.
    pub max_dense: usize,
    /// Columns per chunk while accumulating Gram matrices.
    pub chunk: usize,
    /// Store the full matrix even when the support is small.
    pub force_dense: bool,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        Self {
            near_diagonal: None,
            max_dense: 6561,
            chunk: 2048,
            force_dense: false,
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum Block<S> {
    Dense(Array2<S>),
    Split {
        a: Array2<S>,
        gram_rows: Array2<S>,
        gram_cols: Array2<S>,
    },
}

#[derive(Clone, Debug)]
pub(crate) enum Blocks {
    Zero,
    Real(Block<f64>),
    Complex(Block<Complex64>),
}

/// Entry evaluation shared by assembly and the on-demand accessors.
#[derive(Clone, Debug)]
pub(crate) struct Nystrom {
    pub sys: TileSystem,
    pub n: usize,
    pub mu: f64,
    pub values: Vec<f64>,
    pub centers: Vec<f64>,
    pub tiles: Vec<TileId>,
    pub eval: Arc<KernelEvaluator>,
    pub near: Option<(f64, usize)>,
}

impl Nystrom {
    fn dim(&self) -> usize {
        self.values.len()
    }

    fn center(&self, i: usize) -> &[f64] {
        let k = 2 * self.n + 1;
        &self.centers[i * k..(i + 1) * k]
    }

    /// `K(c_j⁻¹ c_i)`, sub-sampled for near pairs when enabled.
    pub fn kernel(&self, i: usize, j: usize) -> Complex64 {
        let mut q = [0.0; 2 * crate::tiling::MAX_N + 1];
        let q = &mut q[..2 * self.n + 1];
        left_quotient_flat(self.n, self.center(j), self.center(i), q);
        if let Some((radius, per_axis)) = self.near {
            let w = self.sys.width(self.tiles[i].level);
            if gauge_norm_flat(q) < radius * w {
                return self.kernel_averaged(i, j, per_axis);
            }
        }
        self.eval.eval_flat(q)
    }

    fn kernel_averaged(&self, i: usize, j: usize, per_axis: usize) -> Complex64 {
        let gs: Vec<Vec<f64>> = self
            .sys
            .sample_points(&self.tiles[i], per_axis)
            .iter()
            .map(GroupElement::to_flat)
            .collect();
        let hs: Vec<Vec<f64>> = self
            .sys
            .sample_points(&self.tiles[j], per_axis)
            .iter()
            .map(GroupElement::to_flat)
            .collect();
        let mut q = vec![0.0; 2 * self.n + 1];
        let mut acc = Complex64::new(0.0, 0.0);
        for g in &gs {
            for h in &hs {
                left_quotient_flat(self.n, h, g, &mut q);
                acc += self.eval.eval_flat(&q);
            }
        }
        acc / (gs.len() * hs.len()) as f64
    }

    /// `M[i, j]`.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let db = self.values[i] - self.values[j];
        if i == j || db == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.kernel(i, j) * (db * self.mu)
    }

    fn submatrix<S: Entry>(&self, rows: &[usize], cols: &[usize]) -> Array2<S> {
        let m = cols.len();
        let mut data = vec![S::zero(); rows.len() * m];
        data.par_chunks_mut(m.max(1))
            .zip(rows.par_iter())
            .for_each(|(out, &i)| {
                for (o, &j) in out.iter_mut().zip(cols) {
                    *o = S::from_complex(self.entry(i, j));
                }
            });
        Array2::from_shape_vec((rows.len(), m), data).expect("shape")
    }
}

fn adjoint<S: Entry>(m: &Array2<S>) -> Array2<S> {
    m.t().mapv(|x| x.conj())
}

fn assemble_block<S: Entry>(
    ny: &Nystrom,
    support: &[usize],
    dense: bool,
    chunk: usize,
) -> Block<S> {
    let n = ny.dim();
    if dense {
        let all: Vec<usize> = (0..n).collect();
        return Block::Dense(ny.submatrix(&all, &all));
    }
    let in_support = {
        let mut v = vec![false; n];
        support.iter().for_each(|&i| v[i] = true);
        v
    };
    let rest: Vec<usize> = (0..n).filter(|&i| !in_support[i]).collect();
    let a = ny.submatrix::<S>(support, support);
    let s = support.len();
    let mut gram_rows = Array2::<S>::zeros((s, s));
    let mut gram_cols = Array2::<S>::zeros((s, s));
    for cols in rest.chunks(chunk.max(1)) {
        let b = ny.submatrix::<S>(support, cols);
        gram_rows = gram_rows + b.dot(&adjoint(&b));
        let c = ny.submatrix::<S>(cols, support);
        gram_cols = gram_cols + adjoint(&c).dot(&c);
    }
    Block::Split {
        a,
        gram_rows,
        gram_cols,
    }
}

/// The most frequent exact value; ties go to the smallest.
pub(crate) fn base_value(values: &[f64]) -> f64 {
    let mut counts: BTreeMap<u64, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v.to_bits()).or_default() += 1;
    }
    let mut best = (0usize, f64::INFINITY);
    for (bits, c) in counts {
        let v = f64::from_bits(bits);
        if c > best.0 || (c == best.0 && v < best.1) {
            best = (c, v);
        }
    }
    best.1
}

/// The assembled commutator on a region.
#[derive(Clone, Debug)]
pub struct OperatorMatrix {
    pub region: Region,
    pub n: usize,
    /// Measure of one fine tile.
    pub mu: f64,
    pub symbol: SymbolGrid,
    pub spec: KernelSpec,
    pub b_ref: String,
    pub kernel_ref: String,
    pub build_hash: String,
    /// Value of `b` off the support.
    pub base_value: f64,
    /// Fine tiles where `b ≠ β`, ascending.
    pub support: Vec<usize>,
    /// Relative L² mass of `b - β` within one coarse tile of the region boundary.
    pub truncation: f64,
    pub warnings: Vec<String>,
    pub(crate) ny: Nystrom,
    pub(crate) blocks: Blocks,
}

/// Builds the commutator matrix of `b` against the kernel `eval`.
pub fn assemble(
    sys: &TileSystem,
    b: &SymbolGrid,
    spec: &KernelSpec,
    eval: Arc<KernelEvaluator>,
    b_ref: &str,
    cfg: &AssemblyConfig,
) -> Result<OperatorMatrix> {
    if spec.n != sys.n() || eval.n() != sys.n() || b.n != sys.n() {
        return Err(Error::DimensionMismatch {
            expected: sys.n(),
            found: spec.n.max(eval.n()).max(b.n),
        });
    }
    if b.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let region = b.region.clone();
    let tiles = region.fine_tiles(sys);
    let ny = Nystrom {
        sys: sys.clone(),
        n: sys.n(),
        mu: b.cell_measure(sys),
        values: b.values.clone(),
        centers: region.fine_centers(sys),
        tiles,
        eval: eval.clone(),
        near: cfg.near_diagonal.as_ref().map(|d| (d.radius, d.per_axis)),
    };
    let beta = base_value(&b.values);
    let support: Vec<usize> = (0..b.values.len())
        .filter(|&i| b.values[i] != beta)
        .collect();
    let dim = b.values.len();
    let dense = cfg.force_dense || 2 * support.len() >= dim;
    if dense && dim > cfg.max_dense && !support.is_empty() {
        return Err(Error::Config(format!(
            "dense assembly of dimension {dim} exceeds max_dense = {}; the symbol support covers {} tiles",
            cfg.max_dense,
            support.len()
        )));
    }
    let blocks = if support.is_empty() {
        Blocks::Zero
    } else if eval.is_complex() {
        Blocks::Complex(assemble_block(&ny, &support, dense, cfg.chunk))
    } else {
        Blocks::Real(assemble_block(&ny, &support, dense, cfg.chunk))
    };
    if let Some(bad) = check_finite(&blocks) {
        return Err(Error::Inconsistent(format!(
            "kernel evaluation produced a non-finite entry: {bad}"
        )));
    }
    let truncation = truncation_metric(sys, &region, &ny, &support, beta)?;
    let mut warnings = Vec::new();
    if truncation > 0.0 {
        warnings.push(format!("symbol support lies within one coarse tile of the region boundary (relative mass {truncation:.3e})"));
    }
    let kernel_ref = eval.provenance();
    let build_hash = {
        let bytes: Vec<u8> = b.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        let key = serde_json::json!({
            "region": region,
            "spec": spec,
            "kernel": kernel_ref,
            "near_diagonal": cfg.near_diagonal,
            "values": hex(&Sha256::digest(&bytes)),
        });
        hex(&Sha256::digest(key.to_string().as_bytes())[..8])
    };
    Ok(OperatorMatrix {
        region,
        n: sys.n(),
        mu: ny.mu,
        symbol: b.clone(),
        spec: *spec,
        b_ref: b_ref.to_string(),
        kernel_ref,
        build_hash,
        base_value: beta,
        support,
        truncation,
        warnings,
        ny,
        blocks,
    })
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn check_finite(blocks: &Blocks) -> Option<String> {
    fn scan<S: Entry>(b: &Block<S>) -> Option<String> {
        let mats: Vec<&Array2<S>> = match b {
            Block::Dense(m) => vec![m],
            Block::Split {
                a,
                gram_rows,
                gram_cols,
            } => vec![a, gram_rows, gram_cols],
        };
        mats.iter()
            .flat_map(|m| m.iter())
            .find(|v| !v.to_complex().is_finite())
            .map(|v| format!("{:?}", v.to_complex()))
    }
    match blocks {
        Blocks::Zero => None,
        Blocks::Real(b) => scan(b),
        Blocks::Complex(b) => scan(b),
    }
}

fn truncation_metric(
    sys: &TileSystem,
    region: &Region,
    ny: &Nystrom,
    support: &[usize],
    beta: f64,
) -> Result<f64> {
    if support.is_empty() {
        return Ok(0.0);
    }
    let n = sys.n();
    let w = sys.width(region.root.level - 1);
    let mut probes = Vec::new();
    for k in 0..=2 * n {
        for s in [-1.0, 1.0] {
            let mut v = vec![0.0; 2 * n + 1];
            v[k] = if k == 2 * n { s * w * w } else { s * w };
            probes.push(GroupElement::from_flat(&v)?);
        }
    }
    let (mut near, mut total) = (0.0, 0.0);
    for &i in support {
        let d = (ny.values[i] - beta).powi(2);
        total += d;
        let c = GroupElement::from_flat(ny.center(i))?;
        for p in &probes {
            if region.locate(sys, &c.multiply(p)?, 1e-9)?.is_none() {
                near += d;
                break;
            }
        }
    }
    Ok((near / total).sqrt())
}

impl OperatorMatrix {
    pub fn dim(&self) -> usize {
        self.ny.dim()
    }

    pub fn is_complex(&self) -> bool {
        matches!(self.blocks, Blocks::Complex(_))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.blocks, Blocks::Zero)
    }

    pub fn is_dense(&self) -> bool {
        matches!(
            self.blocks,
            Blocks::Real(Block::Dense(_)) | Blocks::Complex(Block::Dense(_))
        )
    }

    /// `M[i, j]` for fine-tile indices.
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.ny.entry(i, j)
    }

    /// Kernel value `K(c_j⁻¹ c_i)` used by the entry `(i, j)`.
    pub fn kernel(&self, i: usize, j: usize) -> Complex64 {
        self.ny.kernel(i, j)
    }

    pub fn evaluator(&self) -> &KernelEvaluator {
        &self.ny.eval
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        fn f<S: Entry>(b: &Block<S>) -> f64 {
            let sq = |m: &Array2<S>| m.iter().map(|v| v.square()).sum::<f64>();
            let tr = |m: &Array2<S>| m.diag().iter().map(|v| v.re()).sum::<f64>();
            match b {
                Block::Dense(m) => sq(m),
                Block::Split {
                    a,
                    gram_rows,
                    gram_cols,
                } => sq(a) + tr(gram_rows) + tr(gram_cols),
            }
        }
        match &self.blocks {
            Blocks::Zero => 0.0,
            Blocks::Real(b) => f(b),
            Blocks::Complex(b) => f(b),
        }
    }

    /// Full matrix; refuses dimensions above `max_dense`.
    pub fn to_dense(&self, max_dense: usize) -> Result<Array2<Complex64>> {
        let n = self.dim();
        if n > max_dense {
            return Err(Error::Config(format!(
                "dimension {n} exceeds max_dense = {max_dense}"
            )));
        }
        match &self.blocks {
            Blocks::Real(Block::Dense(m)) => Ok(m.mapv(|v| Complex64::new(v, 0.0))),
            Blocks::Complex(Block::Dense(m)) => Ok(m.clone()),
            _ => {
                let all: Vec<usize> = (0..n).collect();
                Ok(self.ny.submatrix::<Complex64>(&all, &all))
            }
        }
    }

    /// Row `i` restricted to the columns `cols`.
    pub(crate) fn row_values(&self, i: usize, cols: &[usize]) -> Vec<Complex64> {
        cols.iter().map(|&j| self.ny.entry(i, j)).collect()
    }

    pub(crate) fn in_support(&self) -> Vec<bool> {
        let mut v = vec![false; self.dim()];
        self.support.iter().for_each(|&i| v[i] = true);
        v
    }

    /// Writes the dense matrix as little-endian `f64` (row-major; complex
    /// entries interleaved re, im) with a JSON sidecar.
    pub fn save(&self, dir: &Path, stem: &str, max_dense: usize) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let m = self.to_dense(max_dense)?;
        let complex = self.is_complex();
        let mut bytes = Vec::with_capacity(m.len() * if complex { 16 } else { 8 });
        for row in m.axis_iter(Axis(0)) {
            for v in row {
                bytes.extend_from_slice(&v.re.to_le_bytes());
                if complex {
                    bytes.extend_from_slice(&v.im.to_le_bytes());
                }
            }
        }
        std::fs::write(dir.join(format!("{stem}.f64")), bytes)?;
        let sidecar = serde_json::json!({
            "region": self.region,
            "spec": self.spec,
            "shape": [m.nrows(), m.ncols()],
            "complex": complex,
            "layout": "row-major; rows are outputs",
            "b_ref": self.b_ref,
            "kernel_ref": self.kernel_ref,
            "build_hash": self.build_hash,
            "truncation": self.truncation,
        });
        std::fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&sidecar)?,
        )?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn base_value_prefers_majority() {
        assert_eq!(base_value(&[1.0, 0.0, 0.0, 2.0]), 0.0);
        assert_eq!(base_value(&[3.0, 2.0]), 2.0);
    }
}
