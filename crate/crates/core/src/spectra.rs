//! Singular values, Schatten and weak Schatten norms.

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, Axis};
use ndarray_linalg::{Eigh, JobSvd, SVDDC, UPLO};
use serde::{Deserialize, Serialize};

use crate::commutator::{Block, Blocks, Entry, OperatorMatrix};
use crate::error::{Error, Result};

fn linalg(e: impl std::fmt::Display) -> Error {
    Error::Linalg(e.to_string())
}

/// Singular values of a dense matrix, nonincreasing.
pub fn dense_singular_values<S: Entry>(a: &Array2<S>) -> Result<Vec<f64>> {
    if a.iter().any(|v| !v.to_complex().is_finite()) {
        return Err(Error::NonFinite);
    }
    if a.is_empty() {
        return Ok(Vec::new());
    }
    let (_, s, _) = a.svddc(JobSvd::None).map_err(linalg)?;
    Ok(sorted(s.to_vec()))
}

fn sorted(mut v: Vec<f64>) -> Vec<f64> {
    v.iter_mut().for_each(|x| *x = x.max(0.0));
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Square root of a Hermitian positive semidefinite matrix; negative
/// rounding eigenvalues are clamped to zero.
fn psd_sqrt<S: Entry>(g: &Array2<S>) -> Result<Array2<S>> {
    let (w, v): (Array1<f64>, Array2<S>) = g.eigh(UPLO::Upper).map_err(linalg)?;
    let mut vs = v.clone();
    for (mut col, &l) in vs.axis_iter_mut(Axis(1)).zip(w.iter()) {
        let r = S::from_real(l.max(0.0).sqrt());
        col.mapv_inplace(|x| x * r);
    }
    Ok(vs.dot(&v.t().mapv(|x| x.conj())))
}

/// Nonzero part of the spectrum of `[[A, B], [C, 0]]` from `A`, `BB*` and `C*C`.
fn split_singular_values<S: Entry>(
    a: &Array2<S>,
    gram_rows: &Array2<S>,
    gram_cols: &Array2<S>,
) -> Result<Vec<f64>> {
    let s = a.nrows();
    let p = psd_sqrt(gram_rows)?;
    let q = psd_sqrt(gram_cols)?;
    let mut r = Array2::<S>::zeros((2 * s, 2 * s));
    r.slice_mut(ndarray::s![..s, ..s]).assign(a);
    r.slice_mut(ndarray::s![..s, s..]).assign(&p);
    r.slice_mut(ndarray::s![s.., ..s]).assign(&q);
    dense_singular_values(&r)
}

/// Singular values of the commutator matrix. For split storage the list
/// holds at most twice the support size; the remaining values are zero.
pub fn singular_values(a: &OperatorMatrix) -> Result<Vec<f64>> {
    fn go<S: Entry>(b: &Block<S>) -> Result<Vec<f64>> {
        match b {
            Block::Dense(m) => dense_singular_values(m),
            Block::Split {
                a,
                gram_rows,
                gram_cols,
            } => split_singular_values(a, gram_rows, gram_cols),
        }
    }
    let mut v = match &a.blocks {
        Blocks::Zero => Vec::new(),
        Blocks::Real(b) => go(b)?,
        Blocks::Complex(b) => go(b)?,
    };
    v.truncate(a.dim());
    Ok(v)
}

/// `(Σ σ_k^p)^{1/p}`; `p = ∞` gives `σ₁`.
pub fn schatten_norm(sv: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Exponent {
            p,
            constraint: "p > 0",
        });
    }
    let top = sv.iter().copied().fold(0.0, f64::max);
    if p.is_infinite() || top == 0.0 {
        return Ok(top);
    }
    // Scaled by σ₁ against overflow for large p.
    Ok(top
        * sv.iter()
            .map(|s| (s / top).powf(p))
            .sum::<f64>()
            .powf(1.0 / p))
}

/// `max_k k^{1/p} σ_k` for a nonincreasing list.
pub fn schatten_weak(sv: &[f64], p: f64) -> Result<f64> {
    if !(p > 0.0) {
        return Err(Error::Exponent {
            p,
            constraint: "p > 0",
        });
    }
    if p.is_infinite() {
        return Ok(sv.first().copied().unwrap_or(0.0));
    }
    Ok(sv
        .iter()
        .enumerate()
        .map(|(k, s)| ((k + 1) as f64).powf(1.0 / p) * s)
        .fold(0.0, f64::max))
}

/// Exponents serialize as map keys, e.g. `"6"` or `"inf"`.
fn key(p: f64) -> String {
    if p.is_infinite() {
        "inf".into()
    } else {
        format!("{p}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    /// Nonincreasing; trailing zeros omitted.
    pub singular_values: Vec<f64>,
    /// Matrix dimension.
    pub dimension: usize,
    pub trailing_zeros: usize,
    pub schatten: BTreeMap<String, f64>,
    pub weak_schatten: BTreeMap<String, f64>,
    pub frobenius: f64,
    pub provenance_hash: String,
}

impl SpectrumReport {
    pub fn new(
        sv: Vec<f64>,
        dimension: usize,
        frobenius: f64,
        ps: &[f64],
        provenance_hash: &str,
    ) -> Result<Self> {
        let mut schatten = BTreeMap::new();
        let mut weak = BTreeMap::new();
        for &p in ps {
            schatten.insert(key(p), schatten_norm(&sv, p)?);
            weak.insert(key(p), schatten_weak(&sv, p)?);
        }
        Ok(Self {
            trailing_zeros: dimension.saturating_sub(sv.len()),
            singular_values: sv,
            dimension,
            schatten,
            weak_schatten: weak,
            frobenius,
            provenance_hash: provenance_hash.to_string(),
        })
    }

    pub fn of(a: &OperatorMatrix, ps: &[f64]) -> Result<Self> {
        Self::new(
            singular_values(a)?,
            a.dim(),
            a.frobenius_sq().sqrt(),
            ps,
            &a.build_hash,
        )
    }

    pub fn schatten(&self, p: f64) -> Option<f64> {
        self.schatten.get(&key(p)).copied()
    }

    pub fn weak(&self, p: f64) -> Option<f64> {
        self.weak_schatten.get(&key(p)).copied()
    }

    /// `Σ_{k ≤ K} σ_k^p` for `K = 1..len`.
    pub fn partial_sums(&self, p: f64) -> Vec<f64> {
        self.singular_values
            .iter()
            .scan(0.0, |acc, s| {
                *acc += s.powf(p);
                Some(*acc)
            })
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One row per singular value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,sigma\n");
        for (k, s) in self.singular_values.iter().enumerate() {
            out.push_str(&format!("{},{:.17e}\n", k + 1, s));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn diagonal_and_rank_one() {
        let sv = dense_singular_values(&array![[3.0, 0.0], [0.0, 4.0]]).unwrap();
        assert!((sv[0] - 4.0).abs() < 1e-14 && (sv[1] - 3.0).abs() < 1e-14);
        assert!((schatten_norm(&sv, 2.0).unwrap() - 5.0).abs() < 1e-14);
        assert_eq!(schatten_norm(&sv, f64::INFINITY).unwrap(), 4.0);
        let u = array![1.0, 2.0, 2.0];
        let v = array![3.0, 4.0];
        let m = Array2::from_shape_fn((3, 2), |(i, j)| u[i] * v[j]);
        let sv = dense_singular_values(&m).unwrap();
        assert!((sv[0] - 15.0).abs() < 1e-12 && sv[1].abs() < 1e-12);
    }

    #[test]
    fn split_matches_dense() {
        // [[A, B], [C, 0]] with a 2×2 support and 3 rest indices.
        let a = array![[0.0, 1.0], [-2.0, 0.0]];
        let b = array![[0.5, -1.0, 0.3], [0.2, 0.7, -0.4]];
        let c = array![[1.1, 0.0], [-0.3, 0.9], [0.4, 0.4]];
        let mut full = Array2::<f64>::zeros((5, 5));
        full.slice_mut(ndarray::s![..2, ..2]).assign(&a);
        full.slice_mut(ndarray::s![..2, 2..]).assign(&b);
        full.slice_mut(ndarray::s![2.., ..2]).assign(&c);
        let dense = dense_singular_values(&full).unwrap();
        let split = split_singular_values(&a, &b.dot(&b.t()), &c.t().dot(&c)).unwrap();
        for (k, s) in split.iter().enumerate() {
            assert!((s - dense[k]).abs() < 1e-12, "{split:?} vs {dense:?}");
        }
        assert!(dense[split.len()..].iter().all(|s| s.abs() < 1e-12));
    }
}
