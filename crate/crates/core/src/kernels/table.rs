//! Tabulated Riesz profiles over the Koranyi phase.
//!
//! Nodes are uniform in `ψ ∈ [-π/2, π/2]` with `φ = (π/2) sin ψ`; the kernel is
//! recovered from the two profiles and homogeneity.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::riesz::{field_pair, riesz_profiles};
use super::{KernelKind, KernelSpec, QuadratureConfig};
use crate::error::{Error, Result};
use crate::group::GroupElement;

pub const DEFAULT_NODES: usize = 1025;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableHeader {
    pub spec: KernelSpec,
    pub n: usize,
    /// `[nodes, 2]`: one row per node, columns `P`, `Q`.
    pub shape: [usize; 2],
    pub quadrature: QuadratureConfig,
    pub build_hash: String,
}

#[derive(Clone, Debug)]
pub struct SphereTable {
    pub spec: KernelSpec,
    pub quadrature: QuadratureConfig,
    pub nodes: usize,
    /// Row-major `[nodes, 2]`.
    pub values: Vec<f64>,
    pub build_hash: String,
}

fn header_hash(spec: &KernelSpec, nodes: usize, cfg: &QuadratureConfig) -> String {
    let key = serde_json::json!({ "spec": spec, "nodes": nodes, "quadrature": cfg, "layout": "psi-uniform-v1" });
    let digest = Sha256::digest(key.to_string().as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

impl SphereTable {
    pub fn node_phi(nodes: usize, i: usize) -> f64 {
        let psi =
            -std::f64::consts::FRAC_PI_2 + std::f64::consts::PI * i as f64 / (nodes - 1) as f64;
        std::f64::consts::FRAC_PI_2 * psi.sin()
    }

    pub fn build(spec: &KernelSpec, nodes: usize, cfg: &QuadratureConfig) -> Result<Self> {
        spec.validate()?;
        if !matches!(spec.kind, KernelKind::Riesz { .. }) {
            return Err(Error::Config(format!(
                "no sphere table for kernel {}",
                spec.label()
            )));
        }
        if nodes < 9 {
            return Err(Error::Config("sphere table needs at least 9 nodes".into()));
        }
        let n = spec.n;
        let inner: Vec<(f64, f64)> = (1..nodes - 1)
            .into_par_iter()
            .map(|i| riesz_profiles(n, Self::node_phi(nodes, i), cfg))
            .collect::<Result<_>>()?;
        let mut values = vec![0.0; 2 * nodes];
        for (i, (p, q)) in inner.iter().enumerate() {
            values[2 * (i + 1)] = *p;
            values[2 * (i + 1) + 1] = *q;
        }
        // Poles: the profiles are smooth in ψ; extrapolate from the interior.
        for c in 0..2 {
            let f = |i: usize| values[2 * i + c];
            let lo = 4.0 * f(1) - 6.0 * f(2) + 4.0 * f(3) - f(4);
            let m = nodes - 1;
            let hi = 4.0 * f(m - 1) - 6.0 * f(m - 2) + 4.0 * f(m - 3) - f(m - 4);
            values[c] = lo;
            values[2 * m + c] = hi;
        }
        Ok(Self {
            spec: *spec,
            quadrature: cfg.clone(),
            nodes,
            values,
            build_hash: header_hash(spec, nodes, cfg),
        })
    }

    /// Cubic Lagrange interpolation of `(P, Q)` at phase `φ`.
    pub fn profiles_at(&self, phi: f64) -> (f64, f64) {
        let psi = (phi / std::f64::consts::FRAC_PI_2).clamp(-1.0, 1.0).asin();
        let hstep = std::f64::consts::PI / (self.nodes - 1) as f64;
        let x = (psi + std::f64::consts::FRAC_PI_2) / hstep;
        let i0 = (x.floor() as isize - 1).clamp(0, self.nodes as isize - 4) as usize;
        let s = x - i0 as f64;
        let w = [
            -(s - 1.0) * (s - 2.0) * (s - 3.0) / 6.0,
            s * (s - 2.0) * (s - 3.0) / 2.0,
            -s * (s - 1.0) * (s - 3.0) / 2.0,
            s * (s - 1.0) * (s - 2.0) / 6.0,
        ];
        let mut out = (0.0, 0.0);
        for (k, wk) in w.iter().enumerate() {
            out.0 += wk * self.values[2 * (i0 + k)];
            out.1 += wk * self.values[2 * (i0 + k) + 1];
        }
        out
    }

    /// Kernel at a flat point; the origin yields a non-finite value.
    pub fn eval_flat(&self, v: &[f64]) -> f64 {
        let n = self.spec.n;
        let KernelKind::Riesz { l } = self.spec.kind else {
            unreachable!("tables are built for Riesz kernels")
        };
        let r2: f64 = v[..2 * n].iter().map(|a| a * a).sum();
        let t = v[2 * n];
        let d2 = r2.hypot(t);
        let (pp, qq) = self.profiles_at(t.atan2(r2));
        let (p, q) = field_pair(n, l, v);
        d2.powf(-(n as f64 + 1.5)) * (p * pp + q * qq)
    }

    pub fn eval(&self, g: &GroupElement) -> Result<f64> {
        if g.is_origin() {
            return Err(Error::AtOrigin);
        }
        if g.n() != self.spec.n {
            return Err(Error::DimensionMismatch {
                expected: self.spec.n,
                found: g.n(),
            });
        }
        Ok(self.eval_flat(&g.to_flat()))
    }

    pub fn header(&self) -> TableHeader {
        TableHeader {
            spec: self.spec,
            n: self.spec.n,
            shape: [self.nodes, 2],
            quadrature: self.quadrature.clone(),
            build_hash: self.build_hash.clone(),
        }
    }

    fn stem(spec: &KernelSpec, nodes: usize, cfg: &QuadratureConfig) -> String {
        format!(
            "{}_n{}_{}",
            spec.label(),
            spec.n,
            header_hash(spec, nodes, cfg)
        )
    }

    pub fn paths(
        dir: &Path,
        spec: &KernelSpec,
        nodes: usize,
        cfg: &QuadratureConfig,
    ) -> (PathBuf, PathBuf) {
        let stem = Self::stem(spec, nodes, cfg);
        (
            dir.join(format!("{stem}.json")),
            dir.join(format!("{stem}.f64")),
        )
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let (hp, dp) = Self::paths(dir, &self.spec, self.nodes, &self.quadrature);
        let bytes: Vec<u8> = self.values.iter().flat_map(|v| v.to_le_bytes()).collect();
        fs::write(&dp, bytes)?;
        fs::write(&hp, serde_json::to_string_pretty(&self.header())?)?;
        Ok(())
    }

    /// `Ok(None)` if no matching cache entry exists.
    pub fn load(
        dir: &Path,
        spec: &KernelSpec,
        nodes: usize,
        cfg: &QuadratureConfig,
    ) -> Result<Option<Self>> {
        let (hp, dp) = Self::paths(dir, spec, nodes, cfg);
        if !hp.exists() || !dp.exists() {
            return Ok(None);
        }
        let header: TableHeader = serde_json::from_str(&fs::read_to_string(&hp)?)?;
        if header.spec != *spec || header.shape != [nodes, 2] || header.quadrature != *cfg {
            return Err(Error::Inconsistent(format!(
                "cache header {} does not match the request",
                hp.display()
            )));
        }
        let bytes = fs::read(&dp)?;
        if bytes.len() != nodes * 2 * 8 {
            return Err(Error::Inconsistent(format!(
                "cache data {} has {} bytes",
                dp.display(),
                bytes.len()
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        Ok(Some(Self {
            spec: *spec,
            quadrature: cfg.clone(),
            nodes,
            values,
            build_hash: header.build_hash,
        }))
    }

    pub fn load_or_build(
        spec: &KernelSpec,
        nodes: usize,
        cfg: &QuadratureConfig,
        cache: Option<&Path>,
    ) -> Result<Self> {
        if let Some(dir) = cache {
            if let Some(t) = Self::load(dir, spec, nodes, cfg)? {
                return Ok(t);
            }
        }
        let t = Self::build(spec, nodes, cfg)?;
        if let Some(dir) = cache {
            t.save(dir)?;
        }
        Ok(t)
    }
}
