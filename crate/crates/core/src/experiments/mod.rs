//! Config-driven experiment harness: one report per subcommand, each row a
//! check with its quantities, tolerances and verdict.

mod certify;
mod equivalence;
mod kernel;
mod operator;
mod structure;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::besov::{BesovMethod, DirectConfig};
use crate::commutator::{AssemblyConfig, OperatorMatrix};
use crate::error::{Error, Result};
use crate::group::{GroupElement, SmoothSymbol};
use crate::kernels::{KernelEvaluator, KernelSpec, QuadratureConfig, SearchConfig};
use crate::tiling::{Region, Sampling, SymbolGrid, TileId, TileSystem};

pub use certify::run_certify;
pub use equivalence::{run_constancy, run_equivalence};
pub use kernel::run_kernel_checks;
pub use operator::{run_besov, run_commutator, run_schatten};
pub use structure::run_structure_checks;

/// Build identifier from `git describe`, or `unknown`.
pub const BUILD_ID: &str = env!("HCOMM_BUILD_ID");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SymbolFamily {
    /// `b_s,τ(g) = b(δ_{1/s}(τ⁻¹ g))` for a base bump `b`, every scale `s`
    /// and every translate `τ` (flat coordinates).
    Bumps {
        center: Vec<f64>,
        radius: f64,
        amplitude: f64,
        scales: Vec<f64>,
        translates: Vec<Vec<f64>>,
    },
    /// Bumps with radii uniform in `radius` and centers in the middle of the
    /// root tile's t-fibers, `|z_i| ≤ spread`.
    RandomBumps {
        count: usize,
        radius: (f64, f64),
        spread: f64,
        amplitude: f64,
    },
    Constant {
        value: f64,
    },
}

impl Default for SymbolFamily {
    fn default() -> Self {
        SymbolFamily::Bumps {
            center: vec![0.0, 0.0, 0.0],
            radius: 0.3,
            amplitude: 1.0,
            scales: vec![1.0, 1.0 / 3.0, 1.0 / 9.0],
            translates: vec![vec![0.0, 0.0, 0.0], vec![1.0 / 9.0, 0.0, 0.0]],
        }
    }
}

#[derive(Clone, Debug)]
pub struct Member {
    pub label: String,
    pub symbol: SmoothSymbol,
    /// Characteristic radius; `0` for constants.
    pub radius: f64,
}

impl SymbolFamily {
    pub fn members(&self, sys: &TileSystem, seed: u64) -> Result<Vec<Member>> {
        let n = sys.n();
        let point = |v: &[f64]| {
            if v.len() != 2 * n + 1 {
                return Err(Error::Config(format!(
                    "expected {} coordinates, got {}",
                    2 * n + 1,
                    v.len()
                )));
            }
            GroupElement::from_flat(v)
        };
        match self {
            SymbolFamily::Bumps {
                center,
                radius,
                amplitude,
                scales,
                translates,
            } => {
                let base = SmoothSymbol::Bump {
                    center: point(center)?,
                    radius: *radius,
                    amplitude: *amplitude,
                };
                let mut out = Vec::new();
                for (ti, tr) in translates.iter().enumerate() {
                    let tau = point(tr)?;
                    for &s in scales {
                        let symbol = base.dilated(1.0 / s)?.translated(&tau)?;
                        out.push(Member {
                            label: format!("bump_s{s:.4}_t{ti}"),
                            symbol,
                            radius: radius * s,
                        });
                    }
                }
                Ok(out)
            }
            SymbolFamily::RandomBumps {
                count,
                radius: (r0, r1),
                spread,
                amplitude,
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_b0b5);
                let mut out = Vec::with_capacity(*count);
                for i in 0..*count {
                    let z: Vec<f64> = (0..2 * n)
                        .map(|_| rng.random_range(-spread..=*spread))
                        .collect();
                    let f = sys.boundary_f(&z, 1e-12)?;
                    let t = f - 1.0 / (4.0 * n as f64)
                        + rng.random_range(-0.25..=0.25) / (2.0 * n as f64);
                    let r = if r1 > r0 {
                        rng.random_range(*r0..*r1)
                    } else {
                        *r0
                    };
                    let mut flat = z;
                    flat.push(t);
                    let symbol = SmoothSymbol::Bump {
                        center: GroupElement::from_flat(&flat)?,
                        radius: r,
                        amplitude: *amplitude,
                    };
                    out.push(Member {
                        label: format!("random_bump_{i}"),
                        symbol,
                        radius: r,
                    });
                }
                Ok(out)
            }
            SymbolFamily::Constant { value } => Ok(vec![Member {
                label: "constant".into(),
                symbol: SmoothSymbol::Constant { n, value: *value },
                radius: 0.0,
            }]),
        }
    }
}

/// Sample sizes of the structural and kernel suites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSizes {
    pub group_cases: usize,
    pub tiling_points: usize,
    pub tiling_levels: (i32, i32),
    pub measure_samples: usize,
    pub f_samples: usize,
    pub haar_depth: u32,
    pub heat_pairs: usize,
    pub riesz_pairs: usize,
    pub sphere_samples: usize,
    pub held_out: usize,
    pub closed_form_points: usize,
    pub scan_resolution: usize,
    pub certify_tiles: usize,
    pub certify_levels: Vec<i32>,
    pub certify_n: Vec<u32>,
}

impl Default for CheckSizes {
    fn default() -> Self {
        Self {
            group_cases: 10_000,
            tiling_points: 100_000,
            tiling_levels: (-3, 3),
            measure_samples: 1_000_000,
            f_samples: 100_000,
            haar_depth: 2,
            heat_pairs: 100,
            riesz_pairs: 50,
            sphere_samples: 500,
            held_out: 100,
            closed_form_points: 50,
            scan_resolution: 10_000,
            certify_tiles: 50,
            certify_levels: vec![-1, 0, 1],
            certify_n: vec![0, 1, 2],
        }
    }
}

/// Pass thresholds of the operator-level experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// Largest admissible max/min of `‖[b,R]‖_{S^p} / Besov` over the family.
    pub equivalence_spread: f64,
    pub equivalence_method: BesovMethod,
    /// Largest relative change of that ratio from depth `D` to `D+1`.
    pub refinement_stability: f64,
    pub oscillation_growth: f64,
    pub spectral_change: f64,
    pub nwo_constant: f64,
    pub russo_constant: f64,
    pub certify_stability: f64,
    /// Values below this count as zero for constant symbols.
    pub zero: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            equivalence_spread: 10.0,
            equivalence_method: BesovMethod::Martingale,
            refinement_stability: 0.25,
            oscillation_growth: 1.3,
            spectral_change: 0.05,
            nwo_constant: 100.0,
            russo_constant: 10.0,
            certify_stability: 0.2,
            zero: 1e-12,
        }
    }
}

/// One JSON document drives every subcommand; unknown keys are rejected.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    /// Levels below the root tile resolved by the grid.
    pub depth: u32,
    /// Level of the root tile.
    pub root_level: i32,
    pub kernel: KernelSpec,
    pub family: SymbolFamily,
    /// Appends the constant symbol `1` to the family.
    pub include_constant: bool,
    pub sampling: Sampling,
    pub p: Vec<f64>,
    /// Besov level window; defaults per estimator.
    pub level_window: Option<(i32, i32)>,
    pub b0: u32,
    /// Also run the smallest instance at depth `D + 1`.
    pub refine: bool,
    pub quadrature: QuadratureConfig,
    pub table_nodes: usize,
    pub assembly: AssemblyConfig,
    pub search: SearchConfig,
    pub direct: DirectConfig,
    pub checks: CheckSizes,
    pub thresholds: Thresholds,
    pub cache_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 1,
            depth: 2,
            root_level: 0,
            kernel: KernelSpec::riesz(1, 1),
            family: SymbolFamily::default(),
            include_constant: false,
            sampling: Sampling::CellAverage { per_axis: 3 },
            p: vec![6.0, 8.0],
            level_window: None,
            b0: 1,
            refine: true,
            quadrature: QuadratureConfig::default(),
            table_nodes: crate::kernels::table::DEFAULT_NODES,
            assembly: AssemblyConfig::default(),
            search: SearchConfig::default(),
            direct: DirectConfig::default(),
            checks: CheckSizes::default(),
            thresholds: Thresholds::default(),
            cache_dir: None,
            output_dir: PathBuf::from("out"),
            seed: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernel.n != self.n {
            return Err(Error::Config(format!(
                "kernel n = {} but config n = {}",
                self.kernel.n, self.n
            )));
        }
        self.kernel.validate()?;
        if self.depth == 0 {
            return Err(Error::Config("depth must be positive".into()));
        }
        if self.p.iter().any(|p| !(*p > 0.0)) {
            return Err(Error::Config("exponents must be positive".into()));
        }
        Ok(())
    }

    /// Hash of the canonical JSON; the cache and output locations are left out.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.cache_dir = None;
        c.output_dir = PathBuf::new();
        let text = serde_json::to_string(&c).expect("config serializes");
        crate::commutator::hex(&Sha256::digest(text.as_bytes())[..8])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub check: String,
    pub quantities: BTreeMap<String, f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub pass: bool,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub note: String,
    pub config_hash: String,
    pub build_id: String,
    /// Written to the separate timings file so reports stay reproducible.
    #[serde(skip)]
    pub runtime: Duration,
}

impl ReportRow {
    pub fn q(&mut self, name: &str, value: f64) -> &mut Self {
        self.quantities.insert(name.to_string(), value);
        self
    }

    pub fn tol(&mut self, name: &str, value: f64) -> &mut Self {
        self.tolerances.insert(name.to_string(), value);
        self
    }

    pub fn note(&mut self, text: impl Into<String>) -> &mut Self {
        let text = text.into();
        if self.note.is_empty() {
            self.note = text;
        } else {
            self.note = format!("{}; {text}", self.note);
        }
        self
    }
}

/// Named CSV written with `--emit-plot-data`.
#[derive(Clone, Debug, PartialEq)]
pub struct PlotData {
    pub name: String,
    pub csv: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub config_hash: String,
    pub build_id: String,
    pub rows: Vec<ReportRow>,
    #[serde(skip)]
    pub plots: Vec<PlotData>,
    #[serde(skip)]
    pub runtime: Duration,
}

impl Report {
    pub fn new(lab: &Lab, experiment: &str) -> Self {
        Self {
            experiment: experiment.into(),
            config_hash: lab.hash.clone(),
            build_id: BUILD_ID.into(),
            rows: Vec::new(),
            plots: Vec::new(),
            runtime: Duration::ZERO,
        }
    }

    fn blank(&self, check: &str) -> ReportRow {
        ReportRow {
            experiment: self.experiment.clone(),
            check: check.into(),
            quantities: BTreeMap::new(),
            tolerances: BTreeMap::new(),
            pass: false,
            note: String::new(),
            config_hash: self.config_hash.clone(),
            build_id: self.build_id.clone(),
            runtime: Duration::ZERO,
        }
    }

    /// Runs one check; an error fails the row and lands in its note.
    pub fn check<F: FnOnce(&mut ReportRow) -> Result<bool>>(&mut self, name: &str, f: F) {
        let mut row = self.blank(name);
        let start = Instant::now();
        match f(&mut row) {
            Ok(pass) => row.pass = pass,
            Err(e) => {
                row.pass = false;
                row.note(format!("error: {e}"));
            }
        }
        row.runtime = start.elapsed();
        self.runtime += row.runtime;
        self.rows.push(row);
    }

    pub fn plot(&mut self, name: &str, csv: String) {
        self.plots.push(PlotData {
            name: name.into(),
            csv,
        });
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }

    pub fn failures(&self) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| !r.pass).collect()
    }

    pub fn row(&self, check: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.check == check)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// One line per quantity and tolerance.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("experiment,check,pass,field,name,value,config_hash,build_id\n");
        for r in &self.rows {
            let fields = r
                .quantities
                .iter()
                .map(|kv| ("quantity", kv))
                .chain(r.tolerances.iter().map(|kv| ("tolerance", kv)));
            for (field, (name, value)) in fields {
                out.push_str(&format!(
                    "{},{},{},{field},{name},{value:e},{},{}\n",
                    r.experiment, r.check, r.pass, r.config_hash, r.build_id
                ));
            }
        }
        out
    }

    pub fn timings_json(&self) -> Result<String> {
        let t: BTreeMap<&str, f64> = self
            .rows
            .iter()
            .map(|r| (r.check.as_str(), r.runtime.as_secs_f64()))
            .collect();
        Ok(serde_json::to_string_pretty(&serde_json::json!({
            "experiment": self.experiment,
            "total_seconds": self.runtime.as_secs_f64(),
            "checks": t,
        }))?)
    }

    /// Writes `<experiment>.json`, `.csv`, `.timings.json` and, on request,
    /// `<experiment>_<plot>.csv`.
    pub fn write(&self, dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let mut out = Vec::new();
        let mut put = |name: String, body: String| -> Result<()> {
            let p = dir.join(name);
            fs::write(&p, body)?;
            out.push(p);
            Ok(())
        };
        put(format!("{}.json", self.experiment), self.to_json()?)?;
        put(format!("{}.csv", self.experiment), self.to_csv())?;
        put(
            format!("{}.timings.json", self.experiment),
            self.timings_json()?,
        )?;
        if plots {
            for p in &self.plots {
                put(format!("{}_{}.csv", self.experiment, p.name), p.csv.clone())?;
            }
        }
        Ok(out)
    }
}

/// Validated config plus shared read-only state.
pub struct Lab {
    pub cfg: ExperimentConfig,
    pub sys: TileSystem,
    pub hash: String,
    evaluators: Mutex<BTreeMap<String, Arc<KernelEvaluator>>>,
}

impl Lab {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let sys = TileSystem::new(cfg.n)?;
        let hash = cfg.hash();
        Ok(Self {
            cfg,
            sys,
            hash,
            evaluators: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn evaluator(&self, spec: &KernelSpec) -> Result<Arc<KernelEvaluator>> {
        let key = serde_json::to_string(spec)?;
        if let Some(e) = self.evaluators.lock().expect("evaluator cache").get(&key) {
            return Ok(e.clone());
        }
        let e = Arc::new(KernelEvaluator::new(
            spec,
            &self.cfg.quadrature,
            self.cfg.table_nodes,
            self.cfg.cache_dir.as_deref(),
        )?);
        self.evaluators
            .lock()
            .expect("evaluator cache")
            .insert(key, e.clone());
        Ok(e)
    }

    pub fn region(&self, depth: u32) -> Region {
        let root = TileId::basic(self.cfg.n).at_level(self.cfg.root_level);
        Region::new(root, depth)
    }

    pub fn members(&self) -> Result<Vec<Member>> {
        let mut m = self.cfg.family.members(&self.sys, self.cfg.seed)?;
        if self.cfg.include_constant && !matches!(self.cfg.family, SymbolFamily::Constant { .. }) {
            m.push(Member {
                label: "constant".into(),
                symbol: SmoothSymbol::Constant {
                    n: self.cfg.n,
                    value: 1.0,
                },
                radius: 0.0,
            });
        }
        Ok(m)
    }

    pub fn grid(&self, member: &Member, depth: u32) -> Result<SymbolGrid> {
        SymbolGrid::sample(
            &self.sys,
            self.region(depth),
            &member.symbol,
            self.cfg.sampling,
        )
    }

    pub fn assemble(&self, grid: &SymbolGrid, label: &str) -> Result<OperatorMatrix> {
        let eval = self.evaluator(&self.cfg.kernel)?;
        crate::commutator::assemble(
            &self.sys,
            grid,
            &self.cfg.kernel,
            eval,
            label,
            &self.cfg.assembly,
        )
    }

    /// Wraps a failure with the stage name and config hash.
    pub fn stage<T>(&self, stage: &str, r: Result<T>) -> Result<T> {
        r.map_err(|e| Error::Stage {
            stage: stage.into(),
            config_hash: self.hash.clone(),
            source: Box::new(e),
        })
    }

    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(
            self.cfg
                .seed
                .wrapping_mul(0x9e37_79b9_7f4a_7c15)
                .wrapping_add(stream),
        )
    }
}

/// `max / min` of positive finite values; `None` if fewer than one.
pub(crate) fn spread(values: &[f64]) -> Option<f64> {
    let v: Vec<f64> = values
        .iter()
        .copied()
        .filter(|x| x.is_finite() && *x > 0.0)
        .collect();
    if v.is_empty() {
        return None;
    }
    let hi = v.iter().copied().fold(f64::MIN, f64::max);
    let lo = v.iter().copied().fold(f64::MAX, f64::min);
    Some(hi / lo)
}

pub(crate) fn rel_err(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / b.abs().max(a.abs()).max(f64::MIN_POSITIVE)
    }
}
