//! C interface to `hcomm`.
//!
//! Every fallible call returns an `HCOMM_*` status code; on failure the message
//! is available from [`hcomm_last_error`] on the same thread. Objects are opaque
//! handles created by `*_new` functions and released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;
use std::sync::Arc;

use hcomm::besov::{besov_direct, besov_martingale, besov_shell, DirectConfig};
use hcomm::commutator::{assemble, AssemblyConfig, OperatorMatrix};
use hcomm::experiments::{self as exp, ExperimentConfig, Lab};
use hcomm::group::{GroupElement, MetricKind, SmoothSymbol};
use hcomm::kernels::{KernelEvaluator, KernelKind, KernelSpec, QuadratureConfig};
use hcomm::spectra::{schatten_norm, singular_values};
use hcomm::tiling::{Region, Sampling, SymbolGrid, TileId, TileSystem, MEMBERSHIP_TOL};
use hcomm::Error;

pub const HCOMM_OK: i32 = 0;
pub const HCOMM_NULL_POINTER: i32 = 1;
pub const HCOMM_INVALID_ARGUMENT: i32 = 2;
/// Point on a tile boundary, outside a region, or level out of range.
pub const HCOMM_OUT_OF_DOMAIN: i32 = 3;
/// Quadrature, linear algebra or Monte-Carlo failure.
pub const HCOMM_NUMERICAL: i32 = 4;
pub const HCOMM_IO: i32 = 5;
/// The output buffer is too small; the required length was written.
pub const HCOMM_BUFFER_TOO_SMALL: i32 = 6;
pub const HCOMM_PANIC: i32 = 7;

pub const HCOMM_METRIC_RHO: i32 = 0;
pub const HCOMM_METRIC_GAUGE: i32 = 1;
pub const HCOMM_METRIC_KORANYI: i32 = 2;

pub const HCOMM_BESOV_MARTINGALE: i32 = 0;
pub const HCOMM_BESOV_SHELL: i32 = 1;
pub const HCOMM_BESOV_DIRECT: i32 = 2;

pub const HCOMM_KERNEL_RIESZ: i32 = 0;
pub const HCOMM_KERNEL_SECOND_ORDER_T: i32 = 1;

/// Tile system of `H^n`.
pub struct HcommTileSystem(TileSystem);

/// Symbol sampled on the fine tiles of a region.
pub struct HcommGrid(SymbolGrid);

/// Discretized commutator `[b, T]`.
pub struct HcommOperator(OperatorMatrix);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn code(e: &Error) -> i32 {
    match e {
        Error::Stage { source, .. } => code(source),
        Error::Boundary { .. }
        | Error::NotInRegion
        | Error::OutsideCube
        | Error::LevelOutOfRange { .. }
        | Error::NoChildren(_)
        | Error::AtOrigin => HCOMM_OUT_OF_DOMAIN,
        Error::Quadrature { .. }
        | Error::Divergent(_)
        | Error::NonFinite
        | Error::Linalg(_)
        | Error::InsufficientSamples { .. } => HCOMM_NUMERICAL,
        Error::Io(_) => HCOMM_IO,
        _ => HCOMM_INVALID_ARGUMENT,
    }
}

struct Fail(i32, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(code(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(HCOMM_NULL_POINTER, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(HCOMM_INVALID_ARGUMENT, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HCOMM_OK,
        Ok(Err(Fail(c, msg))) => {
            set_error(msg);
            c
        }
        Err(_) => {
            set_error("panic inside hcomm".into());
            HCOMM_PANIC
        }
    }
}

unsafe fn get<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn put<T>(out: *mut T, v: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

fn region(n: usize, root_level: i32, depth: u32) -> Region {
    Region::new(TileId::basic(n).at_level(root_level), depth)
}

/// Message of the last failed call on this thread. Valid until the next call
/// that fails on the same thread.
#[no_mangle]
pub extern "C" fn hcomm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static version string.
#[no_mangle]
pub extern "C" fn hcomm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `out = a · b` for flat points of length `2n + 1`.
///
/// # Safety
/// `a`, `b` and `out` must point to `2n + 1` doubles.
#[no_mangle]
pub unsafe extern "C" fn hcomm_group_multiply(
    n: usize,
    a: *const f64,
    b: *const f64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let k = 2 * n + 1;
        let g = GroupElement::from_flat(input(a, k, "a")?)?;
        let h = GroupElement::from_flat(input(b, k, "b")?)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let prod = g.multiply(&h)?.to_flat();
        slice::from_raw_parts_mut(out, k).copy_from_slice(&prod);
        Ok(())
    })
}

/// Homogeneous norm of a flat point; `kind` is one of `HCOMM_METRIC_*`.
///
/// # Safety
/// `g` must point to `2n + 1` doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn hcomm_group_norm(
    n: usize,
    g: *const f64,
    kind: i32,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let kind = match kind {
            HCOMM_METRIC_RHO => MetricKind::RhoMax,
            HCOMM_METRIC_GAUGE => MetricKind::Gauge,
            HCOMM_METRIC_KORANYI => MetricKind::Koranyi,
            other => return Err(invalid(format!("unknown metric {other}"))),
        };
        let g = GroupElement::from_flat(input(g, 2 * n + 1, "g")?)?;
        put(out, g.norm(kind), "out")
    })
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hcomm_tile_system_new(n: usize, out: *mut *mut HcommTileSystem) -> i32 {
    guard(|| {
        let sys = TileSystem::new(n)?;
        put(out, Box::into_raw(Box::new(HcommTileSystem(sys))), "out")
    })
}

/// # Safety
/// `sys` must come from [`hcomm_tile_system_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hcomm_tile_system_free(sys: *mut HcommTileSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// Tile of level `level` containing `g`: writes the `2n` lattice coordinates
/// to `z` and the height index to `m`.
///
/// # Safety
/// `g` must point to `2n + 1` doubles, `z` to `2n` integers.
#[no_mangle]
pub unsafe extern "C" fn hcomm_tile_locate(
    sys: *const HcommTileSystem,
    g: *const f64,
    level: i32,
    z: *mut i64,
    m: *mut i64,
) -> i32 {
    guard(|| {
        let sys = &get(sys, "sys")?.0;
        let n = sys.n();
        let t = sys.tile_of_flat(input(g, 2 * n + 1, "g")?, level, MEMBERSHIP_TOL)?;
        if z.is_null() {
            return Err(null("z"));
        }
        slice::from_raw_parts_mut(z, 2 * n).copy_from_slice(&t.z);
        put(m, t.m, "m")
    })
}

/// Bump of radius `radius` at `center`, sampled at the fine tile centers of
/// the basic tile at `root_level` refined `depth` times.
///
/// # Safety
/// `center` must point to `2n + 1` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hcomm_grid_new_bump(
    sys: *const HcommTileSystem,
    root_level: i32,
    depth: u32,
    center: *const f64,
    radius: f64,
    out: *mut *mut HcommGrid,
) -> i32 {
    guard(|| {
        let sys = &get(sys, "sys")?.0;
        let n = sys.n();
        let c = GroupElement::from_flat(input(center, 2 * n + 1, "center")?)?;
        if radius.is_nan() || radius <= 0.0 {
            return Err(invalid("radius must be positive"));
        }
        let b = SmoothSymbol::bump(c, radius);
        let grid =
            SymbolGrid::sample(sys, region(n, root_level, depth), &b, Sampling::CenterValue)?;
        put(out, Box::into_raw(Box::new(HcommGrid(grid))), "out")
    })
}

/// Grid from explicit fine-tile values in region order.
///
/// # Safety
/// `values` must point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hcomm_grid_new_values(
    sys: *const HcommTileSystem,
    root_level: i32,
    depth: u32,
    values: *const f64,
    len: usize,
    out: *mut *mut HcommGrid,
) -> i32 {
    guard(|| {
        let sys = &get(sys, "sys")?.0;
        let v = input(values, len, "values")?.to_vec();
        let grid = SymbolGrid::from_values(sys, region(sys.n(), root_level, depth), v)?;
        put(out, Box::into_raw(Box::new(HcommGrid(grid))), "out")
    })
}

/// Number of fine tiles; 0 for a null handle.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hcomm_grid_len(grid: *const HcommGrid) -> usize {
    grid.as_ref().map_or(0, |g| g.0.values.len())
}

/// # Safety
/// `grid` must come from a `hcomm_grid_new_*` call and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hcomm_grid_free(grid: *mut HcommGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

/// Besov estimate at `alpha = Q / p`; `method` is one of `HCOMM_BESOV_*`.
/// `seed` only affects the direct method.
///
/// # Safety
/// Handles must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hcomm_besov(
    sys: *const HcommTileSystem,
    grid: *const HcommGrid,
    method: i32,
    p: f64,
    seed: u64,
    out: *mut f64,
) -> i32 {
    guard(|| {
        let sys = &get(sys, "sys")?.0;
        let grid = &get(grid, "grid")?.0;
        let est = match method {
            HCOMM_BESOV_MARTINGALE => besov_martingale(sys, grid, p, None)?,
            HCOMM_BESOV_SHELL => besov_shell(sys, grid, p, None)?,
            HCOMM_BESOV_DIRECT => {
                besov_direct(sys, grid, p, sys.q() / p, &DirectConfig::default(), seed)?
            }
            other => return Err(invalid(format!("unknown Besov method {other}"))),
        };
        put(out, est.value, "out")
    })
}

/// Assembles `[b, T]` on the grid; `kernel` is one of `HCOMM_KERNEL_*` and
/// `index` selects the Riesz transform `1..=2n`.
///
/// # Safety
/// Handles must be live; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hcomm_operator_new(
    sys: *const HcommTileSystem,
    grid: *const HcommGrid,
    kernel: i32,
    index: usize,
    out: *mut *mut HcommOperator,
) -> i32 {
    guard(|| {
        let sys = &get(sys, "sys")?.0;
        let grid = &get(grid, "grid")?.0;
        let kind = match kernel {
            HCOMM_KERNEL_RIESZ => KernelKind::Riesz { l: index },
            HCOMM_KERNEL_SECOND_ORDER_T => KernelKind::SecondOrderT,
            other => return Err(invalid(format!("unknown kernel {other}"))),
        };
        let spec = KernelSpec { n: sys.n(), kind };
        spec.validate()?;
        let eval = Arc::new(KernelEvaluator::new(
            &spec,
            &QuadratureConfig::default(),
            1025,
            None,
        )?);
        let op = assemble(sys, grid, &spec, eval, "ffi", &AssemblyConfig::default())?;
        put(out, Box::into_raw(Box::new(HcommOperator(op))), "out")
    })
}

/// Matrix dimension; 0 for a null handle.
///
/// # Safety
/// `op` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hcomm_operator_dim(op: *const HcommOperator) -> usize {
    op.as_ref().map_or(0, |o| o.0.dim())
}

/// # Safety
/// `op` must come from [`hcomm_operator_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hcomm_operator_free(op: *mut HcommOperator) {
    if !op.is_null() {
        drop(Box::from_raw(op));
    }
}

/// Singular values in decreasing order. Writes the count to `len`; returns
/// `HCOMM_BUFFER_TOO_SMALL` without copying when `cap` is short.
///
/// # Safety
/// `buf` must hold `cap` doubles (may be null when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn hcomm_operator_singular_values(
    op: *const HcommOperator,
    buf: *mut f64,
    cap: usize,
    len: *mut usize,
) -> i32 {
    guard(|| {
        let op = &get(op, "op")?.0;
        let sv = singular_values(op)?;
        put(len, sv.len(), "len")?;
        if cap < sv.len() {
            return Err(Fail(
                HCOMM_BUFFER_TOO_SMALL,
                format!("need {} values, buffer holds {cap}", sv.len()),
            ));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        slice::from_raw_parts_mut(buf, sv.len()).copy_from_slice(&sv);
        Ok(())
    })
}

/// `(Σ s_i^p)^{1/p}`; `p = INFINITY` gives the largest value.
///
/// # Safety
/// `values` must point to `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hcomm_schatten_norm(
    values: *const f64,
    len: usize,
    p: f64,
    out: *mut f64,
) -> i32 {
    guard(|| put(out, schatten_norm(input(values, len, "values")?, p)?, "out"))
}

/// Runs a named experiment (`structure`, `kernel`, `certify`, `commutator`,
/// `schatten`, `besov`, `equivalence`, `constancy`) and returns its report as
/// JSON in `report`, to be released with [`hcomm_string_free`]. A null
/// `config_json` uses the defaults. Failed checks still return `HCOMM_OK`.
///
/// # Safety
/// String arguments must be NUL-terminated; `report` must be valid.
#[no_mangle]
pub unsafe extern "C" fn hcomm_run_experiment(
    name: *const c_char,
    config_json: *const c_char,
    report: *mut *mut c_char,
) -> i32 {
    guard(|| {
        let name = text(name, "name")?;
        let cfg = if config_json.is_null() {
            ExperimentConfig::default()
        } else {
            ExperimentConfig::from_json(text(config_json, "config_json")?)?
        };
        let run: fn(&Lab) -> exp::Report = match name {
            "structure" => exp::run_structure_checks,
            "kernel" => exp::run_kernel_checks,
            "certify" => exp::run_certify,
            "commutator" => exp::run_commutator,
            "schatten" => exp::run_schatten,
            "besov" => exp::run_besov,
            "equivalence" => exp::run_equivalence,
            "constancy" => exp::run_constancy,
            other => return Err(invalid(format!("unknown experiment {other}"))),
        };
        if report.is_null() {
            return Err(null("report"));
        }
        let json = run(&Lab::new(cfg)?).to_json()?;
        let c = CString::new(json).map_err(|_| invalid("report contains NUL"))?;
        report.write(c.into_raw());
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn hcomm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
