//! Group, tiling and Haar suites.

use rand::Rng;
use rayon::prelude::*;

use super::{rel_err, Lab, Report};
use crate::error::{Error, Result};
use crate::group::{distance, GroupElement, MetricKind};
use crate::haar::{haar_expand, haar_reconstruct, HaarBasis};
use crate::tiling::{Region, SymbolGrid, TileId, TileSystem, MEMBERSHIP_TOL};

const GROUP_TOL: f64 = 1e-12;
const GRAM_TOL: f64 = 1e-12;
const CANCEL_TOL: f64 = 1e-12;
const ROUND_TRIP_TOL: f64 = 1e-10;
const PARSEVAL_TOL: f64 = 1e-10;
const MARTINGALE_TOL: f64 = 1e-10;
const F0_TOL: f64 = 1e-12;
const BOUNDARY_FRACTION: f64 = 0.005;

pub fn run_structure_checks(lab: &Lab) -> Report {
    let mut rep = Report::new(lab, "structure");
    group_suite(lab, &mut rep);
    tiling_suite(lab, &mut rep);
    haar_suite(lab, &mut rep);
    rep
}

fn random_element(rng: &mut impl Rng, n: usize, scale: f64) -> GroupElement {
    let v: Vec<f64> = (0..2 * n + 1)
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    GroupElement::from_flat(&v).expect("flat layout")
}

fn element_err(a: &GroupElement, b: &GroupElement) -> f64 {
    let (va, vb) = (a.to_flat(), b.to_flat());
    let scale = vb.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    va.iter()
        .zip(&vb)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

fn group_suite(lab: &Lab, rep: &mut Report) {
    let n = lab.cfg.n;
    let cases = lab.cfg.checks.group_cases;
    rep.check("group_associativity", |row| {
        let mut rng = lab.rng(101);
        let mut worst = 0.0f64;
        for _ in 0..cases {
            let (g, h, k) = (
                random_element(&mut rng, n, 1.0),
                random_element(&mut rng, n, 1.0),
                random_element(&mut rng, n, 1.0),
            );
            let a = g.multiply(&h)?.multiply(&k)?;
            let b = g.multiply(&h.multiply(&k)?)?;
            worst = worst.max(element_err(&a, &b));
        }
        row.q("cases", cases as f64)
            .q("max_rel_err", worst)
            .tol("max_rel_err", GROUP_TOL);
        Ok(worst <= GROUP_TOL)
    });
    rep.check("group_identity_inverse", |row| {
        let mut rng = lab.rng(102);
        let o = GroupElement::origin(n);
        let mut worst = 0.0f64;
        for _ in 0..cases {
            let g = random_element(&mut rng, n, 1.0);
            worst = worst
                .max(element_err(&g.multiply(&o)?, &g))
                .max(element_err(&o.multiply(&g)?, &g))
                .max(element_err(&g.multiply(&g.inverse())?, &o))
                .max(element_err(&g.inverse().multiply(&g)?, &o));
        }
        row.q("cases", cases as f64)
            .q("max_rel_err", worst)
            .tol("max_rel_err", GROUP_TOL);
        Ok(worst <= GROUP_TOL)
    });
    rep.check("gauge_left_invariance", |row| {
        let mut rng = lab.rng(103);
        let mut worst = 0.0f64;
        for _ in 0..cases {
            let (g, h, k) = (
                random_element(&mut rng, n, 1.0),
                random_element(&mut rng, n, 1.0),
                random_element(&mut rng, n, 1.0),
            );
            for kind in [MetricKind::Gauge, MetricKind::RhoMax, MetricKind::Koranyi] {
                let a = distance(kind, &k.multiply(&g)?, &k.multiply(&h)?)?;
                let b = distance(kind, &g, &h)?;
                worst = worst.max(rel_err(a, b));
            }
        }
        row.q("cases", cases as f64)
            .q("max_rel_err", worst)
            .tol("max_rel_err", GROUP_TOL);
        Ok(worst <= GROUP_TOL)
    });
    rep.check("dilation_homogeneity", |row| {
        let mut rng = lab.rng(104);
        let mut worst = 0.0f64;
        for _ in 0..cases {
            let (g, h) = (
                random_element(&mut rng, n, 1.0),
                random_element(&mut rng, n, 1.0),
            );
            let r = 10f64.powf(rng.random_range(-1.0..1.0));
            let dg = g.dilate(r)?;
            for kind in [MetricKind::Gauge, MetricKind::RhoMax, MetricKind::Koranyi] {
                worst = worst.max(rel_err(dg.norm(kind), r * g.norm(kind)));
            }
            worst = worst.max(element_err(
                &g.multiply(&h)?.dilate(r)?,
                &dg.multiply(&h.dilate(r)?)?,
            ));
        }
        row.q("cases", cases as f64)
            .q("max_rel_err", worst)
            .tol("max_rel_err", GROUP_TOL);
        Ok(worst <= GROUP_TOL)
    });
}

fn omega(n: usize, a: &[f64], b: &[f64]) -> f64 {
    2.0 * (0..n)
        .map(|i| a[n + i] * b[i] - a[i] * b[n + i])
        .sum::<f64>()
}

/// Membership of `g` in `t` from the explicit description
/// `t = δ_{λ^j}(base · T_o)`, `T_o = {w ∈ Q₀, f(w) - 1/(2n) ≤ τ < f(w)}`.
fn in_tile(sys: &TileSystem, t: &TileId, g: &[f64]) -> Result<bool> {
    let n = sys.n();
    let s = sys.width(t.level);
    let base: Vec<f64> = t.z.iter().map(|&v| v as f64).collect();
    let w: Vec<f64> = (0..2 * n).map(|c| g[c] / s - base[c]).collect();
    if w.iter().any(|&c| !(-0.5..0.5).contains(&c)) {
        return Ok(false);
    }
    let two_n = 2.0 * n as f64;
    let tau = g[2 * n] / (s * s) - t.m as f64 / two_n - omega(n, &base, &w);
    let f = sys.boundary_f(&w, 1e-15)?;
    Ok(f - 1.0 / two_n <= tau && tau < f)
}

#[derive(Default)]
struct PartitionCounts {
    tested: usize,
    boundary: usize,
    partition_violations: usize,
    nesting_violations: usize,
}

fn tiling_suite(lab: &Lab, rep: &mut Report) {
    let sys = &lab.sys;
    let n = sys.n();
    let sizes = &lab.cfg.checks;
    rep.check("tiling_partition_nesting", |row| {
        let (lo, hi) = sizes.tiling_levels;
        let mut rng = lab.rng(201);
        let pts: Vec<Vec<f64>> = (0..sizes.tiling_points)
            .map(|_| {
                let mut v: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-3.0..3.0)).collect();
                v.push(rng.random_range(-6.0..6.0));
                v
            })
            .collect();
        let counts: Vec<PartitionCounts> = pts
            .par_iter()
            .map(|g| {
                let mut c = PartitionCounts::default();
                let mut prev: Option<TileId> = None;
                for level in lo..=hi {
                    c.tested += 1;
                    let t = match sys.tile_of_flat(g, level, MEMBERSHIP_TOL) {
                        Ok(t) => t,
                        Err(Error::Boundary { .. }) => {
                            c.boundary += 1;
                            prev = None;
                            continue;
                        }
                        Err(_) => {
                            c.partition_violations += 1;
                            prev = None;
                            continue;
                        }
                    };
                    // Exactly one of T and its t-neighbours contains g.
                    let mut inside = 0;
                    let mut own = false;
                    for dm in [-1i64, 0, 1] {
                        let u = TileId {
                            m: t.m + dm,
                            ..t.clone()
                        };
                        let hit = in_tile(sys, &u, g).unwrap_or(false);
                        inside += hit as usize;
                        own |= hit && dm == 0;
                    }
                    if inside != 1 || !own {
                        c.partition_violations += 1;
                    }
                    if let Some(child) = &prev {
                        let parent = sys.parent(child);
                        if parent != t || !in_tile(sys, &parent, g).unwrap_or(false) {
                            c.nesting_violations += 1;
                        }
                    }
                    prev = Some(t);
                }
                c
            })
            .collect();
        let total = counts
            .iter()
            .fold(PartitionCounts::default(), |a, c| PartitionCounts {
                tested: a.tested + c.tested,
                boundary: a.boundary + c.boundary,
                partition_violations: a.partition_violations + c.partition_violations,
                nesting_violations: a.nesting_violations + c.nesting_violations,
            });
        let frac = total.boundary as f64 / total.tested as f64;
        row.q("points", pts.len() as f64)
            .q("level_lo", lo as f64)
            .q("level_hi", hi as f64)
            .q("partition_violations", total.partition_violations as f64)
            .q("nesting_violations", total.nesting_violations as f64)
            .q("boundary_fraction", frac)
            .tol("violations", 0.0)
            .tol("boundary_fraction", BOUNDARY_FRACTION);
        Ok(total.partition_violations == 0
            && total.nesting_violations == 0
            && frac < BOUNDARY_FRACTION)
    });
    rep.check("tiling_child_count", |row| {
        let root = TileId::basic(n);
        let kids = sys.children(&root);
        let mut sorted = kids.clone();
        sorted.sort();
        sorted.dedup();
        let parents_ok = kids
            .iter()
            .enumerate()
            .all(|(i, k)| sys.parent_with_index(k) == (root.clone(), i));
        let expected = (2 * n + 1).pow(2 * n as u32 + 2);
        row.q("children", kids.len() as f64)
            .q("distinct", sorted.len() as f64)
            .q("expected", expected as f64);
        if !parents_ok {
            row.note("parent/index round trip failed");
        }
        Ok(kids.len() == expected && sorted.len() == expected && parents_ok)
    });
    rep.check("tiling_basic_measure", |row| {
        let mut rng = lab.rng(202);
        let samples = sizes.measure_samples;
        // Box z ∈ [-1/2, 1/2)^{2n}, t ∈ [-1, 1] contains T_o.
        let vol = 2.0;
        let root = TileId::basic(n);
        let mut hits = 0usize;
        let mut g = vec![0.0; 2 * n + 1];
        for _ in 0..samples {
            for c in g.iter_mut().take(2 * n) {
                *c = rng.random_range(-0.5..0.5);
            }
            g[2 * n] = rng.random_range(-1.0..1.0);
            if sys.tile_of_flat(&g, 0, 0.0).is_ok_and(|t| t == root) {
                hits += 1;
            }
        }
        let frac = hits as f64 / samples as f64;
        let est = vol * frac;
        let sigma = vol * (frac * (1.0 - frac) / samples as f64).sqrt();
        let want = sys.measure(0);
        row.q("estimate", est)
            .q("sigma", sigma)
            .q("expected", want)
            .q("samples", samples as f64)
            .tol("sigmas", 3.0);
        Ok((est - want).abs() <= 3.0 * sigma)
    });
    rep.check("boundary_f_origin", |row| {
        let f0 = sys.boundary_f(&vec![0.0; 2 * n], 1e-15)?;
        let want = 1.0 / (4.0 * n as f64);
        row.q("f0", f0).q("expected", want).tol("abs", F0_TOL);
        Ok((f0 - want).abs() <= F0_TOL)
    });
    rep.check("boundary_f_range", |row| {
        let mut rng = lab.rng(203);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..sizes.f_samples {
            let z: Vec<f64> = (0..2 * n).map(|_| rng.random_range(-0.5..0.5)).collect();
            let f = sys.boundary_f(&z, 1e-14)?;
            lo = lo.min(f);
            hi = hi.max(f);
        }
        let nf = n as f64;
        let (a, b) = (
            1.0 / (4.0 * nf * (nf + 1.0)),
            (2.0 * nf + 1.0) / (4.0 * nf * (nf + 1.0)),
        );
        row.q("f_min", lo)
            .q("f_max", hi)
            .tol("lower", a)
            .tol("upper", b);
        if lo < a || hi > b {
            row.note("sampled values of the boundary function leave the stated range");
        }
        Ok(lo >= a && hi <= b)
    });
}

/// Haar function expanded onto the fine tiles of its support block.
struct Expanded {
    start: usize,
    values: Vec<f64>,
}

fn haar_suite(lab: &Lab, rep: &mut Report) {
    let sys = &lab.sys;
    let depth = lab.cfg.checks.haar_depth;
    let region = Region::new(TileId::basic(sys.n()), depth);
    let basis = HaarBasis::new(sys);
    let mu = sys.measure(region.fine_level());
    let mm = sys.children_count();

    let mut funcs: Vec<Expanded> = Vec::new();
    let mut integrals = Vec::new();
    let build = (|| -> Result<()> {
        for level in (region.fine_level() + 1..=region.root.level).rev() {
            for t in region.tiles_at(sys, level)? {
                let blk = region.block(sys, &t)?;
                let per = blk.len() / mm;
                for h in basis.build(sys, &region, &t)? {
                    integrals.push((h.integral(sys), h.lp_norm(sys, 1.0)));
                    let values = h
                        .child_coeffs
                        .iter()
                        .flat_map(|&c| std::iter::repeat_n(c, per))
                        .collect();
                    funcs.push(Expanded {
                        start: blk.start,
                        values,
                    });
                }
            }
        }
        Ok(())
    })();

    rep.check("haar_gram", |row| {
        build
            .as_ref()
            .map_err(|e| Error::Inconsistent(e.to_string()))?;
        // Every pair, computed on the overlap of the supports.
        let worst = (0..funcs.len())
            .into_par_iter()
            .map(|a| {
                let fa = &funcs[a];
                let mut w = 0.0f64;
                for (b, fb) in funcs.iter().enumerate().skip(a) {
                    let lo = fa.start.max(fb.start);
                    let hi = (fa.start + fa.values.len()).min(fb.start + fb.values.len());
                    let ip = if lo < hi {
                        (lo..hi)
                            .map(|i| fa.values[i - fa.start] * fb.values[i - fb.start])
                            .sum::<f64>()
                            * mu
                    } else {
                        0.0
                    };
                    let want = if a == b { 1.0 } else { 0.0 };
                    w = w.max((ip - want).abs());
                }
                w
            })
            .collect::<Vec<f64>>()
            .into_iter()
            .fold(0.0, f64::max);
        row.q("functions", funcs.len() as f64)
            .q("max_abs_err", worst)
            .tol("max_abs_err", GRAM_TOL);
        Ok(worst <= GRAM_TOL)
    });
    rep.check("haar_cancellation", |row| {
        build
            .as_ref()
            .map_err(|e| Error::Inconsistent(e.to_string()))?;
        let worst = integrals
            .iter()
            .map(|(i, l1)| i.abs() / l1)
            .fold(0.0, f64::max);
        row.q("max_rel_integral", worst)
            .tol("max_rel_integral", CANCEL_TOL);
        Ok(worst <= CANCEL_TOL)
    });

    let mut rng = lab.rng(301);
    let values: Vec<f64> = (0..region.len(sys))
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let grid = SymbolGrid::from_values(sys, region.clone(), values);
    rep.check("haar_round_trip", |row| {
        let b = grid
            .as_ref()
            .map_err(|e| Error::Inconsistent(e.to_string()))?;
        let c = haar_expand(sys, &basis, b)?;
        let back = haar_reconstruct(sys, &basis, &c)?;
        let worst = b
            .values
            .iter()
            .zip(&back.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        row.q("max_abs_err", worst)
            .tol("max_abs_err", ROUND_TRIP_TOL);
        Ok(worst <= ROUND_TRIP_TOL)
    });
    rep.check("haar_parseval", |row| {
        let b = grid
            .as_ref()
            .map_err(|e| Error::Inconsistent(e.to_string()))?;
        let c = haar_expand(sys, &basis, b)?;
        let lhs = b.lp_norm(sys, 2.0).powi(2);
        let rhs = sys.measure(region.root.level) * c.coarse_average.powi(2) + c.sum_of_squares();
        let err = rel_err(rhs, lhs);
        row.q("norm_sq", lhs)
            .q("coefficient_sum", rhs)
            .q("rel_err", err)
            .tol("rel_err", PARSEVAL_TOL);
        Ok(err <= PARSEVAL_TOL)
    });
    rep.check("haar_martingale_difference", |row| {
        let b = grid
            .as_ref()
            .map_err(|e| Error::Inconsistent(e.to_string()))?;
        let c = haar_expand(sys, &basis, b)?;
        let mut worst = 0.0f64;
        for (k, lev) in c.levels.iter().enumerate() {
            let level = region.root.level - k as i32;
            let fine = b.conditional_expectation(sys, level - 1)?;
            let coarse = b.conditional_expectation(sys, level)?;
            let size = b.values.len() / lev.len();
            let per = size / mm;
            let scale = sys.measure(level).powf(-0.5);
            for (ti, coeffs) in lev.iter().enumerate() {
                for i in 0..size {
                    let child = i / per;
                    let h: f64 = coeffs
                        .iter()
                        .enumerate()
                        .map(|(e, cv)| cv * basis.unit_row(e + 1)[child])
                        .sum::<f64>()
                        * scale;
                    let idx = ti * size + i;
                    worst = worst.max((fine.values[idx] - coarse.values[idx] - h).abs());
                }
            }
        }
        row.q("max_abs_err", worst)
            .tol("max_abs_err", MARTINGALE_TOL);
        Ok(worst <= MARTINGALE_TOL)
    });
}
