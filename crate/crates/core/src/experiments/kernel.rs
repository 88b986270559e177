//! Heat kernel, Riesz kernel and closed-form oracle checks, plus sphere scans.

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;

use super::{rel_err, Lab, Report};
use crate::error::Result;
use crate::group::GroupElement;
use crate::kernels::{
    closed_form_t_kernel, heat_kernel, riesz_kernel, riesz_kernel_gamma, second_order_t_constant,
    second_order_t_kernel, sphere_scan, KernelKind, KernelSpec,
};

const HEAT_ORIGIN_TOL: f64 = 1e-6;
const HEAT_SCALING_TOL: f64 = 1e-6;
const HEAT_INVERSE_TOL: f64 = 1e-10;
const RIESZ_SCALING_TOL: f64 = 1e-4;
const RIESZ_BOUND_STABILITY: f64 = 0.05;
const TABLE_TOL: f64 = 1e-3;
const CLOSED_FORM_TOL: f64 = 1e-3;
const C2_TOL: f64 = 1e-12;
const ZERO_THRESHOLD: f64 = 1e-6;
const ZERO_FRACTION: f64 = 0.01;

pub fn run_kernel_checks(lab: &Lab) -> Report {
    let mut rep = Report::new(lab, "kernel");
    heat_checks(lab, &mut rep);
    riesz_checks(lab, &mut rep);
    closed_form_checks(lab, &mut rep);
    scans(lab, &mut rep);
    rep
}

fn random_point(rng: &mut impl Rng, n: usize, scale: f64) -> GroupElement {
    loop {
        let v: Vec<f64> = (0..2 * n + 1)
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        let g = GroupElement::from_flat(&v).expect("flat layout");
        if g.rho() > 1e-3 * scale {
            return g;
        }
    }
}

/// Random point of the gauge sphere `{ρ = 1}`.
fn sphere_sample(rng: &mut impl Rng, n: usize) -> GroupElement {
    let g = random_point(rng, n, 1.0);
    let r = g.rho();
    g.dilate(1.0 / r).expect("positive dilation")
}

fn heat_checks(lab: &Lab, rep: &mut Report) {
    let cfg = &lab.cfg.quadrature;
    let n = lab.cfg.n;
    rep.check("heat_origin", |row| {
        // 64 h² p_h(o) = 1 holds for n = 1.
        let o = GroupElement::origin(1);
        let mut worst = 0.0f64;
        for h in [0.5, 1.0, 2.0] {
            let v = heat_kernel(&o, h, cfg)?;
            row.q(&format!("scaled_h{h}"), 64.0 * h * h * v);
            worst = worst.max((64.0 * h * h * v - 1.0).abs());
        }
        row.q("max_abs_err", worst)
            .tol("max_abs_err", HEAT_ORIGIN_TOL);
        Ok(worst <= HEAT_ORIGIN_TOL)
    });
    let mut rng = lab.rng(401);
    let pairs: Vec<(GroupElement, f64)> = (0..lab.cfg.checks.heat_pairs)
        .map(|_| {
            (
                random_point(&mut rng, n, 1.5),
                10f64.powf(rng.random_range(-0.6..0.6)),
            )
        })
        .collect();
    rep.check("heat_scaling", |row| {
        let errs: Vec<f64> = pairs
            .par_iter()
            .map(|(g, h)| {
                let a = heat_kernel(g, *h, cfg)?;
                let b =
                    h.powf(-(n as f64) - 1.0) * heat_kernel(&g.dilate(1.0 / h.sqrt())?, 1.0, cfg)?;
                Ok(rel_err(a, b))
            })
            .collect::<Result<_>>()?;
        let worst = errs.iter().copied().fold(0.0, f64::max);
        row.q("pairs", pairs.len() as f64)
            .q("max_rel_err", worst)
            .tol("max_rel_err", HEAT_SCALING_TOL);
        Ok(worst <= HEAT_SCALING_TOL)
    });
    rep.check("heat_inverse_symmetry", |row| {
        let errs: Vec<f64> = pairs
            .par_iter()
            .map(|(g, h)| {
                Ok(rel_err(
                    heat_kernel(&g.inverse(), *h, cfg)?,
                    heat_kernel(g, *h, cfg)?,
                ))
            })
            .collect::<Result<_>>()?;
        let worst = errs.iter().copied().fold(0.0, f64::max);
        row.q("pairs", pairs.len() as f64)
            .q("max_rel_err", worst)
            .tol("max_rel_err", HEAT_INVERSE_TOL);
        Ok(worst <= HEAT_INVERSE_TOL)
    });
}

fn riesz_checks(lab: &Lab, rep: &mut Report) {
    let cfg = &lab.cfg.quadrature;
    let n = lab.cfg.n;
    let q = (2 * n + 2) as f64;
    let l = match lab.cfg.kernel.kind {
        KernelKind::Riesz { l } => l,
        _ => 1,
    };
    let mut rng = lab.rng(501);
    rep.check("riesz_scaling", |row| {
        let pairs: Vec<(GroupElement, f64)> = (0..lab.cfg.checks.riesz_pairs)
            .map(|i| {
                (
                    random_point(&mut rng, n, 1.0),
                    if i % 2 == 0 { 1.0 / 3.0 } else { 3.0 },
                )
            })
            .collect();
        // Two-dimensional subordination route, which is not homogeneous by construction.
        let errs: Vec<f64> = pairs
            .par_iter()
            .map(|(g, r)| {
                let a = riesz_kernel(l, &g.dilate(*r)?, cfg)? * r.powf(q);
                let b = riesz_kernel(l, g, cfg)?;
                Ok(rel_err(a, b))
            })
            .collect::<Result<_>>()?;
        let worst = errs.iter().copied().fold(0.0, f64::max);
        row.q("pairs", pairs.len() as f64)
            .q("max_rel_err", worst)
            .tol("max_rel_err", RIESZ_SCALING_TOL);
        Ok(worst <= RIESZ_SCALING_TOL)
    });
    let sphere: Vec<GroupElement> = (0..lab.cfg.checks.sphere_samples)
        .map(|_| sphere_sample(&mut rng, n))
        .collect();
    rep.check("riesz_bound", |row| {
        let refined = cfg.refined();
        let sup = |c| -> Result<f64> {
            let v: Vec<f64> = sphere
                .par_iter()
                .map(|g| Ok(riesz_kernel_gamma(l, g, c)?.abs()))
                .collect::<Result<_>>()?;
            Ok(v.into_iter().fold(0.0, f64::max))
        };
        let (a, b) = (sup(cfg)?, sup(&refined)?);
        let change = rel_err(b, a);
        row.q("samples", sphere.len() as f64)
            .q("sup", a)
            .q("sup_refined", b)
            .q("rel_change", change)
            .tol("rel_change", RIESZ_BOUND_STABILITY);
        Ok(a.is_finite() && b.is_finite() && change <= RIESZ_BOUND_STABILITY)
    });
    rep.check("riesz_table_vs_direct", |row| {
        let eval = lab.evaluator(&KernelSpec::riesz(n, l))?;
        let pts: Vec<GroupElement> = (0..lab.cfg.checks.held_out)
            .map(|_| random_point(&mut rng, n, 2.0))
            .collect();
        let errs: Vec<f64> = pts
            .par_iter()
            .map(|g| Ok(rel_err(eval.eval_real(g)?, riesz_kernel_gamma(l, g, cfg)?)))
            .collect::<Result<_>>()?;
        let worst = errs.iter().copied().fold(0.0, f64::max);
        row.q("points", pts.len() as f64)
            .q("max_rel_err", worst)
            .tol("max_rel_err", TABLE_TOL);
        Ok(worst <= TABLE_TOL)
    });
}

fn closed_form_checks(lab: &Lab, rep: &mut Report) {
    let cfg = &lab.cfg.quadrature;
    rep.check("second_order_t_closed_form", |row| {
        let mut rng = lab.rng(601);
        let pts: Vec<GroupElement> = (0..lab.cfg.checks.closed_form_points)
            .map(|_| random_point(&mut rng, 1, 2.0))
            .collect();
        let errs: Vec<f64> = pts
            .par_iter()
            .map(|g| {
                Ok(rel_err(
                    second_order_t_kernel(g, cfg)?,
                    closed_form_t_kernel(g)?,
                ))
            })
            .collect::<Result<_>>()?;
        let worst = errs.iter().copied().fold(0.0, f64::max);
        row.q("points", pts.len() as f64)
            .q("max_rel_err", worst)
            .tol("max_rel_err", CLOSED_FORM_TOL);
        Ok(worst <= CLOSED_FORM_TOL)
    });
    rep.check("second_order_t_unit", |row| {
        let v = second_order_t_kernel(&GroupElement::h1(0.0, 0.0, 1.0), cfg)?;
        let want = 1.0 / (8.0 * std::f64::consts::PI);
        row.q("value", v)
            .q("expected", want)
            .tol("rel_err", CLOSED_FORM_TOL);
        Ok((v - want).abs() <= CLOSED_FORM_TOL * want)
    });
    rep.check("second_order_t_constant", |row| {
        let c2 = second_order_t_constant(1);
        let want = Complex64::new(0.0, -1.0 / (8.0 * std::f64::consts::PI.powi(2)));
        let err = (c2 - want).norm();
        row.q("re", c2.re)
            .q("im", c2.im)
            .q("abs_err", err)
            .tol("abs_err", C2_TOL);
        Ok(err <= C2_TOL)
    });
}

fn scans(lab: &Lab, rep: &mut Report) {
    let n = lab.cfg.n;
    let res = lab.cfg.checks.scan_resolution;
    rep.check("scan_riesz", |row| {
        let spec = KernelSpec::riesz(n, 1);
        let s = sphere_scan(
            &*lab.evaluator(&spec)?,
            &spec.label(),
            res,
            ZERO_THRESHOLD,
            false,
        );
        row.q("zero_fraction", s.zero_fraction)
            .q("sign_regions", s.sign_regions as f64)
            .q("min_abs", s.min_abs)
            .q("max_abs", s.max_abs)
            .tol("zero_fraction", ZERO_FRACTION);
        Ok(s.zero_fraction < ZERO_FRACTION)
    });
    rep.check("scan_cauchy_szego", |row| {
        let spec = KernelSpec {
            n,
            kind: KernelKind::CauchySzego { c: 1.0 },
        };
        let s = sphere_scan(
            &*lab.evaluator(&spec)?,
            &spec.label(),
            res,
            ZERO_THRESHOLD,
            false,
        );
        row.q("zero_fraction", s.zero_fraction)
            .q("min_abs", s.min_abs)
            .tol("zero_fraction", 0.0);
        Ok(s.zero_fraction == 0.0)
    });
    rep.check("scan_second_order_t", |row| {
        let spec = KernelSpec {
            n,
            kind: KernelKind::SecondOrderT,
        };
        let s = sphere_scan(
            &*lab.evaluator(&spec)?,
            &spec.label(),
            res,
            ZERO_THRESHOLD,
            false,
        );
        row.q("sign_mismatch_t", s.sign_mismatch_t)
            .q("sign_regions", s.sign_regions as f64)
            .tol("sign_mismatch_t", 0.0);
        Ok(s.sign_mismatch_t == 0.0)
    });
}
