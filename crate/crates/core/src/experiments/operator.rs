//! Per-symbol commutator, spectrum and Besov reports, with the NWO and
//! mixed-norm bounds.

use super::{rel_err, spread, Lab, Member, Report};
use crate::besov::{besov_direct, besov_martingale, besov_shell};
use crate::commutator::{mixed_norm, nwo_sum, OperatorMatrix};
use crate::error::Result;
use crate::spectra::{schatten_weak, SpectrumReport};
use crate::tiling::SymbolGrid;

const FROBENIUS_TOL: f64 = 1e-10;

pub(crate) struct Instance {
    pub member: Member,
    pub grid: SymbolGrid,
    pub op: OperatorMatrix,
    pub spectrum: SpectrumReport,
}

impl Instance {
    pub fn is_constant(&self) -> bool {
        self.op.support.is_empty()
    }
}

pub(crate) fn instance(lab: &Lab, member: &Member, depth: u32) -> Result<Instance> {
    let grid = lab.stage("sample", lab.grid(member, depth))?;
    let op = lab.stage("assemble", lab.assemble(&grid, &member.label))?;
    let spectrum = lab.stage("spectrum", SpectrumReport::of(&op, &lab.cfg.p))?;
    Ok(Instance {
        member: member.clone(),
        grid,
        op,
        spectrum,
    })
}

fn instances(lab: &Lab, rep: &mut Report) -> Vec<Instance> {
    let members = match lab.members() {
        Ok(m) => m,
        Err(e) => {
            rep.check("family", |_| Err(e));
            return Vec::new();
        }
    };
    let mut out = Vec::new();
    for m in &members {
        match instance(lab, m, lab.cfg.depth) {
            Ok(i) => out.push(i),
            Err(e) => rep.check(&format!("instance_{}", m.label), |_| Err(e)),
        }
    }
    out
}

pub fn run_commutator(lab: &Lab) -> Report {
    let mut rep = Report::new(lab, "commutator");
    let insts = instances(lab, &mut rep);
    let p = lab.cfg.p.first().copied().unwrap_or(6.0);
    let level = lab.cfg.root_level - 1;
    let mut nwo_ratios = Vec::new();
    let mut russo = Vec::new();
    let mut mixed_besov = Vec::new();
    for inst in &insts {
        let label = &inst.member.label;
        let op = &inst.op;
        rep.check(&format!("assemble_{label}"), |row| {
            let d = op.dim();
            let diag = (0..d)
                .step_by((d / 97).max(1))
                .map(|i| op.entry(i, i).norm())
                .fold(0.0, f64::max);
            row.q("dim", d as f64)
                .q("support", op.support.len() as f64)
                .q("dense", op.is_dense() as u8 as f64)
                .q("truncation", op.truncation)
                .q("frobenius", op.frobenius_sq().sqrt())
                .q("max_abs_diagonal", diag)
                .tol("max_abs_diagonal", 0.0);
            for w in &op.warnings {
                row.note(w.clone());
            }
            Ok(diag == 0.0 && (!inst.is_constant() || op.is_zero()))
        });
        if inst.is_constant() {
            rep.check(&format!("constant_zero_{label}"), |row| {
                let s = inst.spectrum.schatten(p).unwrap_or(f64::NAN);
                row.q("schatten", s).tol("schatten", 0.0);
                Ok(s == 0.0)
            });
            continue;
        }
        let sp = inst.spectrum.schatten(p).unwrap_or(f64::NAN);
        rep.check(&format!("nwo_{label}"), |row| {
            let r = nwo_sum(&lab.sys, op, p, level, &lab.cfg.search)?;
            let ratio = r.value / sp;
            nwo_ratios.push(ratio);
            row.q("p", p)
                .q("level", level as f64)
                .q("nwo", r.value)
                .q("schatten", sp)
                .q("ratio", ratio)
                .q("tiles", r.tiles as f64)
                .q("skipped", r.skipped as f64)
                .tol("ratio", lab.cfg.thresholds.nwo_constant);
            Ok(ratio.is_finite() && ratio <= lab.cfg.thresholds.nwo_constant)
        });
        rep.check(&format!("mixed_{label}"), |row| {
            let m = mixed_norm(op, p)?;
            let weak = schatten_weak(&inst.spectrum.singular_values, p)?;
            let c_disc = weak / (m.mixed * m.adjoint).sqrt();
            let besov = besov_martingale(&lab.sys, &inst.grid, p, lab.cfg.level_window)?.value;
            russo.push(c_disc);
            mixed_besov.push(m.mixed / besov);
            row.q("p", p)
                .q("mixed", m.mixed)
                .q("adjoint", m.adjoint)
                .q("weak_schatten", weak)
                .q("c_disc", c_disc)
                .q("besov_martingale", besov)
                .q("mixed_over_besov", m.mixed / besov)
                .tol("c_disc", lab.cfg.thresholds.russo_constant);
            Ok(c_disc.is_finite() && c_disc <= lab.cfg.thresholds.russo_constant)
        });
    }
    if !nwo_ratios.is_empty() {
        rep.check("nwo_constant", |row| {
            let c = nwo_ratios.iter().copied().fold(0.0, f64::max);
            row.q("p", p)
                .q("symbols", nwo_ratios.len() as f64)
                .q("c", c)
                .tol("c", lab.cfg.thresholds.nwo_constant);
            Ok(c <= lab.cfg.thresholds.nwo_constant)
        });
    }
    if !russo.is_empty() {
        rep.check("russo_constant", |row| {
            let c = russo.iter().copied().fold(0.0, f64::max);
            let lo = mixed_besov.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = mixed_besov.iter().copied().fold(0.0, f64::max);
            row.q("p", p)
                .q("c_disc", c)
                .q("mixed_besov_lower", lo)
                .q("mixed_besov_upper", hi)
                .q(
                    "mixed_besov_spread",
                    spread(&mixed_besov).unwrap_or(f64::NAN),
                )
                .tol("c_disc", lab.cfg.thresholds.russo_constant);
            Ok(c <= lab.cfg.thresholds.russo_constant && lo > 0.0 && hi.is_finite())
        });
    }
    rep
}

pub fn run_schatten(lab: &Lab) -> Report {
    let mut rep = Report::new(lab, "schatten");
    let insts = instances(lab, &mut rep);
    for inst in &insts {
        let label = &inst.member.label;
        let s = &inst.spectrum;
        rep.check(&format!("spectrum_{label}"), |row| {
            let sum_sq: f64 = s.singular_values.iter().map(|v| v * v).sum();
            let fro2 = s.frobenius * s.frobenius;
            let err = if fro2 == 0.0 {
                sum_sq
            } else {
                rel_err(sum_sq, fro2)
            };
            row.q("dimension", s.dimension as f64)
                .q("nonzero", s.singular_values.len() as f64)
                .q("sigma_1", s.singular_values.first().copied().unwrap_or(0.0))
                .q("frobenius", s.frobenius)
                .q("frobenius_rel_err", err)
                .tol("frobenius_rel_err", FROBENIUS_TOL);
            for &p in &lab.cfg.p {
                row.q(&format!("schatten_{p}"), s.schatten(p).unwrap_or(f64::NAN));
                row.q(&format!("weak_schatten_{p}"), s.weak(p).unwrap_or(f64::NAN));
            }
            Ok(err <= FROBENIUS_TOL)
        });
        rep.plot(&format!("singular_values_{label}"), s.to_csv());
    }
    rep
}

pub fn run_besov(lab: &Lab) -> Report {
    let mut rep = Report::new(lab, "besov");
    let members = match lab.members() {
        Ok(m) => m,
        Err(e) => {
            rep.check("family", |_| Err(e));
            return rep;
        }
    };
    let q = lab.sys.q();
    for m in &members {
        let grid = match lab.grid(m, lab.cfg.depth) {
            Ok(g) => g,
            Err(e) => {
                rep.check(&format!("sample_{}", m.label), |_| Err(e));
                continue;
            }
        };
        for &p in &lab.cfg.p {
            rep.check(&format!("besov_{}_p{p}", m.label), |row| {
                let mart = besov_martingale(&lab.sys, &grid, p, lab.cfg.level_window)?;
                let shell = besov_shell(&lab.sys, &grid, p, lab.cfg.level_window)?;
                let direct =
                    besov_direct(&lab.sys, &grid, p, q / p, &lab.cfg.direct, lab.cfg.seed)?;
                row.q("p", p)
                    .q("martingale", mart.value)
                    .q("shell", shell.value)
                    .q("direct", direct.value)
                    .q("direct_errbar", direct.errbar.unwrap_or(f64::NAN));
                let vals = [mart.value, shell.value, direct.value];
                if m.radius == 0.0 {
                    return Ok(vals.iter().all(|v| *v == 0.0));
                }
                row.q("shell_over_martingale", shell.value / mart.value)
                    .q("direct_over_martingale", direct.value / mart.value);
                Ok(vals.iter().all(|v| v.is_finite() && *v > 0.0))
            });
        }
    }
    rep
}
