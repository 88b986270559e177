//! Schatten/Besov equivalence across a symbol family, and the growth of
//! oscillation and spectral sums at the critical exponent.

use super::operator::{instance, Instance};
use super::{spread, Lab, Member, Report};
use crate::besov::{besov_direct, besov_martingale, besov_shell, BesovMethod};
use crate::commutator::oscillation_profile;
use crate::error::Result;
use crate::tiling::SymbolGrid;

fn besov_by(lab: &Lab, method: BesovMethod, grid: &SymbolGrid, p: f64) -> Result<f64> {
    let sys = &lab.sys;
    Ok(match method {
        BesovMethod::Martingale => besov_martingale(sys, grid, p, lab.cfg.level_window)?.value,
        BesovMethod::Shell => besov_shell(sys, grid, p, lab.cfg.level_window)?.value,
        BesovMethod::Direct => {
            besov_direct(sys, grid, p, sys.q() / p, &lab.cfg.direct, lab.cfg.seed)?.value
        }
    })
}

/// Smallest nonconstant member.
fn smallest(members: &[Member]) -> Option<&Member> {
    members
        .iter()
        .filter(|m| m.radius > 0.0)
        .min_by(|a, b| a.radius.total_cmp(&b.radius))
}

fn abort(rep: &mut Report, stage: &str, e: crate::Error) {
    rep.check(stage, |_| Err(e));
}

fn build_all(lab: &Lab, rep: &mut Report, members: &[Member], depth: u32) -> Option<Vec<Instance>> {
    let mut out = Vec::new();
    for m in members {
        match instance(lab, m, depth) {
            Ok(i) => out.push(i),
            Err(e) => {
                abort(rep, &format!("instance_{}", m.label), e);
                return None;
            }
        }
    }
    Some(out)
}

pub fn run_equivalence(lab: &Lab) -> Report {
    let mut rep = Report::new(lab, "equivalence");
    let members = match lab.stage("family", lab.members()) {
        Ok(m) => m,
        Err(e) => {
            abort(&mut rep, "family", e);
            return rep;
        }
    };
    let q = lab.sys.q();
    let ps: Vec<f64> = lab.cfg.p.iter().copied().filter(|&p| p > q).collect();
    if ps.len() != lab.cfg.p.len() {
        rep.check("exponents", |row| {
            row.note(format!(
                "exponents at or below {q} are outside the equivalence range"
            ));
            Ok(false)
        });
    }
    let Some(insts) = build_all(lab, &mut rep, &members, lab.cfg.depth) else {
        return rep;
    };
    let method = lab.cfg.thresholds.equivalence_method;
    let mut csv = String::from("symbol,radius,p,schatten,martingale,shell,direct,ratio\n");

    for &p in &ps {
        let mut ratios: Vec<(f64, f64, f64)> = Vec::new();
        for inst in &insts {
            let label = &inst.member.label;
            let s = inst.spectrum.schatten(p).unwrap_or(f64::NAN);
            rep.check(&format!("ratio_{label}_p{p}"), |row| {
                let g = &inst.grid;
                let mart = lab
                    .stage(
                        "besov_martingale",
                        besov_martingale(&lab.sys, g, p, lab.cfg.level_window),
                    )?
                    .value;
                let shell = lab
                    .stage(
                        "besov_shell",
                        besov_shell(&lab.sys, g, p, lab.cfg.level_window),
                    )?
                    .value;
                let direct = besov_direct(&lab.sys, g, p, q / p, &lab.cfg.direct, lab.cfg.seed);
                let (dv, de) = match &direct {
                    Ok(d) => (d.value, d.errbar.unwrap_or(f64::NAN)),
                    Err(e) => {
                        row.note(format!("direct estimator: {e}"));
                        (f64::NAN, f64::NAN)
                    }
                };
                if let (BesovMethod::Direct, Err(e)) = (method, direct) {
                    return lab.stage("besov_direct", Err(e));
                }
                row.q("p", p)
                    .q("radius", inst.member.radius)
                    .q("schatten", s)
                    .q("martingale", mart)
                    .q("shell", shell)
                    .q("direct", dv)
                    .q("direct_errbar", de);
                if inst.is_constant() {
                    row.note("constant symbol: ratio skipped");
                    return Ok(s == 0.0 && mart == 0.0 && shell == 0.0);
                }
                let (rm, rs, rd) = (s / mart, s / shell, s / dv);
                row.q("ratio_martingale", rm)
                    .q("ratio_shell", rs)
                    .q("ratio_direct", rd);
                let primary = match method {
                    BesovMethod::Martingale => rm,
                    BesovMethod::Shell => rs,
                    BesovMethod::Direct => rd,
                };
                csv.push_str(&format!(
                    "{label},{:e},{p},{s:e},{mart:e},{shell:e},{dv:e},{primary:e}\n",
                    inst.member.radius
                ));
                ratios.push((rm, rs, rd));
                Ok(primary.is_finite() && primary > 0.0)
            });
        }
        rep.check(&format!("spread_p{p}"), |row| {
            let pick = |k: usize| {
                ratios
                    .iter()
                    .map(|r| [r.0, r.1, r.2][k])
                    .collect::<Vec<f64>>()
            };
            let (sm, ss, sd) = (spread(&pick(0)), spread(&pick(1)), spread(&pick(2)));
            row.q("p", p)
                .q("symbols", ratios.len() as f64)
                .q("spread_martingale", sm.unwrap_or(f64::NAN))
                .q("spread_shell", ss.unwrap_or(f64::NAN))
                .q("spread_direct", sd.unwrap_or(f64::NAN))
                .tol("spread", lab.cfg.thresholds.equivalence_spread);
            let primary = match method {
                BesovMethod::Martingale => sm,
                BesovMethod::Shell => ss,
                BesovMethod::Direct => sd,
            };
            match primary {
                Some(v) => Ok(v <= lab.cfg.thresholds.equivalence_spread),
                // Only constant symbols: nothing to compare.
                None => Ok(ratios.is_empty()),
            }
        });
    }
    rep.plot("ratio_vs_scale", csv);

    if lab.cfg.refine {
        if let Some(m) = smallest(&members) {
            let coarse = insts
                .iter()
                .find(|i| i.member.label == m.label)
                .expect("member instance");
            match instance(lab, m, lab.cfg.depth + 1) {
                Err(e) => abort(&mut rep, "refinement", e),
                Ok(fine) => {
                    for &p in &ps {
                        rep.check(&format!("refinement_p{p}"), |row| {
                            let r0 = coarse.spectrum.schatten(p).unwrap_or(f64::NAN)
                                / besov_by(lab, method, &coarse.grid, p)?;
                            let r1 = fine.spectrum.schatten(p).unwrap_or(f64::NAN)
                                / besov_by(lab, method, &fine.grid, p)?;
                            let change = (r1 / r0 - 1.0).abs();
                            row.q("p", p)
                                .q("radius", m.radius)
                                .q("ratio_depth", r0)
                                .q("ratio_depth_plus_one", r1)
                                .q("rel_change", change)
                                .tol("rel_change", lab.cfg.thresholds.refinement_stability);
                            Ok(change <= lab.cfg.thresholds.refinement_stability)
                        });
                    }
                }
            }
        }
    }
    rep
}

pub fn run_constancy(lab: &Lab) -> Report {
    let mut rep = Report::new(lab, "constancy");
    let members = match lab.stage("family", lab.members()) {
        Ok(m) => m,
        Err(e) => {
            abort(&mut rep, "family", e);
            return rep;
        }
    };
    let sys = &lab.sys;
    let crit = sys.q();
    let th = &lab.cfg.thresholds;
    let (d0, d1) = (lab.cfg.depth, lab.cfg.depth + 1);
    let mut osc_csv = String::from("symbol,depth,level,per_level,cumulative\n");

    for m in &members {
        rep.check(&format!("oscillation_{}", m.label), |row| {
            let mut totals = Vec::new();
            for depth in [d0, d1] {
                let grid = lab.stage("sample", lab.grid(m, depth))?;
                let prof = lab.stage(
                    "oscillation",
                    oscillation_profile(sys, &grid, lab.cfg.b0, None),
                )?;
                for ((l, v), c) in prof
                    .levels
                    .iter()
                    .zip(&prof.per_level)
                    .zip(&prof.cumulative)
                {
                    osc_csv.push_str(&format!("{},{depth},{l},{v:e},{c:e}\n", m.label));
                }
                totals.push(prof.cumulative.last().copied().unwrap_or(0.0));
            }
            row.q("cumulative_depth", totals[0])
                .q("cumulative_depth_plus_one", totals[1]);
            if m.radius == 0.0 {
                row.tol("abs", 0.0);
                return Ok(totals.iter().all(|v| *v == 0.0));
            }
            let growth = totals[1] / totals[0];
            row.q("growth", growth).tol("growth", th.oscillation_growth);
            Ok(growth >= th.oscillation_growth)
        });
    }
    rep.plot("oscillation_partial_sums", osc_csv);

    // Spectral sums need assembly at D + 1; the smallest bump and the constants keep that affordable.
    let mut picks: Vec<&Member> = smallest(&members).into_iter().collect();
    picks.extend(members.iter().filter(|m| m.radius == 0.0));
    let mut spec_csv = String::from("symbol,depth,p,k,partial_sum\n");
    for m in picks {
        let pair = instance(lab, m, d0).and_then(|a| Ok((a, instance(lab, m, d1)?)));
        let (a, b) = match pair {
            Ok(v) => v,
            Err(e) => {
                abort(&mut rep, &format!("instance_{}", m.label), e);
                continue;
            }
        };
        let total =
            |i: &Instance, p: f64| i.spectrum.partial_sums(p).last().copied().unwrap_or(0.0);
        for (depth, inst) in [(d0, &a), (d1, &b)] {
            for (k, s) in inst.spectrum.partial_sums(crit).iter().enumerate() {
                spec_csv.push_str(&format!("{},{depth},{crit},{},{s:e}\n", m.label, k + 1));
            }
        }
        rep.check(&format!("spectral_growth_{}_p{crit}", m.label), |row| {
            let (s0, s1) = (total(&a, crit), total(&b, crit));
            row.q("p", crit)
                .q("sum_depth", s0)
                .q("sum_depth_plus_one", s1);
            if m.radius == 0.0 {
                row.tol("abs", th.zero);
                return Ok(s0 <= th.zero && s1 <= th.zero);
            }
            row.q("growth", s1 / s0)
                .tol("growth", th.oscillation_growth);
            Ok(s1 / s0 >= th.oscillation_growth)
        });
        for &p in lab.cfg.p.iter().filter(|&&p| p > crit) {
            rep.check(&format!("spectral_change_{}_p{p}", m.label), |row| {
                let (s0, s1) = (total(&a, p), total(&b, p));
                row.q("p", p).q("sum_depth", s0).q("sum_depth_plus_one", s1);
                if m.radius == 0.0 {
                    row.tol("abs", th.zero);
                    return Ok(s0 <= th.zero && s1 <= th.zero);
                }
                let change = (s1 / s0 - 1.0).abs();
                row.q("rel_change", change)
                    .tol("rel_change", th.spectral_change);
                Ok(change <= th.spectral_change)
            });
        }
    }
    rep.plot("spectral_partial_sums", spec_csv);
    rep
}
