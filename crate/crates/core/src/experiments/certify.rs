//! Partner-tile certification over random tiles, levels and depths `N`.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;

use super::{Lab, Report};
use crate::kernels::certify::{pair_sign, ranked_directions};
use crate::kernels::{nondegen_certify, Certificate, KernelKind, KernelSpec};
use crate::tiling::TileId;

pub fn run_certify(lab: &Lab) -> Report {
    let mut rep = Report::new(lab, "certify");
    let n = lab.cfg.n;
    let specs = [
        lab.cfg.kernel,
        KernelSpec {
            n,
            kind: KernelKind::SecondOrderT,
        },
    ];
    let sizes = &lab.cfg.checks;
    let mut rng = lab.rng(701);
    let bases: Vec<TileId> = (0..sizes.certify_tiles)
        .map(|_| TileId {
            level: 0,
            z: (0..2 * n).map(|_| rng.random_range(-20..=20)).collect(),
            m: rng.random_range(-100..=100),
        })
        .collect();
    let search = &lab.cfg.search;
    let dense = (search.per_axis as f64 * 4f64.powf(1.0 / (2 * n + 1) as f64)).ceil() as usize;
    let mut csv = String::from("kernel,big_n,level,tile,certified,sign,c,distance_ratio\n");

    for spec in specs {
        let label = spec.label();
        let eval = match lab.evaluator(&spec) {
            Ok(e) => e,
            Err(e) => {
                rep.check(&format!("certify_{label}_rate"), |_| Err(e));
                continue;
            }
        };
        let dirs = ranked_directions(&eval, search.directions);
        let jobs: Vec<(usize, i32, u32)> = (0..bases.len())
            .flat_map(|b| {
                sizes
                    .certify_levels
                    .iter()
                    .flat_map(move |&j| sizes.certify_n.iter().map(move |&nn| (b, j, nn)))
            })
            .collect();
        let mut certs: Vec<(usize, i32, Certificate, bool)> = Vec::new();
        rep.check(&format!("certify_{label}_rate"), |row| {
            certs = jobs
                .par_iter()
                .map(|&(b, j, big_n)| {
                    let t = bases[b].at_level(j);
                    let c = nondegen_certify(&lab.sys, &eval, &t, big_n, search, &dirs, None);
                    let recheck = match &c.partner {
                        Some(p) => pair_sign(&lab.sys, &eval, &t, p, dense).0 == c.sign,
                        None => false,
                    };
                    (b, j, c, recheck)
                })
                .collect();
            for (b, j, c, _) in &certs {
                csv.push_str(&format!(
                    "{label},{},{j},{b},{},{},{:e},{}\n",
                    c.big_n,
                    c.certified(),
                    c.sign,
                    c.min_scaled_magnitude,
                    c.distance_ratio
                        .map(|d| format!("{d:e}"))
                        .unwrap_or_default()
                ));
            }
            let ok = certs.iter().filter(|c| c.2.certified()).count();
            let ratios: Vec<f64> = certs.iter().filter_map(|c| c.2.distance_ratio).collect();
            let min_c = certs
                .iter()
                .filter(|c| c.2.certified())
                .map(|c| c.2.min_scaled_magnitude)
                .fold(f64::INFINITY, f64::min);
            row.q("cases", certs.len() as f64)
                .q("certified", ok as f64)
                .q("rate", ok as f64 / certs.len().max(1) as f64)
                .q("min_c", min_c)
                .q("a1", ratios.iter().copied().fold(f64::INFINITY, f64::min))
                .q("a2", ratios.iter().copied().fold(0.0, f64::max))
                .tol("rate", 1.0);
            Ok(ok == certs.len() && !certs.is_empty())
        });
        rep.check(&format!("certify_{label}_dense_sign"), |row| {
            let cert: Vec<_> = certs.iter().filter(|c| c.2.certified()).collect();
            let held = cert.iter().filter(|c| c.3).count();
            row.q("certified", cert.len() as f64)
                .q("sign_constant_dense", held as f64)
                .q("per_axis_dense", dense as f64);
            Ok(held == cert.len())
        });
        rep.check(&format!("certify_{label}_level_stability"), |row| {
            // Median achieved constant per (N, j), compared with j = 0.
            let mut worst = 0.0f64;
            for &big_n in &sizes.certify_n {
                let mut med: BTreeMap<i32, f64> = BTreeMap::new();
                for &j in &sizes.certify_levels {
                    let v: Vec<f64> = certs
                        .iter()
                        .filter(|c| c.1 == j && c.2.big_n == big_n && c.2.certified())
                        .map(|c| c.2.min_scaled_magnitude)
                        .collect();
                    let m = crate::tiling::median(&v);
                    row.q(&format!("median_c_n{big_n}_j{j}"), m);
                    med.insert(j, m);
                }
                let reference = med
                    .get(&0)
                    .or_else(|| med.values().next())
                    .copied()
                    .unwrap_or(f64::NAN);
                for m in med.values() {
                    worst = worst.max((m / reference - 1.0).abs());
                }
            }
            row.q("max_rel_deviation", worst)
                .tol("max_rel_deviation", lab.cfg.thresholds.certify_stability);
            Ok(worst <= lab.cfg.thresholds.certify_stability)
        });
    }
    rep.plot("certificates", csv);
    rep
}
