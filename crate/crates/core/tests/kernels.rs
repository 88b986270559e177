use std::f64::consts::PI;

use hcomm::group::GroupElement;
use hcomm::kernels::certify::ranked_directions;
use hcomm::kernels::second_order::{sech_cosh_sq_parity, sech_cosh_sq_quadrature};
use hcomm::kernels::{
    cauchy_szego_kernel, closed_form_t_kernel, heat_kernel, nondegen_certify, riesz_kernel,
    riesz_kernel_gamma, second_order_t_constant, second_order_t_kernel, second_order_xx_kernel,
    sphere_scan, KernelEvaluator, KernelKind, KernelSpec, QuadratureConfig, SearchConfig,
    SphereTable,
};
use hcomm::tiling::{TileId, TileSystem};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn cfg() -> QuadratureConfig {
    QuadratureConfig::default()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

fn point(rng: &mut ChaCha8Rng, scale: f64) -> GroupElement {
    loop {
        let g = GroupElement::h1(
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
            rng.random_range(-scale..scale),
        );
        if g.rho() > 0.05 * scale {
            return g;
        }
    }
}

#[test]
fn heat_at_origin() {
    for h in [0.5, 1.0, 2.0] {
        let v = heat_kernel(&GroupElement::origin(1), h, &cfg()).unwrap();
        assert!((64.0 * h * h * v - 1.0).abs() <= 1e-6);
    }
    assert!(heat_kernel(&GroupElement::origin(1), 0.0, &cfg()).is_err());
}

#[test]
fn heat_scaling_and_symmetry() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..100 {
        let g = point(&mut rng, 1.5);
        let h = 10f64.powf(rng.random_range(-0.6..0.6));
        let a = heat_kernel(&g, h, &cfg()).unwrap();
        assert!(a > 0.0);
        let b = h.powi(-2) * heat_kernel(&g.dilate(1.0 / h.sqrt()).unwrap(), 1.0, &cfg()).unwrap();
        assert!(rel(a, b) <= 1e-6);
        assert!(rel(heat_kernel(&g.inverse(), h, &cfg()).unwrap(), a) <= 1e-10);
    }
}

#[test]
fn heat_total_mass() {
    // p_1 depends on (|z|, t): ∫ p_1 = ∫∫ 2π r p_1(r, t) dr dt, midpoint rule.
    let (rmax, tmax) = (8.0, 40.0);
    let (nr, nt) = (80, 200);
    let (dr, dt) = (rmax / nr as f64, 2.0 * tmax / nt as f64);
    let mut total = 0.0;
    for i in 0..nr {
        let r = (i as f64 + 0.5) * dr;
        for k in 0..nt / 2 {
            let t = (k as f64 + 0.5) * dt;
            total += 2.0
                * 2.0
                * PI
                * r
                * heat_kernel(&GroupElement::h1(r, 0.0, t), 1.0, &cfg()).unwrap()
                * dr
                * dt;
        }
    }
    assert!((total - 1.0).abs() < 0.02, "mass {total}");
}

#[test]
fn riesz_scaling_and_routes() {
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for i in 0..50 {
        let g = point(&mut rng, 1.0);
        let r = if i % 2 == 0 { 1.0 / 3.0 } else { 3.0 };
        let a = riesz_kernel(1, &g.dilate(r).unwrap(), &cfg()).unwrap() * r.powi(4);
        let b = riesz_kernel(1, &g, &cfg()).unwrap();
        assert!(rel(a, b) <= 1e-4);
        if i < 10 {
            let c = riesz_kernel_gamma(1, &g, &cfg()).unwrap();
            assert!(rel(b, c) <= 1e-3);
            assert!(rel(c, riesz_kernel_gamma(1, &g, &cfg().refined()).unwrap()) <= 1e-3);
        }
    }
    assert!(riesz_kernel(1, &GroupElement::origin(1), &cfg()).is_err());
}

#[test]
fn riesz_bounded_on_sphere() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut sup = 0.0f64;
    for _ in 0..500 {
        let g = point(&mut rng, 1.0);
        let g = g.dilate(1.0 / g.rho()).unwrap();
        for l in 1..=2 {
            sup = sup.max(riesz_kernel_gamma(l, &g, &cfg()).unwrap().abs());
        }
    }
    assert!(sup.is_finite() && sup > 0.0 && sup < 10.0, "sup {sup}");
}

#[test]
fn cauchy_szego_examples() {
    let k = cauchy_szego_kernel(&GroupElement::h1(0.6, 0.8, 0.0), 1.0).unwrap();
    assert!((k - Complex64::new(1.0, 0.0)).norm() < 1e-15);
    let k = cauchy_szego_kernel(&GroupElement::h1(0.0, 0.0, 1.0), 1.0).unwrap();
    assert!((k - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
    assert!(cauchy_szego_kernel(&GroupElement::origin(1), 1.0).is_err());
}

#[test]
fn second_order_t_examples() {
    let v = closed_form_t_kernel(&GroupElement::h1(0.0, 0.0, 1.0)).unwrap();
    assert!((v - 1.0 / (8.0 * PI)).abs() < 1e-15);
    assert!((v - 0.0397887).abs() < 1e-7);
    let q = second_order_t_kernel(&GroupElement::h1(0.0, 0.0, 1.0), &cfg()).unwrap();
    assert!((q - v).abs() <= 1e-3 * v);
    for z in [(1.0, 0.0), (0.3, -2.0), (-0.01, 0.02)] {
        assert_eq!(
            closed_form_t_kernel(&GroupElement::h1(z.0, z.1, 0.0)).unwrap(),
            0.0
        );
        assert!(
            second_order_t_kernel(&GroupElement::h1(z.0, z.1, 0.0), &cfg())
                .unwrap()
                .abs()
                < 1e-12
        );
    }
    let c2 = second_order_t_constant(1);
    assert!((c2 - Complex64::new(0.0, -1.0 / (8.0 * PI * PI))).norm() <= 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    for _ in 0..50 {
        let g = point(&mut rng, 2.0);
        let a = second_order_t_kernel(&g, &cfg()).unwrap();
        let b = closed_form_t_kernel(&g).unwrap();
        assert!(rel(a, b) <= 1e-3);
    }
}

#[test]
fn second_order_xx_homogeneity_and_parity() {
    let mut rng = ChaCha8Rng::seed_from_u64(25);
    for _ in 0..10 {
        let g = point(&mut rng, 1.0);
        for (j, k) in [(1, 2), (1, 1), (2, 2)] {
            let a = second_order_xx_kernel(j, k, &g.dilate(3.0).unwrap(), &cfg()).unwrap() * 81.0;
            let b = second_order_xx_kernel(j, k, &g, &cfg()).unwrap();
            assert!((a - b).norm() <= 1e-3 * b.norm().max(1e-12));
        }
    }
    for n in [1, 2] {
        for phi in [-1.2, -0.3, 0.0, 0.7, 1.5] {
            let a = sech_cosh_sq_parity(n, phi);
            let b = sech_cosh_sq_quadrature(n, phi, &cfg()).unwrap();
            assert!((b.re - a).abs() <= 1e-6 * a.abs().max(1.0) && b.im.abs() <= 1e-6);
        }
    }
}

#[test]
fn sphere_scans() {
    let c = cfg();
    let riesz = KernelEvaluator::new(&KernelSpec::riesz(1, 1), &c, 1025, None).unwrap();
    let s = sphere_scan(&riesz, "riesz1", 10_000, 1e-6, false);
    assert!(s.zero_fraction < 0.01);
    let cs = KernelEvaluator::new(
        &KernelSpec {
            n: 1,
            kind: KernelKind::CauchySzego { c: 1.0 },
        },
        &c,
        1025,
        None,
    )
    .unwrap();
    assert_eq!(
        sphere_scan(&cs, "cs", 10_000, 1e-6, false).zero_fraction,
        0.0
    );
    let t = KernelEvaluator::new(
        &KernelSpec {
            n: 1,
            kind: KernelKind::SecondOrderT,
        },
        &c,
        1025,
        None,
    )
    .unwrap();
    assert_eq!(
        sphere_scan(&t, "t", 10_000, 1e-6, false).sign_mismatch_t,
        0.0
    );
    let xx = KernelEvaluator::new(
        &KernelSpec {
            n: 1,
            kind: KernelKind::SecondOrderXx { j: 1, k: 2 },
        },
        &c,
        257,
        None,
    )
    .unwrap();
    assert!(sphere_scan(&xx, "xx", 10_000, 1e-6, false).zero_fraction < 0.01);
}

#[test]
fn table_matches_direct_and_cache() {
    let c = cfg();
    let spec = KernelSpec::riesz(1, 2);
    let dir = tempfile::tempdir().unwrap();
    let built = SphereTable::load_or_build(&spec, 513, &c, Some(dir.path())).unwrap();
    let loaded = SphereTable::load(dir.path(), &spec, 513, &c)
        .unwrap()
        .expect("cached table");
    assert_eq!(built.values, loaded.values);
    let mut rng = ChaCha8Rng::seed_from_u64(26);
    for _ in 0..100 {
        let g = point(&mut rng, 2.0);
        let a = built.eval(&g).unwrap();
        assert!(rel(a, riesz_kernel_gamma(2, &g, &c).unwrap()) <= 1e-3);
        assert_eq!(a, loaded.eval(&g).unwrap());
    }
}

#[test]
fn certification_small_sample() {
    let sys = TileSystem::new(1).unwrap();
    let search = SearchConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(27);
    for spec in [
        KernelSpec::riesz(1, 1),
        KernelSpec {
            n: 1,
            kind: KernelKind::SecondOrderT,
        },
    ] {
        let eval = KernelEvaluator::new(&spec, &cfg(), 1025, None).unwrap();
        let dirs = ranked_directions(&eval, search.directions);
        let mut by_level: Vec<Vec<f64>> = vec![Vec::new(); 3];
        for _ in 0..8 {
            let base = TileId {
                level: 0,
                z: vec![rng.random_range(-20..=20), rng.random_range(-20..=20)],
                m: rng.random_range(-100..=100),
            };
            for big_n in 0..=2 {
                for (li, j) in [-1, 0, 1].into_iter().enumerate() {
                    let c = nondegen_certify(
                        &sys,
                        &eval,
                        &base.at_level(j),
                        big_n,
                        &search,
                        &dirs,
                        None,
                    );
                    assert!(c.certified(), "{spec:?} N={big_n} j={j}");
                    assert!(c.min_scaled_magnitude > search.threshold);
                    by_level[li].push(c.min_scaled_magnitude);
                }
            }
        }
        // Homogeneity: the scaled constants do not depend on the level.
        for l in [0, 2] {
            for (a, b) in by_level[l].iter().zip(&by_level[1]) {
                assert!(rel(*a, *b) <= 0.2);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cauchy_szego_homogeneity(x in -3.0..3.0f64, y in -3.0..3.0f64, t in -3.0..3.0f64, r in 0.1..10.0f64) {
        let g = GroupElement::h1(x, y, t);
        prop_assume!(g.rho() > 1e-3);
        let a = cauchy_szego_kernel(&g.dilate(r).unwrap(), 1.0).unwrap() * r.powi(4);
        let b = cauchy_szego_kernel(&g, 1.0).unwrap();
        prop_assert!((a - b).norm() <= 1e-12 * b.norm());
    }

    #[test]
    fn closed_form_t_sign_and_reflection(x in -3.0..3.0f64, y in -3.0..3.0f64, t in -3.0..3.0f64) {
        let g = GroupElement::h1(x, y, t);
        prop_assume!(g.rho() > 1e-3);
        let k = closed_form_t_kernel(&g).unwrap();
        prop_assert_eq!(k.signum() * t.signum() >= 0.0, true);
        prop_assert!((closed_form_t_kernel(&g.inverse()).unwrap() + k).abs() <= 1e-14 * k.abs().max(1e-300));
    }
}
