use std::sync::Arc;

use hcomm::commutator::{
    assemble, mixed_norm, nwo_sum, oscillation_profile, sign_pattern_witness, AssemblyConfig,
    OperatorMatrix,
};
use hcomm::group::{GroupElement, SmoothSymbol};
use hcomm::kernels::{KernelEvaluator, KernelKind, KernelSpec, QuadratureConfig, SearchConfig};
use hcomm::spectra::singular_values;
use hcomm::tiling::{Region, Sampling, SymbolGrid, TileId, TileSystem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Setup {
    sys: TileSystem,
    spec: KernelSpec,
    eval: Arc<KernelEvaluator>,
}

fn setup(kind: KernelKind) -> Setup {
    let spec = KernelSpec { n: 1, kind };
    let eval =
        Arc::new(KernelEvaluator::new(&spec, &QuadratureConfig::default(), 1025, None).unwrap());
    Setup {
        sys: TileSystem::new(1).unwrap(),
        spec,
        eval,
    }
}

impl Setup {
    fn grid(&self, region: &Region, b: &SmoothSymbol) -> SymbolGrid {
        SymbolGrid::sample(&self.sys, region.clone(), b, Sampling::CenterValue).unwrap()
    }

    fn op(&self, g: &SymbolGrid) -> OperatorMatrix {
        assemble(
            &self.sys,
            g,
            &self.spec,
            self.eval.clone(),
            "test",
            &AssemblyConfig::default(),
        )
        .unwrap()
    }
}

fn region(level: i32, depth: u32) -> Region {
    Region::new(
        TileId {
            level,
            z: vec![0, 0],
            m: 0,
        },
        depth,
    )
}

fn bump(r: f64) -> SmoothSymbol {
    SmoothSymbol::bump(GroupElement::origin(1), r)
}

#[test]
fn constant_symbol_gives_zero_operator() {
    let s = setup(KernelKind::Riesz { l: 1 });
    let reg = region(0, 1);
    let op = s.op(&SymbolGrid::constant(&s.sys, reg, 3.0));
    assert!(op.is_zero());
    assert!(singular_values(&op).unwrap().iter().all(|v| *v == 0.0));
    assert_eq!(mixed_norm(&op, 6.0).unwrap().mixed, 0.0);
    assert_eq!(mixed_norm(&op, 6.0).unwrap().adjoint, 0.0);
    assert!(mixed_norm(&op, 2.0).is_err());
}

#[test]
fn linearity_and_zero_diagonal() {
    let s = setup(KernelKind::Riesz { l: 1 });
    let reg = region(0, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v1: Vec<f64> = (0..81).map(|_| rng.random_range(-1.0..1.0)).collect();
    let v2: Vec<f64> = (0..81).map(|_| rng.random_range(-1.0..1.0)).collect();
    let sum: Vec<f64> = v1.iter().zip(&v2).map(|(a, b)| a + b).collect();
    let g = |v: &[f64]| SymbolGrid::from_values(&s.sys, reg.clone(), v.to_vec()).unwrap();
    let (a, b, c) = (s.op(&g(&v1)), s.op(&g(&v2)), s.op(&g(&sum)));
    let scale = (0..81)
        .flat_map(|i| (0..81).map(move |j| (i, j)))
        .map(|(i, j)| c.entry(i, j).norm())
        .fold(0.0, f64::max);
    for i in 0..81 {
        assert_eq!(c.entry(i, i).norm(), 0.0);
        for j in 0..81 {
            assert!((a.entry(i, j) + b.entry(i, j) - c.entry(i, j)).norm() <= 1e-14 * scale);
        }
    }
}

#[test]
fn kernel_reflection_symmetries() {
    let reg = region(0, 1);
    let t = setup(KernelKind::SecondOrderT);
    let op = t.op(&t.grid(&reg, &bump(0.5)));
    let cs = setup(KernelKind::CauchySzego { c: 1.0 });
    let oc = cs.op(&cs.grid(&reg, &bump(0.5)));
    for i in 0..81 {
        for j in 0..81 {
            // K_T(g^{-1}) = -K_T(g) makes the matrix symmetric; the
            // Cauchy–Szegő kernel is conjugated, so that matrix is anti-Hermitian.
            assert!(
                (op.entry(i, j) - op.entry(j, i)).norm()
                    <= 1e-14 * op.entry(i, j).norm().max(1e-300)
            );
            assert!(
                (oc.entry(i, j) + oc.entry(j, i).conj()).norm()
                    <= 1e-14 * oc.entry(i, j).norm().max(1e-300)
            );
        }
    }
}

#[test]
fn translation_invariance() {
    let s = setup(KernelKind::Riesz { l: 1 });
    let reg = region(0, 1);
    let b = SmoothSymbol::bump(GroupElement::h1(0.05, -0.02, 0.01), 0.45);
    let h = s.sys.center(&TileId {
        level: 0,
        z: vec![2, -1],
        m: 3,
    });
    let root = s
        .sys
        .tile_of(&h.multiply(&s.sys.center(&reg.root)).unwrap(), 0, 1e-9)
        .unwrap();
    let moved = Region::new(root, 1);
    let a = singular_values(&s.op(&s.grid(&reg, &b))).unwrap();
    let c = singular_values(&s.op(&s.grid(&moved, &b.translated(&h).unwrap()))).unwrap();
    assert_eq!(a.len(), c.len());
    for (x, y) in a.iter().zip(&c) {
        assert!((x - y).abs() <= 1e-10 * a[0]);
    }
}

#[test]
fn dilation_covariance() {
    let s = setup(KernelKind::Riesz { l: 1 });
    let b = bump(0.45);
    let a = singular_values(&s.op(&s.grid(&region(0, 1), &b))).unwrap();
    // b ∘ δ_{1/3} on the region one level up.
    let c = singular_values(&s.op(&s.grid(&region(1, 1), &b.dilated(1.0 / 3.0).unwrap()))).unwrap();
    for (x, y) in a.iter().zip(&c).take(20) {
        assert!((x - y).abs() <= 0.05 * x.max(1e-3 * a[0]), "{x} vs {y}");
    }
}

#[test]
fn nwo_terms_match_direct_double_sum() {
    let s = setup(KernelKind::Riesz { l: 1 });
    let reg = region(0, 2);
    let b = SmoothSymbol::bump(GroupElement::h1(0.02, 0.01, 0.0), 0.15);
    let g = s.grid(&reg, &b);
    let op = s.op(&g);
    let rep = nwo_sum(&s.sys, &op, 6.0, -1, &SearchConfig::default()).unwrap();
    assert_eq!(rep.tiles, 81);
    assert!(rep.skipped_fraction < 0.02);
    let mu = g.cell_measure(&s.sys);
    let k = |i: usize, j: usize| {
        let ci = s.sys.center(&reg.fine_tiles(&s.sys)[i]);
        let cj = s.sys.center(&reg.fine_tiles(&s.sys)[j]);
        s.eval
            .eval_real(&cj.inverse().multiply(&ci).unwrap())
            .unwrap()
    };
    let mut checked = 0;
    for term in rep.terms.iter().filter(|t| t.value > 0.0).take(12) {
        let e = reg.block(&s.sys, &term.tile).unwrap();
        let f = reg.block(&s.sys, &term.partner).unwrap();
        let v = &g.values;
        let (mut sum, mut pos, mut neg) = (0.0, 0usize, 0usize);
        for i in e.clone().filter(|&i| {
            if term.s == 1 {
                v[i] < term.median
            } else {
                v[i] > term.median
            }
        }) {
            for j in f.clone().filter(|&j| {
                if term.s == 1 {
                    v[j] >= term.median
                } else {
                    v[j] <= term.median
                }
            }) {
                let x = (v[i] - v[j]) * k(i, j);
                if x > 0.0 {
                    pos += 1;
                } else if x < 0.0 {
                    neg += 1;
                }
                sum += x;
            }
        }
        let direct = sum.abs() * mu * mu / s.sys.measure(term.tile.level);
        assert!((direct - term.value).abs() <= 1e-10 * direct);
        assert!(pos == 0 || neg == 0, "summands change sign");
        checked += 1;
    }
    assert!(checked > 0);
    let zero = nwo_sum(
        &s.sys,
        &s.op(&SymbolGrid::constant(&s.sys, reg, 1.0)),
        6.0,
        -1,
        &SearchConfig::default(),
    )
    .unwrap();
    assert_eq!(zero.value, 0.0);
}

#[test]
fn oscillation_of_constant_is_zero() {
    let s = TileSystem::new(1).unwrap();
    let g = SymbolGrid::constant(&s, region(0, 3), 2.0);
    let prof = oscillation_profile(&s, &g, 1, None).unwrap();
    assert!(prof
        .per_level
        .iter()
        .chain(&prof.cumulative)
        .all(|v| *v == 0.0));
    assert!(
        oscillation_profile(&s, &SymbolGrid::constant(&s, region(0, 1), 2.0), 2, None).is_err()
    );
}

#[test]
fn oscillation_grows_with_levels() {
    let s = TileSystem::new(1).unwrap();
    let b = SmoothSymbol::bump(GroupElement::h1(0.1, 0.0, 0.0), 0.9);
    let g = SymbolGrid::sample(&s, region(0, 3), &b, Sampling::CenterValue).unwrap();
    let prof = oscillation_profile(&s, &g, 1, None).unwrap();
    assert!(prof.per_level.iter().all(|v| *v > 0.0));
    assert!(prof.cumulative.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn sign_pattern_witnesses() {
    let s = TileSystem::new(1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..50 {
        let t = TileId {
            level: rng.random_range(-2..=2),
            z: vec![rng.random_range(-9..=9), rng.random_range(-9..=9)],
            m: rng.random_range(-40..=40),
        };
        let w = sign_pattern_witness(&s, &t, 2);
        assert_eq!(w.patterns, 4);
        assert!(w.complete(), "{t:?}");
        assert!(w.min_margin > 0.0);
    }
}
