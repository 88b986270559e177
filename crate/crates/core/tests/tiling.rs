use hcomm::group::GroupElement;
use hcomm::tiling::{median, Region, SymbolGrid, TileId, TileSystem, MEMBERSHIP_TOL};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const F_TOL: f64 = 1e-13;

fn sys() -> TileSystem {
    TileSystem::new(1).unwrap()
}

/// Independent membership: `g ∈ T` iff `δ_{λ^{-j}}(cent(T)^{-1} g)` lies in the
/// basic tile `{z ∈ Q_0, f(z) - 1/(2n) ≤ t < f(z)}`.
fn in_tile(sys: &TileSystem, t: &TileId, g: &GroupElement) -> bool {
    let q = sys
        .center(t)
        .inverse()
        .multiply(g)
        .unwrap()
        .dilate(1.0 / sys.width(t.level))
        .unwrap();
    let z: Vec<f64> = q.x.iter().chain(&q.y).copied().collect();
    if z.iter().any(|c| !(-0.5..0.5).contains(c)) {
        return false;
    }
    let f = sys.boundary_f(&z, F_TOL).unwrap();
    let h = 1.0 / (2 * sys.n()) as f64;
    q.t >= f - h && q.t < f
}

fn random_point(rng: &mut ChaCha8Rng, scale: f64) -> GroupElement {
    GroupElement::h1(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale * scale..scale * scale),
    )
}

#[test]
fn boundary_f_at_origin() {
    let s = sys();
    assert!((s.boundary_f(&[0.0, 0.0], 1e-14).unwrap() - 0.25).abs() < 1e-13);
    assert!(s.boundary_f(&[0.5, 0.0], 1e-10).is_err());
    assert!(s.boundary_f(&[0.0, 0.0], 0.0).is_err());
}

#[test]
fn child_count_and_parent() {
    let s = sys();
    let t = TileId {
        level: 2,
        z: vec![3, -7],
        m: 11,
    };
    let kids = s.children(&t);
    assert_eq!(kids.len(), 81);
    let mut uniq = kids.clone();
    uniq.sort();
    uniq.dedup();
    assert_eq!(uniq.len(), 81);
    for (i, k) in kids.iter().enumerate() {
        assert_eq!(s.parent_with_index(k), (t.clone(), i));
    }
    assert_eq!(TileSystem::new(2).unwrap().children_count(), 5usize.pow(6));
}

#[test]
fn sizes_are_exact() {
    let s = sys();
    for j in -3..=3 {
        assert_eq!(s.width(j), 3f64.powi(j));
        assert_eq!(s.height(j), 3f64.powi(2 * j) / 2.0);
    }
    assert_eq!(Region::new(TileId::basic(1), 2).len(&s), 6561);
}

#[test]
fn centers_lie_in_their_tiles() {
    let s = sys();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let t = TileId {
            level: rng.random_range(-3..=3),
            z: vec![rng.random_range(-50..=50), rng.random_range(-50..=50)],
            m: rng.random_range(-500..=500),
        };
        assert_eq!(
            s.tile_of(&s.center(&t), t.level, MEMBERSHIP_TOL).unwrap(),
            t
        );
        assert!(in_tile(&s, &t, &s.center(&t)));
    }
}

#[test]
fn partition_and_nesting() {
    let s = sys();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut refused = 0usize;
    let total = 4000;
    for _ in 0..total {
        let g = random_point(&mut rng, 30.0);
        let mut prev: Option<TileId> = None;
        for j in -3..=3 {
            match s.tile_of(&g, j, MEMBERSHIP_TOL) {
                Ok(t) => {
                    assert!(
                        in_tile(&s, &t, &g),
                        "level {j}: {t:?} does not contain {g:?}"
                    );
                    // The neighbours in the t-fibre must not also claim the point.
                    for dm in [-1, 1] {
                        assert!(!in_tile(
                            &s,
                            &TileId {
                                m: t.m + dm,
                                ..t.clone()
                            },
                            &g
                        ));
                    }
                    if let Some(p) = &prev {
                        assert_eq!(&s.parent(p), &t);
                    }
                    prev = Some(t);
                }
                Err(_) => {
                    refused += 1;
                    prev = None;
                }
            }
        }
    }
    assert!((refused as f64) < 0.005 * (7 * total) as f64);
}

#[test]
fn basic_tile_measure() {
    let s = sys();
    let o = TileId::basic(1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let samples = 100_000;
    let hits = (0..samples)
        .filter(|_| {
            let g = GroupElement::h1(
                rng.random_range(-0.5..0.5),
                rng.random_range(-0.5..0.5),
                rng.random_range(-1.0..1.0),
            );
            s.tile_of(&g, 0, MEMBERSHIP_TOL)
                .map(|t| t == o)
                .unwrap_or(false)
        })
        .count();
    let p = hits as f64 / samples as f64;
    let est = 2.0 * p;
    let sigma = 2.0 * (p * (1.0 - p) / samples as f64).sqrt();
    assert!((est - 0.5).abs() <= 3.0 * sigma, "{est} ± {sigma}");
    assert_eq!(s.measure(0), 0.5);
}

#[test]
fn median_examples() {
    assert_eq!(median(&[1.0, 2.0, 3.0]), 2.0);
    assert_eq!(median(&[1.0, 1.0, 5.0, 5.0]), 3.0);
    let s = sys();
    let region = Region::new(TileId::basic(1), 1);
    let g = SymbolGrid::constant(&s, region.clone(), 2.5);
    assert_eq!(g.median_on_tile(&s, &region.root).unwrap(), 2.5);
}

fn random_grid(s: &TileSystem, depth: u32, seed: u64) -> SymbolGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let region = Region::new(
        TileId {
            level: 1,
            z: vec![2, -1],
            m: 3,
        },
        depth,
    );
    let vals = (0..region.len(s))
        .map(|_| rng.random_range(-2.0..2.0))
        .collect();
    SymbolGrid::from_values(s, region, vals).unwrap()
}

#[test]
fn expectation_of_constant() {
    let s = sys();
    let region = Region::new(TileId::basic(1), 2);
    let g = SymbolGrid::constant(&s, region, -1.5);
    for level in -2..=0 {
        assert!(g
            .conditional_expectation(&s, level)
            .unwrap()
            .values
            .iter()
            .all(|v| *v == -1.5));
    }
    assert!(g.conditional_expectation(&s, 1).is_err());
    assert!(g.conditional_expectation(&s, -3).is_err());
}

#[test]
fn expectation_is_a_contraction_in_lp() {
    let s = sys();
    for seed in 0..20 {
        let g = random_grid(&s, 2, seed);
        for level in -1..=1 {
            let e = g.conditional_expectation(&s, level).unwrap();
            for p in [1.0, 2.0, 3.5, f64::INFINITY] {
                assert!(e.lp_norm(&s, p) <= g.lp_norm(&s, p) * (1.0 + 1e-12));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Tower property and idempotence of `E_k` on nested partitions.
    #[test]
    fn expectation_tower(seed in any::<u64>(), a in -1i32..=1, b in -1i32..=1) {
        let s = sys();
        let g = random_grid(&s, 2, seed);
        let ea = g.conditional_expectation(&s, a).unwrap();
        let eab = ea.conditional_expectation(&s, b).unwrap();
        let direct = g.conditional_expectation(&s, a.max(b)).unwrap();
        for (x, y) in eab.values.iter().zip(&direct.values) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let again = ea.conditional_expectation(&s, a).unwrap();
        for (x, y) in again.values.iter().zip(&ea.values) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    /// `E_k` is an orthogonal projection for the discrete L² inner product.
    #[test]
    fn expectation_is_self_adjoint(s1 in any::<u64>(), s2 in any::<u64>(), level in -1i32..=1) {
        let s = sys();
        let f = random_grid(&s, 2, s1);
        let g = random_grid(&s, 2, s2);
        let ef = f.conditional_expectation(&s, level).unwrap();
        let eg = g.conditional_expectation(&s, level).unwrap();
        let a = ef.inner(&s, &g);
        let b = f.inner(&s, &eg);
        let c = ef.inner(&s, &eg);
        let scale = f.lp_norm(&s, 2.0) * g.lp_norm(&s, 2.0);
        prop_assert!((a - b).abs() <= 1e-12 * scale);
        prop_assert!((a - c).abs() <= 1e-12 * scale);
    }

    /// `f` solves the refinement equation `λ² f(z) = f(w) + n + 1 + ω(d, w)` with
    /// `λz = d + w`, `d` the nearest lattice point.
    #[test]
    fn boundary_f_refinement(x in -0.5..0.5f64, y in -0.5..0.5f64) {
        let s = sys();
        let (dx, dy) = ((3.0 * x + 0.5).floor(), (3.0 * y + 0.5).floor());
        let (wx, wy) = (3.0 * x - dx, 3.0 * y - dy);
        let omega = 2.0 * (dy * wx - dx * wy);
        let lhs = 9.0 * s.boundary_f(&[x, y], 1e-14).unwrap();
        let rhs = s.boundary_f(&[wx, wy], 1e-14).unwrap() + 2.0 + omega;
        prop_assert!((lhs - rhs).abs() < 1e-11);
    }

    #[test]
    fn translation_covariance(
        x in -20.0..20.0f64, y in -20.0..20.0f64, t in -200.0..200.0f64,
        a in -30i64..=30, b in -30i64..=30, k in -300i64..=300, level in -2i32..=2,
    ) {
        let s = sys();
        let g = GroupElement::h1(x, y, t);
        let shift = s.center(&TileId { level, z: vec![a, b], m: k });
        let (Ok(t0), Ok(t1)) = (
            s.tile_of(&g, level, MEMBERSHIP_TOL),
            s.tile_of(&shift.multiply(&g).unwrap(), level, MEMBERSHIP_TOL),
        ) else {
            return Ok(());
        };
        let want = shift.multiply(&s.center(&t0)).unwrap();
        prop_assert_eq!(s.tile_of(&want, level, MEMBERSHIP_TOL).unwrap(), t1);
    }

    #[test]
    fn dilation_covariance(x in -20.0..20.0f64, y in -20.0..20.0f64, t in -200.0..200.0f64, level in -3i32..=2) {
        let s = sys();
        let g = GroupElement::h1(x, y, t);
        let (Ok(a), Ok(b)) = (
            s.tile_of(&g, level, MEMBERSHIP_TOL),
            s.tile_of(&g.dilate(3.0).unwrap(), level + 1, MEMBERSHIP_TOL),
        ) else {
            return Ok(());
        };
        prop_assert_eq!(a.at_level(level + 1), b);
    }
}
