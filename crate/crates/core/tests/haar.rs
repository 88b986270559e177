use hcomm::haar::{
    haar_expand, haar_reconstruct, oscillation_ratio, select_max_haar, HaarBasis, HaarCoefficients,
};
use hcomm::tiling::{Region, SymbolGrid, TileId, TileSystem};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn setup(depth: u32) -> (TileSystem, HaarBasis, Region) {
    let sys = TileSystem::new(1).unwrap();
    let basis = HaarBasis::new(&sys);
    (
        sys,
        basis,
        Region::new(
            TileId {
                level: 0,
                z: vec![1, 0],
                m: -2,
            },
            depth,
        ),
    )
}

fn random_grid(sys: &TileSystem, region: &Region, seed: u64) -> SymbolGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..region.len(sys))
        .map(|_| rng.random_range(-3.0..3.0))
        .collect();
    SymbolGrid::from_values(sys, region.clone(), vals).unwrap()
}

/// Grid holding `h_T^eps` (zero outside `T`).
fn haar_grid(
    sys: &TileSystem,
    basis: &HaarBasis,
    region: &Region,
    t: &TileId,
    eps: usize,
) -> SymbolGrid {
    let h = &basis.build(sys, region, t).unwrap()[eps - 1];
    let mut vals = vec![0.0; region.len(sys)];
    let blk = region.block(sys, t).unwrap();
    let per = blk.len() / sys.children_count();
    for (i, v) in vals[blk].iter_mut().enumerate() {
        *v = h.child_coeffs[i / per];
    }
    SymbolGrid::from_values(sys, region.clone(), vals).unwrap()
}

#[test]
fn gram_matrix_is_identity() {
    let (sys, basis, region) = setup(1);
    let t = region.root.clone();
    let mut fns: Vec<SymbolGrid> = vec![SymbolGrid::constant(
        &sys,
        region.clone(),
        sys.measure(t.level).powf(-0.5),
    )];
    fns.extend((1..81).map(|e| haar_grid(&sys, &basis, &region, &t, e)));
    for (i, a) in fns.iter().enumerate() {
        for (j, b) in fns.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((a.inner(&sys, b) - want).abs() < 1e-12, "({i}, {j})");
        }
    }
}

#[test]
fn cancellation_and_norm_scaling() {
    let (sys, basis, _) = setup(1);
    let mut products = Vec::new();
    let mut normalized: Vec<Vec<f64>> = Vec::new();
    for level in [-1, 0, 1] {
        let region = Region::new(
            TileId {
                level,
                z: vec![0, 2],
                m: 1,
            },
            1,
        );
        let hs = basis.build(&sys, &region, &region.root).unwrap();
        assert_eq!(hs.len(), 80);
        let mu = sys.measure(level);
        let mut row = Vec::new();
        for h in &hs {
            assert!(h.integral(&sys).abs() < 1e-12 * mu.sqrt());
            assert!((h.lp_norm(&sys, 2.0) - 1.0).abs() < 1e-12);
            products.push(h.lp_norm(&sys, 1.0) * h.lp_norm(&sys, f64::INFINITY));
            for p in [1.0, 4.0, f64::INFINITY] {
                let e = if p.is_infinite() { 0.0 } else { 1.0 / p };
                row.push(h.lp_norm(&sys, p) * mu.powf(0.5 - e));
            }
        }
        normalized.push(row);
    }
    // `|T|^{1/2 - 1/p} ‖h‖_p` does not depend on the level.
    for r in &normalized[1..] {
        for (a, b) in r.iter().zip(&normalized[0]) {
            assert!((a / b - 1.0).abs() < 1e-12);
        }
    }
    let lo = products.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = products.iter().copied().fold(0.0, f64::max);
    // Recorded band for the Gram–Schmidt system.
    assert!(lo > 0.5 && hi < 10.0, "[{lo}, {hi}]");
}

#[test]
fn fine_tiles_have_no_basis() {
    let (sys, basis, region) = setup(1);
    let fine = &region.fine_tiles(&sys)[0];
    assert!(basis.build(&sys, &region, fine).is_err());
}

#[test]
fn single_haar_function_has_one_coefficient() {
    let (sys, basis, region) = setup(2);
    let t = sys.children(&region.root)[17].clone();
    let g = haar_grid(&sys, &basis, &region, &t, 5);
    let c = haar_expand(&sys, &basis, &g).unwrap();
    let entries = c.entries(&sys).unwrap();
    let big: Vec<_> = entries.iter().filter(|e| e.value.abs() > 1e-12).collect();
    assert_eq!(big.len(), 1);
    assert_eq!((big[0].level, big[0].eps), (t.level, 5));
    assert!((big[0].value - 1.0).abs() < 1e-12);
    assert!(c.coarse_average.abs() < 1e-12);
}

#[test]
fn entries_round_trip() {
    let (sys, basis, region) = setup(2);
    let g = random_grid(&sys, &region, 11);
    let c = haar_expand(&sys, &basis, &g).unwrap();
    let back = HaarCoefficients::from_entries(
        &sys,
        region.clone(),
        c.coarse_average,
        &c.entries(&sys).unwrap(),
    )
    .unwrap();
    assert_eq!(back, c);
    let bad = [hcomm::haar::CoefficientEntry {
        level: region.fine_level(),
        z: vec![0, 0],
        m: 0,
        eps: 1,
        value: 1.0,
    }];
    assert!(HaarCoefficients::from_entries(&sys, region, 0.0, &bad).is_err());
}

#[test]
fn select_max_examples() {
    let (sys, basis, region) = setup(1);
    let t = region.root.clone();
    let g = haar_grid(&sys, &basis, &region, &t, 3);
    let (e, c) = select_max_haar(&sys, &basis, &g, &t).unwrap();
    assert_eq!(e, 3);
    assert!((c - 1.0).abs() < 1e-12);
    let k = SymbolGrid::constant(&sys, region, 7.0);
    let (e, c) = select_max_haar(&sys, &basis, &k, &t).unwrap();
    assert_eq!(e, 1);
    assert!(c.abs() < 1e-12);
}

#[test]
fn oscillation_bounded_by_maximal_coefficient() {
    // For p = 2 the left side is the ℓ² norm of the 80 coefficients, so the
    // ratio is at most sqrt(80).
    let (sys, basis, region) = setup(2);
    let g = random_grid(&sys, &region, 5);
    let mut worst = 0.0f64;
    for t in region.tiles_at(&sys, -1).unwrap() {
        let r = oscillation_ratio(&sys, &basis, &g, &t, 2.0)
            .unwrap()
            .unwrap();
        assert!(r >= 1.0 - 1e-12);
        worst = worst.max(r);
    }
    assert!(worst <= 80f64.sqrt());
    for p in [1.0, 4.0, 8.0] {
        for t in region.tiles_at(&sys, -1).unwrap().iter().take(10) {
            let r = oscillation_ratio(&sys, &basis, &g, t, p).unwrap().unwrap();
            assert!(r.is_finite() && r > 0.0 && r <= 80.0);
        }
    }
}

#[test]
fn martingale_difference_identity() {
    let (sys, basis, region) = setup(2);
    let g = random_grid(&sys, &region, 9);
    let c = haar_expand(&sys, &basis, &g).unwrap();
    for k in 0..region.depth as usize {
        let level = region.root.level - k as i32;
        let mut only = c.clone();
        only.coarse_average = 0.0;
        for (i, lev) in only.levels.iter_mut().enumerate() {
            if i != k {
                lev.iter_mut().flatten().for_each(|v| *v = 0.0);
            }
        }
        let d = haar_reconstruct(&sys, &basis, &only).unwrap();
        let fine = g.conditional_expectation(&sys, level - 1).unwrap();
        let coarse = g.conditional_expectation(&sys, level).unwrap();
        for i in 0..d.values.len() {
            assert!((d.values[i] - (fine.values[i] - coarse.values[i])).abs() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn round_trip_and_parseval(seed in any::<u64>()) {
        let (sys, basis, region) = setup(2);
        let g = random_grid(&sys, &region, seed);
        let c = haar_expand(&sys, &basis, &g).unwrap();
        let back = haar_reconstruct(&sys, &basis, &c).unwrap();
        let err = back.values.iter().zip(&g.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-10);
        // Brute-force inner products against every Haar function agree with
        // the fast coefficients.
        let energy = c.sum_of_squares() + c.coarse_average.powi(2) * sys.measure(region.root.level);
        let norm2 = g.lp_norm(&sys, 2.0).powi(2);
        prop_assert!((energy - norm2).abs() <= 1e-10 * norm2);
        let t = region.root.clone();
        for e in [1usize, 40, 80] {
            let brute = g.inner(&sys, &haar_grid(&sys, &basis, &region, &t, e));
            prop_assert!((brute - c.levels[0][0][e - 1]).abs() <= 1e-10);
        }
    }
}
