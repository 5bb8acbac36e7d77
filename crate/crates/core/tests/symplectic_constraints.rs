use nalgebra::DMatrix;
use proptest::prelude::*;
use tmpnn::systems;
use tmpnn::{
    ode_to_map, symplectic_penalty, MultiIndex, PolySpace, symplectic_residual, FlowConfig, SymplecticStructure, TaylorMap,
};

fn binomial(n: usize, k: usize) -> usize {
    (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
}

fn quadratic_map(w1: &[f64; 4], w2: &[f64; 6]) -> TaylorMap {
    TaylorMap::from_blocks(&[
        DMatrix::zeros(2, 1),
        DMatrix::from_row_slice(2, 2, w1),
        DMatrix::from_row_slice(2, 3, w2),
    ])
    .unwrap()
}

#[test]
fn constraint_count_matches_entries_times_monomials() {
    for n in [2, 4, 6] {
        for k in 1..=3 {
            let r = symplectic_residual(
                &TaylorMap::identity(n, k),
                &SymplecticStructure::canonical(n).unwrap(),
            )
            .unwrap();
            let expected = binomial(n, 2) * binomial(n + 2 * (k - 1), n);
            assert_eq!(r.constraint_count(), expected, "n={n} k={k}");
        }
    }
    let r = symplectic_residual(
        &TaylorMap::identity(4, 2),
        &SymplecticStructure::interleaved(4).unwrap(),
    )
    .unwrap();
    assert_eq!(r.constraint_count(), 90);
}

#[test]
fn quadratic_shear_needs_the_x_squared_constraint() {
    // x -> x + c x², y -> y + d x² - 2c xy satisfies all five two-dimensional
    // second-order constraints usually quoted, yet its Jacobian determinant is
    // 1 - 4c²x².
    let (c, d) = (0.3, -0.7);
    let map = quadratic_map(&[1.0, 0.0, 0.0, 1.0], &[c, 0.0, 0.0, d, -2.0 * c, 0.0]);
    let w2 = |i: usize, j: usize| map.block(2)[(i - 1, j - 1)];
    assert_eq!(w2(1, 1) * w2(2, 3) - w2(1, 3) * w2(2, 1), 0.0);
    assert_eq!(w2(1, 2) * w2(2, 3) - w2(1, 3) * w2(2, 2), 0.0);
    assert_eq!(w2(2, 2) + 2.0 * w2(1, 1), 0.0);
    assert_eq!(w2(1, 2) + 2.0 * w2(2, 3), 0.0);

    let r = symplectic_residual(&map, &SymplecticStructure::canonical(2).unwrap()).unwrap();
    let coeffs = &r.entries[0].coeffs;
    let x_squared = PolySpace::shared(2, r.max_degree)
        .index_of(&MultiIndex::new(vec![2, 0]))
        .unwrap();
    let missing = 2.0 * (w2(1, 1) * w2(2, 2) - w2(1, 2) * w2(2, 1));
    assert!((coeffs[x_squared].abs() - missing.abs()).abs() < 1e-15);
    assert!((missing + 4.0 * c * c).abs() < 1e-15);
    for (i, v) in coeffs.iter().enumerate() {
        if i != x_squared {
            assert!(v.abs() < 1e-15, "coefficient {i} = {v}");
        }
    }
}

#[test]
fn truncated_pendulum_map_is_symplectic_only_to_truncation() {
    let ode = systems::pendulum(9.8, 0.3).unwrap();
    let map = ode_to_map(&ode, &FlowConfig::new(0.1)).unwrap();
    let form = SymplecticStructure::canonical(2).unwrap();
    let full = symplectic_penalty(&map, &form).unwrap();
    let linear = symplectic_penalty(&map.with_order(1), &form).unwrap();
    assert!(linear < 1e-24, "{linear}");
    assert!(full > 1e-8 && full < 1e-5, "{full}");
}

fn shear(a: f64, lower: bool) -> DMatrix<f64> {
    if lower {
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, a, 1.0])
    } else {
        DMatrix::from_row_slice(2, 2, &[1.0, a, 0.0, 1.0])
    }
}

proptest! {
    #[test]
    fn unit_determinant_linear_maps_have_no_penalty(a in -2.0..2.0f64, b in -2.0..2.0f64, c in -2.0..2.0f64) {
        let m = shear(a, false) * shear(b, true) * shear(c, false);
        let map = TaylorMap::linear(&m, 2).unwrap();
        let p = symplectic_penalty(&map, &SymplecticStructure::canonical(2).unwrap()).unwrap();
        prop_assert!(p < 1e-24, "{}", p);
    }

    #[test]
    fn penalty_scales_with_determinant_defect(s in 0.5..1.5f64) {
        let m = DMatrix::from_row_slice(2, 2, &[s, 0.0, 0.0, 1.0]);
        let p = symplectic_penalty(&TaylorMap::linear(&m, 1).unwrap(), &SymplecticStructure::canonical(2).unwrap()).unwrap();
        prop_assert!((p - (s - 1.0).powi(2)).abs() < 1e-14);
    }

    #[test]
    fn structures_agree_on_products_of_planes(t1 in 0.0..6.3f64, t2 in 0.0..6.3f64) {
        // Block-diagonal rotations in (x, x') and (y, y') are symplectic for the
        // interleaved form, and so is their reordering for the canonical one.
        let mut inter = DMatrix::zeros(4, 4);
        for (p, t) in [(0usize, t1), (2, t2)] {
            inter[(p, p)] = t.cos();
            inter[(p, p + 1)] = t.sin();
            inter[(p + 1, p)] = -t.sin();
            inter[(p + 1, p + 1)] = t.cos();
        }
        let perm = [0usize, 2, 1, 3];
        let canon = DMatrix::from_fn(4, 4, |i, j| inter[(perm[i], perm[j])]);
        let pi = symplectic_penalty(&TaylorMap::linear(&inter, 2).unwrap(), &SymplecticStructure::interleaved(4).unwrap()).unwrap();
        let pc = symplectic_penalty(&TaylorMap::linear(&canon, 2).unwrap(), &SymplecticStructure::canonical(4).unwrap()).unwrap();
        prop_assert!(pi < 1e-24 && pc < 1e-24);
    }
}
