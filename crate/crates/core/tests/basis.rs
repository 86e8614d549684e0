mod common;

use common::rel;
use lmgf::basis::*;
use lmgf::Error;
use nalgebra::{SMatrix, SVector};
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn c(re: f64) -> C {
    C::new(re, 0.0)
}

/// Basis matrices built entry by entry, kept apart from the library.
fn j(w: usize, kx: f64, ky: f64) -> Mat3 {
    let i = C::new(0.0, 1.0);
    let z = c(0.0);
    match w {
        1 => Mat3::new(c(1.0), z, z, z, c(1.0), z, z, z, z),
        2 => Mat3::new(z, z, z, z, z, z, z, z, c(1.0)),
        3 => Mat3::new(z, z, i * kx, z, z, i * ky, z, z, z),
        4 => Mat3::new(z, z, z, z, z, z, i * kx, i * ky, z),
        5 => Mat3::new(c(-kx * kx), c(-kx * ky), z, c(-kx * ky), c(-ky * ky), z, z, z, z),
        6 => Mat3::new(z, z, z, z, z, z, -i * ky, i * kx, z),
        7 => Mat3::new(z, z, i * ky, z, z, -i * kx, z, z, z),
        8 => Mat3::new(c(kx * ky), c(ky * ky), z, c(-kx * kx), c(-kx * ky), z, z, z, z),
        9 => Mat3::new(z, c(1.0), z, c(-1.0), z, z, z, z, z),
        _ => unreachable!(),
    }
}

/// Product table as `(w, coef, has k_rho^2)` triples per ordered pair.
const TABLE: [[&[(usize, f64, bool)]; 9]; 9] = [
    [&[(1, 1., false)], &[], &[(3, 1., false)], &[], &[(5, 1., false)], &[], &[(7, 1., false)], &[(8, 1., false)], &[(9, 1., false)]],
    [&[], &[(2, 1., false)], &[], &[(4, 1., false)], &[], &[(6, 1., false)], &[], &[], &[]],
    [&[], &[(3, 1., false)], &[], &[(5, 1., false)], &[], &[(8, 1., false), (9, -1., true)], &[], &[], &[]],
    [&[(4, 1., false)], &[], &[(2, -1., true)], &[], &[(4, -1., true)], &[], &[], &[], &[(6, 1., false)]],
    [&[(5, 1., false)], &[], &[(3, -1., true)], &[], &[(5, -1., true)], &[], &[], &[], &[(8, 1., false), (9, -1., true)]],
    [&[(6, 1., false)], &[], &[], &[], &[], &[], &[(2, 1., true)], &[(4, -1., true)], &[(4, -1., false)]],
    [&[], &[(7, 1., false)], &[], &[(8, -1., false)], &[], &[(1, 1., true), (5, 1., false)], &[], &[], &[]],
    [&[(8, 1., false)], &[], &[(7, 1., true)], &[], &[(8, -1., true)], &[], &[], &[], &[(1, -1., true), (5, -1., false)]],
    [&[(9, 1., false)], &[], &[(7, 1., false)], &[], &[(8, -1., false)], &[], &[(3, -1., false)], &[(5, 1., false)], &[(1, -1., false)]],
];

#[test]
fn realized_matrices_match_entrywise_definition() {
    for (kx, ky) in [(0.7, -0.3), (-2.0, 1.5), (0.0, 0.0)] {
        let p = SpectralPoint::from_cartesian(kx, ky);
        for w in 1..=9 {
            assert_eq!(realize_basis(w, &p), j(w, kx, ky), "J{w}");
        }
    }
}

#[test]
fn structure_constants_match_transcribed_table() {
    let k2 = C::new(1.7, -0.4);
    for u in 1..=9 {
        for v in 1..=9 {
            let mut expected = [c(0.0); 9];
            for &(w, coef, has_k2) in TABLE[u - 1][v - 1] {
                expected[w - 1] += if has_k2 { k2 * coef } else { c(coef) };
            }
            assert_eq!(table_product(u, v, k2).c, expected, "J{u} J{v}");
        }
    }
}

#[test]
fn identity_is_j1_plus_j2() {
    let p = SpectralPoint::from_cartesian(0.3, 1.1);
    assert_eq!(realize_basis(1, &p) + realize_basis(2, &p), Mat3::identity());
}

#[test]
fn j5_round_trips_to_a_unit_coefficient() {
    let p = SpectralPoint::from_cartesian(1.0, 0.0);
    let d = decompose(&realize_basis(5, &p), &p).unwrap();
    for w in 1..=9 {
        let expected = if w == 5 { 1.0 } else { 0.0 };
        assert!((d.get(w) - c(expected)).norm() < 1e-15, "c{w} = {}", d.get(w));
    }
}

#[test]
fn random_matrix_round_trips_against_dense_solve() {
    let (kx, ky) = (0.7, -0.3);
    let p = SpectralPoint::from_cartesian(kx, ky);
    let mut rng = common::rng(11);
    use rand::Rng;
    let m = Mat3::from_fn(|_, _| C::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let mut a = SMatrix::<C, 9, 9>::zeros();
    for w in 0..9 {
        let jw = j(w + 1, kx, ky);
        for r in 0..3 {
            for col in 0..3 {
                a[(3 * r + col, w)] = jw[(r, col)];
            }
        }
    }
    let rhs = SVector::<C, 9>::from_fn(|i, _| m[(i / 3, i % 3)]);
    let oracle = a.full_piv_lu().solve(&rhs).unwrap();
    let d = decompose(&m, &p).unwrap();
    for w in 0..9 {
        assert!((d.c[w] - oracle[w]).norm() <= 1e-12 * oracle.norm(), "c{}", w + 1);
    }
    assert!(rel(&d.realize(&p), &m) <= 1e-12);
}

#[test]
fn decompose_refuses_degenerate_points() {
    let p = SpectralPoint::from_polar(1e-9, 0.3);
    assert!(matches!(
        decompose(&Mat3::identity(), &p),
        Err(Error::DegenerateSpectralPoint { .. })
    ));
    assert!(decompose_vector(&Vec3::zeros(), &p, DEFAULT_DEGENERATE).is_err());
}

#[test]
fn class_rule_follows_the_sign_pattern() {
    use BasisClass::*;
    assert_eq!(product_rule_class(R, R), R);
    assert_eq!(product_rule_class(R, I), I);
    assert_eq!(product_rule_class(I, R), I);
    assert_eq!(product_rule_class(I, I), R);
}

#[test]
fn restricted_products_stay_restricted() {
    let a = BasisCoefficients::restricted([c(1.0), c(-2.0), C::new(0.5, 1.0), c(3.0), c(0.25)]);
    let b = BasisCoefficients::restricted([c(0.3), C::new(0.0, 1.0), c(2.0), c(-1.0), c(1.5)]);
    let prod = multiply_in_basis(&a, &b, c(2.5));
    assert!(prod.restricted);
    assert_eq!(prod.class_i_norm(), 0.0);
}

#[test]
fn unit_direction_basis_is_basis_over_k_rho_degree() {
    let p = SpectralPoint::from_polar(2.5, 0.8);
    for w in 1..=9 {
        let scaled = realize_basis(w, &p) / c(p.k_rho.powi(basis_degree(w)));
        assert!(rel(&realize_unit_basis(w, p.alpha), &scaled) < 1e-15, "J{w}");
    }
}

#[test]
fn channel_tensor_realizes_like_coefficients() {
    let p = SpectralPoint::from_polar(0.6, -1.1);
    let coeffs = [C::new(1.0, 0.5), c(-0.3), C::new(0.0, 2.0), c(1.2), c(0.7), c(0.1), c(-0.4), c(0.9), c(0.2)];
    let weighted = std::array::from_fn(|w| coeffs[w] * p.k_rho.powi(basis_degree(w + 1)));
    let t = ChannelTensor { k_rho: p.k_rho, weighted };
    assert!(rel(&t.realize(&p), &BasisCoefficients::new(coeffs).realize(&p)) < 1e-15);
    let back = t.coefficients(DEFAULT_DEGENERATE).unwrap();
    for w in 0..9 {
        assert!((back.c[w] - coeffs[w]).norm() < 1e-15);
    }
}

#[test]
fn vector_basis_is_third_column() {
    let p = SpectralPoint::from_polar(1.3, 2.0);
    let v = VectorBasisCoefficients { c2: c(1.0), c3: C::new(0.0, -2.0), c7: c(0.5) };
    let expected = realize_vector_basis(2, &p) * v.c2
        + realize_vector_basis(3, &p) * v.c3
        + realize_vector_basis(7, &p) * v.c7;
    assert!((v.realize(&p) - expected).norm() < 1e-15);
    let back = decompose_vector(&expected, &p, DEFAULT_DEGENERATE).unwrap();
    assert!((back.c2 - v.c2).norm() + (back.c3 - v.c3).norm() + (back.c7 - v.c7).norm() < 1e-15);
}

fn complex() -> impl Strategy<Value = C> {
    (-1.0..1.0f64, -1.0..1.0f64).prop_map(|(a, b)| C::new(a, b))
}

proptest! {
    #[test]
    fn products_match_table(kx in -5.0..5.0f64, ky in -5.0..5.0f64) {
        let p = SpectralPoint::from_cartesian(kx, ky);
        let scale = 1.0 + p.k_rho.powi(4);
        for (u, row) in product_table_residuals(&p).iter().enumerate() {
            for (v, r) in row.iter().enumerate() {
                prop_assert!(*r <= 1e-13 * scale, "J{} J{}: {:e}", u + 1, v + 1, r);
            }
        }
    }

    #[test]
    fn table_product_agrees_with_decomposed_product(
        k_rho in 0.1..10.0f64,
        alpha in 0.0..6.3f64,
        a in prop::array::uniform9(complex()),
        b in prop::array::uniform9(complex()),
    ) {
        let p = SpectralPoint::from_polar(k_rho, alpha);
        let a = BasisCoefficients::new(a);
        let b = BasisCoefficients::new(b);
        let table = multiply_in_basis(&a, &b, c(p.k_rho_sq()));
        let direct = decompose(&(a.realize(&p) * b.realize(&p)), &p).unwrap();
        let diff = (0..9).map(|w| (table.c[w] - direct.c[w]).norm_sqr()).sum::<f64>().sqrt();
        prop_assert!(diff <= 1e-11 * table.norm());
    }

    #[test]
    fn decompose_inverts_realize(
        log_k in -3.0..3.0f64,
        alpha in 0.0..6.3f64,
        a in prop::array::uniform9(complex()),
    ) {
        let p = SpectralPoint::from_polar(10f64.powf(log_k), alpha);
        let a = BasisCoefficients::new(a);
        let back = decompose(&a.realize(&p), &p).unwrap();
        prop_assert!(lmgf::cli::weighted_rel_diff(&back, &a, &p) <= 1e-12);
    }

    #[test]
    fn restricted_ring_is_closed(
        k_rho in 0.0..10.0f64,
        a in prop::array::uniform5(complex()),
        b in prop::array::uniform5(complex()),
    ) {
        let a = BasisCoefficients::restricted(a);
        let b = BasisCoefficients::restricted(b);
        let prod = multiply_in_basis(&a, &b, c(k_rho * k_rho));
        prop_assert!(prod.restricted);
        prop_assert_eq!(prod.class_i_norm(), 0.0);
    }

    #[test]
    fn mixed_class_products_land_in_class_i(
        kx in -3.0..3.0f64,
        ky in -3.0..3.0f64,
        a in prop::array::uniform5(complex()),
        b in prop::array::uniform4(complex()),
    ) {
        let p = SpectralPoint::from_cartesian(kx, ky);
        let r = BasisCoefficients::restricted(a);
        let mut ic = [c(0.0); 9];
        ic[5..].copy_from_slice(&b);
        let i = BasisCoefficients::new(ic);
        let k2 = c(p.k_rho_sq());
        for prod in [multiply_in_basis(&r, &i, k2), multiply_in_basis(&i, &r, k2)] {
            prop_assert!(prod.c[..5].iter().all(|x| x.norm() == 0.0));
        }
        let ii = multiply_in_basis(&i, &i, k2);
        prop_assert_eq!(ii.class_i_norm(), 0.0);
    }
}
