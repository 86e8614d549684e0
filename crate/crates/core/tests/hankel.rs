mod common;

use common::{elastic_dyadic, em_dyadic, rel, scalar_green, I};
use lmgf::basis::Mat3;
use lmgf::hankel::*;
use lmgf::stack::{vertical_wavenumber, LayerStack, Material};
use num_complex::Complex64 as C;
use std::f64::consts::PI;

fn free_scalar_transform(order: u32, rho: f64, loss: f64) -> C {
    let k = C::new(1.0, loss);
    let f = move |k_rho: f64| {
        let kz = vertical_wavenumber(k, k_rho);
        Ok(I * (I * kz).exp() / (2.0 * kz))
    };
    let spec = QuadratureSpec {
        loss,
        ..QuadratureSpec::default()
    };
    inverse_radial_transform(
        &RadialIntegrand {
            f: &f,
            order,
            rho,
            branch_points: vec![1.0],
        },
        &spec,
    )
    .unwrap()
}

#[test]
fn scalar_transform_reproduces_free_space_green() {
    let got = free_scalar_transform(0, 1.0, 1e-4);
    let r = 2f64.sqrt();
    let k = C::new(1.0, 1e-4);
    let expect = (I * k * r).exp() / (4.0 * PI * r);
    assert!((got - expect).norm() <= 1e-5 * expect.norm(), "{got} vs {expect}");
}

#[test]
fn zero_integrand_gives_zero() {
    let f = |_: f64| Ok(C::new(0.0, 0.0));
    for order in 0..=2 {
        let v = inverse_radial_transform(
            &RadialIntegrand {
                f: &f,
                order,
                rho: 0.8,
                branch_points: vec![1.0],
            },
            &QuadratureSpec::default(),
        )
        .unwrap();
        assert_eq!(v, C::new(0.0, 0.0));
    }
}

#[test]
fn first_order_vanishes_on_axis() {
    assert_eq!(free_scalar_transform(1, 0.0, 1e-4), C::new(0.0, 0.0));
}

#[test]
fn rejects_invalid_quadrature_settings() {
    let f = |_: f64| Ok(C::new(1.0, 0.0));
    let integrand = |order| RadialIntegrand {
        f: &f,
        order,
        rho: 1.0,
        branch_points: vec![1.0],
    };
    let bad = [
        QuadratureSpec { rel_tol: 0.0, ..QuadratureSpec::default() },
        QuadratureSpec { rel_tol: 0.1, ..QuadratureSpec::default() },
        QuadratureSpec { loss: -1.0, ..QuadratureSpec::default() },
        QuadratureSpec { panels: 0, ..QuadratureSpec::default() },
        QuadratureSpec { truncation: Some(1.5), ..QuadratureSpec::default() },
    ];
    for spec in bad {
        assert!(inverse_radial_transform(&integrand(0), &spec).is_err(), "{spec:?}");
    }
    assert!(inverse_radial_transform(&integrand(3), &QuadratureSpec::default()).is_err());
}

fn spec() -> QuadratureSpec {
    QuadratureSpec::default()
}

/// Targets with `r` spread over `[0.5λ, 5λ]` and polar angles away from the
/// source plane.
fn targets(wavelength: f64, count: usize) -> Vec<[f64; 3]> {
    (0..count)
        .map(|i| {
            let t = i as f64 / (count - 1) as f64;
            let r = wavelength * (0.5 + 4.5 * t);
            let theta = 0.3 + 1.0 * ((i * 7) % count) as f64 / count as f64;
            let phi = 2.0 * PI * ((i * 3) % count) as f64 / count as f64;
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            [r * theta.sin() * phi.cos(), r * theta.sin() * phi.sin(), sign * r * theta.cos()]
        })
        .collect()
}

#[test]
fn free_space_em_dyadic_is_reconstructed() {
    let (eps, mu) = (2.0, 1.5);
    let stack = LayerStack::new(vec![], vec![Material::em(eps, mu).unwrap()]).unwrap();
    let omega = 1.0;
    let k = C::new((eps * mu).sqrt() * omega, 0.0) * C::new(1.0, spec().loss);
    let wavelength = 2.0 * PI / k.re;
    for r in targets(wavelength, 8) {
        let ge = spatial_green(&stack, omega, [0.0; 3], r, Which::Ge, &spec()).unwrap();
        let expect = em_dyadic(k, r);
        assert!(rel(&ge, &expect) <= 1e-5, "GE at {r:?}: {:e}", rel(&ge, &expect));
        let gh = spatial_green(&stack, omega, [0.0; 3], r, Which::Gh, &spec()).unwrap();
        let (_, grad, _) = scalar_green(k, r);
        let curl = Mat3::new(
            C::new(0.0, 0.0), -grad[2], grad[1],
            grad[2], C::new(0.0, 0.0), -grad[0],
            -grad[1], grad[0], C::new(0.0, 0.0),
        );
        let expect_h = curl * (-1.0 / (I * omega * mu));
        assert!(rel(&gh, &expect_h) <= 1e-5, "GH at {r:?}: {:e}", rel(&gh, &expect_h));
    }
}

#[test]
fn free_space_elastic_dyadic_is_reconstructed() {
    let (rho, lambda, mu) = (1.3, 2.0, 0.9);
    let stack = LayerStack::new(vec![], vec![Material::solid(rho, lambda, mu).unwrap()]).unwrap();
    let omega = 1.0;
    let wavelength = 2.0 * PI / (omega * (rho / mu).sqrt());
    for r in targets(wavelength, 8) {
        let g = spatial_green(&stack, omega, [0.0; 3], r, Which::Elastic, &spec()).unwrap();
        let expect = elastic_dyadic(omega, rho, lambda, mu, spec().loss, r);
        assert!(rel(&g, &expect) <= 1e-5, "at {r:?}: {:e}", rel(&g, &expect));
    }
}

#[test]
fn free_space_fluid_vector_source_is_a_gradient() {
    let (rho, lambda) = (1.2, 2.5);
    let stack = LayerStack::new(vec![], vec![Material::fluid(rho, lambda).unwrap()]).unwrap();
    let omega = 1.0;
    let kc = C::new(omega * (rho / lambda).sqrt(), 0.0) * C::new(1.0, spec().loss);
    let wavelength = 2.0 * PI / kc.re;
    for r in targets(wavelength, 6) {
        let u = spatial_green(&stack, omega, [0.0; 3], r, Which::ElasticVector, &spec()).unwrap();
        let (_, grad, _) = scalar_green(kc, r);
        let mut expect = Mat3::zeros();
        for p in 0..3 {
            expect[(p, 0)] = grad[p] / (omega * omega * rho);
        }
        assert!(rel(&u, &expect) <= 1e-5, "at {r:?}: {:e}", rel(&u, &expect));
    }
}

fn rotation(beta: f64) -> Mat3 {
    let (s, c) = beta.sin_cos();
    let r = |v: f64| C::new(v, 0.0);
    Mat3::new(r(c), r(-s), r(0.0), r(s), r(c), r(0.0), r(0.0), r(0.0), r(1.0))
}

#[test]
fn rotating_the_target_conjugates_the_tensor() {
    let stack = LayerStack::new(
        vec![0.0, -1.0],
        vec![
            Material::solid(1.0, 2.0, 1.0).unwrap(),
            Material::fluid(1.5, 1.2).unwrap(),
            Material::solid(2.0, 1.5, 1.3).unwrap(),
        ],
    )
    .unwrap();
    let source = [0.0, 0.0, 0.6];
    let base = [1.7, 0.4, 1.4];
    let g0 = spatial_green(&stack, 1.0, source, base, Which::Elastic, &spec()).unwrap();
    for s in 1..8 {
        let beta = 2.0 * PI * s as f64 / 8.0;
        let r = rotation(beta);
        let (sb, cb) = beta.sin_cos();
        let target = [cb * base[0] - sb * base[1], sb * base[0] + cb * base[1], base[2]];
        let g = spatial_green(&stack, 1.0, source, target, Which::Elastic, &spec()).unwrap();
        let expect = r * g0 * r.transpose();
        assert!(rel(&g, &expect) <= 1e-8, "beta {beta}: {:e}", rel(&g, &expect));
    }
}

#[test]
fn halving_the_tolerance_changes_less_than_the_coarse_tolerance() {
    let stack = LayerStack::new(
        vec![0.0],
        vec![Material::em(1.0, 1.0).unwrap(), Material::em(3.0, 1.0).unwrap()],
    )
    .unwrap();
    let source = [0.0, 0.0, 0.5];
    for target in [[1.2, -0.3, 1.8], [0.4, 2.0, -0.9]] {
        let coarse = QuadratureSpec {
            rel_tol: 1e-6,
            truncation: Some(24.0),
            ..QuadratureSpec::default()
        };
        let fine = QuadratureSpec {
            rel_tol: 5e-7,
            ..coarse
        };
        let a = spatial_green(&stack, 1.0, source, target, Which::Ge, &coarse).unwrap();
        let b = spatial_green(&stack, 1.0, source, target, Which::Ge, &fine).unwrap();
        assert!(rel(&a, &b) < coarse.rel_tol, "{:e}", rel(&a, &b));
    }
}

#[test]
fn quadrature_is_bit_reproducible() {
    let stack = LayerStack::new(vec![], vec![Material::em(1.0, 1.0).unwrap()]).unwrap();
    let t = [0.9, -1.1, 2.0];
    let a = spatial_green(&stack, 1.0, [0.0; 3], t, Which::Ge, &spec()).unwrap();
    let b = spatial_green(&stack, 1.0, [0.0; 3], t, Which::Ge, &spec()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn near_grazing_targets_converge() {
    let stack = LayerStack::new(vec![], vec![Material::em(1.0, 1.0).unwrap()]).unwrap();
    let k = C::new(1.0, spec().loss);
    let wavelength = 2.0 * PI;
    for r in [0.5 * wavelength, 2.0 * wavelength, 5.0 * wavelength] {
        let dz = 0.02 * r;
        let t = [(r * r - dz * dz).sqrt() * 0.6, (r * r - dz * dz).sqrt() * 0.8, -dz];
        let g = spatial_green(&stack, 1.0, [0.0; 3], t, Which::Ge, &spec()).unwrap();
        assert!(rel(&g, &em_dyadic(k, t)) <= 1e-5, "r {r}: {:e}", rel(&g, &em_dyadic(k, t)));
    }
}

#[test]
fn in_plane_targets_report_non_convergence() {
    let stack = LayerStack::new(vec![], vec![Material::em(1.0, 1.0).unwrap()]).unwrap();
    let got = spatial_green(&stack, 1.0, [0.0; 3], [3.0, 0.0, 1e-3], Which::Ge, &spec());
    assert!(matches!(got, Err(lmgf::Error::NonConvergent { .. })), "{got:?}");
}
