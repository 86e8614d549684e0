use lmgf::stack::*;
use lmgf::{Direction, Error};
use num_complex::Complex64 as C;
use proptest::prelude::*;

fn em(eps: f64, mu: f64) -> Material {
    Material::em(eps, mu).unwrap()
}

#[test]
fn locate_layer_examples() {
    let one = LayerStack::new(vec![0.0], vec![em(1.0, 1.0), em(2.0, 1.0)]).unwrap();
    assert_eq!(one.locate_layer(1.0).unwrap(), 0);
    assert_eq!(one.locate_layer(-1.0).unwrap(), 1);
    assert!(matches!(one.locate_layer(0.0), Err(Error::OnInterface { index: 0, .. })));
    let two = LayerStack::new(vec![0.0, -2.0], vec![em(1.0, 1.0); 3]).unwrap();
    assert_eq!(two.locate_layer(-1.0).unwrap(), 1);
    assert_eq!(two.locate_layer(-3.0).unwrap(), 2);
}

#[test]
fn locate_layer_brackets_each_interface() {
    let s = LayerStack::new(vec![3.0, 0.5, -4.0], vec![em(1.0, 1.0); 4]).unwrap();
    let delta = 10.0 * s.interface_tolerance();
    for (l, &d) in s.interfaces().iter().enumerate() {
        assert_eq!(s.locate_layer(d + delta).unwrap(), l);
        assert_eq!(s.locate_layer(d - delta).unwrap(), l + 1);
    }
}

#[test]
fn wavenumber_examples() {
    assert_eq!(wavenumbers(&em(1.0, 1.0), 2.0).unwrap(), Wavenumbers::Em { k: C::new(2.0, 0.0) });
    let solid = Material::solid(1.0, 2.0, 1.0).unwrap();
    let Wavenumbers::Solid { ks, kc } = wavenumbers(&solid, 1.0).unwrap() else { panic!() };
    assert!((ks - C::new(1.0, 0.0)).norm() < 1e-15);
    assert!((kc - C::new(0.5, 0.0)).norm() < 1e-15);
    let fluid = Material::fluid(1.0, 1.0).unwrap();
    assert_eq!(wavenumbers(&fluid, 1.0).unwrap(), Wavenumbers::Fluid { kc: C::new(1.0, 0.0) });
    assert_eq!(wavenumbers(&Material::Vacuum, 1.0), Err(Error::VacuumHasNoWavenumber));
}

#[test]
fn vertical_wavenumber_examples() {
    let kz = vertical_wavenumber(C::new(2.0, 0.0), 1.0);
    assert!((kz - C::new(3f64.sqrt(), 0.0)).norm() < 1e-15);
    let kz = vertical_wavenumber(C::new(1.0, 0.0), 2.0);
    assert!((kz - C::new(0.0, 3f64.sqrt())).norm() < 1e-15);
    assert_eq!(vertical_wavenumber(C::new(1.0, 0.0), 1.0), C::new(0.0, 0.0));
}

#[test]
fn material_invariants_are_enforced() {
    assert!(Material::em(0.0, 1.0).is_err());
    assert!(Material::em(1.0, 0.0).is_err());
    assert!(Material::solid(1.0, 2.0, 0.0).is_err());
    assert!(Material::solid(0.0, 2.0, 1.0).is_err());
    assert!(Material::fluid(1.0, -1.0).is_err());
    assert_eq!(Material::fluid(1.0, 2.0).unwrap().phase(), Some(Phase::Fluid));
    assert_eq!(Material::solid(1.0, 2.0, 1.0).unwrap().phase(), Some(Phase::Solid));
}

#[test]
fn stack_invariants_are_enforced() {
    let s = Material::solid(1.0, 2.0, 1.0).unwrap();
    assert!(LayerStack::new(vec![0.0, 1.0], vec![s; 3]).is_err());
    assert!(LayerStack::new(vec![0.0], vec![s]).is_err());
    assert!(LayerStack::new(vec![0.0], vec![s, em(1.0, 1.0)]).is_err());
    assert!(LayerStack::new(vec![0.0, -1.0], vec![s, Material::Vacuum, s]).is_err());
    assert!(LayerStack::new(vec![0.0], vec![Material::Vacuum, Material::Vacuum]).is_err());
    assert!(LayerStack::new(vec![0.0], vec![em(1.0, 1.0), Material::Vacuum]).is_err());
    let ok = LayerStack::new(vec![0.0, -1.0], vec![Material::Vacuum, s, Material::Vacuum]).unwrap();
    assert_eq!(ok.kind(), ProblemKind::Elastic);
    assert!(ok.clone().with_loss(-1.0).is_err());
}

#[test]
fn loss_scales_every_wavenumber() {
    let s = LayerStack::new(vec![0.0], vec![em(2.0, 1.5), em(1.0, 1.0)]).unwrap();
    let lossy = s.clone().with_loss(0.01).unwrap();
    let f = C::new(1.0, 0.01);
    let plain = s.vertical_wavenumbers(1.3, 0.0);
    let scaled = lossy.vertical_wavenumbers(1.3, 0.0);
    for (a, b) in plain.layers.iter().zip(&scaled.layers) {
        let (LayerWaves::Em { k: ka, .. }, LayerWaves::Em { k: kb, .. }) = (a, b) else { panic!() };
        assert!((ka * f - kb).norm() < 1e-15);
    }
}

#[test]
fn references_bound_each_layer() {
    let s = LayerStack::new(vec![1.0, -0.5, -2.0], vec![em(1.0, 1.0); 4]).unwrap();
    assert_eq!(s.reference_depth(0, Direction::Up), 1.0);
    assert_eq!(s.reference_depth(0, Direction::Down), 1.0);
    assert_eq!(s.reference_depth(2, Direction::Up), -2.0);
    assert_eq!(s.reference_depth(2, Direction::Down), -0.5);
    assert_eq!(s.reference_depth(3, Direction::Up), -2.0);
    assert_eq!(s.reference_depth(3, Direction::Down), -2.0);
}

proptest! {
    #[test]
    fn vertical_wavenumber_squares_back(re in 0.1..5.0f64, im in 0.0..0.1f64, k_rho_scale in 0.0..10.0f64) {
        let k = C::new(re, im);
        let k_rho = k_rho_scale * re;
        let kz = vertical_wavenumber(k, k_rho);
        let target = k * k - k_rho * k_rho;
        prop_assert!((kz * kz - target).norm() <= 1e-14 * (k.norm_sqr() + k_rho * k_rho));
        prop_assert!(kz.re >= 0.0);
        if kz.re == 0.0 {
            prop_assert!(kz.im >= 0.0);
        }
    }

    #[test]
    fn lossy_waves_never_grow(re in 0.1..5.0f64, loss in 1e-6..0.1f64, ratio in 0.0..10.0f64, z in 0.0..50.0f64) {
        let k = C::new(re, re * loss);
        let kz = vertical_wavenumber(k, ratio * re);
        prop_assert!(kz.im >= 0.0);
        prop_assert!((C::new(0.0, 1.0) * kz * z).exp().norm() <= 1.0 + 1e-15);
    }
}
