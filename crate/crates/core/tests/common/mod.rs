#![allow(dead_code)]

use lmgf::basis::Mat3;
use lmgf::stack::{LayerStack, Material};
use num_complex::Complex64 as C;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

pub const I: C = C::new(0.0, 1.0);

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel(a: &Mat3, b: &Mat3) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 {
        0.0
    } else {
        (a - b).norm() / s
    }
}

pub fn rel_c(a: C, b: C) -> f64 {
    let s = a.norm().max(b.norm());
    if s == 0.0 {
        0.0
    } else {
        (a - b).norm() / s
    }
}

/// A stack plus a source depth and one target depth per non-vacuum layer.
#[derive(Clone, Debug)]
pub struct Case {
    pub stack: LayerStack,
    pub z_src: f64,
    pub targets: Vec<f64>,
}

fn interfaces(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut d = Vec::with_capacity(n);
    let mut z = 0.0;
    for _ in 0..n {
        d.push(z);
        z -= rng.gen_range(0.4..1.5);
    }
    d
}

/// Uniform depth well inside layer `t`.
fn depth_in(rng: &mut ChaCha8Rng, d: &[f64], t: usize) -> f64 {
    let hi = if t == 0 { d.first().map_or(2.0, |x| x + 2.0) } else { d[t - 1] };
    let lo = if t == d.len() { d.last().map_or(-2.0, |x| x - 2.0) } else { d[t] };
    let pad = 0.15 * (hi - lo);
    rng.gen_range(lo + pad..hi - pad)
}

fn finish(rng: &mut ChaCha8Rng, d: Vec<f64>, materials: Vec<Material>, src: usize, loss: f64) -> Case {
    let targets = (0..materials.len())
        .filter(|&t| materials[t] != Material::Vacuum)
        .map(|t| depth_in(rng, &d, t))
        .collect::<Vec<_>>();
    let mut z_src = depth_in(rng, &d, src);
    while targets.contains(&z_src) {
        z_src = depth_in(rng, &d, src);
    }
    let stack = LayerStack::new(d, materials).unwrap().with_loss(loss).unwrap();
    Case { stack, z_src, targets }
}

/// Random EM stack with 1..=5 layers.
pub fn random_em(rng: &mut ChaCha8Rng, loss: f64) -> Case {
    let layers = rng.gen_range(1..=5);
    let d = interfaces(rng, layers - 1);
    let materials = (0..layers)
        .map(|_| Material::em(rng.gen_range(1.0..6.0), rng.gen_range(1.0..3.0)).unwrap())
        .collect();
    let src = rng.gen_range(0..layers);
    finish(rng, d, materials, src, loss)
}

pub fn random_solid(rng: &mut ChaCha8Rng) -> Material {
    Material::solid(rng.gen_range(1.0..3.0), rng.gen_range(0.5..3.0), rng.gen_range(0.5..2.0)).unwrap()
}

pub fn random_fluid(rng: &mut ChaCha8Rng) -> Material {
    Material::fluid(rng.gen_range(0.8..2.0), rng.gen_range(1.0..3.0)).unwrap()
}

/// Random elastic stack with 1..=5 layers mixing solids and fluids, with
/// optional vacuum half-spaces. `fluid_source` picks the phase of the source
/// layer.
pub fn random_elastic(rng: &mut ChaCha8Rng, loss: f64, fluid_source: bool) -> Case {
    let layers = rng.gen_range(1..=5);
    let d = interfaces(rng, layers - 1);
    let mut materials: Vec<Material> = (0..layers)
        .map(|_| if rng.gen_bool(0.6) { random_solid(rng) } else { random_fluid(rng) })
        .collect();
    if layers >= 3 {
        if rng.gen_bool(0.3) {
            materials[0] = Material::Vacuum;
        }
        if rng.gen_bool(0.3) {
            materials[layers - 1] = Material::Vacuum;
        }
    }
    let live: Vec<usize> = (0..layers).filter(|&t| materials[t] != Material::Vacuum).collect();
    let src = live[rng.gen_range(0..live.len())];
    materials[src] = if fluid_source { random_fluid(rng) } else { random_solid(rng) };
    finish(rng, d, materials, src, loss)
}

/// `g = e^{ikr}/(4πr)`, its gradient, and its Hessian at `r`.
pub fn scalar_green(k: C, r: [f64; 3]) -> (C, [C; 3], Mat3) {
    let rr = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
    let g = (I * k * rr).exp() / (4.0 * PI * rr);
    let rh = [r[0] / rr, r[1] / rr, r[2] / rr];
    let d1 = g * (I * k - 1.0 / rr);
    let grad = [d1 * rh[0], d1 * rh[1], d1 * rh[2]];
    let a = g * (-k * k - 3.0 * I * k / rr + 3.0 / (rr * rr));
    let b = g * (I * k / rr - 1.0 / (rr * rr));
    let mut h = Mat3::zeros();
    for p in 0..3 {
        for q in 0..3 {
            h[(p, q)] = a * rh[p] * rh[q] + if p == q { b } else { C::new(0.0, 0.0) };
        }
    }
    (g, grad, h)
}

/// Free-space electric dyadic `(I + ∇∇/k²) g`.
pub fn em_dyadic(k: C, r: [f64; 3]) -> Mat3 {
    let (g, _, h) = scalar_green(k, r);
    Mat3::identity() * g + h / (k * k)
}

/// Free-space elastic displacement dyadic with lossy wavenumbers.
pub fn elastic_dyadic(omega: f64, rho: f64, lambda: f64, mu: f64, loss: f64, r: [f64; 3]) -> Mat3 {
    let f = C::new(1.0, loss);
    let ks = C::new(omega * (rho / mu).sqrt(), 0.0) * f;
    let kc = C::new(omega * (rho / (lambda + 2.0 * mu)).sqrt(), 0.0) * f;
    let (gs, _, hs) = scalar_green(ks, r);
    let (_, _, hc) = scalar_green(kc, r);
    let mu_c = C::new(mu, 0.0) / (f * f);
    Mat3::identity() * (gs / mu_c) + (hs - hc) / C::new(omega * omega * rho, 0.0)
}

/// Path of a binary built by this package.
pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_lmgf")
}
