//! Spatial-domain values from spectral channels.
//!
//! With `(kx, ky) = k_rho (cos α, sin α)` and the target at polar offset
//! `(ρ, φ)`, the 2-D inverse transform of `f(k_rho) e^{imα}` is
//! `i^m e^{imφ} H_m[f]`, where
//! `H_m[f] = (1/2π) ∫ f(k_rho) J_m(k_rho ρ) k_rho dk_rho`.
//! Each unit-direction basis entry is a trigonometric polynomial of degree
//! at most two in `α`, so every spatial entry is a combination of `H_0`,
//! `H_1`, `H_2` of the weighted channels.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::basis::{realize_unit_basis, ChannelVector, Mat3, SpectralPoint};
use crate::elastic::{assemble_g_elastic, assemble_u_elastic, solve_elastic_spectral, SourceKind};
use crate::maxwell::{assemble_ge, assemble_gh, solve_em_spectral};
use crate::stack::LayerStack;
use crate::{Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Radial quadrature settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSpec {
    /// Upper end of the regular panels; `None` means `12·max|k|`.
    pub truncation: Option<f64>,
    /// Number of regular panels between `2·max|k|` and the truncation.
    pub panels: usize,
    pub rel_tol: f64,
    /// Relative material loss applied to every wavenumber.
    pub loss: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            truncation: None,
            panels: 24,
            rel_tol: 1e-8,
            loss: 1e-5,
        }
    }
}

impl QuadratureSpec {
    /// Check the settings against the largest wavenumber and return the
    /// truncation point.
    pub fn resolve(&self, max_k: f64) -> Result<f64> {
        if !(self.rel_tol > 0.0 && self.rel_tol <= 1e-2) {
            return Err(Error::InvalidQuadrature(format!(
                "rel_tol must lie in (0, 1e-2], got {}",
                self.rel_tol
            )));
        }
        if !(self.loss >= 0.0 && self.loss.is_finite()) {
            return Err(Error::InvalidQuadrature(format!("loss must be >= 0, got {}", self.loss)));
        }
        if self.panels == 0 {
            return Err(Error::InvalidQuadrature("panels must be positive".into()));
        }
        let t = self.truncation.unwrap_or(12.0 * max_k);
        if !(t.is_finite() && t >= 2.0 * max_k && t > 0.0) {
            return Err(Error::InvalidQuadrature(format!(
                "truncation {t} is below 2·max|k| = {}",
                2.0 * max_k
            )));
        }
        Ok(t)
    }
}

// Gauss-Kronrod 7/15 on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// How an interval's local variable maps to `k_rho`.
#[derive(Clone, Copy, Debug)]
enum Map {
    /// `k = a + (b - a) t`.
    Linear { a: f64, b: f64 },
    /// `k = a + (b - a)(3t² - 2t³)`; absorbs inverse square-root
    /// singularities at both ends.
    Smooth { a: f64, b: f64 },
}

impl Map {
    fn apply(&self, t: f64) -> (f64, f64) {
        match *self {
            Map::Linear { a, b } => (a + (b - a) * t, b - a),
            Map::Smooth { a, b } => (
                a + (b - a) * t * t * (3.0 - 2.0 * t),
                (b - a) * 6.0 * t * (1.0 - t),
            ),
        }
    }
}

struct Piece {
    map: Map,
    lo: f64,
    hi: f64,
    value: Vec<Complex64>,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

type VecFn<'a> = dyn Fn(f64) -> Result<Vec<Complex64>> + 'a;

fn gk15(f: &VecFn, map: Map, lo: f64, hi: f64) -> Result<Piece> {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let eval = |t: f64| -> Result<Vec<Complex64>> {
        let (k, jac) = map.apply(t);
        Ok(f(k)?.into_iter().map(|v| v * jac).collect())
    };
    let center = eval(c)?;
    let m = center.len();
    let mut kron: Vec<Complex64> = center.iter().map(|v| v * WGK[7]).collect();
    let mut gauss: Vec<Complex64> = center.iter().map(|v| v * WG[3]).collect();
    for i in 0..7 {
        let dx = h * XGK[i];
        let a = eval(c - dx)?;
        let b = eval(c + dx)?;
        for q in 0..m {
            let s = a[q] + b[q];
            kron[q] += s * WGK[i];
            if i % 2 == 1 {
                gauss[q] += s * WG[i / 2];
            }
        }
    }
    let mut error = 0.0f64;
    for q in 0..m {
        kron[q] *= h;
        gauss[q] *= h;
        error = error.max((kron[q] - gauss[q]).norm());
    }
    Ok(Piece {
        map,
        lo,
        hi,
        value: kron,
        error,
    })
}

const MAX_PIECES: usize = 40_000;

/// Globally adaptive integration of a vector-valued function over a set of
/// mapped intervals. Returns the integrals and the summed error estimate.
fn adaptive(f: &VecFn, maps: &[Map], rel_tol: f64) -> Result<(Vec<Complex64>, f64)> {
    let mut heap = BinaryHeap::new();
    for &map in maps {
        heap.push(gk15(f, map, 0.0, 1.0)?);
    }
    loop {
        let m = heap.peek().map_or(0, |p| p.value.len());
        let mut total = vec![ZERO; m];
        let mut err = 0.0;
        for p in heap.iter() {
            for (t, v) in total.iter_mut().zip(&p.value) {
                *t += v;
            }
            err += p.error;
        }
        let scale = total.iter().fold(0.0f64, |a, v| a.max(v.norm()));
        if err <= rel_tol * scale || scale == 0.0 && err == 0.0 {
            return Ok((total, err));
        }
        if heap.len() >= MAX_PIECES {
            return Err(Error::NonConvergent {
                estimate: err / scale.max(f64::MIN_POSITIVE),
                tolerance: rel_tol,
            });
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.lo + worst.hi);
        heap.push(gk15(f, worst.map, worst.lo, mid)?);
        heap.push(gk15(f, worst.map, mid, worst.hi)?);
    }
}

fn bessel(n: u32, x: f64) -> f64 {
    match n {
        0 => libm::j0(x),
        1 => libm::j1(x),
        _ => libm::jn(n as i32, x),
    }
}

/// Integrals `H_0, H_1, H_2` of each of the `m` channels returned by `f`,
/// laid out as `[H_n of channel q]` at index `3q + n`.
///
/// `branch_points` are the real parts of the layer wavenumbers; the
/// integrand may have inverse square-root behavior there.
pub fn hankel_channels(
    f: &VecFn,
    rho: f64,
    branch_points: &[f64],
    spec: &QuadratureSpec,
) -> Result<Vec<Complex64>> {
    let max_k = branch_points.iter().fold(0.0f64, |a, &b| a.max(b));
    let truncation = spec.resolve(max_k)?;
    let g = |k: f64| -> Result<Vec<Complex64>> {
        let v = f(k)?;
        let w = k / (2.0 * PI);
        let j = [bessel(0, k * rho), bessel(1, k * rho), bessel(2, k * rho)];
        let mut out = Vec::with_capacity(3 * v.len());
        for c in v {
            for jn in j {
                out.push(c * (jn * w));
            }
        }
        Ok(out)
    };
    let mut knots: Vec<f64> = branch_points.iter().copied().filter(|&b| b > 0.0).collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs());
    let mut maps = Vec::new();
    let mut lo = 0.0;
    for &b in &knots {
        maps.push(Map::Smooth { a: lo, b });
        lo = b;
    }
    let start = lo.max(f64::MIN_POSITIVE);
    let smooth_end = if max_k > 0.0 { 2.0 * max_k } else { truncation / spec.panels as f64 };
    maps.push(Map::Smooth { a: lo, b: smooth_end.max(start) });
    let width = (truncation - smooth_end).max(0.0) / spec.panels as f64;
    if width > 0.0 {
        for p in 0..spec.panels {
            let a = smooth_end + width * p as f64;
            maps.push(Map::Linear { a, b: a + width });
        }
    }
    let (mut total, _) = adaptive(&g, &maps, spec.rel_tol)?;
    // Tail: panels grow geometrically until two in a row are negligible, up
    // to 64x the truncation.
    let mut panel = if width > 0.0 { width } else { truncation };
    let mut a = truncation.max(smooth_end);
    let limit = 64.0 * a;
    let mut quiet = 0;
    loop {
        let (part, _) = adaptive(&g, &[Map::Linear { a, b: a + panel }], spec.rel_tol)?;
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let size = part.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        for (t, v) in total.iter_mut().zip(&part) {
            *t += v;
        }
        if size <= 0.1 * spec.rel_tol * scale || scale == 0.0 && size == 0.0 {
            quiet += 1;
            if quiet == 2 {
                return Ok(total);
            }
        } else {
            quiet = 0;
        }
        a += panel;
        panel *= 1.25;
        if a >= limit {
            return Err(Error::NonConvergent {
                estimate: size / scale.max(f64::MIN_POSITIVE),
                tolerance: spec.rel_tol,
            });
        }
    }
}

/// A single radial channel of Bessel order `order` at radius `rho`.
pub struct RadialIntegrand<'a> {
    pub f: &'a dyn Fn(f64) -> Result<Complex64>,
    pub order: u32,
    pub rho: f64,
    pub branch_points: Vec<f64>,
}

/// `(1/2π) ∫₀^∞ f(k_rho) J_n(k_rho ρ) k_rho dk_rho`.
pub fn inverse_radial_transform(integrand: &RadialIntegrand, spec: &QuadratureSpec) -> Result<Complex64> {
    if integrand.order > 2 {
        return Err(Error::InvalidQuadrature(format!(
            "Bessel order {} not supported",
            integrand.order
        )));
    }
    let f = |k: f64| Ok(vec![(integrand.f)(k)?]);
    let h = hankel_channels(&f, integrand.rho, &integrand.branch_points, spec)?;
    Ok(h[integrand.order as usize])
}

/// Fourier modes `p_m`, `m = -2..=2`, of a trigonometric polynomial of
/// degree two sampled at eight equispaced angles.
fn fourier_modes(samples: &[Complex64; 8]) -> [Complex64; 5] {
    let mut p = [ZERO; 5];
    for (mi, m) in (-2i32..=2).enumerate() {
        for (s, v) in samples.iter().enumerate() {
            let a = 2.0 * PI * s as f64 / 8.0;
            p[mi] += v * Complex64::from_polar(1.0 / 8.0, -(m as f64) * a);
        }
    }
    p
}

/// Angular kernel: the spatial entry equals `Σ_m p_m i^m e^{imφ} H_m` with
/// `H_{-m} = (-1)^m H_m`. Returns weights on `(H_0, H_1, H_2)`.
fn angular_weights(p: &[Complex64; 5], phi: f64) -> [Complex64; 3] {
    let mut w = [ZERO; 3];
    for (mi, m) in (-2i32..=2).enumerate() {
        if p[mi] == ZERO {
            continue;
        }
        let n = m.unsigned_abs() as usize;
        let sign = if m < 0 && n % 2 == 1 { -1.0 } else { 1.0 };
        w[n] += p[mi] * I.powi(m) * Complex64::from_polar(sign, m as f64 * phi);
    }
    w
}

/// Spatial weights of unit-direction basis `J_w` at azimuth `phi`:
/// `out[n]` multiplies `H_n` of channel `w`.
pub fn basis_angular_weights(index: usize, phi: f64) -> [Mat3; 3] {
    let samples: Vec<Mat3> = (0..8)
        .map(|s| realize_unit_basis(index, 2.0 * PI * s as f64 / 8.0))
        .collect();
    angular_from_samples(&samples, phi)
}

fn angular_from_samples(samples: &[Mat3], phi: f64) -> [Mat3; 3] {
    let mut out = [Mat3::zeros(); 3];
    for r in 0..3 {
        for c in 0..3 {
            let s: [Complex64; 8] = std::array::from_fn(|i| samples[i][(r, c)]);
            let p = fourier_modes(&s);
            let p = p.map(|v| if v.norm() < 1e-14 { ZERO } else { v });
            let w = angular_weights(&p, phi);
            for n in 0..3 {
                out[n][(r, c)] = w[n];
            }
        }
    }
    out
}

fn vector_angular_weights(index: usize, phi: f64) -> [Mat3; 3] {
    let samples: Vec<Mat3> = (0..8)
        .map(|s| {
            let mut weighted = [ZERO; 3];
            weighted[index] = Complex64::new(1.0, 0.0);
            let a = 2.0 * PI * s as f64 / 8.0;
            let v = ChannelVector { k_rho: 1.0, weighted }.realize(&SpectralPoint::from_polar(1.0, a));
            let mut m = Mat3::zeros();
            m.set_column(0, &v);
            m
        })
        .collect();
    angular_from_samples(&samples, phi)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Which {
    /// Electric field tensor of the Maxwell problem.
    Ge,
    /// Magnetic field tensor of the Maxwell problem.
    Gh,
    /// Displacement tensor for a point force in a solid.
    Elastic,
    /// Displacement vector for a point source in a fluid (column 0).
    ElasticVector,
}

/// Spatial Green's function at `target` for a unit source at `source`,
/// both given as `(x, y, z)`.
pub fn spatial_green(
    stack: &LayerStack,
    omega: f64,
    source: [f64; 3],
    target: [f64; 3],
    which: Which,
    spec: &QuadratureSpec,
) -> Result<Mat3> {
    let stack = stack.clone().with_loss(spec.loss)?;
    let (z_src, z) = (source[2], target[2]);
    stack.locate_layer(z_src)?;
    stack.locate_layer(z)?;
    let dx = target[0] - source[0];
    let dy = target[1] - source[1];
    let rho = dx.hypot(dy);
    let phi = dy.atan2(dx);
    let branch: Vec<f64> = stack
        .layer_params(omega)
        .iter()
        .flat_map(|p| p.wavenumbers().into_iter().map(|k| k.re))
        .collect();
    let channels = |k: f64| -> Result<Vec<Complex64>> {
        Ok(match which {
            Which::Ge => assemble_ge(&solve_em_spectral(&stack, omega, k, z_src)?, z)?.weighted.to_vec(),
            Which::Gh => assemble_gh(&solve_em_spectral(&stack, omega, k, z_src)?, z)?.weighted.to_vec(),
            Which::Elastic => {
                let sol = solve_elastic_spectral(&stack, omega, k, z_src, SourceKind::Tensor)?;
                assemble_g_elastic(&sol, z)?.weighted.to_vec()
            }
            Which::ElasticVector => {
                let sol = solve_elastic_spectral(&stack, omega, k, z_src, SourceKind::Vector)?;
                assemble_u_elastic(&sol, z)?.weighted.to_vec()
            }
        })
    };
    let h = hankel_channels(&channels, rho, &branch, spec)?;
    let mut g = Mat3::zeros();
    let count = h.len() / 3;
    for q in 0..count {
        let hq = &h[3 * q..3 * q + 3];
        if hq.iter().all(|v| *v == ZERO) {
            continue;
        }
        let weights = match which {
            Which::ElasticVector => vector_angular_weights(q, phi),
            _ => basis_angular_weights(q + 1, phi),
        };
        for n in 0..3 {
            g += weights[n] * hq[n];
        }
    }
    Ok(g)
}
