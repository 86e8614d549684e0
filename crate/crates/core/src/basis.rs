//! The nine basis matrices `J1..J9`, their product table, and the vector
//! basis `j2, j3, j7` used for vector sources.
//!
//! Entries of `J_w` are polynomials in `i kx`, `i ky`. Coefficients on the
//! basis are functions of `k_rho` alone, which is what makes the spectral
//! solvers independent of the azimuth `alpha`.

use std::ops::Mul;
use std::sync::OnceLock;

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};
use num_complex::Complex64;

use crate::{Error, Result};

pub type Mat3 = Matrix3<Complex64>;
pub type Vec3 = Vector3<Complex64>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Default `k_rho` threshold below which [`decompose`] refuses.
pub const DEFAULT_DEGENERATE: f64 = 1e-8;

/// Horizontal wavenumber `(kx, ky)` together with its polar form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralPoint {
    pub kx: f64,
    pub ky: f64,
    pub k_rho: f64,
    pub alpha: f64,
}

impl SpectralPoint {
    pub fn from_cartesian(kx: f64, ky: f64) -> Self {
        SpectralPoint {
            kx,
            ky,
            k_rho: kx.hypot(ky),
            alpha: ky.atan2(kx),
        }
    }

    pub fn from_polar(k_rho: f64, alpha: f64) -> Self {
        assert!(k_rho >= 0.0, "k_rho must be nonnegative");
        SpectralPoint {
            kx: k_rho * alpha.cos(),
            ky: k_rho * alpha.sin(),
            k_rho,
            alpha,
        }
    }

    /// `kx^2 + ky^2`, computed from the Cartesian pair so that it matches
    /// realized products bit for bit as far as possible.
    pub fn k_rho_sq(&self) -> f64 {
        self.kx * self.kx + self.ky * self.ky
    }
}

/// Polynomial degree in `(kx, ky)` of the entries of `J_w`.
pub fn basis_degree(index: usize) -> i32 {
    match index {
        1 | 2 | 9 => 0,
        3 | 4 | 6 | 7 => 1,
        5 | 8 => 2,
        _ => panic!("basis index {index} out of range 1..=9"),
    }
}

/// The basis matrix `J_index` at `point`.
///
/// # Panics
/// If `index` is not in `1..=9`.
pub fn realize_basis(index: usize, point: &SpectralPoint) -> Mat3 {
    realize_from(index, point.kx, point.ky)
}

/// `J_index` evaluated with `(kx, ky)` replaced by `(cos α, sin α)`, i.e.
/// `J_index / k_rho^degree`. Finite at `k_rho = 0`.
pub fn realize_unit_basis(index: usize, alpha: f64) -> Mat3 {
    realize_from(index, alpha.cos(), alpha.sin())
}

fn realize_from(index: usize, kx: f64, ky: f64) -> Mat3 {
    let c = |re: f64| Complex64::new(re, 0.0);
    let ikx = I * kx;
    let iky = I * ky;
    let mut m = Mat3::zeros();
    match index {
        1 => {
            m[(0, 0)] = c(1.0);
            m[(1, 1)] = c(1.0);
        }
        2 => m[(2, 2)] = c(1.0),
        3 => {
            m[(0, 2)] = ikx;
            m[(1, 2)] = iky;
        }
        4 => {
            m[(2, 0)] = ikx;
            m[(2, 1)] = iky;
        }
        5 => {
            m[(0, 0)] = c(-kx * kx);
            m[(0, 1)] = c(-kx * ky);
            m[(1, 0)] = c(-kx * ky);
            m[(1, 1)] = c(-ky * ky);
        }
        6 => {
            m[(2, 0)] = -iky;
            m[(2, 1)] = ikx;
        }
        7 => {
            m[(0, 2)] = iky;
            m[(1, 2)] = -ikx;
        }
        8 => {
            m[(0, 0)] = c(kx * ky);
            m[(0, 1)] = c(ky * ky);
            m[(1, 0)] = c(-kx * kx);
            m[(1, 1)] = c(-kx * ky);
        }
        9 => {
            m[(0, 1)] = c(1.0);
            m[(1, 0)] = c(-1.0);
        }
        _ => panic!("basis index {index} out of range 1..=9"),
    }
    m
}

/// Coefficients on `J1..J9`. Stored zero-based: `c[0]` multiplies `J1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BasisCoefficients {
    pub c: [Complex64; 9],
    /// When set, `c[5..9]` are exactly zero (an element of the restricted
    /// subspace spanned by `J1..J5`).
    pub restricted: bool,
}

impl BasisCoefficients {
    pub fn zero() -> Self {
        BasisCoefficients {
            c: [ZERO; 9],
            restricted: true,
        }
    }

    pub fn new(c: [Complex64; 9]) -> Self {
        BasisCoefficients {
            c,
            restricted: false,
        }
    }

    pub fn restricted(c5: [Complex64; 5]) -> Self {
        let mut c = [ZERO; 9];
        c[..5].copy_from_slice(&c5);
        BasisCoefficients {
            c,
            restricted: true,
        }
    }

    /// Unit coefficient on `J_index`.
    pub fn unit(index: usize) -> Self {
        assert!((1..=9).contains(&index), "basis index {index} out of range");
        let mut c = [ZERO; 9];
        c[index - 1] = Complex64::new(1.0, 0.0);
        BasisCoefficients {
            c,
            restricted: index <= 5,
        }
    }

    /// One-based accessor.
    pub fn get(&self, index: usize) -> Complex64 {
        self.c[index - 1]
    }

    pub fn realize(&self, point: &SpectralPoint) -> Mat3 {
        let mut m = Mat3::zeros();
        for (w, cw) in self.c.iter().enumerate() {
            if *cw != ZERO {
                m += realize_basis(w + 1, point) * *cw;
            }
        }
        m
    }

    pub fn norm(&self) -> f64 {
        self.c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Euclidean norm of the `J6..J9` part.
    pub fn class_i_norm(&self) -> f64 {
        self.c[5..].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy)]
struct Term {
    w: usize,
    coef: f64,
    k2: bool,
}

const fn t(w: usize, coef: f64, k2: bool) -> Term {
    Term { w, coef, k2 }
}

const N: &[Term] = &[];

/// `TABLE[u-1][v-1]` lists the expansion of `J_u J_v`; `k2` marks a factor
/// of `k_rho^2`.
static TABLE: [[&[Term]; 9]; 9] = [
    [
        &[t(1, 1.0, false)],
        N,
        &[t(3, 1.0, false)],
        N,
        &[t(5, 1.0, false)],
        N,
        &[t(7, 1.0, false)],
        &[t(8, 1.0, false)],
        &[t(9, 1.0, false)],
    ],
    [
        N,
        &[t(2, 1.0, false)],
        N,
        &[t(4, 1.0, false)],
        N,
        &[t(6, 1.0, false)],
        N,
        N,
        N,
    ],
    [
        N,
        &[t(3, 1.0, false)],
        N,
        &[t(5, 1.0, false)],
        N,
        &[t(8, 1.0, false), t(9, -1.0, true)],
        N,
        N,
        N,
    ],
    [
        &[t(4, 1.0, false)],
        N,
        &[t(2, -1.0, true)],
        N,
        &[t(4, -1.0, true)],
        N,
        N,
        N,
        &[t(6, 1.0, false)],
    ],
    [
        &[t(5, 1.0, false)],
        N,
        &[t(3, -1.0, true)],
        N,
        &[t(5, -1.0, true)],
        N,
        N,
        N,
        &[t(8, 1.0, false), t(9, -1.0, true)],
    ],
    [
        &[t(6, 1.0, false)],
        N,
        N,
        N,
        N,
        N,
        &[t(2, 1.0, true)],
        &[t(4, -1.0, true)],
        &[t(4, -1.0, false)],
    ],
    [
        N,
        &[t(7, 1.0, false)],
        N,
        &[t(8, -1.0, false)],
        N,
        &[t(1, 1.0, true), t(5, 1.0, false)],
        N,
        N,
        N,
    ],
    [
        &[t(8, 1.0, false)],
        N,
        &[t(7, 1.0, true)],
        N,
        &[t(8, -1.0, true)],
        N,
        N,
        N,
        &[t(1, -1.0, true), t(5, -1.0, false)],
    ],
    [
        &[t(9, 1.0, false)],
        N,
        &[t(7, 1.0, false)],
        N,
        &[t(8, -1.0, false)],
        N,
        &[t(3, -1.0, false)],
        &[t(5, 1.0, false)],
        &[t(1, -1.0, false)],
    ],
];

/// Coefficients of `J_u J_v` predicted by the product table.
pub fn table_product(u: usize, v: usize, k_rho_sq: Complex64) -> BasisCoefficients {
    let mut out = [ZERO; 9];
    for term in TABLE[u - 1][v - 1] {
        let scale = if term.k2 { k_rho_sq } else { Complex64::new(1.0, 0.0) };
        out[term.w - 1] += scale * term.coef;
    }
    BasisCoefficients::new(out)
}

/// Product `a·b` computed from the structure constants.
pub fn multiply_in_basis(
    a: &BasisCoefficients,
    b: &BasisCoefficients,
    k_rho_sq: Complex64,
) -> BasisCoefficients {
    table_self_check();
    let mut out = [ZERO; 9];
    for (u, au) in a.c.iter().enumerate() {
        if *au == ZERO {
            continue;
        }
        for (v, bv) in b.c.iter().enumerate() {
            if *bv == ZERO {
                continue;
            }
            let ab = au * bv;
            for term in TABLE[u][v] {
                let mut x = ab * term.coef;
                if term.k2 {
                    x *= k_rho_sq;
                }
                out[term.w - 1] += x;
            }
        }
    }
    let restricted = a.restricted && b.restricted;
    if restricted {
        for x in &mut out[5..] {
            *x = ZERO;
        }
    }
    BasisCoefficients { c: out, restricted }
}

/// Maximum absolute entry difference between `J_u J_v` and the table
/// prediction, for each ordered pair.
pub fn product_table_residuals(point: &SpectralPoint) -> [[f64; 9]; 9] {
    let k2 = Complex64::new(point.k_rho_sq(), 0.0);
    let mut out = [[0.0; 9]; 9];
    for u in 1..=9 {
        let ju = realize_basis(u, point);
        for v in 1..=9 {
            let direct = ju * realize_basis(v, point);
            let predicted = table_product(u, v, k2).realize(point);
            out[u - 1][v - 1] = (direct - predicted).iter().map(|z| z.norm()).fold(0.0, f64::max);
        }
    }
    out
}

fn table_self_check() {
    static CHECKED: OnceLock<()> = OnceLock::new();
    CHECKED.get_or_init(|| {
        for p in [
            SpectralPoint::from_cartesian(0.75, -1.25),
            SpectralPoint::from_cartesian(-2.0, 0.5),
        ] {
            let worst = product_table_residuals(&p)
                .iter()
                .flatten()
                .fold(0.0f64, |a, &b| a.max(b));
            assert!(worst < 1e-12, "product table disagrees with realized products: {worst:e}");
        }
    });
}

/// Coefficients of `m` on `J1..J9` at `point`, with the default threshold.
pub fn decompose(m: &Mat3, point: &SpectralPoint) -> Result<BasisCoefficients> {
    decompose_with_threshold(m, point, DEFAULT_DEGENERATE)
}

/// Coefficients of `m` on `J1..J9`, refusing when `k_rho <= threshold`.
///
/// Columns of the 9x9 system are normalized so the solve is well conditioned
/// for any `k_rho`.
pub fn decompose_with_threshold(
    m: &Mat3,
    point: &SpectralPoint,
    threshold: f64,
) -> Result<BasisCoefficients> {
    if point.k_rho <= threshold {
        return Err(Error::DegenerateSpectralPoint {
            k_rho: point.k_rho,
            threshold,
        });
    }
    let mut a = SMatrix::<Complex64, 9, 9>::zeros();
    let mut scales = [0.0; 9];
    for w in 0..9 {
        let j = realize_basis(w + 1, point);
        let s = j.norm();
        scales[w] = s;
        for (r, entry) in j.iter().enumerate() {
            a[(r, w)] = entry / s;
        }
    }
    let rhs = SVector::<Complex64, 9>::from_iterator(m.iter().copied());
    let y = a.lu().solve(&rhs).ok_or(Error::DegenerateSpectralPoint {
        k_rho: point.k_rho,
        threshold,
    })?;
    let mut c = [ZERO; 9];
    for w in 0..9 {
        c[w] = y[w] / scales[w];
    }
    Ok(BasisCoefficients::new(c))
}

/// Ring class of a basis expansion: `R` spans `J1..J5`, `I` spans `J6..J9`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BasisClass {
    R,
    I,
}

impl Mul for BasisClass {
    type Output = BasisClass;

    fn mul(self, rhs: BasisClass) -> BasisClass {
        if self == rhs {
            BasisClass::R
        } else {
            BasisClass::I
        }
    }
}

pub fn product_rule_class(a: BasisClass, b: BasisClass) -> BasisClass {
    a * b
}

/// The vector basis element `j_index` (`index` in `{2, 3, 7}`): third
/// columns of `J2`, `J3`, `J7`.
pub fn realize_vector_basis(index: usize, point: &SpectralPoint) -> Vec3 {
    match index {
        2 | 3 | 7 => realize_basis(index, point).column(2).into_owned(),
        _ => panic!("vector basis index {index} not in {{2, 3, 7}}"),
    }
}

/// Coefficients on `j2, j3, j7`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VectorBasisCoefficients {
    pub c2: Complex64,
    pub c3: Complex64,
    pub c7: Complex64,
}

impl VectorBasisCoefficients {
    pub fn realize(&self, point: &SpectralPoint) -> Vec3 {
        Vec3::new(
            I * (point.kx * self.c3 + point.ky * self.c7),
            I * (point.ky * self.c3 - point.kx * self.c7),
            self.c2,
        )
    }

    pub fn norm(&self) -> f64 {
        (self.c2.norm_sqr() + self.c3.norm_sqr() + self.c7.norm_sqr()).sqrt()
    }
}

/// Coefficients of `v` on `j2, j3, j7`. `j3` and `j7` are orthogonal, so
/// the horizontal part projects in closed form.
pub fn decompose_vector(
    v: &Vec3,
    point: &SpectralPoint,
    threshold: f64,
) -> Result<VectorBasisCoefficients> {
    if point.k_rho <= threshold {
        return Err(Error::DegenerateSpectralPoint {
            k_rho: point.k_rho,
            threshold,
        });
    }
    let k2 = point.k_rho_sq();
    let (kx, ky) = (point.kx, point.ky);
    // <h, j> = sum h_i conj(j_i)
    let c3 = (v[0] * (-I * kx) + v[1] * (-I * ky)) / k2;
    let c7 = (v[0] * (-I * ky) + v[1] * (I * kx)) / k2;
    Ok(VectorBasisCoefficients { c2: v[2], c3, c7 })
}

/// A basis expansion whose channel `w` is stored multiplied by
/// `k_rho^deg(J_w)`. The weighted channels are regular at `k_rho = 0`, where
/// the `1/k_rho^2` of the `J5`, `J8` coefficients cancels against the
/// degree-two entries of those matrices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelTensor {
    pub k_rho: f64,
    pub weighted: [Complex64; 9],
}

impl ChannelTensor {
    /// Plain basis coefficients; refused at degenerate `k_rho`.
    pub fn coefficients(&self, threshold: f64) -> Result<BasisCoefficients> {
        if self.k_rho <= threshold {
            return Err(Error::DegenerateSpectralPoint {
                k_rho: self.k_rho,
                threshold,
            });
        }
        let mut c = [ZERO; 9];
        for w in 0..9 {
            c[w] = self.weighted[w] / self.k_rho.powi(basis_degree(w + 1));
        }
        let restricted = c[5..].iter().all(|x| *x == ZERO);
        Ok(BasisCoefficients { c, restricted })
    }

    /// Realized 3x3 matrix at azimuth `point.alpha`. Uses unit-direction
    /// basis matrices, so it stays exact through `k_rho = 0`.
    pub fn realize(&self, point: &SpectralPoint) -> Mat3 {
        let mut m = Mat3::zeros();
        for w in 0..9 {
            if self.weighted[w] != ZERO {
                m += realize_unit_basis(w + 1, point.alpha) * self.weighted[w];
            }
        }
        m
    }
}

/// Vector analogue of [`ChannelTensor`] on `j2, j3, j7`; the `j3`, `j7`
/// channels are stored multiplied by `k_rho`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelVector {
    pub k_rho: f64,
    pub weighted: [Complex64; 3],
}

impl ChannelVector {
    pub fn coefficients(&self, threshold: f64) -> Result<VectorBasisCoefficients> {
        if self.k_rho <= threshold {
            return Err(Error::DegenerateSpectralPoint {
                k_rho: self.k_rho,
                threshold,
            });
        }
        Ok(VectorBasisCoefficients {
            c2: self.weighted[0],
            c3: self.weighted[1] / self.k_rho,
            c7: self.weighted[2] / self.k_rho,
        })
    }

    pub fn realize(&self, point: &SpectralPoint) -> Vec3 {
        let unit = VectorBasisCoefficients {
            c2: self.weighted[0],
            c3: self.weighted[1],
            c7: self.weighted[2],
        };
        unit.realize(&SpectralPoint {
            kx: point.alpha.cos(),
            ky: point.alpha.sin(),
            k_rho: 1.0,
            alpha: point.alpha,
        })
    }
}
