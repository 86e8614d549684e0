//! Layered Maxwell problem in the spectral domain.
//!
//! The dyadic fields are carried by three scalar functions of depth:
//! `b1` (TE), `b2` (TM) and `b3 = -∂_{z'} b2`. In each layer they are a
//! free-space term (source layer only) plus up- and down-going reaction
//! waves. Reaction amplitudes are referenced to the layer's bounding
//! interfaces, see [`LayerStack::reference_depth`].

use num_complex::Complex64;

use crate::basis::{realize_basis, BasisCoefficients, ChannelTensor, Mat3, SpectralPoint, Vec3};
use crate::linalg::SparseRows;
use crate::stack::{vertical_wavenumber, LayerParams, LayerStack, Material, ProblemKind};
use crate::{Direction, Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// A depth-dependent scalar written as three exponential terms evaluated at
/// one depth: free-space, up-going, down-going. `signs[m]` is the `τ` of
/// term `m`, so `∂_z` multiplies term `m` by `τ i k_z`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Channel {
    pub kz: Complex64,
    pub terms: [Complex64; 3],
    pub signs: [f64; 3],
}

impl Channel {
    pub fn value(&self) -> Complex64 {
        self.terms.iter().sum()
    }

    pub fn dz(&self) -> Complex64 {
        self.dz_channel().value()
    }

    pub fn dz_channel(&self) -> Channel {
        let mut out = *self;
        for m in 0..3 {
            out.terms[m] *= I * self.kz * self.signs[m];
        }
        out
    }

    pub fn scale(&self, s: Complex64) -> Channel {
        let mut out = *self;
        out.terms.iter_mut().for_each(|t| *t *= s);
        out
    }

    pub fn add(&self, other: &Channel) -> Channel {
        let mut out = *self;
        for m in 0..3 {
            out.terms[m] += other.terms[m];
        }
        out
    }

    /// Sum of term magnitudes, used to normalize residuals.
    pub fn magnitude(&self) -> f64 {
        self.terms.iter().map(|t| t.norm()).sum()
    }

    fn zero_like(&self) -> Channel {
        Channel {
            terms: [ZERO; 3],
            ..*self
        }
    }
}

/// EM parameters of one layer at a fixed `k_rho`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmLayer {
    pub eps: Complex64,
    pub mu: Complex64,
    pub k: Complex64,
    pub kz: Complex64,
    pub ref_up: f64,
    pub ref_down: f64,
}

impl EmLayer {
    fn phase(&self, dir: Direction, z: f64) -> Complex64 {
        match dir {
            Direction::Up => (I * self.kz * (z - self.ref_up)).exp(),
            Direction::Down => (-I * self.kz * (z - self.ref_down)).exp(),
        }
    }
}

/// Reaction amplitudes of `b1`, `b2`, `b3` for every layer.
#[derive(Clone, Debug, PartialEq)]
pub struct EmSpectralSolution {
    pub omega: f64,
    pub k_rho: f64,
    pub z_src: f64,
    pub source_layer: usize,
    layers: Vec<EmLayer>,
    interfaces: Vec<f64>,
    b1: Vec<[Complex64; 2]>,
    b2: Vec<[Complex64; 2]>,
    b3: Vec<[Complex64; 2]>,
    condition: f64,
    threshold: f64,
}

/// Values of `b1`, `b2`, `b3` at one depth, plus the layer they live in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmChannels {
    pub layer: usize,
    pub params: EmLayer,
    pub b1: Channel,
    pub b2: Channel,
    pub b3: Channel,
}

/// `ĝ^f = i e^{i k_z |z - z'|} / (2 k_z)`.
fn free_scalar(kz: Complex64, z: f64, z_src: f64) -> Complex64 {
    I * (I * kz * (z - z_src).abs()).exp() / (2.0 * kz)
}

/// Free-space `(b1, b2, b3)` in a homogeneous medium.
pub fn em_free_space_b(
    omega: f64,
    material: &Material,
    k_rho: f64,
    z: f64,
    z_src: f64,
) -> Result<(Complex64, Complex64, Complex64)> {
    let Material::Em { eps, mu } = *material else {
        return Err(Error::InvalidMaterial("expected an EM material".into()));
    };
    material.validate()?;
    if z == z_src {
        return Err(Error::CoincidentDepths { z });
    }
    let k = Complex64::new(eps * mu, 0.0).sqrt() * omega;
    let kz = vertical_wavenumber(k, k_rho);
    if kz.norm() <= branch_tolerance(k) {
        return Err(Error::BranchPoint { layer: 0, k_rho });
    }
    let g = free_scalar(kz, z, z_src);
    let tau = (z - z_src).signum();
    let b1 = -g / (I * omega);
    let b2 = b1 / mu;
    let b3 = I * kz * tau * b2;
    Ok((b1, b2, b3))
}

fn branch_tolerance(k: Complex64) -> f64 {
    1e-10 * k.norm().max(1.0)
}

fn layer_unknown(t: usize, dir: Direction) -> usize {
    2 * t + dir.index()
}

/// Solve the TE and TM interface systems at one `k_rho` for a unit source
/// at depth `z_src`.
pub fn solve_em_spectral(
    stack: &LayerStack,
    omega: f64,
    k_rho: f64,
    z_src: f64,
) -> Result<EmSpectralSolution> {
    if stack.kind() != ProblemKind::Maxwell {
        return Err(Error::InvalidStack("expected a Maxwell stack".into()));
    }
    if !(k_rho.is_finite() && k_rho >= 0.0) {
        return Err(Error::InvalidStack(format!("k_rho must be finite and >= 0, got {k_rho}")));
    }
    let j = stack.locate_layer(z_src)?;
    let layers: Vec<EmLayer> = stack
        .layer_params(omega)
        .iter()
        .enumerate()
        .map(|(t, p)| match *p {
            LayerParams::Em { eps, mu, k } => EmLayer {
                eps,
                mu,
                k,
                kz: vertical_wavenumber(k, k_rho),
                ref_up: stack.reference_depth(t, Direction::Up),
                ref_down: stack.reference_depth(t, Direction::Down),
            },
            _ => unreachable!("Maxwell stacks hold only EM layers"),
        })
        .collect();
    for (t, l) in layers.iter().enumerate() {
        if l.kz.norm() <= branch_tolerance(l.k) {
            return Err(Error::BranchPoint { layer: t, k_rho });
        }
    }
    let interfaces = stack.interfaces().to_vec();
    let n_layers = layers.len();
    let n = 2 * n_layers;

    // Free-space value of ĝ^f at each interface bounding the source layer,
    // with the sign of z - z' there.
    let src = layers[j];
    let free_at = |d: f64| {
        let tau = (d - z_src).signum();
        (free_scalar(src.kz, d, z_src), tau)
    };

    let build = |material_of: &dyn Fn(&EmLayer) -> Complex64| {
        let mut rows = SparseRows::new(n);
        rows.push_row(vec![(layer_unknown(0, Direction::Down), Complex64::new(1.0, 0.0))]);
        for (l, &d) in interfaces.iter().enumerate() {
            let (a, b) = (&layers[l], &layers[l + 1]);
            let (ma, mb) = (material_of(a), material_of(b));
            let mut value = Vec::with_capacity(4);
            let mut flux = Vec::with_capacity(4);
            for (t, side, m, sgn) in [(l, a, ma, 1.0), (l + 1, b, mb, -1.0)] {
                for dir in Direction::BOTH {
                    let ph = side.phase(dir, d);
                    value.push((layer_unknown(t, dir), ph * sgn));
                    flux.push((layer_unknown(t, dir), ph * I * side.kz * dir.tau() / m * sgn));
                }
            }
            rows.push_row(value);
            rows.push_row(flux);
        }
        rows.push_row(vec![(layer_unknown(n_layers - 1, Direction::Up), Complex64::new(1.0, 0.0))]);
        rows
    };

    // Right-hand sides for a free-space term s·ĝ^f: value, its z' derivative.
    let rhs_for = |scale: Complex64, material_of: &dyn Fn(&EmLayer) -> Complex64| {
        let mut r = vec![ZERO; n];
        let mut r_dzs = vec![ZERO; n];
        let m = material_of(&src);
        for (l, &d) in interfaces.iter().enumerate() {
            // Row 1 + 2l: value jump; row 2 + 2l: flux jump. The source side
            // enters with + above the interface and - below it.
            let sgn = if l == j {
                1.0
            } else if l + 1 == j {
                -1.0
            } else {
                continue;
            };
            let (g, tau) = free_at(d);
            let v = scale * g;
            let f = v * I * src.kz * tau / m;
            let dzs = -I * src.kz * tau;
            r[1 + 2 * l] -= sgn * v;
            r[2 + 2 * l] -= sgn * f;
            r_dzs[1 + 2 * l] -= sgn * v * dzs;
            r_dzs[2 + 2 * l] -= sgn * f * dzs;
        }
        (r, r_dzs)
    };

    let mu_of = |l: &EmLayer| l.mu;
    let eps_of = |l: &EmLayer| l.eps;
    let te = build(&mu_of).factor().ok_or(Error::SingularSystem { k_rho })?;
    let tm = build(&eps_of).factor().ok_or(Error::SingularSystem { k_rho })?;

    let s1 = -1.0 / (I * omega);
    let s2 = s1 / src.mu;
    let (r1, _) = rhs_for(s1, &mu_of);
    let (r2, r2_dzs) = rhs_for(s2, &eps_of);
    let x1 = te.solve(&r1);
    let x2 = tm.solve(&r2);
    let x2_dzs = tm.solve(&r2_dzs);

    // Radiation unknowns are pinned by identity rows; store them as exact
    // zeros rather than solver roundoff.
    let pack = |x: &[Complex64], sign: f64| -> Vec<[Complex64; 2]> {
        let mut b: Vec<[Complex64; 2]> = (0..n_layers)
            .map(|t| [x[2 * t] * sign, x[2 * t + 1] * sign])
            .collect();
        b[0][Direction::Down.index()] = ZERO;
        b[n_layers - 1][Direction::Up.index()] = ZERO;
        b
    };
    Ok(EmSpectralSolution {
        omega,
        k_rho,
        z_src,
        source_layer: j,
        b1: pack(&x1, 1.0),
        b2: pack(&x2, 1.0),
        b3: pack(&x2_dzs, -1.0),
        condition: te.condition().max(tm.condition()),
        threshold: stack.degenerate_threshold(omega),
        layers,
        interfaces,
    })
}

impl EmSpectralSolution {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, t: usize) -> &EmLayer {
        &self.layers[t]
    }

    /// Reaction amplitude of `b1` in layer `t`, referenced at
    /// [`EmLayer::ref_up`] / [`EmLayer::ref_down`].
    pub fn b1_r(&self, t: usize, dir: Direction) -> Complex64 {
        self.b1[t][dir.index()]
    }

    pub fn b2_r(&self, t: usize, dir: Direction) -> Complex64 {
        self.b2[t][dir.index()]
    }

    pub fn b3_r(&self, t: usize, dir: Direction) -> Complex64 {
        self.b3[t][dir.index()]
    }

    /// Amplitude in the `e^{τ i k_z z}` convention (origin-referenced).
    pub fn absolute(&self, amplitude: Complex64, t: usize, dir: Direction) -> Complex64 {
        let l = &self.layers[t];
        let r = match dir {
            Direction::Up => l.ref_up,
            Direction::Down => l.ref_down,
        };
        amplitude * (-I * l.kz * dir.tau() * r).exp()
    }

    /// 1-norm condition number of the worse of the two equilibrated systems.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn degenerate_threshold(&self) -> f64 {
        self.threshold
    }

    pub fn interfaces(&self) -> &[f64] {
        &self.interfaces
    }

    /// Copy with every reaction amplitude multiplied by `1 + rel`.
    pub fn perturbed(&self, rel: f64) -> Self {
        let mut out = self.clone();
        for b in [&mut out.b1, &mut out.b2, &mut out.b3] {
            for pair in b.iter_mut() {
                pair[0] *= 1.0 + rel;
                pair[1] *= 1.0 + rel;
            }
        }
        out
    }

    /// Locate `z` and evaluate the channels there.
    pub fn channels(&self, z: f64) -> Result<EmChannels> {
        let tol = 1e-12 * self.interfaces.iter().fold(1.0f64, |a, d| a.max(d.abs()));
        for (index, &depth) in self.interfaces.iter().enumerate() {
            if (z - depth).abs() <= tol {
                return Err(Error::OnInterface { z, index, depth });
            }
        }
        let t = self.interfaces.iter().take_while(|&&d| z < d).count();
        self.channels_in_layer(t, z)
    }

    /// Channels of layer `t` continued to depth `z` (which may be an
    /// interface of that layer).
    pub fn channels_in_layer(&self, t: usize, z: f64) -> Result<EmChannels> {
        let l = self.layers[t];
        let mut sign_free = 1.0;
        let mut f = [ZERO; 3];
        if t == self.source_layer {
            if z == self.z_src {
                return Err(Error::CoincidentDepths { z });
            }
            sign_free = (z - self.z_src).signum();
            let g = free_scalar(l.kz, z, self.z_src);
            let b1 = -g / (I * self.omega);
            let b2 = b1 / l.mu;
            f = [b1, b2, I * l.kz * sign_free * b2];
        }
        let up = l.phase(Direction::Up, z);
        let down = l.phase(Direction::Down, z);
        let signs = [sign_free, 1.0, -1.0];
        let channel = |free: Complex64, amps: &[Complex64; 2]| Channel {
            kz: l.kz,
            terms: [free, amps[0] * up, amps[1] * down],
            signs,
        };
        Ok(EmChannels {
            layer: t,
            params: l,
            b1: channel(f[0], &self.b1[t]),
            b2: channel(f[1], &self.b2[t]),
            b3: channel(f[2], &self.b3[t]),
        })
    }
}

/// `Ĝ_E` at depth `z`.
pub fn assemble_ge(sol: &EmSpectralSolution, z: f64) -> Result<ChannelTensor> {
    Ok(ge_from_channels(&sol.channels(z)?, sol.omega, sol.k_rho))
}

/// `Ĝ_H` at depth `z`.
pub fn assemble_gh(sol: &EmSpectralSolution, z: f64) -> Result<ChannelTensor> {
    Ok(gh_from_channels(&sol.channels(z)?, sol.k_rho))
}

pub fn ge_from_channels(ch: &EmChannels, omega: f64, k_rho: f64) -> ChannelTensor {
    let (k2, mu) = (ch.params.k * ch.params.k, ch.params.mu);
    let pre = -I * omega / k2;
    let b1 = ch.b1.value();
    let mut w = [ZERO; 9];
    w[0] = -I * omega * b1;
    w[1] = pre * mu * k_rho * k_rho * ch.b2.value();
    w[2] = pre * mu * ch.b2.dz() * k_rho;
    w[3] = pre * mu * ch.b3.value() * k_rho;
    w[4] = pre * (k2 * b1 + mu * ch.b3.dz());
    ChannelTensor { k_rho, weighted: w }
}

pub fn gh_from_channels(ch: &EmChannels, k_rho: f64) -> ChannelTensor {
    let mu = ch.params.mu;
    let b1 = ch.b1.value();
    let db1 = ch.b1.dz();
    let mut w = [ZERO; 9];
    w[5] = b1 / mu * k_rho;
    w[6] = ch.b2.value() * k_rho;
    w[7] = (db1 - mu * ch.b3.value()) / mu;
    w[8] = -db1 / mu;
    ChannelTensor { k_rho, weighted: w }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PotentialKind {
    Transverse,
    Sommerfeld,
}

/// Vector potential `Ĝ_A` on `J1..J5` at one depth, kept per exponential
/// term so the field operators can be applied exactly.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Potential {
    pub kind: PotentialKind,
    pub k: Complex64,
    pub mu: Complex64,
    /// `channels[w]` multiplies `J_{w+1}`.
    pub channels: [Channel; 5],
}

/// Transverse potential: `a1 = b1`, `a2 = μ b2`,
/// `a5 = (b1 - μ ∂_z ∂_{z'} b2 / k_z^2) / k_rho^2`.
pub fn recover_transverse_potential(sol: &EmSpectralSolution, z: f64) -> Result<Potential> {
    check_nondegenerate(sol)?;
    let ch = sol.channels(z)?;
    let p = ch.params;
    if p.kz.norm() <= branch_tolerance(p.k) {
        return Err(Error::BranchPoint {
            layer: ch.layer,
            k_rho: sol.k_rho,
        });
    }
    let zero = ch.b1.zero_like();
    let k2r = Complex64::new(sol.k_rho * sol.k_rho, 0.0);
    // -∂_{z'} b2 = b3
    let a5 = ch
        .b1
        .add(&ch.b3.dz_channel().scale(p.mu / (p.kz * p.kz)))
        .scale(1.0 / k2r);
    Ok(Potential {
        kind: PotentialKind::Transverse,
        k: p.k,
        mu: p.mu,
        channels: [ch.b1, ch.b2.scale(p.mu), zero, zero, a5],
    })
}

/// Sommerfeld potential: `a1 = b1`, `a2 = μ b2`,
/// `a4 = -(μ ∂_{z'} b2 + ∂_z b1) / k_rho^2`.
pub fn recover_sommerfeld_potential(sol: &EmSpectralSolution, z: f64) -> Result<Potential> {
    check_nondegenerate(sol)?;
    let ch = sol.channels(z)?;
    let p = ch.params;
    let zero = ch.b1.zero_like();
    let k2r = Complex64::new(sol.k_rho * sol.k_rho, 0.0);
    let a4 = ch
        .b3
        .scale(p.mu)
        .add(&ch.b1.dz_channel().scale(Complex64::new(-1.0, 0.0)))
        .scale(1.0 / k2r);
    Ok(Potential {
        kind: PotentialKind::Sommerfeld,
        k: p.k,
        mu: p.mu,
        channels: [ch.b1, ch.b2.scale(p.mu), zero, a4, zero],
    })
}

fn check_nondegenerate(sol: &EmSpectralSolution) -> Result<()> {
    if sol.k_rho <= sol.threshold {
        return Err(Error::DegenerateSpectralPoint {
            k_rho: sol.k_rho,
            threshold: sol.threshold,
        });
    }
    Ok(())
}

impl Potential {
    pub fn coefficients(&self) -> BasisCoefficients {
        let mut c = [ZERO; 5];
        for (w, ch) in self.channels.iter().enumerate() {
            c[w] = ch.value();
        }
        BasisCoefficients::restricted(c)
    }

    fn term_matrices(&self, point: &SpectralPoint) -> [(Mat3, Vec3); 3] {
        let kz = self.channels[0].kz;
        let signs = self.channels[0].signs;
        let basis: Vec<Mat3> = (1..=5).map(|w| realize_basis(w, point)).collect();
        std::array::from_fn(|m| {
            let mut a = Mat3::zeros();
            for (w, ch) in self.channels.iter().enumerate() {
                a += basis[w] * ch.terms[m];
            }
            let n = Vec3::new(I * point.kx, I * point.ky, I * kz * signs[m]);
            (a, n)
        })
    }

    /// `-iω (I + ∇∇/k^2) Ĝ_A`, with `∇ -> (i kx, i ky, τ i k_z)` per term.
    pub fn electric_field(&self, point: &SpectralPoint, omega: f64) -> Mat3 {
        let k2 = self.k * self.k;
        let mut e = Mat3::zeros();
        for (a, n) in self.term_matrices(point) {
            e += (a + n * (n.transpose() * a) / k2) * (-I * omega);
        }
        e
    }

    /// `(1/μ) ∇ × Ĝ_A`, applied column by column.
    pub fn magnetic_field(&self, point: &SpectralPoint) -> Mat3 {
        let mut h = Mat3::zeros();
        for (a, n) in self.term_matrices(point) {
            h += n.cross_matrix() * a / self.mu;
        }
        h
    }
}

/// Jump of one interface condition, normalized by the largest term
/// magnitude on either side.
#[derive(Clone, Debug, PartialEq)]
pub struct ConditionResidual {
    pub name: &'static str,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InterfaceReport {
    pub index: usize,
    pub depth: f64,
    pub conditions: Vec<ConditionResidual>,
}

impl InterfaceReport {
    pub fn max(&self) -> f64 {
        self.conditions.iter().fold(0.0, |a, c| a.max(c.residual))
    }
}

fn scalar_residual(above: Complex64, below: Complex64, scale: f64) -> f64 {
    let jump = (above - below).norm();
    if scale == 0.0 {
        jump
    } else {
        jump / scale
    }
}

fn matrix_residual(above: &Mat3, below: &Mat3) -> f64 {
    let scale = above.iter().chain(below.iter()).fold(0.0f64, |a, v| a.max(v.norm()));
    let jump = (above - below).iter().fold(0.0f64, |a, v| a.max(v.norm()));
    if scale == 0.0 {
        jump
    } else {
        jump / scale
    }
}

/// Residuals of every interface condition: the scalar TE/TM conditions and
/// the matrix conditions `⟦J1 Ĝ_E⟧`, `⟦ε J2 Ĝ_E⟧`, `⟦J9 Ĝ_H⟧`, `⟦μ J7 Ĝ_H⟧`
/// realized at `point`.
pub fn em_interface_residuals(sol: &EmSpectralSolution, point: &SpectralPoint) -> Result<Vec<InterfaceReport>> {
    let mut out = Vec::new();
    for (l, &d) in sol.interfaces.iter().enumerate() {
        let a = sol.channels_in_layer(l, d)?;
        let b = sol.channels_in_layer(l + 1, d)?;
        let mut conds = Vec::new();
        let mut push = |name: &'static str, x: Complex64, y: Complex64, sx: f64, sy: f64| {
            conds.push(ConditionResidual {
                name,
                residual: scalar_residual(x, y, sx.max(sy)),
            });
        };
        push("b1", a.b1.value(), b.b1.value(), a.b1.magnitude(), b.b1.magnitude());
        let (fa, fb) = (a.b1.dz_channel().scale(1.0 / a.params.mu), b.b1.dz_channel().scale(1.0 / b.params.mu));
        push("dz_b1/mu", fa.value(), fb.value(), fa.magnitude(), fb.magnitude());
        push("b2", a.b2.value(), b.b2.value(), a.b2.magnitude(), b.b2.magnitude());
        let (fa, fb) = (a.b2.dz_channel().scale(1.0 / a.params.eps), b.b2.dz_channel().scale(1.0 / b.params.eps));
        push("dz_b2/eps", fa.value(), fb.value(), fa.magnitude(), fb.magnitude());
        push("b3", a.b3.value(), b.b3.value(), a.b3.magnitude(), b.b3.magnitude());
        let (fa, fb) = (a.b3.dz_channel().scale(1.0 / a.params.eps), b.b3.dz_channel().scale(1.0 / b.params.eps));
        push("dz_b3/eps", fa.value(), fb.value(), fa.magnitude(), fb.magnitude());

        let ge_a = ge_from_channels(&a, sol.omega, sol.k_rho).realize(point);
        let ge_b = ge_from_channels(&b, sol.omega, sol.k_rho).realize(point);
        let gh_a = gh_from_channels(&a, sol.k_rho).realize(point);
        let gh_b = gh_from_channels(&b, sol.k_rho).realize(point);
        let j1 = realize_basis(1, point);
        let j2 = realize_basis(2, point);
        let j7 = realize_basis(7, point);
        let j9 = realize_basis(9, point);
        let matrix_conditions: [(&'static str, Mat3, Mat3); 4] = [
            ("J1 GE", j1 * ge_a, j1 * ge_b),
            ("eps J2 GE", j2 * ge_a * a.params.eps, j2 * ge_b * b.params.eps),
            ("J9 GH", j9 * gh_a, j9 * gh_b),
            ("mu J7 GH", j7 * gh_a * a.params.mu, j7 * gh_b * b.params.mu),
        ];
        for (name, x, y) in matrix_conditions {
            conds.push(ConditionResidual {
                name,
                residual: matrix_residual(&x, &y),
            });
        }
        out.push(InterfaceReport {
            index: l,
            depth: d,
            conditions: conds,
        });
    }
    Ok(out)
}
