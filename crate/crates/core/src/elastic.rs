//! Layered elastic problem in the spectral domain.
//!
//! A solid layer carries per direction the five coefficients `x1..x5` of
//! `Σ [(-τ i k_sz J1 + J4) e_s + (τ i k_cz J2 + J3) e_c] X`. A fluid layer
//! carries the rank-one parameters `(u, v)` of
//! `u (τ i k_cz J2 + J3) + v (τ i k_cz J4 + J5)`. Vacuum carries nothing.
//!
//! Interface conditions reduce to the ten scalars `T1..T10`, which split
//! into two independent groups: A = {T2, T4, T5, T7, T8, T10} over
//! `x1, x4, x5, v` and B = {T1, T3, T6, T9} over `x2, x3, u`.
//! A vector source in a fluid only excites group B.

use num_complex::Complex64;

use crate::basis::{ChannelTensor, ChannelVector};
use crate::linalg::SparseRows;
use crate::maxwell::{ConditionResidual, InterfaceReport};
use crate::stack::{vertical_wavenumber, LayerParams, LayerStack, Material, Phase, ProblemKind};
use crate::{Direction, Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SourceKind {
    /// Point force in a solid layer; 3x3 displacement Green's function.
    Tensor,
    /// Point source in a fluid layer; displacement vector.
    Vector,
}

/// Reaction coefficients of one layer. Index 0 of each pair is the
/// up-going wave, index 1 the down-going one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ElasticLayerCoefficients {
    Solid { x: [[Complex64; 5]; 2] },
    Fluid { u: [Complex64; 2], v: [Complex64; 2] },
    Vacuum,
}

impl ElasticLayerCoefficients {
    fn zero(phase: Phase) -> Self {
        match phase {
            Phase::Solid => ElasticLayerCoefficients::Solid { x: [[ZERO; 5]; 2] },
            Phase::Fluid => ElasticLayerCoefficients::Fluid {
                u: [ZERO; 2],
                v: [ZERO; 2],
            },
            Phase::Vacuum => ElasticLayerCoefficients::Vacuum,
        }
    }

    /// All coefficients of direction `dir`.
    pub fn direction(&self, dir: Direction) -> Vec<Complex64> {
        let d = dir.index();
        match self {
            ElasticLayerCoefficients::Solid { x } => x[d].to_vec(),
            ElasticLayerCoefficients::Fluid { u, v } => vec![u[d], v[d]],
            ElasticLayerCoefficients::Vacuum => Vec::new(),
        }
    }

    fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        match *self {
            ElasticLayerCoefficients::Solid { x } => ElasticLayerCoefficients::Solid {
                x: x.map(|row| row.map(&f)),
            },
            ElasticLayerCoefficients::Fluid { u, v } => ElasticLayerCoefficients::Fluid {
                u: u.map(&f),
                v: v.map(&f),
            },
            ElasticLayerCoefficients::Vacuum => ElasticLayerCoefficients::Vacuum,
        }
    }
}

/// Resolved parameters of one layer at a fixed `k_rho`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ElasticLayer {
    pub params: LayerParams,
    pub ksz: Complex64,
    pub kcz: Complex64,
    pub ref_up: f64,
    pub ref_down: f64,
}

impl ElasticLayer {
    pub fn phase(&self) -> Phase {
        self.params.phase().expect("elastic layer")
    }

    fn reference(&self, dir: Direction) -> f64 {
        match dir {
            Direction::Up => self.ref_up,
            Direction::Down => self.ref_down,
        }
    }

    /// `(e_s, e_c)` of a reaction wave at depth `z`.
    fn phases(&self, dir: Direction, z: f64) -> (Complex64, Complex64) {
        let arg = I * dir.tau() * (z - self.reference(dir));
        ((arg * self.ksz).exp(), (arg * self.kcz).exp())
    }
}

fn resolve_layers(stack: &LayerStack, omega: f64, k_rho: f64) -> Vec<ElasticLayer> {
    stack
        .layer_params(omega)
        .into_iter()
        .enumerate()
        .map(|(t, params)| {
            let (ksz, kcz) = match params {
                LayerParams::Solid { ks, kc, .. } => {
                    (vertical_wavenumber(ks, k_rho), vertical_wavenumber(kc, k_rho))
                }
                LayerParams::Fluid { kc, .. } => (ZERO, vertical_wavenumber(kc, k_rho)),
                _ => (ZERO, ZERO),
            };
            ElasticLayer {
                params,
                ksz,
                kcz,
                ref_up: stack.reference_depth(t, Direction::Up),
                ref_down: stack.reference_depth(t, Direction::Down),
            }
        })
        .collect()
}

fn branch_tolerance(k: Complex64) -> f64 {
    1e-10 * k.norm().max(1.0)
}

/// Free-space coefficients of one direction in a solid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeSpaceCoefficients {
    pub ds: Complex64,
    pub dc: Complex64,
    /// `x1..x5`, to be used with `e^{τ i k (z - z')}`.
    pub x: [Complex64; 5],
}

/// Free-space `x^{f*}` for a point force in a homogeneous solid. The
/// coefficient applies only on the side of the source that `dir` points to.
/// The `↓` set carries an overall factor `τ = -1` relative to `↑`, so that
/// the assembled tensor equals the free-space dyadic on both sides.
pub fn elastic_free_space_coeffs(
    omega: f64,
    material: &Material,
    k_rho: f64,
    dir: Direction,
) -> Result<FreeSpaceCoefficients> {
    material.validate()?;
    if material.phase() != Some(Phase::Solid) {
        return Err(Error::InvalidMaterial("free-space coefficients need a solid".into()));
    }
    let stack = LayerStack::new(vec![], vec![*material])?;
    let layer = resolve_layers(&stack, omega, k_rho)[0];
    free_solid(&layer, omega, dir).ok_or(Error::BranchPoint { layer: 0, k_rho })
}

fn free_solid(layer: &ElasticLayer, omega: f64, dir: Direction) -> Option<FreeSpaceCoefficients> {
    let LayerParams::Solid { rho, ks, kc, .. } = layer.params else {
        return None;
    };
    let (ksz, kcz) = (layer.ksz, layer.kcz);
    if ksz.norm() <= branch_tolerance(ks) || kcz.norm() <= branch_tolerance(kc) {
        return None;
    }
    let w2r = omega * omega * rho;
    let ds = -1.0 / (2.0 * w2r * ksz * ksz);
    let dc = -1.0 / (2.0 * w2r * kcz * kcz);
    let tau = dir.tau();
    Some(FreeSpaceCoefficients {
        ds,
        dc,
        x: [tau * ks * ks * ds, -tau * kcz * kcz * dc, I * ksz * ds, I * kcz * dc, tau * ds],
    })
}

/// Free-space `g_u` for a point source in a fluid, used with
/// `e^{τ i k_cz (z - z')}`.
fn free_fluid(layer: &ElasticLayer, omega: f64) -> Option<Complex64> {
    let LayerParams::Fluid { rho, kc, .. } = layer.params else {
        return None;
    };
    if layer.kcz.norm() <= branch_tolerance(kc) {
        return None;
    }
    Some(I / (2.0 * omega * omega * rho * layer.kcz))
}

/// The ten continuity scalars on one side of an interface, each with the
/// sum of its summand magnitudes (for residual normalization).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TractionScalars {
    pub t: [Complex64; 10],
    pub scale: [f64; 10],
}

impl TractionScalars {
    fn zero() -> Self {
        TractionScalars {
            t: [ZERO; 10],
            scale: [0.0; 10],
        }
    }

    fn add(&mut self, index: usize, terms: &[Complex64]) {
        for v in terms {
            self.t[index - 1] += v;
            self.scale[index - 1] += v.norm();
        }
    }

    /// One-based accessor.
    pub fn get(&self, index: usize) -> Complex64 {
        self.t[index - 1]
    }
}

/// Add the contribution of one solid wave pair: `x` with phases `es`, `ec`.
fn add_solid(
    ts: &mut TractionScalars,
    layer: &ElasticLayer,
    k_rho: f64,
    tau: f64,
    x: &[Complex64; 5],
    es: Complex64,
    ec: Complex64,
) {
    let LayerParams::Solid {
        lambda, mu, gamma, ..
    } = layer.params
    else {
        unreachable!()
    };
    let k2 = k_rho * k_rho;
    let (ksz, kcz) = (layer.ksz, layer.kcz);
    let iks = I * tau * ksz;
    let ikc = I * tau * kcz;
    let (s1, s3, s5) = (x[0] * es, x[2] * es, x[4] * es);
    let (c2, c4) = (x[1] * ec, x[3] * ec);
    let pc = -lambda * k2 - gamma * kcz * kcz;
    let shear = mu * (ksz * ksz - k2);
    ts.add(1, &[-2.0 * mu * iks * k2 * s3, pc * c2]);
    ts.add(2, &[2.0 * mu * iks * s1, -2.0 * mu * iks * k2 * s5, pc * c4]);
    ts.add(3, &[-k2 * s3, ikc * c2]);
    ts.add(4, &[s1, -k2 * s5, ikc * c4]);
    ts.add(5, &[mu * ksz * ksz * s1]);
    ts.add(6, &[shear * s3, 2.0 * mu * ikc * c2]);
    ts.add(7, &[mu * s1, shear * s5, 2.0 * mu * ikc * c4]);
    ts.add(8, &[-iks * s1]);
    ts.add(9, &[-iks * s3, c2]);
    ts.add(10, &[-iks * s5, c4]);
}

/// Fluid analogues: pressure-type (a), normal displacement (b) and the
/// horizontal displacement (d) rows. Group (c) is identically zero.
fn add_fluid(
    ts: &mut TractionScalars,
    layer: &ElasticLayer,
    omega: f64,
    tau: f64,
    u: Complex64,
    v: Complex64,
    ec: Complex64,
) {
    let LayerParams::Fluid { rho, .. } = layer.params else {
        unreachable!()
    };
    let ikc = I * tau * layer.kcz;
    let (cu, cv) = (u * ec, v * ec);
    let p = -omega * omega * rho;
    ts.add(1, &[p * cu]);
    ts.add(2, &[p * cv]);
    ts.add(3, &[ikc * cu]);
    ts.add(4, &[ikc * cv]);
    ts.add(9, &[cu]);
    ts.add(10, &[cv]);
}

/// `T1..T10` of the reaction field described by `coeffs` at depth `z`.
pub fn evaluate_traction_scalars(
    coeffs: &ElasticLayerCoefficients,
    layer: &ElasticLayer,
    omega: f64,
    k_rho: f64,
    z: f64,
) -> TractionScalars {
    let mut ts = TractionScalars::zero();
    for dir in Direction::BOTH {
        let d = dir.index();
        let (es, ec) = layer.phases(dir, z);
        match coeffs {
            ElasticLayerCoefficients::Solid { x } => {
                add_solid(&mut ts, layer, k_rho, dir.tau(), &x[d], es, ec)
            }
            ElasticLayerCoefficients::Fluid { u, v } => {
                add_fluid(&mut ts, layer, omega, dir.tau(), u[d], v[d], ec)
            }
            ElasticLayerCoefficients::Vacuum => {}
        }
    }
    ts
}

/// Free-space contribution to the scalars in the source layer at `z`.
fn free_scalars(
    layer: &ElasticLayer,
    kind: SourceKind,
    omega: f64,
    k_rho: f64,
    z: f64,
    z_src: f64,
) -> Option<TractionScalars> {
    let dir = if z > z_src { Direction::Up } else { Direction::Down };
    let tau = dir.tau();
    let dz = z - z_src;
    let mut ts = TractionScalars::zero();
    match kind {
        SourceKind::Tensor => {
            let f = free_solid(layer, omega, dir)?;
            let es = (I * tau * layer.ksz * dz).exp();
            let ec = (I * tau * layer.kcz * dz).exp();
            add_solid(&mut ts, layer, k_rho, tau, &f.x, es, ec);
        }
        SourceKind::Vector => {
            let g = free_fluid(layer, omega)?;
            let ec = (I * tau * layer.kcz * dz).exp();
            add_fluid(&mut ts, layer, omega, tau, g, ZERO, ec);
        }
    }
    Some(ts)
}

const GROUP_A: [usize; 6] = [2, 4, 5, 7, 8, 10];
const GROUP_B: [usize; 4] = [1, 3, 6, 9];

/// Scalars that must be continuous across an interface between `above` and
/// `below`, in increasing order.
pub fn mandated_conditions(above: Phase, below: Phase) -> Result<&'static [usize]> {
    use Phase::*;
    Ok(match (above, below) {
        (Solid, Solid) => &[1, 2, 3, 4, 5, 6, 7, 8, 9, 10],
        (Solid, Fluid) | (Fluid, Solid) => &[1, 2, 3, 4, 5, 6, 7],
        (Fluid, Fluid) => &[1, 2, 3, 4],
        (Solid, Vacuum) | (Vacuum, Solid) => &[1, 2, 5, 6, 7],
        (Fluid, Vacuum) | (Vacuum, Fluid) => &[1, 2],
        (Vacuum, Vacuum) => {
            return Err(Error::InvalidStack("two adjacent vacuum layers".into()))
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Group {
    A,
    B,
}

impl Group {
    fn conditions(self) -> &'static [usize] {
        match self {
            Group::A => &GROUP_A,
            Group::B => &GROUP_B,
        }
    }
}

/// Unknown slots of a layer within one group, as (direction, slot) where
/// slot indexes `x` (solid, zero-based) or 0 = u, 1 = v (fluid).
fn group_slots(phase: Phase, group: Group) -> &'static [(Direction, usize)] {
    use Direction::{Down, Up};
    match (phase, group) {
        (Phase::Solid, Group::A) => &[(Up, 0), (Up, 3), (Up, 4), (Down, 0), (Down, 3), (Down, 4)],
        (Phase::Solid, Group::B) => &[(Up, 1), (Up, 2), (Down, 1), (Down, 2)],
        (Phase::Fluid, Group::A) => &[(Up, 1), (Down, 1)],
        (Phase::Fluid, Group::B) => &[(Up, 0), (Down, 0)],
        (Phase::Vacuum, _) => &[],
    }
}

fn unit_block(phase: Phase, dir: Direction, slot: usize) -> ElasticLayerCoefficients {
    let mut block = ElasticLayerCoefficients::zero(phase);
    let d = dir.index();
    match &mut block {
        ElasticLayerCoefficients::Solid { x } => x[d][slot] = ONE,
        ElasticLayerCoefficients::Fluid { u, v } => {
            if slot == 0 {
                u[d] = ONE
            } else {
                v[d] = ONE
            }
        }
        ElasticLayerCoefficients::Vacuum => {}
    }
    block
}

fn set_slot(block: &mut ElasticLayerCoefficients, dir: Direction, slot: usize, value: Complex64) {
    let d = dir.index();
    match block {
        ElasticLayerCoefficients::Solid { x } => x[d][slot] = value,
        ElasticLayerCoefficients::Fluid { u, v } => {
            if slot == 0 {
                u[d] = value
            } else {
                v[d] = value
            }
        }
        ElasticLayerCoefficients::Vacuum => {}
    }
}

/// Solved reaction coefficients for every layer.
#[derive(Clone, Debug, PartialEq)]
pub struct ElasticSpectralSolution {
    pub omega: f64,
    pub k_rho: f64,
    pub z_src: f64,
    pub source_layer: usize,
    pub kind: SourceKind,
    layers: Vec<ElasticLayer>,
    interfaces: Vec<f64>,
    coeffs: Vec<ElasticLayerCoefficients>,
    condition: f64,
    threshold: f64,
}

/// Solve the interface systems at one `k_rho` for a unit source at `z_src`.
pub fn solve_elastic_spectral(
    stack: &LayerStack,
    omega: f64,
    k_rho: f64,
    z_src: f64,
    kind: SourceKind,
) -> Result<ElasticSpectralSolution> {
    if stack.kind() != ProblemKind::Elastic {
        return Err(Error::InvalidStack("expected an elastic stack".into()));
    }
    if !(k_rho.is_finite() && k_rho >= 0.0) {
        return Err(Error::InvalidStack(format!("k_rho must be finite and >= 0, got {k_rho}")));
    }
    let j = stack.locate_layer(z_src)?;
    let layers = resolve_layers(stack, omega, k_rho);
    let source_phase = layers[j].phase();
    match (kind, source_phase) {
        (SourceKind::Tensor, Phase::Solid) | (SourceKind::Vector, Phase::Fluid) => {}
        _ => {
            return Err(Error::PhaseMismatch {
                layer: j,
                detail: format!("{kind:?} source in a {source_phase:?} layer"),
            })
        }
    }
    for (t, l) in layers.iter().enumerate() {
        let bad = match l.params {
            LayerParams::Solid { ks, kc, .. } => {
                l.ksz.norm() <= branch_tolerance(ks) || l.kcz.norm() <= branch_tolerance(kc)
            }
            LayerParams::Fluid { kc, .. } => l.kcz.norm() <= branch_tolerance(kc),
            _ => false,
        };
        if bad {
            return Err(Error::BranchPoint { layer: t, k_rho });
        }
    }
    let interfaces = stack.interfaces().to_vec();
    let mut coeffs: Vec<ElasticLayerCoefficients> =
        layers.iter().map(|l| ElasticLayerCoefficients::zero(l.phase())).collect();
    let groups: &[Group] = match kind {
        SourceKind::Tensor => &[Group::A, Group::B],
        SourceKind::Vector => &[Group::B],
    };
    let mut condition = 1.0f64;
    for &group in groups {
        let mut offsets = Vec::with_capacity(layers.len());
        let mut n = 0;
        for l in &layers {
            offsets.push(n);
            n += group_slots(l.phase(), group).len();
        }
        let mut rows = SparseRows::new(n);
        let mut rhs = Vec::new();
        let last = layers.len() - 1;
        let radiation = |rows: &mut SparseRows, rhs: &mut Vec<Complex64>, t: usize, banned: Direction| {
            for (s, &(dir, _)) in group_slots(layers[t].phase(), group).iter().enumerate() {
                if dir == banned {
                    rows.push_row(vec![(offsets[t] + s, ONE)]);
                    rhs.push(ZERO);
                }
            }
        };
        radiation(&mut rows, &mut rhs, 0, Direction::Down);
        for (l, &d) in interfaces.iter().enumerate() {
            let (a, b) = (&layers[l], &layers[l + 1]);
            let mandated = mandated_conditions(a.phase(), b.phase())?;
            let wanted: Vec<usize> = mandated
                .iter()
                .copied()
                .filter(|c| group.conditions().contains(c))
                .collect();
            // Columns: scalars produced by each unit unknown on either side.
            let mut columns: Vec<(usize, TractionScalars, f64)> = Vec::new();
            for (t, sgn) in [(l, 1.0), (l + 1, -1.0)] {
                let layer = &layers[t];
                for (s, &(dir, slot)) in group_slots(layer.phase(), group).iter().enumerate() {
                    let block = unit_block(layer.phase(), dir, slot);
                    let ts = evaluate_traction_scalars(&block, layer, omega, k_rho, d);
                    columns.push((offsets[t] + s, ts, sgn));
                }
            }
            let mut free = TractionScalars::zero();
            let mut free_sign = 0.0;
            if l == j || l + 1 == j {
                free = free_scalars(&layers[j], kind, omega, k_rho, d, z_src)
                    .ok_or(Error::BranchPoint { layer: j, k_rho })?;
                free_sign = if l == j { 1.0 } else { -1.0 };
            }
            for c in wanted {
                let row = columns
                    .iter()
                    .map(|(col, ts, sgn)| (*col, ts.get(c) * *sgn))
                    .filter(|(_, v)| *v != ZERO)
                    .collect();
                rows.push_row(row);
                rhs.push(-free.get(c) * free_sign);
            }
        }
        radiation(&mut rows, &mut rhs, last, Direction::Up);
        if rows.nrows() != n {
            return Err(Error::NonSquareSystem {
                rows: rows.nrows(),
                cols: n,
            });
        }
        if n == 0 {
            continue;
        }
        let lu = rows.factor().ok_or(Error::SingularSystem { k_rho })?;
        condition = condition.max(lu.condition());
        let x = lu.solve(&rhs);
        for (t, layer) in layers.iter().enumerate() {
            for (s, &(dir, slot)) in group_slots(layer.phase(), group).iter().enumerate() {
                set_slot(&mut coeffs[t], dir, slot, x[offsets[t] + s]);
            }
        }
    }
    // Radiation zeros are exact by construction, not just to solver accuracy.
    for (t, banned) in [(0, Direction::Down), (layers.len() - 1, Direction::Up)] {
        for slot in 0..5 {
            if layers[t].phase() != Phase::Vacuum {
                if layers[t].phase() == Phase::Fluid && slot > 1 {
                    break;
                }
                set_slot(&mut coeffs[t], banned, slot, ZERO);
            }
        }
    }
    Ok(ElasticSpectralSolution {
        omega,
        k_rho,
        z_src,
        source_layer: j,
        kind,
        condition,
        threshold: stack.degenerate_threshold(omega),
        layers,
        interfaces,
        coeffs,
    })
}

impl ElasticSpectralSolution {
    pub fn coefficients(&self) -> &[ElasticLayerCoefficients] {
        &self.coeffs
    }

    pub fn layer(&self, t: usize) -> &ElasticLayer {
        &self.layers[t]
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn interfaces(&self) -> &[f64] {
        &self.interfaces
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn degenerate_threshold(&self) -> f64 {
        self.threshold
    }

    /// Copy with every reaction coefficient multiplied by `1 + rel`.
    pub fn perturbed(&self, rel: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.coeffs {
            *c = c.map(|x| x * (1.0 + rel));
        }
        out
    }

    fn locate(&self, z: f64) -> Result<usize> {
        let tol = 1e-12 * self.interfaces.iter().fold(1.0f64, |a, d| a.max(d.abs()));
        for (index, &depth) in self.interfaces.iter().enumerate() {
            if (z - depth).abs() <= tol {
                return Err(Error::OnInterface { z, index, depth });
            }
        }
        Ok(self.interfaces.iter().take_while(|&&d| z < d).count())
    }

    /// Scalars of layer `t` (reaction plus free-space) continued to `z`.
    /// `None` for vacuum.
    pub fn scalars_in_layer(&self, t: usize, z: f64) -> Result<Option<TractionScalars>> {
        let layer = &self.layers[t];
        if layer.phase() == Phase::Vacuum {
            return Ok(None);
        }
        let mut ts = evaluate_traction_scalars(&self.coeffs[t], layer, self.omega, self.k_rho, z);
        if t == self.source_layer {
            if z == self.z_src {
                return Err(Error::CoincidentDepths { z });
            }
            let free = free_scalars(layer, self.kind, self.omega, self.k_rho, z, self.z_src)
                .ok_or(Error::BranchPoint { layer: t, k_rho: self.k_rho })?;
            for i in 0..10 {
                ts.t[i] += free.t[i];
                ts.scale[i] += free.scale[i];
            }
        }
        Ok(Some(ts))
    }

    /// Basis coefficients `c1..c5` of `Ĝ` at `z` in layer `t`, before
    /// `k_rho` weighting.
    fn raw_coefficients(&self, t: usize, z: f64) -> Result<[Complex64; 5]> {
        let layer = &self.layers[t];
        let k2 = self.k_rho * self.k_rho;
        let mut c = [ZERO; 5];
        let mut add_solid_part = |tau: f64, x: &[Complex64; 5], es: Complex64, ec: Complex64| {
            let iks = I * tau * layer.ksz;
            let ikc = I * tau * layer.kcz;
            let (s1, s3, s5) = (x[0] * es, x[2] * es, x[4] * es);
            let (c2, c4) = (x[1] * ec, x[3] * ec);
            c[0] += -iks * s1;
            c[1] += -k2 * s3 + ikc * c2;
            c[2] += -iks * s3 + c2;
            c[3] += s1 - k2 * s5 + ikc * c4;
            c[4] += -iks * s5 + c4;
        };
        let free_dir = if z > self.z_src { Direction::Up } else { Direction::Down };
        match (&self.coeffs[t], layer.params) {
            (ElasticLayerCoefficients::Solid { x }, _) => {
                for dir in Direction::BOTH {
                    let (es, ec) = layer.phases(dir, z);
                    add_solid_part(dir.tau(), &x[dir.index()], es, ec);
                }
                if t == self.source_layer {
                    if z == self.z_src {
                        return Err(Error::CoincidentDepths { z });
                    }
                    let f = free_solid(layer, self.omega, free_dir)
                        .ok_or(Error::BranchPoint { layer: t, k_rho: self.k_rho })?;
                    let tau = free_dir.tau();
                    let dz = z - self.z_src;
                    let es = (I * tau * layer.ksz * dz).exp();
                    let ec = (I * tau * layer.kcz * dz).exp();
                    add_solid_part(tau, &f.x, es, ec);
                }
            }
            (ElasticLayerCoefficients::Fluid { u, v }, _) => {
                let mut add_fluid_part = |tau: f64, u: Complex64, v: Complex64, ec: Complex64| {
                    let ikc = I * tau * layer.kcz;
                    c[1] += ikc * u * ec;
                    c[2] += u * ec;
                    c[3] += ikc * v * ec;
                    c[4] += v * ec;
                };
                for dir in Direction::BOTH {
                    let (_, ec) = layer.phases(dir, z);
                    add_fluid_part(dir.tau(), u[dir.index()], v[dir.index()], ec);
                }
                if t == self.source_layer {
                    if z == self.z_src {
                        return Err(Error::CoincidentDepths { z });
                    }
                    let g = free_fluid(layer, self.omega)
                        .ok_or(Error::BranchPoint { layer: t, k_rho: self.k_rho })?;
                    let tau = free_dir.tau();
                    let ec = (I * tau * layer.kcz * (z - self.z_src)).exp();
                    add_fluid_part(tau, g, ZERO, ec);
                }
            }
            (ElasticLayerCoefficients::Vacuum, _) => return Err(Error::TargetInVacuum { z }),
        }
        Ok(c)
    }
}

/// Displacement Green's function `Ĝ` at depth `z` for a tensor source.
pub fn assemble_g_elastic(sol: &ElasticSpectralSolution, z: f64) -> Result<ChannelTensor> {
    if sol.kind != SourceKind::Tensor {
        return Err(Error::PhaseMismatch {
            layer: sol.source_layer,
            detail: "tensor assembly of a vector-source solution".into(),
        });
    }
    let t = sol.locate(z)?;
    let c = sol.raw_coefficients(t, z)?;
    let k = sol.k_rho;
    let mut w = [ZERO; 9];
    w[0] = c[0];
    w[1] = c[1];
    w[2] = c[2] * k;
    w[3] = c[3] * k;
    w[4] = c[4] * k * k;
    Ok(ChannelTensor {
        k_rho: k,
        weighted: w,
    })
}

/// Displacement vector at depth `z` for a vector (fluid) source, on
/// `j2, j3, j7`.
pub fn assemble_u_elastic(sol: &ElasticSpectralSolution, z: f64) -> Result<ChannelVector> {
    if sol.kind != SourceKind::Vector {
        return Err(Error::PhaseMismatch {
            layer: sol.source_layer,
            detail: "vector assembly of a tensor-source solution".into(),
        });
    }
    let t = sol.locate(z)?;
    let c = sol.raw_coefficients(t, z)?;
    Ok(ChannelVector {
        k_rho: sol.k_rho,
        weighted: [c[1], c[2] * sol.k_rho, ZERO],
    })
}

/// Jumps of the mandated scalars at every interface.
pub fn elastic_interface_residuals(sol: &ElasticSpectralSolution) -> Result<Vec<InterfaceReport>> {
    const NAMES: [&str; 10] = ["T1", "T2", "T3", "T4", "T5", "T6", "T7", "T8", "T9", "T10"];
    let mut out = Vec::new();
    for (l, &d) in sol.interfaces.iter().enumerate() {
        let mandated =
            mandated_conditions(sol.layers[l].phase(), sol.layers[l + 1].phase())?;
        let above = sol.scalars_in_layer(l, d)?.unwrap_or_else(TractionScalars::zero);
        let below = sol.scalars_in_layer(l + 1, d)?.unwrap_or_else(TractionScalars::zero);
        // Conditions whose terms all vanish (e.g. shear scalars beyond a
        // fluid at normal incidence) are measured against the interface
        // scale instead of their own roundoff.
        let floor = 1e-4
            * mandated
                .iter()
                .map(|&c| above.scale[c - 1].max(below.scale[c - 1]))
                .fold(0.0, f64::max);
        let conditions = mandated
            .iter()
            .map(|&c| {
                let jump = (above.get(c) - below.get(c)).norm();
                let scale = above.scale[c - 1].max(below.scale[c - 1]).max(floor);
                ConditionResidual {
                    name: NAMES[c - 1],
                    residual: if scale == 0.0 { jump } else { jump / scale },
                }
            })
            .collect();
        out.push(InterfaceReport {
            index: l,
            depth: d,
            conditions,
        });
    }
    Ok(out)
}
