//! Brute-force reference solvers.
//!
//! Nothing here uses the matrix basis. Each layer carries plane waves with
//! full vector amplitudes (one column per source orientation), and the
//! interface rows are the physical continuity conditions written entry by
//! entry: tangential `E` and `H` for Maxwell, displacement and traction for
//! elastic media.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::basis::{Mat3, SpectralPoint, Vec3};
use crate::stack::{vertical_wavenumber, LayerParams, LayerStack, Material, Phase, ProblemKind};
use crate::{Direction, Error, Result};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };
const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WaveKind {
    Em,
    Shear,
    Pressure,
}

/// One plane wave `amplitude · e^{τ i k_z (z - reference)}` in one layer.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleWave {
    pub layer: usize,
    pub kind: WaveKind,
    pub dir: Direction,
    pub kz: Complex64,
    pub reference: f64,
    /// Column `c` is the response to source orientation `c`.
    pub amplitude: Mat3,
    offset: usize,
}

impl OracleWave {
    /// Spectral gradient `(i kx, i ky, τ i kz)`.
    pub fn gradient(&self, point: &SpectralPoint) -> Vec3 {
        gradient(point, self.dir.tau(), self.kz)
    }

    fn phase(&self, z: f64) -> Complex64 {
        (I * self.dir.tau() * self.kz * (z - self.reference)).exp()
    }
}

fn gradient(point: &SpectralPoint, tau: f64, kz: Complex64) -> Vec3 {
    Vec3::new(I * point.kx, I * point.ky, I * tau * kz)
}

fn cross_matrix(n: &Vec3) -> Mat3 {
    Mat3::new(ZERO, -n[2], n[1], n[2], ZERO, -n[0], -n[1], n[0], ZERO)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleProblem {
    Maxwell,
    ElasticTensor,
    ElasticVector,
}

/// Full reaction field of every layer at one `(kx, ky)`.
#[derive(Clone, Debug)]
pub struct FullTensorSolution {
    pub problem: OracleProblem,
    pub point: SpectralPoint,
    pub omega: f64,
    pub z_src: f64,
    pub source_layer: usize,
    pub waves: Vec<OracleWave>,
    /// Ratio of extreme singular values of the row-equilibrated system.
    pub condition: f64,
    /// Largest row residual of the solved (possibly overdetermined) system.
    pub residual: f64,
    params: Vec<LayerParams>,
    interfaces: Vec<f64>,
    columns: usize,
}

/// A dense system of complex rows with several right-hand sides.
struct Rows {
    a: Vec<Vec<(usize, Complex64)>>,
    b: Vec<Vec<Complex64>>,
    n: usize,
    columns: usize,
}

impl Rows {
    fn push(&mut self, entries: Vec<(usize, Complex64)>, rhs: Vec<Complex64>) {
        // Constraint rows such as the third row of n×a vanish at k_rho = 0.
        if entries.iter().all(|(_, v)| *v == ZERO) && rhs.iter().all(|v| *v == ZERO) {
            return;
        }
        self.a.push(entries);
        self.b.push(rhs);
    }

    /// Least-squares solve after scaling each row to unit max entry.
    /// Returns the solution, the condition estimate and the worst scaled
    /// row residual.
    fn solve(self, k_rho: f64) -> Result<(DMatrix<Complex64>, f64, f64)> {
        let m = self.a.len();
        let mut a = DMatrix::<Complex64>::zeros(m, self.n);
        let mut b = DMatrix::<Complex64>::zeros(m, self.columns);
        for (i, (row, rhs)) in self.a.iter().zip(&self.b).enumerate() {
            let s = row.iter().fold(0.0f64, |acc, (_, v)| acc.max(v.norm()));
            if s == 0.0 {
                return Err(Error::SingularSystem { k_rho });
            }
            for &(c, v) in row {
                a[(i, c)] += v / s;
            }
            for (c, v) in rhs.iter().enumerate() {
                b[(i, c)] = v / s;
            }
        }
        let sv = a.singular_values();
        let smax = sv.max();
        let smin = sv.min();
        if smin <= smax * 1e-14 * (self.n as f64) {
            return Err(Error::SingularSystem { k_rho });
        }
        // Householder least squares with one refinement step; the complex SVD
        // solve loses digits on some inputs.
        let qr = a.clone().qr();
        let (q, rr) = (qr.q(), qr.r());
        let ls = |rhs: &DMatrix<Complex64>| {
            rr.solve_upper_triangular(&(q.adjoint() * rhs))
                .ok_or(Error::SingularSystem { k_rho })
        };
        let mut x = ls(&b)?;
        x -= ls(&(&a * &x - &b))?;
        let r = &a * &x - &b;
        let bnorm = b.iter().fold(0.0f64, |acc, v| acc.max(v.norm())).max(1e-300);
        let xnorm = x.iter().fold(0.0f64, |acc, v| acc.max(v.norm()));
        let residual = r.iter().fold(0.0f64, |acc, v| acc.max(v.norm())) / bnorm.max(xnorm);
        Ok((x, smax / smin, residual))
    }
}

fn layer_kz(params: &LayerParams, kind: WaveKind, k_rho: f64) -> Complex64 {
    match (params, kind) {
        (LayerParams::Em { k, .. }, WaveKind::Em) => vertical_wavenumber(*k, k_rho),
        (LayerParams::Solid { ks, .. }, WaveKind::Shear) => vertical_wavenumber(*ks, k_rho),
        (LayerParams::Solid { kc, .. }, WaveKind::Pressure)
        | (LayerParams::Fluid { kc, .. }, WaveKind::Pressure) => vertical_wavenumber(*kc, k_rho),
        _ => unreachable!("wave kind does not exist in this layer"),
    }
}

fn wave_kinds(params: &LayerParams) -> &'static [WaveKind] {
    match params {
        LayerParams::Em { .. } => &[WaveKind::Em],
        LayerParams::Solid { .. } => &[WaveKind::Shear, WaveKind::Pressure],
        LayerParams::Fluid { .. } => &[WaveKind::Pressure],
        LayerParams::Vacuum => &[],
    }
}

fn build_waves(stack: &LayerStack, params: &[LayerParams], k_rho: f64) -> Vec<OracleWave> {
    let d = stack.interfaces();
    let n = d.len();
    let mut waves = Vec::new();
    let mut offset = 0;
    for (t, p) in params.iter().enumerate() {
        for &kind in wave_kinds(p) {
            for dir in Direction::BOTH {
                // Up-going waves are referenced to the layer's lower bound,
                // down-going ones to its upper bound.
                let reference = if n == 0 {
                    0.0
                } else {
                    match dir {
                        Direction::Up => d[t.min(n - 1)],
                        Direction::Down => d[t.max(1) - 1],
                    }
                };
                waves.push(OracleWave {
                    layer: t,
                    kind,
                    dir,
                    kz: layer_kz(p, kind, k_rho),
                    reference,
                    amplitude: Mat3::zeros(),
                    offset,
                });
                offset += 3;
            }
        }
    }
    waves
}

fn check_branch(params: &[LayerParams], waves: &[OracleWave], k_rho: f64) -> Result<()> {
    for w in waves {
        let k = match (&params[w.layer], w.kind) {
            (LayerParams::Em { k, .. }, _) => *k,
            (LayerParams::Solid { ks, .. }, WaveKind::Shear) => *ks,
            (LayerParams::Solid { kc, .. }, _) | (LayerParams::Fluid { kc, .. }, _) => *kc,
            _ => ONE,
        };
        if w.kz.norm() <= 1e-10 * k.norm().max(1.0) {
            return Err(Error::BranchPoint {
                layer: w.layer,
                k_rho,
            });
        }
    }
    Ok(())
}

fn killed(w: &OracleWave, last: usize) -> bool {
    (w.layer == 0 && w.dir == Direction::Down) || (w.layer == last && w.dir == Direction::Up)
}

/// Rows expressing `Σ_above M·a·e - Σ_below M·a·e = rhs` for the linear maps
/// `M` returned by `op` (one 3-row block per wave, rows selected by `keep`).
fn push_jump_rows(
    rows: &mut Rows,
    waves: &[OracleWave],
    above: usize,
    depth: f64,
    keep: &[usize],
    op: impl Fn(&OracleWave) -> Mat3,
    free_jump: &Mat3,
) {
    for &r in keep {
        let mut entries = Vec::new();
        for w in waves.iter().filter(|w| w.layer == above || w.layer == above + 1) {
            let sign = if w.layer == above { 1.0 } else { -1.0 };
            let m = op(w) * (w.phase(depth) * sign);
            for c in 0..3 {
                if m[(r, c)] != ZERO {
                    entries.push((w.offset + c, m[(r, c)]));
                }
            }
        }
        let rhs = (0..rows.columns).map(|c| -free_jump[(r, c)]).collect();
        rows.push(entries, rhs);
    }
}

/// Full-tensor reference solution of the layered Maxwell problem, in terms of
/// the electric field tensor `Ĝ_E`.
pub fn oracle_em_full(
    stack: &LayerStack,
    omega: f64,
    point: &SpectralPoint,
    z_src: f64,
) -> Result<FullTensorSolution> {
    if stack.kind() != ProblemKind::Maxwell {
        return Err(Error::InvalidStack("expected a Maxwell stack".into()));
    }
    let j = stack.locate_layer(z_src)?;
    let params = stack.layer_params(omega);
    let k_rho = point.k_rho;
    let mut waves = build_waves(stack, &params, k_rho);
    check_branch(&params, &waves, k_rho)?;
    let last = params.len() - 1;
    let n = waves.len() * 3;
    let mut rows = Rows {
        a: Vec::new(),
        b: Vec::new(),
        n,
        columns: 3,
    };
    for w in &waves {
        if killed(w, last) {
            for c in 0..3 {
                rows.push(vec![(w.offset + c, ONE)], vec![ZERO; 3]);
            }
        } else {
            let g = w.gradient(point);
            rows.push((0..3).map(|c| (w.offset + c, g[c])).collect(), vec![ZERO; 3]);
        }
    }
    let mu = |t: usize| match params[t] {
        LayerParams::Em { mu, .. } => mu,
        _ => unreachable!(),
    };
    for (l, &d) in stack.interfaces().iter().enumerate() {
        let mut free_e = Mat3::zeros();
        let mut free_h = Mat3::zeros();
        if l == j || l + 1 == j {
            let sign = if l == j { 1.0 } else { -1.0 };
            let (e, h) = em_free_field(&params[j], point, d, z_src);
            free_e = e * Complex64::from(sign);
            free_h = h * Complex64::from(sign);
        }
        push_jump_rows(&mut rows, &waves, l, d, &[0, 1], |_| Mat3::identity(), &free_e);
        push_jump_rows(
            &mut rows,
            &waves,
            l,
            d,
            &[0, 1],
            |w| cross_matrix(&w.gradient(point)) / mu(w.layer),
            &free_h,
        );
    }
    let (x, condition, residual) = rows.solve(k_rho)?;
    for w in &mut waves {
        for r in 0..3 {
            for c in 0..3 {
                w.amplitude[(r, c)] = x[(w.offset + r, c)];
            }
        }
    }
    Ok(FullTensorSolution {
        problem: OracleProblem::Maxwell,
        point: *point,
        omega,
        z_src,
        source_layer: j,
        waves,
        condition,
        residual,
        params,
        interfaces: stack.interfaces().to_vec(),
        columns: 3,
    })
}

/// Free-space `(Ĝ_E, n×Ĝ_E/μ)` at `z` for a source at `z_src` in an EM layer.
fn em_free_field(params: &LayerParams, point: &SpectralPoint, z: f64, z_src: f64) -> (Mat3, Mat3) {
    let LayerParams::Em { mu, k, .. } = *params else {
        unreachable!()
    };
    let kz = vertical_wavenumber(k, point.k_rho);
    let tau = if z > z_src { 1.0 } else { -1.0 };
    let g = I * (I * kz * (z - z_src).abs()).exp() / (2.0 * kz);
    let n = gradient(point, tau, kz);
    let e = (Mat3::identity() + n * n.transpose() / (k * k)) * g;
    let h = cross_matrix(&n) * e / mu;
    (e, h)
}

/// Free-space displacement waves `(shear, pressure)` at `z`.
fn elastic_free_field(
    params: &LayerParams,
    point: &SpectralPoint,
    omega: f64,
    z: f64,
    z_src: f64,
    problem: OracleProblem,
) -> [(WaveKind, Complex64, f64, Mat3); 2] {
    let tau = if z > z_src { 1.0 } else { -1.0 };
    let dz = (z - z_src).abs();
    match (*params, problem) {
        (LayerParams::Solid { rho, ks, kc, .. }, OracleProblem::ElasticTensor) => {
            let ksz = vertical_wavenumber(ks, point.k_rho);
            let kcz = vertical_wavenumber(kc, point.k_rho);
            let gs = I * (I * ksz * dz).exp() / (2.0 * ksz);
            let gc = I * (I * kcz * dz).exp() / (2.0 * kcz);
            let ns = gradient(point, tau, ksz);
            let nc = gradient(point, tau, kcz);
            let w2r = omega * omega * rho;
            let shear = (Mat3::identity() * (ks * ks) + ns * ns.transpose()) * (gs / w2r);
            let pressure = nc * nc.transpose() * (-gc / w2r);
            [
                (WaveKind::Shear, ksz, tau, shear),
                (WaveKind::Pressure, kcz, tau, pressure),
            ]
        }
        (LayerParams::Fluid { rho, kc, .. }, OracleProblem::ElasticVector) => {
            let kcz = vertical_wavenumber(kc, point.k_rho);
            let gp = I * (I * kcz * dz).exp() / (2.0 * kcz);
            let nc = gradient(point, tau, kcz);
            let mut m = Mat3::zeros();
            m.set_column(0, &(nc * (gp / (omega * omega * rho))));
            [
                (WaveKind::Shear, ZERO, tau, Mat3::zeros()),
                (WaveKind::Pressure, kcz, tau, m),
            ]
        }
        _ => unreachable!("source phase checked by caller"),
    }
}

/// Traction `𝒯·e_z` of a plane wave with gradient `n`, as a map on amplitudes.
fn traction_map(params: &LayerParams, n: &Vec3) -> Mat3 {
    let (lambda, mu) = match *params {
        LayerParams::Solid { lambda, mu, .. } => (lambda, mu),
        LayerParams::Fluid { lambda, .. } => (lambda, ZERO),
        _ => unreachable!(),
    };
    // t_i = λ (n·a) δ_{i3} + μ (n_3 a_i + n_i a_3)
    let mut m = Mat3::zeros();
    for c in 0..3 {
        m[(2, c)] += n[c] * lambda;
    }
    for i in 0..3 {
        m[(i, i)] += n[2] * mu;
        m[(i, 2)] += n[i] * mu;
    }
    m
}

/// Full-tensor reference solution of the layered elastic problem.
pub fn oracle_elastic_full(
    stack: &LayerStack,
    omega: f64,
    point: &SpectralPoint,
    z_src: f64,
    vector_source: bool,
) -> Result<FullTensorSolution> {
    if stack.kind() != ProblemKind::Elastic {
        return Err(Error::InvalidStack("expected an elastic stack".into()));
    }
    let j = stack.locate_layer(z_src)?;
    let params = stack.layer_params(omega);
    let problem = if vector_source {
        OracleProblem::ElasticVector
    } else {
        OracleProblem::ElasticTensor
    };
    let source_phase = params[j].phase().expect("elastic layer");
    let expected = if vector_source { Phase::Fluid } else { Phase::Solid };
    if source_phase != expected {
        return Err(Error::PhaseMismatch {
            layer: j,
            detail: format!("source in a {source_phase:?} layer"),
        });
    }
    let k_rho = point.k_rho;
    let mut waves = build_waves(stack, &params, k_rho);
    check_branch(&params, &waves, k_rho)?;
    let columns = if vector_source { 1 } else { 3 };
    let last = params.len() - 1;
    let mut rows = Rows {
        a: Vec::new(),
        b: Vec::new(),
        n: waves.len() * 3,
        columns,
    };
    for w in &waves {
        if killed(w, last) {
            for c in 0..3 {
                rows.push(vec![(w.offset + c, ONE)], vec![ZERO; columns]);
            }
            continue;
        }
        let g = w.gradient(point);
        match w.kind {
            WaveKind::Shear => {
                rows.push((0..3).map(|c| (w.offset + c, g[c])).collect(), vec![ZERO; columns]);
            }
            _ => {
                let cm = cross_matrix(&g);
                for r in 0..3 {
                    let e = (0..3)
                        .filter(|&c| cm[(r, c)] != ZERO)
                        .map(|c| (w.offset + c, cm[(r, c)]))
                        .collect();
                    rows.push(e, vec![ZERO; columns]);
                }
            }
        }
    }
    for (l, &d) in stack.interfaces().iter().enumerate() {
        let (pa, pb) = (
            params[l].phase().expect("elastic"),
            params[l + 1].phase().expect("elastic"),
        );
        // (displacement rows, traction rows)
        let (disp, trac): (&[usize], &[usize]) = match (pa, pb) {
            (Phase::Solid, Phase::Solid) => (&[0, 1, 2], &[0, 1, 2]),
            (Phase::Solid, Phase::Fluid) | (Phase::Fluid, Phase::Solid) => (&[2], &[0, 1, 2]),
            (Phase::Fluid, Phase::Fluid) => (&[2], &[2]),
            (Phase::Solid, Phase::Vacuum) | (Phase::Vacuum, Phase::Solid) => (&[], &[0, 1, 2]),
            (Phase::Fluid, Phase::Vacuum) | (Phase::Vacuum, Phase::Fluid) => (&[], &[2]),
            (Phase::Vacuum, Phase::Vacuum) => {
                return Err(Error::InvalidStack("two adjacent vacuum layers".into()))
            }
        };
        let mut free_u = Mat3::zeros();
        let mut free_t = Mat3::zeros();
        if l == j || l + 1 == j {
            let sign = if l == j { 1.0 } else { -1.0 };
            for (_, kz, tau, amp) in elastic_free_field(&params[j], point, omega, d, z_src, problem) {
                if kz == ZERO {
                    continue;
                }
                free_u += amp * Complex64::from(sign);
                free_t += traction_map(&params[j], &gradient(point, tau, kz)) * amp * Complex64::from(sign);
            }
        }
        push_jump_rows(&mut rows, &waves, l, d, disp, |_| Mat3::identity(), &free_u);
        push_jump_rows(
            &mut rows,
            &waves,
            l,
            d,
            trac,
            |w| traction_map(&params[w.layer], &w.gradient(point)),
            &free_t,
        );
    }
    let (x, condition, residual) = rows.solve(k_rho)?;
    for w in &mut waves {
        for r in 0..3 {
            for c in 0..columns {
                w.amplitude[(r, c)] = x[(w.offset + r, c)];
            }
        }
    }
    Ok(FullTensorSolution {
        problem,
        point: *point,
        omega,
        z_src,
        source_layer: j,
        waves,
        condition,
        residual,
        params,
        interfaces: stack.interfaces().to_vec(),
        columns,
    })
}

impl FullTensorSolution {
    fn locate(&self, z: f64) -> Result<usize> {
        for (index, &depth) in self.interfaces.iter().enumerate() {
            if z == depth {
                return Err(Error::OnInterface { z, index, depth });
            }
        }
        Ok(self.interfaces.iter().take_while(|&&d| z < d).count())
    }

    /// Number of meaningful amplitude columns (3 for tensors, 1 for vectors).
    pub fn columns(&self) -> usize {
        self.columns
    }

    /// Total field (reaction plus free-space) at depth `z`: `Ĝ_E` for
    /// Maxwell, displacement `Ĝ` for elastic. Vector solutions occupy
    /// column 0.
    pub fn field(&self, z: f64) -> Result<Mat3> {
        let t = self.locate(z)?;
        if self.params[t] == LayerParams::Vacuum {
            return Err(Error::TargetInVacuum { z });
        }
        let mut m = Mat3::zeros();
        for w in self.waves.iter().filter(|w| w.layer == t) {
            m += w.amplitude * w.phase(z);
        }
        if t == self.source_layer {
            if z == self.z_src {
                return Err(Error::CoincidentDepths { z });
            }
            match self.problem {
                OracleProblem::Maxwell => m += em_free_field(&self.params[t], &self.point, z, self.z_src).0,
                _ => {
                    for (_, _, _, amp) in elastic_free_field(
                        &self.params[t],
                        &self.point,
                        self.omega,
                        z,
                        self.z_src,
                        self.problem,
                    ) {
                        m += amp;
                    }
                }
            }
        }
        Ok(m)
    }

    /// Magnetic tensor `Ĝ_H = -(1/(iωμ)) n×Ĝ_E` at `z` (Maxwell only).
    pub fn magnetic_field(&self, z: f64) -> Result<Mat3> {
        assert_eq!(self.problem, OracleProblem::Maxwell);
        let t = self.locate(z)?;
        let LayerParams::Em { mu, .. } = self.params[t] else {
            unreachable!()
        };
        let mut h = Mat3::zeros();
        for w in self.waves.iter().filter(|w| w.layer == t) {
            h += cross_matrix(&w.gradient(&self.point)) * w.amplitude * w.phase(z);
        }
        if t == self.source_layer {
            if z == self.z_src {
                return Err(Error::CoincidentDepths { z });
            }
            h += em_free_field(&self.params[t], &self.point, z, self.z_src).1 * mu;
        }
        Ok(h * (-1.0 / (I * self.omega * mu)))
    }

    /// Largest reaction amplitude; the scale against which solver roundoff
    /// is measured.
    pub fn amplitude_scale(&self) -> f64 {
        self.waves.iter().fold(0.0, |m, w| m.max(w.amplitude.norm()))
    }

    /// Reaction amplitude of one wave, or `None` if the layer has no such
    /// wave.
    pub fn amplitude(&self, layer: usize, kind: WaveKind, dir: Direction) -> Option<&Mat3> {
        self.waves
            .iter()
            .find(|w| w.layer == layer && w.kind == kind && w.dir == dir)
            .map(|w| &w.amplitude)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HalfspaceMode {
    /// Continuity of `b` and `(1/μ)∂_z b`.
    Te,
    /// Continuity of `b` and `(1/ε)∂_z b`.
    Tm,
    /// Continuity of `p` and `(1/ρ)∂_z p`.
    Acoustic,
}

/// Reflection coefficient of a wave incident from the upper of two
/// half-spaces, from the direct 2x2 continuity solve. Lossless materials.
pub fn oracle_halfspace_reflection(
    mode: HalfspaceMode,
    materials: [Material; 2],
    omega: f64,
    k_rho: f64,
) -> Result<Complex64> {
    let mut kz = [ZERO; 2];
    let mut m = [0.0; 2];
    for (i, mat) in materials.iter().enumerate() {
        mat.validate()?;
        let (k, weight) = match (mode, *mat) {
            (HalfspaceMode::Te, Material::Em { eps, mu }) => ((eps * mu).sqrt() * omega, mu),
            (HalfspaceMode::Tm, Material::Em { eps, mu }) => ((eps * mu).sqrt() * omega, eps),
            (HalfspaceMode::Acoustic, Material::Elastic { rho, lambda, mu: 0.0 }) => {
                ((rho / lambda).sqrt() * omega, rho)
            }
            _ => {
                return Err(Error::InvalidMaterial(format!(
                    "{mode:?} reflection needs matching materials"
                )))
            }
        };
        kz[i] = vertical_wavenumber(Complex64::new(k, 0.0), k_rho);
        m[i] = weight;
    }
    // Unknowns (R, T) at the interface: incident e^{-i kz0 z}, reflected
    // R e^{i kz0 z}, transmitted T e^{-i kz1 z}.
    //   1 + R = T
    //   (i kz0/m0)(R - 1) = -(i kz1/m1) T
    let a = [[ONE, -ONE], [I * kz[0] / m[0], I * kz[1] / m[1]]];
    let b = [-ONE, I * kz[0] / m[0]];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    if det.norm() == 0.0 {
        return Err(Error::SingularSystem { k_rho });
    }
    Ok((b[0] * a[1][1] - a[0][1] * b[1]) / det)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_halfspaces_do_not_reflect() {
        let m = Material::em(2.0, 1.5).unwrap();
        let r = oracle_halfspace_reflection(HalfspaceMode::Te, [m, m], 1.0, 0.4).unwrap();
        assert!(r.norm() < 1e-15);
    }

    #[test]
    fn rigid_limit_reflects_fully() {
        let a = Material::fluid(1.0, 1.0).unwrap();
        let b = Material::fluid(1e9, 1e9).unwrap();
        let r = oracle_halfspace_reflection(HalfspaceMode::Acoustic, [a, b], 1.0, 0.3).unwrap();
        assert!((r.norm() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn cross_matrix_is_cross_product() {
        let n = Vec3::new(ONE, I, ONE * 2.0);
        let a = Vec3::new(I * 3.0, ONE, -ONE);
        assert!((cross_matrix(&n) * a - n.cross(&a)).norm() < 1e-15);
    }
}
