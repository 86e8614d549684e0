//! Layer geometry, materials, and wavenumbers.
//!
//! Layers are numbered from the top: layer 0 lies above `d0`, layer `t`
//! lies between `d_{t-1}` and `d_t`, and layer `L` lies below `d_{L-1}`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Direction, Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Material {
    Em { eps: f64, mu: f64 },
    Elastic { rho: f64, lambda: f64, mu: f64 },
    Vacuum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Solid,
    Fluid,
    Vacuum,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    Maxwell,
    Elastic,
}

impl Material {
    pub fn em(eps: f64, mu: f64) -> Result<Self> {
        let m = Material::Em { eps, mu };
        m.validate()?;
        Ok(m)
    }

    pub fn solid(rho: f64, lambda: f64, mu: f64) -> Result<Self> {
        if mu <= 0.0 {
            return Err(Error::InvalidMaterial(format!("solid needs mu > 0, got {mu}")));
        }
        let m = Material::Elastic { rho, lambda, mu };
        m.validate()?;
        Ok(m)
    }

    pub fn fluid(rho: f64, lambda: f64) -> Result<Self> {
        let m = Material::Elastic {
            rho,
            lambda,
            mu: 0.0,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Material::Em { eps, mu } => {
                if !(eps.is_finite() && mu.is_finite()) || eps == 0.0 || mu == 0.0 {
                    return Err(Error::InvalidMaterial(format!(
                        "EM material needs finite nonzero eps and mu, got eps={eps}, mu={mu}"
                    )));
                }
            }
            Material::Elastic { rho, lambda, mu } => {
                let finite = rho.is_finite() && lambda.is_finite() && mu.is_finite();
                if !finite || rho <= 0.0 || lambda <= 0.0 || mu < 0.0 {
                    return Err(Error::InvalidMaterial(format!(
                        "elastic material needs rho > 0, lambda > 0, mu >= 0, got rho={rho}, lambda={lambda}, mu={mu}"
                    )));
                }
            }
            Material::Vacuum => {}
        }
        Ok(())
    }

    /// Phase of an elastic material; `None` for EM.
    pub fn phase(&self) -> Option<Phase> {
        match *self {
            Material::Em { .. } => None,
            Material::Elastic { mu, .. } if mu > 0.0 => Some(Phase::Solid),
            Material::Elastic { .. } => Some(Phase::Fluid),
            Material::Vacuum => Some(Phase::Vacuum),
        }
    }
}

/// Wavenumbers of a single material.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Wavenumbers {
    Em { k: Complex64 },
    Solid { ks: Complex64, kc: Complex64 },
    Fluid { kc: Complex64 },
}

impl Wavenumbers {
    pub fn max_abs(&self) -> f64 {
        match *self {
            Wavenumbers::Em { k } => k.norm(),
            Wavenumbers::Solid { ks, kc } => ks.norm().max(kc.norm()),
            Wavenumbers::Fluid { kc } => kc.norm(),
        }
    }
}

pub fn wavenumbers(material: &Material, omega: f64) -> Result<Wavenumbers> {
    Ok(match resolve(material, omega, 0.0) {
        LayerParams::Em { k, .. } => Wavenumbers::Em { k },
        LayerParams::Solid { ks, kc, .. } => Wavenumbers::Solid { ks, kc },
        LayerParams::Fluid { kc, .. } => Wavenumbers::Fluid { kc },
        LayerParams::Vacuum => return Err(Error::VacuumHasNoWavenumber),
    })
}

/// `sqrt(k^2 - k_rho^2)` on the branch with `Re >= 0`, and `Im >= 0` when
/// the real part vanishes.
pub fn vertical_wavenumber(k: Complex64, k_rho: f64) -> Complex64 {
    let mut s = (k * k - k_rho * k_rho).sqrt();
    if s.re < 0.0 || (s.re == 0.0 && s.im < 0.0) {
        s = -s;
    }
    s
}

/// Material parameters after loss regularization, with derived wavenumbers.
///
/// Loss scales every wavenumber by `1 + i δ`. The moduli are adjusted to
/// keep `k^2 = ω^2 ε μ` (EM) and `k_s^2 = ω^2 ρ / μ`, `k_c^2 = ω^2 ρ / γ`
/// (elastic), so the layer equations stay exactly consistent.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LayerParams {
    Em {
        eps: Complex64,
        mu: Complex64,
        k: Complex64,
    },
    Solid {
        rho: f64,
        lambda: Complex64,
        mu: Complex64,
        gamma: Complex64,
        ks: Complex64,
        kc: Complex64,
    },
    Fluid {
        rho: f64,
        lambda: Complex64,
        kc: Complex64,
    },
    Vacuum,
}

impl LayerParams {
    pub fn phase(&self) -> Option<Phase> {
        match self {
            LayerParams::Em { .. } => None,
            LayerParams::Solid { .. } => Some(Phase::Solid),
            LayerParams::Fluid { .. } => Some(Phase::Fluid),
            LayerParams::Vacuum => Some(Phase::Vacuum),
        }
    }

    pub fn max_abs_k(&self) -> f64 {
        match *self {
            LayerParams::Em { k, .. } => k.norm(),
            LayerParams::Solid { ks, kc, .. } => ks.norm().max(kc.norm()),
            LayerParams::Fluid { kc, .. } => kc.norm(),
            LayerParams::Vacuum => 0.0,
        }
    }

    /// Every wavenumber of the layer (`k`, or `k_s` then `k_c`).
    pub fn wavenumbers(&self) -> Vec<Complex64> {
        match *self {
            LayerParams::Em { k, .. } => vec![k],
            LayerParams::Solid { ks, kc, .. } => vec![ks, kc],
            LayerParams::Fluid { kc, .. } => vec![kc],
            LayerParams::Vacuum => Vec::new(),
        }
    }
}

fn resolve(material: &Material, omega: f64, loss: f64) -> LayerParams {
    let f = Complex64::new(1.0, loss);
    let f2 = f * f;
    match *material {
        Material::Em { eps, mu } => {
            let k = Complex64::new(eps * mu, 0.0).sqrt() * omega * f;
            LayerParams::Em {
                eps: eps * f2,
                mu: Complex64::new(mu, 0.0),
                k,
            }
        }
        Material::Elastic { rho, lambda, mu } if mu > 0.0 => {
            let gamma = lambda + 2.0 * mu;
            LayerParams::Solid {
                rho,
                lambda: lambda / f2,
                mu: mu / f2,
                gamma: gamma / f2,
                ks: omega * (rho / mu).sqrt() * f,
                kc: omega * (rho / gamma).sqrt() * f,
            }
        }
        Material::Elastic { rho, lambda, .. } => LayerParams::Fluid {
            rho,
            lambda: lambda / f2,
            kc: omega * (rho / lambda).sqrt() * f,
        },
        Material::Vacuum => LayerParams::Vacuum,
    }
}

/// Vertical wavenumbers of one layer at a given `k_rho`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LayerWaves {
    Em {
        k: Complex64,
        kz: Complex64,
    },
    Solid {
        ks: Complex64,
        kc: Complex64,
        ksz: Complex64,
        kcz: Complex64,
    },
    Fluid {
        kc: Complex64,
        kcz: Complex64,
    },
    Vacuum,
}

/// Per-layer vertical wavenumbers at a fixed `k_rho`.
#[derive(Clone, Debug, PartialEq)]
pub struct VerticalWavenumbers {
    pub k_rho: f64,
    pub layers: Vec<LayerWaves>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerStack {
    interfaces: Vec<f64>,
    materials: Vec<Material>,
    kind: ProblemKind,
    loss: f64,
}

impl LayerStack {
    pub fn new(interfaces: Vec<f64>, materials: Vec<Material>) -> Result<Self> {
        if materials.len() != interfaces.len() + 1 {
            return Err(Error::InvalidStack(format!(
                "{} interfaces need {} materials, got {}",
                interfaces.len(),
                interfaces.len() + 1,
                materials.len()
            )));
        }
        if interfaces.iter().any(|d| !d.is_finite()) {
            return Err(Error::InvalidStack("interface depths must be finite".into()));
        }
        if interfaces.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidStack(
                "interface depths must be strictly decreasing".into(),
            ));
        }
        for m in &materials {
            m.validate()?;
        }
        let n_em = materials
            .iter()
            .filter(|m| matches!(m, Material::Em { .. }))
            .count();
        let kind = if n_em == materials.len() {
            ProblemKind::Maxwell
        } else if n_em == 0 {
            ProblemKind::Elastic
        } else {
            return Err(Error::InvalidStack(
                "cannot mix EM and elastic materials".into(),
            ));
        };
        if kind == ProblemKind::Elastic {
            let last = materials.len() - 1;
            for (t, m) in materials.iter().enumerate() {
                if *m == Material::Vacuum && t != 0 && t != last {
                    return Err(Error::InvalidStack(format!(
                        "vacuum allowed only as the top or bottom layer, found at layer {t}"
                    )));
                }
            }
            if materials.iter().all(|m| *m == Material::Vacuum) {
                return Err(Error::InvalidStack("stack has no material layer".into()));
            }
        }
        Ok(LayerStack {
            interfaces,
            materials,
            kind,
            loss: 0.0,
        })
    }

    /// Same stack with every wavenumber scaled by `1 + i loss`.
    pub fn with_loss(mut self, loss: f64) -> Result<Self> {
        if !(loss.is_finite() && loss >= 0.0) {
            return Err(Error::InvalidStack(format!("loss must be finite and >= 0, got {loss}")));
        }
        self.loss = loss;
        Ok(self)
    }

    pub fn interfaces(&self) -> &[f64] {
        &self.interfaces
    }

    pub fn materials(&self) -> &[Material] {
        &self.materials
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn loss(&self) -> f64 {
        self.loss
    }

    /// Number of interfaces `L`; there are `L + 1` layers.
    pub fn num_interfaces(&self) -> usize {
        self.interfaces.len()
    }

    pub fn num_layers(&self) -> usize {
        self.materials.len()
    }

    pub fn geometry_scale(&self) -> f64 {
        self.interfaces.iter().fold(1.0f64, |a, d| a.max(d.abs()))
    }

    pub fn interface_tolerance(&self) -> f64 {
        1e-12 * self.geometry_scale()
    }

    pub fn locate_layer(&self, z: f64) -> Result<usize> {
        let tol = self.interface_tolerance();
        for (index, &depth) in self.interfaces.iter().enumerate() {
            if (z - depth).abs() <= tol {
                return Err(Error::OnInterface { z, index, depth });
            }
        }
        Ok(self.interfaces.iter().take_while(|&&d| z < d).count())
    }

    pub fn layer_params(&self, omega: f64) -> Vec<LayerParams> {
        self.materials
            .iter()
            .map(|m| resolve(m, omega, self.loss))
            .collect()
    }

    /// Largest wavenumber magnitude over all layers.
    pub fn max_abs_k(&self, omega: f64) -> f64 {
        self.layer_params(omega)
            .iter()
            .fold(0.0, |a, p| a.max(p.max_abs_k()))
    }

    /// `1e-8 * max(1, max |k|)`.
    pub fn degenerate_threshold(&self, omega: f64) -> f64 {
        1e-8 * self.max_abs_k(omega).max(1.0)
    }

    pub fn vertical_wavenumbers(&self, omega: f64, k_rho: f64) -> VerticalWavenumbers {
        let layers = self
            .layer_params(omega)
            .iter()
            .map(|p| match *p {
                LayerParams::Em { k, .. } => LayerWaves::Em {
                    k,
                    kz: vertical_wavenumber(k, k_rho),
                },
                LayerParams::Solid { ks, kc, .. } => LayerWaves::Solid {
                    ks,
                    kc,
                    ksz: vertical_wavenumber(ks, k_rho),
                    kcz: vertical_wavenumber(kc, k_rho),
                },
                LayerParams::Fluid { kc, .. } => LayerWaves::Fluid {
                    kc,
                    kcz: vertical_wavenumber(kc, k_rho),
                },
                LayerParams::Vacuum => LayerWaves::Vacuum,
            })
            .collect();
        VerticalWavenumbers { k_rho, layers }
    }

    /// Depth at which the amplitude of a `dir`-going wave in layer `t` is
    /// referenced. Up-going waves are referenced at the bottom of the layer
    /// and down-going waves at the top, so `|e^{τ i k_z (z - ref)}| <= 1`
    /// throughout the layer whenever `Im k_z >= 0`.
    pub fn reference_depth(&self, t: usize, dir: Direction) -> f64 {
        let n = self.interfaces.len();
        if n == 0 {
            return 0.0;
        }
        match dir {
            Direction::Up => self.interfaces[t.min(n - 1)],
            Direction::Down => self.interfaces[t.max(1) - 1],
        }
    }
}
