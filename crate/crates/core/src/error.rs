use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("k_rho = {k_rho:e} is at or below the degenerate threshold {threshold:e}")]
    DegenerateSpectralPoint { k_rho: f64, threshold: f64 },
    #[error("depth {z} lies on interface {index} at {depth}")]
    OnInterface { z: f64, index: usize, depth: f64 },
    #[error("vacuum has no wavenumber")]
    VacuumHasNoWavenumber,
    #[error("source and target depths coincide at z = {z}")]
    CoincidentDepths { z: f64 },
    #[error("interface system is singular at k_rho = {k_rho}")]
    SingularSystem { k_rho: f64 },
    #[error("vertical wavenumber vanishes in layer {layer} at k_rho = {k_rho}")]
    BranchPoint { layer: usize, k_rho: f64 },
    #[error("source kind does not match the phase of layer {layer}: {detail}")]
    PhaseMismatch { layer: usize, detail: String },
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid stack: {0}")]
    InvalidStack(String),
    #[error("target depth {z} lies in a vacuum layer")]
    TargetInVacuum { z: f64 },
    #[error("assembled system is {rows}x{cols}, expected square")]
    NonSquareSystem { rows: usize, cols: usize },
    #[error("quadrature did not converge: error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    NonConvergent { estimate: f64, tolerance: f64 },
    #[error("invalid quadrature settings: {0}")]
    InvalidQuadrature(String),
}
