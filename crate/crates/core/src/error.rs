use thiserror::Error;

/// Errors raised by the synthesis, solver and observable layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum CloakError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("radius {0} lies in the singular region rho <= 1")]
    SingularRegion(f64),

    #[error("truncation radius {0} must satisfy 1 < R <= 2")]
    SingularTruncation(f64),

    #[error("cell with tangential mean {tangential} below radial mean {radial} cannot be layered")]
    AnisotropyOrientation { tangential: f64, radial: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("angular momentum {l} exceeds the supported maximum {max}")]
    Configuration { l: usize, max: usize },

    #[error("mollifier width {eta} is smaller than the grid step {step}")]
    Resolution { eta: f64, step: f64 },

    #[error("energy {energy} is a Dirichlet eigenvalue in channel l = {l} to working precision (boundary value {residual:e})")]
    NearEigenvalue { l: usize, energy: f64, residual: f64 },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T> = std::result::Result<T, CloakError>;
