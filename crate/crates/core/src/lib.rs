//! Regularized transformation-optics cloaks for the radial Helmholtz and
//! Schrödinger equations on the ball of radius 3.

pub mod error;
pub mod io;
pub mod radial;
pub mod scattering;
pub mod spectral;
pub mod synthesis;

pub use error::{CloakError, Result};
