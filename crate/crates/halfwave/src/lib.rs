//! Pseudospectral toolkit for the focusing L2-critical half-wave equation
//! i u_t = D u - |u|^2 u on a periodic 1D grid: ground-state and linearized
//! profile solves, multi-bubble initial data, split-step time evolution,
//! modulation tracking, and the diagnostic functionals that monitor
//! concentration dynamics.

pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod ground_state;
pub mod linearized;
pub mod minres;
pub mod profiles;
pub mod resample;
pub mod spectral;

pub use error::{HalfwaveError, Result};
pub use field::SpectralField;
pub use grid::Grid1D;
