//! Numerical laboratory for the Degasperis-Procesi equation: a periodic
//! pseudospectral solver for the non-local evolution form together with the
//! geometric structures its solutions carry (pseudospherical coframes,
//! metrics, curvature, characteristic flows, metric blow-up, second
//! fundamental forms) and the associated zero-curvature and pseudo-potential
//! algebra.

pub mod blowup;
pub mod characteristics;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod immersion;
pub mod integrability;
pub mod quad;
pub mod scenario;
pub mod solver;
pub mod spectral;

pub use error::{DpError, Result};
pub use grid::{Field, Grid};
pub use solver::{SolverConfig, SolverState, StopReason, TimeSeries};
