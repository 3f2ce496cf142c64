//! Numerical thermodynamic formalism for non-invertible partially hyperbolic
//! torus maps.
//!
//! The crate estimates topological, unstable and stable pressure with
//! separated sets, splits orbit segments by the sign of the central
//! Lyapunov sums, glues good segments along unstable and center-stable
//! disks, and collects these checks into a fixed-scale certificate.

pub mod cocycle;
pub mod decomposition;
pub mod error;
pub mod inverse_limit;
pub mod linalg;
pub mod pressure;
pub mod specification;
pub mod systems;

pub use error::{Error, Result};
pub use systems::{SystemSpec, TorusPoint};
