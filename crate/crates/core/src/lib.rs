//! Continuous Galerkin time stepping for semi-explicit index-2 DAEs
//!
//! ```text
//! J ẋ = f(x, t) - g_x(x, t)ᵀ λ,   0 = g(x, t)
//! ```
//!
//! with Lagrange trial spaces of degree `r` per interval and discontinuous
//! test spaces of degree `r - 1`. A Radau IIA baseline, three benchmark
//! problems and a convergence-study driver are included.

pub mod dae;
pub mod error;
pub mod polybasis;
pub mod problems;
pub mod radau;
pub mod stepper;
pub mod study;

pub use dae::{ReferenceSolution, SemiExplicitDae};
pub use error::{BasisError, DaeError, StepError, StudyError};
pub use polybasis::{CgTableau, LagrangeGrid, PointFamily};
pub use stepper::{integrate, NewtonSettings, Predictor, Trajectory};
