//! Semi-explicit DAEs `J ẋ = f(x,t) - g_x(x,t)ᵀ λ`, `0 = g(x,t)`.
//!
//! `J` is the identity for the index-2 Hessenberg class; a constant
//! skew-symmetric `J` covers first-order formulations of constrained
//! mechanical systems.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::DaeError;

pub type VectorFn = Arc<dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync>;
pub type MatrixFn = Arc<dyn Fn(&DVector<f64>, f64) -> DMatrix<f64> + Send + Sync>;
/// `(x, t, λ) ↦ ∂/∂x [g_x(x,t)ᵀ λ]`, the multiplier-weighted constraint Hessian.
pub type CurvatureFn =
    Arc<dyn Fn(&DVector<f64>, f64, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type TimeFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// Rows of `g_x(x0, 0)` count towards the rank when their singular value
/// exceeds this fraction of the largest one.
const RANK_RTOL: f64 = 1e-10;

/// Initial data with `‖g(x0, 0)‖₂` at or below this is called consistent.
pub const CONSISTENCY_TOL: f64 = 1e-10;

/// Exact solution, when known.
#[derive(Clone)]
pub struct ReferenceSolution {
    pub state: TimeFn,
    pub multiplier: Option<TimeFn>,
}

#[derive(Clone)]
pub struct SemiExplicitDae {
    name: String,
    n: usize,
    m: usize,
    f: VectorFn,
    f_x: Option<MatrixFn>,
    g: VectorFn,
    g_x: MatrixFn,
    curvature: Option<CurvatureFn>,
    mass: Option<DMatrix<f64>>,
    x0: DVector<f64>,
    t_end: f64,
    reference: Option<ReferenceSolution>,
    f_linear: bool,
    g_linear: bool,
}

impl fmt::Debug for SemiExplicitDae {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SemiExplicitDae")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("m", &self.m)
            .field("t_end", &self.t_end)
            .field("has_mass", &self.mass.is_some())
            .field("f_linear", &self.f_linear)
            .field("g_linear", &self.g_linear)
            .finish_non_exhaustive()
    }
}

impl SemiExplicitDae {
    /// Creates a problem on `[0, t_end]`. The state dimension is taken from
    /// `x0` and the constraint dimension from `g(x0, 0)`.
    pub fn new(
        name: impl Into<String>,
        x0: DVector<f64>,
        t_end: f64,
        f: VectorFn,
        g: VectorFn,
        g_x: MatrixFn,
    ) -> Result<Self, DaeError> {
        let n = x0.len();
        if n == 0 {
            return Err(DaeError::Invalid("state dimension must be positive".into()));
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(DaeError::Invalid(format!("end time {t_end} must be positive")));
        }
        let m = g(&x0, 0.0).len();
        if m >= n {
            return Err(DaeError::Invalid(format!(
                "constraint dimension {m} must be smaller than state dimension {n}"
            )));
        }
        let fx0 = f(&x0, 0.0);
        if fx0.len() != n {
            return Err(DaeError::DimensionMismatch {
                what: "f",
                expected: n,
                got: fx0.len(),
            });
        }
        let gx0 = g_x(&x0, 0.0);
        if gx0.shape() != (m, n) {
            return Err(DaeError::Invalid(format!(
                "g_x has shape {:?}, expected ({m}, {n})",
                gx0.shape()
            )));
        }
        Ok(SemiExplicitDae {
            name: name.into(),
            n,
            m,
            f,
            f_x: None,
            g,
            g_x,
            curvature: None,
            mass: None,
            x0,
            t_end,
            reference: None,
            f_linear: false,
            g_linear: false,
        })
    }

    /// An unconstrained ODE `ẋ = f(x,t)`.
    pub fn ode(
        name: impl Into<String>,
        x0: DVector<f64>,
        t_end: f64,
        f: VectorFn,
    ) -> Result<Self, DaeError> {
        let n = x0.len();
        Self::new(
            name,
            x0,
            t_end,
            f,
            Arc::new(|_, _| DVector::zeros(0)),
            Arc::new(move |_, _| DMatrix::zeros(0, n)),
        )
        .map(|dae| dae.with_linearity(false, true))
    }

    pub fn with_f_jacobian(mut self, f_x: MatrixFn) -> Self {
        self.f_x = Some(f_x);
        self
    }

    pub fn with_curvature(mut self, curvature: CurvatureFn) -> Self {
        self.curvature = Some(curvature);
        self
    }

    /// Sets a constant mass matrix `J`; anything but the identity must be
    /// skew-symmetric.
    pub fn with_mass(mut self, mass: DMatrix<f64>) -> Result<Self, DaeError> {
        if mass.shape() != (self.n, self.n) {
            return Err(DaeError::DimensionMismatch {
                what: "mass matrix",
                expected: self.n,
                got: mass.nrows(),
            });
        }
        if mass == DMatrix::identity(self.n, self.n) {
            self.mass = None;
            return Ok(self);
        }
        if (&mass + mass.transpose()).amax() > 0.0 {
            return Err(DaeError::MassNotSkew);
        }
        self.mass = Some(mass);
        Ok(self)
    }

    /// Moves the end of the time horizon.
    pub fn with_t_end(mut self, t_end: f64) -> Result<Self, DaeError> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(DaeError::Invalid(format!("end time {t_end} must be positive")));
        }
        self.t_end = t_end;
        Ok(self)
    }

    pub fn with_reference(mut self, reference: ReferenceSolution) -> Self {
        self.reference = Some(reference);
        self
    }

    pub fn with_linearity(mut self, f_linear: bool, g_linear: bool) -> Self {
        self.f_linear = f_linear;
        self.g_linear = g_linear;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn reference(&self) -> Option<&ReferenceSolution> {
        self.reference.as_ref()
    }

    pub fn mass(&self) -> Option<&DMatrix<f64>> {
        self.mass.as_ref()
    }

    pub fn f_linear(&self) -> bool {
        self.f_linear
    }

    pub fn g_linear(&self) -> bool {
        self.g_linear
    }

    pub fn has_analytic_f_jacobian(&self) -> bool {
        self.f_x.is_some()
    }

    pub fn f(&self, x: &DVector<f64>, t: f64) -> Result<DVector<f64>, DaeError> {
        finite((self.f)(x, t), "f", t)
    }

    pub fn g(&self, x: &DVector<f64>, t: f64) -> Result<DVector<f64>, DaeError> {
        finite((self.g)(x, t), "g", t)
    }

    pub fn g_x(&self, x: &DVector<f64>, t: f64) -> Result<DMatrix<f64>, DaeError> {
        finite((self.g_x)(x, t), "g_x", t)
    }

    /// `f_x(x, t)`, by central differences when no analytic Jacobian is set.
    pub fn f_x(&self, x: &DVector<f64>, t: f64) -> Result<DMatrix<f64>, DaeError> {
        match &self.f_x {
            Some(f_x) => finite(f_x(x, t), "f_x", t),
            None => fd_jacobian(|y| (self.f)(y, t), x).map_err(|_| DaeError::NonFinite {
                what: "f (finite differences)",
                t,
            }),
        }
    }

    /// `∂/∂x [g_x(x,t)ᵀ λ]`; zero for linear constraints, central differences
    /// of `x ↦ g_x(x,t)ᵀ λ` when no analytic form is set.
    pub fn curvature(
        &self,
        x: &DVector<f64>,
        t: f64,
        lambda: &DVector<f64>,
    ) -> Result<DMatrix<f64>, DaeError> {
        if self.g_linear || self.m == 0 {
            return Ok(DMatrix::zeros(self.n, self.n));
        }
        match &self.curvature {
            Some(c) => finite(c(x, t, lambda), "constraint curvature", t),
            None => fd_jacobian(|y| (self.g_x)(y, t).tr_mul(lambda), x).map_err(|_| {
                DaeError::NonFinite {
                    what: "g_x (finite differences)",
                    t,
                }
            }),
        }
    }

    /// `J v`.
    pub fn apply_mass(&self, v: &DVector<f64>) -> DVector<f64> {
        match &self.mass {
            Some(j) => j * v,
            None => v.clone(),
        }
    }

    /// `J`, materialized.
    pub fn mass_matrix(&self) -> DMatrix<f64> {
        self.mass
            .clone()
            .unwrap_or_else(|| DMatrix::identity(self.n, self.n))
    }
}

trait Entries {
    fn entries(&self) -> &[f64];
}

impl Entries for DVector<f64> {
    fn entries(&self) -> &[f64] {
        self.as_slice()
    }
}

impl Entries for DMatrix<f64> {
    fn entries(&self) -> &[f64] {
        self.as_slice()
    }
}

fn finite<T: Entries>(value: T, what: &'static str, t: f64) -> Result<T, DaeError> {
    if value.entries().iter().all(|v| v.is_finite()) {
        Ok(value)
    } else {
        Err(DaeError::NonFinite { what, t })
    }
}

/// Central-difference Jacobian of `h` at `x` with steps `√ε (1 + |x_i|)`.
pub fn fd_jacobian<H>(h: H, x: &DVector<f64>) -> Result<DMatrix<f64>, DaeError>
where
    H: Fn(&DVector<f64>) -> DVector<f64>,
{
    let h0 = h(x);
    let mut jac = DMatrix::zeros(h0.len(), x.len());
    let mut xp = x.clone();
    for i in 0..x.len() {
        let step = f64::EPSILON.sqrt() * (1.0 + x[i].abs());
        xp[i] = x[i] + step;
        let fwd = h(&xp);
        xp[i] = x[i] - step;
        let bwd = h(&xp);
        xp[i] = x[i];
        let col = (fwd - bwd) / (2.0 * step);
        if col.iter().any(|v| !v.is_finite()) {
            return Err(DaeError::NonFinite {
                what: "finite-difference Jacobian",
                t: f64::NAN,
            });
        }
        jac.set_column(i, &col);
    }
    Ok(jac)
}

/// Outcome of [`check_consistency`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConsistencyReport {
    /// `‖g(x0, 0)‖₂`.
    pub residual_norm: f64,
    pub consistent: bool,
    /// Numerical row rank of `g_x(x0, 0)`.
    pub rank: usize,
    pub rank_ok: bool,
}

/// Checks `g(x0, 0) = 0` and full row rank of `g_x(x0, 0)`. Reporting only.
pub fn check_consistency(dae: &SemiExplicitDae) -> ConsistencyReport {
    let x0 = dae.x0();
    let residual_norm = (dae.g)(x0, 0.0).norm();
    let rank = if dae.m() == 0 {
        0
    } else {
        let sv = (dae.g_x)(x0, 0.0).singular_values();
        let smax = sv.max();
        sv.iter()
            .filter(|&&s| smax > 0.0 && s > RANK_RTOL * smax)
            .count()
    };
    ConsistencyReport {
        residual_norm,
        consistent: residual_norm <= CONSISTENCY_TOL,
        rank,
        rank_ok: rank == dae.m(),
    }
}

/// Residual of the continuous equations at one time:
/// `(J ẋ - f(x,t) + g_x(x,t)ᵀ λ, g(x,t))`.
pub fn continuous_residual(
    dae: &SemiExplicitDae,
    x: &DVector<f64>,
    xdot: &DVector<f64>,
    lambda: &DVector<f64>,
    t: f64,
) -> Result<(DVector<f64>, DVector<f64>), DaeError> {
    for (what, len, expected) in [
        ("state", x.len(), dae.n()),
        ("state derivative", xdot.len(), dae.n()),
        ("multiplier", lambda.len(), dae.m()),
    ] {
        if len != expected {
            return Err(DaeError::DimensionMismatch {
                what,
                expected,
                got: len,
            });
        }
    }
    let dyn_res = dae.apply_mass(xdot) - dae.f(x, t)? + dae.g_x(x, t)?.tr_mul(lambda);
    Ok((dyn_res, dae.g(x, t)?))
}
