//! Continuous Galerkin time stepping.
//!
//! On an interval `[t_s, t_s + Δ]` with nodes `t_j = t_s + Δ τ_j` the
//! unknowns are the state values `x_1..x_r` and the multiplier coefficients
//! `λ_1..λ_r`; `x_0` is inherited from the previous interval. They solve
//!
//! ```text
//! Σ_j J x_j D_ij - Δ Σ_j f(x_j, t_j) M̂_ij + g_x(x_i, t_i)ᵀ λ_i = 0,   i = 1..r
//! g(x_k, t_k) = 0,                                                 k = 1..r
//! ```
//!
//! The discrete multiplier is the functional `Λ = Σ_k λ_k δ_{t_k}`; it is
//! only ever observed through pairings `⟨Λ, v⟩ = Σ_k λ_k v(t_k)`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dae::{check_consistency, SemiExplicitDae};
use crate::error::StepError;
use crate::polybasis::{gauss_legendre, CgTableau, PointFamily};

/// Quadrature points used for `∫ λ_ref` over one interval.
const DUAL_QUADRATURE_POINTS: usize = 20;

/// Pivots below this multiple of `‖A‖∞` mark the Newton matrix singular.
const PIVOT_RTOL: f64 = 1e-14;

/// Reference coordinates this close to an interval end are treated as the end.
const NODE_SNAP: f64 = 1e-12;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Predictor {
    /// Start every unknown state from `x_0`.
    Constant,
    /// Extrapolate the previous interval's polynomial to the new nodes.
    #[default]
    Extrapolate,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonSettings {
    /// Tolerance on the ∞-norm of the raw residual.
    pub tol_residual: f64,
    pub max_iter: usize,
    pub predictor: Predictor,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol_residual: 1e-12,
            max_iter: 25,
            predictor: Predictor::Extrapolate,
        }
    }
}

impl NewtonSettings {
    pub fn validate(&self) -> Result<(), StepError> {
        if !(self.tol_residual > 0.0) {
            return Err(StepError::InvalidStep(format!(
                "Newton tolerance {} must be positive",
                self.tol_residual
            )));
        }
        if self.max_iter == 0 {
            return Err(StepError::InvalidStep(
                "Newton needs at least one iteration".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    pub final_residual_norm: f64,
    pub converged: bool,
}

/// Converged coefficients on one interval.
#[derive(Clone, Debug)]
pub struct IntervalSolution {
    pub t_start: f64,
    pub dt: f64,
    /// `x_0..x_r`, the state at the nodes.
    pub coeffs: Vec<DVector<f64>>,
    /// `λ_1..λ_r`.
    pub multipliers: Vec<DVector<f64>>,
    pub newton: NewtonReport,
    /// `max_k ‖g(x_k, t_k)‖∞` over `k = 1..r`.
    pub constraint_violation: f64,
}

impl IntervalSolution {
    pub fn t_end(&self) -> f64 {
        self.t_start + self.dt
    }

    pub fn end_state(&self) -> &DVector<f64> {
        self.coeffs.last().expect("interval has coefficients")
    }
}

/// The nonlinear system of one interval, with unknowns stacked as
/// `z = [x_1; …; x_r; λ_1; …; λ_r]`.
struct IntervalSystem<'a> {
    dae: &'a SemiExplicitDae,
    tableau: &'a CgTableau,
    dt: f64,
    times: Vec<f64>,
    x0: &'a DVector<f64>,
    f0: DVector<f64>,
}

impl<'a> IntervalSystem<'a> {
    fn new(
        dae: &'a SemiExplicitDae,
        tableau: &'a CgTableau,
        t_start: f64,
        dt: f64,
        x0: &'a DVector<f64>,
    ) -> Result<Self, StepError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(StepError::InvalidStep(format!("step size {dt} must be positive")));
        }
        if x0.len() != dae.n() || x0.iter().any(|v| !v.is_finite()) {
            return Err(StepError::InvalidStep(
                "start value must be finite with the problem's dimension".into(),
            ));
        }
        if !tableau.grid().is_right_anchored() {
            return Err(StepError::InvalidStep(
                "time stepping needs a grid whose last node is the interval end".into(),
            ));
        }
        let times = tableau
            .grid()
            .nodes()
            .iter()
            .map(|tau| t_start + dt * tau)
            .collect();
        let f0 = dae.f(x0, t_start)?;
        Ok(IntervalSystem {
            dae,
            tableau,
            dt,
            times,
            x0,
            f0,
        })
    }

    fn r(&self) -> usize {
        self.tableau.degree()
    }

    fn size(&self) -> usize {
        self.r() * (self.dae.n() + self.dae.m())
    }

    fn pack(&self, xs: &[DVector<f64>], ls: &[DVector<f64>]) -> Result<DVector<f64>, StepError> {
        let (r, n, m) = (self.r(), self.dae.n(), self.dae.m());
        if xs.len() != r || ls.len() != r {
            return Err(StepError::InvalidStep(format!(
                "expected {r} state and multiplier coefficients, got {} and {}",
                xs.len(),
                ls.len()
            )));
        }
        let mut z = DVector::zeros(self.size());
        for (i, x) in xs.iter().enumerate() {
            if x.len() != n {
                return Err(StepError::InvalidStep("state coefficient dimension".into()));
            }
            z.rows_mut(i * n, n).copy_from(x);
        }
        for (k, l) in ls.iter().enumerate() {
            if l.len() != m {
                return Err(StepError::InvalidStep("multiplier coefficient dimension".into()));
            }
            z.rows_mut(r * n + k * m, m).copy_from(l);
        }
        Ok(z)
    }

    fn state(&self, z: &DVector<f64>, i: usize) -> DVector<f64> {
        let n = self.dae.n();
        z.rows((i - 1) * n, n).into_owned()
    }

    fn multiplier(&self, z: &DVector<f64>, k: usize) -> DVector<f64> {
        let (n, m) = (self.dae.n(), self.dae.m());
        z.rows(self.r() * n + (k - 1) * m, m).into_owned()
    }

    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>, StepError> {
        let (r, n, m) = (self.r(), self.dae.n(), self.dae.m());
        let d = self.tableau.d();
        let mhat = self.tableau.mhat();
        let mut states = Vec::with_capacity(r + 1);
        let mut forces = Vec::with_capacity(r + 1);
        states.push(self.x0.clone());
        forces.push(self.f0.clone());
        for j in 1..=r {
            let xj = self.state(z, j);
            forces.push(self.dae.f(&xj, self.times[j])?);
            states.push(xj);
        }
        // Rows of D sum to zero, so Σ_j D_ij x_j = Σ_{j≥1} D_ij (x_j - x_0).
        // The increments avoid cancelling O(1) values down to O(Δ).
        let increments: Vec<DVector<f64>> = states[1..].iter().map(|x| x - self.x0).collect();
        let mut res = DVector::zeros(self.size());
        for i in 1..=r {
            let mut block = DVector::zeros(n);
            let mut force = DVector::zeros(n);
            for j in 0..=r {
                if j > 0 {
                    block.axpy(d[(i - 1, j)], &increments[j - 1], 1.0);
                }
                force.axpy(mhat[(i - 1, j)], &forces[j], 1.0);
            }
            let mut block = self.dae.apply_mass(&block);
            block.axpy(-self.dt, &force, 1.0);
            if m > 0 {
                let gx = self.dae.g_x(&states[i], self.times[i])?;
                block += gx.tr_mul(&self.multiplier(z, i));
                let g = self.dae.g(&states[i], self.times[i])?;
                res.rows_mut(r * n + (i - 1) * m, m).copy_from(&g);
            }
            res.rows_mut((i - 1) * n, n).copy_from(&block);
        }
        Ok(res)
    }

    fn newton_matrix(&self, z: &DVector<f64>) -> Result<DMatrix<f64>, StepError> {
        let (r, n, m) = (self.r(), self.dae.n(), self.dae.m());
        let dbar = self.tableau.dbar();
        let mbar = self.tableau.mbar_hat();
        let mass = self.dae.mass_matrix();
        let mut a = DMatrix::zeros(self.size(), self.size());
        for j in 1..=r {
            let xj = self.state(z, j);
            let tj = self.times[j];
            let fx = self.dae.f_x(&xj, tj)?;
            for i in 1..=r {
                let block = &mass * dbar[(i - 1, j - 1)] - &fx * (self.dt * mbar[(i - 1, j - 1)]);
                a.view_mut(((i - 1) * n, (j - 1) * n), (n, n))
                    .copy_from(&block);
            }
            if m > 0 {
                let lj = self.multiplier(z, j);
                let curvature = self.dae.curvature(&xj, tj, &lj)?;
                let mut diag = a.view_mut(((j - 1) * n, (j - 1) * n), (n, n));
                diag += curvature;
                let gx = self.dae.g_x(&xj, tj)?;
                a.view_mut(((j - 1) * n, r * n + (j - 1) * m), (n, m))
                    .copy_from(&gx.transpose());
                a.view_mut((r * n + (j - 1) * m, (j - 1) * n), (m, n))
                    .copy_from(&gx);
            }
        }
        Ok(a)
    }

    fn unpack(&self, z: &DVector<f64>) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let r = self.r();
        let mut xs = Vec::with_capacity(r + 1);
        xs.push(self.x0.clone());
        xs.extend((1..=r).map(|j| self.state(z, j)));
        let ls = (1..=r).map(|k| self.multiplier(z, k)).collect();
        (xs, ls)
    }

    fn constraint_violation(&self, res: &DVector<f64>) -> f64 {
        let rn = self.r() * self.dae.n();
        res.rows(rn, res.len() - rn).amax()
    }
}

/// Residual of the interval system at `x_1..x_r`, `λ_1..λ_r`.
pub fn assemble_residual(
    dae: &SemiExplicitDae,
    tableau: &CgTableau,
    t_start: f64,
    dt: f64,
    x0: &DVector<f64>,
    xs: &[DVector<f64>],
    ls: &[DVector<f64>],
) -> Result<DVector<f64>, StepError> {
    let sys = IntervalSystem::new(dae, tableau, t_start, dt, x0)?;
    let z = sys.pack(xs, ls)?;
    sys.residual(&z)
}

/// Jacobian of [`assemble_residual`] with respect to `(x_1..x_r, λ_1..λ_r)`:
///
/// ```text
/// [ D̄⊗J - Δ (M̄̂⊗I) blkdiag(f_x) + blkdiag(H_i)   blkdiag(g_x)ᵀ ]
/// [ blkdiag(g_x)                                 0             ]
/// ```
///
/// with `H_i = ∂/∂x [g_x(x_i,t_i)ᵀ λ_i]`, which vanishes for linear
/// constraints. The start value does not enter the Jacobian.
pub fn assemble_newton_matrix(
    dae: &SemiExplicitDae,
    tableau: &CgTableau,
    t_start: f64,
    dt: f64,
    x0: &DVector<f64>,
    xs: &[DVector<f64>],
    ls: &[DVector<f64>],
) -> Result<DMatrix<f64>, StepError> {
    let sys = IntervalSystem::new(dae, tableau, t_start, dt, x0)?;
    let z = sys.pack(xs, ls)?;
    sys.newton_matrix(&z)
}

/// Dense LU solve with row pivoting; rejects numerically singular matrices.
pub(crate) fn solve_dense(
    mut a: DMatrix<f64>,
    rhs: &DVector<f64>,
    t_start: f64,
) -> Result<DVector<f64>, StepError> {
    let singular = |pivot, norm| StepError::SingularNewtonMatrix {
        t_start,
        pivot,
        norm,
    };
    let norm = a
        .row_iter()
        .map(|row| row.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    // Row then column equilibration by powers of two. The multiplier
    // blocks scale very differently from the state blocks for small Δ.
    let row_scale = equilibrate(a.row_iter().map(|row| row.amax()));
    let row_scale = row_scale.ok_or_else(|| singular(0.0, norm))?;
    for (mut row, s) in a.row_iter_mut().zip(&row_scale) {
        row *= *s;
    }
    let col_scale = equilibrate(a.column_iter().map(|col| col.amax()));
    let col_scale = col_scale.ok_or_else(|| singular(0.0, norm))?;
    for (mut col, s) in a.column_iter_mut().zip(&col_scale) {
        col *= *s;
    }
    let lu = a.lu();
    let pivot = lu
        .u()
        .diagonal()
        .iter()
        .map(|p| p.abs())
        .fold(f64::INFINITY, f64::min);
    // The scaled matrix has entries of magnitude at most one.
    if !(pivot > PIVOT_RTOL * rhs.len() as f64) {
        return Err(singular(pivot, norm));
    }
    let scaled_rhs = rhs.component_mul(&DVector::from_vec(row_scale));
    let y = lu.solve(&scaled_rhs).ok_or_else(|| singular(pivot, norm))?;
    Ok(y.component_mul(&DVector::from_vec(col_scale)))
}

/// Power-of-two factors mapping each magnitude into `[1/2, 1)`; `None` if
/// any magnitude is zero.
fn equilibrate(magnitudes: impl Iterator<Item = f64>) -> Option<Vec<f64>> {
    magnitudes
        .map(|m| (m > 0.0 && m.is_finite()).then(|| 2f64.powi(-(m.log2().floor() as i32) - 1)))
        .collect()
}

fn initial_guess(
    sys: &IntervalSystem<'_>,
    previous: Option<&IntervalSolution>,
    settings: &NewtonSettings,
) -> DVector<f64> {
    let r = sys.r();
    let grid = sys.tableau.grid();
    let mut xs = vec![sys.x0.clone(); r];
    let mut ls = vec![DVector::zeros(sys.dae.m()); r];
    if let Some(prev) = previous {
        if settings.predictor == Predictor::Extrapolate && prev.coeffs.len() == r + 1 {
            let scale = sys.dt / prev.dt;
            for (j, x) in xs.iter_mut().enumerate() {
                let tau = 1.0 + scale * grid.nodes()[j + 1];
                *x = grid.interpolate(&prev.coeffs, tau);
            }
        }
        if prev.multipliers.len() == r {
            // Multiplier coefficients carry a factor Δ.
            let scale = sys.dt / prev.dt;
            ls = prev.multipliers.iter().map(|l| l * scale).collect();
        }
    }
    sys.pack(&xs, &ls).expect("guess has consistent dimensions")
}

/// Solves one interval by Newton's method.
pub fn newton_solve(
    dae: &SemiExplicitDae,
    tableau: &CgTableau,
    t_start: f64,
    dt: f64,
    x0: &DVector<f64>,
    previous: Option<&IntervalSolution>,
    settings: &NewtonSettings,
) -> Result<IntervalSolution, StepError> {
    settings.validate()?;
    let sys = IntervalSystem::new(dae, tableau, t_start, dt, x0)?;
    let mut z = initial_guess(&sys, previous, settings);
    let mut res = sys.residual(&z)?;
    let mut norm = res.amax();
    let mut iterations = 0;
    // Always take one step so an extrapolated guess is never accepted as is.
    while iterations == 0 || norm > settings.tol_residual {
        if iterations == settings.max_iter {
            return Err(StepError::NoConvergence {
                t_start,
                iterations,
                residual: norm,
            });
        }
        let a = sys.newton_matrix(&z)?;
        let dz = solve_dense(a, &res, t_start)?;
        z -= dz;
        iterations += 1;
        res = sys.residual(&z)?;
        norm = res.amax();
        if !norm.is_finite() {
            return Err(StepError::NoConvergence {
                t_start,
                iterations,
                residual: norm,
            });
        }
    }
    let (coeffs, multipliers) = sys.unpack(&z);
    Ok(IntervalSolution {
        t_start,
        dt,
        coeffs,
        multipliers,
        newton: NewtonReport {
            iterations,
            final_residual_norm: norm,
            converged: true,
        },
        constraint_violation: sys.constraint_violation(&res),
    })
}

/// Piecewise polynomial state and functional multiplier on `[0, T]`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    tableau: Arc<CgTableau>,
    dt: f64,
    t_end: f64,
    x0: DVector<f64>,
    intervals: Vec<IntervalSolution>,
}

impl Trajectory {
    pub fn tableau(&self) -> &CgTableau {
        &self.tableau
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn intervals(&self) -> &[IntervalSolution] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// `X(T)`, or `x0` for an empty trajectory.
    pub fn final_state(&self) -> &DVector<f64> {
        self.intervals
            .last()
            .map(IntervalSolution::end_state)
            .unwrap_or(&self.x0)
    }

    /// Evaluates `X(t)`; `t` lies in interval `ℓ` when `T_{ℓ-1} < t ≤ T_ℓ`.
    pub fn eval_state(&self, t: f64) -> Result<DVector<f64>, StepError> {
        let slack = 1e-12 * self.t_end;
        if !(t >= 0.0 && t <= self.t_end + slack) || self.intervals.is_empty() {
            return Err(StepError::InvalidStep(format!(
                "time {t} outside the integrated range [0, {}]",
                self.t_end
            )));
        }
        let last = self.intervals.len() - 1;
        let idx = ((t / self.dt).ceil() as usize).saturating_sub(1).min(last);
        let interval = &self.intervals[idx];
        let mut tau = ((t - interval.t_start) / interval.dt).clamp(0.0, 1.0);
        // snap rounding noise so interval ends return their coefficients exactly
        if tau < NODE_SNAP {
            tau = 0.0;
        } else if tau > 1.0 - NODE_SNAP {
            tau = 1.0;
        }
        Ok(self.tableau.grid().interpolate(&interval.coeffs, tau))
    }

    /// `⟨Λ, v⟩ = Σ_k λ_k v(t_k)` on interval `ℓ` (0-based).
    pub fn multiplier_action<V>(&self, interval: usize, v: V) -> DVector<f64>
    where
        V: Fn(f64) -> f64,
    {
        let iv = &self.intervals[interval];
        let nodes = self.tableau.grid().nodes();
        let m = iv.multipliers.first().map_or(0, |l| l.len());
        iv.multipliers
            .iter()
            .zip(&nodes[1..])
            .fold(DVector::zeros(m), |acc, (l, tau)| {
                acc + l * v(iv.t_start + iv.dt * tau)
            })
    }

    /// `‖∫_I λ_ref dt - ⟨Λ, 1_I⟩‖₂` on interval `ℓ` (0-based), the integral
    /// taken with a 20-point Gauss–Legendre rule.
    pub fn multiplier_dual_error<L>(&self, interval: usize, lambda_ref: L) -> f64
    where
        L: Fn(f64) -> DVector<f64>,
    {
        let iv = &self.intervals[interval];
        let (qx, qw) = gauss_legendre(DUAL_QUADRATURE_POINTS);
        let discrete = self.multiplier_action(interval, |_| 1.0);
        let exact = qx
            .iter()
            .zip(&qw)
            .fold(DVector::zeros(discrete.len()), |acc, (x, w)| {
                acc + lambda_ref(iv.t_start + iv.dt * x) * (w * iv.dt)
            });
        (exact - discrete).norm()
    }

    /// `⟨Λ, 1_{[a,b]}⟩` summed over all intervals inside `[a, b]`, where `a`
    /// and `b` are interval boundaries of this trajectory (up to rounding).
    pub fn multiplier_window(&self, a: f64, b: f64) -> DVector<f64> {
        let tol = 1e-9 * self.dt;
        let m = self
            .intervals
            .first()
            .and_then(|iv| iv.multipliers.first())
            .map_or(0, |l| l.len());
        self.intervals
            .iter()
            .enumerate()
            .filter(|(_, iv)| iv.t_start >= a - tol && iv.t_end() <= b + tol)
            .fold(DVector::zeros(m), |acc, (idx, _)| {
                acc + self.multiplier_action(idx, |_| 1.0)
            })
    }

    pub fn max_constraint_violation(&self) -> f64 {
        self.intervals
            .iter()
            .map(|iv| iv.constraint_violation)
            .fold(0.0, f64::max)
    }

    pub fn mean_newton_iterations(&self) -> f64 {
        if self.intervals.is_empty() {
            return 0.0;
        }
        let total: usize = self.intervals.iter().map(|iv| iv.newton.iterations).sum();
        total as f64 / self.intervals.len() as f64
    }

    pub fn max_newton_iterations(&self) -> usize {
        self.intervals
            .iter()
            .map(|iv| iv.newton.iterations)
            .max()
            .unwrap_or(0)
    }
}

/// A failed integration together with everything computed before the failure.
#[derive(Debug, Error)]
#[error("interval {interval}: {source}")]
pub struct IntegrateError {
    pub interval: usize,
    #[source]
    pub source: StepError,
    pub partial: Box<Trajectory>,
}

/// Number of uniform steps of size `dt` covering `[0, t_end]`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize, StepError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(StepError::InvalidStep(format!("step size {dt} must be positive")));
    }
    let ratio = t_end / dt;
    let steps = ratio.round();
    if steps < 1.0 || (ratio - steps).abs() > 1e-10 * steps {
        return Err(StepError::InvalidStep(format!(
            "step size {dt} does not divide the end time {t_end}"
        )));
    }
    Ok(steps as usize)
}

/// Integrates over `[0, T]` with `N = T/Δ` uniform cG steps of degree `r`.
pub fn integrate(
    dae: &SemiExplicitDae,
    family: PointFamily,
    r: usize,
    dt: f64,
    settings: &NewtonSettings,
) -> Result<Trajectory, StepError> {
    let tableau = Arc::new(CgTableau::for_family(family, r)?);
    integrate_with_tableau(dae, tableau, dt, settings).map_err(|e| e.source)
}

/// Like [`integrate`], with a prebuilt tableau and the partial trajectory
/// retained on failure.
pub fn integrate_with_tableau(
    dae: &SemiExplicitDae,
    tableau: Arc<CgTableau>,
    dt: f64,
    settings: &NewtonSettings,
) -> Result<Trajectory, IntegrateError> {
    let mut traj = Trajectory {
        tableau: Arc::clone(&tableau),
        dt,
        t_end: dae.t_end(),
        x0: dae.x0().clone(),
        intervals: Vec::new(),
    };
    let fail = |traj: Trajectory, interval, source| IntegrateError {
        interval,
        source,
        partial: Box::new(traj),
    };
    let steps = match step_count(dae.t_end(), dt).and_then(|s| settings.validate().map(|_| s)) {
        Ok(s) => s,
        Err(e) => return Err(fail(traj, 0, e)),
    };
    let report = check_consistency(dae);
    if !report.consistent {
        log::warn!(
            "{}: inconsistent initial data, ‖g(x0, 0)‖ = {:e}",
            dae.name(),
            report.residual_norm
        );
    }
    if !report.rank_ok {
        log::warn!("{}: g_x(x0, 0) is rank deficient", dae.name());
    }
    traj.intervals.reserve(steps);
    for ell in 0..steps {
        let t_start = ell as f64 * dt;
        let x_start = traj.final_state().clone();
        let solved = newton_solve(
            dae,
            &tableau,
            t_start,
            dt,
            &x_start,
            traj.intervals.last(),
            settings,
        );
        match solved {
            Ok(iv) => traj.intervals.push(iv),
            Err(e) => return Err(fail(traj, ell, e)),
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn decay() -> SemiExplicitDae {
        SemiExplicitDae::ode(
            "decay",
            DVector::from_vec(vec![1.0]),
            1.0,
            Arc::new(|x, _| -x),
        )
        .unwrap()
        .with_linearity(true, true)
    }

    fn tableau(r: usize) -> CgTableau {
        CgTableau::for_family(PointFamily::Equispaced, r).unwrap()
    }

    #[test]
    fn still_ode_has_zero_residual() {
        let dae = SemiExplicitDae::ode(
            "still",
            DVector::from_vec(vec![3.0]),
            1.0,
            Arc::new(|x, _| DVector::zeros(x.len())),
        )
        .unwrap();
        let x0 = DVector::from_vec(vec![3.0]);
        let res = assemble_residual(&dae, &tableau(1), 0.0, 0.1, &x0, &[x0.clone()], &[DVector::zeros(0)])
            .unwrap();
        assert_eq!(res, DVector::zeros(1));
    }

    #[test]
    fn unit_drift_residual() {
        let dae = SemiExplicitDae::ode(
            "drift",
            DVector::from_vec(vec![0.0]),
            1.0,
            Arc::new(|_, _| DVector::from_vec(vec![1.0])),
        )
        .unwrap();
        let x0 = DVector::from_vec(vec![0.25]);
        let x1 = DVector::from_vec(vec![0.9]);
        let dt = 0.2;
        let res = assemble_residual(&dae, &tableau(1), 0.0, dt, &x0, &[x1], &[DVector::zeros(0)])
            .unwrap();
        assert_abs_diff_eq!(res[0], 0.9 - 0.25 - dt, epsilon = 1e-15);
    }

    #[test]
    fn one_step_is_trapezoidal() {
        let dae = decay();
        let dt = 0.3;
        let iv = newton_solve(
            &dae,
            &tableau(1),
            0.0,
            dt,
            dae.x0(),
            None,
            &NewtonSettings::default(),
        )
        .unwrap();
        let expected = (1.0 - dt / 2.0) / (1.0 + dt / 2.0);
        assert_abs_diff_eq!(iv.end_state()[0], expected, epsilon = 1e-13);
        assert_eq!(iv.newton.iterations, 1);
    }

    #[test]
    fn constant_solution_reproduced() {
        let dae = SemiExplicitDae::ode(
            "still",
            DVector::from_vec(vec![1.5, -2.0]),
            1.0,
            Arc::new(|x, _| DVector::zeros(x.len())),
        )
        .unwrap();
        for r in 1..=5 {
            let traj = integrate(&dae, PointFamily::Equispaced, r, 0.125, &NewtonSettings::default())
                .unwrap();
            assert!((traj.final_state() - dae.x0()).amax() < 1e-12, "r={r} {:?}", traj.final_state());
        }
    }

    #[test]
    fn step_count_checks_divisibility() {
        assert_eq!(step_count(1.0, 0.05).unwrap(), 20);
        assert_eq!(step_count(3.0, 3.0 / 32.0).unwrap(), 32);
        assert!(step_count(1.0, 0.3).is_err());
        assert!(step_count(1.0, 0.0).is_err());
        assert!(step_count(1.0, -0.1).is_err());
    }

    #[test]
    fn eval_state_boundaries_and_range() {
        let dae = decay();
        let traj = integrate(&dae, PointFamily::Equispaced, 2, 0.25, &NewtonSettings::default())
            .unwrap();
        assert_eq!(traj.eval_state(0.0).unwrap(), *dae.x0());
        for iv in traj.intervals() {
            assert_eq!(traj.eval_state(iv.t_end()).unwrap(), *iv.end_state());
            assert_eq!(
                traj.eval_state(iv.t_start + 0.5 * iv.dt).unwrap(),
                iv.coeffs[1]
            );
        }
        assert!(traj.eval_state(-0.01).is_err());
        assert!(traj.eval_state(1.01).is_err());
    }

    #[test]
    fn invalid_settings_rejected() {
        let settings = NewtonSettings {
            tol_residual: 0.0,
            ..NewtonSettings::default()
        };
        assert!(settings.validate().is_err());
        let settings = NewtonSettings {
            max_iter: 0,
            ..NewtonSettings::default()
        };
        assert!(integrate(&decay(), PointFamily::Equispaced, 1, 0.1, &settings).is_err());
    }

    #[test]
    fn non_right_anchored_grid_rejected() {
        let grid = crate::polybasis::LagrangeGrid::from_nodes(&[0.0, 0.5, 0.9]).unwrap();
        let tab = CgTableau::new(&grid);
        let dae = decay();
        let res = newton_solve(&dae, &tab, 0.0, 0.1, dae.x0(), None, &NewtonSettings::default());
        assert!(matches!(res, Err(StepError::InvalidStep(_))));
    }
}
