//! Radau IIA collocation applied directly to the index-2 system, with one
//! multiplier per stage and no projection. Used as the comparison baseline.

use nalgebra::{DMatrix, DVector};

use crate::dae::SemiExplicitDae;
use crate::error::StepError;
use crate::polybasis::legendre;
use crate::stepper::{solve_dense, step_count, NewtonReport, NewtonSettings};

/// Runge–Kutta coefficients `(A, b, c)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ButcherTableau {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

impl ButcherTableau {
    pub fn stages(&self) -> usize {
        self.c.len()
    }

    /// `b` equals the last row of `A` and `c_s = 1`.
    pub fn is_stiffly_accurate(&self) -> bool {
        let s = self.stages();
        self.c[s - 1] == 1.0 && self.a.row(s - 1).transpose() == self.b
    }
}

/// Right-Radau points: roots of `P_s(x) - P_{s-1}(x)` mapped to `(0, 1]`.
fn radau_points(s: usize) -> Vec<f64> {
    let mut c: Vec<f64> = (0..s)
        .map(|i| {
            // Chebyshev-like starting guesses, ascending in (0, 1].
            let mut x = -(std::f64::consts::PI * (2 * i + 1) as f64 / (2 * s) as f64).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(s, x);
                let (q, dq) = legendre(s - 1, x);
                let dx = (p - q) / (dp - dq);
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            0.5 * (x + 1.0)
        })
        .collect();
    c[s - 1] = 1.0;
    c
}

/// Radau IIA tableau with `s ∈ {2, 3}` stages; `A` solves the collocation
/// conditions `Σ_j a_ij c_j^(k-1) = c_i^k / k`, `k = 1..s`.
pub fn radau_tableau(s: usize) -> Result<ButcherTableau, StepError> {
    if !(2..=3).contains(&s) {
        return Err(StepError::InvalidStep(format!(
            "Radau IIA is provided with 2 or 3 stages, not {s}"
        )));
    }
    let c = radau_points(s);
    let vandermonde = DMatrix::from_fn(s, s, |k, j| c[j].powi(k as i32));
    let lu = vandermonde.lu();
    let mut a = DMatrix::zeros(s, s);
    for i in 0..s {
        let rhs = DVector::from_fn(s, |k, _| c[i].powi(k as i32 + 1) / (k as f64 + 1.0));
        let row = lu.solve(&rhs).expect("distinct collocation points");
        a.set_row(i, &row.transpose());
    }
    let b = a.row(s - 1).transpose();
    Ok(ButcherTableau {
        a,
        b,
        c: DVector::from_vec(c),
    })
}

/// Stage values and multipliers of one accepted Radau step.
#[derive(Clone, Debug)]
pub struct RadauStep {
    pub t_start: f64,
    pub dt: f64,
    pub stages: Vec<DVector<f64>>,
    pub multipliers: Vec<DVector<f64>>,
    pub newton: NewtonReport,
    /// `max_i ‖g(X_i, t_i)‖∞`.
    pub constraint_violation: f64,
}

impl RadauStep {
    /// `X_s`, the step's end value by stiff accuracy.
    pub fn end_state(&self) -> &DVector<f64> {
        self.stages.last().expect("at least one stage")
    }
}

struct StageSystem<'a> {
    dae: &'a SemiExplicitDae,
    tab: &'a ButcherTableau,
    dt: f64,
    times: Vec<f64>,
    x0: &'a DVector<f64>,
}

impl StageSystem<'_> {
    fn s(&self) -> usize {
        self.tab.stages()
    }

    fn split(&self, z: &DVector<f64>) -> (Vec<DVector<f64>>, Vec<DVector<f64>>) {
        let (s, n, m) = (self.s(), self.dae.n(), self.dae.m());
        let xs = (0..s).map(|i| z.rows(i * n, n).into_owned()).collect();
        let ls = (0..s).map(|i| z.rows(s * n + i * m, m).into_owned()).collect();
        (xs, ls)
    }

    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>, StepError> {
        let (s, n, m) = (self.s(), self.dae.n(), self.dae.m());
        let (xs, ls) = self.split(z);
        let mut slopes = Vec::with_capacity(s);
        for j in 0..s {
            let mut k = self.dae.f(&xs[j], self.times[j])?;
            if m > 0 {
                k -= self.dae.g_x(&xs[j], self.times[j])?.tr_mul(&ls[j]);
            }
            slopes.push(k);
        }
        let mut res = DVector::zeros(s * (n + m));
        for i in 0..s {
            let mut row = &xs[i] - self.x0;
            for (j, k) in slopes.iter().enumerate() {
                row.axpy(-self.dt * self.tab.a[(i, j)], k, 1.0);
            }
            res.rows_mut(i * n, n).copy_from(&row);
            if m > 0 {
                res.rows_mut(s * n + i * m, m)
                    .copy_from(&self.dae.g(&xs[i], self.times[i])?);
            }
        }
        Ok(res)
    }

    fn jacobian(&self, z: &DVector<f64>) -> Result<DMatrix<f64>, StepError> {
        let (s, n, m) = (self.s(), self.dae.n(), self.dae.m());
        let (xs, ls) = self.split(z);
        let size = s * (n + m);
        let mut jac = DMatrix::zeros(size, size);
        for j in 0..s {
            let tj = self.times[j];
            let mut dk = self.dae.f_x(&xs[j], tj)?;
            let gx = if m > 0 {
                dk -= self.dae.curvature(&xs[j], tj, &ls[j])?;
                Some(self.dae.g_x(&xs[j], tj)?)
            } else {
                None
            };
            for i in 0..s {
                let h = self.dt * self.tab.a[(i, j)];
                let mut block = &dk * (-h);
                if i == j {
                    for d in 0..n {
                        block[(d, d)] += 1.0;
                    }
                }
                jac.view_mut((i * n, j * n), (n, n)).copy_from(&block);
                if let Some(gx) = &gx {
                    jac.view_mut((i * n, s * n + j * m), (n, m))
                        .copy_from(&(gx.transpose() * h));
                }
            }
            if let Some(gx) = &gx {
                jac.view_mut((s * n + j * m, j * n), (m, n)).copy_from(gx);
            }
        }
        Ok(jac)
    }
}

/// One Radau IIA step from `x0` on `[t_start, t_start + dt]`.
pub fn radau_step(
    dae: &SemiExplicitDae,
    tab: &ButcherTableau,
    t_start: f64,
    dt: f64,
    x0: &DVector<f64>,
    previous: Option<&RadauStep>,
    settings: &NewtonSettings,
) -> Result<RadauStep, StepError> {
    settings.validate()?;
    if dae.mass().is_some() {
        return Err(StepError::InvalidStep(
            "the Radau baseline handles J = identity only".into(),
        ));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(StepError::InvalidStep(format!("step size {dt} must be positive")));
    }
    let sys = StageSystem {
        dae,
        tab,
        dt,
        times: tab.c.iter().map(|c| t_start + dt * c).collect(),
        x0,
    };
    let (s, n, m) = (sys.s(), dae.n(), dae.m());
    let mut z = DVector::zeros(s * (n + m));
    for i in 0..s {
        z.rows_mut(i * n, n).copy_from(x0);
    }
    if let Some(prev) = previous {
        for (i, l) in prev.multipliers.iter().enumerate().take(s) {
            z.rows_mut(s * n + i * m, m).copy_from(l);
        }
    }
    let mut res = sys.residual(&z)?;
    let mut norm = res.amax();
    let mut iterations = 0;
    while iterations == 0 || norm > settings.tol_residual {
        if iterations == settings.max_iter || !norm.is_finite() {
            return Err(StepError::NoConvergence {
                t_start,
                iterations,
                residual: norm,
            });
        }
        let dz = solve_dense(sys.jacobian(&z)?, &res, t_start)?;
        z -= dz;
        iterations += 1;
        res = sys.residual(&z)?;
        norm = res.amax();
    }
    let constraint_violation = if m > 0 {
        res.rows(s * n, s * m).amax()
    } else {
        0.0
    };
    let (stages, multipliers) = sys.split(&z);
    Ok(RadauStep {
        t_start,
        dt,
        stages,
        multipliers,
        newton: NewtonReport {
            iterations,
            final_residual_norm: norm,
            converged: true,
        },
        constraint_violation,
    })
}

/// Step-end states of a Radau IIA run.
#[derive(Clone, Debug)]
pub struct RadauTrajectory {
    pub tableau: ButcherTableau,
    pub dt: f64,
    /// `x(T_0), …, x(T_N)`.
    pub states: Vec<DVector<f64>>,
    pub steps: Vec<RadauStep>,
}

impl RadauTrajectory {
    pub fn final_state(&self) -> &DVector<f64> {
        self.states.last().expect("contains the initial state")
    }

    pub fn mean_newton_iterations(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        let total: usize = self.steps.iter().map(|s| s.newton.iterations).sum();
        total as f64 / self.steps.len() as f64
    }

    /// `Σ Δ Σ_j b_j Λ_j` over the steps inside `[a, b]`, the quadrature of
    /// the stage multipliers against the indicator of the window.
    pub fn multiplier_window(&self, a: f64, b: f64) -> DVector<f64> {
        let tol = 1e-9 * self.dt;
        let m = self
            .steps
            .first()
            .and_then(|s| s.multipliers.first())
            .map_or(0, |l| l.len());
        self.steps
            .iter()
            .filter(|s| s.t_start >= a - tol && s.t_start + s.dt <= b + tol)
            .fold(DVector::zeros(m), |acc, s| {
                s.multipliers
                    .iter()
                    .zip(self.tableau.b.iter())
                    .fold(acc, |acc, (l, w)| acc + l * (w * s.dt))
            })
    }

    pub fn max_constraint_violation(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.constraint_violation)
            .fold(0.0, f64::max)
    }
}

/// Integrates over `[0, T]` with `T/Δ` uniform Radau IIA steps.
pub fn radau_integrate(
    dae: &SemiExplicitDae,
    stages: usize,
    dt: f64,
    settings: &NewtonSettings,
) -> Result<RadauTrajectory, StepError> {
    let tab = radau_tableau(stages)?;
    let steps = step_count(dae.t_end(), dt)?;
    let mut traj = RadauTrajectory {
        tableau: tab.clone(),
        dt,
        states: vec![dae.x0().clone()],
        steps: Vec::with_capacity(steps),
    };
    for ell in 0..steps {
        let step = radau_step(
            dae,
            &tab,
            ell as f64 * dt,
            dt,
            traj.final_state(),
            traj.steps.last(),
            settings,
        )?;
        traj.states.push(step.end_state().clone());
        traj.steps.push(step);
    }
    Ok(traj)
}
