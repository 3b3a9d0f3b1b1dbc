//! Built-in test problems: a linear circuit with known solution, two coupled
//! quasilinear heat equations with a thermal-resistance interface, and the
//! mathematical pendulum in first-order form.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::dae::{ReferenceSolution, SemiExplicitDae};
use crate::error::DaeError;

const CIRCUIT_FREQ: f64 = 100.0;

/// Reduced circuit with charges `(q1, q2)` and the source current `i_V` as
/// multiplier:
///
/// ```text
/// q̇1 = -sin(100t) - i_V
/// q̇2 = -q2 - sin(100t) - i_V
///  0 = q1 + q2 - sin(100t)
/// ```
pub fn make_circuit() -> SemiExplicitDae {
    let f = Arc::new(|x: &DVector<f64>, t: f64| {
        let s = (CIRCUIT_FREQ * t).sin();
        DVector::from_vec(vec![-s, -x[1] - s])
    });
    let g = Arc::new(|x: &DVector<f64>, t: f64| {
        DVector::from_vec(vec![x[0] + x[1] - (CIRCUIT_FREQ * t).sin()])
    });
    let g_x = Arc::new(|_: &DVector<f64>, _| DMatrix::from_row_slice(1, 2, &[1.0, 1.0]));
    let f_x = Arc::new(|_: &DVector<f64>, _| DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, -1.0]));
    SemiExplicitDae::new("circuit", DVector::zeros(2), 1.0, f, g, g_x)
        .expect("circuit definition is valid")
        .with_f_jacobian(f_x)
        .with_linearity(true, true)
        .with_reference(ReferenceSolution {
            state: Arc::new(|t| {
                let (q1, q2, _) = circuit_exact(t);
                DVector::from_vec(vec![q1, q2])
            }),
            multiplier: Some(Arc::new(|t| DVector::from_vec(vec![circuit_exact(t).2]))),
        })
}

/// Exact `(q1, q2, i_V)` of the circuit started from `q1 = q2 = 0`.
///
/// Eliminating `i_V` leaves `q̇2 = -q2/2 + 50 cos(100t)`, solved by
/// `q2 = A (cos(100t) - e^{-t/2}) + B sin(100t)`.
pub fn circuit_exact(t: f64) -> (f64, f64, f64) {
    let w = CIRCUIT_FREQ;
    // Coefficient matching: cos: wB + A/2 = w/2, sin: -wA + B/2 = 0.
    let det = 0.25 + w * w;
    let a = 0.25 * w / det;
    let b = 0.5 * w * w / det;
    let (s, c) = (w * t).sin_cos();
    let decay = (-0.5 * t).exp();
    let q2 = a * (c - decay) + b * s;
    let q2_dot = a * (-w * s + 0.5 * decay) + b * w * c;
    let q1 = s - q2;
    let i_v = -q2_dot - q2 - s;
    (q1, q2, i_v)
}

/// Two quasilinear heat equations on `(0,1)` and `(1,2)`, discretized by
/// finite differences, coupled at `z = 1` through a heat-transfer condition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeatConfig {
    pub c1: f64,
    pub c2: f64,
    /// Number of cells per subdomain, `1/h`.
    pub cells: usize,
    /// Heat-transfer coefficient at the interface.
    pub alpha: f64,
    pub t_end: f64,
}

impl Default for HeatConfig {
    fn default() -> Self {
        HeatConfig {
            c1: 1.0,
            c2: 1.0,
            cells: 40,
            alpha: 10.0,
            t_end: 0.5,
        }
    }
}

impl HeatConfig {
    pub fn with_exponents(c1: f64, c2: f64) -> Self {
        HeatConfig {
            c1,
            c2,
            ..Self::default()
        }
    }

    pub fn h(&self) -> f64 {
        1.0 / self.cells as f64
    }

    /// State dimension `2 (1/h + 1)`.
    pub fn n(&self) -> usize {
        2 * (self.cells + 1)
    }

    pub fn is_linear(&self) -> bool {
        self.c1 == 1.0 && self.c2 == 1.0
    }
}

/// `u^c`; integer exponents use repeated multiplication so negative
/// iterates stay well defined, other exponents give NaN for `u < 0`.
fn pow(u: f64, c: f64) -> f64 {
    if c.fract() == 0.0 && c.abs() <= 64.0 {
        u.powi(c as i32)
    } else {
        u.powf(c)
    }
}

/// `d/du u^c`.
fn dpow(u: f64, c: f64) -> f64 {
    if c == 0.0 {
        0.0
    } else {
        c * pow(u, c - 1.0)
    }
}

/// `d²/du² u^c`.
fn ddpow(u: f64, c: f64) -> f64 {
    if c == 0.0 || c == 1.0 {
        0.0
    } else {
        c * (c - 1.0) * pow(u, c - 2.0)
    }
}

/// Neumann stiffness matrix `K` applied to `v`.
fn stiffness_apply(v: &[f64], inv_h2: f64) -> Vec<f64> {
    let last = v.len() - 1;
    (0..=last)
        .map(|k| {
            let left = if k > 0 { v[k] - v[k - 1] } else { 0.0 };
            let right = if k < last { v[k] - v[k + 1] } else { 0.0 };
            (left + right) * inv_h2
        })
        .collect()
}

pub fn make_heat(cfg: HeatConfig) -> Result<SemiExplicitDae, DaeError> {
    if cfg.cells < 2 {
        return Err(DaeError::Invalid("heat grid needs at least two cells".into()));
    }
    if !(cfg.c1 >= 1.0 && cfg.c2 >= 1.0) {
        return Err(DaeError::Invalid(format!(
            "heat exponents must be at least 1, got ({}, {})",
            cfg.c1, cfg.c2
        )));
    }
    let nodes = cfg.cells + 1;
    let n = cfg.n();
    let h = cfg.h();
    let inv_h2 = 1.0 / (h * h);
    let (c1, c2, alpha) = (cfg.c1, cfg.c2, cfg.alpha);
    // Interface indices: last node of the left domain and first of the right.
    let il = nodes - 1;
    let ir = nodes;

    let f = Arc::new(move |x: &DVector<f64>, _t: f64| {
        let left: Vec<f64> = x.rows(0, nodes).iter().map(|&u| pow(u, c1)).collect();
        let right: Vec<f64> = x.rows(nodes, nodes).iter().map(|&u| pow(u, c2)).collect();
        let mut out = stiffness_apply(&left, inv_h2);
        out.extend(stiffness_apply(&right, inv_h2));
        -DVector::from_vec(out)
    });
    let f_x = Arc::new(move |x: &DVector<f64>, _t: f64| {
        let mut jac = DMatrix::zeros(n, n);
        for (offset, c) in [(0, c1), (nodes, c2)] {
            for k in 0..nodes {
                // Column k of K·diag(p'(u)), negated.
                let dp = dpow(x[offset + k], c) * inv_h2;
                if k > 0 {
                    jac[(offset + k - 1, offset + k)] += dp;
                    jac[(offset + k, offset + k)] -= dp;
                }
                if k + 1 < nodes {
                    jac[(offset + k + 1, offset + k)] += dp;
                    jac[(offset + k, offset + k)] -= dp;
                }
            }
        }
        jac
    });
    let g = Arc::new(move |x: &DVector<f64>, _t: f64| {
        DVector::from_vec(vec![
            x[0] - 1.0,
            (pow(x[il], c1) - pow(x[il - 1], c1)) / h + alpha * (x[il] - x[ir]),
            (pow(x[ir], c2) - pow(x[ir + 1], c2)) / h + alpha * (x[ir] - x[il]),
        ])
    });
    let g_x = Arc::new(move |x: &DVector<f64>, _t: f64| {
        let mut jac = DMatrix::zeros(3, n);
        jac[(0, 0)] = 1.0;
        jac[(1, il)] = dpow(x[il], c1) / h + alpha;
        jac[(1, il - 1)] = -dpow(x[il - 1], c1) / h;
        jac[(1, ir)] = -alpha;
        jac[(2, ir)] = dpow(x[ir], c2) / h + alpha;
        jac[(2, ir + 1)] = -dpow(x[ir + 1], c2) / h;
        jac[(2, il)] = -alpha;
        jac
    });
    let curvature = Arc::new(move |x: &DVector<f64>, _t: f64, l: &DVector<f64>| {
        let mut hess = DMatrix::zeros(n, n);
        hess[(il, il)] = l[1] * ddpow(x[il], c1) / h;
        hess[(il - 1, il - 1)] = -l[1] * ddpow(x[il - 1], c1) / h;
        hess[(ir, ir)] = l[2] * ddpow(x[ir], c2) / h;
        hess[(ir + 1, ir + 1)] = -l[2] * ddpow(x[ir + 1], c2) / h;
        hess
    });
    let x0 = DVector::from_fn(n, |k, _| {
        let z = k as f64 * h;
        if k < nodes && z < 0.25 {
            1.0 - 4.0 * z
        } else {
            0.0
        }
    });
    let linear = cfg.is_linear();
    Ok(SemiExplicitDae::new("heat", x0, cfg.t_end, f, g, g_x)?
        .with_f_jacobian(f_x)
        .with_curvature(curvature)
        .with_linearity(linear, linear))
}

/// Mathematical pendulum with state `(x1, x2, y1, y2)` (positions and
/// velocities).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumConfig {
    pub ell: f64,
    pub gamma: f64,
    pub x_init: [f64; 4],
    pub t_end: f64,
}

impl Default for PendulumConfig {
    fn default() -> Self {
        PendulumConfig {
            ell: 1.0,
            gamma: 1.0,
            x_init: [1.0, 0.0, 0.0, 0.0],
            t_end: 3.0,
        }
    }
}

/// `E = y1²/2 + y2²/2 + γ x2`.
pub fn pendulum_energy(x: &DVector<f64>, cfg: &PendulumConfig) -> f64 {
    0.5 * x[2] * x[2] + 0.5 * x[3] * x[3] + cfg.gamma * x[1]
}

/// `J ẋ = -∇E(x) - g_x(x)ᵀ λ`, `0 = x1² + x2² - ℓ²` with the canonical
/// skew-symmetric `J`.
pub fn make_pendulum(cfg: PendulumConfig) -> Result<SemiExplicitDae, DaeError> {
    let [x1, x2, y1, y2] = cfg.x_init;
    let scale = cfg.ell * cfg.ell;
    if !(cfg.ell > 0.0) {
        return Err(DaeError::Invalid("pendulum length must be positive".into()));
    }
    if (x1 * x1 + x2 * x2 - scale).abs() > 1e-12 * scale {
        return Err(DaeError::Invalid(
            "initial position is not on the circle of radius ℓ".into(),
        ));
    }
    if (x1 * y1 + x2 * y2).abs() > 1e-12 * (1.0 + scale) {
        return Err(DaeError::Invalid(
            "initial velocity is not tangential to the circle".into(),
        ));
    }
    let gamma = cfg.gamma;
    let ell = cfg.ell;
    let f = Arc::new(move |x: &DVector<f64>, _t: f64| {
        DVector::from_vec(vec![0.0, -gamma, -x[2], -x[3]])
    });
    let f_x = Arc::new(|_: &DVector<f64>, _t: f64| {
        let mut jac = DMatrix::zeros(4, 4);
        jac[(2, 2)] = -1.0;
        jac[(3, 3)] = -1.0;
        jac
    });
    let g = Arc::new(move |x: &DVector<f64>, _t: f64| {
        DVector::from_vec(vec![x[0] * x[0] + x[1] * x[1] - ell * ell])
    });
    let g_x = Arc::new(|x: &DVector<f64>, _t: f64| {
        DMatrix::from_row_slice(1, 4, &[2.0 * x[0], 2.0 * x[1], 0.0, 0.0])
    });
    let curvature = Arc::new(|_: &DVector<f64>, _t: f64, l: &DVector<f64>| {
        DMatrix::from_diagonal(&DVector::from_vec(vec![2.0 * l[0], 2.0 * l[0], 0.0, 0.0]))
    });
    #[rustfmt::skip]
    let mass = DMatrix::from_row_slice(4, 4, &[
         0.0,  0.0, 1.0, 0.0,
         0.0,  0.0, 0.0, 1.0,
        -1.0,  0.0, 0.0, 0.0,
         0.0, -1.0, 0.0, 0.0,
    ]);
    SemiExplicitDae::new(
        "pendulum",
        DVector::from_row_slice(&cfg.x_init),
        cfg.t_end,
        f,
        g,
        g_x,
    )?
    .with_f_jacobian(f_x)
    .with_curvature(curvature)
    .with_linearity(true, false)
    .with_mass(mass)
}
