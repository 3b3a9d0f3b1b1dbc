//! Lagrange point families on the reference interval `[0, 1]` and the
//! coupling matrices of the continuous Galerkin scheme.
//!
//! The state on one step is expanded in the degree-`r` Lagrange cardinal
//! functions `φ_0..φ_r` on nodes `τ_0 = 0 < … < τ_r = 1`. Test functions are
//! the degree-`(r-1)` cardinal functions `ψ_1..ψ_r` on the nodes `τ_1..τ_r`.
//! With this choice the coupling matrices
//!
//! ```text
//! D_ij = ∫ φ̇_j ψ_i dτ,    M̂_ij = ∫ φ_j ψ_i dτ,    i = 1..r, j = 0..r
//! ```
//!
//! are independent of the step size; the physical mass-type matrix is
//! `M = Δ·M̂`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::BasisError;

/// Largest supported polynomial degree.
pub const MAX_DEGREE: usize = 8;

/// Number of equispaced samples used for the Lebesgue constants.
const LEBESGUE_SAMPLES: usize = 2001;

/// Eigenvalues of the symmetric part of `D̄` below this are counted as zero.
const INERTIA_ZERO_TOL: f64 = 1e-10;

/// Node distribution used on each step interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PointFamily {
    Equispaced,
    GaussLobatto,
    ChebyshevLobatto,
    /// User-supplied nodes, see [`LagrangeGrid::from_nodes`].
    Custom,
}

impl PointFamily {
    pub const BUILTIN: [PointFamily; 3] = [
        PointFamily::Equispaced,
        PointFamily::GaussLobatto,
        PointFamily::ChebyshevLobatto,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PointFamily::Equispaced => "equispaced",
            PointFamily::GaussLobatto => "gauss-lobatto",
            PointFamily::ChebyshevLobatto => "chebyshev-lobatto",
            PointFamily::Custom => "custom",
        }
    }
}

impl fmt::Display for PointFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PointFamily {
    type Err = BasisError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "equispaced" | "equidistant" => Ok(PointFamily::Equispaced),
            "gauss-lobatto" | "gauss_lobatto" => Ok(PointFamily::GaussLobatto),
            "chebyshev-lobatto" | "chebyshev_lobatto" => Ok(PointFamily::ChebyshevLobatto),
            other => Err(BasisError::UnknownFamily(other.to_string())),
        }
    }
}

/// Lagrange nodes `τ_0..τ_r` on `[0, 1]` together with the barycentric
/// weights of the state basis (all nodes) and the test basis (`τ_1..τ_r`).
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangeGrid {
    family: PointFamily,
    nodes: Vec<f64>,
    state_weights: Vec<f64>,
    test_weights: Vec<f64>,
}

impl LagrangeGrid {
    /// Builds the degree-`r` grid of a built-in family.
    pub fn new(family: PointFamily, r: usize) -> Result<Self, BasisError> {
        check_degree(r)?;
        let nodes = match family {
            PointFamily::Equispaced => (0..=r).map(|j| j as f64 / r as f64).collect(),
            PointFamily::GaussLobatto => gauss_lobatto_nodes(r),
            PointFamily::ChebyshevLobatto => (0..=r)
                .map(|j| 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / r as f64).cos()))
                .collect(),
            PointFamily::Custom => {
                return Err(BasisError::InvalidNodes(
                    "custom grids are built with LagrangeGrid::from_nodes".into(),
                ))
            }
        };
        Ok(Self::with_nodes(family, nodes))
    }

    /// Builds a grid on arbitrary nodes. The first node must be `0` and the
    /// nodes strictly increasing inside `[0, 1]`. The last node may lie below
    /// `1`; such grids can be tabulated but not used for time stepping.
    pub fn from_nodes(nodes: &[f64]) -> Result<Self, BasisError> {
        if nodes.len() < 2 {
            return Err(BasisError::DegreeZero);
        }
        check_degree(nodes.len() - 1)?;
        if nodes[0] != 0.0 {
            return Err(BasisError::InvalidNodes(format!(
                "first node must be 0, got {}",
                nodes[0]
            )));
        }
        if nodes.iter().any(|t| !t.is_finite() || *t > 1.0) {
            return Err(BasisError::InvalidNodes("nodes must lie in [0, 1]".into()));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(BasisError::InvalidNodes(
                "nodes must be strictly increasing".into(),
            ));
        }
        Ok(Self::with_nodes(PointFamily::Custom, nodes.to_vec()))
    }

    fn with_nodes(family: PointFamily, nodes: Vec<f64>) -> Self {
        let state_weights = barycentric_weights(&nodes);
        let test_weights = barycentric_weights(&nodes[1..]);
        LagrangeGrid {
            family,
            nodes,
            state_weights,
            test_weights,
        }
    }

    pub fn degree(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn family(&self) -> PointFamily {
        self.family
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// True when the last node sits on the right end of the interval, which
    /// makes the end value of one step the start value of the next.
    pub fn is_right_anchored(&self) -> bool {
        self.nodes[self.degree()] == 1.0
    }

    /// `(φ_j(τ), φ̇_j(τ))` for `j = 0..=r`.
    pub fn state_basis(&self, j: usize, tau: f64) -> (f64, f64) {
        assert!(j <= self.degree(), "state basis index {j} out of range");
        cardinal(&self.nodes, &self.state_weights, j, tau)
    }

    /// `ψ_i(τ)` for `i = 1..=r`.
    pub fn test_basis(&self, i: usize, tau: f64) -> f64 {
        assert!(
            (1..=self.degree()).contains(&i),
            "test basis index {i} out of range"
        );
        cardinal(&self.nodes[1..], &self.test_weights, i - 1, tau).0
    }

    /// Interpolates nodal values `values[j] = X(τ_j)` at `τ`.
    pub fn interpolate<T>(&self, values: &[T], tau: f64) -> T
    where
        T: Clone + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
    {
        assert_eq!(values.len(), self.nodes.len());
        let mut acc = values[0].clone() * self.state_basis(0, tau).0;
        for (j, v) in values.iter().enumerate().skip(1) {
            acc = acc + v.clone() * self.state_basis(j, tau).0;
        }
        acc
    }

    /// Sampled Lebesgue constants `(L_φ, L_ψ)`: the maximum of `Σ|φ_j|` and
    /// `Σ|ψ_i|` over 2001 equispaced points of `[0, 1]` and the nodes.
    pub fn lebesgue_constants(&self) -> (f64, f64) {
        let r = self.degree();
        let samples = (0..LEBESGUE_SAMPLES)
            .map(|k| k as f64 / (LEBESGUE_SAMPLES - 1) as f64)
            .chain(self.nodes.iter().copied());
        let mut l_phi: f64 = 0.0;
        let mut l_psi: f64 = 0.0;
        for tau in samples {
            let phi: f64 = (0..=r).map(|j| self.state_basis(j, tau).0.abs()).sum();
            let psi: f64 = (1..=r).map(|i| self.test_basis(i, tau).abs()).sum();
            l_phi = l_phi.max(phi);
            l_psi = l_psi.max(psi);
        }
        (l_phi, l_psi)
    }
}

fn check_degree(r: usize) -> Result<(), BasisError> {
    if r == 0 {
        Err(BasisError::DegreeZero)
    } else if r > MAX_DEGREE {
        Err(BasisError::DegreeTooHigh { r, max: MAX_DEGREE })
    } else {
        Ok(())
    }
}

/// Convenience wrapper around [`LagrangeGrid::new`].
pub fn make_grid(family: PointFamily, r: usize) -> Result<LagrangeGrid, BasisError> {
    LagrangeGrid::new(family, r)
}

fn barycentric_weights(nodes: &[f64]) -> Vec<f64> {
    (0..nodes.len())
        .map(|j| {
            let prod: f64 = nodes
                .iter()
                .enumerate()
                .filter(|&(k, _)| k != j)
                .map(|(_, &tk)| nodes[j] - tk)
                .product();
            1.0 / prod
        })
        .collect()
}

/// Value and derivative of cardinal function `j` in the first barycentric
/// form `w_j ∏_{k≠j} (τ - τ_k)`, which has no removable singularities.
fn cardinal(nodes: &[f64], weights: &[f64], j: usize, tau: f64) -> (f64, f64) {
    let n = nodes.len();
    if n == 1 {
        return (1.0, 0.0);
    }
    let mut value = weights[j];
    let mut deriv = 0.0;
    // Running product rule: d(p·(τ-τ_k)) = dp·(τ-τ_k) + p.
    for (k, &tk) in nodes.iter().enumerate() {
        if k == j {
            continue;
        }
        deriv = deriv * (tau - tk) + value;
        value *= tau - tk;
    }
    let tol = 4.0 * f64::EPSILON * tau.abs().max(1.0);
    if let Some(k) = nodes.iter().position(|&tk| (tau - tk).abs() <= tol) {
        value = if k == j { 1.0 } else { 0.0 };
    }
    (value, deriv)
}

/// Legendre polynomial `P_n(x)` and its derivative.
pub(crate) fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    let (mut dp_prev, mut dp) = (0.0, 1.0);
    for k in 2..=n {
        let kf = k as f64;
        let p_next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        let dp_next = dp_prev + (2.0 * kf - 1.0) * p;
        p_prev = p;
        p = p_next;
        dp_prev = dp;
        dp = dp_next;
    }
    (p, dp)
}

/// Gauss–Lobatto–Legendre nodes on `[0, 1]`, ascending.
fn gauss_lobatto_nodes(r: usize) -> Vec<f64> {
    // Newton iteration on (1 - x²) P'_r(x) in the form x - (x P_r - P_{r-1}) / ((r+1) P_r),
    // started from the Chebyshev–Lobatto points.
    let mut nodes: Vec<f64> = (0..=r)
        .map(|j| {
            let mut x = (std::f64::consts::PI * j as f64 / r as f64).cos();
            for _ in 0..100 {
                let (p, _) = legendre(r, x);
                let (pm, _) = legendre(r - 1, x);
                let dx = (x * p - pm) / ((r + 1) as f64 * p);
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            0.5 * (1.0 - x)
        })
        .collect();
    nodes[0] = 0.0;
    nodes[r] = 1.0;
    // Enforce the reflection symmetry of the exact nodes.
    for j in 1..=r / 2 {
        let s = 0.5 * (nodes[j] + 1.0 - nodes[r - j]);
        nodes[j] = s;
        nodes[r - j] = 1.0 - s;
    }
    if r.is_multiple_of(2) {
        nodes[r / 2] = 0.5;
    }
    nodes
}

/// Gauss–Legendre rule with `n` points on `[0, 1]`: `(nodes, weights)`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "quadrature needs at least one point");
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    for i in 0..n {
        // Roots in descending order on [-1, 1]; mapped to ascending order on [0, 1].
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre(n, x);
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// Coupling matrices of the cG scheme on the reference interval.
#[derive(Clone, Debug)]
pub struct CgTableau {
    grid: LagrangeGrid,
    d: DMatrix<f64>,
    mhat: DMatrix<f64>,
    dbar: DMatrix<f64>,
    mbar_hat: DMatrix<f64>,
    lebesgue_phi: f64,
    lebesgue_psi: f64,
}

impl CgTableau {
    /// Assembles `D` and `M̂` with an `(r+1)`-point Gauss–Legendre rule,
    /// which integrates the degree `≤ 2r - 1` products exactly.
    pub fn new(grid: &LagrangeGrid) -> Self {
        let r = grid.degree();
        let (qx, qw) = gauss_legendre(r + 1);
        let mut d = DMatrix::zeros(r, r + 1);
        let mut mhat = DMatrix::zeros(r, r + 1);
        for (&tau, &w) in qx.iter().zip(&qw) {
            let phi: Vec<(f64, f64)> = (0..=r).map(|j| grid.state_basis(j, tau)).collect();
            for i in 1..=r {
                let psi = grid.test_basis(i, tau) * w;
                for (j, &(v, dv)) in phi.iter().enumerate() {
                    d[(i - 1, j)] += dv * psi;
                    mhat[(i - 1, j)] += v * psi;
                }
            }
        }
        let (lebesgue_phi, lebesgue_psi) = grid.lebesgue_constants();
        CgTableau {
            grid: grid.clone(),
            dbar: d.columns(1, r).into_owned(),
            mbar_hat: mhat.columns(1, r).into_owned(),
            d,
            mhat,
            lebesgue_phi,
            lebesgue_psi,
        }
    }

    pub fn for_family(family: PointFamily, r: usize) -> Result<Self, BasisError> {
        Ok(Self::new(&LagrangeGrid::new(family, r)?))
    }

    pub fn degree(&self) -> usize {
        self.grid.degree()
    }

    pub fn grid(&self) -> &LagrangeGrid {
        &self.grid
    }

    /// `D`, of shape `r × (r+1)`.
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }

    /// `M̂ = M / Δ`, of shape `r × (r+1)`.
    pub fn mhat(&self) -> &DMatrix<f64> {
        &self.mhat
    }

    /// First column of `D` (coupling to the known start value).
    pub fn d1(&self) -> Vec<f64> {
        self.d.column(0).iter().copied().collect()
    }

    pub fn m1_hat(&self) -> Vec<f64> {
        self.mhat.column(0).iter().copied().collect()
    }

    /// Square block of `D` acting on the unknowns `x_1..x_r`.
    pub fn dbar(&self) -> &DMatrix<f64> {
        &self.dbar
    }

    pub fn mbar_hat(&self) -> &DMatrix<f64> {
        &self.mbar_hat
    }

    pub fn lebesgue_phi(&self) -> f64 {
        self.lebesgue_phi
    }

    pub fn lebesgue_psi(&self) -> f64 {
        self.lebesgue_psi
    }

    /// Sign counts of the eigenvalues of `(D̄ + D̄ᵀ)/2`.
    pub fn dbar_inertia(&self) -> Inertia {
        let sym = (&self.dbar + self.dbar.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym);
        let mut inertia = Inertia::default();
        for &lambda in eig.eigenvalues.iter() {
            if lambda.abs() < INERTIA_ZERO_TOL {
                inertia.zero += 1;
            } else if lambda > 0.0 {
                inertia.positive += 1;
            } else {
                inertia.negative += 1;
            }
        }
        inertia
    }
}

/// Convenience wrapper around [`CgTableau::new`].
pub fn assemble_tableau(grid: &LagrangeGrid) -> CgTableau {
    CgTableau::new(grid)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Inertia {
    pub positive: usize,
    pub negative: usize,
    pub zero: usize,
}
