//! Convergence studies: runs a ladder of halved step sizes for each degree,
//! measures errors against an exact or fine-grid reference and writes the
//! resulting table as CSV.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;

use crate::dae::SemiExplicitDae;
use crate::error::StudyError;
use crate::polybasis::{gauss_legendre, CgTableau, PointFamily, MAX_DEGREE};
use crate::problems::{
    make_circuit, make_heat, make_pendulum, pendulum_energy, HeatConfig, PendulumConfig,
};
use crate::radau::{radau_integrate, RadauTrajectory};
use crate::stepper::{integrate_with_tableau, step_count, NewtonSettings, Trajectory};

/// Number of steps of the heat reference run on `[0, T]`.
pub const HEAT_REFERENCE_STEPS: usize = 2560;
/// Refinement of fallback references below the finest study step.
pub const REFERENCE_FACTOR: usize = 64;
/// Refinement of pendulum references below the finest study step. Finer
/// grids lose accuracy to rounding, which the index-3 constraint amplifies
/// like `ε/Δ` per step.
pub const PENDULUM_REFERENCE_FACTOR: usize = 16;
/// Family label of baseline rows.
pub const RADAU_FAMILY: &str = "radau-iia";
pub const CSV_HEADER: &str =
    "problem,r,family,dt,err_state,err_mult,err_energy,newton_iters_mean,order_state,order_mult";

const MULT_QUADRATURE_POINTS: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Circuit,
    Heat,
    Pendulum,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [ProblemKind::Circuit, ProblemKind::Heat, ProblemKind::Pendulum];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Circuit => "circuit",
            ProblemKind::Heat => "heat",
            ProblemKind::Pendulum => "pendulum",
        }
    }

    /// Coarsest step and number of levels used when none are given.
    pub fn default_ladder(self) -> (f64, usize) {
        match self {
            ProblemKind::Circuit => (0.05, 7),
            ProblemKind::Heat => (0.0125, 4),
            ProblemKind::Pendulum => (3.0 / 32.0, 6),
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProblemKind::ALL
            .into_iter()
            .find(|p| p.name() == s.trim())
            .ok_or_else(|| StudyError::UnknownProblem(s.to_string()))
    }
}

/// Radau IIA comparison runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Baseline {
    Radau2,
    Radau3,
}

impl Baseline {
    pub fn stages(self) -> usize {
        match self {
            Baseline::Radau2 => 2,
            Baseline::Radau3 => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Baseline::Radau2 => "radau2",
            Baseline::Radau3 => "radau3",
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Baseline {
    type Err = StudyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "radau2" => Ok(Baseline::Radau2),
            "radau3" => Ok(Baseline::Radau3),
            other => Err(StudyError::UnknownBaseline(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub problem: ProblemKind,
    pub degrees: Vec<usize>,
    /// Coarsest step size.
    pub dt0: f64,
    /// Number of step sizes, each half the previous one.
    pub levels: usize,
    pub family: PointFamily,
    /// Heat exponents, ignored by the other problems.
    pub c1: f64,
    pub c2: f64,
    /// Pendulum parameters, ignored by the other problems.
    pub pendulum: PendulumConfig,
    pub baselines: Vec<Baseline>,
    /// Overrides the problem's end time.
    pub t_end: Option<f64>,
    pub newton: NewtonSettings,
}

impl StudyConfig {
    pub fn new(problem: ProblemKind) -> Self {
        let (dt0, levels) = problem.default_ladder();
        StudyConfig {
            problem,
            degrees: vec![1, 2, 3],
            dt0,
            levels,
            family: PointFamily::Equispaced,
            c1: 1.0,
            c2: 1.0,
            pendulum: PendulumConfig::default(),
            baselines: Vec::new(),
            t_end: None,
            newton: NewtonSettings::default(),
        }
    }

    pub fn step_sizes(&self) -> Vec<f64> {
        (0..self.levels)
            .map(|k| self.dt0 / 2f64.powi(k as i32))
            .collect()
    }

    fn build(&self) -> Result<Problem, StudyError> {
        let (dae, pendulum) = match self.problem {
            ProblemKind::Circuit => (make_circuit(), None),
            ProblemKind::Heat => (
                make_heat(HeatConfig::with_exponents(self.c1, self.c2))
                    .map_err(|e| StudyError::InvalidConfig(e.to_string()))?,
                None,
            ),
            ProblemKind::Pendulum => {
                let cfg = self.pendulum;
                let dae = make_pendulum(cfg).map_err(|e| StudyError::InvalidConfig(e.to_string()))?;
                (dae, Some(cfg))
            }
        };
        let dae = match self.t_end {
            Some(t) => dae
                .with_t_end(t)
                .map_err(|e| StudyError::InvalidConfig(e.to_string()))?,
            None => dae,
        };
        Ok(Problem {
            dae: Arc::new(dae),
            pendulum,
        })
    }

    pub fn validate(&self) -> Result<(), StudyError> {
        let invalid = |msg: String| Err(StudyError::InvalidConfig(msg));
        if self.degrees.is_empty() && self.baselines.is_empty() {
            return invalid("no degrees and no baselines requested".into());
        }
        if let Some(&r) = self.degrees.iter().find(|&&r| r == 0 || r > MAX_DEGREE) {
            return invalid(format!("degree {r} outside 1..={MAX_DEGREE}"));
        }
        if !(self.dt0 > 0.0 && self.dt0.is_finite()) {
            return invalid(format!("dt0 = {} must be positive", self.dt0));
        }
        if self.levels == 0 {
            return invalid("at least one level is required".into());
        }
        if self.family == PointFamily::Custom {
            return invalid("custom point families cannot be used in a study".into());
        }
        let problem = self.build()?;
        for dt in self.step_sizes() {
            step_count(problem.dae.t_end(), dt)
                .map_err(|e| StudyError::InvalidConfig(e.to_string()))?;
        }
        if !self.baselines.is_empty() && problem.dae.mass().is_some() {
            return invalid(format!(
                "Radau baselines do not support the mass matrix of `{}`",
                self.problem
            ));
        }
        self.newton
            .validate()
            .map_err(|e| StudyError::InvalidConfig(e.to_string()))
    }

    /// Step size of the fine-grid reference, `None` when an exact solution is
    /// available.
    pub fn reference_dt(&self) -> Option<f64> {
        let default_t_end = match self.problem {
            ProblemKind::Circuit => return None,
            ProblemKind::Heat => HeatConfig::default().t_end,
            ProblemKind::Pendulum => self.pendulum.t_end,
        };
        let t_end = self.t_end.unwrap_or(default_t_end);
        let finest = self.dt0 / 2f64.powi(self.levels as i32 - 1);
        if self.problem == ProblemKind::Pendulum {
            return Some(finest / PENDULUM_REFERENCE_FACTOR as f64);
        }
        let fallback = finest / REFERENCE_FACTOR as f64;
        if self.problem == ProblemKind::Heat {
            let dt_ref = t_end / HEAT_REFERENCE_STEPS as f64;
            let divides = self.step_sizes().iter().all(|dt| {
                let q = dt / dt_ref;
                (q - q.round()).abs() < 1e-9 * q
            });
            if divides && finest >= 8.0 * dt_ref {
                return Some(dt_ref);
            }
        }
        Some(fallback)
    }
}

struct Problem {
    dae: Arc<SemiExplicitDae>,
    pendulum: Option<PendulumConfig>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Method {
    Cg(usize),
    Radau(Baseline),
}

impl Method {
    fn r(self) -> usize {
        match self {
            Method::Cg(r) => r,
            Method::Radau(b) => b.stages(),
        }
    }
}

enum Run {
    Cg(Trajectory),
    Radau(RadauTrajectory),
}

impl Run {
    fn final_state(&self) -> &DVector<f64> {
        match self {
            Run::Cg(t) => t.final_state(),
            Run::Radau(t) => t.final_state(),
        }
    }

    fn mean_newton_iterations(&self) -> f64 {
        match self {
            Run::Cg(t) => t.mean_newton_iterations(),
            Run::Radau(t) => t.mean_newton_iterations(),
        }
    }

    fn end_states(&self) -> Vec<&DVector<f64>> {
        match self {
            Run::Cg(t) => t.intervals().iter().map(|iv| iv.end_state()).collect(),
            Run::Radau(t) => t.states[1..].iter().collect(),
        }
    }

    /// Discrete multiplier applied to the indicator of `[a, b]`.
    fn multiplier_window(&self, a: f64, b: f64) -> DVector<f64> {
        match self {
            Run::Cg(t) => t.multiplier_window(a, b),
            Run::Radau(t) => t.multiplier_window(a, b),
        }
    }
}

fn run_method(
    problem: &Problem,
    family: PointFamily,
    method: Method,
    dt: f64,
    settings: &NewtonSettings,
) -> Result<Run, String> {
    let dae = &problem.dae;
    match method {
        Method::Cg(r) => {
            let tableau = CgTableau::for_family(family, r).map_err(|e| e.to_string())?;
            integrate_with_tableau(dae, Arc::new(tableau), dt, settings)
                .map(Run::Cg)
                .map_err(|e| e.to_string())
        }
        Method::Radau(b) => radau_integrate(dae, b.stages(), dt, settings)
            .map(Run::Radau)
            .map_err(|e| e.to_string()),
    }
}

/// One run of a study.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub problem: ProblemKind,
    /// Polynomial degree, or number of stages for baseline rows.
    pub r: usize,
    pub family: String,
    pub dt: f64,
    /// `‖x(T) - X(T)‖₂`, NaN if the run failed.
    pub err_state: f64,
    /// Error of the multiplier paired with the indicator of `[T-Δ, T]`.
    pub err_mult: Option<f64>,
    /// `max_k |E(X(T_k)) - E(x0)|` over the interval ends, pendulum only.
    pub err_energy: Option<f64>,
    pub newton_iters_mean: Option<f64>,
    pub order_state: Option<f64>,
    pub order_mult: Option<f64>,
    pub failure: Option<String>,
}

impl ConvergenceRow {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }

    pub fn is_baseline(&self) -> bool {
        self.family == RADAU_FAMILY
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(ConvergenceRow::failed)
    }

    /// Rows of one curve, coarsest first.
    pub fn series(&self, family: &str, r: usize) -> Vec<&ConvergenceRow> {
        self.rows
            .iter()
            .filter(|row| row.family == family && row.r == r)
            .collect()
    }

    /// Least-squares state order over the last three rows above `floor`.
    pub fn tail_order_state(&self, family: &str, r: usize, floor: f64) -> Option<f64> {
        let rows = self.series(family, r);
        let dts: Vec<f64> = rows.iter().map(|row| row.dt).collect();
        let errs: Vec<f64> = rows.iter().map(|row| row.err_state).collect();
        tail_order(&dts, &errs, floor)
    }

    pub fn tail_order_mult(&self, family: &str, r: usize, floor: f64) -> Option<f64> {
        let rows = self.series(family, r);
        let dts: Vec<f64> = rows.iter().map(|row| row.dt).collect();
        let errs: Vec<f64> = rows
            .iter()
            .map(|row| row.err_mult.unwrap_or(f64::NAN))
            .collect();
        tail_order(&dts, &errs, floor)
    }

    pub fn tail_order_energy(&self, family: &str, r: usize, floor: f64) -> Option<f64> {
        let rows = self.series(family, r);
        let dts: Vec<f64> = rows.iter().map(|row| row.dt).collect();
        let errs: Vec<f64> = rows
            .iter()
            .map(|row| row.err_energy.unwrap_or(f64::NAN))
            .collect();
        tail_order(&dts, &errs, floor)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OrderEstimate {
    /// Rate against the previous row; `None` on the first row and wherever an
    /// error is zero or not finite.
    pub per_row: Vec<Option<f64>>,
    /// Least-squares slope over the last three rows.
    pub tail: Option<f64>,
}

fn usable(e: f64) -> bool {
    e > 0.0 && e.is_finite()
}

/// Empirical orders for one curve sorted by decreasing step size.
pub fn estimate_orders(dts: &[f64], errors: &[f64]) -> OrderEstimate {
    assert_eq!(dts.len(), errors.len(), "one error per step size");
    let per_row = (0..errors.len())
        .map(|k| {
            if k == 0 || !usable(errors[k - 1]) || !usable(errors[k]) {
                return None;
            }
            Some((errors[k - 1] / errors[k]).ln() / (dts[k - 1] / dts[k]).ln())
        })
        .collect();
    let start = errors.len().saturating_sub(3);
    OrderEstimate {
        per_row,
        tail: slope(&dts[start..], &errors[start..]),
    }
}

/// Like the tail of [`estimate_orders`], restricted to rows with error
/// above `floor`.
pub fn tail_order(dts: &[f64], errors: &[f64], floor: f64) -> Option<f64> {
    let (d, e): (Vec<f64>, Vec<f64>) = dts
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e.is_finite() && e > floor)
        .map(|(&d, &e)| (d, e))
        .unzip();
    let start = e.len().saturating_sub(3);
    slope(&d[start..], &e[start..])
}

/// Slope of `log e` against `log Δ`.
fn slope(dts: &[f64], errors: &[f64]) -> Option<f64> {
    if dts.len() < 2 || !errors.iter().all(|&e| usable(e)) {
        return None;
    }
    let xs: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

struct Job {
    method: Method,
    dt: f64,
    reference: bool,
}

#[cfg(feature = "parallel")]
fn execute<F>(jobs: &[Job], parallel: bool, f: F) -> Vec<Result<Run, String>>
where
    F: Fn(&Job) -> Result<Run, String> + Sync + Send,
{
    use rayon::prelude::*;
    if parallel {
        jobs.par_iter().map(f).collect()
    } else {
        jobs.iter().map(f).collect()
    }
}

#[cfg(not(feature = "parallel"))]
fn execute<F>(jobs: &[Job], _parallel: bool, f: F) -> Vec<Result<Run, String>>
where
    F: Fn(&Job) -> Result<Run, String>,
{
    jobs.iter().map(f).collect()
}

/// Runs the study, in parallel when the `parallel` feature is enabled.
pub fn run_study(cfg: &StudyConfig) -> Result<ConvergenceTable, StudyError> {
    run(cfg, true)
}

/// Runs the study on the calling thread.
pub fn run_study_sequential(cfg: &StudyConfig) -> Result<ConvergenceTable, StudyError> {
    run(cfg, false)
}

fn run(cfg: &StudyConfig, parallel: bool) -> Result<ConvergenceTable, StudyError> {
    cfg.validate()?;
    let problem = cfg.build()?;
    let methods: Vec<Method> = cfg
        .degrees
        .iter()
        .map(|&r| Method::Cg(r))
        .chain(cfg.baselines.iter().map(|&b| Method::Radau(b)))
        .collect();
    let dts = cfg.step_sizes();
    let dt_ref = cfg.reference_dt();
    let mut jobs = Vec::new();
    for &method in &methods {
        if let Some(dt) = dt_ref {
            jobs.push(Job {
                method,
                dt,
                reference: true,
            });
        }
        for &dt in &dts {
            jobs.push(Job {
                method,
                dt,
                reference: false,
            });
        }
    }
    let runs = execute(&jobs, parallel, |job| {
        log::info!(
            "{} {:?} dt = {:e}{}",
            cfg.problem,
            job.method,
            job.dt,
            if job.reference { " (reference)" } else { "" }
        );
        run_method(&problem, cfg.family, job.method, job.dt, &cfg.newton)
    });

    let t_end = problem.dae.t_end();
    let energy0 = problem.pendulum.map(|p| pendulum_energy(problem.dae.x0(), &p));
    let mut rows = Vec::with_capacity(methods.len() * dts.len());
    let mut k = 0;
    for &method in &methods {
        let reference = if dt_ref.is_some() {
            k += 1;
            Some(&runs[k - 1])
        } else {
            None
        };
        let family = match method {
            Method::Cg(_) => cfg.family.name().to_string(),
            Method::Radau(_) => RADAU_FAMILY.to_string(),
        };
        let first = rows.len();
        for &dt in &dts {
            let run = &runs[k];
            k += 1;
            let mut row = ConvergenceRow {
                problem: cfg.problem,
                r: method.r(),
                family: family.clone(),
                dt,
                err_state: f64::NAN,
                err_mult: Some(f64::NAN),
                err_energy: energy0.map(|_| f64::NAN),
                newton_iters_mean: None,
                order_state: None,
                order_mult: None,
                failure: None,
            };
            let reference = match reference {
                Some(Err(e)) => Err(format!("reference run failed: {e}")),
                Some(Ok(run)) => Ok(Some(run)),
                None => Ok(None),
            };
            match (run.as_ref().map_err(String::clone), reference) {
                (Err(e), _) | (Ok(_), Err(e)) => {
                    log::warn!("{} {:?} dt = {:e}: {}", cfg.problem, method, dt, e);
                    row.failure = Some(e);
                }
                (Ok(run), Ok(reference)) => {
                    let x_end = run.final_state();
                    let window = run.multiplier_window(t_end - dt, t_end);
                    match reference {
                        Some(reference) => {
                            row.err_state = (x_end - reference.final_state()).norm();
                            let fine = reference.multiplier_window(t_end - dt, t_end);
                            row.err_mult = Some((window - fine).norm());
                        }
                        None => {
                            let exact = problem
                                .dae
                                .reference()
                                .expect("problems without fine-grid reference have an exact solution");
                            row.err_state = (x_end - (exact.state)(t_end)).norm();
                            row.err_mult = exact.multiplier.as_ref().map(|lambda| {
                                (integrate_window(lambda.as_ref(), t_end - dt, t_end) - window)
                                    .norm()
                            });
                        }
                    }
                    if let (Some(p), Some(e0)) = (problem.pendulum, energy0) {
                        let drift = run
                            .end_states()
                            .into_iter()
                            .map(|x| (pendulum_energy(x, &p) - e0).abs())
                            .fold(0.0, f64::max);
                        row.err_energy = Some(drift);
                    }
                    row.newton_iters_mean = Some(run.mean_newton_iterations());
                }
            }
            rows.push(row);
        }
        fill_orders(&mut rows[first..]);
    }
    Ok(ConvergenceTable { rows })
}

fn integrate_window(lambda: &(dyn Fn(f64) -> DVector<f64> + Send + Sync), a: f64, b: f64) -> DVector<f64> {
    let (qx, qw) = gauss_legendre(MULT_QUADRATURE_POINTS);
    let h = b - a;
    qx.iter()
        .zip(&qw)
        .map(|(x, w)| lambda(a + h * x) * (w * h))
        .reduce(|acc, v| acc + v)
        .expect("quadrature has points")
}

fn fill_orders(rows: &mut [ConvergenceRow]) {
    let dts: Vec<f64> = rows.iter().map(|r| r.dt).collect();
    let state: Vec<f64> = rows.iter().map(|r| r.err_state).collect();
    let mult: Vec<f64> = rows
        .iter()
        .map(|r| r.err_mult.unwrap_or(f64::NAN))
        .collect();
    let state = estimate_orders(&dts, &state).per_row;
    let mult = estimate_orders(&dts, &mult).per_row;
    for ((row, s), m) in rows.iter_mut().zip(state).zip(mult) {
        row.order_state = s;
        row.order_mult = m;
    }
}

fn number(v: Option<f64>) -> String {
    match v {
        None => String::new(),
        Some(v) if v.is_nan() => "nan".to_string(),
        Some(v) => format!("{v:.5e}"),
    }
}

fn record(row: &ConvergenceRow) -> [String; 10] {
    [
        row.problem.name().to_string(),
        row.r.to_string(),
        row.family.clone(),
        number(Some(row.dt)),
        number(Some(row.err_state)),
        number(row.err_mult),
        number(row.err_energy),
        number(row.newton_iters_mean),
        number(row.order_state),
        number(row.order_mult),
    ]
}

fn write_records<W: std::io::Write>(table: &ConvergenceTable, out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record(CSV_HEADER.split(','))?;
    for row in &table.rows {
        w.write_record(record(row))?;
    }
    w.flush()?;
    Ok(())
}

/// The CSV text of `table`; failed runs show `nan` errors.
pub fn to_csv_string(table: &ConvergenceTable) -> String {
    let mut buf = Vec::new();
    write_records(table, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV fields are UTF-8")
}

pub fn write_csv(table: &ConvergenceTable, path: &Path) -> Result<(), StudyError> {
    let file = std::fs::File::create(path).map_err(|source| StudyError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_records(table, std::io::BufWriter::new(file)).map_err(|source| StudyError::Csv {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn orders_of_simple_sequences() {
        let est = estimate_orders(&[0.1, 0.05], &[4e-6, 1e-6]);
        assert_eq!(est.per_row[0], None);
        assert_abs_diff_eq!(est.per_row[1].unwrap(), 2.0, epsilon = 1e-12);
        let flat = estimate_orders(&[0.1, 0.05], &[1e-6, 1e-6]);
        assert_abs_diff_eq!(flat.per_row[1].unwrap(), 0.0, epsilon = 1e-12);
        let broken = estimate_orders(&[0.1, 0.05, 0.025], &[1e-6, 0.0, f64::NAN]);
        assert_eq!(broken.per_row, vec![None, None, None]);
        assert_eq!(broken.tail, None);
    }

    #[test]
    fn tail_is_least_squares_over_last_three() {
        let dts = [0.4, 0.2, 0.1, 0.05];
        let errs = [1.0, 1.0, 0.125, 0.015625];
        let est = estimate_orders(&dts, &errs);
        assert_abs_diff_eq!(est.tail.unwrap(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(tail_order(&dts, &errs, 0.1).unwrap(), 1.5, epsilon = 1e-12);
    }

    #[test]
    fn circuit_error_ratio() {
        let est = estimate_orders(&[0.05, 0.025], &[7.46764e-3, 1.04015e-3]);
        assert_abs_diff_eq!(est.per_row[1].unwrap(), 2.84, epsilon = 5e-3);
    }

    #[test]
    fn parse_names() {
        assert_eq!("heat".parse::<ProblemKind>().unwrap(), ProblemKind::Heat);
        assert!("spring".parse::<ProblemKind>().is_err());
        assert_eq!("radau3".parse::<Baseline>().unwrap(), Baseline::Radau3);
        assert!("radau5".parse::<Baseline>().is_err());
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = StudyConfig::new(ProblemKind::Circuit);
        cfg.dt0 = 0.0;
        assert!(matches!(run_study(&cfg), Err(StudyError::InvalidConfig(_))));
        let mut cfg = StudyConfig::new(ProblemKind::Circuit);
        cfg.dt0 = 0.3;
        assert!(cfg.validate().is_err());
        let mut cfg = StudyConfig::new(ProblemKind::Pendulum);
        cfg.baselines = vec![Baseline::Radau2];
        assert!(cfg.validate().is_err());
        let mut cfg = StudyConfig::new(ProblemKind::Circuit);
        cfg.degrees = vec![0];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn reference_steps() {
        let heat = StudyConfig::new(ProblemKind::Heat);
        assert_abs_diff_eq!(heat.reference_dt().unwrap(), 0.5 / 2560.0, epsilon = 1e-18);
        let pendulum = StudyConfig::new(ProblemKind::Pendulum);
        assert_abs_diff_eq!(pendulum.reference_dt().unwrap(), 3.0 / 1024.0 / 16.0, epsilon = 1e-18);
        assert_eq!(StudyConfig::new(ProblemKind::Circuit).reference_dt(), None);
    }

    #[test]
    fn empty_table_is_header_only() {
        let csv = to_csv_string(&ConvergenceTable::default());
        assert_eq!(csv, format!("{CSV_HEADER}\n"));
    }

    #[test]
    fn failed_row_is_marked() {
        let table = ConvergenceTable {
            rows: vec![ConvergenceRow {
                problem: ProblemKind::Heat,
                r: 1,
                family: "equispaced".into(),
                dt: 0.0125,
                err_state: f64::NAN,
                err_mult: Some(f64::NAN),
                err_energy: None,
                newton_iters_mean: None,
                order_state: None,
                order_mult: None,
                failure: Some("no convergence".into()),
            }],
        };
        assert!(table.any_failed());
        let csv = to_csv_string(&table);
        assert_eq!(csv.lines().nth(1).unwrap(), "heat,1,equispaced,1.25000e-2,nan,nan,,,,");
    }
}
