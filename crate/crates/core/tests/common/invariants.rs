//! Reference-free property checks shared by the integration tests and the
//! acceptance harness. Each returns a short summary on success.

use std::sync::Arc;

use cgdae::dae::{check_consistency, fd_jacobian};
use cgdae::polybasis::{make_grid, MAX_DEGREE};
use cgdae::problems::{make_circuit, make_heat, make_pendulum, HeatConfig, PendulumConfig};
use cgdae::stepper::{assemble_newton_matrix, assemble_residual};
use cgdae::study::{run_study, run_study_sequential, to_csv_string, ProblemKind, StudyConfig};
use cgdae::{integrate, CgTableau, LagrangeGrid, NewtonSettings, PointFamily, SemiExplicitDae};
use nalgebra::{DMatrix, DVector};

pub type Check = Result<String, String>;
pub type NamedCheck = (&'static str, fn() -> Check);

/// Low-discrepancy samples in `[0, 1)`.
pub fn samples(count: usize, seed: usize) -> impl Iterator<Item = f64> {
    let phi = 0.618_033_988_749_894_9;
    (0..count).map(move |k| ((seed + k + 1) as f64 * phi).fract())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).amax()
}

pub fn closed_form_tableaus() -> Check {
    let t1 = CgTableau::for_family(PointFamily::Equispaced, 1).unwrap();
    let t2 = CgTableau::for_family(PointFamily::Equispaced, 2).unwrap();
    let d1 = DMatrix::from_row_slice(1, 2, &[-1.0, 1.0]);
    let m1 = DMatrix::from_row_slice(1, 2, &[0.5, 0.5]);
    let d2 = DMatrix::from_row_slice(2, 3, &[-5.0, 4.0, 1.0, 2.0, -4.0, 2.0]) / 3.0;
    let m2 = DMatrix::from_row_slice(2, 3, &[2.0, 4.0, 0.0, -1.0, 0.0, 1.0]) / 6.0;
    let worst = [
        max_abs_diff(t1.d(), &d1),
        max_abs_diff(t1.mhat(), &m1),
        max_abs_diff(t2.d(), &d2),
        max_abs_diff(t2.mhat(), &m2),
    ]
    .into_iter()
    .fold(0.0, f64::max);
    ensure(worst <= 1e-14, || format!("closed-form deviation {worst:.2e}"))?;
    Ok(format!("max deviation {worst:.1e}"))
}

/// Row sums of `D` vanish, column sums are `(-1, 0, …, 0, 1)` and `D̄` has
/// LU pivots bounded away from zero.
pub fn coupling_matrix_sums() -> Check {
    let mut worst_sum: f64 = 0.0;
    let mut min_pivot = f64::INFINITY;
    for family in PointFamily::BUILTIN {
        for r in 1..=MAX_DEGREE {
            let tab = CgTableau::for_family(family, r).unwrap();
            let d = tab.d();
            for i in 0..r {
                worst_sum = worst_sum.max(d.row(i).sum().abs());
            }
            for j in 0..=r {
                let want = if j == 0 {
                    -1.0
                } else if j == r {
                    1.0
                } else {
                    0.0
                };
                worst_sum = worst_sum.max((d.column(j).sum() - want).abs());
            }
            let u = tab.dbar().clone().lu().u();
            for k in 0..r {
                min_pivot = min_pivot.min(u[(k, k)].abs());
            }
        }
    }
    ensure(worst_sum <= 1e-12, || format!("sum deviation {worst_sum:.2e}"))?;
    ensure(min_pivot > 1e-12, || format!("smallest pivot {min_pivot:.2e}"))?;
    Ok(format!(
        "sums within {worst_sum:.1e}, smallest D̄ pivot {min_pivot:.3}"
    ))
}

pub fn dbar_inertia_pattern() -> Check {
    for r in 1..=6 {
        let inertia = CgTableau::for_family(PointFamily::Equispaced, r)
            .unwrap()
            .dbar_inertia();
        let want = (r.min(2), r.saturating_sub(2).min(1), r.saturating_sub(3));
        let got = (inertia.positive, inertia.negative, inertia.zero);
        ensure(got == want, || format!("r={r}: inertia {got:?}, expected {want:?}"))?;
    }
    Ok("r = 1..6 match".into())
}

/// Off-diagonal of `M̄̂` for interior nodes `(τ1, τ2)` at `r = 2`.
pub fn mbar_off_diagonal(t1: f64, t2: f64) -> f64 {
    let grid = LagrangeGrid::from_nodes(&[0.0, t1, t2]).unwrap();
    let m = CgTableau::new(&grid).mbar_hat().clone();
    m[(0, 1)].abs().max(m[(1, 0)].abs())
}

pub fn dbar_asymmetry(t1: f64, t2: f64) -> f64 {
    let grid = LagrangeGrid::from_nodes(&[0.0, t1, t2]).unwrap();
    let d = CgTableau::new(&grid).dbar().clone();
    (&d - d.transpose()).norm()
}

pub fn diagonal_mass_nodes() -> Check {
    let off = mbar_off_diagonal(2.0 / 6.0, 5.0 / 6.0).max(mbar_off_diagonal(0.5, 1.0));
    ensure(off <= 1e-13, || format!("off-diagonal {off:.2e}"))?;
    let mut min_asym = f64::INFINITY;
    for (a, b) in samples(50, 7).zip(samples(50, 101)) {
        let (lo, hi) = (a.min(b), a.max(b));
        if hi - lo < 1e-3 || lo < 1e-3 {
            continue;
        }
        min_asym = min_asym.min(dbar_asymmetry(lo, hi));
    }
    ensure(min_asym > 1e-8, || format!("near-symmetric D̄: {min_asym:.2e}"))?;
    Ok(format!("off-diagonal {off:.1e}, min ‖D̄-D̄ᵀ‖ {min_asym:.3}"))
}

pub fn partition_of_unity() -> Check {
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for family in PointFamily::BUILTIN {
        for r in 1..=6 {
            let grid = make_grid(family, r).unwrap();
            for tau in samples(200, r) {
                let (s, ds) = (0..=r).fold((0.0, 0.0), |(s, ds), j| {
                    let (v, dv) = grid.state_basis(j, tau);
                    (s + v, ds + dv)
                });
                let t: f64 = (1..=r).map(|i| grid.test_basis(i, tau)).sum();
                worst.0 = worst.0.max((s - 1.0).abs());
                worst.1 = worst.1.max(ds.abs());
                worst.2 = worst.2.max((t - 1.0).abs());
            }
        }
    }
    ensure(worst.0 < 1e-12 && worst.1 < 1e-10 && worst.2 < 1e-12, || {
        format!("deviations {worst:?}")
    })?;
    Ok(format!(
        "Σφ {:.1e}, Σφ' {:.1e}, Σψ {:.1e}",
        worst.0, worst.1, worst.2
    ))
}

/// The three benchmarks with moderate sizes; the nonlinear heat variant makes
/// the constraint curvature non-trivial.
pub fn benchmarks() -> Vec<SemiExplicitDae> {
    vec![
        make_circuit(),
        make_heat(HeatConfig {
            cells: 6,
            ..HeatConfig::with_exponents(3.0, 2.0)
        })
        .unwrap(),
        make_pendulum(PendulumConfig::default()).unwrap(),
    ]
}

/// Analytic `f_x` against central differences at sampled positive states.
pub fn f_jacobian_vs_fd(dae: &SemiExplicitDae, count: usize) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    let mut seq = samples(count * dae.n() + 1, 3 * dae.n());
    for k in 0..count {
        let x = DVector::from_fn(dae.n(), |_, _| 0.1 + seq.next().unwrap());
        let t = 0.1 * k as f64;
        let analytic = dae.f_x(&x, t).map_err(|e| e.to_string())?;
        let fd = fd_jacobian(|y| dae.f(y, t).unwrap(), &x).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(&analytic, &fd) / analytic.amax().max(1.0));
        let gx = dae.g_x(&x, t).map_err(|e| e.to_string())?;
        let gfd = fd_jacobian(|y| dae.g(y, t).unwrap(), &x).map_err(|e| e.to_string())?;
        worst = worst.max(max_abs_diff(&gx, &gfd) / gx.amax().max(1.0));
    }
    Ok(worst)
}

/// Newton matrix against central differences of the interval residual.
pub fn newton_matrix_vs_fd(dae: &SemiExplicitDae, r: usize, seed: usize) -> Result<f64, String> {
    let tab = CgTableau::for_family(PointFamily::Equispaced, r).unwrap();
    let (n, m) = (dae.n(), dae.m());
    let mut seq = samples((r + 1) * (n + m), seed);
    let mut draw = |len: usize| DVector::from_fn(len, |_, _| 0.2 + 0.6 * seq.next().unwrap());
    let x0 = draw(n);
    let xs: Vec<_> = (0..r).map(|_| draw(n)).collect();
    let ls: Vec<_> = (0..r).map(|_| draw(m)).collect();
    let (t0, dt) = (0.05, 0.01);
    let split = |z: &DVector<f64>| {
        let xs: Vec<_> = (0..r).map(|j| z.rows(j * n, n).into_owned()).collect();
        let ls: Vec<_> = (0..r).map(|k| z.rows(r * n + k * m, m).into_owned()).collect();
        (xs, ls)
    };
    let z = DVector::from_iterator(
        r * (n + m),
        xs.iter().chain(&ls).flat_map(|v| v.iter().copied()),
    );
    let analytic = assemble_newton_matrix(dae, &tab, t0, dt, &x0, &xs, &ls)
        .map_err(|e| e.to_string())?;
    let fd = fd_jacobian(
        |z| {
            let (xs, ls) = split(z);
            assemble_residual(dae, &tab, t0, dt, &x0, &xs, &ls).unwrap()
        },
        &z,
    )
    .map_err(|e| e.to_string())?;
    Ok(max_abs_diff(&analytic, &fd) / analytic.amax().max(1.0))
}

pub fn jacobians_match_fd() -> Check {
    let mut worst_f: f64 = 0.0;
    let mut worst_newton: f64 = 0.0;
    for dae in benchmarks() {
        worst_f = worst_f.max(f_jacobian_vs_fd(&dae, 20)?);
        for r in 1..=3 {
            worst_newton = worst_newton.max(newton_matrix_vs_fd(&dae, r, 11 * r)?);
        }
    }
    ensure(worst_f <= 1e-6, || format!("f_x/g_x deviation {worst_f:.2e}"))?;
    ensure(worst_newton <= 1e-5, || format!("Newton matrix deviation {worst_newton:.2e}"))?;
    Ok(format!("f_x/g_x {worst_f:.1e}, Newton matrix {worst_newton:.1e}"))
}

pub fn no_drift_off() -> Check {
    let settings = NewtonSettings::default();
    let mut worst: f64 = 0.0;
    for dae in [
        make_circuit(),
        make_heat(HeatConfig::with_exponents(3.0, 1.0)).unwrap(),
        make_pendulum(PendulumConfig::default()).unwrap(),
    ] {
        let dt = dae.t_end() / 40.0;
        for r in 1..=3 {
            let traj = integrate(&dae, PointFamily::Equispaced, r, dt, &settings)
                .map_err(|e| format!("{}: {e}", dae.name()))?;
            worst = worst.max(traj.max_constraint_violation());
            for iv in traj.intervals() {
                let g = dae.g(iv.end_state(), iv.t_end()).map_err(|e| e.to_string())?;
                worst = worst.max(g.amax());
            }
        }
    }
    let bound = 10.0 * settings.tol_residual;
    ensure(worst <= bound, || format!("constraint violation {worst:.2e}"))?;
    Ok(format!("max ‖g‖∞ {worst:.1e}"))
}

pub fn trapezoid_equivalence() -> Check {
    let dae = SemiExplicitDae::ode(
        "decay",
        DVector::from_element(1, 1.0),
        1.0,
        Arc::new(|x, _| -x),
    )
    .unwrap()
    .with_f_jacobian(Arc::new(|_, _| -DMatrix::identity(1, 1)));
    let mut worst: f64 = 0.0;
    for steps in [1usize, 4, 10] {
        let dt = 1.0 / steps as f64;
        let traj = integrate(&dae, PointFamily::Equispaced, 1, dt, &NewtonSettings::default())
            .map_err(|e| e.to_string())?;
        let factor = (1.0 - dt / 2.0) / (1.0 + dt / 2.0);
        let mut x = 1.0;
        for iv in traj.intervals() {
            x *= factor;
            worst = worst.max((iv.end_state()[0] - x).abs());
        }
    }
    ensure(worst <= 1e-12, || format!("deviation {worst:.2e}"))?;
    Ok(format!("deviation {worst:.1e}"))
}

pub fn linear_one_step_newton() -> Check {
    let settings = NewtonSettings::default();
    for dae in [make_circuit(), make_heat(HeatConfig::default()).unwrap()] {
        ensure(dae.f_linear() && dae.g_linear(), || format!("{} not flagged linear", dae.name()))?;
        let dt = dae.t_end() / 20.0;
        for r in 1..=3 {
            let traj = integrate(&dae, PointFamily::Equispaced, r, dt, &settings)
                .map_err(|e| e.to_string())?;
            let most = traj.max_newton_iterations();
            ensure(most == 1, || format!("{} r={r}: {most} iterations", dae.name()))?;
        }
    }
    Ok("one correction per interval".into())
}

pub fn consistency_of_benchmarks() -> Check {
    for dae in [
        make_circuit(),
        make_heat(HeatConfig::default()).unwrap(),
        make_pendulum(PendulumConfig::default()).unwrap(),
    ] {
        let report = check_consistency(&dae);
        ensure(report.consistent && report.rank_ok, || {
            format!("{}: {report:?}", dae.name())
        })?;
    }
    Ok("all initial data consistent".into())
}

pub fn small_circuit_study() -> StudyConfig {
    let mut cfg = StudyConfig::new(ProblemKind::Circuit);
    cfg.degrees = vec![1, 2, 3];
    cfg.levels = 3;
    cfg.baselines = vec![cgdae::study::Baseline::Radau2];
    cfg
}

pub fn csv_determinism() -> Check {
    let cfg = small_circuit_study();
    let a = to_csv_string(&run_study(&cfg).map_err(|e| e.to_string())?);
    let b = to_csv_string(&run_study(&cfg).map_err(|e| e.to_string())?);
    let c = to_csv_string(&run_study_sequential(&cfg).map_err(|e| e.to_string())?);
    ensure(a == b, || "repeated runs differ".into())?;
    ensure(a == c, || "parallel and sequential runs differ".into())?;
    Ok(format!("{} identical bytes", a.len()))
}

/// Every check of this module, labelled.
pub fn all() -> Vec<NamedCheck> {
    vec![
        ("partition of unity", partition_of_unity),
        ("coupling matrix sums", coupling_matrix_sums),
        ("consistent initial data", consistency_of_benchmarks),
        ("Jacobians vs finite differences", jacobians_match_fd),
        ("no drift-off", no_drift_off),
        ("trapezoid equivalence", trapezoid_equivalence),
        ("linear problems take one Newton step", linear_one_step_newton),
        ("CSV determinism", csv_determinism),
    ]
}
