//! Projected ODE integration and stationarity measurements.
//!
//! The continuum limit of the projected iteration is the differential
//! inclusion `dx/dt = h(x) - z`, `z(t) in N_K(x(t))`. On a box, explicit
//! Euler with projection discretizes it so that the per-step correction
//! `z_k = (x_k + dt * h(x_k) - x_{k+1}) / dt` is itself a normal-cone
//! element at `x_{k+1}`, mirroring the `P_n / gamma_n` structure of the
//! stochastic iteration.
//!
//! Stationarity is measured two ways:
//!
//! - drift problems: the tangential drift magnitude `|proj_{T_K(x)} h(x)|`,
//!   whose zero set is the Lyapunov-stationary set;
//! - composite problems: the per-coordinate residual of the fixed-point
//!   inclusion `0 in h(x) - subdiff g(x) - N_K(x)` (equivalently
//!   `0 in grad f + subdiff g + N_K`), which reduces to the tangential form
//!   when `g = 0`.

use crate::diagnostics::{Interpolant, InterpolantKind, TrajectoryView};
use crate::engine::{Problem, StationaryDescriptor};
use crate::geometry::{dist_to_normal_cone_shifted, in_normal_cone, project_tangent};
use crate::vecmath::{all_finite, check_dim, dot, norm2, sub};
use crate::{Error, Result};

/// Projected-Euler discretization of the projected ODE on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeTrajectory {
    pub h_ode: f64,
    /// States `x_0 ..= x_J` on the grid `k * h_ode`; all feasible.
    pub states: Vec<Vec<f64>>,
    /// Cone corrections `z_k = (x_k + h_ode h(x_k) - x_{k+1}) / h_ode` for
    /// `k = 0 .. J-1`; each lies in the normal cone at `x_{k+1}`.
    pub cone_corrections: Vec<Vec<f64>>,
}

impl OdeTrajectory {
    pub fn steps(&self) -> usize {
        self.cone_corrections.len()
    }

    pub fn final_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// Grid value at time `t` (piecewise-constant cell lookup).
    pub fn state_at(&self, t: f64) -> Result<&[f64]> {
        if !(t >= 0.0) {
            return Err(Error::OutOfRange { t });
        }
        let cell = (t / self.h_ode) as usize;
        self.states.get(cell).map(|v| v.as_slice()).ok_or(Error::OutOfRange { t })
    }
}

/// Integrates `dx/dt = h(x) - z` by projected explicit Euler:
/// `x_{k+1} = proj_K(x_k + h_ode * h(x_k))` for `round(T / h_ode)` steps.
/// `x0` must lie in the box.
pub fn projected_euler(problem: &Problem, x0: &[f64], h_ode: f64, t_span: f64) -> Result<OdeTrajectory> {
    check_dim(problem.dim(), x0.len())?;
    if !(h_ode > 0.0 && t_span > 0.0 && h_ode <= t_span) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < h_ode <= T, got h_ode={h_ode}, T={t_span}"
        )));
    }
    if !problem.bounds().contains(x0) {
        return Err(Error::OutsideBox { coord: 0 });
    }
    let steps = (t_span / h_ode).round().max(1.0) as usize;
    let mut states = Vec::with_capacity(steps + 1);
    let mut corrections = Vec::with_capacity(steps);
    let mut x = x0.to_vec();
    for k in 0..steps {
        let hval = problem.drift(&x);
        if !all_finite(&hval) {
            return Err(Error::NonFinite { step: k as u64, what: "drift value" });
        }
        // same expression shape as the engine's zero-noise step
        let v: Vec<f64> = x.iter().zip(&hval).map(|(xi, hi)| xi + h_ode * hi).collect();
        let x_next = problem.bounds().project(&v)?;
        let z: Vec<f64> = v.iter().zip(&x_next).map(|(vi, xi)| (vi - xi) / h_ode).collect();
        corrections.push(z);
        states.push(x);
        x = x_next;
    }
    states.push(x);
    Ok(OdeTrajectory { h_ode, states, cone_corrections: corrections })
}

/// Sup distance between the shifted iterate process `X_N` and the projected
/// Euler flow started from `X_N(0)`, sampled at the midpoints of the ODE
/// cells over `[0, T]` (piecewise-constant sampling; exact zero for
/// matched-step zero-noise runs, where the two recursions coincide).
pub fn compare_sa_ode(
    problem: &Problem,
    view: &TrajectoryView,
    n_shift: u64,
    t_span: f64,
    h_ode: f64,
) -> Result<f64> {
    let x_interp = Interpolant::new(view, InterpolantKind::State, n_shift)?;
    if x_interp.span() < t_span {
        return Err(Error::WindowNotCovered(format!(
            "records cover {:.6} units of time, need {t_span}",
            x_interp.span()
        )));
    }
    let x_start = x_interp.eval(0.0)?.to_vec();
    let ode = projected_euler(problem, &x_start, h_ode, t_span)?;
    let mut sup = 0.0f64;
    for (j, state) in ode.states.iter().enumerate().take(ode.steps()) {
        let mid = (j as f64 + 0.5) * h_ode;
        if mid > t_span {
            break;
        }
        let xs = x_interp.eval(mid)?;
        sup = sup.max(norm2(&sub(xs, state)));
    }
    Ok(sup)
}

/// Descent rate `< grad V(x), proj_{T_K(x)} h(x) >` of the Lyapunov function
/// along the projected dynamics; nonpositive everywhere for a valid `V`.
pub fn lyapunov_rate(problem: &Problem, x: &[f64]) -> Result<f64> {
    let lyap = problem.lyapunov().ok_or(Error::Missing("lyapunov function"))?;
    let sig = problem.bounds().face_signature_default(x)?;
    let h = problem.drift(x);
    let tangential = project_tangent(&h, &sig)?;
    let g = (lyap.grad)(x);
    check_dim(x.len(), g.len())?;
    Ok(dot(&g, &tangential))
}

/// First-order stationarity residual at `x`.
///
/// Without a penalty this is `|proj_{T_K(x)} h(x)|`. With a penalty it is
/// the worst per-coordinate distance from `0` to
/// `h_i(x) - [subdiff g(x)]_i - N_i`, evaluated through
/// [`dist_to_normal_cone_shifted`] with the subgradient interval negated
/// (set reflection); zero exactly on the fixed points of the projected
/// proximal iteration.
pub fn stationarity_residual(problem: &Problem, x: &[f64]) -> Result<f64> {
    let sig = problem.bounds().face_signature_default(x)?;
    let h = problem.drift(x);
    match problem.penalty() {
        None => {
            let tangential = project_tangent(&h, &sig)?;
            Ok(norm2(&tangential))
        }
        Some(pen) => {
            let iv = pen.clarke_interval(x);
            let mut worst = 0.0f64;
            for i in 0..x.len() {
                let (lo, hi) = iv.coord(i);
                let d = dist_to_normal_cone_shifted(h[i], -hi, -lo, sig.tags()[i])?;
                worst = worst.max(d);
            }
            Ok(worst)
        }
    }
}

/// Distance from `x` to the problem's stationary set: minimal Euclidean
/// distance for explicit descriptors, the stationarity residual otherwise
/// (a convergence surrogate, not a metric distance).
pub fn dist_to_stationary(problem: &Problem, x: &[f64]) -> Result<f64> {
    match problem.stationary() {
        StationaryDescriptor::ExplicitPoints(points) => {
            if points.is_empty() {
                return Err(Error::Missing("stationary points"));
            }
            Ok(points
                .iter()
                .map(|p| norm2(&sub(x, p)))
                .fold(f64::INFINITY, f64::min))
        }
        StationaryDescriptor::ResidualBased { .. } => stationarity_residual(problem, x),
    }
}

/// Verifies the cone condition on every Euler correction of a trajectory.
pub fn cone_corrections_valid(problem: &Problem, ode: &OdeTrajectory) -> Result<bool> {
    for (k, z) in ode.cone_corrections.iter().enumerate() {
        let sig = problem.bounds().face_signature_default(&ode.states[k + 1])?;
        if !in_normal_cone(z, &sig)? {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, Algorithm, RunSpec};
    use crate::geometry::HyperRect;
    use crate::prox::Penalty;
    use crate::schedules::{NoiseModel, StepSchedule};
    use std::sync::Arc;

    fn linear_decay() -> Problem {
        Problem::builder(
            "linear",
            HyperRect::cube(1, -1.0, 1.0).unwrap(),
            Arc::new(|x: &[f64]| vec![-x[0]]),
            1.0,
        )
        .build()
        .unwrap()
    }

    fn quadratic_with_lyapunov(target: f64, lo: f64, hi: f64) -> Problem {
        let t = target;
        let clamp = target.clamp(lo, hi);
        let fmin = 0.5 * (clamp - t) * (clamp - t);
        Problem::builder(
            "quad",
            HyperRect::new(vec![lo], vec![hi]).unwrap(),
            Arc::new(move |x: &[f64]| vec![-(x[0] - t)]),
            (t - lo).abs().max((t - hi).abs()) + 1.0,
        )
        .objective(Arc::new(move |x: &[f64]| 0.5 * (x[0] - t) * (x[0] - t)))
        .lyapunov(
            Arc::new(move |x: &[f64]| 0.5 * (x[0] - t) * (x[0] - t) - fmin),
            Arc::new(move |x: &[f64]| vec![x[0] - t]),
        )
        .stationary(StationaryDescriptor::ExplicitPoints(vec![vec![clamp]]))
        .build()
        .unwrap()
    }

    #[test]
    fn euler_matches_exponential_decay() {
        let p = linear_decay();
        let ode = projected_euler(&p, &[1.0], 0.01, 1.0).unwrap();
        let exact = (-1.0f64).exp();
        let err = (ode.final_state()[0] - exact).abs();
        assert!(err < 2e-3, "error {err}");
        // first-order refinement: halving the step roughly halves the error
        let ode2 = projected_euler(&p, &[1.0], 0.005, 1.0).unwrap();
        let err2 = (ode2.final_state()[0] - exact).abs();
        let ratio = err2 / err;
        assert!((0.4..=0.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn euler_pinned_and_idle_cases() {
        // outward drift at the face: constant trajectory, correction == 1
        let p = Problem::builder(
            "pin",
            HyperRect::cube(1, 0.0, 1.0).unwrap(),
            Arc::new(|_: &[f64]| vec![1.0]),
            1.0,
        )
        .build()
        .unwrap();
        let ode = projected_euler(&p, &[1.0], 0.01, 0.5).unwrap();
        for s in &ode.states {
            assert_eq!(s[0], 1.0);
        }
        for z in &ode.cone_corrections {
            assert!((z[0] - 1.0).abs() < 1e-12);
        }
        assert!(cone_corrections_valid(&p, &ode).unwrap());

        // zero drift: constant trajectory, correction exactly zero
        let p0 = Problem::builder(
            "idle",
            HyperRect::cube(1, 0.0, 1.0).unwrap(),
            Arc::new(|_: &[f64]| vec![0.0]),
            1.0,
        )
        .build()
        .unwrap();
        let ode = projected_euler(&p0, &[0.3], 0.1, 1.0).unwrap();
        for z in &ode.cone_corrections {
            assert_eq!(z[0], 0.0);
        }
    }

    #[test]
    fn euler_rejects_bad_input() {
        let p = linear_decay();
        assert!(projected_euler(&p, &[2.0], 0.01, 1.0).is_err()); // outside box
        assert!(projected_euler(&p, &[0.0], 0.5, 0.1).is_err()); // h_ode > T
    }

    #[test]
    fn matched_step_zero_noise_comparison_is_exactly_zero() {
        let p = quadratic_with_lyapunov(0.8, 0.0, 1.0);
        let h = 0.01;
        let spec = RunSpec {
            x0: vec![0.2],
            n_steps: 150,
            ..RunSpec::new(
                &p,
                Algorithm::Rm,
                StepSchedule::table(vec![h; 150]).unwrap(),
                NoiseModel::none(),
            )
        };
        let traj = run(&spec).unwrap();
        let view = TrajectoryView::of(&traj);
        let sup = compare_sa_ode(&p, &view, 1, 1.0, h).unwrap();
        assert_eq!(sup, 0.0);
        // and from a shifted start as well
        let sup = compare_sa_ode(&p, &view, 40, 1.0, h).unwrap();
        assert_eq!(sup, 0.0);
    }

    #[test]
    fn lyapunov_rate_values() {
        let p = quadratic_with_lyapunov(0.5, 0.0, 1.0);
        // interior: rate = -(x - x*)^2
        let r = lyapunov_rate(&p, &[1.0]).unwrap();
        // at the face the drift points inward, so nothing is clipped
        assert!((r + 0.25).abs() < 1e-15);
        let r = lyapunov_rate(&p, &[0.75]).unwrap();
        assert!((r + 0.0625).abs() < 1e-15);

        // clamped problem: at the pinned face the tangential drift vanishes
        let p = quadratic_with_lyapunov(2.0, 0.0, 1.0);
        let r = lyapunov_rate(&p, &[1.0]).unwrap();
        assert_eq!(r, 0.0);

        let p_no_v = linear_decay();
        assert!(matches!(lyapunov_rate(&p_no_v, &[0.0]), Err(Error::Missing(_))));
    }

    #[test]
    fn lyapunov_rate_nonpositive_at_random_points() {
        use rand::Rng;
        let p = quadratic_with_lyapunov(2.0, 0.0, 1.0);
        let mut rng = crate::rng_for_seed(5);
        for _ in 0..1000 {
            let x = vec![rng.random_range(0.0..=1.0)];
            assert!(lyapunov_rate(&p, &x).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn stationarity_residual_drift_problems() {
        let p = quadratic_with_lyapunov(2.0, 0.0, 1.0);
        // pinned face point: tangential drift zero
        assert_eq!(stationarity_residual(&p, &[1.0]).unwrap(), 0.0);
        // interior: |h| = 1.5
        assert!((stationarity_residual(&p, &[0.5]).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn stationarity_residual_composite() {
        // f = (x-2)^2/2 with L1(1) on [-10, 10]: stationary exactly at 1
        let mut p = quadratic_with_lyapunov(2.0, -10.0, 10.0);
        p.set_penalty_for_tests(Penalty::l1(1.0).unwrap());
        assert_eq!(stationarity_residual(&p, &[1.0]).unwrap(), 0.0);
        assert!((stationarity_residual(&p, &[0.5]).unwrap() - 0.5).abs() < 1e-12);
        // at the kink the interval absorbs the gradient when |grad f| <= 1:
        // here grad f(0) = -2, so the residual is 1
        assert!((stationarity_residual(&p, &[0.0]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn composite_residual_consistent_with_tangential_form_at_faces() {
        // with the zero penalty, the composite residual must agree with the
        // tangential-drift residual, including at pinned face points
        let mut p = quadratic_with_lyapunov(2.0, 0.0, 1.0);
        p.set_penalty_for_tests(Penalty::Zero);
        assert_eq!(stationarity_residual(&p, &[1.0]).unwrap(), 0.0);
        let mut q = quadratic_with_lyapunov(2.0, 0.0, 1.0);
        q.set_penalty_for_tests(Penalty::Zero);
        let with_pen = stationarity_residual(&q, &[0.25]).unwrap();
        assert!((with_pen - 1.75).abs() < 1e-12);
    }

    #[test]
    fn distance_to_stationary_set() {
        let p = quadratic_with_lyapunov(2.0, 0.0, 1.0); // explicit point {1.0}
        assert!((dist_to_stationary(&p, &[0.4]).unwrap() - 0.6).abs() < 1e-15);
        assert_eq!(dist_to_stationary(&p, &[1.0]).unwrap(), 0.0);

        let r = linear_decay(); // residual-based by default
        let d = dist_to_stationary(&r, &[0.3]).unwrap();
        assert!((d - 0.3).abs() < 1e-15);
    }

    #[test]
    fn zero_noise_descent_along_euler() {
        for target in [0.5, 2.0] {
            let p = quadratic_with_lyapunov(target, 0.0, 1.0);
            let ode = projected_euler(&p, &[0.1], 0.01, 3.0).unwrap();
            let v = &p.lyapunov().unwrap().value;
            for pair in ode.states.windows(2) {
                assert!(v(&pair[1]) <= v(&pair[0]) + 1e-10);
            }
        }
    }
}
