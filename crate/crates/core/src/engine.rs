//! The projected iteration rules and trajectory recording.
//!
//! Three updates share one drift composition. With `q_n = h(x_n) + e_n + r_n`
//! and `v_n = x_n + gamma_n * q_n`:
//!
//! - `Rm`:     `x_{n+1} = proj_K(v_n)`, projection term `P_n = v_n - x_{n+1}`
//! - `ProxV1`: `x_{n+1} = prox_{gamma_n (g + indicator_K)}(v_n)`
//! - `ProxV2`: `x_{n+1} = proj_K(prox_{gamma_n g}(v_n))`
//!
//! For composite problems the drift is `h = -grad f`, so `v_n` is the noisy
//! gradient step; the noise is composed additively with the drift in all
//! three rules, which makes the prox rules with the zero penalty coincide
//! with `Rm` step for step on identical noise streams. For the prox rules
//! `P_n` stores the total displacement attributable to prox/projection,
//! `v_n - x_{n+1}`.
//!
//! Every step records `(n, t_n, gamma_n, x_{n+1}, e_n, r_n, h(x_n), P_n)`.
//! In `Rm` mode three structural facts hold and are checked by
//! [`verify_rm_trajectory`]: the recursion identity reconstructs `x_{n+1}`
//! to a few ulps, `P_n` lies in the normal cone at `x_{n+1}` exactly (the
//! projection residual belongs to the normal cone at the projected point,
//! which pins the membership index to `x_{n+1}`), and `|P_n|` never exceeds
//! the computed step length.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::geometry::{in_normal_cone, HyperRect};
use crate::prox::Penalty;
use crate::schedules::{NoiseModel, RPart, StepSchedule};
use crate::vecmath::{all_finite, check_dim, ulps_between};
use crate::{rng_for_seed, Error, Result, RunRng};

pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Lyapunov function `V` with its gradient, for descent diagnostics.
#[derive(Clone)]
pub struct Lyapunov {
    pub value: ScalarFn,
    pub grad: VectorFn,
}

/// Ground-truth description of the stationary set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum StationaryDescriptor {
    /// The stationary set is a known finite list of points.
    ExplicitPoints(Vec<Vec<f64>>),
    /// No explicit set; convergence is judged by a first-order residual
    /// falling below `tol` (a surrogate, not a metric distance).
    ResidualBased { tol: f64 },
}

/// A drift field on a box, with optional composite structure.
///
/// `drift_bound` is the constant `H` with `|h(x)| <= H` on the box; it is
/// sampled at construction (soft check) and feeds the diagnostic ceilings.
#[derive(Clone)]
pub struct Problem {
    id: String,
    bounds: HyperRect,
    drift: VectorFn,
    drift_bound: f64,
    objective: Option<ScalarFn>,
    penalty: Option<Penalty>,
    lyapunov: Option<Lyapunov>,
    stationary: StationaryDescriptor,
    warnings: Vec<String>,
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("id", &self.id)
            .field("dim", &self.bounds.dim())
            .field("drift_bound", &self.drift_bound)
            .field("has_objective", &self.objective.is_some())
            .field("penalty", &self.penalty)
            .field("stationary", &self.stationary)
            .finish_non_exhaustive()
    }
}

impl Problem {
    pub fn builder(
        id: impl Into<String>,
        bounds: HyperRect,
        drift: VectorFn,
        drift_bound: f64,
    ) -> ProblemBuilder {
        ProblemBuilder {
            id: id.into(),
            bounds,
            drift,
            drift_bound,
            objective: None,
            penalty: None,
            lyapunov: None,
            stationary: None,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn bounds(&self) -> &HyperRect {
        &self.bounds
    }

    /// Evaluates the drift `h` (equal to `-grad f` for composite problems).
    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        (self.drift)(x)
    }

    pub fn drift_bound(&self) -> f64 {
        self.drift_bound
    }

    pub fn objective(&self) -> Option<&ScalarFn> {
        self.objective.as_ref()
    }

    pub fn penalty(&self) -> Option<&Penalty> {
        self.penalty.as_ref()
    }

    pub fn lyapunov(&self) -> Option<&Lyapunov> {
        self.lyapunov.as_ref()
    }

    pub fn stationary(&self) -> &StationaryDescriptor {
        &self.stationary
    }

    /// Soft-check findings from construction (empty for well-posed problems).
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    #[cfg(test)]
    pub(crate) fn set_penalty_for_tests(&mut self, pen: Penalty) {
        self.penalty = Some(pen);
    }

    #[cfg(test)]
    pub(crate) fn set_drift_for_tests(&mut self, drift: VectorFn) {
        self.drift = drift;
    }
}

pub struct ProblemBuilder {
    id: String,
    bounds: HyperRect,
    drift: VectorFn,
    drift_bound: f64,
    objective: Option<ScalarFn>,
    penalty: Option<Penalty>,
    lyapunov: Option<Lyapunov>,
    stationary: Option<StationaryDescriptor>,
}

impl ProblemBuilder {
    pub fn objective(mut self, f: ScalarFn) -> Self {
        self.objective = Some(f);
        self
    }

    pub fn penalty(mut self, pen: Penalty) -> Self {
        self.penalty = Some(pen);
        self
    }

    pub fn lyapunov(mut self, value: ScalarFn, grad: VectorFn) -> Self {
        self.lyapunov = Some(Lyapunov { value, grad });
        self
    }

    pub fn stationary(mut self, s: StationaryDescriptor) -> Self {
        self.stationary = Some(s);
        self
    }

    /// Validates hard invariants and runs the construction soft checks:
    /// `|h| <= H` sampled at 10^4 points of the box, and (when an objective
    /// is present) central finite differences of `f` matching `-h` to 1e-4
    /// at 100 interior points. Violations become warnings, not errors.
    pub fn build(self) -> Result<Problem> {
        if !(self.drift_bound > 0.0 && self.drift_bound.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "drift bound H={} must be positive and finite",
                self.drift_bound
            )));
        }
        if let Some(pen) = &self.penalty {
            pen.validate()?;
        }
        let d = self.bounds.dim();
        let probe = (self.drift)(&self.bounds.center());
        check_dim(d, probe.len())?;
        if !all_finite(&probe) {
            return Err(Error::InvalidParameter(
                "drift is non-finite at the box center".into(),
            ));
        }

        let mut warnings = Vec::new();
        // fixed internal stream; these checks are diagnostics, not run state
        let mut rng = rng_for_seed(0x5EED_C0DE);
        let slack = 1e-9 * (1.0 + self.drift_bound);
        let mut worst = 0.0f64;
        for _ in 0..10_000 {
            let x = self.bounds.sample_uniform(&mut rng);
            let h = (self.drift)(&x);
            let norm = h.iter().map(|v| v * v).sum::<f64>().sqrt();
            worst = worst.max(norm);
        }
        if worst > self.drift_bound + slack {
            warnings.push(format!(
                "sampled |h| reaches {worst:.6}, above the declared bound H={}",
                self.drift_bound
            ));
        }

        if let Some(f) = &self.objective {
            let mut max_dev = 0.0f64;
            for _ in 0..100 {
                let mut x = self.bounds.sample_uniform(&mut rng);
                // keep the finite-difference stencil inside the box
                for i in 0..d {
                    let (a, b) = (self.bounds.lower()[i], self.bounds.upper()[i]);
                    let margin = 1e-5 * (b - a);
                    x[i] = x[i].clamp(a + margin, b - margin);
                }
                let h = (self.drift)(&x);
                for i in 0..d {
                    let step = 1e-6 * (1.0 + x[i].abs());
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += step;
                    xm[i] -= step;
                    let fd = (f(&xp) - f(&xm)) / (2.0 * step);
                    max_dev = max_dev.max((fd + h[i]).abs());
                }
            }
            if max_dev > 1e-4 {
                warnings.push(format!(
                    "finite differences of f deviate from -h by up to {max_dev:.2e}"
                ));
            }
        }

        Ok(Problem {
            id: self.id,
            bounds: self.bounds,
            drift: self.drift,
            drift_bound: self.drift_bound,
            objective: self.objective,
            penalty: self.penalty,
            lyapunov: self.lyapunov,
            stationary: self
                .stationary
                .unwrap_or(StationaryDescriptor::ResidualBased { tol: 1e-6 }),
            warnings,
        })
    }
}

/// Which update rule drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "rm")]
    Rm,
    #[serde(rename = "prox1")]
    ProxV1,
    #[serde(rename = "prox2")]
    ProxV2,
}

/// Which steps are kept in the trajectory. Aggregates are always computed
/// over all steps; thinning never applies inside an explicitly requested
/// range, since interpolant construction needs contiguous records.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RecordPolicy {
    Full,
    /// Keep steps `1, 1+stride, 1+2*stride, ...` and the final step.
    Thin { stride: u64 },
    /// Keep the first `head` and last `tail` steps.
    Window { head: u64, tail: u64 },
    /// Keep the (inclusive) step ranges, recorded contiguously.
    Ranges { ranges: Vec<(u64, u64)> },
}

impl RecordPolicy {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Thin { stride } if *stride == 0 => {
                Err(Error::InvalidParameter("thin stride must be >= 1".into()))
            }
            Self::Ranges { ranges } => {
                for (lo, hi) in ranges {
                    if lo > hi || *lo == 0 {
                        return Err(Error::InvalidParameter(format!(
                            "bad record range ({lo}, {hi}); need 1 <= lo <= hi"
                        )));
                    }
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn should_record(&self, n: u64, n_steps: u64) -> bool {
        match self {
            Self::Full => true,
            Self::Thin { stride } => (n - 1) % stride == 0 || n == n_steps,
            Self::Window { head, tail } => n <= *head || n + tail > n_steps,
            Self::Ranges { ranges } => ranges.iter().any(|(lo, hi)| *lo <= n && n <= *hi),
        }
    }
}

/// Complete state of one step `n`: the post-update iterate `x_{n+1}` plus
/// everything that produced it. `x_n` is recovered from the previous record
/// (or the stored initial point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterateRecord {
    pub n: u64,
    pub t: f64,
    pub gamma: f64,
    /// Post-update iterate `x_{n+1}`; always feasible.
    pub x: Vec<f64>,
    pub e: Vec<f64>,
    pub r: Vec<f64>,
    /// Drift evaluated at the pre-update iterate, `h(x_n)`.
    pub hval: Vec<f64>,
    /// Projection (or prox displacement) term `P_n`.
    pub proj: Vec<f64>,
}

impl IterateRecord {
    /// True when some coordinate was actually projected/displaced.
    pub fn projected(&self) -> bool {
        self.proj.iter().any(|p| *p != 0.0)
    }
}

/// Run provenance and configuration, serialized into summaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub problem_id: String,
    pub dim: usize,
    pub algorithm: Algorithm,
    pub schedule: StepSchedule,
    pub noise: NoiseModel,
    pub seed: u64,
    pub n_steps: u64,
    /// The projected initial point `x_1 = proj_K(x_0)`.
    pub x_init: Vec<f64>,
    pub record: RecordPolicy,
    pub tail_window: u64,
}

/// Aggregates computed over every step regardless of the record policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunAggregates {
    pub final_x: Vec<f64>,
    pub t_final: f64,
    /// Steps with a nontrivial projection term, over the whole run.
    pub proj_steps: u64,
    /// Same count restricted to the last `tail_window` steps.
    pub proj_steps_tail: u64,
    pub tail_window: u64,
}

impl RunAggregates {
    pub fn proj_fraction_tail(&self) -> f64 {
        if self.tail_window == 0 {
            0.0
        } else {
            self.proj_steps_tail as f64 / self.tail_window as f64
        }
    }
}

/// A recorded run: metadata, the kept records (ordered, strictly increasing
/// step and time), and whole-run aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub meta: RunMeta,
    pub records: Vec<IterateRecord>,
    pub aggregates: RunAggregates,
}

/// Everything needed to launch a run.
#[derive(Clone)]
pub struct RunSpec<'a> {
    pub problem: &'a Problem,
    pub algorithm: Algorithm,
    pub schedule: StepSchedule,
    pub noise: NoiseModel,
    /// Initial point; projected onto the box before step 1.
    pub x0: Vec<f64>,
    pub n_steps: u64,
    pub seed: u64,
    pub record: RecordPolicy,
    /// Window length for the tail projection-count aggregate (clamped to
    /// `n_steps`).
    pub tail_window: u64,
}

impl<'a> RunSpec<'a> {
    pub fn new(
        problem: &'a Problem,
        algorithm: Algorithm,
        schedule: StepSchedule,
        noise: NoiseModel,
    ) -> Self {
        Self {
            problem,
            algorithm,
            schedule,
            noise,
            x0: problem.bounds().center(),
            n_steps: 1000,
            seed: 0,
            record: RecordPolicy::Full,
            tail_window: 0,
        }
    }
}

/// One step of the chosen rule. The arithmetic below is the single place the
/// update is evaluated, so reconstruction in the verifier is bit-identical.
fn step_core(
    problem: &Problem,
    algorithm: Algorithm,
    x: &[f64],
    n: u64,
    gamma: f64,
    t: f64,
    e: Vec<f64>,
    r: Vec<f64>,
) -> Result<IterateRecord> {
    let d = x.len();
    let hval = problem.drift(x);
    if hval.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: hval.len() });
    }
    if !all_finite(&hval) {
        return Err(Error::NonFinite { step: n, what: "drift value" });
    }
    if !all_finite(&e) || !all_finite(&r) {
        return Err(Error::NonFinite { step: n, what: "noise sample" });
    }

    // v_i = x_i + gamma * ((h_i + e_i) + r_i), evaluated in exactly this order
    let mut v = Vec::with_capacity(d);
    for i in 0..d {
        let q = (hval[i] + e[i]) + r[i];
        v.push(x[i] + gamma * q);
    }
    if !all_finite(&v) {
        return Err(Error::NonFinite { step: n, what: "pre-projection point" });
    }

    let x_next = match algorithm {
        Algorithm::Rm => problem.bounds().project(&v)?,
        Algorithm::ProxV1 => {
            let pen = problem
                .penalty()
                .ok_or(Error::Missing("penalty (required by prox updates)"))?;
            pen.prox_box(&v, gamma, problem.bounds())?
        }
        Algorithm::ProxV2 => {
            let pen = problem
                .penalty()
                .ok_or(Error::Missing("penalty (required by prox updates)"))?;
            let y = pen.prox(&v, gamma);
            problem.bounds().project(&y)?
        }
    };
    let proj: Vec<f64> = v.iter().zip(&x_next).map(|(vi, xi)| vi - xi).collect();

    Ok(IterateRecord { n, t, gamma, x: x_next, e, r, hval, proj })
}

fn check_prox_preconditions(problem: &Problem, algorithm: Algorithm) -> Result<()> {
    if matches!(algorithm, Algorithm::ProxV1 | Algorithm::ProxV2) {
        if problem.penalty().is_none() {
            return Err(Error::Missing("penalty (required by prox updates)"));
        }
        if problem.objective().is_none() {
            return Err(Error::Missing("objective f (prox updates assume h = -grad f)"));
        }
    }
    Ok(())
}

/// One projected Robbins-Monro step from `x_n`. Standalone use recomputes
/// `t_n` from the schedule (O(n)); [`run`] accumulates it instead.
pub fn step_rm(
    problem: &Problem,
    x_n: &[f64],
    n: u64,
    schedule: &StepSchedule,
    noise: &NoiseModel,
    rng: &mut RunRng,
) -> Result<IterateRecord> {
    step_any(problem, Algorithm::Rm, x_n, n, schedule, noise, rng)
}

/// One step of the box-constrained proximal rule
/// `x_k = prox_{gamma (g + indicator_K)}(v)`.
pub fn step_prox_v1(
    problem: &Problem,
    x_prev: &[f64],
    k: u64,
    schedule: &StepSchedule,
    noise: &NoiseModel,
    rng: &mut RunRng,
) -> Result<IterateRecord> {
    step_any(problem, Algorithm::ProxV1, x_prev, k, schedule, noise, rng)
}

/// One step of the projected proximal rule `x_k = proj_K(prox_{gamma g}(v))`.
pub fn step_prox_v2(
    problem: &Problem,
    x_prev: &[f64],
    k: u64,
    schedule: &StepSchedule,
    noise: &NoiseModel,
    rng: &mut RunRng,
) -> Result<IterateRecord> {
    step_any(problem, Algorithm::ProxV2, x_prev, k, schedule, noise, rng)
}

fn step_any(
    problem: &Problem,
    algorithm: Algorithm,
    x: &[f64],
    n: u64,
    schedule: &StepSchedule,
    noise: &NoiseModel,
    rng: &mut RunRng,
) -> Result<IterateRecord> {
    check_dim(problem.dim(), x.len())?;
    check_prox_preconditions(problem, algorithm)?;
    let gamma = schedule.gamma(n)?;
    let t = schedule.cumulative_time(n)?;
    let (e, r) = noise.sample(n, x, rng);
    step_core(problem, algorithm, x, n, gamma, t, e, r)
}

/// Runs the full iteration. Deterministic given the seed: the same spec and
/// seed reproduce the trajectory bit for bit.
pub fn run(spec: &RunSpec) -> Result<Trajectory> {
    let problem = spec.problem;
    if spec.n_steps == 0 {
        return Err(Error::InvalidParameter("n_steps must be >= 1".into()));
    }
    spec.schedule.validate()?;
    spec.noise.validate()?;
    spec.record.validate()?;
    check_dim(problem.dim(), spec.x0.len())?;
    check_prox_preconditions(problem, spec.algorithm)?;
    if let RPart::PowerBias { c, .. } = &spec.noise.r {
        check_dim(problem.dim(), c.len())?;
    }

    let mut rng = rng_for_seed(spec.seed);
    let x_init = problem.bounds().project(&spec.x0)?;
    let tail_window = spec.tail_window.min(spec.n_steps);
    let tail_start = spec.n_steps - tail_window + 1;

    let mut x = x_init.clone();
    let mut t = 0.0;
    let mut records = Vec::new();
    let mut proj_steps = 0u64;
    let mut proj_steps_tail = 0u64;

    for n in 1..=spec.n_steps {
        let gamma = spec.schedule.gamma(n)?;
        t += gamma;
        let (e, r) = spec.noise.sample(n, &x, &mut rng);
        let rec = step_core(problem, spec.algorithm, &x, n, gamma, t, e, r)?;
        if rec.projected() {
            proj_steps += 1;
            if tail_window > 0 && n >= tail_start {
                proj_steps_tail += 1;
            }
        }
        if spec.record.should_record(n, spec.n_steps) {
            x = rec.x.clone();
            records.push(rec);
        } else {
            x = rec.x;
        }
    }

    Ok(Trajectory {
        meta: RunMeta {
            problem_id: problem.id().to_string(),
            dim: problem.dim(),
            algorithm: spec.algorithm,
            schedule: spec.schedule.clone(),
            noise: spec.noise.clone(),
            seed: spec.seed,
            n_steps: spec.n_steps,
            x_init,
            record: spec.record.clone(),
            tail_window,
        },
        records,
        aggregates: RunAggregates {
            final_x: x,
            t_final: t,
            proj_steps,
            proj_steps_tail,
            tail_window,
        },
    })
}

/// Outcome of the structural checks on a recorded RM trajectory.
#[derive(Debug, Clone, Default)]
pub struct RmCheckReport {
    pub steps_checked: u64,
    /// Worst per-coordinate reconstruction distance, in ulps.
    pub max_recursion_ulps: u64,
    pub feasibility_violations: u64,
    pub cone_violations: u64,
    /// Violations of `|P_n| <= |computed step|`, per coordinate or in norm.
    pub proj_bound_violations: u64,
}

impl RmCheckReport {
    pub fn ok(&self, max_ulps: u64) -> bool {
        self.steps_checked > 0
            && self.max_recursion_ulps <= max_ulps
            && self.feasibility_violations == 0
            && self.cone_violations == 0
            && self.proj_bound_violations == 0
    }
}

/// Checks, for every recorded step whose predecessor state is available:
///
/// 1. recursion identity: `x_n + gamma_n (h + e + r) - P_n` reproduces the
///    stored `x_{n+1}` (reported in ulps per coordinate);
/// 2. feasibility: the stored iterate lies in the box exactly;
/// 3. cone membership: `P_n` lies in the normal cone at `x_{n+1}` exactly;
/// 4. projection-size bound: `|P_n| <= |v_n - x_n|` coordinate-wise and in
///    Euclidean norm, where `v_n` is the pre-projection point recomputed
///    bit-identically from the record. This is the float-exact form of
///    `dist(v, K) <= dist(v, x_n)` for the step as actually taken.
pub fn verify_rm_trajectory(problem: &Problem, traj: &Trajectory) -> Result<RmCheckReport> {
    if traj.meta.algorithm != Algorithm::Rm {
        return Err(Error::InvalidParameter(
            "step-identity checks apply to RM trajectories".into(),
        ));
    }
    let bounds = problem.bounds();
    let mut report = RmCheckReport::default();
    for (idx, rec) in traj.records.iter().enumerate() {
        // locate x_n: previous record, or the initial point for n == 1
        let x_prev: &[f64] = if rec.n == 1 {
            &traj.meta.x_init
        } else if idx > 0 && traj.records[idx - 1].n == rec.n - 1 {
            &traj.records[idx - 1].x
        } else {
            continue;
        };
        report.steps_checked += 1;

        if !bounds.contains(&rec.x) {
            report.feasibility_violations += 1;
        }

        let sig = bounds.face_signature_default(&rec.x)?;
        if !in_normal_cone(&rec.proj, &sig)? {
            report.cone_violations += 1;
        }

        let mut step_sq = 0.0f64;
        let mut proj_sq = 0.0f64;
        for i in 0..rec.x.len() {
            // identical expression to the engine's step arithmetic
            let q = (rec.hval[i] + rec.e[i]) + rec.r[i];
            let v = x_prev[i] + rec.gamma * q;
            let recon = v - rec.proj[i];
            report.max_recursion_ulps =
                report.max_recursion_ulps.max(ulps_between(recon, rec.x[i]));
            let step = v - x_prev[i];
            if rec.proj[i].abs() > step.abs() {
                report.proj_bound_violations += 1;
            }
            step_sq += step * step;
            proj_sq += rec.proj[i] * rec.proj[i];
        }
        if proj_sq.sqrt() > step_sq.sqrt() {
            report.proj_bound_violations += 1;
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::EPart;

    fn constant_drift(dim: usize, c: Vec<f64>) -> Problem {
        Problem::builder(
            "const",
            HyperRect::cube(dim, 0.0, 1.0).unwrap(),
            Arc::new(move |_: &[f64]| c.clone()),
            10.0,
        )
        .build()
        .unwrap()
    }

    fn quadratic_1d(target: f64, lo: f64, hi: f64) -> Problem {
        Problem::builder(
            "quad",
            HyperRect::new(vec![lo], vec![hi]).unwrap(),
            Arc::new(move |x: &[f64]| vec![-(x[0] - target)]),
            (target - lo).abs().max((target - hi).abs()) + 1.0,
        )
        .objective(Arc::new(move |x: &[f64]| 0.5 * (x[0] - target) * (x[0] - target)))
        .build()
        .unwrap()
    }

    #[test]
    fn rm_step_examples() {
        let p = constant_drift(1, vec![1.0]);
        let sched = StepSchedule::table(vec![0.5]).unwrap();
        let mut rng = rng_for_seed(0);
        // overshoot clipped at the face
        let rec = step_rm(&p, &[0.9], 1, &sched, &NoiseModel::none(), &mut rng).unwrap();
        assert_eq!(rec.x, vec![1.0]);
        assert!((rec.proj[0] - 0.4).abs() < 1e-12);
        // interior step, trivial projection
        let sched = StepSchedule::table(vec![0.1]).unwrap();
        let rec = step_rm(&p, &[0.5], 1, &sched, &NoiseModel::none(), &mut rng).unwrap();
        assert!((rec.x[0] - 0.6).abs() < 1e-15);
        assert_eq!(rec.proj, vec![0.0]);
        // zero drift is a fixed point
        let p0 = constant_drift(1, vec![0.0]);
        let rec = step_rm(&p0, &[0.3], 1, &sched, &NoiseModel::none(), &mut rng).unwrap();
        assert_eq!(rec.x, vec![0.3]);
        assert_eq!(rec.proj, vec![0.0]);
    }

    #[test]
    fn prox_step_examples() {
        // zero penalty reduces to the projected gradient step
        let mut p = quadratic_1d(0.0, 0.0, 1.0);
        p.set_penalty_for_tests(Penalty::Zero);
        p.set_drift_for_tests(Arc::new(|_| vec![1.0])); // grad f == -1
        let sched = StepSchedule::table(vec![0.5]).unwrap();
        let mut rng = rng_for_seed(0);
        let rec = step_prox_v1(&p, &[0.9], 1, &sched, &NoiseModel::none(), &mut rng).unwrap();
        assert_eq!(rec.x, vec![1.0]);

        // pure prox behavior: grad f == 0, L1 threshold pulls toward zero
        let mut p = quadratic_1d(0.0, 0.0, 1.0);
        p.set_penalty_for_tests(Penalty::l1(1.0).unwrap());
        p.set_drift_for_tests(Arc::new(|_| vec![0.0]));
        let sched = StepSchedule::table(vec![0.3]).unwrap();
        let rec = step_prox_v1(&p, &[0.5], 1, &sched, &NoiseModel::none(), &mut rng).unwrap();
        assert!((rec.x[0] - 0.2).abs() < 1e-12);

        // stationarity of the composite minimum
        let mut p = quadratic_1d(0.5, 0.0, 1.0);
        p.set_penalty_for_tests(Penalty::Zero);
        let rec = step_prox_v1(&p, &[0.5], 1, &sched, &NoiseModel::none(), &mut rng).unwrap();
        assert_eq!(rec.x, vec![0.5]);

        // prox-v2: prox then clamp; v = 0.95 + 0.5*1.05 = 1.475,
        // soft threshold by 0.5 gives 0.975, clamp keeps it
        let mut p = quadratic_1d(2.0, 0.0, 1.0);
        p.set_penalty_for_tests(Penalty::l1(1.0).unwrap());
        let rec = step_prox_v2(
            &p,
            &[0.95],
            1,
            &StepSchedule::table(vec![0.5]).unwrap(),
            &NoiseModel::none(),
            &mut rng,
        )
        .unwrap();
        assert!((rec.x[0] - 0.975).abs() < 1e-12);
    }

    #[test]
    fn prox_requires_penalty_and_objective() {
        let p = constant_drift(1, vec![1.0]); // no penalty, no objective
        let sched = StepSchedule::table(vec![0.5]).unwrap();
        let mut rng = rng_for_seed(0);
        assert!(matches!(
            step_prox_v1(&p, &[0.5], 1, &sched, &NoiseModel::none(), &mut rng),
            Err(Error::Missing(_))
        ));
    }

    #[test]
    fn run_single_step_equals_step_rm() {
        let p = constant_drift(2, vec![0.3, -0.2]);
        let sched = StepSchedule::polynomial(0.5, 1.0).unwrap();
        let noise = NoiseModel::new(EPart::GaussianIid { sigma: 0.05 }, RPart::None).unwrap();
        let spec = RunSpec {
            x0: vec![0.5, 0.5],
            n_steps: 1,
            seed: 9,
            tail_window: 1,
            ..RunSpec::new(&p, Algorithm::Rm, sched.clone(), noise.clone())
        };
        let traj = run(&spec).unwrap();
        let mut rng = rng_for_seed(9);
        let rec = step_rm(&p, &[0.5, 0.5], 1, &sched, &noise, &mut rng).unwrap();
        assert_eq!(traj.records[0], rec);
    }

    #[test]
    fn run_is_deterministic() {
        let p = quadratic_1d(2.0, 0.0, 1.0);
        let spec = RunSpec {
            x0: vec![0.0],
            n_steps: 500,
            seed: 4,
            ..RunSpec::new(
                &p,
                Algorithm::Rm,
                StepSchedule::polynomial(1.0, 1.0).unwrap(),
                NoiseModel::gaussian(0.1).unwrap(),
            )
        };
        let a = run(&spec).unwrap();
        let b = run(&spec).unwrap();
        assert_eq!(a, b);
        for (ra, rb) in a.records.iter().zip(&b.records) {
            for (xa, xb) in ra.x.iter().zip(&rb.x) {
                assert_eq!(xa.to_bits(), xb.to_bits());
            }
        }
    }

    #[test]
    fn pull_toward_exterior_target_pins_at_face() {
        // h(x) = -(x - 2): the iterates climb monotonically, hit the face,
        // and from then on P_n = gamma_n * h(1) = gamma_n.
        let p = quadratic_1d(2.0, 0.0, 1.0);
        let spec = RunSpec {
            x0: vec![0.0],
            n_steps: 20,
            ..RunSpec::new(
                &p,
                Algorithm::Rm,
                StepSchedule::polynomial(1.0, 1.0).unwrap(),
                NoiseModel::none(),
            )
        };
        let traj = run(&spec).unwrap();
        let mut reached = None;
        let mut prev = 0.0;
        for rec in &traj.records {
            assert!(rec.x[0] >= prev);
            prev = rec.x[0];
            if rec.x[0] == 1.0 && reached.is_none() {
                reached = Some(rec.n);
            }
        }
        let reached = reached.expect("face not reached within 20 steps");
        assert!(reached <= 20);
        for rec in traj.records.iter().filter(|r| r.n > reached) {
            assert_eq!(rec.x, vec![1.0]);
            assert!((rec.proj[0] - rec.gamma).abs() <= 1e-15);
        }
    }

    #[test]
    fn zero_penalty_prox_rules_match_rm_bitwise() {
        let mut p = quadratic_1d(2.0, 0.0, 1.0);
        p.set_penalty_for_tests(Penalty::Zero);
        let sched = StepSchedule::polynomial(1.0, 1.0).unwrap();
        let noise = NoiseModel::gaussian(0.1).unwrap();
        let mk = |alg| RunSpec {
            x0: vec![0.2],
            n_steps: 300,
            seed: 11,
            ..RunSpec::new(&p, alg, sched.clone(), noise.clone())
        };
        let rm = run(&mk(Algorithm::Rm)).unwrap();
        let v1 = run(&mk(Algorithm::ProxV1)).unwrap();
        let v2 = run(&mk(Algorithm::ProxV2)).unwrap();
        for ((a, b), c) in rm.records.iter().zip(&v1.records).zip(&v2.records) {
            assert_eq!(a.x[0].to_bits(), b.x[0].to_bits());
            assert_eq!(a.x[0].to_bits(), c.x[0].to_bits());
            assert_eq!(a.proj[0].to_bits(), b.proj[0].to_bits());
            assert_eq!(a.proj[0].to_bits(), c.proj[0].to_bits());
        }
    }

    #[test]
    fn interior_zero_noise_run_is_unconstrained_euler() {
        let p = quadratic_1d(0.5, 0.0, 1.0);
        let sched = StepSchedule::polynomial(0.5, 1.0).unwrap();
        let spec = RunSpec {
            x0: vec![0.1],
            n_steps: 50,
            ..RunSpec::new(&p, Algorithm::Rm, sched.clone(), NoiseModel::none())
        };
        let traj = run(&spec).unwrap();
        let mut x = 0.1f64;
        for rec in &traj.records {
            assert_eq!(rec.proj, vec![0.0]);
            let q = (-(x - 0.5) + 0.0) + 0.0;
            x += rec.gamma * q;
            assert_eq!(rec.x[0].to_bits(), x.to_bits());
        }
    }

    #[test]
    fn non_finite_drift_aborts_with_step_index() {
        let p = Problem::builder(
            "bad",
            HyperRect::cube(1, 0.0, 1.0).unwrap(),
            Arc::new(|x: &[f64]| vec![if x[0] > 0.4 { f64::NAN } else { 1.0 }]),
            2.0,
        )
        .build();
        // the center probe at 0.5 already hits the NaN region
        assert!(p.is_err());

        let p = Problem::builder(
            "bad2",
            HyperRect::cube(1, 0.0, 1.0).unwrap(),
            Arc::new(|x: &[f64]| vec![if x[0] > 0.6 { f64::NAN } else { 1.0 }]),
            2.0,
        )
        .build()
        .unwrap();
        let spec = RunSpec {
            x0: vec![0.0],
            n_steps: 100,
            ..RunSpec::new(
                &p,
                Algorithm::Rm,
                StepSchedule::table(vec![0.3; 100]).unwrap(),
                NoiseModel::none(),
            )
        };
        // iterates 0.0, 0.3, 0.6 stay finite; the drift at 0.9 is hit at step 4
        match run(&spec) {
            Err(Error::NonFinite { step, .. }) => assert_eq!(step, 4),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn verifier_accepts_noisy_clamped_run() {
        let p = quadratic_1d(2.0, 0.0, 1.0);
        let spec = RunSpec {
            x0: vec![0.0],
            n_steps: 5_000,
            seed: 3,
            ..RunSpec::new(
                &p,
                Algorithm::Rm,
                StepSchedule::polynomial(1.0, 1.0).unwrap(),
                NoiseModel::gaussian(0.1).unwrap(),
            )
        };
        let traj = run(&spec).unwrap();
        let report = verify_rm_trajectory(&p, &traj).unwrap();
        assert_eq!(report.steps_checked, 5_000);
        assert!(report.ok(4), "{report:?}");
    }

    #[test]
    fn record_policies_select_expected_steps() {
        let p = constant_drift(1, vec![0.0]);
        let mk = |record| RunSpec {
            x0: vec![0.5],
            n_steps: 100,
            record,
            ..RunSpec::new(
                &p,
                Algorithm::Rm,
                StepSchedule::polynomial(1.0, 1.0).unwrap(),
                NoiseModel::none(),
            )
        };
        let full = run(&mk(RecordPolicy::Full)).unwrap();
        assert_eq!(full.records.len(), 100);
        let thin = run(&mk(RecordPolicy::Thin { stride: 10 })).unwrap();
        let ns: Vec<u64> = thin.records.iter().map(|r| r.n).collect();
        assert!(ns.contains(&1) && ns.contains(&91) && ns.contains(&100));
        let win = run(&mk(RecordPolicy::Window { head: 3, tail: 2 })).unwrap();
        let ns: Vec<u64> = win.records.iter().map(|r| r.n).collect();
        assert_eq!(ns, vec![1, 2, 3, 99, 100]);
        let ranges = run(&mk(RecordPolicy::Ranges { ranges: vec![(10, 12), (50, 51)] })).unwrap();
        let ns: Vec<u64> = ranges.records.iter().map(|r| r.n).collect();
        assert_eq!(ns, vec![10, 11, 12, 50, 51]);
    }

    #[test]
    fn aggregates_count_projections() {
        let p = constant_drift(1, vec![1.0]);
        let spec = RunSpec {
            x0: vec![0.0],
            n_steps: 40,
            tail_window: 10,
            record: RecordPolicy::Window { head: 0, tail: 1 },
            ..RunSpec::new(
                &p,
                Algorithm::Rm,
                StepSchedule::table(vec![0.3; 40]).unwrap(),
                NoiseModel::none(),
            )
        };
        let traj = run(&spec).unwrap();
        // x climbs 0.3 per step and is clipped from step 4 onward
        assert_eq!(traj.aggregates.proj_steps, 37);
        assert_eq!(traj.aggregates.proj_steps_tail, 10);
        assert_eq!(traj.aggregates.proj_fraction_tail(), 1.0);
        assert_eq!(traj.aggregates.final_x, vec![1.0]);
    }
}
