//! Trajectory statistics for the ODE-method objects.
//!
//! A recorded run induces two piecewise-constant processes on the time scale
//! `t_n = sum_{k<=n} gamma_k`:
//!
//! - the state interpolant `X` taking value `x_k` on `[t_{k-1}, t_k)`, and
//! - the projection accumulation `Z` whose jump at `t_k` is `P_k`, so that
//!   the increments of `X` and `Z` across the same boundary refer to the
//!   same step and `X(t) - X(0) - int h(X) + Z(t) - Z(0)` telescopes to the
//!   accumulated noise `sum gamma_k (e_k + r_k)` exactly.
//!
//! Shifted processes `X_N(t) = X(t + t_{N-1})` probe the tail behavior. The
//! statistics here are the finite-sample renditions of the convergence
//! theory: window partial sums (small window sums of increments are
//! equivalent to equicontinuity), moduli of continuity over `[0, T]`,
//! difference-quotient estimates of the Lipschitz constant of `Z` against
//! the `(H + R) * d` ceiling, and the integral identity residual.
//!
//! Vector statistics are computed per coordinate and aggregated by the sum
//! of per-coordinate absolute values, the same aggregation the projection
//! analysis uses, so reported numbers are comparable to the theoretical
//! constants. All suprema are evaluated on the breakpoint grid, which is
//! exact for piecewise-constant processes.
//!
//! The partial-sum and integral statistics presuppose the RM decomposition
//! of the increments (`x_{k+1} - x_k = gamma_k (h + e + r) - P_k`); for prox
//! trajectories `P` is a prox displacement and those two statistics lose
//! their interpretation.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::engine::{IterateRecord, Trajectory};
use crate::{Error, Result};

/// Statistics below which a trend comparison counts as converged-at-zero.
pub const CONVERGED_FLOOR: f64 = 1e-12;

/// Read-only access to an ordered record slice, plus the initial point when
/// known (required to shift from `N = 1`).
#[derive(Debug, Clone, Copy)]
pub struct TrajectoryView<'a> {
    records: &'a [IterateRecord],
    x_init: Option<&'a [f64]>,
}

impl<'a> TrajectoryView<'a> {
    pub fn new(records: &'a [IterateRecord], x_init: Option<&'a [f64]>) -> Self {
        Self { records, x_init }
    }

    pub fn of(traj: &'a Trajectory) -> Self {
        Self { records: &traj.records, x_init: Some(&traj.meta.x_init) }
    }

    pub fn records(&self) -> &'a [IterateRecord] {
        self.records
    }

    /// The maximal contiguous block of steps `N, N+1, ...` together with the
    /// pre-step state `x_N` and time `t_{N-1}`.
    fn window_from(&self, n_shift: u64) -> Result<Window<'a>> {
        if n_shift == 0 {
            return Err(Error::ZeroStepIndex);
        }
        let start = self
            .records
            .binary_search_by(|r| r.n.cmp(&n_shift))
            .map_err(|_| Error::WindowNotCovered(format!("step {n_shift} is not recorded")))?;
        // x_N and t_{N-1} come from record N-1, or from the initial point
        let (x_prev, t_prev) = if n_shift == 1 {
            let x0 = self.x_init.ok_or(Error::WindowNotCovered(
                "shift 1 needs the initial point, which this view does not carry".into(),
            ))?;
            (x0, 0.0)
        } else {
            if start == 0 || self.records[start - 1].n != n_shift - 1 {
                return Err(Error::WindowNotCovered(format!(
                    "record {} (pre-state of step {n_shift}) is not recorded",
                    n_shift - 1
                )));
            }
            let prev = &self.records[start - 1];
            (prev.x.as_slice(), prev.t)
        };
        let mut end = start;
        while end + 1 < self.records.len() && self.records[end + 1].n == self.records[end].n + 1 {
            end += 1;
        }
        Ok(Window { n_shift, x_prev, t_prev, recs: &self.records[start..=end] })
    }
}

/// Contiguous steps `N..=M` with their pre-state. Local cell `c` of the
/// shifted process covers `[B[c], B[c+1])` with `B[c] = t_{N+c-1} - t_{N-1}`.
struct Window<'a> {
    n_shift: u64,
    x_prev: &'a [f64],
    t_prev: f64,
    recs: &'a [IterateRecord],
}

impl<'a> Window<'a> {
    fn len(&self) -> usize {
        self.recs.len()
    }

    fn dim(&self) -> usize {
        self.x_prev.len()
    }

    /// Local breakpoints `B[0..=L]`, `B[0] = 0`.
    fn breakpoints(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.len() + 1);
        b.push(0.0);
        for r in self.recs {
            b.push(r.t - self.t_prev);
        }
        b
    }

    /// State values per cell: `V[c] = x_{N+c}`.
    fn state_values(&self) -> Vec<&'a [f64]> {
        let mut v = Vec::with_capacity(self.len() + 1);
        v.push(self.x_prev);
        for r in self.recs {
            v.push(r.x.as_slice());
        }
        v
    }

    /// Projection prefix sums `U[c] = sum_{k=N}^{N+c-1} P_k`, `U[0] = 0`.
    fn proj_prefix(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut u = Vec::with_capacity(self.len() + 1);
        u.push(vec![0.0; d]);
        for r in self.recs {
            let last = u.last().unwrap();
            let next: Vec<f64> = last.iter().zip(&r.proj).map(|(a, p)| a + p).collect();
            u.push(next);
        }
        u
    }

    /// Drift quadrature prefixes `Q[c] = sum_{k=N}^{N+c-1} gamma_k h(x_k)`,
    /// exact cell-by-cell quadrature of the piecewise-constant integrand.
    fn drift_quadrature(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let mut q = Vec::with_capacity(self.len() + 1);
        q.push(vec![0.0; d]);
        for r in self.recs {
            let last = q.last().unwrap();
            let next: Vec<f64> =
                last.iter().zip(&r.hval).map(|(a, h)| a + r.gamma * h).collect();
            q.push(next);
        }
        q
    }

    /// Largest cell index whose start lies within local `[0, T]`; errors if
    /// the breakpoints do not reach `T`.
    fn cell_horizon(&self, b: &[f64], t_span: f64) -> Result<usize> {
        if !(t_span > 0.0) {
            return Err(Error::InvalidParameter(format!("T={t_span} must be positive")));
        }
        let last = *b.last().unwrap();
        if last < t_span {
            return Err(Error::WindowNotCovered(format!(
                "records from step {} cover {last:.6} units of time, need {t_span}",
                self.n_shift
            )));
        }
        Ok(b.partition_point(|x| *x <= t_span) - 1)
    }
}

/// Which process an interpolant exposes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterpolantKind {
    /// The state process `X_N`.
    State,
    /// The projection accumulation `Z_N`, relative to the window start
    /// (`Z_N(0) = 0`; only differences of `Z` are meaningful).
    ProjSum,
}

/// Piecewise-constant shifted process built from a contiguous record block.
/// Evaluation is an exact cell lookup on the recorded time grid; times
/// outside the covered range are errors, never extrapolation.
pub struct Interpolant {
    kind: InterpolantKind,
    shift: u64,
    t_prev: f64,
    values: Vec<Vec<f64>>,
    /// Global cell boundaries `t_{N+c-1}` for cells `1..=L`.
    boundaries: Vec<f64>,
}

impl Interpolant {
    pub fn new(view: &TrajectoryView<'_>, kind: InterpolantKind, shift: u64) -> Result<Self> {
        let w = view.window_from(shift)?;
        let values = match kind {
            InterpolantKind::State => w.state_values().iter().map(|v| v.to_vec()).collect(),
            InterpolantKind::ProjSum => w.proj_prefix(),
        };
        let boundaries = w.recs.iter().map(|r| r.t).collect();
        Ok(Self { kind, shift, t_prev: w.t_prev, values, boundaries })
    }

    pub fn kind(&self) -> InterpolantKind {
        self.kind
    }

    pub fn shift(&self) -> u64 {
        self.shift
    }

    /// Length of the covered local time range `[0, span]`.
    pub fn span(&self) -> f64 {
        self.boundaries.last().map_or(0.0, |t| t - self.t_prev)
    }

    /// Evaluates the shifted process at local time `t` via the global grid,
    /// so `X_N(t)` and `X_1(t + t_{N-1})` agree bit for bit on shared keys.
    pub fn eval(&self, t: f64) -> Result<&[f64]> {
        if !(t >= 0.0) {
            return Err(Error::OutOfRange { t });
        }
        let key = t + self.t_prev;
        let last = *self.boundaries.last().unwrap();
        if key > last {
            return Err(Error::OutOfRange { t });
        }
        let cell = self.boundaries.partition_point(|b| *b <= key);
        Ok(&self.values[cell])
    }
}

/// Supremum of the coordinate-aggregated difference `sum_l |V[j][l] - V[i][l]|`
/// over index pairs `i < j <= j_max` admissible under the sliding constraint
/// `B[j] - B[lo_key(i)] < delta`. `lo_off = 0` keys the constraint on `B[i]`
/// (window partial sums); `lo_off = 1` keys it on `B[i+1]` (inter-cell gaps).
fn sliding_pair_sup(
    b: &[f64],
    value: &dyn Fn(usize, usize) -> f64,
    dim: usize,
    j_max: usize,
    delta: f64,
    lo_off: usize,
) -> f64 {
    let mut total = 0.0;
    for l in 0..dim {
        let mut sup = 0.0f64;
        let mut max_q: VecDeque<usize> = VecDeque::new();
        let mut min_q: VecDeque<usize> = VecDeque::new();
        let mut lo = 0usize;
        for j in 1..=j_max {
            let i = j - 1;
            while let Some(&back) = max_q.back() {
                if value(back, l) <= value(i, l) {
                    max_q.pop_back();
                } else {
                    break;
                }
            }
            max_q.push_back(i);
            while let Some(&back) = min_q.back() {
                if value(back, l) >= value(i, l) {
                    min_q.pop_back();
                } else {
                    break;
                }
            }
            min_q.push_back(i);
            // advance the left edge: need B[j] - B[i + lo_off] < delta
            while lo < j && !(b[j] - b[lo + lo_off] < delta) {
                if max_q.front() == Some(&lo) {
                    max_q.pop_front();
                }
                if min_q.front() == Some(&lo) {
                    min_q.pop_front();
                }
                lo += 1;
            }
            if lo < j {
                let vj = value(j, l);
                if let Some(&m) = max_q.front() {
                    sup = sup.max(value(m, l) - vj);
                }
                if let Some(&m) = min_q.front() {
                    sup = sup.max(vj - value(m, l));
                }
            }
        }
        total += sup;
    }
    total
}

/// Lemma-style window statistic: the supremum of `|sum_{k=n}^{m} y_k|`
/// (aggregated per coordinate) over windows `N <= n <= m` inside the
/// contiguous recorded block containing `N`, subject to
/// `sum_{k=n}^{m} gamma_k < delta`. The increment sum telescopes to
/// `x_{m+1} - x_n`, which is evaluated directly (exact in floats), rather
/// than re-summing `gamma_k (h + e + r) - P_k` term by term.
pub fn partial_sum_stat(view: &TrajectoryView, n_shift: u64, delta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta={delta} must be positive")));
    }
    let w = view.window_from(n_shift)?;
    let b = w.breakpoints();
    let vals = w.state_values();
    let value = |i: usize, l: usize| vals[i][l];
    Ok(sliding_pair_sup(&b, &value, w.dim(), w.len(), delta, 0))
}

/// Equicontinuity modulus of the shifted process over `[0, T]`:
/// `sup { |F_N(t) - F_N(s)| : s, t <= T, |t - s| < delta }`, evaluated
/// exactly on the cell structure (two cells admit a pair iff the time gap
/// between them is below `delta`).
pub fn equicontinuity_modulus(
    view: &TrajectoryView,
    kind: InterpolantKind,
    n_shift: u64,
    t_span: f64,
    delta: f64,
) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidParameter(format!("delta={delta} must be positive")));
    }
    let w = view.window_from(n_shift)?;
    let b = w.breakpoints();
    let c_max = w.cell_horizon(&b, t_span)?;
    let dim = w.dim();
    match kind {
        InterpolantKind::State => {
            let vals = w.state_values();
            let value = |i: usize, l: usize| vals[i][l];
            Ok(sliding_pair_sup(&b, &value, dim, c_max, delta, 1))
        }
        InterpolantKind::ProjSum => {
            let u = w.proj_prefix();
            let value = |i: usize, l: usize| u[i][l];
            Ok(sliding_pair_sup(&b, &value, dim, c_max, delta, 1))
        }
    }
}

/// Difference-quotient estimate of the Lipschitz constant of `Z_N` over
/// `[0, T]`, with the pair-separation floor it used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEstimate {
    pub estimate: f64,
    /// Minimal pair separation: quotients of a piecewise-constant process
    /// blow up as `t - s -> 0`, so the limit bound is only probed at scales
    /// above the discretization.
    pub pair_floor: f64,
}

/// Estimates the Lipschitz constant of the projection accumulation:
/// `max |Z_N(t) - Z_N(s)|_1 / (t - s)` over breakpoint pairs in `[0, T]`
/// with `t - s >= pair_floor`, where
/// `pair_floor = max(5 * gamma_max, sqrt(gamma_max * T))`.
///
/// The `sqrt(gamma_max * T)` term makes the floor shrink slower than the
/// cell width, so window averages contain ever more steps as `N` grows and
/// the noise contribution to the quotient vanishes; a constant multiple of
/// `gamma_max` alone would freeze the averaging length and the estimator
/// would keep a noise bias at every `N`.
///
/// A chord slope over any span is a weighted average of sub-chord slopes,
/// and every span of at least `2 * pair_floor + 2 * gamma_max` splits at a
/// breakpoint into admissible sub-spans, so scanning separations up to that
/// cap yields the exact maximum over all admissible pairs.
pub fn lipschitz_estimate_z(
    view: &TrajectoryView,
    n_shift: u64,
    t_span: f64,
) -> Result<LipschitzEstimate> {
    let w = view.window_from(n_shift)?;
    let b = w.breakpoints();
    let c_max = w.cell_horizon(&b, t_span)?;
    let u = w.proj_prefix();
    let gamma_max = w.recs[..c_max.max(1)].iter().map(|r| r.gamma).fold(0.0, f64::max);
    let pair_floor = (5.0 * gamma_max).max((gamma_max * t_span).sqrt());
    let cap = 2.0 * pair_floor + 2.0 * gamma_max;

    let mut estimate = 0.0f64;
    let mut any = false;
    let mut j0 = 0usize;
    for i in 0..c_max {
        if j0 <= i {
            j0 = i + 1;
        }
        while j0 <= c_max && b[j0] - b[i] < pair_floor {
            j0 += 1;
        }
        let mut j = j0;
        while j <= c_max && b[j] - b[i] <= cap {
            let dt = b[j] - b[i];
            if dt > 0.0 {
                let num: f64 = (0..w.dim()).map(|l| (u[j][l] - u[i][l]).abs()).sum();
                estimate = estimate.max(num / dt);
                any = true;
            }
            j += 1;
        }
    }
    if !any {
        return Err(Error::WindowNotCovered(format!(
            "no breakpoint pairs separated by at least {pair_floor:.3e} within [0, {t_span}]"
        )));
    }
    Ok(LipschitzEstimate { estimate, pair_floor })
}

/// Residual of the projected-ODE integral identity over `[0, T]`:
/// `sup_t |X_N(t) - X_N(0) - int_0^t h(X_N(s)) ds + Z_N(t) - Z_N(0)|_1`
/// on the breakpoint grid, with cell-exact quadrature. By the step
/// recursion this equals the accumulated noise `|sum gamma_k (e_k + r_k)|`,
/// so it vanishes (up to accumulation rounding) on zero-noise runs.
pub fn integral_residual(view: &TrajectoryView, n_shift: u64, t_span: f64) -> Result<f64> {
    let w = view.window_from(n_shift)?;
    let b = w.breakpoints();
    let c_max = w.cell_horizon(&b, t_span)?;
    let vals = w.state_values();
    let u = w.proj_prefix();
    let q = w.drift_quadrature();
    let mut sup = 0.0f64;
    for c in 0..=c_max {
        let res: f64 = (0..w.dim())
            .map(|l| (vals[c][l] - vals[0][l] - q[c][l] + u[c][l]).abs())
            .sum();
        sup = sup.max(res);
    }
    Ok(sup)
}

/// One row of the sweep: the three windowed statistics at `(N, delta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub n_shift: u64,
    pub delta: f64,
    pub partial_sum: f64,
    pub modulus_x: f64,
    pub modulus_z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzEntry {
    pub n_shift: u64,
    pub estimate: f64,
    pub pair_floor: f64,
    /// `(H + R) * d` when the drift bound and noise bound are known.
    pub ceiling: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralEntry {
    pub n_shift: u64,
    pub residual: f64,
}

/// Trend verdict between the first and last shift of the sweep. Exact zeros
/// on both ends count as converged rather than as a violation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrendFlag {
    pub statistic: String,
    pub delta: Option<f64>,
    pub first_n: u64,
    pub last_n: u64,
    pub first: f64,
    pub last: f64,
    pub ok: bool,
}

fn trend_ok(first: f64, last: f64) -> bool {
    last < first || (first <= CONVERGED_FLOOR && last <= CONVERGED_FLOOR)
}

/// Full statistics table over the `(N, delta)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticReport {
    pub t_span: f64,
    pub entries: Vec<SweepEntry>,
    pub lipschitz: Vec<LipschitzEntry>,
    pub integral: Vec<IntegralEntry>,
    pub flags: Vec<TrendFlag>,
}

impl DiagnosticReport {
    pub fn all_trends_ok(&self) -> bool {
        self.flags.iter().all(|f| f.ok)
    }
}

/// Ceiling parameters for the Lipschitz comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CeilingParams {
    pub drift_bound: f64,
    pub r_bound: f64,
    pub dim: usize,
}

impl CeilingParams {
    pub fn value(&self) -> f64 {
        (self.drift_bound + self.r_bound) * self.dim as f64
    }
}

/// Tabulates all four statistic families over `n_list x delta_list` and
/// flags shrinking-trend violations between the first and last shift.
pub fn diagnostic_sweep(
    view: &TrajectoryView,
    n_list: &[u64],
    t_span: f64,
    delta_list: &[f64],
    ceiling: Option<CeilingParams>,
) -> Result<DiagnosticReport> {
    if n_list.is_empty() || delta_list.is_empty() {
        return Err(Error::InvalidParameter("n_list and delta_list must be nonempty".into()));
    }
    let mut entries = Vec::new();
    let mut lipschitz = Vec::new();
    let mut integral = Vec::new();
    for &n in n_list {
        for &delta in delta_list {
            entries.push(SweepEntry {
                n_shift: n,
                delta,
                partial_sum: partial_sum_stat(view, n, delta)?,
                modulus_x: equicontinuity_modulus(view, InterpolantKind::State, n, t_span, delta)?,
                modulus_z: equicontinuity_modulus(view, InterpolantKind::ProjSum, n, t_span, delta)?,
            });
        }
        let lip = lipschitz_estimate_z(view, n, t_span)?;
        lipschitz.push(LipschitzEntry {
            n_shift: n,
            estimate: lip.estimate,
            pair_floor: lip.pair_floor,
            ceiling: ceiling.map(|c| c.value()),
        });
        integral.push(IntegralEntry { n_shift: n, residual: integral_residual(view, n, t_span)? });
    }

    let mut flags = Vec::new();
    let (first_n, last_n) = (n_list[0], *n_list.last().unwrap());
    if n_list.len() > 1 {
        for &delta in delta_list {
            let pick = |n: u64| entries.iter().find(|e| e.n_shift == n && e.delta == delta).unwrap();
            let (a, b) = (pick(first_n), pick(last_n));
            for (name, fa, fb) in [
                ("partial_sum", a.partial_sum, b.partial_sum),
                ("modulus_x", a.modulus_x, b.modulus_x),
                ("modulus_z", a.modulus_z, b.modulus_z),
            ] {
                flags.push(TrendFlag {
                    statistic: name.to_string(),
                    delta: Some(delta),
                    first_n,
                    last_n,
                    first: fa,
                    last: fb,
                    ok: trend_ok(fa, fb),
                });
            }
        }
        let ia = integral.first().unwrap().residual;
        let ib = integral.last().unwrap().residual;
        flags.push(TrendFlag {
            statistic: "integral_residual".to_string(),
            delta: None,
            first_n,
            last_n,
            first: ia,
            last: ib,
            ok: trend_ok(ia, ib),
        });
    }
    if let Some(c) = ceiling {
        let worst = lipschitz.iter().map(|l| l.estimate).fold(0.0, f64::max);
        flags.push(TrendFlag {
            statistic: "lipschitz_ceiling".to_string(),
            delta: None,
            first_n,
            last_n,
            first: c.value(),
            last: worst,
            ok: worst <= 1.05 * c.value(),
        });
    }

    Ok(DiagnosticReport { t_span, entries, lipschitz, integral, flags })
}
