//! Step-size schedules and noise models.
//!
//! A schedule must keep the procedure ongoing while its steps vanish:
//! `sum gamma_n = inf` and `gamma_n -> 0`. The noise split `e_n + r_n`
//! must satisfy `|r_n| -> 0` and almost-sure convergence of
//! `sum gamma_n e_n`. Neither condition is checkable on a finite run, so the
//! built-in kinds are constructed to satisfy them by design (polynomial decay
//! with exponent in `(1/2, 1]`, zero-mean iid errors with finite variance,
//! deterministic power-law bias), while arbitrary [`StepSchedule::Table`]
//! sequences go through [`validate_assumptions`] and can only be warned
//! about, never certified.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::vecmath::norm2;
use crate::{Error, Result, RunRng};

/// Step-size sequence `gamma_n`, indexed from `n = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StepSchedule {
    /// `gamma_n = gamma0 * n^(-alpha)` with `alpha` in `(1/2, 1]`, so both
    /// the divergent-sum and the square-summable conditions hold by design.
    Polynomial { gamma0: f64, alpha: f64 },
    /// Explicit positive sequence; finite, so asymptotic conditions can only
    /// be checked heuristically.
    Table { gammas: Vec<f64> },
    /// `gamma0` for the first `n0` steps, then `gamma0 * (n - n0)^(-alpha)`.
    /// The polynomial tail is what the asymptotics see, so the same `alpha`
    /// constraint applies.
    ConstantThenPolynomial { gamma0: f64, n0: u64, alpha: f64 },
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.5 && alpha <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "polynomial exponent alpha={alpha} must lie in (1/2, 1]"
        )));
    }
    Ok(())
}

fn check_gamma0(gamma0: f64) -> Result<()> {
    if !(gamma0 > 0.0 && gamma0.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "gamma0={gamma0} must be positive and finite"
        )));
    }
    Ok(())
}

impl StepSchedule {
    pub fn polynomial(gamma0: f64, alpha: f64) -> Result<Self> {
        check_gamma0(gamma0)?;
        check_alpha(alpha)?;
        Ok(Self::Polynomial { gamma0, alpha })
    }

    pub fn table(gammas: Vec<f64>) -> Result<Self> {
        let s = Self::Table { gammas };
        s.validate()?;
        Ok(s)
    }

    pub fn constant_then_polynomial(gamma0: f64, n0: u64, alpha: f64) -> Result<Self> {
        check_gamma0(gamma0)?;
        check_alpha(alpha)?;
        if n0 == 0 {
            return Err(Error::InvalidParameter("n0 must be >= 1".into()));
        }
        Ok(Self::ConstantThenPolynomial { gamma0, n0, alpha })
    }

    /// Re-checks the construction invariants (useful after deserializing).
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Polynomial { gamma0, alpha } => {
                check_gamma0(*gamma0)?;
                check_alpha(*alpha)
            }
            Self::ConstantThenPolynomial { gamma0, n0, alpha } => {
                check_gamma0(*gamma0)?;
                check_alpha(*alpha)?;
                if *n0 == 0 {
                    return Err(Error::InvalidParameter("n0 must be >= 1".into()));
                }
                Ok(())
            }
            Self::Table { gammas: g } => {
                if g.is_empty() {
                    return Err(Error::InvalidParameter("step table must be nonempty".into()));
                }
                if let Some(bad) = g.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
                    return Err(Error::InvalidParameter(format!(
                        "step table entries must be positive and finite, got {bad}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// `gamma_n` for `n >= 1`.
    pub fn gamma(&self, n: u64) -> Result<f64> {
        if n == 0 {
            return Err(Error::ZeroStepIndex);
        }
        match self {
            Self::Polynomial { gamma0, alpha } => Ok(gamma0 * (n as f64).powf(-alpha)),
            Self::Table { gammas: g } => g
                .get(n as usize - 1)
                .copied()
                .ok_or(Error::TableExhausted { step: n, len: g.len() }),
            Self::ConstantThenPolynomial { gamma0, n0, alpha } => {
                if n <= *n0 {
                    Ok(*gamma0)
                } else {
                    Ok(gamma0 * ((n - n0) as f64).powf(-alpha))
                }
            }
        }
    }

    /// `t_n = sum_{k=1}^{n} gamma_k`, with `t_0 = 0`. Summed left to right,
    /// matching the engine's running accumulation bit for bit.
    pub fn cumulative_time(&self, n: u64) -> Result<f64> {
        let mut t = 0.0;
        for k in 1..=n {
            t += self.gamma(k)?;
        }
        Ok(t)
    }

    /// Whether the asymptotic conditions hold analytically by construction.
    pub fn certified(&self) -> bool {
        !matches!(self, Self::Table { .. })
    }
}

/// Zero-mean stochastic error component `e_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EPart {
    None,
    /// iid `N(0, sigma^2)` per coordinate.
    GaussianIid { sigma: f64 },
    /// iid uniform on `[-halfwidth, halfwidth]` per coordinate.
    UniformIid { halfwidth: f64 },
    /// Gaussian with state-dependent scale `sigma(x) = sigma_max / (1 + |x|)`,
    /// bounded by `sigma_max`.
    ScaledGaussian { sigma_max: f64 },
}

/// Deterministic or state-dependent bias component `r_n` with `|r_n| -> 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RPart {
    None,
    /// `r_n = c * n^(-beta)`; the reported bound is `R = |c|` (attained at n=1).
    PowerBias { c: Vec<f64>, beta: f64 },
    /// `r_n = scale * n^(-beta) * x / (1 + |x|)`, a bounded state-dependent
    /// map under the decay envelope `scale * n^(-beta)`; `R = scale`.
    VanishingStateBias { scale: f64, beta: f64 },
}

/// Noise model: the error split `Phi(x_n) = h(x_n) + e_n + r_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub e: EPart,
    pub r: RPart,
}

impl NoiseModel {
    pub fn new(e: EPart, r: RPart) -> Result<Self> {
        let m = Self { e, r };
        m.validate()?;
        Ok(m)
    }

    /// Exact evaluations: no noise at all.
    pub fn none() -> Self {
        Self { e: EPart::None, r: RPart::None }
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(EPart::GaussianIid { sigma }, RPart::None)
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = |v: f64, what: &str| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{what}={v} must be nonnegative and finite")))
            }
        };
        match &self.e {
            EPart::None => {}
            EPart::GaussianIid { sigma } => nonneg(*sigma, "sigma")?,
            EPart::UniformIid { halfwidth } => nonneg(*halfwidth, "halfwidth")?,
            EPart::ScaledGaussian { sigma_max } => nonneg(*sigma_max, "sigma_max")?,
        }
        match &self.r {
            RPart::None => {}
            RPart::PowerBias { c, beta } => {
                if c.is_empty() || c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter("power bias c must be finite and nonempty".into()));
                }
                if !(*beta > 0.0 && beta.is_finite()) {
                    return Err(Error::InvalidParameter(format!("beta={beta} must be positive")));
                }
            }
            RPart::VanishingStateBias { scale, beta } => {
                nonneg(*scale, "scale")?;
                if !(*beta > 0.0 && beta.is_finite()) {
                    return Err(Error::InvalidParameter(format!("beta={beta} must be positive")));
                }
            }
        }
        Ok(())
    }

    /// The constant `R` with `|r_n| <= R` for all `n`.
    pub fn r_bound(&self) -> f64 {
        match &self.r {
            RPart::None => 0.0,
            RPart::PowerBias { c, .. } => norm2(c),
            RPart::VanishingStateBias { scale, .. } => *scale,
        }
    }

    /// Deterministic envelope `rho_n >= sup_x |r_n(x)|`.
    pub fn r_envelope(&self, n: u64) -> f64 {
        let n = n.max(1) as f64;
        match &self.r {
            RPart::None => 0.0,
            RPart::PowerBias { c, beta } => norm2(c) * n.powf(-beta),
            RPart::VanishingStateBias { scale, beta } => scale * n.powf(-beta),
        }
    }

    /// Draws `(e_n, r_n)` for step `n` at state `x`. Deterministic given the
    /// generator state; the bias part consumes no randomness.
    pub fn sample(&self, n: u64, x: &[f64], rng: &mut RunRng) -> (Vec<f64>, Vec<f64>) {
        let d = x.len();
        let e = match &self.e {
            EPart::None => vec![0.0; d],
            EPart::GaussianIid { sigma } => (0..d)
                .map(|_| sigma * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
                .collect(),
            EPart::UniformIid { halfwidth } => {
                if *halfwidth == 0.0 {
                    vec![0.0; d]
                } else {
                    (0..d).map(|_| rng.random_range(-halfwidth..=*halfwidth)).collect()
                }
            }
            EPart::ScaledGaussian { sigma_max } => {
                let s = sigma_max / (1.0 + norm2(x));
                (0..d)
                    .map(|_| s * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
                    .collect()
            }
        };
        let r = match &self.r {
            RPart::None => vec![0.0; d],
            RPart::PowerBias { c, beta } => {
                assert_eq!(c.len(), d, "power bias dimension must match the state");
                let s = (n as f64).powf(-beta);
                c.iter().map(|ci| ci * s).collect()
            }
            RPart::VanishingStateBias { scale, beta } => {
                let s = scale * (n as f64).powf(-beta) / (1.0 + norm2(x));
                x.iter().map(|xi| xi * s).collect()
            }
        };
        (e, r)
    }
}

/// Outcome of one finite-horizon assumption check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CheckStatus {
    Pass,
    Warn,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub status: CheckStatus,
    pub detail: String,
}

/// Finite-horizon report on the schedule/noise conditions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AssumptionReport {
    /// Effective horizon (clamped to the table length for table schedules).
    pub horizon: u64,
    pub t_horizon: f64,
    pub t_half: f64,
    pub gamma_horizon: f64,
    pub sum_gamma_sq: f64,
    /// Max bias envelope over `[horizon/2, horizon]`.
    pub max_r_tail: f64,
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.status == CheckStatus::Pass)
    }
}

/// Least-squares slope of `ln gamma_n` against `ln n` over `[lo, hi]`;
/// returns the decay exponent estimate `alpha_hat = -slope`.
fn fit_decay_exponent(schedule: &StepSchedule, lo: u64, hi: u64) -> Result<f64> {
    let samples = 64.min(hi - lo + 1);
    let mut xs = Vec::with_capacity(samples as usize);
    let mut ys = Vec::with_capacity(samples as usize);
    for i in 0..samples {
        let n = lo + i * (hi - lo) / samples.max(1);
        let g = schedule.gamma(n)?;
        xs.push((n as f64).ln());
        ys.push(g.ln());
    }
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Ok(0.0);
    }
    Ok(-(sxy / sxx))
}

/// Checks the step-size and noise conditions over a finite horizon.
///
/// Polynomial-type schedules are certified analytically; tables get
/// heuristic finite-sample checks and at best a warning when they cannot be
/// certified. Requires `horizon >= 10`.
pub fn validate_assumptions(
    schedule: &StepSchedule,
    model: &NoiseModel,
    horizon: u64,
) -> Result<AssumptionReport> {
    if horizon < 10 {
        return Err(Error::InvalidParameter(format!("horizon={horizon} must be >= 10")));
    }
    schedule.validate()?;
    model.validate()?;
    let horizon = match schedule {
        StepSchedule::Table { gammas: g } => horizon.min(g.len() as u64),
        _ => horizon,
    };
    if horizon < 10 {
        return Err(Error::InvalidParameter(
            "table too short for a meaningful check (need >= 10 entries)".into(),
        ));
    }
    let half = horizon / 2;

    let mut t_half = 0.0;
    let mut t_horizon = 0.0;
    let mut sum_gamma_sq = 0.0;
    for n in 1..=horizon {
        let g = schedule.gamma(n)?;
        t_horizon += g;
        sum_gamma_sq += g * g;
        if n == half {
            t_half = t_horizon;
        }
    }
    let gamma_horizon = schedule.gamma(horizon)?;
    let gamma_half = schedule.gamma(half)?;
    let max_r_tail = (half..=horizon).map(|n| model.r_envelope(n)).fold(0.0, f64::max);

    let mut checks = Vec::new();
    let mut push = |name: &str, status: CheckStatus, detail: String| {
        checks.push(AssumptionCheck { name: name.to_string(), status, detail });
    };

    if schedule.certified() {
        push(
            "step_sum_diverges",
            CheckStatus::Pass,
            format!("polynomial decay with alpha <= 1; t_horizon = {t_horizon:.6}"),
        );
        push(
            "step_to_zero",
            CheckStatus::Pass,
            format!("gamma_horizon = {gamma_horizon:.3e}"),
        );
        push(
            "sq_sum_bounded",
            CheckStatus::Pass,
            format!("alpha > 1/2; partial sum = {sum_gamma_sq:.6}"),
        );
    } else {
        // Growth margin: the second half must still contribute a nontrivial
        // fraction of the accumulated time.
        let growth_ok = t_horizon - t_half > 0.01 * t_half;
        push(
            "step_sum_diverges",
            if growth_ok { CheckStatus::Pass } else { CheckStatus::Warn },
            format!("t_horizon = {t_horizon:.6}, t_half = {t_half:.6} (finite table, not certifiable)"),
        );
        let to_zero_ok = gamma_horizon < 0.9 * gamma_half;
        push(
            "step_to_zero",
            if to_zero_ok { CheckStatus::Pass } else { CheckStatus::Warn },
            format!("gamma_horizon = {gamma_horizon:.3e} vs gamma_half = {gamma_half:.3e}"),
        );
        let alpha_hat = fit_decay_exponent(schedule, half.max(1), horizon)?;
        let sq_ok = alpha_hat > 0.5 + 1e-6;
        push(
            "sq_sum_bounded",
            if sq_ok { CheckStatus::Pass } else { CheckStatus::Warn },
            format!("fitted decay exponent alpha_hat = {alpha_hat:.3} (needs > 1/2)"),
        );
    }

    let env_half = model.r_envelope(half);
    let env_end = model.r_envelope(horizon);
    let r_ok = env_end == 0.0 || env_end < env_half;
    push(
        "r_decay",
        if r_ok { CheckStatus::Pass } else { CheckStatus::Warn },
        format!("bias envelope {env_half:.3e} -> {env_end:.3e} over [horizon/2, horizon]"),
    );

    Ok(AssumptionReport {
        horizon,
        t_horizon,
        t_half,
        gamma_horizon,
        sum_gamma_sq,
        max_r_tail,
        checks,
    })
}
