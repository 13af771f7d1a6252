//! Experiment configuration: a single JSON document describing the problem,
//! algorithm, schedule, noise, replica seeds, record policy, and optional
//! diagnostics block. No environment-variable overrides; everything is
//! explicit in the file (plus the few command-line flags).

use serde::{Deserialize, Serialize};

use projsa::engine::{Algorithm, Problem, RecordPolicy};
use projsa::geometry::HyperRect;
use projsa::problems;
use projsa::prox::Penalty;
use projsa::schedules::{NoiseModel, StepSchedule};

use crate::CliError;

fn invalid(field: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{field}: {msg}"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxSpec {
    pub fn build(&self) -> Result<HyperRect, CliError> {
        HyperRect::new(self.lower.clone(), self.upper.clone())
            .map_err(|e| invalid("problem.box", e))
    }
}

/// Built-in problem families addressable from configs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    Quadratic {
        #[serde(rename = "box")]
        box_: BoxSpec,
        target: Vec<f64>,
        a_diag: Vec<f64>,
    },
    Rotation {
        #[serde(rename = "box")]
        box_: BoxSpec,
        target: Vec<f64>,
        omega: f64,
    },
    Composite {
        #[serde(rename = "box")]
        box_: BoxSpec,
        target: Vec<f64>,
        a_diag: Vec<f64>,
        penalty: Penalty,
    },
    Pinned {
        #[serde(rename = "box")]
        box_: BoxSpec,
        direction: Vec<f64>,
    },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<Problem, CliError> {
        let problem = match self {
            ProblemSpec::Quadratic { box_, target, a_diag } => {
                problems::make_quadratic(box_.build()?, target.clone(), a_diag.clone())
            }
            ProblemSpec::Rotation { box_, target, omega } => {
                problems::make_rotation(box_.build()?, target.clone(), *omega)
            }
            ProblemSpec::Composite { box_, target, a_diag, penalty } => {
                problems::make_composite(box_.build()?, target.clone(), a_diag.clone(), penalty.clone())
            }
            ProblemSpec::Pinned { box_, direction } => {
                problems::make_pinned_drift(box_.build()?, direction.clone())
            }
        };
        problem.map_err(|e| invalid("problem", e))
    }
}

/// Replica seeds: either an explicit list or `base, base+1, ..., base+count-1`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SeedSpec {
    List { list: Vec<u64> },
    Count {
        count: u64,
        #[serde(default)]
        base: u64,
    },
}

impl SeedSpec {
    pub fn seeds(&self, offset: u64) -> Result<Vec<u64>, CliError> {
        let seeds: Vec<u64> = match self {
            SeedSpec::List { list } => list.iter().map(|s| s + offset).collect(),
            SeedSpec::Count { count, base } => (0..*count).map(|i| base + i + offset).collect(),
        };
        if seeds.is_empty() {
            return Err(invalid("seeds", "at least one replica seed is required"));
        }
        Ok(seeds)
    }
}

/// Diagnostics request evaluated on each replica trajectory.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsBlock {
    pub n_list: Vec<u64>,
    pub t_span: f64,
    pub delta_list: Vec<f64>,
    /// Euler step for the SA-vs-ODE comparison (`ode-compare` only).
    #[serde(default)]
    pub h_ode: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default)]
    pub prefix: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub problem: ProblemSpec,
    pub algorithm: Algorithm,
    pub schedule: StepSchedule,
    pub noise: NoiseModel,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    pub n_steps: u64,
    pub seeds: SeedSpec,
    #[serde(default = "default_record")]
    pub record: RecordPolicy,
    #[serde(default)]
    pub tail_window: u64,
    #[serde(default)]
    pub diagnostics: Option<DiagnosticsBlock>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_record() -> RecordPolicy {
    RecordPolicy::Full
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Field-by-field validation with messages naming the offending field.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.n_steps == 0 {
            return Err(invalid("n_steps", "must be at least 1"));
        }
        self.schedule.validate().map_err(|e| invalid("schedule", e))?;
        self.noise.validate().map_err(|e| invalid("noise", e))?;
        self.record.validate().map_err(|e| invalid("record", e))?;
        self.seeds.seeds(0)?;
        if let Some(d) = &self.diagnostics {
            if d.n_list.is_empty() {
                return Err(invalid("diagnostics.n_list", "must be nonempty"));
            }
            if d.n_list.iter().any(|n| *n == 0) {
                return Err(invalid("diagnostics.n_list", "shift indices start at 1"));
            }
            if !(d.t_span > 0.0) {
                return Err(invalid("diagnostics.t_span", "must be positive"));
            }
            if d.delta_list.is_empty() || d.delta_list.iter().any(|x| !(*x > 0.0)) {
                return Err(invalid("diagnostics.delta_list", "entries must be positive"));
            }
            if let Some(h) = d.h_ode {
                if !(h > 0.0) {
                    return Err(invalid("diagnostics.h_ode", "must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Smallest record range `(n-1, m)` such that the records cover the
    /// shifted window `[0, t_span]` from `n`, with a small margin.
    fn coverage_range(&self, n: u64, t_span: f64) -> Result<(u64, u64), CliError> {
        let mut m = n;
        let mut covered = 0.0;
        while covered < t_span * 1.02 + 1e-12 {
            if m > self.n_steps {
                return Err(invalid(
                    "diagnostics",
                    format!(
                        "n_steps={} cannot cover t_span={t_span} from shift {n} (needs about {m})",
                        self.n_steps
                    ),
                ));
            }
            covered += self.schedule.gamma(m).map_err(|e| invalid("schedule", e))?;
            m += 1;
        }
        Ok((n.saturating_sub(1).max(1), (m + 2).min(self.n_steps)))
    }

    /// The record policy extended (when a diagnostics block is present) with
    /// the contiguous ranges the requested windows need. Explicit policies
    /// are preserved; only the needed ranges are added.
    pub fn effective_record_policy(&self) -> Result<RecordPolicy, CliError> {
        let Some(diag) = &self.diagnostics else {
            return Ok(self.record.clone());
        };
        let mut ranges: Vec<(u64, u64)> = Vec::new();
        for &n in &diag.n_list {
            ranges.push(self.coverage_range(n, diag.t_span)?);
        }
        match &self.record {
            RecordPolicy::Ranges { ranges: explicit } => {
                ranges.extend(explicit.iter().copied());
                Ok(RecordPolicy::Ranges { ranges })
            }
            RecordPolicy::Full => Ok(RecordPolicy::Full),
            RecordPolicy::Thin { .. } | RecordPolicy::Window { .. } => Err(invalid(
                "record",
                "diagnostics windows need contiguous ranges; use kind=full or kind=ranges",
            )),
        }
    }
}
