//! Subcommand implementations. Each command reads its inputs, runs the
//! requested work (replicas concurrently up to a `--jobs` bound, each with
//! its own seed-keyed generator and output file), and writes one summary
//! JSON per invocation, always carrying the config hash and library version.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use projsa::diagnostics::{diagnostic_sweep, CeilingParams, DiagnosticReport, TrajectoryView};
use projsa::engine::{run, Algorithm, Problem, RunSpec, Trajectory};
use projsa::odeflow::{compare_sa_ode, dist_to_stationary, stationarity_residual};

use crate::config::{DiagnosticsBlock, ExperimentConfig, OutputSpec};
use crate::io::{content_hash, read_trace, write_json, write_trace};
use crate::selftest::{run_prox_selftest, SelftestOutcome, TOLERANCE};
use crate::CliError;

const LIB_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Common provenance header for all summaries.
#[derive(Debug, Clone, Serialize)]
struct Provenance {
    experiment: String,
    config_hash: String,
    library_version: &'static str,
}

#[derive(Debug, Clone, Serialize)]
struct ReplicaSummary {
    seed: u64,
    trace_file: String,
    final_x: Vec<f64>,
    t_final: f64,
    dist_to_stationary: f64,
    stationarity_residual: f64,
    proj_fraction_tail: f64,
    proj_steps_total: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    diagnostics: Option<DiagnosticReport>,
}

#[derive(Debug, Clone, Serialize)]
struct RunSummary {
    #[serde(flatten)]
    provenance: Provenance,
    algorithm: Algorithm,
    n_steps: u64,
    replicas: Vec<ReplicaSummary>,
}

/// Paths produced by `cmd_run`.
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub trace_paths: Vec<PathBuf>,
    pub summary_path: PathBuf,
}

fn resolve_out_dir(output: &OutputSpec, out_override: Option<&Path>) -> Result<PathBuf, CliError> {
    let dir = match (out_override, &output.dir) {
        (Some(d), _) => d.to_path_buf(),
        (None, Some(d)) => PathBuf::from(d),
        (None, None) => PathBuf::from("out"),
    };
    fs::create_dir_all(&dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn load_config(path: &Path) -> Result<(ExperimentConfig, String), CliError> {
    let bytes = fs::read(path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
    let hash = content_hash(&bytes);
    let text = String::from_utf8(bytes)
        .map_err(|_| CliError::Validation("config is not valid UTF-8".into()))?;
    Ok((ExperimentConfig::parse(&text)?, hash))
}

/// Runs `work(i)` for `i` in `0..count` on up to `jobs` worker threads,
/// collecting results in index order. Each replica owns its state, so the
/// schedule of workers cannot affect any output.
fn parallel_map<T: Send, F>(count: usize, jobs: usize, work: F) -> Result<Vec<T>, CliError>
where
    F: Fn(usize) -> Result<T, CliError> + Sync,
{
    let jobs = jobs.max(1).min(count.max(1));
    let results: Mutex<Vec<Option<Result<T, CliError>>>> =
        Mutex::new((0..count).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= count {
                    break;
                }
                let out = work(i);
                results.lock().expect("poisoned")[i] = Some(out);
            });
        }
    });
    let collected = results.into_inner().expect("poisoned");
    collected
        .into_iter()
        .map(|slot| slot.expect("worker completed"))
        .collect()
}

fn run_replica(
    problem: &Problem,
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Trajectory, CliError> {
    let spec = RunSpec {
        problem,
        algorithm: cfg.algorithm,
        schedule: cfg.schedule.clone(),
        noise: cfg.noise.clone(),
        x0: cfg.x0.clone().unwrap_or_else(|| problem.bounds().center()),
        n_steps: cfg.n_steps,
        seed,
        record: cfg.effective_record_policy()?,
        tail_window: cfg.tail_window,
    };
    run(&spec).map_err(|e| CliError::Runtime(format!("seed {seed}: {e}")))
}

fn replica_stats(problem: &Problem, traj: &Trajectory) -> Result<(f64, f64), CliError> {
    let x = &traj.aggregates.final_x;
    let dist = dist_to_stationary(problem, x)
        .map_err(|e| CliError::Runtime(format!("distance: {e}")))?;
    let resid = stationarity_residual(problem, x)
        .map_err(|e| CliError::Runtime(format!("residual: {e}")))?;
    Ok((dist, resid))
}

fn ceiling_for(problem: &Problem, cfg: &ExperimentConfig) -> CeilingParams {
    CeilingParams {
        drift_bound: problem.drift_bound(),
        r_bound: cfg.noise.r_bound(),
        dim: problem.dim(),
    }
}

/// `run`: executes all seeds, writes one trace per replica and one summary.
pub fn cmd_run(
    config_path: &Path,
    out_override: Option<&Path>,
    jobs: usize,
    seed_offset: u64,
) -> Result<RunArtifacts, CliError> {
    let (cfg, hash) = load_config(config_path)?;
    let problem = cfg.problem.build()?;
    let out_dir = resolve_out_dir(&cfg.output, out_override)?;
    let prefix = cfg.output.prefix.clone().unwrap_or_else(|| "trace".to_string());
    let seeds = cfg.seeds.seeds(seed_offset)?;

    let runs: Vec<(u64, Trajectory)> = parallel_map(seeds.len(), jobs, |i| {
        let seed = seeds[i];
        Ok((seed, run_replica(&problem, &cfg, seed)?))
    })?;

    let mut trace_paths = Vec::new();
    let mut replicas = Vec::new();
    for (seed, traj) in &runs {
        let trace_name = format!("{prefix}_seed{seed}.csv");
        let trace_path = out_dir.join(&trace_name);
        write_trace(&trace_path, traj)?;
        let (dist, resid) = replica_stats(&problem, traj)?;
        let diagnostics = match &cfg.diagnostics {
            Some(d) => Some(
                diagnostic_sweep(
                    &TrajectoryView::of(traj),
                    &d.n_list,
                    d.t_span,
                    &d.delta_list,
                    Some(ceiling_for(&problem, &cfg)),
                )
                .map_err(|e| CliError::Validation(format!("diagnostics: {e}")))?,
            ),
            None => None,
        };
        replicas.push(ReplicaSummary {
            seed: *seed,
            trace_file: trace_name,
            final_x: traj.aggregates.final_x.clone(),
            t_final: traj.aggregates.t_final,
            dist_to_stationary: dist,
            stationarity_residual: resid,
            proj_fraction_tail: traj.aggregates.proj_fraction_tail(),
            proj_steps_total: traj.aggregates.proj_steps,
            diagnostics,
        });
        trace_paths.push(trace_path);
    }

    let summary = RunSummary {
        provenance: Provenance {
            experiment: cfg.experiment.clone(),
            config_hash: hash,
            library_version: LIB_VERSION,
        },
        algorithm: cfg.algorithm,
        n_steps: cfg.n_steps,
        replicas,
    };
    let summary_path = out_dir.join("summary.json");
    write_json(&summary_path, &summary)?;
    Ok(RunArtifacts { out_dir, trace_paths, summary_path })
}

/// Config for `diagnose`: the diagnostics block plus an optional ceiling.
#[derive(Debug, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub diagnostics: DiagnosticsBlock,
    #[serde(default)]
    pub ceiling: Option<CeilingSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CeilingSpec {
    pub h_bound: f64,
    pub r_bound: f64,
}

#[derive(Debug, Serialize)]
struct DiagnoseSummary {
    trace_file: String,
    config_hash: String,
    library_version: &'static str,
    report: DiagnosticReport,
}

/// `diagnose`: replays the statistics over a recorded trace. The trace must
/// have been recorded with a policy covering the requested windows (full or
/// matching ranges); uncovered windows are a validation error. Shifts must
/// be at least 2, because the pre-step state of step `n` is read from
/// record `n - 1`.
pub fn cmd_diagnose(
    trace_path: &Path,
    config_path: &Path,
    out_override: Option<&Path>,
) -> Result<PathBuf, CliError> {
    let bytes = fs::read(config_path)
        .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", config_path.display())))?;
    let hash = content_hash(&bytes);
    let cfg: DiagnoseConfig = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Validation(format!("config: {e}")))?;
    if cfg.diagnostics.n_list.iter().any(|n| *n < 2) {
        return Err(CliError::Validation(
            "diagnostics.n_list: trace-based diagnostics need shifts >= 2".into(),
        ));
    }
    let records = read_trace(trace_path)?;
    if records.is_empty() {
        return Err(CliError::Validation("trace has no records".into()));
    }
    let dim = records[0].x.len();
    let view = TrajectoryView::new(&records, None);
    let ceiling = cfg.ceiling.map(|c| CeilingParams {
        drift_bound: c.h_bound,
        r_bound: c.r_bound,
        dim,
    });
    let report = diagnostic_sweep(
        &view,
        &cfg.diagnostics.n_list,
        cfg.diagnostics.t_span,
        &cfg.diagnostics.delta_list,
        ceiling,
    )
    .map_err(|e| CliError::Validation(format!("diagnostics: {e}")))?;

    let out_dir = resolve_out_dir(&cfg.output, out_override)?;
    let summary_path = out_dir.join("diagnose.json");
    write_json(
        &summary_path,
        &DiagnoseSummary {
            trace_file: trace_path.display().to_string(),
            config_hash: hash,
            library_version: LIB_VERSION,
            report,
        },
    )?;
    Ok(summary_path)
}

/// `prox-selftest`: runs the oracle suite, prints the worst case per
/// variant, and reports overall success.
pub fn cmd_prox_selftest(instances: u64, corrupt_lambda_sign: bool) -> SelftestOutcome {
    let outcome = run_prox_selftest(instances, corrupt_lambda_sign);
    for w in &outcome.worst {
        println!(
            "{:>5?} {}: worst |dev| = {:.3e}  (v={:.6}, gamma={:.6}, lambda={:.6}, got={:.9}, oracle={:.9})",
            w.variant,
            if w.boxed { "boxed" } else { "free " },
            w.deviation,
            w.v,
            w.gamma,
            w.lambda,
            w.got,
            w.oracle,
        );
    }
    println!(
        "prox selftest: {} instances/variant, max deviation {:.3e} vs tolerance {:.1e} -> {}",
        outcome.instances_per_variant,
        outcome.max_deviation,
        TOLERANCE,
        if outcome.passed { "PASS" } else { "FAIL" }
    );
    outcome
}

#[derive(Debug, Serialize)]
struct OdeCompareRow {
    seed: u64,
    n_shift: u64,
    sup_distance: f64,
}

#[derive(Debug, Serialize)]
struct OdeCompareSummary {
    #[serde(flatten)]
    provenance: Provenance,
    t_span: f64,
    h_ode: f64,
    rows: Vec<OdeCompareRow>,
}

/// `ode-compare`: runs the SA replicas, integrates the projected ODE from
/// each shifted start `X_N(0)`, and tabulates the sup distances.
pub fn cmd_ode_compare(
    config_path: &Path,
    out_override: Option<&Path>,
    jobs: usize,
    seed_offset: u64,
) -> Result<PathBuf, CliError> {
    let (cfg, hash) = load_config(config_path)?;
    let diag = cfg.diagnostics.clone().ok_or_else(|| {
        CliError::Validation("diagnostics: block is required for ode-compare".into())
    })?;
    let h_ode = diag.h_ode.ok_or_else(|| {
        CliError::Validation("diagnostics.h_ode: required for ode-compare".into())
    })?;
    let problem = cfg.problem.build()?;
    let seeds = cfg.seeds.seeds(seed_offset)?;

    let rows: Vec<Vec<OdeCompareRow>> = parallel_map(seeds.len(), jobs, |i| {
        let seed = seeds[i];
        let traj = run_replica(&problem, &cfg, seed)?;
        let view = TrajectoryView::of(&traj);
        diag.n_list
            .iter()
            .map(|&n| {
                let sup = compare_sa_ode(&problem, &view, n, diag.t_span, h_ode)
                    .map_err(|e| CliError::Validation(format!("seed {seed}, shift {n}: {e}")))?;
                Ok(OdeCompareRow { seed, n_shift: n, sup_distance: sup })
            })
            .collect()
    })?;

    let out_dir = resolve_out_dir(&cfg.output, out_override)?;
    let summary_path = out_dir.join("ode_compare.json");
    write_json(
        &summary_path,
        &OdeCompareSummary {
            provenance: Provenance {
                experiment: cfg.experiment.clone(),
                config_hash: hash,
                library_version: LIB_VERSION,
            },
            t_span: diag.t_span,
            h_ode,
            rows: rows.into_iter().flatten().collect(),
        },
    )?;
    Ok(summary_path)
}
