//! Randomized prox-vs-oracle self-test.
//!
//! The oracle is a dense grid search over the prox objective, fully
//! independent of the candidate-enumeration implementation: a coarse scan
//! (step 1e-3) finds every near-optimal local basin, each basin is refined
//! at step 1e-6, and the best refined point wins with the same smallest-|y|
//! tie rule the library uses. Agreement is required to 1e-5 per coordinate
//! over randomized (penalty, gamma, v) draws, with and without a box.

use rand::Rng;

use projsa::prox::Penalty;
use projsa::rng_for_seed;

const COARSE_STEP: f64 = 1e-3;
const FINE_STEP: f64 = 1e-6;
/// Basins within this objective margin of the coarse optimum get refined.
const BASIN_MARGIN: f64 = 1e-3;
pub const TOLERANCE: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum VariantName {
    Zero,
    L1,
    Mcp,
    Scad,
}

/// Worst disagreement seen for one (variant, boxed?) combination.
#[derive(Debug, Clone, serde::Serialize)]
pub struct WorstCase {
    pub variant: VariantName,
    pub boxed: bool,
    pub deviation: f64,
    pub v: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub shape: f64,
    pub bounds: Option<(f64, f64)>,
    pub got: f64,
    pub oracle: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct SelftestOutcome {
    pub instances_per_variant: u64,
    pub tolerance: f64,
    pub max_deviation: f64,
    pub passed: bool,
    pub worst: Vec<WorstCase>,
}

struct Candidate {
    obj: f64,
    y: f64,
}

impl Candidate {
    fn consider(&mut self, y: f64, obj: f64) {
        // ties resolve toward the smallest |y|, matching the library's rule
        if obj < self.obj || (obj == self.obj && y.abs() < self.y.abs()) {
            self.obj = obj;
            self.y = y;
        }
    }
}

/// Dense grid minimizer of `p(y) + (y - v)^2 / (2 gamma)` over `[lo, hi]`.
fn grid_oracle(pen: &Penalty, v: f64, gamma: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(lo <= hi);
    let objective = |y: f64| pen.value_1d(y) + (y - v) * (y - v) / (2.0 * gamma);
    let n = (((hi - lo) / COARSE_STEP).ceil() as usize).max(1);
    let coarse: Vec<f64> = (0..=n)
        .map(|i| {
            let y = lo + (hi - lo) * i as f64 / n as f64;
            objective(y)
        })
        .collect();
    let coarse_best = coarse.iter().cloned().fold(f64::INFINITY, f64::min);

    let mut best = Candidate { obj: f64::INFINITY, y: lo };
    let mut refine = |center: f64| {
        let a = (center - 1.5 * COARSE_STEP).max(lo);
        let b = (center + 1.5 * COARSE_STEP).min(hi);
        let m = (((b - a) / FINE_STEP).ceil() as usize).max(1);
        for i in 0..=m {
            let y = a + (b - a) * i as f64 / m as f64;
            best.consider(y, objective(y));
        }
    };
    // refine around every coarse local minimum near the optimum (the prox
    // objective of a nonconvex penalty can have competing basins)
    for i in 0..=n {
        let y = lo + (hi - lo) * i as f64 / n as f64;
        let left = if i == 0 { f64::INFINITY } else { coarse[i - 1] };
        let right = if i == n { f64::INFINITY } else { coarse[i + 1] };
        if coarse[i] <= left && coarse[i] <= right && coarse[i] <= coarse_best + BASIN_MARGIN {
            refine(y);
        }
    }
    best.y
}

fn oracle_free(pen: &Penalty, v: f64, gamma: f64) -> f64 {
    // the unconstrained minimizer lies between 0 and v
    let (lo, hi) = if v >= 0.0 { (0.0, v) } else { (v, 0.0) };
    grid_oracle(pen, v, gamma, lo, hi)
}

fn oracle_boxed(pen: &Penalty, v: f64, gamma: f64, lo: f64, hi: f64) -> f64 {
    // outside [min(0,v), max(0,v)] the objective increases monotonically,
    // so the constrained minimizer is in the intersection when it exists
    // and at the nearest endpoint otherwise; scanning the intersection plus
    // both endpoints covers every case
    let (blo, bhi) = (v.min(0.0).max(lo), v.max(0.0).min(hi));
    let mut best = Candidate { obj: f64::INFINITY, y: lo };
    let objective = |y: f64| pen.value_1d(y) + (y - v) * (y - v) / (2.0 * gamma);
    best.consider(lo, objective(lo));
    best.consider(hi, objective(hi));
    if blo <= bhi {
        let inner = grid_oracle(pen, v, gamma, blo, bhi);
        best.consider(inner, objective(inner));
    }
    best.y
}

fn draw_penalty(
    variant: VariantName,
    rng: &mut projsa::RunRng,
    corrupt_lambda_sign: bool,
) -> (Penalty, Penalty, f64, f64) {
    let lambda: f64 = rng.random_range(0.0..2.5);
    let shape: f64 = rng.random_range(0.05..3.0);
    let mk = |lam: f64| match variant {
        VariantName::Zero => Penalty::Zero,
        VariantName::L1 => Penalty::L1 { lambda: lam },
        VariantName::Mcp => Penalty::Mcp { lambda: lam, beta: 1.0 + shape },
        VariantName::Scad => Penalty::Scad { lambda: lam, a: 2.0 + shape },
    };
    // the fault-injection hook corrupts the oracle's penalty, so a healthy
    // implementation visibly disagrees and the self-test must fail
    let oracle_lambda = if corrupt_lambda_sign { -lambda } else { lambda };
    (mk(lambda), mk(oracle_lambda), lambda, shape)
}

/// Runs `instances_per_variant` randomized comparisons for each of the four
/// penalties, unconstrained and box-constrained. Deterministic (fixed seed).
pub fn run_prox_selftest(instances_per_variant: u64, corrupt_lambda_sign: bool) -> SelftestOutcome {
    let variants = [VariantName::Zero, VariantName::L1, VariantName::Mcp, VariantName::Scad];
    let mut worst: Vec<WorstCase> = Vec::new();
    let mut max_dev = 0.0f64;
    for &variant in &variants {
        for boxed in [false, true] {
            let mut rng = rng_for_seed(0x9A0C_5E1F);
            let mut case_worst: Option<WorstCase> = None;
            for _ in 0..instances_per_variant {
                let (pen, pen_oracle, lambda, shape) = draw_penalty(variant, &mut rng, corrupt_lambda_sign);
                let gamma: f64 = rng.random_range(0.02..1.8);
                let v: f64 = rng.random_range(-3.5..3.5);
                let (got, want, bounds) = if boxed {
                    let lo: f64 = rng.random_range(-3.0..0.5);
                    let hi: f64 = lo + rng.random_range(0.2..3.0);
                    (
                        pen.prox_box_1d(v, gamma, lo, hi),
                        oracle_boxed(&pen_oracle, v, gamma, lo, hi),
                        Some((lo, hi)),
                    )
                } else {
                    (pen.prox_1d(v, gamma), oracle_free(&pen_oracle, v, gamma), None)
                };
                let dev = (got - want).abs();
                if case_worst.as_ref().map_or(true, |w| dev > w.deviation) {
                    case_worst = Some(WorstCase {
                        variant,
                        boxed,
                        deviation: dev,
                        v,
                        gamma,
                        lambda,
                        shape,
                        bounds,
                        got,
                        oracle: want,
                    });
                }
                max_dev = max_dev.max(dev);
            }
            worst.push(case_worst.expect("at least one instance"));
        }
    }
    SelftestOutcome {
        instances_per_variant,
        tolerance: TOLERANCE,
        max_deviation: max_dev,
        passed: max_dev <= TOLERANCE,
        worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_selftest_passes() {
        let out = run_prox_selftest(300, false);
        assert!(out.passed, "max deviation {}", out.max_deviation);
    }

    #[test]
    fn fault_injection_is_detected() {
        let out = run_prox_selftest(100, true);
        assert!(!out.passed);
        assert!(out.max_deviation > TOLERANCE);
    }

    #[test]
    fn zero_penalty_is_exact() {
        let out = run_prox_selftest(50, false);
        let zero_worst = out
            .worst
            .iter()
            .find(|w| w.variant == VariantName::Zero && !w.boxed)
            .unwrap();
        assert_eq!(zero_worst.deviation, 0.0);
    }
}
