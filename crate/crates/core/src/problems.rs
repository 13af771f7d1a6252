//! Built-in test problems with known drifts, bounds, and stationary sets.
//!
//! Each constructor instantiates a [`Problem`] whose ground truth is known
//! in closed form or computable by an independent oracle, so that every
//! convergence statement has an observable rendition: an interior optimum,
//! a clamped optimum, a persistently projecting drift, a non-gradient
//! rotational root, and nonsmooth composites.

use std::sync::Arc;

use crate::engine::{Problem, StationaryDescriptor};
use crate::geometry::{FaceTag, HyperRect};
use crate::prox::Penalty;
use crate::vecmath::norm2;
use crate::{dist_to_normal_cone_shifted, Error, Result};

/// Separable quadratic `f(x) = 1/2 sum_i a_i (x_i - target_i)^2` with
/// `h = -grad f`, Lyapunov `V = f - min_K f`, and stationary set equal to
/// the clamp of the target onto the box (per-coordinate minimizer of a
/// separable quadratic over an interval).
pub fn make_quadratic(box_: HyperRect, target: Vec<f64>, a_diag: Vec<f64>) -> Result<Problem> {
    let d = box_.dim();
    if target.len() != d || a_diag.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: target.len().min(a_diag.len()) });
    }
    if a_diag.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidParameter("diagonal entries must be positive".into()));
    }
    let clamp = box_.project(&target)?;
    let fmin: f64 = clamp
        .iter()
        .zip(target.iter().zip(&a_diag))
        .map(|(c, (t, a))| 0.5 * a * (c - t) * (c - t))
        .sum();
    // |grad f| is separable and convex, so its box maximum sits at per-coordinate
    // extremes; no corner enumeration needed.
    let h_bound: f64 = box_
        .lower()
        .iter()
        .zip(box_.upper())
        .zip(target.iter().zip(&a_diag))
        .map(|((lo, hi), (t, a))| {
            let m = (a * (lo - t)).abs().max((a * (hi - t)).abs());
            m * m
        })
        .sum::<f64>()
        .sqrt();

    let (t1, a1, t2, a2, t3) = (target.clone(), a_diag.clone(), target.clone(), a_diag.clone(), target.clone());
    let a3 = a_diag.clone();
    Problem::builder(
        "quadratic",
        box_,
        Arc::new(move |x: &[f64]| {
            x.iter().zip(t1.iter().zip(&a1)).map(|(xi, (ti, ai))| -(ai * (xi - ti))).collect()
        }),
        h_bound.max(f64::MIN_POSITIVE),
    )
    .objective(Arc::new(move |x: &[f64]| {
        x.iter()
            .zip(t2.iter().zip(&a2))
            .map(|(xi, (ti, ai))| 0.5 * ai * (xi - ti) * (xi - ti))
            .sum()
    }))
    .lyapunov(
        Arc::new(move |x: &[f64]| {
            let f: f64 = x
                .iter()
                .zip(t3.iter().zip(&a3))
                .map(|(xi, (ti, ai))| 0.5 * ai * (xi - ti) * (xi - ti))
                .sum();
            f - fmin
        }),
        {
            let (t, a) = (target.clone(), a_diag.clone());
            Arc::new(move |x: &[f64]| {
                x.iter().zip(t.iter().zip(&a)).map(|(xi, (ti, ai))| ai * (xi - ti)).collect()
            })
        },
    )
    .stationary(StationaryDescriptor::ExplicitPoints(vec![clamp]))
    .build()
}

/// Two-dimensional rotational drift `h(x) = M (target - x)` with
/// `M = [[1, omega], [-omega, 1]]`: a non-gradient field whose unique root
/// is the target. `omega = 0` reduces to the isotropic quadratic drift.
/// No Lyapunov function is supplied.
pub fn make_rotation(box_: HyperRect, target: Vec<f64>, omega: f64) -> Result<Problem> {
    if box_.dim() != 2 || target.len() != 2 {
        return Err(Error::DimensionMismatch { expected: 2, got: box_.dim().min(target.len()) });
    }
    if !omega.is_finite() {
        return Err(Error::InvalidParameter("omega must be finite".into()));
    }
    // |M y|^2 is convex in y, so the maximum over the box is at a corner
    let h_bound = box_
        .corners()
        .iter()
        .map(|c| {
            let y0 = target[0] - c[0];
            let y1 = target[1] - c[1];
            norm2(&[y0 + omega * y1, -omega * y0 + y1])
        })
        .fold(0.0, f64::max);
    let interior = target
        .iter()
        .zip(box_.lower().iter().zip(box_.upper()))
        .all(|(t, (lo, hi))| lo < t && t < hi);
    let descriptor = if interior {
        StationaryDescriptor::ExplicitPoints(vec![target.clone()])
    } else {
        StationaryDescriptor::ResidualBased { tol: 1e-6 }
    };

    Problem::builder(
        "rotation",
        box_,
        Arc::new(move |x: &[f64]| {
            let y0 = target[0] - x[0];
            let y1 = target[1] - x[1];
            vec![y0 + omega * y1, -omega * y0 + y1]
        }),
        h_bound.max(f64::MIN_POSITIVE),
    )
    .stationary(descriptor)
    .build()
}

/// Composite problem: separable quadratic `f` plus a separable penalty.
/// For dimension at most 2 the stationary set is computed at construction
/// by a per-coordinate grid oracle (step `1e-4`) on the fixed-point
/// inclusion `0 in h_i(x) - [subdiff g]_i - N_i`; separability makes the
/// product of per-coordinate solutions exact. Higher dimensions fall back
/// to a residual-based descriptor.
pub fn make_composite(
    box_: HyperRect,
    target: Vec<f64>,
    a_diag: Vec<f64>,
    penalty: Penalty,
) -> Result<Problem> {
    penalty.validate()?;
    let d = box_.dim();
    if target.len() != d || a_diag.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: target.len().min(a_diag.len()) });
    }
    if a_diag.iter().any(|a| !(*a > 0.0 && a.is_finite())) {
        return Err(Error::InvalidParameter("diagonal entries must be positive".into()));
    }

    let descriptor = if d <= 2 {
        let mut per_coord: Vec<Vec<f64>> = Vec::with_capacity(d);
        for i in 0..d {
            let pts = stationary_points_1d(
                box_.lower()[i],
                box_.upper()[i],
                target[i],
                a_diag[i],
                &penalty,
            );
            if pts.is_empty() {
                per_coord.clear();
                break;
            }
            per_coord.push(pts);
        }
        if per_coord.len() == d {
            // cartesian product of the per-coordinate solution sets
            let mut points: Vec<Vec<f64>> = vec![Vec::new()];
            for coord_pts in &per_coord {
                let mut next = Vec::new();
                for base in &points {
                    for p in coord_pts {
                        let mut q = base.clone();
                        q.push(*p);
                        next.push(q);
                    }
                }
                points = next;
            }
            StationaryDescriptor::ExplicitPoints(points)
        } else {
            StationaryDescriptor::ResidualBased { tol: 1e-6 }
        }
    } else {
        StationaryDescriptor::ResidualBased { tol: 1e-6 }
    };

    let quad = make_quadratic(box_, target, a_diag)?;
    // rebuild with the penalty and oracle descriptor attached
    Problem::builder(
        "composite",
        quad.bounds().clone(),
        {
            let q = quad.clone();
            Arc::new(move |x: &[f64]| q.drift(x))
        },
        quad.drift_bound(),
    )
    .objective(quad.objective().expect("quadratic always has an objective").clone())
    .penalty(penalty)
    .stationary(descriptor)
    .build()
}

/// Grid oracle for the one-dimensional stationarity inclusion of a
/// composite coordinate: scans `[lo, hi]` with step `1e-4`, collects runs
/// where the residual drops below `1e-3`, and keeps each run's argmin.
fn stationary_points_1d(lo: f64, hi: f64, target: f64, a: f64, pen: &Penalty) -> Vec<f64> {
    const STEP: f64 = 1e-4;
    const THRESH: f64 = 1e-3;
    let steps = ((hi - lo) / STEP).round() as u64;
    let mut points = Vec::new();
    let mut run_best: Option<(f64, f64)> = None; // (residual, x)
    for j in 0..=steps {
        let x = if j == steps { hi } else { lo + j as f64 * STEP };
        let tag = if j == 0 {
            FaceTag::AtLower
        } else if j == steps {
            FaceTag::AtUpper
        } else {
            FaceTag::Interior
        };
        let h = -(a * (x - target));
        let (glo, ghi) = pen.clarke_1d(x);
        let res = dist_to_normal_cone_shifted(h, -ghi, -glo, tag).expect("valid interval");
        if res <= THRESH {
            run_best = Some(match run_best {
                Some((best, bx)) if best <= res => (best, bx),
                _ => (res, x),
            });
        } else if let Some((_, bx)) = run_best.take() {
            points.push(bx);
        }
    }
    if let Some((_, bx)) = run_best {
        points.push(bx);
    }
    points
}

/// Constant drift of unit norm: iterates march to the face and keep
/// projecting there, the persistent-projection regime. Coordinates with a
/// nonzero direction pin at the corresponding bound; if every coordinate is
/// directed, the pinned corner is the explicit stationary point.
pub fn make_pinned_drift(box_: HyperRect, direction: Vec<f64>) -> Result<Problem> {
    let d = box_.dim();
    if direction.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: direction.len() });
    }
    let norm = norm2(&direction);
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::InvalidParameter("direction must be nonzero".into()));
    }
    let unit: Vec<f64> = direction.iter().map(|v| v / norm).collect();
    let descriptor = if unit.iter().all(|u| *u != 0.0) {
        let corner: Vec<f64> = unit
            .iter()
            .zip(box_.lower().iter().zip(box_.upper()))
            .map(|(u, (lo, hi))| if *u > 0.0 { *hi } else { *lo })
            .collect();
        StationaryDescriptor::ExplicitPoints(vec![corner])
    } else {
        StationaryDescriptor::ResidualBased { tol: 1e-6 }
    };
    Problem::builder("pinned_drift", box_, Arc::new(move |_: &[f64]| unit.clone()), 1.0)
        .stationary(descriptor)
        .build()
}
