//! Cross-module invariants, mostly property-based: the exact geometry laws,
//! prox-vs-oracle agreement, step-identity facts on random runs, and the
//! interpolant bookkeeping identities.

use std::sync::Arc;

use proptest::prelude::*;

use projsa::diagnostics::{partial_sum_stat, Interpolant, InterpolantKind, TrajectoryView};
use projsa::engine::{run, verify_rm_trajectory, Algorithm, Problem, RecordPolicy, RunSpec};
use projsa::geometry::{in_normal_cone, project_tangent, FaceTag, HyperRect};
use projsa::odeflow::{cone_corrections_valid, projected_euler};
use projsa::problems::{make_pinned_drift, make_quadratic};
use projsa::schedules::{EPart, NoiseModel, RPart, StepSchedule};
use projsa::prox::Penalty;

fn box_strategy(dim: usize) -> impl Strategy<Value = HyperRect> {
    proptest::collection::vec((-5.0f64..5.0, 0.05f64..4.0), dim).prop_map(|pairs| {
        let lower: Vec<f64> = pairs.iter().map(|(a, _)| *a).collect();
        let upper: Vec<f64> = pairs.iter().map(|(a, w)| a + w).collect();
        HyperRect::new(lower, upper).unwrap()
    })
}

proptest! {
    #[test]
    fn projection_laws(
        (rect, x, y) in (1usize..5).prop_flat_map(|d| {
            (
                box_strategy(d),
                proptest::collection::vec(-10.0f64..10.0, d),
                proptest::collection::vec(-10.0f64..10.0, d),
            )
        })
    ) {
        let px = rect.project(&x).unwrap();
        let py = rect.project(&y).unwrap();

        // idempotence, bitwise
        let pxx = rect.project(&px).unwrap();
        prop_assert_eq!(&pxx, &px);

        // nonexpansiveness with zero tolerance
        let d_in: f64 = px.iter().zip(&py).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let d_out: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        prop_assert!(d_in <= d_out);

        // residual-cone law (Moreau decomposition for boxes)
        let resid: Vec<f64> = x.iter().zip(&px).map(|(a, b)| a - b).collect();
        let sig = rect.face_signature_default(&px).unwrap();
        prop_assert!(in_normal_cone(&resid, &sig).unwrap());
    }

    #[test]
    fn tangent_normal_complementarity(
        (rect, point, v, w_mag) in (1usize..5).prop_flat_map(|d| {
            (
                box_strategy(d),
                proptest::collection::vec(-10.0f64..10.0, d),
                proptest::collection::vec(-10.0f64..10.0, d),
                proptest::collection::vec(0.0f64..10.0, d),
            )
        })
    ) {
        let p = rect.project(&point).unwrap();
        let sig = rect.face_signature_default(&p).unwrap();
        let pt = project_tangent(&v, &sig).unwrap();

        // Moreau split: tangential part plus remainder reassembles v bitwise,
        // and the remainder lies in the normal cone
        let rem: Vec<f64> = v.iter().zip(&pt).map(|(a, b)| a - b).collect();
        for i in 0..v.len() {
            prop_assert_eq!(pt[i] + rem[i], v[i]);
        }
        prop_assert!(in_normal_cone(&rem, &sig).unwrap());

        // <proj_T v, w> <= 0 for every w in the normal cone
        let w: Vec<f64> = sig
            .tags()
            .iter()
            .zip(&w_mag)
            .map(|(tag, m)| match tag {
                FaceTag::Interior => 0.0,
                FaceTag::AtLower => -m,
                FaceTag::AtUpper => *m,
            })
            .collect();
        let inner: f64 = pt.iter().zip(&w).map(|(a, b)| a * b).sum();
        prop_assert!(inner <= 0.0);
    }

    #[test]
    fn prox_agrees_with_grid_oracle(
        lambda in 0.0f64..2.5,
        shape in 1.01f64..5.0,
        gamma in 0.02f64..1.8,
        v in -3.5f64..3.5,
        variant in 0usize..4,
    ) {
        let pen = match variant {
            0 => Penalty::Zero,
            1 => Penalty::l1(lambda).unwrap(),
            2 => Penalty::mcp(lambda, 1.0 + shape).unwrap(),
            _ => Penalty::scad(lambda, 2.0 + shape).unwrap(),
        };
        let got = pen.prox_1d(v, gamma);
        // independent dense scan between 0 and v (the minimizer bracket)
        let (lo, hi) = if v >= 0.0 { (-1e-9, v + 1e-9) } else { (v - 1e-9, 1e-9) };
        let mut best = f64::INFINITY;
        let mut best_y = lo;
        let steps = ((hi - lo) / 2e-6).ceil() as usize;
        for i in 0..=steps {
            let y = lo + (hi - lo) * i as f64 / steps.max(1) as f64;
            let obj = pen.value_1d(y) + (y - v) * (y - v) / (2.0 * gamma);
            if obj < best - 1e-12 || (obj <= best + 1e-12 && y.abs() < best_y.abs()) {
                best = best.min(obj);
                best_y = y;
            }
        }
        prop_assert!((got - best_y).abs() <= 1e-5, "got {}, oracle {}", got, best_y);
    }

    #[test]
    fn schedule_time_increments_are_gammas(
        gamma0 in 0.05f64..2.0,
        alpha in 0.51f64..1.0,
        n in 1u64..200,
    ) {
        let s = StepSchedule::polynomial(gamma0, alpha).unwrap();
        let t_prev = s.cumulative_time(n - 1).unwrap();
        let t = s.cumulative_time(n).unwrap();
        // left-to-right summation: the increment is one fp add of gamma_n
        prop_assert_eq!(t.to_bits(), (t_prev + s.gamma(n).unwrap()).to_bits());
    }
}

#[test]
fn rm_runs_satisfy_step_identities_across_problems() {
    let quad_in = make_quadratic(HyperRect::cube(2, 0.0, 1.0).unwrap(), vec![0.3, 0.8], vec![1.0, 2.0]).unwrap();
    let quad_out = make_quadratic(HyperRect::cube(1, 0.0, 1.0).unwrap(), vec![2.0], vec![1.0]).unwrap();
    let pinned = make_pinned_drift(HyperRect::cube(2, -1.0, 1.0).unwrap(), vec![1.0, -1.0]).unwrap();
    for (problem, sigma) in [(&quad_in, 0.1), (&quad_out, 0.1), (&pinned, 0.05)] {
        for seed in 0..3u64 {
            let noise = NoiseModel::new(
                EPart::GaussianIid { sigma },
                RPart::PowerBias { c: vec![0.2; problem.dim()], beta: 1.0 },
            )
            .unwrap();
            let spec = RunSpec {
                n_steps: 3_000,
                seed,
                ..RunSpec::new(
                    problem,
                    Algorithm::Rm,
                    StepSchedule::polynomial(1.0, 1.0).unwrap(),
                    noise,
                )
            };
            let traj = run(&spec).unwrap();
            for rec in &traj.records {
                assert!(problem.bounds().contains(&rec.x));
            }
            let report = verify_rm_trajectory(problem, &traj).unwrap();
            assert!(report.ok(4), "{}: {:?}", problem.id(), report);
        }
    }
}

#[test]
fn interpolant_increment_bookkeeping() {
    // X(t_m) - X(t_{n-1}) telescopes the recorded increments exactly
    let p = make_quadratic(HyperRect::cube(1, 0.0, 1.0).unwrap(), vec![2.0], vec![1.0]).unwrap();
    let spec = RunSpec {
        x0: vec![0.0],
        n_steps: 400,
        seed: 7,
        ..RunSpec::new(
            &p,
            Algorithm::Rm,
            StepSchedule::polynomial(1.0, 1.0).unwrap(),
            NoiseModel::gaussian(0.1).unwrap(),
        )
    };
    let traj = run(&spec).unwrap();
    let view = TrajectoryView::of(&traj);
    let x1 = Interpolant::new(&view, InterpolantKind::State, 1).unwrap();
    for (n, m) in [(1usize, 5usize), (3, 17), (50, 399)] {
        let t_m = traj.records[m - 1].t;
        let t_prev = if n == 1 { 0.0 } else { traj.records[n - 2].t };
        let lhs = x1.eval(t_m).unwrap()[0] - x1.eval(t_prev).unwrap()[0];
        let direct = traj.records[m - 1].x[0]
            - if n == 1 { traj.meta.x_init[0] } else { traj.records[n - 2].x[0] };
        assert_eq!(lhs.to_bits(), direct.to_bits());
    }
}

#[test]
fn pinned_face_projection_sum_is_monotone() {
    // on a window where a coordinate stays at the upper face with outward
    // drift, the accumulated projection for that coordinate never decreases
    let p = make_pinned_drift(HyperRect::cube(2, 0.0, 1.0).unwrap(), vec![1.0, 0.0]).unwrap();
    let noise = NoiseModel::new(EPart::GaussianIid { sigma: 0.05 }, RPart::None).unwrap();
    let spec = RunSpec {
        x0: vec![1.0, 0.5],
        n_steps: 2_000,
        seed: 1,
        ..RunSpec::new(&p, Algorithm::Rm, StepSchedule::polynomial(1.0, 1.0).unwrap(), noise)
    };
    let traj = run(&spec).unwrap();
    let mut z0 = 0.0f64;
    let mut prev = 0.0f64;
    for rec in &traj.records {
        if rec.x[0] == 1.0 {
            z0 += rec.proj[0];
            assert!(z0 >= prev);
            prev = z0;
        }
    }
    assert!(z0 > 0.0);
}

#[test]
fn partial_sum_stat_windows_nest_on_engine_runs() {
    let p = make_quadratic(HyperRect::cube(1, 0.0, 1.0).unwrap(), vec![2.0], vec![1.0]).unwrap();
    let spec = RunSpec {
        x0: vec![0.0],
        n_steps: 2_000,
        seed: 5,
        ..RunSpec::new(
            &p,
            Algorithm::Rm,
            StepSchedule::polynomial(1.0, 1.0).unwrap(),
            NoiseModel::gaussian(0.1).unwrap(),
        )
    };
    let traj = run(&spec).unwrap();
    let view = TrajectoryView::of(&traj);
    let mut prev = f64::INFINITY;
    for delta in [1.0, 0.5, 0.25, 0.1, 0.05] {
        let s = partial_sum_stat(&view, 10, delta).unwrap();
        assert!(s <= prev);
        prev = s;
    }
}

#[test]
fn euler_cone_corrections_always_valid() {
    let problems = vec![
        make_quadratic(HyperRect::cube(2, 0.0, 1.0).unwrap(), vec![2.0, -1.0], vec![1.0, 3.0]).unwrap(),
        make_pinned_drift(HyperRect::cube(3, -1.0, 1.0).unwrap(), vec![1.0, 1.0, -1.0]).unwrap(),
    ];
    for p in &problems {
        let x0 = p.bounds().center();
        let ode = projected_euler(p, &x0, 0.02, 5.0).unwrap();
        assert!(cone_corrections_valid(p, &ode).unwrap());
        for s in &ode.states {
            assert!(p.bounds().contains(s));
        }
    }
}

#[test]
fn thinned_runs_preserve_requested_windows() {
    let p = make_quadratic(HyperRect::cube(1, 0.0, 1.0).unwrap(), vec![2.0], vec![1.0]).unwrap();
    let spec = RunSpec {
        x0: vec![0.0],
        n_steps: 5_000,
        seed: 2,
        record: RecordPolicy::Ranges { ranges: vec![(99, 400), (2_000, 2_600)] },
        ..RunSpec::new(
            &p,
            Algorithm::Rm,
            StepSchedule::polynomial(1.0, 1.0).unwrap(),
            NoiseModel::gaussian(0.1).unwrap(),
        )
    };
    let traj = run(&spec).unwrap();
    let view = TrajectoryView::of(&traj);
    // diagnostics resolve inside each contiguous block and refuse elsewhere
    assert!(partial_sum_stat(&view, 100, 0.05).unwrap() >= 0.0);
    assert!(partial_sum_stat(&view, 2_001, 0.05).unwrap() >= 0.0);
    assert!(partial_sum_stat(&view, 1_000, 0.05).is_err());
}
