mod common;

use common::rng;
use pwsc::fixtures;
use pwsc::integrator::{
    integrate, Direction, EventSpec, IntegratorConfig, Mode, Trajectory, SPLIT_EVENT,
};
use pwsc::SystemDefinition;
use rand::Rng;

fn sys_a() -> SystemDefinition {
    fixtures::sys_a().with_lambda(0.01)
}

fn fixed_step(h: f64) -> IntegratorConfig {
    IntegratorConfig {
        rtol: 1e6,
        atol: 1e6,
        h_max: h,
        h_init: Some(h),
        ..IntegratorConfig::default()
    }
}

fn run(sys: &SystemDefinition, p: (f64, f64), t: f64, config: &IntegratorConfig) -> Trajectory {
    integrate(sys, p, (0.0, t), config, &[], Mode::Forward).unwrap()
}

fn random_start(r: &mut impl Rng) -> (f64, f64) {
    (r.gen_range(-1.0..1.6), r.gen_range(-1.5..1.5))
}

#[test]
fn observed_order_is_at_least_four_and_a_half() {
    // x' = -y, y' = x with exact solution (cos t, sin t)
    let sys = SystemDefinition::new("0", "0", "x", 1.0, 0.0).unwrap();
    let t = 1.5;
    let errors: Vec<f64> = [4, 8, 16, 32]
        .iter()
        .map(|&n| {
            let traj = run(&sys, (1.0, 0.0), t, &fixed_step(t / n as f64));
            assert_eq!(traj.segments.len(), n);
            let end = traj.last();
            ((end.x - t.cos()).powi(2) + (end.y - t.sin()).powi(2)).sqrt()
        })
        .collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!(order >= 4.5, "{errors:?}");
    }
}

#[test]
fn splitting_line_crossings_land_on_the_line() {
    let sys = sys_a();
    let config = IntegratorConfig::default();
    let mut r = rng(31);
    let mut crossings = 0;
    while crossings < 100 {
        let traj = run(&sys, random_start(&mut r), 20.0, &config);
        for e in traj.events_named(SPLIT_EVENT) {
            assert!(e.x.abs() < 1e-10, "{e:?}");
            let p = traj
                .points
                .iter()
                .find(|p| p.t == e.t)
                .expect("crossing is a step boundary");
            assert_eq!((p.x, p.y), (e.x, e.y));
            crossings += 1;
        }
    }
}

#[test]
fn crossing_count_parity_matches_the_end_side() {
    let sys = sys_a();
    let config = IntegratorConfig::default();
    let mut r = rng(32);
    for _ in 0..100 {
        let p0 = random_start(&mut r);
        if p0.0.abs() < 1e-3 {
            continue;
        }
        let traj = run(&sys, p0, r.gen_range(1.0..40.0), &config);
        let n = traj.events_named(SPLIT_EVENT).count();
        let end = traj.last().x;
        if end == 0.0 {
            continue;
        }
        assert_eq!(
            n % 2 == 1,
            (p0.0 > 0.0) != (end > 0.0),
            "{p0:?} -> {end}, {n} crossings"
        );
        let signs: Vec<i8> = traj
            .events_named(SPLIT_EVENT)
            .map(|e| e.direction)
            .collect();
        assert!(signs.windows(2).all(|w| w[0] == -w[1]), "{signs:?}");
    }
}

#[test]
fn halving_the_step_cap_changes_little() {
    let sys = sys_a();
    let mut r = rng(33);
    let rtol = 1e-9;
    for _ in 0..20 {
        let p0 = random_start(&mut r);
        let t = 5.0;
        let fine = IntegratorConfig {
            h_max: 0.05,
            ..IntegratorConfig::with_tolerances(rtol, 1e-12)
        };
        let coarse = IntegratorConfig {
            h_max: 0.1,
            ..fine.clone()
        };
        let a = run(&sys, p0, t, &fine).last();
        let b = run(&sys, p0, t, &coarse).last();
        let scale = 1.0 + a.x.abs().max(a.y.abs());
        assert!((a.x - b.x).abs() <= 10.0 * rtol * scale, "{a:?} vs {b:?}");
        assert!((a.y - b.y).abs() <= 10.0 * rtol * scale, "{a:?} vs {b:?}");
    }
}

#[test]
fn backward_integration_retraces_forward() {
    let sys = sys_a();
    let config = IntegratorConfig::with_tolerances(1e-11, 1e-13);
    let mut r = rng(34);
    for _ in 0..20 {
        let p0 = random_start(&mut r);
        let t = r.gen_range(0.5..3.0);
        let fwd = run(&sys, p0, t, &config);
        let end = fwd.last();
        let back = integrate(&sys, (end.x, end.y), (0.0, t), &config, &[], Mode::Backward).unwrap();
        let start = back.last();
        assert_eq!(back.first().t, t);
        assert_eq!(start.t, 0.0);
        assert!(
            (start.x - p0.0).abs() < 1e-8 && (start.y - p0.1).abs() < 1e-8,
            "{p0:?} vs {start:?}"
        );
        assert_eq!(
            fwd.events_named(SPLIT_EVENT).count(),
            back.events_named(SPLIT_EVENT).count()
        );
    }
}

#[test]
fn time_is_strictly_monotone() {
    let sys = sys_a();
    let config = IntegratorConfig::default();
    let mut r = rng(35);
    for k in 0..40 {
        let mode = if k % 2 == 0 {
            Mode::Forward
        } else {
            Mode::Backward
        };
        // backward runs blow up in finite time away from the repelling branch
        let span = if mode == Mode::Forward { 10.0 } else { 1.0 };
        let traj = integrate(&sys, random_start(&mut r), (0.0, span), &config, &[], mode).unwrap();
        let ts: Vec<f64> = traj.points.iter().map(|p| p.t).collect();
        match mode {
            Mode::Forward => assert!(ts.windows(2).all(|w| w[1] > w[0])),
            Mode::Backward => assert!(ts.windows(2).all(|w| w[1] < w[0])),
        }
        for (seg, w) in traj.segments.iter().zip(traj.points.windows(2)) {
            assert_eq!((seg.t_start, seg.t_end), (w[0].t, w[1].t));
        }
    }
}

#[test]
fn near_grazing_crossings_are_stable_under_step_refinement() {
    // starts close to the line with small |x'| so the orbit nearly touches x = 0
    let sys = sys_a();
    let mut r = rng(36);
    for _ in 0..50 {
        let x0 = r.gen_range(1e-4..1e-2) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
        let y0 = sys.f(x0).unwrap() + r.gen_range(-1e-3..1e-3);
        let base = IntegratorConfig {
            h_max: 0.05,
            ..IntegratorConfig::with_tolerances(1e-10, 1e-13)
        };
        let fine = IntegratorConfig {
            h_max: 0.005,
            ..base.clone()
        };
        let a = run(&sys, (x0, y0), 3.0, &base);
        let b = run(&sys, (x0, y0), 3.0, &fine);
        assert_eq!(
            a.events_named(SPLIT_EVENT).count() % 2,
            b.events_named(SPLIT_EVENT).count() % 2,
            "({x0}, {y0})"
        );
        assert!((a.last().x - b.last().x).abs() < 1e-7);
    }
}

#[test]
fn user_events_are_located_precisely() {
    let sys = sys_a();
    let config = IntegratorConfig::default();
    let events = [EventSpec::new("level", |_, _, y| y - 0.5)];
    let mut r = rng(37);
    let mut seen = 0;
    for _ in 0..30 {
        let traj = integrate(
            &sys,
            random_start(&mut r),
            (0.0, 30.0),
            &config,
            &events,
            Mode::Forward,
        )
        .unwrap();
        for e in traj.events_named("level") {
            assert!((e.y - 0.5).abs() < 1e-12, "{e:?}");
            let (x, y) = traj.state_at(e.t).unwrap();
            assert!((x - e.x).abs() < 1e-9 && (y - e.y).abs() < 1e-9);
            seen += 1;
        }
    }
    assert!(seen > 10);
}

#[test]
fn direction_filters_respect_time_orientation() {
    let sys = sys_a();
    let config = IntegratorConfig::default();
    let rising = [EventSpec::new("up", |_, x, _| x - 0.5).direction(Direction::Rising)];
    for mode in [Mode::Forward, Mode::Backward] {
        let traj = integrate(&sys, (0.0, 1.0), (0.0, 40.0), &config, &rising, mode).unwrap();
        assert!(traj.events_named("up").all(|e| e.direction == 1));
    }
}
