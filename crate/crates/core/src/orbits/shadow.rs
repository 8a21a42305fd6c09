use serde::Serialize;

use super::{OrbitError, OrbitSettings, PoincareSection};
use crate::expr::Expression;
use crate::integrator::{
    self, Direction, EventSpec, IntegratorConfig, Mode, Termination, Trajectory,
};
use crate::roots::{self, BrentOptions};
use crate::system::{make_shadow, SystemDefinition, SystemError};

const REENTRY: &str = "reentry";
const ESCAPE: &str = "escape";
const GRID: usize = 1000;
const SUBSAMPLES: usize = 8;
const ORDERING_SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShadowSample {
    pub t: f64,
    pub x_true: f64,
    pub y_true: f64,
    pub r_true: f64,
    pub x_shadow: f64,
    pub y_shadow: f64,
    pub r_shadow: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ShadowComparison {
    pub y_c: f64,
    pub lambda: f64,
    /// Largest `R_true - R_shadow` at equal polar angle; at most zero when
    /// the shadow encloses the true trajectory.
    pub max_violation: f64,
    /// Largest `R_true - R_shadow` at equal time.
    pub max_equal_time_difference: f64,
    /// Height of the return to the splitting line, if it happens.
    pub reentry_true: Option<f64>,
    pub reentry_shadow: Option<f64>,
    pub samples: Vec<ShadowSample>,
}

impl ShadowComparison {
    pub fn passes(&self) -> bool {
        self.max_violation <= 1e-8 * (1.0 + self.y_c * self.y_c)
    }
}

fn energy(x: f64, y: f64) -> f64 {
    0.5 * (x * x + y * y)
}

/// Polar angle in the left half plane, decreasing from `pi/2` at the entry
/// point to `-pi/2` at the exit point.
fn angle(x: f64, y: f64) -> f64 {
    y.atan2(-x)
}

fn excursion(
    sys: &SystemDefinition,
    y_c: f64,
    config: &IntegratorConfig,
) -> Result<Trajectory, OrbitError> {
    let (lo, hi) = sys.x_window();
    let ybound = 1e3 * (1.0 + y_c);
    let events = [
        EventSpec::new(REENTRY, |_, x, _| x)
            .direction(Direction::Rising)
            .terminal(),
        EventSpec::new(ESCAPE, move |_, x, _| x - lo).terminal(),
        EventSpec::new(ESCAPE, move |_, x, _| x - hi).terminal(),
        EventSpec::new(ESCAPE, move |_, _, y| y.abs() - ybound).terminal(),
    ];
    let t_max = 100.0 / sys.eps();
    Ok(integrator::integrate(
        sys,
        (0.0, y_c),
        (0.0, t_max),
        config,
        &events,
        Mode::Forward,
    )?)
}

fn reentry(traj: &Trajectory) -> Option<f64> {
    matches!(&traj.termination, Termination::Event { id } if id == REENTRY).then(|| traj.last().y)
}

/// Dense samples of the part of a trajectory in the left half plane.
fn left_samples(traj: &Trajectory) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for seg in &traj.segments {
        for k in 0..SUBSAMPLES {
            let t = seg.t_start + (seg.t_end - seg.t_start) * k as f64 / SUBSAMPLES as f64;
            let (x, y) = seg.state_at(t);
            if x < 0.0 {
                out.push((x, y));
            }
        }
    }
    out
}

/// `R` of the shadow trajectory where its polar angle equals `target`.
fn energy_at_angle(shadow: &Trajectory, angles: &[f64], target: f64) -> Option<f64> {
    let i = (1..angles.len()).find(|&i| angles[i - 1] >= target && angles[i] <= target)?;
    let seg = shadow
        .segments
        .iter()
        .find(|s| s.contains(0.5 * (shadow.points[i - 1].t + shadow.points[i].t)))?;
    let f = |t: f64| -> Result<f64, std::convert::Infallible> {
        let (x, y) = seg.state_at(t);
        Ok(angle(x, y) - target)
    };
    let opts = BrentOptions {
        ftol: 1e-15,
        xtol: 1e-15,
        max_iter: 200,
    };
    let t = match roots::brent(f, seg.t_start, seg.t_end, opts) {
        Ok((t, _)) => t,
        Err(_) => return None,
    };
    let (x, y) = seg.state_at(t);
    Some(energy(x, y))
}

fn left_ordering(
    true_sys: &SystemDefinition,
    shadow: &SystemDefinition,
    x_lo: f64,
) -> Result<bool, SystemError> {
    if !(x_lo < 0.0) {
        return Ok(true);
    }
    for i in 0..ORDERING_SAMPLES {
        let x = x_lo * (1.0 - i as f64 / ORDERING_SAMPLES as f64);
        if !(shadow.f(x)? < true_sys.f(x)?) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Compares the excursion into `x < 0` started at `(0, y_c)` with the same
/// excursion of the shadow system.
pub fn shadow_compare(
    sys: &SystemDefinition,
    y_c: f64,
    lambda: f64,
    replacement: Option<&Expression>,
) -> Result<ShadowComparison, OrbitError> {
    if !(y_c > 0.0 && y_c.is_finite()) {
        return Err(OrbitError::Hypothesis(format!(
            "entry height {y_c} must be positive"
        )));
    }
    let true_sys = sys.with_lambda(lambda);
    let shadow_sys = make_shadow(&true_sys, replacement)?;
    let config = IntegratorConfig::with_tolerances(1e-12, 1e-14);
    let true_traj = excursion(&true_sys, y_c, &config)?;
    let shadow_traj = excursion(&shadow_sys, y_c, &config)?;

    let x_lo = true_traj
        .points
        .iter()
        .chain(&shadow_traj.points)
        .map(|p| p.x)
        .fold(0.0f64, f64::min);
    if !left_ordering(&true_sys, &shadow_sys, x_lo)? {
        return Err(OrbitError::Hypothesis(format!(
            "the shadow left piece is not below the true one on [{x_lo}, 0)"
        )));
    }

    let shadow_angles: Vec<f64> = shadow_traj.points.iter().map(|p| angle(p.x, p.y)).collect();
    let mut max_violation = f64::NEG_INFINITY;
    for (x, y) in left_samples(&true_traj) {
        if let Some(r) = energy_at_angle(&shadow_traj, &shadow_angles, angle(x, y)) {
            max_violation = max_violation.max(energy(x, y) - r);
        }
    }
    if max_violation == f64::NEG_INFINITY {
        max_violation = 0.0;
    }

    let t_end = true_traj.last().t.min(shadow_traj.last().t);
    let mut samples = Vec::with_capacity(GRID + 1);
    let mut max_equal_time_difference = f64::NEG_INFINITY;
    for t in roots::linspace(0.0, t_end, GRID) {
        let (Some((xt, yt)), Some((xs, ys))) = (true_traj.state_at(t), shadow_traj.state_at(t))
        else {
            continue;
        };
        let s = ShadowSample {
            t,
            x_true: xt,
            y_true: yt,
            r_true: energy(xt, yt),
            x_shadow: xs,
            y_shadow: ys,
            r_shadow: energy(xs, ys),
        };
        max_equal_time_difference = max_equal_time_difference.max(s.r_true - s.r_shadow);
        samples.push(s);
    }

    Ok(ShadowComparison {
        y_c,
        lambda,
        max_violation,
        max_equal_time_difference,
        reentry_true: reentry(&true_traj),
        reentry_shadow: reentry(&shadow_traj),
        samples,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct CycleContainment {
    pub lambda: f64,
    pub true_x_min: f64,
    pub true_r_max: f64,
    pub shadow_x_min: f64,
    pub shadow_r_max: f64,
}

impl CycleContainment {
    pub fn holds(&self, tol: f64) -> bool {
        self.true_x_min >= self.shadow_x_min - tol && self.true_r_max <= self.shadow_r_max + tol
    }
}

/// Attracting cycles of the system and of its shadow at the same parameter.
pub fn compare_cycles(
    sys: &SystemDefinition,
    lambda: f64,
    replacement: Option<&Expression>,
    settings: &OrbitSettings,
) -> Result<Option<CycleContainment>, OrbitError> {
    let shadow_sys = make_shadow(sys, replacement)?;
    let cycle = |s: &SystemDefinition| -> Result<_, OrbitError> {
        let section = PoincareSection::new(s, lambda, settings.clone())?;
        section.find_limit_cycle(Mode::Forward, section.default_bracket())
    };
    let (Some(t), Some(s)) = (cycle(sys)?, cycle(&shadow_sys)?) else {
        return Ok(None);
    };
    Ok(Some(CycleContainment {
        lambda,
        true_x_min: t.x_min,
        true_r_max: t.r_max,
        shadow_x_min: s.x_min,
        shadow_r_max: s.r_max,
    }))
}
