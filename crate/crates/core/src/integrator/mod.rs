//! Adaptive Dormand–Prince integration with dense output and event location.
//!
//! The splitting line `x = 0` is always armed: a step that would carry the
//! state across it is shortened so that it ends on the line, and the next
//! step starts from there.

mod dopri;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::expr::EvalError;
use crate::roots::{self, BrentOptions};
use crate::system::SystemDefinition;
use dopri::{Interpolant, State, TrialStep};

/// Identifier of the implicit splitting-line event.
pub const SPLIT_EVENT: &str = "split";

const SPLIT_TOL: f64 = 1e-13;
const EVENT_FTOL: f64 = 1e-12;
const EVENT_TTOL: f64 = 1e-14;

const SAFE: f64 = 0.9;
const BETA: f64 = 0.04;
const EXPO1: f64 = 0.2 - BETA * 0.75;
const FAC_SHRINK: f64 = 5.0;
const FAC_GROW: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    pub h_max: f64,
    /// Initial step; estimated from the field when `None`.
    pub h_init: Option<f64>,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            h_max: f64::INFINITY,
            h_init: None,
            max_steps: 2_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self {
            rtol,
            atol,
            ..Self::default()
        }
    }

    fn check(&self) -> Result<(), IntegrationError> {
        let ok = self.rtol > 0.0
            && self.atol > 0.0
            && self.rtol.is_finite()
            && self.atol.is_finite()
            && self.h_max > 0.0
            && self.h_init.map_or(true, |h| h > 0.0 && h.is_finite())
            && self.max_steps > 0;
        if ok {
            Ok(())
        } else {
            Err(IntegrationError::InvalidConfig(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Forward,
    Backward,
}

impl Mode {
    fn sign(self) -> f64 {
        match self {
            Mode::Forward => 1.0,
            Mode::Backward => -1.0,
        }
    }
}

/// Which crossings of an event function are reported, measured along the
/// direction of integration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Rising,
    Falling,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventAction {
    Record,
    Terminate,
}

pub type EventFn = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct EventSpec {
    pub id: String,
    pub function: EventFn,
    pub direction: Direction,
    pub action: EventAction,
}

impl EventSpec {
    pub fn new(
        id: impl Into<String>,
        function: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            function: Arc::new(function),
            direction: Direction::Both,
            action: EventAction::Record,
        }
    }

    pub fn direction(mut self, direction: Direction) -> Self {
        self.direction = direction;
        self
    }

    pub fn terminal(mut self) -> Self {
        self.action = EventAction::Terminate;
        self
    }

    fn accepts(&self, before: f64, after: f64) -> Option<i8> {
        let dir = if before < 0.0 && after >= 0.0 {
            1
        } else if before > 0.0 && after <= 0.0 {
            -1
        } else {
            return None;
        };
        match (self.direction, dir) {
            (Direction::Both, _) | (Direction::Rising, 1) | (Direction::Falling, -1) => Some(dir),
            _ => None,
        }
    }
}

impl fmt::Debug for EventSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EventSpec")
            .field("id", &self.id)
            .field("direction", &self.direction)
            .field("action", &self.action)
            .finish()
    }
}

/// A located event; `direction` is +1 when the event function increases
/// along the direction of integration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EventRecord {
    pub id: String,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub direction: i8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Point {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

/// Dense output over one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub t_start: f64,
    /// End of the valid range; earlier than `t_start + h` after a terminal event.
    pub t_end: f64,
    h: f64,
    interp: Interpolant,
}

impl Segment {
    pub fn state_at(&self, t: f64) -> (f64, f64) {
        let s = self.interp.eval((t - self.t_start) / self.h);
        (s[0], s[1])
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.t_start <= self.t_end {
            (self.t_start, self.t_end)
        } else {
            (self.t_end, self.t_start)
        };
        lo <= t && t <= hi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum Termination {
    Completed,
    Event { id: String },
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub points: Vec<Point>,
    pub segments: Vec<Segment>,
    pub events: Vec<EventRecord>,
    pub termination: Termination,
    pub mode: Mode,
}

impl Trajectory {
    pub fn first(&self) -> Point {
        self.points[0]
    }

    pub fn last(&self) -> Point {
        *self.points.last().expect("trajectories are never empty")
    }

    pub fn events_named<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a EventRecord> + 'a {
        self.events.iter().filter(move |e| e.id == id)
    }

    pub fn terminated_by(&self, id: &str) -> bool {
        matches!(&self.termination, Termination::Event { id: got } if got == id)
    }

    /// Dense state at time `t` within the covered range.
    pub fn state_at(&self, t: f64) -> Option<(f64, f64)> {
        let idx = match self.mode {
            Mode::Forward => self.segments.partition_point(|s| s.t_end < t),
            Mode::Backward => self.segments.partition_point(|s| s.t_end > t),
        };
        self.segments
            .get(idx)
            .filter(|s| s.contains(t))
            .map(|s| s.state_at(t))
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid time span [{t0}, {t1}]")]
    InvalidSpan { t0: f64, t1: f64 },
    #[error("non-finite initial state ({x}, {y})")]
    NonFiniteInitial { x: f64, y: f64 },
    #[error("step size underflow at t = {t} (x = {x}, y = {y})")]
    StepUnderflow { t: f64, x: f64, y: f64 },
    #[error("exceeded {max_steps} steps at t = {t}")]
    MaxSteps { max_steps: usize, t: f64 },
    #[error("non-finite state reached at t = {t}")]
    NonFinite { t: f64 },
    #[error("vector field evaluation failed at t = {t}: {source}")]
    Eval {
        t: f64,
        #[source]
        source: EvalError,
    },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("event function has no sign change on [{t_start}, {t_end}]")]
pub struct NoSignChange {
    pub t_start: f64,
    pub t_end: f64,
}

/// Root of `f(t, x(t), y(t))` on a dense segment.
pub fn locate_event(
    segment: &Segment,
    f: &dyn Fn(f64, f64, f64) -> f64,
) -> Result<(f64, (f64, f64)), NoSignChange> {
    let g = |t: f64| {
        let (x, y) = segment.state_at(t);
        Ok::<f64, std::convert::Infallible>(f(t, x, y))
    };
    let opts = BrentOptions {
        ftol: EVENT_FTOL,
        xtol: EVENT_TTOL,
        max_iter: 200,
    };
    match roots::brent(g, segment.t_start, segment.t_end, opts) {
        Ok((t, _)) => Ok((t, segment.state_at(t))),
        Err(_) => Err(NoSignChange {
            t_start: segment.t_start,
            t_end: segment.t_end,
        }),
    }
}

struct Field<'a> {
    sys: &'a SystemDefinition,
    sign: f64,
}

impl Field<'_> {
    fn eval(&self, y: State) -> Result<State, EvalError> {
        let (dx, dy) = self.sys.rhs(y[0], y[1])?;
        Ok([self.sign * dx, self.sign * dy])
    }
}

fn finite(s: State) -> bool {
    s[0].is_finite() && s[1].is_finite()
}

fn initial_step(
    field: &Field,
    y0: State,
    k1: State,
    cfg: &IntegratorConfig,
    span: f64,
) -> Result<f64, EvalError> {
    let sk = |i: usize| cfg.atol + cfg.rtol * y0[i].abs();
    let dnf: f64 = (0..2).map(|i| (k1[i] / sk(i)).powi(2)).sum();
    let dny: f64 = (0..2).map(|i| (y0[i] / sk(i)).powi(2)).sum();
    let mut h = if dnf <= 1e-10 || dny <= 1e-10 {
        1e-6
    } else {
        (dny / dnf).sqrt() * 0.01
    };
    h = h.min(cfg.h_max).min(span);
    let y1 = [y0[0] + h * k1[0], y0[1] + h * k1[1]];
    let k2 = field.eval(y1)?;
    let der2 = (0..2)
        .map(|i| ((k2[i] - k1[i]) / sk(i)).powi(2))
        .sum::<f64>()
        .sqrt()
        / h;
    let der12 = der2.abs().max(dnf.sqrt());
    let h1 = if der12 <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / der12).powf(0.2)
    };
    Ok((100.0 * h).min(h1).min(cfg.h_max).min(span))
}

struct Run<'a> {
    field: Field<'a>,
    events: &'a [EventSpec],
    mode: Mode,
    t0: f64,
    t1: f64,
    traj: Trajectory,
    event_values: Vec<f64>,
}

impl<'a> Run<'a> {
    fn phys(&self, tau: f64) -> f64 {
        match self.mode {
            Mode::Forward => self.t0 + tau,
            Mode::Backward => self.t1 - tau,
        }
    }

    fn eval(&self, y: State, tau: f64) -> Result<State, IntegrationError> {
        self.field.eval(y).map_err(|source| IntegrationError::Eval {
            t: self.phys(tau),
            source,
        })
    }

    fn trial(&self, y: State, k1: State, h: f64, tau: f64) -> Result<TrialStep, IntegrationError> {
        let mut f = |s: State| self.field.eval(s);
        dopri::trial(&mut f, y, k1, h).map_err(|source| IntegrationError::Eval {
            t: self.phys(tau),
            source,
        })
    }

    /// Shortens a step that crosses `x = 0` so that it ends on the line.
    fn refine_crossing(
        &self,
        y0: State,
        k1: State,
        h: f64,
        step: &TrialStep,
        side: f64,
        tau: f64,
    ) -> Result<Option<(f64, TrialStep)>, IntegrationError> {
        let dense = Interpolant::new(y0, step, h);
        let mut lo = 0.0;
        for k in (0..16).rev() {
            let theta = k as f64 / 16.0;
            if side * dense.eval(theta)[0] > 0.0 {
                lo = theta;
                break;
            }
        }
        let guess = roots::brent(
            |th: f64| Ok::<f64, std::convert::Infallible>(dense.eval(th)[0]),
            lo,
            1.0,
            BrentOptions {
                ftol: 0.0,
                xtol: 1e-12,
                max_iter: 100,
            },
        )
        .map(|(th, _)| th)
        .unwrap_or(0.5 * (lo + 1.0));

        // Newton on the step length, safeguarded by a bracket.
        let (mut a, mut b) = (lo * h, h);
        let mut hs = (guess * h).clamp(a, b);
        if hs <= 0.0 {
            hs = 0.5 * b;
        }
        let mut best: Option<(f64, TrialStep)> = None;
        for _ in 0..60 {
            let st = self.trial(y0, k1, hs, tau)?;
            if !finite(st.y1) {
                return Ok(None);
            }
            let xe = st.y1[0];
            let dx = st.k7[0];
            if xe.abs() < SPLIT_TOL {
                return Ok(Some((hs, st)));
            }
            if side * xe > 0.0 {
                a = hs;
            } else {
                b = hs;
            }
            let improved = best
                .as_ref()
                .map_or(true, |(_, s)| xe.abs() < s.y1[0].abs());
            let newton = if dx != 0.0 { hs - xe / dx } else { f64::NAN };
            if improved {
                best = Some((hs, st));
            }
            hs = if newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a <= 4.0 * f64::EPSILON * b {
                break;
            }
        }
        Ok(best.filter(|(_, st)| st.y1[0].abs() < 1e-11))
    }

    /// Records an accepted step; returns `true` when a terminal event fired.
    fn accept(&mut self, y0: State, tau0: f64, h: f64, step: &TrialStep, tau1: f64) -> bool {
        let sign = self.mode.sign();
        let interp = Interpolant::new(y0, step, h);
        let t_start = self.phys(tau0);
        let t_end = self.phys(tau1);
        let mut segment = Segment {
            t_start,
            t_end,
            h: sign * h,
            interp,
        };
        let mut found: Vec<(f64, usize, EventRecord)> = Vec::new();
        for (i, ev) in self.events.iter().enumerate() {
            let after = (ev.function)(t_end, step.y1[0], step.y1[1]);
            let before = self.event_values[i];
            self.event_values[i] = after;
            let Some(dir) = ev.accepts(before, after) else {
                continue;
            };
            let (t, (x, y)) = if after == 0.0 {
                (t_end, (step.y1[0], step.y1[1]))
            } else {
                match locate_event(&segment, ev.function.as_ref()) {
                    Ok(hit) => hit,
                    Err(_) => (t_end, (step.y1[0], step.y1[1])),
                }
            };
            let progress = sign * (t - t_start);
            found.push((
                progress,
                i,
                EventRecord {
                    id: ev.id.clone(),
                    t,
                    x,
                    y,
                    direction: dir,
                },
            ));
        }
        found.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for (_, i, record) in found {
            let terminal = self.events[i].action == EventAction::Terminate;
            let (t, x, y) = (record.t, record.x, record.y);
            self.traj.events.push(record);
            if terminal {
                segment.t_end = t;
                self.traj.segments.push(segment);
                self.traj.points.push(Point { t, x, y });
                self.traj.termination = Termination::Event {
                    id: self.events[i].id.clone(),
                };
                return true;
            }
        }
        self.traj.segments.push(segment);
        self.traj.points.push(Point {
            t: t_end,
            x: step.y1[0],
            y: step.y1[1],
        });
        false
    }
}

/// Integrates `sys` from `state0` over `t_span = (t0, t1)`.
///
/// Forward mode starts at `t0`; backward mode starts at `t1` and runs the
/// negated field down to `t0`.
pub fn integrate(
    sys: &SystemDefinition,
    state0: (f64, f64),
    t_span: (f64, f64),
    config: &IntegratorConfig,
    events: &[EventSpec],
    mode: Mode,
) -> Result<Trajectory, IntegrationError> {
    config.check()?;
    let (t0, t1) = t_span;
    if !(t0.is_finite() && t1.is_finite() && t1 >= t0) {
        return Err(IntegrationError::InvalidSpan { t0, t1 });
    }
    let mut y: State = [state0.0, state0.1];
    if !finite(y) {
        return Err(IntegrationError::NonFiniteInitial { x: y[0], y: y[1] });
    }
    let span = t1 - t0;
    let mut run = Run {
        field: Field {
            sys,
            sign: mode.sign(),
        },
        events,
        mode,
        t0,
        t1,
        traj: Trajectory {
            points: Vec::new(),
            segments: Vec::new(),
            events: Vec::new(),
            termination: Termination::Completed,
            mode,
        },
        event_values: Vec::with_capacity(events.len()),
    };
    let start_t = run.phys(0.0);
    run.traj.points.push(Point {
        t: start_t,
        x: y[0],
        y: y[1],
    });
    run.event_values = events
        .iter()
        .map(|e| (e.function)(start_t, y[0], y[1]))
        .collect();
    if span == 0.0 {
        return Ok(run.traj);
    }

    let mut k1 = run.eval(y, 0.0)?;
    let mut side = if y[0] != 0.0 {
        y[0].signum()
    } else if k1[0] != 0.0 {
        k1[0].signum()
    } else {
        1.0
    };
    let mut h = match config.h_init {
        Some(h) => h.min(config.h_max).min(span),
        None => initial_step(&run.field, y, k1, config, span)
            .map_err(|source| IntegrationError::Eval { t: start_t, source })?,
    };
    let mut tau = 0.0;
    let mut facold: f64 = 1e-4;
    let mut rejected = false;
    let mut steps = 0usize;
    let mut blew_up = false;

    while tau < span {
        if steps >= config.max_steps {
            return Err(IntegrationError::MaxSteps {
                max_steps: config.max_steps,
                t: run.phys(tau),
            });
        }
        steps += 1;
        h = h.min(config.h_max);
        let mut last = false;
        if tau + 1.01 * h >= span {
            h = span - tau;
            last = true;
        }
        if h <= 1e-14 * tau.abs().max(1.0) {
            if blew_up {
                return Err(IntegrationError::NonFinite { t: run.phys(tau) });
            }
            return Err(IntegrationError::StepUnderflow {
                t: run.phys(tau),
                x: y[0],
                y: y[1],
            });
        }
        let step = run.trial(y, k1, h, tau)?;
        blew_up = !finite(step.y1) || !finite(step.err);
        if blew_up {
            h *= 0.2;
            rejected = true;
            continue;
        }

        if side * step.y1[0] < 0.0 {
            match run.refine_crossing(y, k1, h, &step, side, tau)? {
                Some((hs, st)) => {
                    let err = dopri::error_norm(&st, y, config.rtol, config.atol);
                    if err <= 1.0 {
                        let tau1 = tau + hs;
                        let dir = if side > 0.0 { -1 } else { 1 };
                        if run.accept(y, tau, hs, &st, tau1) {
                            return Ok(run.traj);
                        }
                        let t = run.phys(tau1);
                        let split = EventRecord {
                            id: SPLIT_EVENT.to_string(),
                            t,
                            x: st.y1[0],
                            y: st.y1[1],
                            direction: dir,
                        };
                        run.traj.events.push(split);
                        side = -side;
                        y = st.y1;
                        k1 = st.k7;
                        tau = tau1;
                        facold = err.max(1e-4);
                        rejected = false;
                        // the proposal h stays valid for the smooth continuation
                        continue;
                    }
                    h = hs * (SAFE * err.powf(-0.2)).clamp(0.2, 1.0);
                }
                None => h *= 0.5,
            }
            rejected = true;
            continue;
        }

        let err = dopri::error_norm(&step, y, config.rtol, config.atol);
        let fac11 = err.powf(EXPO1);
        if err <= 1.0 {
            let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(FAC_GROW, FAC_SHRINK);
            facold = err.max(1e-4);
            let tau1 = if last { span } else { tau + h };
            if run.accept(y, tau, h, &step, tau1) {
                return Ok(run.traj);
            }
            y = step.y1;
            k1 = step.k7;
            tau = tau1;
            let mut h_new = h / fac;
            if rejected {
                h_new = h_new.min(h);
            }
            rejected = false;
            h = h_new;
        } else {
            h /= FAC_SHRINK.min(fac11 / SAFE);
            rejected = true;
        }
    }
    Ok(run.traj)
}

/// Slow time spent within `radius` of the repelling branch with `x` in `band`.
///
/// The indicator boundaries are located on the dense output of every step.
pub fn time_in_tube(
    traj: &Trajectory,
    sys: &SystemDefinition,
    radius: f64,
    band: (f64, f64),
) -> f64 {
    let (a, b) = band;
    let margin = |x: f64, y: f64| -> f64 {
        let Ok(fx) = sys.f(x) else {
            return -1.0;
        };
        (radius - (y - fx).abs()).min(x - a).min(b - x)
    };
    const SUB: usize = 16;
    let mut total = 0.0;
    for seg in &traj.segments {
        let (ts, te) = (seg.t_start, seg.t_end);
        let at = |t: f64| {
            let (x, y) = seg.state_at(t);
            margin(x, y)
        };
        let mut prev_t = ts;
        let mut prev_m = at(ts);
        for k in 1..=SUB {
            let t = ts + (te - ts) * k as f64 / SUB as f64;
            let m = at(t);
            let inside_prev = prev_m > 0.0;
            let inside = m > 0.0;
            if inside_prev && inside {
                total += (t - prev_t).abs();
            } else if inside_prev != inside {
                let cut = roots::brent(
                    |s: f64| Ok::<f64, std::convert::Infallible>(at(s)),
                    prev_t,
                    t,
                    BrentOptions {
                        ftol: 0.0,
                        xtol: 1e-12,
                        max_iter: 100,
                    },
                )
                .map(|(s, _)| s)
                .unwrap_or(0.5 * (prev_t + t));
                total += if inside_prev {
                    (cut - prev_t).abs()
                } else {
                    (t - cut).abs()
                };
            }
            prev_t = t;
            prev_m = m;
        }
    }
    total * sys.eps()
}
