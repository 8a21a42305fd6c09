//! Periodic orbits through a Poincaré return map on the upward vertical ray
//! from the equilibrium.

mod shadow;
mod sweep;

pub use shadow::{
    compare_cycles, shadow_compare, CycleContainment, ShadowComparison, ShadowSample,
};
pub use sweep::{
    detect_bistability, sweep_amplitude, Bistability, SweepOptions, SweepPoint, SweepResult,
};

use serde::Serialize;
use thiserror::Error;

use crate::bifurcation::{local_equilibrium, BifurcationError, Equilibrium};
use crate::integrator::{
    self, EventSpec, IntegrationError, IntegratorConfig, Mode, Point, Trajectory,
};
use crate::roots::{self, BrentOptions, RootError, Sample};
use crate::system::{find_x_max, SystemDefinition, SystemError};

const SECTION: &str = "section";
const ARRIVED: &str = "equilibrium";
const ESCAPE: &str = "escape";
const XDOT: &str = "xdot";
const RDOT: &str = "rdot";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrbitError {
    #[error("no return to the section within t = {t_max}")]
    NoReturn { t_max: f64 },
    #[error("trajectory converged to the equilibrium")]
    ReachedEquilibrium,
    #[error("trajectory left the domain at ({x}, {y})")]
    Escape { x: f64, y: f64 },
    #[error("section crossing is not transverse (x' = {xdot})")]
    NotTransverse { xdot: f64 },
    #[error("section height {y} must lie above the equilibrium at {y_eq}")]
    BelowEquilibrium { y: f64, y_eq: f64 },
    #[error("invalid bracket [{a}, {b}]")]
    InvalidBracket { a: f64, b: f64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Bifurcation(#[from] BifurcationError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Knobs shared by every return-map based computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitSettings {
    pub integrator: IntegratorConfig,
    /// Longest excursion allowed before a return, in slow time.
    pub t_max_slow: f64,
    /// Number of log-spaced section heights scanned for a cycle.
    pub scan_points: usize,
    /// Innermost scanned offset relative to the outermost one.
    pub inner_offset: f64,
    pub thresholds: CycleThresholds,
}

impl Default for OrbitSettings {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::with_tolerances(1e-10, 1e-13),
            t_max_slow: 100.0,
            scan_points: 48,
            inner_offset: 1e-7,
            thresholds: CycleThresholds::default(),
        }
    }
}

/// Tunable constants of the cycle taxonomy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleThresholds {
    /// Amplitude below this fraction of `x_M` is a small cycle.
    pub small_fraction: f64,
    /// Tube radius around the repelling branch as a multiple of `eps`.
    pub tube_radius_eps: f64,
    /// Minimum slow time near the repelling branch for a canard.
    pub tube_slow_time: f64,
    /// The tube is measured for `x` in this band, as fractions of `x_M`.
    pub band: (f64, f64),
}

impl Default for CycleThresholds {
    fn default() -> Self {
        Self {
            small_fraction: 0.1,
            tube_radius_eps: 2.0,
            tube_slow_time: 0.1,
            band: (0.05, 0.95),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CycleType {
    SmallCycle,
    CanardNoHead,
    CanardWithHead,
    Relaxation,
}

impl CycleType {
    pub fn label(self) -> &'static str {
        match self {
            CycleType::SmallCycle => "small_cycle",
            CycleType::CanardNoHead => "canard_no_head",
            CycleType::CanardWithHead => "canard_with_head",
            CycleType::Relaxation => "relaxation",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Attracting,
    Repelling,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodicOrbit {
    pub lambda: f64,
    pub section_x: f64,
    pub section_y: f64,
    /// Fast-time period.
    pub period: f64,
    #[serde(skip)]
    pub points: Vec<Point>,
    #[serde(skip)]
    pub trajectory: Trajectory,
    pub x_min: f64,
    pub x_max: f64,
    pub amplitude: f64,
    /// Largest `(x^2 + y^2) / 2` along the orbit.
    pub r_max: f64,
    pub stability: Stability,
    /// Return-map derivative in forward time.
    pub multiplier: f64,
    /// `|P(y*) - y*|` at the reported section height.
    pub residual: f64,
    pub tube_time: f64,
    pub cycle_type: CycleType,
}

impl PeriodicOrbit {
    pub fn closure_gap(&self) -> f64 {
        let (a, b) = (self.points[0], self.points[self.points.len() - 1]);
        (a.x - b.x).hypot(a.y - b.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReturnHit {
    pub y: f64,
    pub time: f64,
}

/// The section `{x = x_eq, y > y_eq}` of a system at a fixed `lambda`.
#[derive(Debug, Clone)]
pub struct PoincareSection {
    pub sys: SystemDefinition,
    pub equilibrium: Equilibrium,
    pub x_max_fold: f64,
    pub settings: OrbitSettings,
}

impl PoincareSection {
    pub fn new(
        sys: &SystemDefinition,
        lambda: f64,
        settings: OrbitSettings,
    ) -> Result<Self, OrbitError> {
        let sys = sys.with_lambda(lambda);
        let equilibrium = local_equilibrium(&sys, lambda)?;
        let x_max_fold = find_x_max(&sys, sys.x_window().1)?;
        Ok(Self {
            sys,
            equilibrium,
            x_max_fold,
            settings,
        })
    }

    pub fn lambda(&self) -> f64 {
        self.sys.lambda()
    }

    pub fn t_max(&self) -> f64 {
        self.settings.t_max_slow / self.sys.eps()
    }

    /// Offset above the equilibrium that safely encloses any cycle.
    pub fn outer_offset(&self) -> f64 {
        let top = self.sys.f(self.x_max_fold).unwrap_or(1.0);
        let gap = (top - self.equilibrium.y).max(0.0);
        let outer = 2.0 * (gap + top.abs());
        if outer > 0.0 {
            outer
        } else {
            1.0
        }
    }

    fn escape_events(&self) -> Vec<EventSpec> {
        let (lo, hi) = self.sys.x_window();
        let ybound = [lo, hi]
            .iter()
            .filter_map(|&x| self.sys.f(x).ok())
            .fold(1.0f64, |m, v| m.max(v.abs()))
            * 10.0;
        vec![
            EventSpec::new(ESCAPE, move |_, x, _| x - lo).terminal(),
            EventSpec::new(ESCAPE, move |_, x, _| x - hi).terminal(),
            EventSpec::new(ESCAPE, move |_, _, y| y.abs() - ybound).terminal(),
        ]
    }

    fn section_event(&self, mode: Mode) -> EventSpec {
        let x_eq = self.equilibrium.x;
        let direction = match mode {
            Mode::Forward => integrator::Direction::Falling,
            Mode::Backward => integrator::Direction::Rising,
        };
        EventSpec::new(SECTION, move |_, x, _| x - x_eq)
            .direction(direction)
            .terminal()
    }

    fn run(&self, y: f64, mode: Mode, extra: Vec<EventSpec>) -> Result<Trajectory, OrbitError> {
        let (x_eq, y_eq) = (self.equilibrium.x, self.equilibrium.y);
        if !(y > y_eq) {
            return Err(OrbitError::BelowEquilibrium { y, y_eq });
        }
        let mut events = vec![self.section_event(mode)];
        let settles = match mode {
            Mode::Forward => self.equilibrium.local_type.is_stable(),
            Mode::Backward => !self.equilibrium.local_type.is_stable(),
        };
        if settles {
            let near = (1e-6 * (y - y_eq)).max(1e-12);
            events.push(
                EventSpec::new(ARRIVED, move |_, x, y| (x - x_eq).hypot(y - y_eq) - near)
                    .direction(integrator::Direction::Falling)
                    .terminal(),
            );
        }
        events.extend(self.escape_events());
        events.extend(extra);
        let t_max = self.t_max();
        let traj = integrator::integrate(
            &self.sys,
            (x_eq, y),
            (0.0, t_max),
            &self.settings.integrator,
            &events,
            mode,
        )?;
        match &traj.termination {
            integrator::Termination::Completed => Err(OrbitError::NoReturn { t_max }),
            integrator::Termination::Event { id } if id == ARRIVED => {
                Err(OrbitError::ReachedEquilibrium)
            }
            integrator::Termination::Event { id } if id == ESCAPE => {
                let p = traj.last();
                Err(OrbitError::Escape { x: p.x, y: p.y })
            }
            _ => Ok(traj),
        }
    }

    /// Next crossing height of the section in the given time direction.
    pub fn return_map(&self, y: f64, mode: Mode) -> Result<ReturnHit, OrbitError> {
        let traj = self.run(y, mode, Vec::new())?;
        let hit = traj.last();
        let (xdot, _) = self.sys.rhs(hit.x, hit.y).map_err(SystemError::from)?;
        if xdot.abs() <= 1e-10 {
            return Err(OrbitError::NotTransverse { xdot });
        }
        Ok(ReturnHit {
            y: hit.y,
            time: (hit.t - traj.first().t).abs(),
        })
    }

    fn displacement(&self, y: f64, mode: Mode) -> Option<f64> {
        self.return_map(y, mode).ok().map(|h| h.y - y)
    }

    /// Limit cycle through the section between heights `bracket`, searched
    /// from the inside out in the given time direction.
    pub fn find_limit_cycle(
        &self,
        mode: Mode,
        bracket: (f64, f64),
    ) -> Result<Option<PeriodicOrbit>, OrbitError> {
        let y_eq = self.equilibrium.y;
        let (da, db) = (bracket.0 - y_eq, bracket.1 - y_eq);
        if !(da > 0.0 && db > da && db.is_finite()) {
            return Err(OrbitError::InvalidBracket {
                a: bracket.0,
                b: bracket.1,
            });
        }
        let n = self.settings.scan_points.max(2);
        let ratio = (db / da).powf(1.0 / (n - 1) as f64);
        let mut prev: Option<Sample> = None;
        for k in 0..n {
            let d = if k == n - 1 {
                db
            } else {
                da * ratio.powi(k as i32)
            };
            let y = y_eq + d;
            let s = Sample {
                x: y,
                value: self.displacement(y, mode),
            };
            if let (Some(p), Some(v)) = (prev, s.value) {
                let pv = p.value.unwrap_or(0.0);
                if pv > 0.0 && v <= 0.0 {
                    return self.polish(mode, p.x, y).map(Some);
                }
            }
            prev = if s.value.is_some() { Some(s) } else { None };
        }
        Ok(None)
    }

    fn polish(&self, mode: Mode, a: f64, b: f64) -> Result<PeriodicOrbit, OrbitError> {
        let f = |y: f64| self.return_map(y, mode).map(|h| h.y - y);
        let opts = BrentOptions {
            ftol: 1e-12,
            xtol: 1e-13,
            max_iter: 100,
        };
        let y_star = match roots::brent(f, a, b, opts) {
            Ok((y, _)) => y,
            Err(RootError::Function { source, .. }) => return Err(source),
            Err(e) => return Err(OrbitError::Hypothesis(e.to_string())),
        };
        self.orbit_through(y_star, mode)
    }

    /// Builds the orbit through a section height assumed to be a fixed point.
    pub fn orbit_through(&self, y_star: f64, mode: Mode) -> Result<PeriodicOrbit, OrbitError> {
        let y_eq = self.equilibrium.y;
        let hit = self.return_map(y_star, mode)?;
        let residual = (hit.y - y_star).abs();
        let delta = 1e-4 * (y_star - y_eq);
        let plus = self.return_map(y_star + delta, mode)?.y;
        let minus = self.return_map(y_star - delta, mode)?.y;
        let m = (plus - minus) / (2.0 * delta);
        let (multiplier, stability) = match mode {
            Mode::Forward => (
                m,
                if m.abs() < 1.0 {
                    Stability::Attracting
                } else {
                    Stability::Repelling
                },
            ),
            Mode::Backward => (
                1.0 / m,
                if m.abs() < 1.0 {
                    Stability::Repelling
                } else {
                    Stability::Attracting
                },
            ),
        };

        let sys = self.sys.clone();
        let xdot =
            move |_: f64, x: f64, y: f64| sys.rhs(x, y).map(|(dx, _)| dx).unwrap_or(f64::NAN);
        let sys = self.sys.clone();
        let rdot = move |_: f64, x: f64, y: f64| {
            sys.rhs(x, y)
                .map(|(dx, dy)| x * dx + y * dy)
                .unwrap_or(f64::NAN)
        };
        let extra = vec![EventSpec::new(XDOT, xdot), EventSpec::new(RDOT, rdot)];
        let trajectory = self.run(y_star, mode, extra)?;
        let mut points = trajectory.points.clone();
        if mode == Mode::Backward {
            points.reverse();
        }
        let extremes = points
            .iter()
            .map(|p| (p.x, p.y))
            .chain(trajectory.events.iter().map(|e| (e.x, e.y)));
        let (mut x_min, mut x_max, mut r_max) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
        for (x, y) in extremes {
            x_min = x_min.min(x);
            x_max = x_max.max(x);
            r_max = r_max.max(0.5 * (x * x + y * y));
        }
        let amplitude = x_max - x_min;
        let t = &self.settings.thresholds;
        let band = (t.band.0 * self.x_max_fold, t.band.1 * self.x_max_fold);
        let tube_time = integrator::time_in_tube(
            &trajectory,
            &self.sys,
            t.tube_radius_eps * self.sys.eps(),
            band,
        );
        let mut orbit = PeriodicOrbit {
            lambda: self.lambda(),
            section_x: self.equilibrium.x,
            section_y: y_star,
            period: hit.time,
            points,
            trajectory,
            x_min,
            x_max,
            amplitude,
            r_max,
            stability,
            multiplier,
            residual,
            tube_time,
            cycle_type: CycleType::SmallCycle,
        };
        orbit.cycle_type = classify_cycle(&orbit, self.x_max_fold, t);
        Ok(orbit)
    }

    /// Default search bracket: from just above the equilibrium to
    /// [`Self::outer_offset`].
    pub fn default_bracket(&self) -> (f64, f64) {
        let outer = self.outer_offset();
        let y_eq = self.equilibrium.y;
        (y_eq + self.settings.inner_offset * outer, y_eq + outer)
    }
}

/// One-shot return map at `lambda` in forward time.
pub fn return_map(sys: &SystemDefinition, lambda: f64, y: f64) -> Result<f64, OrbitError> {
    let section = PoincareSection::new(sys, lambda, OrbitSettings::default())?;
    Ok(section.return_map(y, Mode::Forward)?.y)
}

/// Limit cycle search over the section heights `bracket`, or the default
/// bracket when `None`.
pub fn find_limit_cycle(
    sys: &SystemDefinition,
    lambda: f64,
    mode: Mode,
    bracket: Option<(f64, f64)>,
) -> Result<Option<PeriodicOrbit>, OrbitError> {
    let section = PoincareSection::new(sys, lambda, OrbitSettings::default())?;
    let bracket = bracket.unwrap_or_else(|| section.default_bracket());
    section.find_limit_cycle(mode, bracket)
}

/// Cycle taxonomy from amplitude, excursion past the fold and time spent
/// near the repelling branch.
pub fn classify_cycle(orbit: &PeriodicOrbit, x_m: f64, thresholds: &CycleThresholds) -> CycleType {
    if orbit.amplitude < thresholds.small_fraction * x_m {
        CycleType::SmallCycle
    } else if orbit.tube_time > thresholds.tube_slow_time {
        if orbit.x_max > x_m {
            CycleType::CanardWithHead
        } else {
            CycleType::CanardNoHead
        }
    } else {
        CycleType::Relaxation
    }
}
