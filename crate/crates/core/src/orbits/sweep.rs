use rayon::prelude::*;
use serde::Serialize;

use super::{CycleType, OrbitError, OrbitSettings, PeriodicOrbit, PoincareSection};
use crate::integrator::Mode;
use crate::roots;
use crate::system::SystemDefinition;

const ONSET_RESOLUTION: f64 = 1e-6;
const WINDOW_RELATIVE_WIDTH: f64 = 1e-3;
const WINDOW_ABSOLUTE_WIDTH: f64 = 1e-9;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepOptions {
    pub lambda_range: (f64, f64),
    /// Number of grid intervals; the grid has `steps + 1` points.
    pub steps: usize,
    /// Bisect the explosion window to a relative width of `1e-3`.
    pub refine: bool,
    pub settings: OrbitSettings,
}

impl SweepOptions {
    pub fn new(lambda_range: (f64, f64), steps: usize) -> Self {
        Self {
            lambda_range,
            steps,
            refine: false,
            settings: OrbitSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub found: bool,
    pub amplitude: f64,
    pub period: f64,
    pub cycle_type: Option<CycleType>,
    pub multiplier: f64,
    #[serde(skip)]
    pub section_offset: Option<f64>,
}

impl SweepPoint {
    fn from_orbit(lambda: f64, orbit: Option<&PeriodicOrbit>, y_eq: f64) -> Self {
        match orbit {
            Some(o) => Self {
                lambda,
                found: true,
                amplitude: o.amplitude,
                period: o.period,
                cycle_type: Some(o.cycle_type),
                multiplier: o.multiplier,
                section_offset: Some(o.section_y - y_eq),
            },
            None => Self {
                lambda,
                found: false,
                amplitude: 0.0,
                period: f64::NAN,
                cycle_type: None,
                multiplier: f64::NAN,
                section_offset: None,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Median amplitude over the last tenth of the cycles found.
    pub plateau_amplitude: f64,
    /// Smallest `lambda` with a cycle after a parameter without one, to within `1e-6`.
    pub onset: Option<f64>,
    pub first_amplitude: Option<f64>,
    pub super_explosion: bool,
    /// Parameters where the amplitude first reaches 10 % and 90 % of the plateau.
    pub window: Option<(f64, f64)>,
    pub window_width: Option<f64>,
    pub refined: bool,
}

/// Attracting cycle at one parameter, optionally warm-started from the
/// section offset of a nearby cycle.
fn attracting_cycle(
    sys: &SystemDefinition,
    lambda: f64,
    settings: &OrbitSettings,
    warm: Option<f64>,
) -> SweepPoint {
    let section = match PoincareSection::new(sys, lambda, settings.clone()) {
        Ok(s) => s,
        Err(_) => return SweepPoint::from_orbit(lambda, None, 0.0),
    };
    let y_eq = section.equilibrium.y;
    let (lo, hi) = section.default_bracket();
    let mut orbit = None;
    if let Some(d) = warm.filter(|&d| y_eq + 0.25 * d > lo && y_eq + 0.25 * d < hi) {
        orbit = section
            .find_limit_cycle(Mode::Forward, (y_eq + 0.25 * d, hi))
            .ok()
            .flatten();
    }
    if orbit.is_none() {
        orbit = section
            .find_limit_cycle(Mode::Forward, (lo, hi))
            .ok()
            .flatten();
    }
    SweepPoint::from_orbit(lambda, orbit.as_ref(), y_eq)
}

struct Bracket {
    lo: SweepPoint,
    hi: SweepPoint,
}

impl Bracket {
    fn width(&self) -> f64 {
        self.hi.lambda - self.lo.lambda
    }

    fn mid(&self) -> f64 {
        0.5 * (self.lo.lambda + self.hi.lambda)
    }

    /// Halves the bracket keeping `pred(lo) == false` and `pred(hi) == true`.
    fn bisect(
        &mut self,
        sys: &SystemDefinition,
        settings: &OrbitSettings,
        pred: impl Fn(&SweepPoint) -> bool,
    ) {
        let m = self.mid();
        let p = attracting_cycle(sys, m, settings, self.lo.section_offset);
        if pred(&p) {
            self.hi = p;
        } else {
            self.lo = p;
        }
    }
}

fn plateau(points: &[SweepPoint]) -> f64 {
    let found: Vec<f64> = points
        .iter()
        .filter(|p| p.found)
        .map(|p| p.amplitude)
        .collect();
    if found.is_empty() {
        return 0.0;
    }
    let take = found.len().div_ceil(10);
    let mut tail = found[found.len() - take..].to_vec();
    tail.sort_by(f64::total_cmp);
    let n = tail.len();
    if n % 2 == 1 {
        tail[n / 2]
    } else {
        0.5 * (tail[n / 2 - 1] + tail[n / 2])
    }
}

fn first_reaching(points: &[SweepPoint], from: usize, level: f64) -> Option<usize> {
    (from.max(1)..points.len()).find(|&i| points[i].found && points[i].amplitude >= level)
}

/// Attracting-cycle amplitude over a parameter grid, evaluated in parallel.
pub fn sweep_amplitude(
    sys: &SystemDefinition,
    options: &SweepOptions,
) -> Result<SweepResult, OrbitError> {
    let (a, b) = options.lambda_range;
    if !(a < b) || options.steps == 0 {
        return Err(OrbitError::InvalidBracket { a, b });
    }
    let grid: Vec<f64> = roots::linspace(a, b, options.steps).collect();
    let settings = &options.settings;
    let points: Vec<SweepPoint> = grid
        .par_iter()
        .map(|&lambda| attracting_cycle(sys, lambda, settings, None))
        .collect();
    let plateau_amplitude = plateau(&points);

    let onset_index = (1..points.len()).find(|&i| points[i].found && !points[i - 1].found);
    let mut onset = None;
    let mut first_amplitude = None;
    if let Some(i) = onset_index {
        let mut br = Bracket {
            lo: points[i - 1].clone(),
            hi: points[i].clone(),
        };
        while br.width() > ONSET_RESOLUTION {
            br.bisect(sys, settings, |p| p.found);
        }
        onset = Some(br.hi.lambda);
        first_amplitude = Some(br.hi.amplitude);
    }
    let super_explosion = match first_amplitude {
        Some(amp) => plateau_amplitude > 0.0 && amp >= 0.5 * plateau_amplitude,
        None => false,
    };

    let start = onset_index.unwrap_or(0);
    let levels = (0.1 * plateau_amplitude, 0.9 * plateau_amplitude);
    let i10 = first_reaching(&points, start, levels.0);
    let i90 = first_reaching(&points, start, levels.1);
    let mut window = None;
    if let (Some(i10), Some(i90)) = (i10, i90) {
        let mut b10 = Bracket {
            lo: points[i10 - 1].clone(),
            hi: points[i10].clone(),
        };
        let mut b90 = Bracket {
            lo: points[i90 - 1].clone(),
            hi: points[i90].clone(),
        };
        if options.refine {
            let reaches = |level: f64| move |p: &SweepPoint| p.found && p.amplitude >= level;
            for _ in 0..MAX_BISECTIONS {
                let tol = (WINDOW_RELATIVE_WIDTH * (b90.mid() - b10.mid()).max(0.0))
                    .max(WINDOW_ABSOLUTE_WIDTH);
                if b10.width() > tol {
                    b10.bisect(sys, settings, reaches(levels.0));
                } else if b90.width() > tol {
                    b90.bisect(sys, settings, reaches(levels.1));
                } else {
                    break;
                }
            }
        }
        window = Some((b10.mid(), b90.mid()));
    }

    Ok(SweepResult {
        points,
        plateau_amplitude,
        onset,
        first_amplitude,
        super_explosion,
        window,
        window_width: window.map(|(l, h)| h - l),
        refined: options.refine,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Bistability {
    pub lambda: f64,
    pub equilibrium_stable: bool,
    pub attracting: Option<PeriodicOrbit>,
    pub repelling: Option<PeriodicOrbit>,
    pub bistable: bool,
}

/// Looks for a stable equilibrium, an attracting cycle reached from far
/// outside, and a repelling cycle separating the two.
pub fn detect_bistability(
    sys: &SystemDefinition,
    lambda: f64,
    settings: &OrbitSettings,
) -> Result<Bistability, OrbitError> {
    let section = PoincareSection::new(sys, lambda, settings.clone())?;
    let y_eq = section.equilibrium.y;
    let equilibrium_stable = section.equilibrium.local_type.is_stable();
    let (lo, hi) = section.default_bracket();

    let mut attracting = None;
    let mut y = hi;
    for _ in 0..200 {
        let Ok(next) = section.return_map(y, Mode::Forward) else {
            break;
        };
        let converged = (next.y - y).abs() <= 1e-10 * (1.0 + y.abs());
        y = next.y;
        if converged {
            attracting = section.orbit_through(y, Mode::Forward).ok();
            break;
        }
    }

    let outer = attracting
        .as_ref()
        .map_or(hi, |o| y_eq + 0.999 * (o.section_y - y_eq));
    let repelling = if outer > lo {
        section.find_limit_cycle(Mode::Backward, (lo, outer))?
    } else {
        None
    };
    let bistable = equilibrium_stable && attracting.is_some() && repelling.is_some();
    Ok(Bistability {
        lambda,
        equilibrium_stable,
        attracting,
        repelling,
        bistable,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point(lambda: f64, amplitude: f64) -> SweepPoint {
        SweepPoint {
            lambda,
            found: amplitude > 0.0,
            amplitude,
            period: 1.0,
            cycle_type: None,
            multiplier: 0.0,
            section_offset: None,
        }
    }

    #[test]
    fn plateau_is_median_of_last_tenth() {
        let pts: Vec<SweepPoint> = (0..20).map(|i| point(i as f64, i as f64)).collect();
        // 19 found points, the last two are 18 and 19
        assert_eq!(plateau(&pts), 18.5);
        assert_eq!(plateau(&[point(0.0, 0.0)]), 0.0);
    }

    #[test]
    fn first_reaching_skips_index_zero() {
        let pts = vec![point(0.0, 5.0), point(1.0, 1.0), point(2.0, 5.0)];
        assert_eq!(first_reaching(&pts, 0, 4.0), Some(2));
    }
}
