//! Deterministic CSV output. Floats use 17 significant digits so every value
//! round-trips exactly.

use std::io::{self, Write};

use crate::integrator::Trajectory;
use crate::orbits::{ShadowComparison, SweepPoint};
use crate::system::Side;

pub const TRAJECTORY_HEADER: &str = "t,x,y,region";
pub const EVENTS_HEADER: &str = "event_id,t,x,y,direction";
pub const SWEEP_HEADER: &str = "lambda,found,amplitude,period,cycle_type,multiplier";
pub const SHADOW_HEADER: &str = "t,x_true,y_true,R_true,x_shadow,y_shadow,R_shadow";

/// Scientific notation with 17 significant digits; `nan`, `inf`, `-inf`
/// otherwise.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn write_trajectory_csv<W: Write>(mut w: W, traj: &Trajectory) -> io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for p in &traj.points {
        writeln!(
            w,
            "{},{},{},{}",
            format_float(p.t),
            format_float(p.x),
            format_float(p.y),
            Side::of(p.x).label()
        )?;
    }
    Ok(())
}

pub fn write_events_csv<W: Write>(mut w: W, traj: &Trajectory) -> io::Result<()> {
    writeln!(w, "{EVENTS_HEADER}")?;
    for e in &traj.events {
        writeln!(
            w,
            "{},{},{},{},{}",
            e.id,
            format_float(e.t),
            format_float(e.x),
            format_float(e.y),
            e.direction
        )?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(mut w: W, points: &[SweepPoint]) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for p in points {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            format_float(p.lambda),
            p.found,
            format_float(p.amplitude),
            format_float(p.period),
            p.cycle_type.map_or("none", |c| c.label()),
            format_float(p.multiplier)
        )?;
    }
    Ok(())
}

pub fn write_shadow_csv<W: Write>(mut w: W, cmp: &ShadowComparison) -> io::Result<()> {
    writeln!(w, "{SHADOW_HEADER}")?;
    for s in &cmp.samples {
        let row = [
            s.t, s.x_true, s.y_true, s.r_true, s.x_shadow, s.y_shadow, s.r_shadow,
        ]
        .map(format_float);
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
