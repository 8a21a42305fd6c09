//! The piecewise Liénard system `x' = -y + F(x)`, `y' = eps * g(x, y; lambda, eps)`.
//!
//! `F` is `f_minus` left of the splitting line `x = 0` and `f_plus` right of
//! it. Both pieces vanish at the origin, so the vector field is continuous
//! while its derivative jumps across the line.

use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{Bindings, EvalError, Expression, Jet3, ParseError, Variable};
use crate::roots::{self, BrentOptions, RootError, Sample};

/// Tolerance for the hypotheses evaluated at the origin.
pub const ORIGIN_TOL: f64 = 1e-12;
/// Default window searched for the fold `x_M`.
pub const DEFAULT_FOLD_WINDOW: f64 = 10.0;
pub const DEFAULT_X_WINDOW: (f64, f64) = (-10.0, 10.0);
const SAMPLES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Side {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
}

impl Side {
    pub fn of(x: f64) -> Self {
        if x < 0.0 {
            Side::Left
        } else {
            Side::Right
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Left => "L",
            Side::Right => "R",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SystemError {
    #[error("cannot parse {which}: {source}")]
    Parse {
        which: &'static str,
        #[source]
        source: ParseError,
    },
    #[error("{which} must be a function of x only, but it mentions y")]
    DependsOnY { which: &'static str },
    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("no fold of f_plus found in (0, {x_hi}]")]
    FoldNotFound { x_hi: f64 },
}

/// A fully specified system together with its parameter values.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDefinition {
    f_minus: Arc<Expression>,
    f_plus: Arc<Expression>,
    g: Arc<Expression>,
    eps: f64,
    lambda: f64,
    x_window: (f64, f64),
}

impl SystemDefinition {
    pub fn new(
        f_minus: &str,
        f_plus: &str,
        g: &str,
        eps: f64,
        lambda: f64,
    ) -> Result<Self, SystemError> {
        let parse = |which, src: &str| {
            Expression::parse(src).map_err(|source| SystemError::Parse { which, source })
        };
        Self::from_expressions(
            parse("f_minus", f_minus)?,
            parse("f_plus", f_plus)?,
            parse("g", g)?,
            eps,
            lambda,
        )
    }

    pub fn from_expressions(
        f_minus: Expression,
        f_plus: Expression,
        g: Expression,
        eps: f64,
        lambda: f64,
    ) -> Result<Self, SystemError> {
        if f_minus.mentions(Variable::Y) {
            return Err(SystemError::DependsOnY { which: "f_minus" });
        }
        if f_plus.mentions(Variable::Y) {
            return Err(SystemError::DependsOnY { which: "f_plus" });
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(SystemError::InvalidParameter {
                name: "eps",
                value: eps,
            });
        }
        if !lambda.is_finite() {
            return Err(SystemError::InvalidParameter {
                name: "lambda",
                value: lambda,
            });
        }
        Ok(Self {
            f_minus: Arc::new(f_minus),
            f_plus: Arc::new(f_plus),
            g: Arc::new(g),
            eps,
            lambda,
            x_window: DEFAULT_X_WINDOW,
        })
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self {
            lambda,
            ..self.clone()
        }
    }

    pub fn with_window(&self, x_window: (f64, f64)) -> Self {
        Self {
            x_window,
            ..self.clone()
        }
    }

    /// Same pieces with `g` replaced by `scale * g`.
    pub fn with_scaled_g(&self, scale: f64) -> Self {
        let g = Expression::binary(
            crate::expr::BinOp::Mul,
            Expression::lit(scale),
            (*self.g).clone(),
        );
        Self {
            g: Arc::new(g),
            ..self.clone()
        }
    }

    pub fn f_minus(&self) -> &Expression {
        &self.f_minus
    }
    pub fn f_plus(&self) -> &Expression {
        &self.f_plus
    }
    pub fn g(&self) -> &Expression {
        &self.g
    }
    pub fn eps(&self) -> f64 {
        self.eps
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn x_window(&self) -> (f64, f64) {
        self.x_window
    }

    /// True when the two pieces differ, i.e. the splitting line matters.
    pub fn is_split(&self) -> bool {
        self.f_minus != self.f_plus
    }

    pub fn piece(&self, side: Side) -> &Expression {
        match side {
            Side::Left => &self.f_minus,
            Side::Right => &self.f_plus,
        }
    }

    fn bindings(&self, x: f64, y: f64, lambda: f64) -> Bindings {
        Bindings::new(x, y, lambda, self.eps)
    }

    /// The piecewise nullcline function `F`.
    pub fn f(&self, x: f64) -> Result<f64, EvalError> {
        self.piece(Side::of(x))
            .evaluate(&self.bindings(x, 0.0, self.lambda))
    }

    /// Jet of one piece at `x`, regardless of the sign of `x`.
    pub fn piece_jet(&self, side: Side, x: f64) -> Result<Jet3, EvalError> {
        self.piece(side)
            .evaluate_jet(&self.bindings(x, 0.0, self.lambda))
    }

    pub fn g_value(&self, x: f64, y: f64, lambda: f64) -> Result<f64, EvalError> {
        self.g.evaluate(&self.bindings(x, y, lambda))
    }

    pub fn g_jet(&self, x: f64, y: f64, lambda: f64) -> Result<Jet3, EvalError> {
        self.g.evaluate_jet(&self.bindings(x, y, lambda))
    }

    /// Right-hand side at the system's own `lambda`.
    pub fn rhs(&self, x: f64, y: f64) -> Result<(f64, f64), EvalError> {
        let fx = self.f(x)?;
        let gv = self.g_value(x, y, self.lambda)?;
        Ok((-y + fx, self.eps * gv))
    }

    pub fn describe(&self) -> SystemSummary {
        SystemSummary {
            f_minus: self.f_minus.to_string(),
            f_plus: self.f_plus.to_string(),
            g: self.g.to_string(),
            eps: self.eps,
            lambda: self.lambda,
            x_min: self.x_window.0,
            x_max: self.x_window.1,
        }
    }
}

/// Plain-data view of a system used in reports and manifests.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SystemSummary {
    pub f_minus: String,
    pub f_plus: String,
    pub g: String,
    pub eps: f64,
    pub lambda: f64,
    pub x_min: f64,
    pub x_max: f64,
}

/// `F(x)`: `f_minus` for `x < 0`, `f_plus` otherwise.
pub fn nullcline(sys: &SystemDefinition, x: f64) -> Result<f64, EvalError> {
    sys.f(x)
}

/// Smooth comparison system whose `F` is `f_plus` on the whole line.
///
/// With `replacement`, the left piece is that expression instead, which gives
/// the modified comparison systems used for the corner-case bounds.
pub fn make_shadow(
    sys: &SystemDefinition,
    replacement: Option<&Expression>,
) -> Result<SystemDefinition, SystemError> {
    let left = match replacement {
        Some(expr) => {
            if expr.mentions(Variable::Y) {
                return Err(SystemError::DependsOnY {
                    which: "replacement",
                });
            }
            Arc::new(expr.clone())
        }
        None => sys.f_plus.clone(),
    };
    Ok(SystemDefinition {
        f_minus: left,
        ..sys.clone()
    })
}

/// Location of the smooth maximum of `f_plus` in `(0, x_hi]`.
pub fn find_x_max(sys: &SystemDefinition, x_hi: f64) -> Result<f64, SystemError> {
    let slope = |x: f64| sys.piece_jet(Side::Right, x).map(|j| j.dx());
    let mut samples = Vec::with_capacity(SAMPLES + 1);
    samples.push(Sample {
        x: x_hi * 1e-9,
        value: slope(x_hi * 1e-9).ok(),
    });
    for x in roots::linspace(0.0, x_hi, SAMPLES).skip(1) {
        samples.push(Sample {
            x,
            value: slope(x).ok(),
        });
    }
    for (lo, hi) in roots::sign_changes(&samples) {
        let descending = lo.value.unwrap_or(0.0) >= 0.0 && hi.value.unwrap_or(0.0) <= 0.0;
        if !descending {
            continue;
        }
        let x = if lo.x == hi.x {
            lo.x
        } else {
            let opts = BrentOptions {
                ftol: 1e-13,
                xtol: 1e-15,
                max_iter: 200,
            };
            match roots::brent(slope, lo.x, hi.x, opts) {
                Ok((x, _)) => x,
                Err(RootError::Function { source, .. }) => return Err(source.into()),
                Err(_) => continue,
            }
        };
        if sys.piece_jet(Side::Right, x)?.dxx() < 0.0 {
            return Ok(x);
        }
    }
    Err(SystemError::FoldNotFound { x_hi })
}

/// Branch of the critical manifold `y = F(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// `x < 0`, attracting.
    #[serde(rename = "M_l")]
    Left,
    /// `0 < x < x_M`, repelling.
    #[serde(rename = "M_m")]
    Middle,
    /// `x > x_M`, attracting.
    #[serde(rename = "M_r")]
    Right,
}

/// The critical manifold of a validated system.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalManifold {
    pub x_max: f64,
    pub f_at_x_max: f64,
}

impl CriticalManifold {
    pub fn new(sys: &SystemDefinition, fold_window: f64) -> Result<Self, SystemError> {
        let x_max = find_x_max(sys, fold_window)?;
        Ok(Self {
            x_max,
            f_at_x_max: sys.f(x_max)?,
        })
    }

    pub fn branch(&self, x: f64) -> Option<Branch> {
        if x < 0.0 {
            Some(Branch::Left)
        } else if x > 0.0 && x < self.x_max {
            Some(Branch::Middle)
        } else if x > self.x_max {
            Some(Branch::Right)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    pub mandatory: bool,
    pub detail: String,
}

/// Outcome of checking the standing hypotheses on a system.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<HypothesisCheck>,
    pub f_minus_at_zero: Option<f64>,
    pub f_plus_at_zero: Option<f64>,
    pub f_minus_slope_at_zero: Option<f64>,
    pub f_plus_slope_at_zero: Option<f64>,
    pub x_max: Option<f64>,
    pub f_at_x_max: Option<f64>,
    /// `f_plus < f_minus` on every sample of `[x_lo, 0)`.
    pub shadow_ordering: bool,
    pub branch_stability: bool,
}

impl ValidationReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed && c.mandatory)
    }

    fn push(&mut self, name: &'static str, passed: bool, mandatory: bool, detail: String) {
        self.checks.push(HypothesisCheck {
            name,
            passed,
            mandatory,
            detail,
        });
    }
}

/// Checks the standing hypotheses on the window `x_window = (x_lo, x_hi)`.
pub fn validate(sys: &SystemDefinition, x_window: (f64, f64)) -> ValidationReport {
    let (x_lo, x_hi) = x_window;
    let mut report = ValidationReport {
        passed: false,
        checks: Vec::new(),
        f_minus_at_zero: None,
        f_plus_at_zero: None,
        f_minus_slope_at_zero: None,
        f_plus_slope_at_zero: None,
        x_max: None,
        f_at_x_max: None,
        shadow_ordering: false,
        branch_stability: false,
    };
    let window_ok = x_lo < 0.0 && 0.0 < x_hi && x_lo.is_finite() && x_hi.is_finite();
    report.push(
        "window",
        window_ok,
        true,
        format!("window [{x_lo}, {x_hi}] must contain 0 in its interior"),
    );
    if !window_ok {
        return report;
    }

    let left = sys.piece_jet(Side::Left, 0.0);
    let right = sys.piece_jet(Side::Right, 0.0);
    match (&left, &right) {
        (Ok(l), Ok(r)) => {
            report.f_minus_at_zero = Some(l.value());
            report.f_plus_at_zero = Some(r.value());
            report.f_minus_slope_at_zero = Some(l.dx());
            report.f_plus_slope_at_zero = Some(r.dx());
            let zero_ok = l.value().abs() <= ORIGIN_TOL && r.value().abs() <= ORIGIN_TOL;
            report.push(
                "pieces_vanish_at_origin",
                zero_ok,
                true,
                format!("f_minus(0) = {}, f_plus(0) = {}", l.value(), r.value()),
            );
            let (sl, sr) = (l.dx(), r.dx());
            let corner_ok =
                sl <= ORIGIN_TOL && sr >= -ORIGIN_TOL && (sl < -ORIGIN_TOL || sr > ORIGIN_TOL);
            report.push(
                "corner",
                corner_ok,
                true,
                format!(
                    "f_minus'(0) = {sl} must be <= 0, f_plus'(0) = {sr} must be >= 0, one strictly"
                ),
            );
        }
        _ => {
            let err = left
                .err()
                .or(right.err())
                .map(|e| e.to_string())
                .unwrap_or_default();
            report.push("pieces_vanish_at_origin", false, true, err.clone());
            report.push("corner", false, true, err);
        }
    }

    match CriticalManifold::new(sys, x_hi) {
        Ok(m) => {
            report.x_max = Some(m.x_max);
            report.f_at_x_max = Some(m.f_at_x_max);
            report.push(
                "fold",
                true,
                true,
                format!(
                    "f_plus has a maximum at x_M = {} with F(x_M) = {}",
                    m.x_max, m.f_at_x_max
                ),
            );
            let stable = branch_stability(sys, &m, x_window);
            report.branch_stability = stable;
            report.push(
                "branch_stability",
                stable,
                false,
                "F' < 0 on M_l and M_r, F' > 0 on M_m".into(),
            );
        }
        Err(e) => report.push("fold", false, true, e.to_string()),
    }

    let ordering = shadow_ordering(sys, x_lo, 0.0);
    report.shadow_ordering = ordering;
    report.push(
        "shadow_ordering",
        ordering,
        false,
        format!("f_plus < f_minus sampled on [{x_lo}, 0)"),
    );

    report.passed = report.checks.iter().all(|c| c.passed || !c.mandatory);
    report
}

/// `f_plus(x) < f_minus(x)` on `SAMPLES` points of `[a, b)`.
pub fn shadow_ordering(sys: &SystemDefinition, a: f64, b: f64) -> bool {
    if !(a < b) {
        return true;
    }
    (0..SAMPLES).all(|i| {
        let x = a + (b - a) * (i as f64) / (SAMPLES as f64);
        if x >= 0.0 {
            return true;
        }
        match (sys.piece_jet(Side::Right, x), sys.piece_jet(Side::Left, x)) {
            (Ok(p), Ok(m)) => p.value() < m.value(),
            _ => false,
        }
    })
}

fn branch_stability(
    sys: &SystemDefinition,
    m: &CriticalManifold,
    (x_lo, x_hi): (f64, f64),
) -> bool {
    let slope_sign_ok = |side: Side, a: f64, b: f64, want_positive: bool| {
        (0..SAMPLES).all(|i| {
            let x = a + (b - a) * (i as f64 + 0.5) / (SAMPLES as f64);
            match sys.piece_jet(side, x) {
                Ok(j) => (j.dx() > 0.0) == want_positive && j.dx() != 0.0,
                Err(_) => false,
            }
        })
    };
    slope_sign_ok(Side::Left, x_lo, 0.0, false)
        && slope_sign_ok(Side::Right, 0.0, m.x_max, true)
        && (m.x_max >= x_hi || slope_sign_ok(Side::Right, m.x_max, x_hi, false))
}
