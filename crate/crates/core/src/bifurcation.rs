//! Equilibria, linearisation and classification of the bifurcations that
//! create periodic orbits at the corner and at the smooth fold.

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Jet3};
use crate::roots::{self, BrentOptions, RootError, Sample};
use crate::system::{find_x_max, Side, SystemDefinition, SystemError};

const SCAN_CELLS: usize = 1000;
const HOPF_SCAN_CELLS: usize = 250;
/// Equilibria closer than this to the splitting line sit on the corner.
pub const CORNER_TOL: f64 = 1e-10;
/// Minimum slope of `x -> g(x, F(x))` accepted as transverse.
pub const TRANSVERSALITY_TOL: f64 = 1e-8;
/// Decisive quantities closer than this to zero are flagged marginal.
pub const MARGINAL_TOL: f64 = 1e-9;
/// Below this magnitude the first Lyapunov coefficient is degenerate.
pub const L1_TOL: f64 = 1e-10;
pub const HOPF_TRACE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BifurcationError {
    #[error(
        "expected exactly one equilibrium in [{lo}, {hi}] at lambda = {lambda}, found {count}"
    )]
    EquilibriumCount {
        count: usize,
        lambda: f64,
        lo: f64,
        hi: f64,
    },
    #[error("equilibrium at x = {x} is not transverse (slope {slope})")]
    NotTransverse { x: f64, slope: f64 },
    #[error("trace does not change sign on branch {branch} for lambda in [{lo}, {hi}]")]
    NoHopf {
        branch: &'static str,
        lo: f64,
        hi: f64,
    },
    #[error("trace vanishes at lambda = {lambda} but det = {det} is not positive")]
    NotHopf { lambda: f64, det: f64 },
    #[error("equilibrium is not at a Hopf point (trace {trace}, det {det})")]
    NotAtHopf { trace: f64, det: f64 },
    #[error("hypothesis violated: {0}")]
    Hypothesis(String),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl<E: Into<BifurcationError>> From<RootError<E>> for BifurcationError {
    fn from(err: RootError<E>) -> Self {
        match err {
            RootError::Function { source, .. } => source.into(),
            other => BifurcationError::Hypothesis(match other {
                RootError::NoSignChange { a, b, .. } => format!("no sign change on [{a}, {b}]"),
                RootError::NotFinite { x } => format!("non-finite value at {x}"),
                RootError::Function { .. } => unreachable!(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EquilibriumSide {
    #[serde(rename = "L")]
    Left,
    #[serde(rename = "R")]
    Right,
    #[serde(rename = "corner")]
    Corner,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalType {
    StableNode,
    UnstableNode,
    StableFocus,
    UnstableFocus,
    Saddle,
    Center,
}

impl LocalType {
    pub fn is_stable(self) -> bool {
        matches!(self, LocalType::StableNode | LocalType::StableFocus)
    }
}

pub type Matrix2 = [[f64; 2]; 2];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub x: f64,
    pub y: f64,
    pub lambda: f64,
    pub side: EquilibriumSide,
    pub jacobian: Matrix2,
    pub eigenvalues: [Complex64; 2],
    pub local_type: LocalType,
}

impl Equilibrium {
    pub fn trace(&self) -> f64 {
        self.jacobian[0][0] + self.jacobian[1][1]
    }

    pub fn det(&self) -> f64 {
        let j = &self.jacobian;
        j[0][0] * j[1][1] - j[0][1] * j[1][0]
    }

    /// Piece of `F` used for the linearisation.
    pub fn piece(&self) -> Side {
        match self.side {
            EquilibriumSide::Left => Side::Left,
            _ => Side::Right,
        }
    }
}

/// `d/dx g(x, F(x); lambda, eps)` using the given piece of `F`.
fn nullcline_slope(
    sys: &SystemDefinition,
    x: f64,
    lambda: f64,
    side: Side,
) -> Result<f64, EvalError> {
    let fj = sys.piece_jet(side, x)?;
    let gj = sys.g_jet(x, fj.value(), lambda)?;
    Ok(gj.dx() + gj.dy() * fj.dx())
}

fn equilibrium_residual(sys: &SystemDefinition, x: f64, lambda: f64) -> Result<f64, EvalError> {
    sys.g_value(x, sys.f(x)?, lambda)
}

/// Largest interval around the origin, inside the system window, on which
/// `x -> g(x, F(x); lambda, eps)` is strictly monotone.
///
/// Falls back to the whole window when the map is not monotone through the
/// origin.
pub fn equilibrium_window(sys: &SystemDefinition, lambda: f64) -> (f64, f64) {
    let (lo, hi) = sys.x_window();
    let left0 = nullcline_slope(sys, 0.0, lambda, Side::Left);
    let right0 = nullcline_slope(sys, 0.0, lambda, Side::Right);
    let sign = match (left0, right0) {
        (Ok(l), Ok(r)) if l * r > 0.0 => r.signum(),
        _ => return (lo, hi),
    };
    let turning = |side: Side, end: f64| -> f64 {
        let s = |x: f64| nullcline_slope(sys, x, lambda, side).map(|v| sign * v);
        let mut prev = 0.0;
        for x in roots::linspace(0.0, end, SCAN_CELLS).skip(1) {
            match s(x) {
                Ok(v) if v > 0.0 => prev = x,
                Ok(_) => {
                    let opts = BrentOptions::default();
                    return roots::brent(s, prev, x, opts)
                        .map(|(r, _)| r)
                        .unwrap_or(prev);
                }
                Err(_) => return prev,
            }
        }
        end
    };
    (turning(Side::Left, lo), turning(Side::Right, hi))
}

/// Jacobian `[[F'(x), -1], [eps g_x, eps g_y]]` with `F'` from `side`.
pub fn jacobian_at(
    sys: &SystemDefinition,
    x: f64,
    lambda: f64,
    side: Side,
) -> Result<Matrix2, EvalError> {
    let fj = sys.piece_jet(side, x)?;
    let gj = sys.g_jet(x, fj.value(), lambda)?;
    let eps = sys.eps();
    Ok([[fj.dx(), -1.0], [eps * gj.dx(), eps * gj.dy()]])
}

/// Closed-form eigenvalues `(tr ± sqrt(disc)) / 2` with
/// `disc = (j00 - j11)^2 + 4 j01 j10`; the `+` root comes first.
pub fn eigenvalues(j: &Matrix2) -> [Complex64; 2] {
    let tr = j[0][0] + j[1][1];
    let disc = (j[0][0] - j[1][1]).powi(2) + 4.0 * (j[0][1] * j[1][0]);
    if disc >= 0.0 {
        let s = disc.sqrt();
        [
            Complex64::new((tr + s) / 2.0, 0.0),
            Complex64::new((tr - s) / 2.0, 0.0),
        ]
    } else {
        let s = (-disc).sqrt() / 2.0;
        [Complex64::new(tr / 2.0, s), Complex64::new(tr / 2.0, -s)]
    }
}

pub fn jacobian_eigen(eq: &Equilibrium) -> [Complex64; 2] {
    eigenvalues(&eq.jacobian)
}

fn local_type(ev: &[Complex64; 2]) -> LocalType {
    let scale = ev[0].norm().max(ev[1].norm()).max(f64::MIN_POSITIVE);
    if ev[0].im != 0.0 {
        let re = ev[0].re;
        if re.abs() <= 1e-12 * scale {
            LocalType::Center
        } else if re < 0.0 {
            LocalType::StableFocus
        } else {
            LocalType::UnstableFocus
        }
    } else if ev[0].re > 0.0 && ev[1].re > 0.0 {
        LocalType::UnstableNode
    } else if ev[0].re < 0.0 && ev[1].re < 0.0 {
        LocalType::StableNode
    } else {
        LocalType::Saddle
    }
}

fn build_equilibrium(
    sys: &SystemDefinition,
    x: f64,
    lambda: f64,
) -> Result<Equilibrium, BifurcationError> {
    let side = if x.abs() < CORNER_TOL {
        EquilibriumSide::Corner
    } else if x < 0.0 {
        EquilibriumSide::Left
    } else {
        EquilibriumSide::Right
    };
    let piece = if x < 0.0 { Side::Left } else { Side::Right };
    let jacobian = jacobian_at(sys, x, lambda, piece)?;
    let eigenvalues = eigenvalues(&jacobian);
    Ok(Equilibrium {
        x,
        y: sys.f(x)?,
        lambda,
        side,
        jacobian,
        eigenvalues,
        local_type: local_type(&eigenvalues),
    })
}

/// The unique transverse equilibrium in `x_window` at parameter `lambda`.
pub fn find_equilibrium(
    sys: &SystemDefinition,
    lambda: f64,
    x_window: (f64, f64),
) -> Result<Equilibrium, BifurcationError> {
    let (lo, hi) = x_window;
    let h = |x: f64| equilibrium_residual(sys, x, lambda);
    let samples: Vec<Sample> = roots::linspace(lo, hi, SCAN_CELLS)
        .map(|x| Sample {
            x,
            value: h(x).ok(),
        })
        .collect();
    let changes = roots::sign_changes(&samples);
    if changes.len() != 1 {
        return Err(BifurcationError::EquilibriumCount {
            count: changes.len(),
            lambda,
            lo,
            hi,
        });
    }
    let (a, b) = changes[0];
    let x = if a.x == b.x {
        a.x
    } else {
        let opts = BrentOptions {
            ftol: 0.0,
            xtol: 1e-15,
            max_iter: 200,
        };
        roots::brent(h, a.x, b.x, opts)?.0
    };
    let slopes = if x.abs() < CORNER_TOL {
        vec![
            nullcline_slope(sys, x, lambda, Side::Left)?,
            nullcline_slope(sys, x, lambda, Side::Right)?,
        ]
    } else {
        vec![nullcline_slope(sys, x, lambda, Side::of(x))?]
    };
    if let Some(&slope) = slopes.iter().find(|s| s.abs() <= TRANSVERSALITY_TOL) {
        return Err(BifurcationError::NotTransverse { x, slope });
    }
    build_equilibrium(sys, x, lambda)
}

/// Equilibrium inside [`equilibrium_window`].
pub fn local_equilibrium(
    sys: &SystemDefinition,
    lambda: f64,
) -> Result<Equilibrium, BifurcationError> {
    find_equilibrium(sys, lambda, equilibrium_window(sys, lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SidePair {
    #[serde(rename = "+")]
    pub plus: f64,
    #[serde(rename = "-")]
    pub minus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CornerQuantities {
    pub lambda0: f64,
    pub f_minus_slope: f64,
    pub f_plus_slope: f64,
    pub g_x: f64,
    pub g_y: f64,
    pub alpha_minus: f64,
    pub alpha_plus: f64,
    pub beta_minus: f64,
    pub beta_plus: f64,
    /// Defined only when both betas are negative.
    pub lambda_criterion: Option<f64>,
    pub det_hypothesis_ok: bool,
}

impl CornerQuantities {
    pub fn alpha(&self) -> SidePair {
        SidePair {
            plus: self.alpha_plus,
            minus: self.alpha_minus,
        }
    }

    pub fn beta(&self) -> SidePair {
        SidePair {
            plus: self.beta_plus,
            minus: self.beta_minus,
        }
    }

    /// Eigenvalue limits `(alpha ± sqrt(beta)) / 2` on one side.
    pub fn eigenvalue_limits(&self, side: Side) -> [Complex64; 2] {
        let (alpha, beta) = match side {
            Side::Left => (self.alpha_minus, self.beta_minus),
            Side::Right => (self.alpha_plus, self.beta_plus),
        };
        if beta >= 0.0 {
            let s = beta.sqrt();
            [
                Complex64::new((alpha + s) / 2.0, 0.0),
                Complex64::new((alpha - s) / 2.0, 0.0),
            ]
        } else {
            let s = (-beta).sqrt() / 2.0;
            [
                Complex64::new(alpha / 2.0, s),
                Complex64::new(alpha / 2.0, -s),
            ]
        }
    }
}

/// Corner quantities with `g` evaluated at `(0, 0; lambda0, eps)`; the
/// determinant hypothesis always uses `lambda = 0`.
pub fn corner_quantities_at(
    sys: &SystemDefinition,
    lambda0: f64,
) -> Result<CornerQuantities, BifurcationError> {
    let eps = sys.eps();
    let fm = sys.piece_jet(Side::Left, 0.0)?.dx();
    let fp = sys.piece_jet(Side::Right, 0.0)?.dx();
    let g = sys.g_jet(0.0, 0.0, lambda0)?;
    let (gx, gy) = (g.dx(), g.dy());
    // same operation order as the Jacobian so the eigenvalue identity is exact
    let egx = eps * gx;
    let egy = eps * gy;
    let alpha_minus = fm + egy;
    let alpha_plus = fp + egy;
    let beta_minus = (fm - egy).powi(2) + 4.0 * (-1.0 * egx);
    let beta_plus = (fp - egy).powi(2) + 4.0 * (-1.0 * egx);
    let lambda_criterion = (beta_minus < 0.0 && beta_plus < 0.0)
        .then(|| alpha_plus / (-beta_plus).sqrt() + alpha_minus / (-beta_minus).sqrt());
    let g0 = sys.g_jet(0.0, 0.0, 0.0)?;
    let det_hypothesis_ok = g0.dx() > (-fp * g0.dy()).max(-fm * g0.dy());
    Ok(CornerQuantities {
        lambda0,
        f_minus_slope: fm,
        f_plus_slope: fp,
        g_x: gx,
        g_y: gy,
        alpha_minus,
        alpha_plus,
        beta_minus,
        beta_plus,
        lambda_criterion,
        det_hypothesis_ok,
    })
}

pub fn corner_quantities(sys: &SystemDefinition) -> Result<CornerQuantities, BifurcationError> {
    corner_quantities_at(sys, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BifurcationCase {
    #[serde(rename = "i")]
    SmoothHopfLeft,
    #[serde(rename = "ii")]
    SmoothHopfRight,
    #[serde(rename = "iii-a")]
    NonsmoothHopf,
    #[serde(rename = "iii-b")]
    HopfLike,
    #[serde(rename = "iii-c")]
    SuperExplosion,
    #[serde(rename = "fold")]
    FoldHopf,
}

impl BifurcationCase {
    pub fn label(self) -> &'static str {
        match self {
            BifurcationCase::SmoothHopfLeft => "i",
            BifurcationCase::SmoothHopfRight => "ii",
            BifurcationCase::NonsmoothHopf => "iii-a",
            BifurcationCase::HopfLike => "iii-b",
            BifurcationCase::SuperExplosion => "iii-c",
            BifurcationCase::FoldHopf => "fold",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            BifurcationCase::SmoothHopfLeft => "smooth Hopf on the left branch",
            BifurcationCase::SmoothHopfRight => "smooth Hopf on the middle branch",
            BifurcationCase::NonsmoothHopf => "nonsmooth Hopf at the corner",
            BifurcationCase::HopfLike => "Hopf-like bifurcation at the corner",
            BifurcationCase::SuperExplosion => "super-explosion at the corner",
            BifurcationCase::FoldHopf => "smooth Hopf near the fold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Criticality {
    Supercritical,
    Subcritical,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationReport {
    pub case: BifurcationCase,
    pub description: &'static str,
    pub criticality: Criticality,
    pub lambda0: f64,
    pub alpha: Option<SidePair>,
    pub beta: Option<SidePair>,
    #[serde(rename = "Lambda")]
    pub lambda_criterion: Option<f64>,
    pub l1: Option<f64>,
    pub marginal: bool,
    pub hypothesis_ok: bool,
    pub equilibrium: Option<Equilibrium>,
    #[serde(skip)]
    pub corner: Option<CornerQuantities>,
}

fn near_zero(v: f64) -> bool {
    v.abs() <= MARGINAL_TOL
}

/// Classifies the bifurcation born at or near the corner.
pub fn classify_corner(sys: &SystemDefinition) -> Result<BifurcationReport, BifurcationError> {
    let cq = corner_quantities(sys)?;
    if !(cq.f_minus_slope < 0.0 && cq.f_plus_slope > 0.0) {
        return Err(BifurcationError::Hypothesis(format!(
            "a strict corner is required: f_minus'(0) = {} must be < 0 and f_plus'(0) = {} must be > 0",
            cq.f_minus_slope, cq.f_plus_slope
        )));
    }
    if !cq.det_hypothesis_ok {
        return Err(BifurcationError::Hypothesis(format!(
            "g_x(0,0;0,eps) = {} must exceed max(-f_plus'(0) g_y, -f_minus'(0) g_y) = {}",
            cq.g_x,
            (-cq.f_plus_slope * cq.g_y).max(-cq.f_minus_slope * cq.g_y)
        )));
    }

    if cq.alpha_minus > 0.0 || cq.alpha_plus < 0.0 {
        let (case, side, window) = if cq.alpha_minus > 0.0 {
            (BifurcationCase::SmoothHopfLeft, Side::Left, (0.0, -1.0))
        } else {
            (BifurcationCase::SmoothHopfRight, Side::Right, (0.0, 1.0))
        };
        let lambda0 = find_hopf_locus(sys, side, window)?;
        let at = corner_quantities_at(sys, lambda0)?;
        let eq = local_equilibrium(sys, lambda0)?;
        let l1 = lyapunov_first_coefficient(sys, &eq)?;
        let marginal = near_zero(cq.alpha_minus)
            || near_zero(cq.alpha_plus)
            || l1.criticality == Criticality::Degenerate;
        return Ok(BifurcationReport {
            case,
            description: case.description(),
            criticality: l1.criticality,
            lambda0,
            alpha: Some(at.alpha()),
            beta: Some(at.beta()),
            lambda_criterion: at.lambda_criterion,
            l1: Some(l1.value),
            marginal,
            hypothesis_ok: true,
            equilibrium: Some(eq),
            corner: Some(at),
        });
    }

    let mut marginal = near_zero(cq.alpha_minus) || near_zero(cq.alpha_plus);
    let (case, criticality) = if cq.beta_plus < 0.0 && cq.beta_minus < 0.0 {
        let lam = cq
            .lambda_criterion
            .expect("defined when both betas are negative");
        marginal |= near_zero(lam);
        let crit = if lam < 0.0 {
            Criticality::Supercritical
        } else if lam > 0.0 {
            Criticality::Subcritical
        } else {
            Criticality::Degenerate
        };
        (BifurcationCase::NonsmoothHopf, crit)
    } else if cq.beta_plus < 0.0 {
        (BifurcationCase::HopfLike, Criticality::Supercritical)
    } else if cq.beta_minus < 0.0 {
        (BifurcationCase::SuperExplosion, Criticality::Subcritical)
    } else {
        (BifurcationCase::SuperExplosion, Criticality::Supercritical)
    };
    marginal |= near_zero(cq.beta_plus) || near_zero(cq.beta_minus);
    let eq = local_equilibrium(sys, 0.0).ok();
    Ok(BifurcationReport {
        case,
        description: case.description(),
        criticality,
        lambda0: 0.0,
        alpha: Some(cq.alpha()),
        beta: Some(cq.beta()),
        lambda_criterion: cq.lambda_criterion,
        l1: None,
        marginal,
        hypothesis_ok: true,
        equilibrium: eq,
        corner: Some(cq),
    })
}

/// Trace of the Jacobian at the local equilibrium, when it lies on `branch`.
fn trace_on_branch(sys: &SystemDefinition, lambda: f64, branch: Side) -> Option<(f64, f64)> {
    let eq = local_equilibrium(sys, lambda).ok()?;
    match (branch, eq.side) {
        (Side::Left, EquilibriumSide::Left) | (Side::Right, EquilibriumSide::Right) => {
            Some((eq.trace(), eq.det()))
        }
        // one-sided limit so a root right next to the corner is still bracketed
        (_, EquilibriumSide::Corner) => {
            let j = jacobian_at(sys, eq.x, lambda, branch).ok()?;
            Some((j[0][0] + j[1][1], j[0][0] * j[1][1] - j[0][1] * j[1][0]))
        }
        _ => None,
    }
}

/// All trace roots on `branch`, scanning `lambda` from `window.0` to `window.1`.
pub fn hopf_candidates(
    sys: &SystemDefinition,
    branch: Side,
    window: (f64, f64),
) -> Vec<(f64, f64)> {
    let samples: Vec<Sample> = roots::linspace(window.0, window.1, HOPF_SCAN_CELLS)
        .map(|lambda| Sample {
            x: lambda,
            value: trace_on_branch(sys, lambda, branch).map(|(tr, _)| tr),
        })
        .collect();
    let tr = |lambda: f64| {
        trace_on_branch(sys, lambda, branch)
            .map(|(t, _)| t)
            .ok_or(())
    };
    let mut out = Vec::new();
    for (a, b) in roots::sign_changes(&samples) {
        let lambda = if a.x == b.x {
            a.x
        } else {
            let opts = BrentOptions {
                ftol: HOPF_TRACE_TOL * 1e-2,
                xtol: 1e-15,
                max_iter: 200,
            };
            match roots::brent(tr, a.x, b.x, opts) {
                Ok((l, _)) => l,
                Err(_) => continue,
            }
        };
        if let Some((_, det)) = trace_on_branch(sys, lambda, branch) {
            out.push((lambda, det));
        }
    }
    out
}

/// First Hopf point on `branch` met when scanning `lambda_window` from its
/// first endpoint toward its second.
pub fn find_hopf_locus(
    sys: &SystemDefinition,
    branch: Side,
    lambda_window: (f64, f64),
) -> Result<f64, BifurcationError> {
    let candidates = hopf_candidates(sys, branch, lambda_window);
    let Some(&(lambda, det)) = candidates.first() else {
        let (lo, hi) = (
            lambda_window.0.min(lambda_window.1),
            lambda_window.0.max(lambda_window.1),
        );
        return Err(BifurcationError::NoHopf {
            branch: branch.label(),
            lo,
            hi,
        });
    };
    if det <= 0.0 {
        return Err(BifurcationError::NotHopf { lambda, det });
    }
    Ok(lambda)
}

/// Classifies the smooth Hopf bifurcation near the fold `x_M`.
///
/// `lambda_window` is scanned for trace roots on the right branch; the root
/// whose equilibrium is nearest to `x_M` is reported.
pub fn classify_fold(
    sys: &SystemDefinition,
    lambda_window: (f64, f64),
) -> Result<BifurcationReport, BifurcationError> {
    let x_m = find_x_max(sys, sys.x_window().1)?;
    let fm = sys.f(x_m)?;
    let gx = sys.g_jet(x_m, fm, x_m)?.dx();
    if !(gx > 0.0) {
        return Err(BifurcationError::Hypothesis(format!(
            "g_x(x_M, F(x_M); x_M, eps) = {gx} must be positive"
        )));
    }
    let candidates = hopf_candidates(sys, Side::Right, lambda_window);
    let best = candidates
        .iter()
        .filter_map(|&(lambda, det)| local_equilibrium(sys, lambda).ok().map(|eq| (eq, det)))
        .min_by(|a, b| (a.0.x - x_m).abs().total_cmp(&(b.0.x - x_m).abs()));
    let Some((eq, det)) = best else {
        return Err(BifurcationError::NoHopf {
            branch: "R",
            lo: lambda_window.0,
            hi: lambda_window.1,
        });
    };
    if det <= 0.0 {
        return Err(BifurcationError::NotHopf {
            lambda: eq.lambda,
            det,
        });
    }
    let l1 = lyapunov_first_coefficient(sys, &eq)?;
    Ok(BifurcationReport {
        case: BifurcationCase::FoldHopf,
        description: BifurcationCase::FoldHopf.description(),
        criticality: l1.criticality,
        lambda0: eq.lambda,
        alpha: None,
        beta: None,
        lambda_criterion: None,
        l1: Some(l1.value),
        marginal: l1.criticality == Criticality::Degenerate,
        hypothesis_ok: true,
        equilibrium: Some(eq),
        corner: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovCoefficient {
    pub value: f64,
    pub criticality: Criticality,
}

impl LyapunovCoefficient {
    fn from_value(value: f64) -> Self {
        let criticality = if value.abs() < L1_TOL {
            Criticality::Degenerate
        } else if value < 0.0 {
            Criticality::Supercritical
        } else {
            Criticality::Subcritical
        };
        Self { value, criticality }
    }
}

/// First Lyapunov coefficient of the smooth piece containing `eq`.
pub fn lyapunov_first_coefficient(
    sys: &SystemDefinition,
    eq: &Equilibrium,
) -> Result<LyapunovCoefficient, BifurcationError> {
    let fj = sys.piece_jet(eq.piece(), eq.x)?;
    // the piece only depends on x, so its jet is reused with y as a variable
    let f1 = fj - Jet3::variable_y(eq.y) + Jet3::constant(eq.y);
    let f2 = Jet3::constant(sys.eps()) * sys.g_jet(eq.x, eq.y, eq.lambda)?;
    let tr = f1.dx() + f2.dy();
    let det = f1.dx() * f2.dy() - f1.dy() * f2.dx();
    let scale = f1.dx().abs() + f2.dy().abs() + det.abs().sqrt();
    if !(det > 0.0) || tr.abs() > 1e-8 * scale.max(1.0) {
        return Err(BifurcationError::NotAtHopf { trace: tr, det });
    }
    Ok(LyapunovCoefficient::from_value(first_lyapunov_planar(
        &f1, &f2,
    )))
}

/// Planar first Lyapunov coefficient from third-order jets of the two field
/// components at an equilibrium with purely imaginary eigenvalues.
///
/// Uses the projection formula with eigenvectors `A q = i w q`,
/// `A^T p = -i w p`, `<p, q> = 1`.
pub fn first_lyapunov_planar(f1: &Jet3, f2: &Jet3) -> f64 {
    let a = [[f1.dx(), f1.dy()], [f2.dx(), f2.dy()]];
    let det = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let w = det.sqrt();
    let iw = Complex64::new(0.0, w);
    let c = |v: f64| Complex64::new(v, 0.0);

    let q = if a[0][1] != 0.0 {
        [c(a[0][1]), iw - a[0][0]]
    } else {
        [iw - a[1][1], c(a[1][0])]
    };
    let p0 = if a[1][0] != 0.0 {
        [c(a[1][0]), -(iw + a[0][0])]
    } else {
        [iw + a[1][1], c(-a[0][1])]
    };
    let inner = |p: &[Complex64; 2], v: &[Complex64; 2]| p[0].conj() * v[0] + p[1].conj() * v[1];
    let norm = inner(&p0, &q);
    let p = [p0[0] / norm.conj(), p0[1] / norm.conj()];

    let comps = [f1, f2];
    let bilinear = |u: &[Complex64; 2], v: &[Complex64; 2]| -> [Complex64; 2] {
        let mut out = [Complex64::default(); 2];
        for (k, f) in comps.iter().enumerate() {
            out[k] = u[0] * v[0] * f.dxx()
                + (u[0] * v[1] + u[1] * v[0]) * f.dxy()
                + u[1] * v[1] * f.dyy();
        }
        out
    };
    let trilinear =
        |u: &[Complex64; 2], v: &[Complex64; 2], z: &[Complex64; 2]| -> [Complex64; 2] {
            let mut out = [Complex64::default(); 2];
            for (k, f) in comps.iter().enumerate() {
                out[k] = u[0] * v[0] * z[0] * f.dxxx()
                    + (u[0] * v[0] * z[1] + u[0] * v[1] * z[0] + u[1] * v[0] * z[0]) * f.dxxy()
                    + (u[0] * v[1] * z[1] + u[1] * v[0] * z[1] + u[1] * v[1] * z[0]) * f.dxyy()
                    + u[1] * v[1] * z[1] * f.dyyy();
            }
            out
        };
    // solves M z = r for a complex 2x2 matrix
    let solve = |m: [[Complex64; 2]; 2], r: [Complex64; 2]| -> [Complex64; 2] {
        let d = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        [
            (r[0] * m[1][1] - m[0][1] * r[1]) / d,
            (m[0][0] * r[1] - m[1][0] * r[0]) / d,
        ]
    };
    let am = [[c(a[0][0]), c(a[0][1])], [c(a[1][0]), c(a[1][1])]];
    let qb = [q[0].conj(), q[1].conj()];

    let cqqq = trilinear(&q, &q, &qb);
    let h11 = solve(am, bilinear(&q, &qb));
    let two_iw = Complex64::new(0.0, 2.0 * w);
    let shifted = [
        [two_iw - am[0][0], -am[0][1]],
        [-am[1][0], two_iw - am[1][1]],
    ];
    let h20 = solve(shifted, bilinear(&q, &q));
    let total = inner(&p, &cqqq) - c(2.0) * inner(&p, &bilinear(&q, &h11))
        + inner(&p, &bilinear(&qb, &h20));
    total.re / (2.0 * w)
}
