//! Bracketing root finders shared by every solver in the crate.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RootError<E> {
    #[error("no sign change on [{a}, {b}] (f(a) = {fa}, f(b) = {fb})")]
    NoSignChange { a: f64, b: f64, fa: f64, fb: f64 },
    #[error("function evaluation failed at {x}")]
    Function { x: f64, source: E },
    #[error("non-finite function value at {x}")]
    NotFinite { x: f64 },
}

/// Termination criteria for [`brent`].
#[derive(Debug, Clone, Copy)]
pub struct BrentOptions {
    /// Stop once `|f(x)| <= ftol`.
    pub ftol: f64,
    /// Stop once the bracket is narrower than `xtol`.
    pub xtol: f64,
    pub max_iter: usize,
}

impl Default for BrentOptions {
    fn default() -> Self {
        Self {
            ftol: 0.0,
            xtol: 1e-14,
            max_iter: 200,
        }
    }
}

/// Brent's method on a bracket with `f(a)` and `f(b)` of opposite sign.
///
/// Returns the best estimate together with its function value.
pub fn brent<E, F>(mut f: F, a: f64, b: f64, opts: BrentOptions) -> Result<(f64, f64), RootError<E>>
where
    F: FnMut(f64) -> Result<f64, E>,
{
    let mut eval = |x: f64| -> Result<f64, RootError<E>> {
        let v = f(x).map_err(|source| RootError::Function { x, source })?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(RootError::NotFinite { x })
        }
    };
    let (mut a, mut b) = (a, b);
    let mut fa = eval(a)?;
    let mut fb = eval(b)?;
    if fa == 0.0 {
        return Ok((a, fa));
    }
    if fb == 0.0 {
        return Ok((b, fb));
    }
    if fa.signum() == fb.signum() {
        return Err(RootError::NoSignChange { a, b, fa, fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..opts.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * opts.xtol;
        let m = 0.5 * (c - b);
        if fb.abs() <= opts.ftol || m.abs() <= tol || fb == 0.0 {
            return Ok((b, fb));
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = eval(b)?;
    }
    Ok((b, fb))
}

/// A sample point whose function value may be missing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub x: f64,
    pub value: Option<f64>,
}

/// Locations where consecutive defined samples change sign.
///
/// Exact zeros are reported as degenerate brackets `(x, x)` and are never
/// double counted with the neighbouring transition.
pub fn sign_changes(samples: &[Sample]) -> Vec<(Sample, Sample)> {
    let mut out = Vec::new();
    let mut prev: Option<Sample> = None;
    let mut zero_since_prev = false;
    for s in samples {
        let Some(v) = s.value else {
            prev = None;
            zero_since_prev = false;
            continue;
        };
        if v == 0.0 {
            out.push((*s, *s));
            zero_since_prev = true;
            continue;
        }
        if let Some(p) = prev {
            let pv = p.value.unwrap_or(0.0);
            if pv.signum() != v.signum() && !zero_since_prev {
                out.push((p, *s));
            }
        }
        prev = Some(*s);
        zero_since_prev = false;
    }
    out
}

/// `n + 1` equally spaced nodes covering `[a, b]`, endpoints exact.
pub fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(move |i| {
        if i == n {
            b
        } else {
            a + (b - a) * (i as f64) / (n as f64)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::convert::Infallible;

    fn ok(f: impl Fn(f64) -> f64) -> impl FnMut(f64) -> Result<f64, Infallible> {
        move |x| Ok(f(x))
    }

    #[test]
    fn brent_finds_sqrt2() {
        let (x, _) = brent(ok(|x| x * x - 2.0), 0.0, 2.0, BrentOptions::default()).unwrap();
        assert!((x - 2f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn brent_on_quadratic_with_root_at_xm() {
        // root of f+' for 0.1x + x^2 - x^3 is (1 + sqrt(1.3)) / 3
        let (x, fx) = brent(
            ok(|x| 0.1 + 2.0 * x - 3.0 * x * x),
            0.1,
            2.0,
            BrentOptions {
                ftol: 1e-12,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(fx.abs() <= 1e-12);
        assert!((x - (1.0 + 1.3f64.sqrt()) / 3.0).abs() < 1e-12);
    }

    #[test]
    fn brent_rejects_unbracketed() {
        let r = brent(ok(|x| x * x + 1.0), -1.0, 1.0, BrentOptions::default());
        assert!(matches!(r, Err(RootError::NoSignChange { .. })));
    }

    #[test]
    fn brent_handles_steep_functions() {
        let (x, _) = brent(
            ok(|x: f64| (x - 0.3).powi(3) * 1e6),
            -1.0,
            5.0,
            BrentOptions::default(),
        )
        .unwrap();
        assert!((x - 0.3).abs() < 1e-4);
        let (x, _) = brent(
            ok(|x: f64| (20.0 * (x - 0.25)).tanh()),
            -3.0,
            1.0,
            BrentOptions::default(),
        )
        .unwrap();
        assert!((x - 0.25).abs() < 1e-14);
    }

    #[test]
    fn sign_changes_counts_exact_zeros_once() {
        let samples: Vec<Sample> = [-1.0, 0.0, 1.0, 2.0, -2.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| Sample {
                x: i as f64,
                value: Some(v),
            })
            .collect();
        let changes = sign_changes(&samples);
        assert_eq!(changes.len(), 2);
        assert_eq!(changes[0].0.x, 1.0);
        assert_eq!(changes[1].0.x, 3.0);
    }

    #[test]
    fn sign_changes_skip_undefined_gaps() {
        let samples = [
            Sample {
                x: 0.0,
                value: Some(1.0),
            },
            Sample {
                x: 1.0,
                value: None,
            },
            Sample {
                x: 2.0,
                value: Some(-1.0),
            },
            Sample {
                x: 3.0,
                value: Some(1.0),
            },
        ];
        let changes = sign_changes(&samples);
        assert_eq!(changes.len(), 1);
        assert_eq!(changes[0].0.x, 2.0);
    }

    #[test]
    fn linspace_hits_endpoints() {
        let v: Vec<f64> = linspace(-10.0, 10.0, 1000).collect();
        assert_eq!(v.len(), 1001);
        assert_eq!(v[0], -10.0);
        assert_eq!(v[500], 0.0);
        assert_eq!(v[1000], 10.0);
    }
}
