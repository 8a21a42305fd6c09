//! Dormand–Prince 5(4) tableau, a single trial step, and its dense output.

pub(crate) type State = [f64; 2];

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

#[inline]
fn comb(y: State, h: f64, terms: &[(f64, State)]) -> State {
    let mut out = y;
    for &(a, k) in terms {
        out[0] += h * a * k[0];
        out[1] += h * a * k[1];
    }
    out
}

pub(crate) struct TrialStep {
    pub y1: State,
    pub k7: State,
    pub err: State,
    stages: [State; 7],
}

/// One trial step from `y0` with derivative `k1` already known.
pub(crate) fn trial<E>(
    f: &mut impl FnMut(State) -> Result<State, E>,
    y0: State,
    k1: State,
    h: f64,
) -> Result<TrialStep, E> {
    let k2 = f(comb(y0, h, &[(A21, k1)]))?;
    let k3 = f(comb(y0, h, &[(A31, k1), (A32, k2)]))?;
    let k4 = f(comb(y0, h, &[(A41, k1), (A42, k2), (A43, k3)]))?;
    let k5 = f(comb(y0, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]))?;
    let k6 = f(comb(
        y0,
        h,
        &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)],
    ))?;
    let y1 = comb(
        y0,
        h,
        &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)],
    );
    let k7 = f(y1)?;
    let mut err = [0.0; 2];
    for i in 0..2 {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Ok(TrialStep {
        y1,
        k7,
        err,
        stages: [k1, k2, k3, k4, k5, k6, k7],
    })
}

/// Scaled RMS error norm.
pub(crate) fn error_norm(step: &TrialStep, y0: State, rtol: f64, atol: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..2 {
        let sk = atol + rtol * y0[i].abs().max(step.y1[i].abs());
        sum += (step.err[i] / sk).powi(2);
    }
    (sum / 2.0).sqrt()
}

/// Continuous extension of one accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Interpolant {
    r: [State; 5],
}

impl Interpolant {
    pub fn new(y0: State, step: &TrialStep, h: f64) -> Self {
        let [k1, _, k3, k4, k5, k6, k7] = step.stages;
        let mut r = [[0.0; 2]; 5];
        for i in 0..2 {
            let ydiff = step.y1[i] - y0[i];
            let bspl = h * k1[i] - ydiff;
            r[0][i] = y0[i];
            r[1][i] = ydiff;
            r[2][i] = bspl;
            r[3][i] = ydiff - h * k7[i] - bspl;
            r[4][i] =
                h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
        }
        Self { r }
    }

    /// State at fraction `theta` of the step.
    pub fn eval(&self, theta: f64) -> State {
        let t1 = 1.0 - theta;
        let r = &self.r;
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] =
                r[0][i] + theta * (r[1][i] + t1 * (r[2][i] + theta * (r[3][i] + t1 * r[4][i])));
        }
        out
    }
}
