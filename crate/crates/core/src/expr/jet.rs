use std::ops::{Add, Mul, Neg, Sub};

// Coefficient layout by total order: 1, x, y, x^2, xy, y^2, x^3, x^2y, xy^2, y^3.
const EXPONENTS: [(usize, usize); 10] = [
    (0, 0),
    (1, 0),
    (0, 1),
    (2, 0),
    (1, 1),
    (0, 2),
    (3, 0),
    (2, 1),
    (1, 2),
    (0, 3),
];

const fn slot(i: usize, j: usize) -> usize {
    let n = i + j;
    n * (n + 1) / 2 + j
}

const FACTORIAL: [f64; 4] = [1.0, 1.0, 2.0, 6.0];

/// Truncated bivariate Taylor polynomial of total degree three.
///
/// Stores one coefficient per multi-index, so mixed partials are symmetric by
/// construction. `partial(i, j)` rescales a coefficient by `i! j!`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet3 {
    c: [f64; 10],
}

impl Jet3 {
    pub fn constant(value: f64) -> Self {
        let mut c = [0.0; 10];
        c[0] = value;
        Self { c }
    }

    pub fn variable_x(value: f64) -> Self {
        let mut jet = Self::constant(value);
        jet.c[slot(1, 0)] = 1.0;
        jet
    }

    pub fn variable_y(value: f64) -> Self {
        let mut jet = Self::constant(value);
        jet.c[slot(0, 1)] = 1.0;
        jet
    }

    /// Raw Taylor coefficients in the fixed layout.
    pub fn coefficients(&self) -> &[f64; 10] {
        &self.c
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `d^(i+j) / dx^i dy^j` for `i + j <= 3`.
    pub fn partial(&self, i: usize, j: usize) -> f64 {
        assert!(i + j <= 3, "jets are truncated at total order 3");
        self.c[slot(i, j)] * FACTORIAL[i] * FACTORIAL[j]
    }

    pub fn dx(&self) -> f64 {
        self.partial(1, 0)
    }
    pub fn dy(&self) -> f64 {
        self.partial(0, 1)
    }
    pub fn dxx(&self) -> f64 {
        self.partial(2, 0)
    }
    pub fn dxy(&self) -> f64 {
        self.partial(1, 1)
    }
    pub fn dyy(&self) -> f64 {
        self.partial(0, 2)
    }
    pub fn dxxx(&self) -> f64 {
        self.partial(3, 0)
    }
    pub fn dxxy(&self) -> f64 {
        self.partial(2, 1)
    }
    pub fn dxyy(&self) -> f64 {
        self.partial(1, 2)
    }
    pub fn dyyy(&self) -> f64 {
        self.partial(0, 3)
    }

    fn scale(mut self, s: f64) -> Self {
        for c in &mut self.c {
            *c *= s;
        }
        self
    }

    /// `f(self)` given `f, f', f'', f'''` at the value of `self`.
    pub(crate) fn compose(self, d: [f64; 4]) -> Self {
        let mut h = self;
        h.c[0] = 0.0;
        let h2 = h * h;
        let h3 = h2 * h;
        let mut out = Self::constant(d[0]);
        for k in 1..10 {
            out.c[k] = d[1] * h.c[k] + 0.5 * d[2] * h2.c[k] + d[3] / 6.0 * h3.c[k];
        }
        out
    }

    /// Reciprocal; the caller guarantees a non-zero value.
    pub(crate) fn recip(self) -> Self {
        let a = self.c[0];
        let inv = 1.0 / a;
        self.compose([
            inv,
            -inv * inv,
            2.0 * inv * inv * inv,
            -6.0 * inv * inv * inv * inv,
        ])
    }

    pub fn powi(self, n: u32) -> Self {
        let mut acc = Self::constant(1.0);
        let mut base = self;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            e >>= 1;
            if e > 0 {
                base = base * base;
            }
        }
        acc
    }
}

impl Add for Jet3 {
    type Output = Jet3;
    fn add(mut self, rhs: Jet3) -> Jet3 {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a += b;
        }
        self
    }
}

impl Sub for Jet3 {
    type Output = Jet3;
    fn sub(mut self, rhs: Jet3) -> Jet3 {
        for (a, b) in self.c.iter_mut().zip(rhs.c) {
            *a -= b;
        }
        self
    }
}

impl Neg for Jet3 {
    type Output = Jet3;
    fn neg(self) -> Jet3 {
        self.scale(-1.0)
    }
}

impl Mul for Jet3 {
    type Output = Jet3;
    fn mul(self, rhs: Jet3) -> Jet3 {
        let mut c = [0.0; 10];
        for (ka, &(ia, ja)) in EXPONENTS.iter().enumerate() {
            let a = self.c[ka];
            if a == 0.0 {
                continue;
            }
            for (kb, &(ib, jb)) in EXPONENTS.iter().enumerate() {
                if ia + ja + ib + jb > 3 {
                    continue;
                }
                c[slot(ia + ib, ja + jb)] += a * rhs.c[kb];
            }
        }
        Jet3 { c }
    }
}
