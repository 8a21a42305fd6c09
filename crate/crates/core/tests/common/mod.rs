#![allow(dead_code)]

use pwsc::SystemDefinition;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `c1*x + c2*x^2 - c3*x^3` with its analytic derivatives.
#[derive(Debug, Clone, Copy)]
pub struct Cubic {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Cubic {
    pub fn source(&self) -> String {
        format!(
            "({:e})*x + ({:e})*x^2 - ({:e})*x^3",
            self.c1, self.c2, self.c3
        )
    }
    pub fn value(&self, x: f64) -> f64 {
        self.c1 * x + self.c2 * x * x - self.c3 * x * x * x
    }
    pub fn d1(&self, x: f64) -> f64 {
        self.c1 + 2.0 * self.c2 * x - 3.0 * self.c3 * x * x
    }
    pub fn d2(&self, x: f64) -> f64 {
        2.0 * self.c2 - 6.0 * self.c3 * x
    }
    pub fn d3(&self) -> f64 {
        -6.0 * self.c3
    }
}

/// A validated system `f_-`, `f_+` cubic, `g = gx*x - lambda + gy*y`.
#[derive(Debug, Clone)]
pub struct RandomSystem {
    pub left: Cubic,
    pub right: Cubic,
    pub gx: f64,
    pub gy: f64,
    pub eps: f64,
    pub sys: SystemDefinition,
}

impl RandomSystem {
    pub fn new(left: Cubic, right: Cubic, gx: f64, gy: f64, eps: f64) -> Self {
        let g = format!("({gx:e})*x - lambda + ({gy:e})*y");
        let sys = SystemDefinition::new(&left.source(), &right.source(), &g, eps, 0.0)
            .expect("random system builds");
        Self {
            left,
            right,
            gx,
            gy,
            eps,
            sys,
        }
    }

    pub fn piece(&self, x: f64) -> Cubic {
        if x < 0.0 {
            self.left
        } else {
            self.right
        }
    }
}

/// Strict corner, interior fold of `f_+`, `g_x > 0`.
pub fn random_validated(r: &mut ChaCha8Rng) -> RandomSystem {
    let left = Cubic {
        c1: -r.gen_range(0.05..1.5),
        c2: r.gen_range(-1.0..1.0),
        c3: r.gen_range(0.0..1.0),
    };
    let right = Cubic {
        c1: r.gen_range(0.05..2.0),
        c2: r.gen_range(-1.0..1.0),
        c3: r.gen_range(0.2..1.5),
    };
    let gx = r.gen_range(0.5..2.0);
    let gy = r.gen_range(-0.5..0.5);
    let eps = r.gen_range(0.005..0.2);
    RandomSystem::new(left, right, gx, gy, eps)
}

/// Validated system with `f_+ < f_-` on the whole left half line.
pub fn random_lemma(r: &mut ChaCha8Rng) -> RandomSystem {
    let right = Cubic {
        c1: r.gen_range(0.05..1.0),
        c2: r.gen_range(0.0..1.0),
        c3: r.gen_range(0.2..1.0),
    };
    let left = Cubic {
        c1: -r.gen_range(0.05..1.0),
        c2: right.c2 + r.gen_range(0.0..0.5),
        c3: right.c3 + r.gen_range(0.0..0.5),
    };
    let eps = r.gen_range(0.01..0.1);
    RandomSystem::new(left, right, 1.0, 0.0, eps)
}

/// Corner system with `alpha_- > 0` and a Hopf point on the left branch.
pub fn random_case_i(r: &mut ChaCha8Rng) -> RandomSystem {
    let eps: f64 = r.gen_range(0.05..0.2);
    let a1 = -r.gen_range(0.2..0.8) * eps.sqrt();
    let (lo, hi) = (-a1 / eps, 1.0 / eps.sqrt());
    let gy = (lo * hi).sqrt();
    let left = Cubic {
        c1: a1,
        c2: r.gen_range(0.5..2.0),
        c3: 0.0,
    };
    let right = Cubic {
        c1: r.gen_range(0.05..1.0),
        c2: 0.0,
        c3: r.gen_range(0.2..1.0),
    };
    RandomSystem::new(left, right, 1.0, gy, eps)
}

/// Corner system with `alpha_+ < 0` and a Hopf point on the right branch.
pub fn random_case_ii(r: &mut ChaCha8Rng) -> RandomSystem {
    let eps: f64 = r.gen_range(0.05..0.2);
    let b1 = r.gen_range(0.2..0.8) * eps.sqrt();
    let (lo, hi) = (b1 / eps, 1.0 / eps.sqrt());
    let gy = -(lo * hi).sqrt();
    let target = -eps * gy;
    let b2 = r.gen_range(0.5..2.0);
    // max of f_+' is b1 + b2^2 / (3 b3); make it twice the trace offset
    let b3 = b2 * b2 / (3.0 * (2.0 * target - b1));
    let right = Cubic {
        c1: b1,
        c2: b2,
        c3: b3,
    };
    let left = Cubic {
        c1: -r.gen_range(0.05..1.0),
        c2: 0.0,
        c3: 0.0,
    };
    RandomSystem::new(left, right, 1.0, gy, eps)
}

/// Smooth Hopf on the right branch beyond the fold, `g_y > 0`.
pub fn random_fold_hopf(r: &mut ChaCha8Rng) -> RandomSystem {
    let eps: f64 = r.gen_range(0.01..0.2);
    let gy = r.gen_range(0.1..0.9) / eps.sqrt();
    let right = Cubic {
        c1: r.gen_range(0.1..1.0),
        c2: r.gen_range(-0.5..1.0),
        c3: r.gen_range(0.3..1.5),
    };
    // keeps g_x > -f_-'(0) g_y
    let left = Cubic {
        c1: -r.gen_range(0.1..0.9) / gy.max(1.0),
        c2: 0.0,
        c3: 0.0,
    };
    RandomSystem::new(left, right, 1.0, gy, eps)
}

/// Distance between two floats in units of the last place of the larger.
pub fn ulps(a: f64, b: f64, scale: f64) -> f64 {
    let unit = f64::EPSILON * scale.abs().max(f64::MIN_POSITIVE);
    (a - b).abs() / unit
}
