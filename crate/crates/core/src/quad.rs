//! Numerical integration.
//!
//! Two integrators are provided:
//!
//! * [`adaptive`]: globally adaptive Gauss–Kronrod (7/15 points). The error
//!   estimate of an interval is `|K15 - G7|`, which bounds the error of the
//!   lower-order rule and therefore overstates the error of the returned
//!   Kronrod value. Intervals are bisected in order of decreasing error.
//! * [`exp_sinh`]: double-exponential trapezoid on `[0, inf)`, used for
//!   Laplace-type integrals with algebraic endpoint behaviour at zero.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

/// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// An integral value together with an estimated bound on its absolute error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

/// Tolerances and limits for [`adaptive`].
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs: 1e-12,
            rel: 1e-12,
            max_intervals: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Segment {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Segment {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrates `f` over the union of consecutive intervals delimited by
/// `breakpoints` (which must be sorted and contain at least two values).
pub fn adaptive<F: Fn(f64) -> f64>(f: F, breakpoints: &[f64], tol: Tolerance) -> Result<Estimate> {
    assert!(breakpoints.len() >= 2, "need at least one interval");
    let mut heap: BinaryHeap<Segment> = breakpoints
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(&f, w[0], w[1]))
        .collect();

    loop {
        let (value, error) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target {
            return Ok(Estimate {
                value,
                error,
                intervals: heap.len(),
            });
        }
        if heap.len() >= tol.max_intervals {
            return Err(Error::QuadratureNonConvergence {
                estimate: value,
                error,
                intervals: heap.len(),
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval exhausted at machine precision; its error is roundoff.
            return Err(Error::QuadratureNonConvergence {
                estimate: value,
                error,
                intervals: heap.len() + 1,
            });
        }
        heap.push(gk15(&f, worst.a, mid));
        heap.push(gk15(&f, mid, worst.b));
    }
}

/// Breakpoints `0, scale*2^-k, ..., scale/2, scale, 2*scale, ..., end` used to
/// seed [`adaptive`] on half-lines whose integrand varies over many decades.
pub fn geometric_breaks(scale: f64, end: f64, levels_below: i32) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut x = scale * 2f64.powi(-levels_below);
    while x < end {
        out.push(x);
        x *= 2.0;
    }
    out.push(end);
    out
}

/// Double-exponential quadrature of `f` over `[0, inf)` with the substitution
/// `x = scale * exp(pi/2 * sinh(u))`. The trapezoid step is halved until two
/// successive levels agree to `max(abs_tol, rel_tol * |I|)`.
pub fn exp_sinh<F: Fn(f64) -> f64>(f: F, scale: f64, abs_tol: f64, rel_tol: f64) -> Result<Estimate> {
    const U_MAX: f64 = 4.5;
    const MAX_LEVEL: u32 = 10;
    let half_pi = std::f64::consts::FRAC_PI_2;
    let term = |u: f64| -> f64 {
        let x = scale * (half_pi * u.sinh()).exp();
        if x == 0.0 || !x.is_finite() {
            return 0.0;
        }
        let w = x * half_pi * u.cosh();
        let v = f(x) * w;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };

    let mut h = 0.5;
    let mut sum = term(0.0);
    let mut k = 1;
    while (k as f64) * h <= U_MAX {
        let u = k as f64 * h;
        sum += term(u) + term(-u);
        k += 1;
    }
    let mut previous = sum * h;
    let mut evaluations = 2 * k - 1;

    for _ in 0..MAX_LEVEL {
        h *= 0.5;
        let mut k = 1;
        while (k as f64) * h <= U_MAX {
            let u = k as f64 * h;
            sum += term(u) + term(-u);
            k += 2;
        }
        evaluations += k;
        let current = sum * h;
        let diff = (current - previous).abs();
        if diff <= abs_tol.max(rel_tol * current.abs()) {
            return Ok(Estimate {
                value: current,
                error: diff,
                intervals: evaluations,
            });
        }
        previous = current;
    }
    Err(Error::QuadratureNonConvergence {
        estimate: previous,
        error: f64::NAN,
        intervals: evaluations,
    })
}
