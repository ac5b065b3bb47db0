//! Characteristic function of `N_p(0, alpha^p)`.
//!
//! The density is even, so `phi(t) = 2 int_0^inf cos(t z) f(z) dz` is real.
//! No closed form exists for general `p`, and two quadrature routes are used:
//!
//! * cosine route: adaptive Gauss–Kronrod of the Fourier integral over the
//!   range holding all but `1e-15` of the mass. Cheap while `t` times that
//!   range spans few oscillations.
//! * Laplace route (`p <= 1`): `exp(-z^p / 2)` decays in the first quadrant,
//!   so the contour can be rotated onto the imaginary axis, giving
//!   `phi(s) = 2 c_p int_0^inf e^{-s u} e^{-a u^p} sin(b u^p) du` with
//!   `a = cos(pi p / 2) / 2` and `b = sin(pi p / 2) / 2` (unit scale). The
//!   integrand is non-oscillatory for large `s`, which is exactly where the
//!   cosine route struggles.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::ggdist::GGParams;
use crate::quad::{self, Tolerance};

const TAIL_MASS: f64 = 1e-15;
/// `e^{-37}` is below double precision relative to the integrand's peak.
const DECAY_LENGTH: f64 = 37.0;
/// Laplace route is used while its integrand completes at most this many cycles.
const MAX_LAPLACE_CYCLES: f64 = 2.0;

/// Which quadrature produced a characteristic-function value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfRoute {
    Cosine,
    Laplace,
}

/// Precomputed constants for evaluating the unit-scale characteristic function.
#[derive(Debug, Clone, Copy)]
pub struct CfEvaluator {
    p: f64,
    unit: GGParams,
    ln_cp: f64,
    tail: f64,
    damp: f64,
    freq: f64,
}

impl CfEvaluator {
    pub fn new(p: f64) -> Result<Self> {
        let unit = GGParams::new(p, 1.0)?;
        Ok(Self {
            p,
            unit,
            ln_cp: unit.ln_normalizer(),
            tail: unit.tail_bound(TAIL_MASS),
            damp: 0.5 * (FRAC_PI_2 * p).cos(),
            freq: 0.5 * (FRAC_PI_2 * p).sin(),
        })
    }

    /// Route the evaluator would choose at unit-scale frequency `s`.
    pub fn route(&self, s: f64) -> CfRoute {
        let s = s.abs();
        if self.p > 1.0 || s == 0.0 {
            return CfRoute::Cosine;
        }
        let mut reach = DECAY_LENGTH / s;
        if self.damp > 0.0 {
            reach = reach.min((DECAY_LENGTH / self.damp).powf(1.0 / self.p));
        }
        let laplace_cycles = self.freq * reach.powf(self.p) / (2.0 * PI);
        let cosine_cycles = s * self.tail / (2.0 * PI);
        if laplace_cycles <= MAX_LAPLACE_CYCLES || laplace_cycles < cosine_cycles {
            CfRoute::Laplace
        } else {
            CfRoute::Cosine
        }
    }

    /// `E[cos(s Z)]` for `Z ~ N_p(0, 1)`.
    pub fn eval(&self, s: f64) -> Result<f64> {
        let s = s.abs();
        if s == 0.0 {
            return Ok(1.0);
        }
        self.eval_route(s, self.route(s))
    }

    pub fn eval_route(&self, s: f64, route: CfRoute) -> Result<f64> {
        let s = s.abs();
        match route {
            CfRoute::Cosine => self.cosine(s),
            CfRoute::Laplace => self.laplace(s),
        }
    }

    fn cosine(&self, s: f64) -> Result<f64> {
        let unit = self.unit;
        let ln_cp = self.ln_cp;
        let f = move |z: f64| (s * z).cos() * (ln_cp - unit.scaled_abs_power(z)).exp();
        let mut breaks = quad::geometric_breaks(unit.tail_bound(0.5), self.tail, 30);
        if s > 0.0 {
            // one breakpoint per half period keeps every seed interval monotone-ish
            let half_period = PI / s;
            let count = (self.tail / half_period).ceil() as usize;
            if count > 1 && count < 200_000 {
                breaks.extend((1..count).map(|k| k as f64 * half_period));
                breaks.sort_by(f64::total_cmp);
                breaks.dedup();
            }
        }
        let tol = Tolerance {
            abs: 2e-12,
            rel: 1e-13,
            max_intervals: 400_000,
        };
        let e = quad::adaptive(f, &breaks, tol)?;
        Ok(2.0 * e.value)
    }

    fn laplace(&self, s: f64) -> Result<f64> {
        if self.p > 1.0 {
            return Err(Error::UnsupportedShape {
                p: self.p,
                reason: "contour rotation requires p <= 1",
            });
        }
        let (p, damp, freq) = (self.p, self.damp, self.freq);
        let f = move |u: f64| {
            let up = u.powf(p);
            (-s * u - damp * up).exp() * (freq * up).sin()
        };
        let e = quad::exp_sinh(f, 1.0 / s, 1e-300, 1e-13)?;
        Ok(2.0 * self.ln_cp.exp() * e.value)
    }
}

/// `E[cos(t Z)]` for `Z ~ N_p(0, alpha^p)`; absolute error below `1e-10`.
pub fn cf_gg(params: &GGParams, t: f64) -> Result<f64> {
    if !t.is_finite() {
        return Err(crate::error::invalid("t", format!("must be finite, got {t}")));
    }
    CfEvaluator::new(params.p())?.eval(params.alpha() * t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gg(p: f64, alpha: f64) -> GGParams {
        GGParams::new(p, alpha).unwrap()
    }

    #[test]
    fn origin_is_one() {
        for p in [0.3, 1.0, 2.0, 3.0] {
            assert_eq!(cf_gg(&gg(p, 2.0), 0.0).unwrap(), 1.0);
        }
    }

    #[test]
    fn gaussian_oracle() {
        let d = gg(2.0, 1.0);
        assert!((cf_gg(&d, 1.0).unwrap() - 0.606_530_659_712_633_4).abs() < 1e-10);
        for t in [0.1, 0.5, 2.0, 4.0, 7.0] {
            let v = cf_gg(&d, t).unwrap();
            assert!((v - (-t * t / 2.0f64).exp()).abs() < 1e-10, "t={t}");
        }
        let scaled = gg(2.0, 1.7);
        assert!((cf_gg(&scaled, 0.9).unwrap() - (-(1.7f64 * 0.9).powi(2) / 2.0).exp()).abs() < 1e-10);
    }

    #[test]
    fn laplace_oracle_on_both_routes() {
        let ev = CfEvaluator::new(1.0).unwrap();
        for s in [0.01, 0.2, 1.0, 3.0, 40.0, 1e4] {
            let exact = 1.0 / (1.0 + 4.0 * s * s);
            let v = ev.eval(s).unwrap();
            assert!((v - exact).abs() < 1e-10, "s={s} v={v} exact={exact}");
            let l = ev.eval_route(s, CfRoute::Laplace);
            if let Ok(l) = l {
                if s >= 0.2 {
                    assert!((l - exact).abs() < 1e-10, "laplace s={s}");
                }
            }
        }
        assert!((cf_gg(&gg(1.0, 1.0), 0.75).unwrap() - 1.0 / (1.0 + 4.0 * 0.5625)).abs() < 1e-10);
    }

    #[test]
    fn routes_agree_for_small_shapes() {
        for p in [0.3, 0.5, 0.7, 0.9] {
            let ev = CfEvaluator::new(p).unwrap();
            for s in [0.05, 0.2, 1.0] {
                let a = ev.eval_route(s, CfRoute::Cosine).unwrap();
                let b = ev.eval_route(s, CfRoute::Laplace).unwrap();
                assert!((a - b).abs() < 1e-10, "p={p} s={s} cos={a} laplace={b}");
            }
        }
    }

    #[test]
    fn positive_and_decreasing_for_small_shapes() {
        for p in [0.3, 0.5, 1.0] {
            let ev = CfEvaluator::new(p).unwrap();
            let mut prev = 1.0;
            for k in 1..60 {
                let s = 1e-3 * 1.5f64.powi(k);
                let v = ev.eval(s).unwrap();
                assert!(v > 0.0 && v < prev, "p={p} s={s} v={v}");
                prev = v;
            }
        }
    }

    #[test]
    fn rejects_non_finite_frequency() {
        assert!(cf_gg(&gg(1.0, 1.0), f64::NAN).is_err());
    }
}
