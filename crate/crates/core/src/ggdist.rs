//! Generalized Gaussian noise `N_p(0, alpha^p)`.
//!
//! The density is `f(z) = (c_p / alpha) * exp(-|z|^p / (2 alpha^p))` with
//! `c_p = p / (2^((p+1)/p) * Gamma(1/p))`. Shape `p = 2` is the normal law with
//! standard deviation `alpha`; `p = 1` is the Laplace law with scale `2 alpha`.
//!
//! Every normalizer is evaluated in the log domain. Divergences and entropies
//! are in nats.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use crate::error::{invalid, Result};
use crate::quad::{self, Estimate, Tolerance};

/// Smallest supported shape. Below this double precision degrades.
pub const P_MIN: f64 = 1e-2;
/// Largest supported shape.
pub const P_MAX: f64 = 1e2;

/// Shape `p` and scale `alpha` of a generalized Gaussian law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams")]
pub struct GGParams {
    p: f64,
    alpha: f64,
}

#[derive(Deserialize)]
struct RawParams {
    p: f64,
    alpha: f64,
}

impl TryFrom<RawParams> for GGParams {
    type Error = crate::Error;

    fn try_from(raw: RawParams) -> Result<Self> {
        GGParams::new(raw.p, raw.alpha)
    }
}

impl GGParams {
    pub fn new(p: f64, alpha: f64) -> Result<Self> {
        if !p.is_finite() || p <= 0.0 {
            return Err(invalid("p", format!("must be finite and > 0, got {p}")));
        }
        if !(P_MIN..=P_MAX).contains(&p) {
            return Err(invalid(
                "p",
                format!("must lie in [{P_MIN}, {P_MAX}] (numeric envelope), got {p}"),
            ));
        }
        if !alpha.is_finite() || alpha <= 0.0 {
            return Err(invalid("alpha", format!("must be finite and > 0, got {alpha}")));
        }
        Ok(Self { p, alpha })
    }

    /// The standard normal law, `N_2(0, 1)`.
    pub fn standard_normal() -> Self {
        Self { p: 2.0, alpha: 1.0 }
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Same shape, different scale.
    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        Self::new(self.p, alpha)
    }

    /// `ln c_p`.
    pub fn ln_normalizer(&self) -> f64 {
        let p = self.p;
        p.ln() - (p + 1.0) / p * std::f64::consts::LN_2 - ln_gamma(1.0 / p)
    }

    /// `c_p = p / (2^((p+1)/p) Gamma(1/p))`.
    pub fn normalizer(&self) -> f64 {
        self.ln_normalizer().exp()
    }

    pub fn log_pdf(&self, z: f64) -> f64 {
        self.ln_normalizer() - self.alpha.ln() - self.scaled_abs_power(z)
    }

    pub fn pdf(&self, z: f64) -> f64 {
        self.log_pdf(z).exp()
    }

    /// `|z|^p / (2 alpha^p)`, which is Gamma(1/p, 1)-distributed under this law.
    #[inline]
    pub fn scaled_abs_power(&self, z: f64) -> f64 {
        0.5 * (z.abs() / self.alpha).powf(self.p)
    }

    /// `P(|Z| > t)` for `t >= 0`.
    pub fn abs_survival(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        gamma_ur(1.0 / self.p, self.scaled_abs_power(t))
    }

    pub fn cdf(&self, z: f64) -> f64 {
        if z == 0.0 {
            return 0.5;
        }
        let x = self.scaled_abs_power(z);
        let a = 1.0 / self.p;
        if z > 0.0 {
            1.0 - 0.5 * gamma_ur(a, x)
        } else {
            0.5 * gamma_ur(a, x)
        }
    }

    /// Smallest `t` (to relative precision 1e-12) with `P(|Z| > t) <= mass`.
    pub fn tail_bound(&self, mass: f64) -> f64 {
        assert!(mass > 0.0 && mass < 1.0, "tail mass must lie in (0, 1)");
        let a = 1.0 / self.p;
        let mut hi = a.max(1.0);
        while gamma_ur(a, hi) > mass {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gamma_ur(a, mid) > mass {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-13 * hi {
                break;
            }
        }
        self.alpha * (2.0 * hi).powf(1.0 / self.p)
    }

    /// `E|Z|^p = 2 alpha^p / p`.
    pub fn abs_moment_p(&self) -> f64 {
        2.0 * self.alpha.powf(self.p) / self.p
    }

    /// `ln E[Z^2]`.
    pub fn ln_second_moment(&self) -> f64 {
        let p = self.p;
        2.0 / p * std::f64::consts::LN_2 + 2.0 * self.alpha.ln() + ln_gamma(3.0 / p)
            - ln_gamma(1.0 / p)
    }

    /// `E[Z^2] = 2^(2/p) alpha^2 Gamma(3/p) / Gamma(1/p)`. Overflows to
    /// infinity for very small `p`; use [`Self::ln_second_moment`] there.
    pub fn second_moment(&self) -> f64 {
        self.ln_second_moment().exp()
    }

    /// Differential entropy `ln(alpha / c_p) + 1/p` in nats.
    pub fn entropy(&self) -> f64 {
        self.alpha.ln() - self.ln_normalizer() + 1.0 / self.p
    }

    /// A sampler usable with any RNG.
    pub fn sampler(&self) -> GGSampler {
        GGSampler {
            gamma: Gamma::new(1.0 / self.p, 1.0).expect("shape validated at construction"),
            inv_p: 1.0 / self.p,
            alpha: self.alpha,
        }
    }

    /// `count` i.i.d. draws, deterministic in `(self, count, seed)`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<GGSample> {
        if count == 0 {
            return Err(invalid("count", "must be at least 1"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sampler = self.sampler();
        let values = (0..count).map(|_| sampler.sample(&mut rng)).collect();
        Ok(GGSample {
            seed,
            values,
        })
    }
}

/// Draws `Z = S * alpha * (2 W)^(1/p)` with `W ~ Gamma(1/p, 1)` and `S` a fair sign.
#[derive(Debug, Clone, Copy)]
pub struct GGSampler {
    gamma: Gamma<f64>,
    inv_p: f64,
    alpha: f64,
}

impl Distribution<f64> for GGSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let w: f64 = self.gamma.sample(rng);
        let magnitude = self.alpha * (2.0 * w).powf(self.inv_p);
        if rng.random::<bool>() {
            magnitude
        } else {
            -magnitude
        }
    }
}

/// Realizations of generalized Gaussian noise, regenerable from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GGSample {
    pub seed: u64,
    pub values: Vec<f64>,
}

/// `e^v - 1 - v`, accurate for small `|v|`.
pub(crate) fn expm1_minus_x(v: f64) -> f64 {
    if v.abs() < 1e-2 {
        // Taylor series; truncation error below 1e-2^9 / 9! relative.
        let mut term = v * v / 2.0;
        let mut sum = term;
        for k in 3..=9 {
            term *= v / k as f64;
            sum += term;
        }
        sum
    } else {
        v.exp_m1() - v
    }
}

/// `D(N_p(0, gamma^p) || N_p(0, alpha^p))` expressed through `u = ln(gamma/alpha)`:
/// `(e^(p u) - 1 - p u) / p`.
pub fn kl_from_log_ratio(p: f64, log_ratio: f64) -> f64 {
    expm1_minus_x(p * log_ratio) / p
}

/// Closed-form divergence `ln(alpha/gamma) + (1/p)((gamma/alpha)^p - 1)`
/// between two generalized Gaussian laws of common shape.
pub fn kl_gg(gamma: f64, noise: &GGParams) -> Result<f64> {
    if !gamma.is_finite() || gamma <= 0.0 {
        return Err(invalid("gamma", format!("must be finite and > 0, got {gamma}")));
    }
    Ok(kl_from_log_ratio(noise.p, (gamma / noise.alpha).ln()))
}

/// A univariate density known through its log-density and tail behaviour.
pub trait Density: Sync {
    fn log_pdf(&self, z: f64) -> f64;

    /// A `t` such that `P(|Y| > t) <= mass`.
    fn tail_bound(&self, mass: f64) -> f64;

    /// A typical magnitude of `|Y|`, used to place quadrature breakpoints.
    fn scale(&self) -> f64 {
        self.tail_bound(0.5)
    }

    /// Whether the density is even, letting integrals fold onto `[0, inf)`.
    fn is_even(&self) -> bool {
        false
    }
}

impl Density for GGParams {
    fn log_pdf(&self, z: f64) -> f64 {
        GGParams::log_pdf(self, z)
    }

    fn tail_bound(&self, mass: f64) -> f64 {
        GGParams::tail_bound(self, mass)
    }

    fn is_even(&self) -> bool {
        true
    }
}

/// Tail mass left outside the integration range of [`kl_numeric`].
const KL_TAIL_MASS: f64 = 1e-15;

/// Quadrature estimate of `D(P_Y || P_Z)` with `Z` the given noise.
///
/// The range is `(-T, T)` where both densities hold less than `1e-15` of their
/// mass beyond `T`. Non-convergence is reported rather than returning a
/// value of unknown quality.
pub fn kl_numeric<D: Density + ?Sized>(density_y: &D, noise: &GGParams) -> Result<Estimate> {
    let t = density_y
        .tail_bound(KL_TAIL_MASS)
        .max(noise.tail_bound(KL_TAIL_MASS));
    let scale = density_y.scale().min(noise.scale()).max(t * 1e-12);
    let integrand = |z: f64| {
        let ly = density_y.log_pdf(z);
        let fy = ly.exp();
        if fy == 0.0 {
            0.0
        } else {
            fy * (ly - noise.log_pdf(z))
        }
    };
    let tol = Tolerance {
        abs: 1e-12,
        rel: 1e-11,
        max_intervals: 50_000,
    };
    let positive = quad::geometric_breaks(scale, t, 40);
    if density_y.is_even() {
        let half = quad::adaptive(integrand, &positive, tol)?;
        Ok(Estimate {
            value: 2.0 * half.value,
            error: 2.0 * half.error,
            intervals: half.intervals,
        })
    } else {
        let mut breaks: Vec<f64> = positive.iter().rev().map(|x| -x).collect();
        breaks.extend_from_slice(&positive[1..]);
        quad::adaptive(integrand, &breaks, tol)
    }
}

/// Entropy upper bound and divergence lower bound implied by a given `E|Y|^p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentBounds {
    /// `gamma` with `gamma^p = (p/2) E|Y|^p`.
    pub gamma: f64,
    /// `h(Y) <= ln(gamma / c_p) + 1/p`.
    pub entropy_bound: f64,
    /// `D(P_Y || P_Z) >= ln(alpha/gamma) + (1/p)((gamma/alpha)^p - 1)`.
    pub divergence_lower: f64,
}

pub fn moment_bounds(moment_p: f64, noise: &GGParams) -> Result<MomentBounds> {
    if !moment_p.is_finite() || moment_p <= 0.0 {
        return Err(invalid("moment_p", format!("must be finite and > 0, got {moment_p}")));
    }
    let p = noise.p;
    let ln_gamma_scale = ((0.5 * p).ln() + moment_p.ln()) / p;
    Ok(MomentBounds {
        gamma: ln_gamma_scale.exp(),
        entropy_bound: ln_gamma_scale - noise.ln_normalizer() + 1.0 / p,
        divergence_lower: kl_from_log_ratio(p, ln_gamma_scale - noise.alpha.ln()),
    })
}
