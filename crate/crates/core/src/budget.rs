//! Covertness budget arithmetic.
//!
//! With a total divergence budget `delta` over `n` channel uses, the output of
//! the channel may drift from `N_p(0, alpha^p)` to `N_p(0, gamma_n^p)` with
//! `gamma_n` slightly above `alpha`. All quantities are evaluated through
//! `u = ln(gamma / alpha)` so that regimes with `gamma / alpha - 1 ~ 1e-5`
//! keep full relative precision. Nothing here allocates arrays of length `n`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ggdist::{kl_from_log_ratio, GGParams};

/// Largest blocklength accepted by the formula-only operations.
pub const N_MAX: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBudget")]
pub struct BudgetSpec {
    noise: GGParams,
    delta: f64,
    n: u64,
}

#[derive(Deserialize)]
struct RawBudget {
    noise: GGParams,
    delta: f64,
    n: u64,
}

impl TryFrom<RawBudget> for BudgetSpec {
    type Error = crate::Error;

    fn try_from(raw: RawBudget) -> Result<Self> {
        BudgetSpec::new(raw.noise, raw.delta, raw.n)
    }
}

impl BudgetSpec {
    pub fn new(noise: GGParams, delta: f64, n: u64) -> Result<Self> {
        if !delta.is_finite() || delta <= 0.0 {
            return Err(invalid("delta", format!("must be finite and > 0, got {delta}")));
        }
        if n == 0 || n > N_MAX {
            return Err(invalid("n", format!("must lie in [1, {N_MAX}], got {n}")));
        }
        Ok(Self { noise, delta, n })
    }

    pub fn noise(&self) -> &GGParams {
        &self.noise
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    /// `sqrt(n * delta)`, the normalization of the square-root law.
    pub fn sqrt_n_delta(&self) -> f64 {
        (self.n as f64 * self.delta).sqrt()
    }

    /// Per-symbol divergence allowance `delta / n`.
    pub fn per_symbol_budget(&self) -> f64 {
        self.delta / self.n as f64
    }
}

/// Output scale chosen for a budget and the quantities derived from it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BudgetResult {
    pub gamma_n: f64,
    /// `ln(gamma_n / alpha)`, kept separately for precision.
    pub log_ratio: f64,
    pub per_symbol_kl: f64,
    pub total_kl: f64,
    pub rate_cap_nats: f64,
    pub normalized_rate: f64,
}

impl BudgetResult {
    /// `gamma_n / alpha`.
    pub fn beta(&self) -> f64 {
        self.log_ratio.exp()
    }
}

/// `gamma_n = alpha (1 + sqrt(2 p delta / n))^(1/p)`.
///
/// The resulting divergence `n D` never exceeds `delta`: it is bounded by the
/// quadratic term `(n / 2p)((gamma_n/alpha)^p - 1)^2 = delta`.
pub fn gamma_achievable(spec: &BudgetSpec) -> BudgetResult {
    let p = spec.noise.p();
    let step = (2.0 * p * spec.per_symbol_budget()).sqrt();
    let log_ratio = step.ln_1p() / p;
    result_from_log_ratio(spec, log_ratio)
}

fn result_from_log_ratio(spec: &BudgetSpec, log_ratio: f64) -> BudgetResult {
    let p = spec.noise.p();
    let per_symbol_kl = kl_from_log_ratio(p, log_ratio);
    let n = spec.n as f64;
    BudgetResult {
        gamma_n: spec.noise.alpha() * log_ratio.exp(),
        log_ratio,
        per_symbol_kl,
        total_kl: n * per_symbol_kl,
        rate_cap_nats: log_ratio,
        normalized_rate: n * log_ratio / spec.sqrt_n_delta(),
    }
}

/// Log-ratio `u >= 0` solving `D(u) = delta / n` by bisection.
///
/// `D` is flat at `u = 0`, which is where covert regimes live, so Newton's
/// method is avoided.
pub fn converse_log_ratio(spec: &BudgetSpec) -> f64 {
    let p = spec.noise.p();
    let target = spec.per_symbol_budget();
    let kl = |u: f64| kl_from_log_ratio(p, u);
    // D(u) >= p u^2 / 2 for u >= 0, so this bracket always contains the root.
    let mut hi = (2.0 * target / p).sqrt().max(f64::MIN_POSITIVE);
    while kl(hi) < target {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if kl(mid) <= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    lo
}

/// Largest `gamma >= alpha` with `ln(alpha/gamma) + (1/p)((gamma/alpha)^p - 1) <= delta / n`.
pub fn gamma_converse_max(spec: &BudgetSpec) -> f64 {
    spec.noise.alpha() * converse_log_ratio(spec).exp()
}

/// `(gamma/alpha - 1) / sqrt(delta/n)` for the achievable and converse scales.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormalizedGaps {
    pub achievable: f64,
    pub converse: f64,
}

pub fn normalized_gaps(spec: &BudgetSpec) -> NormalizedGaps {
    let denom = spec.per_symbol_budget().sqrt();
    NormalizedGaps {
        achievable: gamma_achievable(spec).log_ratio.exp_m1() / denom,
        converse: converse_log_ratio(spec).exp_m1() / denom,
    }
}

/// Per-symbol mutual-information caps for an output scale `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateCap {
    /// `ln(gamma / alpha)`.
    pub log_cap: f64,
    /// `gamma / alpha - 1`, never smaller than `log_cap`.
    pub linear_cap: f64,
}

pub fn rate_cap(gamma: f64, noise: &GGParams) -> Result<RateCap> {
    if !gamma.is_finite() || gamma < noise.alpha() {
        return Err(invalid(
            "gamma",
            format!("must be finite and >= alpha = {}, got {gamma}", noise.alpha()),
        ));
    }
    let u = (gamma / noise.alpha()).ln();
    Ok(RateCap {
        log_cap: u,
        linear_cap: u.exp_m1(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelKind {
    /// i.i.d. generalized Gaussian noise.
    GgMemoryless,
    /// Gaussian noise with arbitrary mean and positive definite covariance.
    GaussianMemory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LStatus {
    Exact,
    UpperBound,
}

/// The square-root-law constant `L` and whether it is known exactly.
pub fn l_theoretical(noise: &GGParams, kind: ChannelKind) -> (f64, LStatus) {
    match kind {
        ChannelKind::GaussianMemory => (1.0, LStatus::Exact),
        ChannelKind::GgMemoryless => {
            let p = noise.p();
            let value = (2.0 / p).sqrt();
            if p <= 1.0 || p == 2.0 {
                (value, LStatus::Exact)
            } else {
                (value, LStatus::UpperBound)
            }
        }
    }
}

/// `sqrt(n / delta) ln(gamma_n / alpha)` for each blocklength. Approaches
/// `sqrt(2/p)` from below as `n` grows.
pub fn normalized_rate_trend(noise: &GGParams, delta: f64, n_list: &[u64]) -> Result<Vec<f64>> {
    let p = noise.p();
    if !(p <= 1.0 || p == 2.0) {
        return Err(crate::Error::UnsupportedShape {
            p,
            reason: "achievability is established only for p in (0, 1] and p = 2",
        });
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid("n_list", "must be strictly increasing"));
    }
    n_list
        .iter()
        .map(|&n| BudgetSpec::new(*noise, delta, n).map(|s| gamma_achievable(&s).normalized_rate))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(p: f64, alpha: f64, delta: f64, n: u64) -> BudgetSpec {
        BudgetSpec::new(GGParams::new(p, alpha).unwrap(), delta, n).unwrap()
    }

    #[test]
    fn validation() {
        let noise = GGParams::new(1.0, 1.0).unwrap();
        assert!(BudgetSpec::new(noise, 0.0, 10).is_err());
        assert!(BudgetSpec::new(noise, -1.0, 10).is_err());
        assert!(BudgetSpec::new(noise, f64::NAN, 10).is_err());
        assert!(BudgetSpec::new(noise, 0.1, 0).is_err());
        assert!(BudgetSpec::new(noise, 0.1, N_MAX + 1).is_err());
        assert!(BudgetSpec::new(noise, 0.1, N_MAX).is_ok());
    }

    #[test]
    fn achievable_laplace_example() {
        let r = gamma_achievable(&spec(1.0, 1.0, 0.01, 10_000));
        assert!((r.gamma_n - (1.0 + 2e-6f64.sqrt())).abs() < 1e-15);
        assert!((r.gamma_n - 1.001_414_2).abs() < 1e-7);
        // x - ln(1 + x) with x = sqrt(2e-6), times n
        let x = 2e-6f64.sqrt();
        let direct = 1e4 * (x - x.ln_1p());
        assert!((r.total_kl - direct).abs() < 1e-12);
        assert!(r.total_kl <= 0.01 && r.total_kl > 0.0099);
    }

    #[test]
    fn achievable_gaussian_example() {
        let r = gamma_achievable(&spec(2.0, 1.0, 0.01, 10_000));
        assert!((r.gamma_n - 1.002f64.sqrt()).abs() < 1e-15);
        assert!((r.gamma_n - 1.000_999_5).abs() < 1e-7);
    }

    #[test]
    fn vanishing_budget_means_no_drift() {
        let r = gamma_achievable(&spec(0.5, 2.0, 1e-300, 100));
        assert_eq!(r.gamma_n, 2.0);
        assert!(r.total_kl <= 1e-300);
    }

    #[test]
    fn converse_example() {
        let s = spec(1.0, 1.0, 1e-2, 10_000);
        let x = gamma_converse_max(&s) - 1.0;
        assert!((x - 1.414_880_307_592_368e-3).abs() < 1e-15, "{x}");
        assert!(x > 2e-6f64.sqrt());
        assert!(gamma_converse_max(&s) >= gamma_achievable(&s).gamma_n);
    }

    #[test]
    fn rate_cap_values() {
        let noise = GGParams::new(0.7, 2.0).unwrap();
        assert_eq!(rate_cap(2.0, &noise).unwrap().log_cap, 0.0);
        let c = rate_cap(2.0 * 1.001_414_2, &noise).unwrap();
        assert!((c.log_cap - 0.001_413_2).abs() < 1e-7);
        assert!(c.log_cap <= c.linear_cap);
        assert!(rate_cap(1.9, &noise).is_err());
    }

    #[test]
    fn l_constants() {
        let any = GGParams::new(3.0, 1.0).unwrap();
        assert_eq!(l_theoretical(&any, ChannelKind::GaussianMemory), (1.0, LStatus::Exact));
        let (v, s) = l_theoretical(&GGParams::new(1.0, 5.0).unwrap(), ChannelKind::GgMemoryless);
        assert!((v - std::f64::consts::SQRT_2).abs() < 1e-15);
        assert_eq!(s, LStatus::Exact);
        let (v, s) = l_theoretical(&any, ChannelKind::GgMemoryless);
        assert!((v - 0.816_496_6).abs() < 1e-7);
        assert_eq!(s, LStatus::UpperBound);
        let (v, s) = l_theoretical(&GGParams::standard_normal(), ChannelKind::GgMemoryless);
        assert_eq!((v, s), (1.0, LStatus::Exact));
    }

    #[test]
    fn trend_rejects_open_shapes_and_unsorted_lists() {
        let noise = GGParams::new(1.5, 1.0).unwrap();
        assert!(normalized_rate_trend(&noise, 0.01, &[10, 100]).is_err());
        let noise = GGParams::new(1.0, 1.0).unwrap();
        assert!(normalized_rate_trend(&noise, 0.01, &[100, 10]).is_err());
    }

    #[test]
    fn trend_increases_toward_limit() {
        let noise = GGParams::new(1.0, 1.0).unwrap();
        let ns = [100, 10_000, 1_000_000, 100_000_000];
        let t = normalized_rate_trend(&noise, 0.01, &ns).unwrap();
        assert!(t.windows(2).all(|w| w[1] > w[0]));
        assert!(t.iter().all(|&v| v < std::f64::consts::SQRT_2));
        assert!((t[3] / std::f64::consts::SQRT_2 - 1.0).abs() < 0.01);
        let gauss = normalized_rate_trend(&GGParams::standard_normal(), 0.01, &ns).unwrap();
        assert!((gauss[3] - 1.0).abs() < 0.01);
    }
}
