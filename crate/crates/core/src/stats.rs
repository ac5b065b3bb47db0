//! Small statistics helpers: sample moments, proportion intervals and the
//! one-sample Kolmogorov–Smirnov test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Sample mean, unbiased variance and the standard error of the mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub variance: f64,
    pub std_error: f64,
}

impl Summary {
    /// Two-pass moments; summation order follows the slice.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        assert!(n >= 2, "need at least two values");
        let mean = values.iter().sum::<f64>() / n as f64;
        let variance = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
        Self {
            count: n,
            mean,
            variance,
            std_error: (variance / n as f64).sqrt(),
        }
    }

    /// Standard error of the sample variance, from the sample fourth central moment.
    pub fn variance_std_error(values: &[f64]) -> f64 {
        let s = Self::of(values);
        let n = values.len() as f64;
        let m4 = values.iter().map(|v| (v - s.mean).powi(4)).sum::<f64>() / n;
        ((m4 - s.variance * s.variance) / n).max(0.0).sqrt()
    }
}

/// A proportion with a 95% confidence interval clipped to `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Proportion {
    pub successes: u64,
    pub trials: u64,
    pub estimate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Proportion {
    /// Normal approximation when both `n p` and `n (1 - p)` reach 10,
    /// Wilson score interval otherwise.
    pub fn new(successes: u64, trials: u64) -> Self {
        assert!(trials > 0 && successes <= trials);
        let n = trials as f64;
        let p = successes as f64 / n;
        let (lo, hi) = if n * p >= 10.0 && n * (1.0 - p) >= 10.0 {
            let half = Z95 * (p * (1.0 - p) / n).sqrt();
            (p - half, p + half)
        } else {
            let z2 = Z95 * Z95;
            let denom = 1.0 + z2 / n;
            let center = (p + z2 / (2.0 * n)) / denom;
            let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
            (center - half, center + half)
        };
        Self {
            successes,
            trials,
            estimate: p,
            ci_lo: if successes == 0 { 0.0 } else { lo.max(0.0) },
            ci_hi: if successes == trials { 1.0 } else { hi.min(1.0) },
        }
    }

    /// Half-width of the interval, used when combining independent proportions.
    pub fn half_width(&self) -> f64 {
        0.5 * (self.ci_hi - self.ci_lo)
    }
}

pub fn normal_quantile(prob: f64) -> f64 {
    Normal::standard().inverse_cdf(prob)
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // Jacobi theta form converges fast for small lambda.
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda)).exp();
        let mut sum = 0.0;
        let mut k = 1u32;
        loop {
            let term = y.powi((k * k) as i32);
            sum += term;
            if term < 1e-17 {
                break;
            }
            k += 2;
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * sum
    } else {
        let mut sum = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            sum += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

impl KsResult {
    pub fn passes(&self, significance: f64) -> bool {
        self.p_value > significance
    }
}

/// One-sample Kolmogorov–Smirnov test of `samples` against a continuous CDF.
/// The p-value uses the asymptotic distribution with Stephens' correction.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> KsResult {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / nf).max((i + 1) as f64 / nf - f);
    }
    let en = nf.sqrt();
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf((en + 0.12 + 0.11 / en) * d),
        n,
    }
}

/// Sample Pearson correlation.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let sa = Summary::of(a);
    let sb = Summary::of(b);
    let cov = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - sa.mean) * (y - sb.mean))
        .sum::<f64>()
        / (a.len() - 1) as f64;
    cov / (sa.variance * sb.variance).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_branches_agree() {
        // both series are valid everywhere; compare at the switch point
        let lam: f64 = 1.18;
        let mut alt = 0.0;
        for k in 1..=50 {
            let kf = k as f64;
            let t = (-2.0 * kf * kf * lam * lam).exp();
            alt += if k % 2 == 1 { t } else { -t };
        }
        assert!((kolmogorov_sf(lam - 1e-12) - 2.0 * alt).abs() < 1e-10);
        // classical critical value: P(K > 1.9495) ~= 0.001
        assert!((kolmogorov_sf(1.94947) - 0.001).abs() < 2e-6);
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
    }

    #[test]
    fn proportion_intervals() {
        let p = Proportion::new(0, 100);
        assert_eq!(p.ci_lo, 0.0);
        assert!(p.ci_hi > 0.0 && p.ci_hi < 0.05);
        let q = Proportion::new(50, 100);
        assert!((q.ci_hi - q.ci_lo - 2.0 * Z95 * 0.05).abs() < 1e-12);
        let r = Proportion::new(100, 100);
        assert_eq!(r.ci_hi, 1.0);
    }

    #[test]
    fn summary_moments() {
        let s = Summary::of(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s.mean, 2.5);
        assert!((s.variance - 5.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ks_uniform_grid_is_tiny() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let r = ks_test(&xs, |x| x.clamp(0.0, 1.0));
        assert!((r.statistic - 0.0005).abs() < 1e-12);
        assert!(r.passes(0.001));
        let shifted: Vec<f64> = xs.iter().map(|x| x * 0.8).collect();
        assert!(!ks_test(&shifted, |x| x.clamp(0.0, 1.0)).passes(0.001));
    }
}
