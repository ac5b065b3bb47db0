//! The warden's optimal test.
//!
//! The warden sees `n` i.i.d. outputs and tests `H0: N_p(0, alpha^p)` against
//! `H1: N_p(0, gamma^p)` with the likelihood ratio at threshold zero (equal
//! priors). Its log-likelihood ratio is
//! `-n ln(gamma/alpha) + (1/(2 alpha^p) - 1/(2 gamma^p)) sum |y_i|^p`.

use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::ggdist::{kl_gg, GGParams};
use crate::rng::{domain, trial_rng};
use crate::stats::Proportion;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WardenResult {
    pub false_alarm: Proportion,
    pub missed_detection: Proportion,
    /// `P_FA + P_MD`.
    pub sum: f64,
    /// 95% interval for the sum (half-widths combined in quadrature).
    pub ci: [f64; 2],
    /// `n D(N_p(0, gamma^p) || N_p(0, alpha^p))`.
    pub total_kl: f64,
    /// Pinsker's lower bound `1 - sqrt(total_kl / 2)`.
    pub pinsker_bound: f64,
}

impl WardenResult {
    /// True when the bound lies at or below the upper end of the interval.
    pub fn consistent_with_pinsker(&self) -> bool {
        self.ci[1] >= self.pinsker_bound
    }
}

pub fn warden_test(noise: &GGParams, gamma_n: f64, n: u64, trials: u64, seed: u64) -> Result<WardenResult> {
    let alpha = noise.alpha();
    if !(gamma_n >= alpha) || !gamma_n.is_finite() {
        return Err(invalid("gamma_n", format!("must be finite and >= alpha = {alpha}")));
    }
    if n == 0 || trials == 0 {
        return Err(invalid("trials", "n and trials must be positive"));
    }
    let total_kl = n as f64 * kl_gg(gamma_n, noise)?;
    let pinsker_bound = 1.0 - (total_kl / 2.0).sqrt();
    let p = noise.p();
    let weight = 0.5 * (alpha.powf(-p) - gamma_n.powf(-p));
    let offset = n as f64 * (gamma_n / alpha).ln();
    let h0 = noise.sampler();
    let h1 = noise.with_alpha(gamma_n)?.sampler();

    // Decide H1 iff the log-likelihood ratio is positive.
    let decide_h1 = |law: &crate::ggdist::GGSampler, stream: u64| -> bool {
        if weight == 0.0 {
            return false;
        }
        let mut rng = trial_rng(seed, domain::WARDEN, stream);
        let s: f64 = (0..n).map(|_| law.sample(&mut rng).abs().powf(p)).sum();
        weight * s - offset > 0.0
    };
    let outcomes: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|t| (decide_h1(&h0, 2 * t), decide_h1(&h1, 2 * t + 1)))
        .collect();
    let false_alarms = outcomes.iter().filter(|o| o.0).count() as u64;
    let misses = outcomes.iter().filter(|o| !o.1).count() as u64;
    let false_alarm = Proportion::new(false_alarms, trials);
    let missed_detection = Proportion::new(misses, trials);
    let sum = false_alarm.estimate + missed_detection.estimate;
    let half = false_alarm.half_width().hypot(missed_detection.half_width());
    Ok(WardenResult {
        false_alarm,
        missed_detection,
        sum,
        ci: [sum - half, sum + half],
        total_kl,
        pinsker_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ContinuousCDF, Gamma};

    #[test]
    fn silent_transmitter_is_undetectable() {
        let g = GGParams::new(1.0, 1.0).unwrap();
        let r = warden_test(&g, 1.0, 100, 50, 1).unwrap();
        assert_eq!(r.false_alarm.successes, 0);
        assert_eq!(r.missed_detection.successes, 50);
        assert_eq!(r.sum, 1.0);
        assert_eq!(r.total_kl, 0.0);
    }

    #[test]
    fn matches_exact_error_probabilities() {
        // sum |Z_i|^p / (2 s^p) ~ Gamma(n / p, 1) for Z_i ~ N_p(0, s^p)
        let (p, gamma, n) = (1.0f64, 1.05f64, 400u64);
        let g = GGParams::new(p, 1.0).unwrap();
        let weight = 0.5 * (1.0 - gamma.powf(-p));
        let cut = n as f64 * gamma.ln() / weight;
        let law = Gamma::new(n as f64 / p, 1.0).unwrap();
        let pfa = law.sf(cut / 2.0);
        let pmd = law.cdf(cut / (2.0 * gamma.powf(p)));
        let r = warden_test(&g, gamma, n, 20_000, 3).unwrap();
        assert!((r.false_alarm.estimate - pfa).abs() < 4.0 * r.false_alarm.half_width() / 1.96 + 1e-3);
        assert!((r.missed_detection.estimate - pmd).abs() < 4.0 * r.missed_detection.half_width() / 1.96 + 1e-3);
        assert!(r.consistent_with_pinsker());
    }
}
