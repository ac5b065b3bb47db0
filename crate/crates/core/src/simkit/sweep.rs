//! Empirical covert throughput.
//!
//! `K_n` is the largest `ln|M|` whose measured error rate stays at or below a
//! target `epsilon`. Codebook sizes are taken from a geometric grid and the
//! grid is bisected, assuming the error rate grows with `|M|`. All sizes of
//! one search share the trial seeds, so the codebook for a larger `|M|`
//! extends the one for a smaller `|M|`.

use serde::{Deserialize, Serialize};

use super::{run_with_context, warden_test, CodingContext, CodingExperiment, Decoder, WardenResult, MAX_MESSAGES};
use crate::budget::{gamma_achievable, l_theoretical, normalized_rate_trend, BudgetSpec, ChannelKind, LStatus};
use crate::error::{invalid, Error, Result};
use crate::ggdist::GGParams;
use crate::stats::Proportion;

/// Geometric grid `round(ratio^j)` of codebook sizes in `2..=max_messages`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateGrid {
    pub ratio: f64,
    pub max_messages: u64,
}

impl Default for RateGrid {
    fn default() -> Self {
        Self {
            ratio: 2f64.powf(0.25),
            max_messages: MAX_MESSAGES,
        }
    }
}

impl RateGrid {
    pub fn sizes(&self) -> Result<Vec<u64>> {
        if !(self.ratio > 1.0) || !self.ratio.is_finite() {
            return Err(invalid("ratio", "must be finite and > 1"));
        }
        if self.max_messages < 2 || self.max_messages > MAX_MESSAGES {
            return Err(invalid("max_messages", format!("must lie in 2..={MAX_MESSAGES}")));
        }
        let mut sizes = Vec::new();
        let mut x = 1.0f64;
        while x.round() as u64 <= self.max_messages {
            let m = x.round() as u64;
            if m >= 2 && sizes.last() != Some(&m) {
                sizes.push(m);
            }
            x *= self.ratio;
        }
        Ok(sizes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateStatus {
    /// Bisection bracketed the largest passing size.
    Estimated,
    /// Even `|M| = 2` misses the target: no positive rate at this `n` and `epsilon`.
    NoPositiveRate,
    /// The largest grid size passes; the estimate is a lower bound.
    Capped,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatePoint {
    pub message_count: u64,
    pub error_rate: Proportion,
    pub info_density_mean: f64,
    pub info_density_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub n: u64,
    pub delta: f64,
    pub epsilon: f64,
    pub status: RateStatus,
    /// Largest passing `|M|` (1 when none passes).
    pub message_count: u64,
    /// `ln(message_count)`.
    pub k_hat: f64,
    /// `k_hat / sqrt(n delta)`.
    pub normalized: f64,
    /// `sqrt(n / delta) ln(gamma_n / alpha)`.
    pub normalized_cap: f64,
    /// Every evaluated size, in increasing order.
    pub points: Vec<RatePoint>,
}

impl RateEstimate {
    pub fn best(&self) -> Option<&RatePoint> {
        self.points.iter().find(|p| p.message_count == self.message_count)
    }
}

/// Largest `ln|M|` on the grid with error rate at most `epsilon`.
///
/// `base.message_count` is ignored.
pub fn estimate_rate(base: &CodingExperiment, epsilon: f64, grid: &RateGrid) -> Result<RateEstimate> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon", "must lie in (0, 1)"));
    }
    let sizes = grid.sizes()?;
    let ctx = CodingContext::new(base.with_message_count(2)?)?;
    let mut points: Vec<RatePoint> = Vec::new();
    let mut eval = |m: u64| -> Result<bool> {
        let r = run_with_context(&ctx.with_message_count(m)?)?;
        points.push(RatePoint {
            message_count: m,
            error_rate: r.error_rate,
            info_density_mean: r.info_density_mean,
            info_density_var: r.info_density_var,
        });
        Ok(r.error_rate.estimate <= epsilon)
    };

    let (status, best) = if !eval(sizes[0])? {
        (RateStatus::NoPositiveRate, 1)
    } else if sizes.len() == 1 || eval(sizes[sizes.len() - 1])? {
        (RateStatus::Capped, sizes[sizes.len() - 1])
    } else {
        let (mut lo, mut hi) = (0usize, sizes.len() - 1);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if eval(sizes[mid])? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (RateStatus::Estimated, sizes[lo])
    };
    points.sort_by_key(|p| p.message_count);

    let n = base.n();
    let delta = base.budget.delta();
    let k_hat = (best as f64).ln();
    let scale = (n as f64 * delta).sqrt();
    Ok(RateEstimate {
        n,
        delta,
        epsilon,
        status,
        message_count: best,
        k_hat,
        normalized: k_hat / scale,
        normalized_cap: n as f64 * base.beta().ln() / scale,
        points,
    })
}

/// Throughput estimates over several blocklengths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub noise: GGParams,
    pub delta: f64,
    pub n_list: Vec<u64>,
    pub epsilon: f64,
    pub trials: u64,
    pub seed: u64,
    #[serde(default = "default_decoder")]
    pub decoder: Decoder,
    /// Threshold slack per symbol; `n^(-3/4)` when absent.
    #[serde(default)]
    pub threshold_gamma: Option<f64>,
    #[serde(default)]
    pub grid: RateGrid,
    /// Trials of the warden test per blocklength; skipped when absent.
    #[serde(default)]
    pub warden_trials: Option<u64>,
}

fn default_decoder() -> Decoder {
    Decoder::Threshold
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_list.is_empty() {
            return Err(invalid("n_list", "must not be empty"));
        }
        if self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("n_list", "must be strictly increasing"));
        }
        for &n in &self.n_list {
            self.experiment(n)?;
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon", "must lie in (0, 1)"));
        }
        self.grid.sizes()?;
        if self.warden_trials == Some(0) {
            return Err(invalid("warden_trials", "must be positive when present"));
        }
        Ok(())
    }

    pub fn experiment(&self, n: u64) -> Result<CodingExperiment> {
        let budget = BudgetSpec::new(self.noise, self.delta, n)?;
        let mut exp = CodingExperiment::new(budget, 2, self.trials, self.seed)?.with_decoder(self.decoder);
        if let Some(t) = self.threshold_gamma {
            exp = exp.with_threshold_gamma(t)?;
        }
        Ok(exp)
    }
}

/// One blocklength of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: u64,
    pub gamma_n: f64,
    /// Formula-level normalized rate `sqrt(n / delta) ln(gamma_n / alpha)`.
    pub theory_normalized: f64,
    pub estimate: Option<RateEstimate>,
    pub warden: Option<WardenResult>,
    /// Why this row has no estimate.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: SweepConfig,
    pub l_theoretical: f64,
    pub l_status: LStatus,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    /// True when every row has an estimate with a positive rate that never
    /// exceeds the formula-level cap, and the normalized estimates increase.
    pub fn trend_holds(&self) -> bool {
        let mut prev = 0.0;
        for row in &self.rows {
            let Some(e) = &row.estimate else { return false };
            if !(e.normalized > prev) || e.normalized > e.normalized_cap {
                return false;
            }
            prev = e.normalized;
        }
        true
    }
}

pub fn run_sweep(config: &SweepConfig) -> Result<SweepReport> {
    config.validate()?;
    let theory = normalized_rate_trend(&config.noise, config.delta, &config.n_list).ok();
    let (l_theoretical, l_status) = l_theoretical(&config.noise, ChannelKind::GgMemoryless);
    let rows = config
        .n_list
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let budget = BudgetSpec::new(config.noise, config.delta, n)?;
            let gamma_n = gamma_achievable(&budget).gamma_n;
            let theory_normalized = theory.as_ref().map_or_else(|| gamma_achievable(&budget).normalized_rate, |t| t[i]);
            let outcome = config.experiment(n).and_then(|exp| {
                let estimate = estimate_rate(&exp, config.epsilon, &config.grid)?;
                let warden = match config.warden_trials {
                    Some(t) => Some(warden_test(&config.noise, gamma_n, n, t, config.seed)?),
                    None => None,
                };
                Ok((estimate, warden))
            });
            Ok(match outcome {
                Ok((estimate, warden)) => SweepRow {
                    n,
                    gamma_n,
                    theory_normalized,
                    estimate: Some(estimate),
                    warden,
                    failure: None,
                },
                Err(e) => SweepRow {
                    n,
                    gamma_n,
                    theory_normalized,
                    estimate: None,
                    warden: None,
                    failure: Some(e.to_string()),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        config: config.clone(),
        l_theoretical,
        l_status,
        rows,
    })
}

/// CSV record with the published column set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub p: f64,
    pub alpha: f64,
    pub delta: f64,
    pub n: u64,
    #[serde(rename = "M")]
    pub m: Option<u64>,
    pub eps_hat: Option<f64>,
    pub eps_ci_lo: Option<f64>,
    pub eps_ci_hi: Option<f64>,
    #[serde(rename = "K_hat_norm")]
    pub k_hat_norm: Option<f64>,
    pub i_mean: Option<f64>,
    pub i_var: Option<f64>,
    pub warden_sum: Option<f64>,
}

impl SweepReport {
    pub fn csv_rows(&self) -> Vec<CsvRow> {
        self.rows
            .iter()
            .map(|row| {
                let best = row.estimate.as_ref().and_then(|e| e.best());
                CsvRow {
                    p: self.config.noise.p(),
                    alpha: self.config.noise.alpha(),
                    delta: self.config.delta,
                    n: row.n,
                    m: row.estimate.as_ref().map(|e| e.message_count),
                    eps_hat: best.map(|b| b.error_rate.estimate),
                    eps_ci_lo: best.map(|b| b.error_rate.ci_lo),
                    eps_ci_hi: best.map(|b| b.error_rate.ci_hi),
                    k_hat_norm: row.estimate.as_ref().map(|e| e.normalized),
                    i_mean: best.map(|b| b.info_density_mean),
                    i_var: best.map(|b| b.info_density_var),
                    warden_sum: row.warden.map(|w| w.sum),
                }
            })
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in self.csv_rows() {
            w.serialize(row).map_err(|e| Error::Io(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    /// Whitespace-separated columns `n theory k_hat_norm eps_hat eps_ci_lo eps_ci_hi`;
    /// rows without an estimate carry `NaN`.
    pub fn plot_data(&self) -> String {
        let mut out = String::from("# n theory_normalized k_hat_norm eps_hat eps_ci_lo eps_ci_hi\n");
        for (row, csv) in self.rows.iter().zip(self.csv_rows()) {
            let f = |v: Option<f64>| v.map_or_else(|| "NaN".to_string(), |v| format!("{v:.10e}"));
            out.push_str(&format!(
                "{} {:.10e} {} {} {} {}\n",
                row.n,
                row.theory_normalized,
                f(csv.k_hat_norm),
                f(csv.eps_hat),
                f(csv.eps_ci_lo),
                f(csv.eps_ci_hi)
            ));
        }
        out
    }

    /// gnuplot script plotting [`Self::plot_data`] stored at `data_file`.
    pub fn gnuplot_script(&self, data_file: &str) -> String {
        format!(
            "set logscale x\nset xlabel 'n'\nset ylabel 'K_n / sqrt(n delta)'\nset key left top\n\
             plot '{data_file}' using 1:2 with linespoints title 'formula', \\\n     \
             '{data_file}' using 1:3 with points pt 7 title 'Monte Carlo', \\\n     \
             {l} with lines dt 2 title 'L = {l:.6}'\n",
            l = self.l_theoretical
        )
    }
}
