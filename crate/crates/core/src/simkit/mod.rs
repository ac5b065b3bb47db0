//! Monte Carlo verification.
//!
//! Random codes are drawn i.i.d. from the covert input law, sent over the
//! generalized Gaussian channel and decoded either by the information-density
//! threshold rule or by maximum likelihood. Each trial owns its own RNG stream
//! and trial outputs are reduced in index order, so results do not depend on
//! the number of worker threads.

pub mod codebook;
pub mod sweep;
pub mod warden;

use rand::Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::budget::{gamma_achievable, BudgetSpec};
use crate::colored::CodeTransport;
use crate::decomp::{decompose, DecompositionSpec};
use crate::error::{invalid, Error, Result};
use crate::ggdist::{GGParams, GGSampler};
use crate::rng::{domain, trial_rng};
use crate::stats::{Proportion, Summary, Z95};

use codebook::{to_dense, to_sparse, CodewordSampler, SparseCodeword};

pub use sweep::{estimate_rate, run_sweep, RateEstimate, RateGrid, RateStatus, SweepConfig, SweepReport, SweepRow};
pub use warden::{warden_test, WardenResult};

/// Largest blocklength for simulated experiments.
pub const MAX_BLOCKLENGTH: u64 = 10_000;
/// Largest codebook size.
pub const MAX_MESSAGES: u64 = 4096;
/// Largest number of trials per experiment.
pub const MAX_TRIALS: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder {
    /// Output the unique message whose information density exceeds
    /// `ln|M| + n * threshold_gamma`; otherwise declare an error.
    Threshold,
    /// Output the most likely message; ties are errors.
    MaximumLikelihood,
}

/// One random-coding experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawExperiment")]
pub struct CodingExperiment {
    pub budget: BudgetSpec,
    /// Output scale used by the input law; the achievable scale of `budget` by default.
    pub gamma_n: f64,
    pub message_count: u64,
    /// Slack of the threshold rule, in nats per symbol.
    pub threshold_gamma: f64,
    pub trials: u64,
    pub seed: u64,
    pub decoder: Decoder,
}

#[derive(Deserialize)]
struct RawExperiment {
    budget: BudgetSpec,
    gamma_n: Option<f64>,
    message_count: u64,
    threshold_gamma: Option<f64>,
    trials: u64,
    seed: u64,
    decoder: Option<Decoder>,
}

impl TryFrom<RawExperiment> for CodingExperiment {
    type Error = Error;

    fn try_from(raw: RawExperiment) -> Result<Self> {
        let mut exp = Self::new(raw.budget, raw.message_count, raw.trials, raw.seed)?;
        if let Some(g) = raw.gamma_n {
            exp = exp.with_gamma_n(g)?;
        }
        if let Some(t) = raw.threshold_gamma {
            exp = exp.with_threshold_gamma(t)?;
        }
        if let Some(d) = raw.decoder {
            exp = exp.with_decoder(d);
        }
        Ok(exp)
    }
}

/// `n^(-3/4)`.
pub fn default_threshold_gamma(n: u64) -> f64 {
    (n as f64).powf(-0.75)
}

impl CodingExperiment {
    pub fn new(budget: BudgetSpec, message_count: u64, trials: u64, seed: u64) -> Result<Self> {
        if budget.n() > MAX_BLOCKLENGTH {
            return Err(invalid("n", format!("simulated blocklengths are limited to {MAX_BLOCKLENGTH}")));
        }
        let exp = Self {
            budget,
            gamma_n: gamma_achievable(&budget).gamma_n,
            message_count,
            threshold_gamma: default_threshold_gamma(budget.n()),
            trials,
            seed,
            decoder: Decoder::Threshold,
        };
        exp.validate()?;
        Ok(exp)
    }

    fn validate(&self) -> Result<()> {
        if self.message_count == 0 || self.message_count > MAX_MESSAGES {
            return Err(invalid("message_count", format!("must lie in 1..={MAX_MESSAGES}")));
        }
        if self.trials == 0 || self.trials > MAX_TRIALS {
            return Err(invalid("trials", format!("must lie in 1..={MAX_TRIALS}")));
        }
        if !(self.threshold_gamma > 0.0) || !self.threshold_gamma.is_finite() {
            return Err(invalid("threshold_gamma", "must be positive and finite"));
        }
        let alpha = self.budget.noise().alpha();
        if !self.gamma_n.is_finite() || self.gamma_n < alpha {
            return Err(invalid("gamma_n", format!("must be finite and >= alpha = {alpha}")));
        }
        Ok(())
    }

    pub fn with_gamma_n(mut self, gamma_n: f64) -> Result<Self> {
        self.gamma_n = gamma_n;
        self.validate()?;
        Ok(self)
    }

    pub fn with_threshold_gamma(mut self, threshold_gamma: f64) -> Result<Self> {
        self.threshold_gamma = threshold_gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_message_count(mut self, message_count: u64) -> Result<Self> {
        self.message_count = message_count;
        self.validate()?;
        Ok(self)
    }

    pub fn with_trials(mut self, trials: u64) -> Result<Self> {
        self.trials = trials;
        self.validate()?;
        Ok(self)
    }

    pub fn with_decoder(mut self, decoder: Decoder) -> Self {
        self.decoder = decoder;
        self
    }

    pub fn noise(&self) -> &GGParams {
        self.budget.noise()
    }

    pub fn n(&self) -> u64 {
        self.budget.n()
    }

    pub fn beta(&self) -> f64 {
        self.gamma_n / self.noise().alpha()
    }

    /// Decision threshold in nats.
    pub fn threshold(&self) -> f64 {
        (self.message_count as f64).ln() + self.n() as f64 * self.threshold_gamma
    }
}

/// Outcome of decoding one received block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Message(u64),
    Erasure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub message: u64,
    pub decision: Decision,
    pub decoded_ok: bool,
    /// Information density of the transmitted codeword, in nats.
    pub info_density_sent: f64,
}

/// Per-symbol information density
/// `ln(gamma/alpha) + |y|^p / (2 gamma^p) - |y - x|^p / (2 alpha^p)`, summed.
pub fn info_density(x: &[f64], y: &[f64], noise: &GGParams, gamma_n: f64) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            actual: y.len(),
        });
    }
    let k = DensityConstants::new(noise, gamma_n)?;
    Ok(x.iter().zip(y).map(|(&x, &y)| k.per_symbol(x, y)).sum())
}

#[derive(Debug, Clone, Copy)]
struct DensityConstants {
    p: f64,
    ln_beta: f64,
    inv_2ap: f64,
    inv_2gp: f64,
}

impl DensityConstants {
    fn new(noise: &GGParams, gamma_n: f64) -> Result<Self> {
        let alpha = noise.alpha();
        if !(gamma_n >= alpha) || !gamma_n.is_finite() {
            return Err(invalid("gamma_n", format!("must be finite and >= alpha = {alpha}")));
        }
        let p = noise.p();
        Ok(Self {
            p,
            ln_beta: (gamma_n / alpha).ln(),
            inv_2ap: 0.5 * alpha.powf(-p),
            inv_2gp: 0.5 * gamma_n.powf(-p),
        })
    }

    fn abs_pow(&self, v: f64) -> f64 {
        abs_pow(v, self.p)
    }

    fn per_symbol(&self, x: f64, y: f64) -> f64 {
        self.ln_beta + self.abs_pow(y) * self.inv_2gp - self.abs_pow(y - x) * self.inv_2ap
    }
}

fn abs_pow(v: f64, p: f64) -> f64 {
    if p == 2.0 {
        v * v
    } else if p == 1.0 {
        v.abs()
    } else {
        v.abs().powf(p)
    }
}

/// Decomposition, samplers and constants shared by all trials of an experiment.
#[derive(Debug, Clone)]
pub struct CodingContext {
    exp: CodingExperiment,
    decomposition: DecompositionSpec,
    codewords: CodewordSampler,
    noise: GGSampler,
    consts: DensityConstants,
}

impl CodingContext {
    pub fn new(exp: CodingExperiment) -> Result<Self> {
        let decomposition = decompose(exp.noise(), exp.beta())?;
        Self::with_decomposition(exp, decomposition)
    }

    /// Reuses a decomposition computed for the same noise and `beta`.
    pub fn with_decomposition(exp: CodingExperiment, decomposition: DecompositionSpec) -> Result<Self> {
        if decomposition.noise != *exp.noise() || (decomposition.beta - exp.beta()).abs() > 1e-12 * exp.beta() {
            return Err(invalid("decomposition", "was built for a different noise law or output scale"));
        }
        let n = exp.n() as usize;
        Ok(Self {
            codewords: CodewordSampler::new(&decomposition, n)?,
            noise: exp.noise().sampler(),
            consts: DensityConstants::new(exp.noise(), exp.gamma_n)?,
            decomposition,
            exp,
        })
    }

    pub fn experiment(&self) -> &CodingExperiment {
        &self.exp
    }

    pub fn decomposition(&self) -> &DecompositionSpec {
        &self.decomposition
    }

    /// Context for the same code ensemble with a different codebook size.
    pub fn with_message_count(&self, message_count: u64) -> Result<Self> {
        let mut next = self.clone();
        next.exp = self.exp.with_message_count(message_count)?;
        Ok(next)
    }

    fn message(&self, index: u64) -> u64 {
        trial_rng(self.exp.seed, domain::MESSAGE, index).random_range(0..self.exp.message_count)
    }

    fn noise_block<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.exp.n()).map(|_| self.noise.sample(rng)).collect()
    }

    /// `sum_i |y_i - x_i|^p - |y_i|^p` over the support of `x`.
    fn correction(&self, y: &[f64], x: &SparseCodeword) -> f64 {
        x.iter()
            .map(|&(i, v)| {
                let yi = y[i as usize];
                self.consts.abs_pow(yi - v) - self.consts.abs_pow(yi)
            })
            .sum()
    }

    /// `sum_i ln(beta) + |y_i|^p / (2 gamma^p) - |y_i|^p / (2 alpha^p)`: the
    /// information density of the all-zero codeword.
    fn density_offset(&self, y: &[f64]) -> f64 {
        let base: f64 = y.iter().map(|&v| self.consts.abs_pow(v)).sum();
        y.len() as f64 * self.consts.ln_beta + base * (self.consts.inv_2gp - self.consts.inv_2ap)
    }

    /// Decides from the corrections of all codewords, listed in draw order
    /// (the transmitted codeword first, then the others in message order).
    fn decide(&self, message: u64, offset: f64, corrections: &[f64]) -> Decision {
        let id = |k: usize| -> u64 {
            if k == 0 {
                message
            } else if ((k - 1) as u64) < message {
                (k - 1) as u64
            } else {
                k as u64
            }
        };
        if corrections.len() == 1 {
            return Decision::Message(message);
        }
        match self.exp.decoder {
            Decoder::Threshold => {
                let threshold = self.exp.threshold();
                let mut found = None;
                for (k, c) in corrections.iter().enumerate() {
                    if offset - c * self.consts.inv_2ap > threshold {
                        if found.is_some() {
                            return Decision::Erasure;
                        }
                        found = Some(k);
                    }
                }
                found.map_or(Decision::Erasure, |k| Decision::Message(id(k)))
            }
            Decoder::MaximumLikelihood => {
                let mut best = 0;
                let mut tie = false;
                for (k, &c) in corrections.iter().enumerate().skip(1) {
                    if c < corrections[best] {
                        best = k;
                        tie = false;
                    } else if c == corrections[best] {
                        tie = true;
                    }
                }
                if tie {
                    Decision::Erasure
                } else {
                    Decision::Message(id(best))
                }
            }
        }
    }

    /// Runs trial `index`: fresh codebook, uniform message, fresh noise.
    pub fn trial(&self, index: u64) -> TrialOutcome {
        let message = self.message(index);
        let mut rng = trial_rng(self.exp.seed, domain::CODING, index);
        let mut codeword = SparseCodeword::new();
        self.codewords.draw(&mut rng, &mut codeword);
        let mut y = self.noise_block(&mut rng);
        for &(i, v) in &codeword {
            y[i as usize] += v;
        }
        let offset = self.density_offset(&y);
        let m = self.exp.message_count as usize;
        let mut corrections = Vec::with_capacity(m);
        corrections.push(self.correction(&y, &codeword));
        for _ in 1..m {
            self.codewords.draw(&mut rng, &mut codeword);
            corrections.push(self.correction(&y, &codeword));
        }
        let decision = self.decide(message, offset, &corrections);
        TrialOutcome {
            message,
            decision,
            decoded_ok: decision == Decision::Message(message),
            info_density_sent: offset - corrections[0] * self.consts.inv_2ap,
        }
    }

    /// Runs trial `index` on the white channel and, through `transport`, on
    /// the colored channel with coupled noise `z = A z~ + mu`.
    ///
    /// The noise law of the experiment must be the white base noise of the
    /// transport (`N_2(0, 1)` for Gaussian transports).
    pub fn coupled_trial(&self, transport: &CodeTransport, index: u64) -> Result<CoupledOutcome> {
        let n = self.exp.n() as usize;
        if transport.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: transport.dimension(),
            });
        }
        let unit_gaussian = GGParams::standard_normal();
        let base = transport.base().copied().unwrap_or(unit_gaussian);
        if base != *self.exp.noise() {
            return Err(invalid("transport", "base noise differs from the experiment's noise law"));
        }
        let message = self.message(index);
        let mut rng = trial_rng(self.exp.seed, domain::CODING, index);
        let m = self.exp.message_count as usize;
        let mut white_book = Vec::with_capacity(m);
        let mut codeword = SparseCodeword::new();
        self.codewords.draw(&mut rng, &mut codeword);
        white_book.push(codeword.clone());
        let z_white = self.noise_block(&mut rng);
        for _ in 1..m {
            self.codewords.draw(&mut rng, &mut codeword);
            white_book.push(codeword.clone());
        }

        let sent_white = to_dense(&white_book[0], n);
        let y_white: Vec<f64> = sent_white.iter().zip(&z_white).map(|(x, z)| x + z).collect();

        let sent_colored = transport.transport_encoder(&sent_white)?;
        let z_colored = transport.inverse_decoder(&z_white)?;
        let y_colored: Vec<f64> = sent_colored.iter().zip(&z_colored).map(|(x, z)| x + z).collect();
        let y_decoded = transport.transport_decoder(&y_colored)?;

        let decide = |y: &[f64]| {
            let corrections: Vec<f64> = white_book.iter().map(|c| self.correction(y, c)).collect();
            self.decide(message, self.density_offset(y), &corrections)
        };
        Ok(CoupledOutcome {
            message,
            white: decide(&y_white),
            colored: decide(&y_decoded),
            colored_codeword_nonzeros: to_sparse(&sent_colored).len(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledOutcome {
    pub message: u64,
    pub white: Decision,
    pub colored: Decision,
    pub colored_codeword_nonzeros: usize,
}

/// Decisions of coupled white and colored experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledReport {
    pub trials: u64,
    pub identical_decisions: u64,
    pub white_error_rate: Proportion,
    pub colored_error_rate: Proportion,
}

impl CoupledReport {
    pub fn all_identical(&self) -> bool {
        self.identical_decisions == self.trials
    }
}

pub fn run_coupled(exp: &CodingExperiment, transport: &CodeTransport) -> Result<CoupledReport> {
    let ctx = CodingContext::new(*exp)?;
    let outcomes = (0..exp.trials)
        .into_par_iter()
        .map(|t| ctx.coupled_trial(transport, t))
        .collect::<Result<Vec<_>>>()?;
    let identical = outcomes.iter().filter(|o| o.white == o.colored).count() as u64;
    let errors = |f: fn(&CoupledOutcome) -> Decision| {
        outcomes.iter().filter(|o| f(o) != Decision::Message(o.message)).count() as u64
    };
    Ok(CoupledReport {
        trials: exp.trials,
        identical_decisions: identical,
        white_error_rate: Proportion::new(errors(|o| o.white), exp.trials),
        colored_error_rate: Proportion::new(errors(|o| o.colored), exp.trials),
    })
}

/// Aggregate of one coding experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: CodingExperiment,
    pub error_rate: Proportion,
    /// Mean information density of the transmitted codeword, per symbol.
    pub info_density_mean: f64,
    pub info_density_mean_ci: [f64; 2],
    /// Variance of the information density divided by `n`.
    pub info_density_var: f64,
    /// `ln(gamma_n / alpha)`.
    pub theory_mean: f64,
    /// Closed-form bound on the per-symbol variance; `p <= 1` only.
    pub variance_bound: Option<f64>,
    pub warden_sum_errors: Option<WardenResult>,
}

pub fn run_experiment(exp: &CodingExperiment) -> Result<ExperimentResult> {
    run_with_context(&CodingContext::new(*exp)?)
}

pub fn run_with_context(ctx: &CodingContext) -> Result<ExperimentResult> {
    let exp = ctx.exp;
    let outcomes: Vec<TrialOutcome> = (0..exp.trials).into_par_iter().map(|t| ctx.trial(t)).collect();
    let failures = outcomes.iter().filter(|o| !o.decoded_ok).count() as u64;
    let n = exp.n() as f64;
    let per_symbol: Vec<f64> = outcomes.iter().map(|o| o.info_density_sent / n).collect();
    let (mean, half, var) = if per_symbol.len() >= 2 {
        let s = Summary::of(&per_symbol);
        (s.mean, Z95 * s.std_error, s.variance * n)
    } else {
        (per_symbol[0], 0.0, 0.0)
    };
    Ok(ExperimentResult {
        experiment: exp,
        error_rate: Proportion::new(failures, exp.trials),
        info_density_mean: mean,
        info_density_mean_ci: [mean - half, mean + half],
        info_density_var: var,
        theory_mean: exp.beta().ln(),
        variance_bound: variance_bound(exp.noise(), exp.gamma_n).ok(),
        warden_sum_errors: None,
    })
}

/// Bound on the per-symbol variance of the information density for `p <= 1`:
/// `|alpha^2 E[X^2] + (alpha - gamma)^2 E[Z^2]|^p / (4 gamma^(2p) alpha^(2p))`
/// with `E[X^2] = 2^(2/p) (gamma^2 - alpha^2) Gamma(3/p) / Gamma(1/p)`.
pub fn variance_bound(noise: &GGParams, gamma_n: f64) -> Result<f64> {
    let p = noise.p();
    if p > 1.0 {
        return Err(Error::UnsupportedShape {
            p,
            reason: "the variance bound relies on concavity of |t|^p",
        });
    }
    let alpha = noise.alpha();
    if !(gamma_n >= alpha) || !gamma_n.is_finite() {
        return Err(invalid("gamma_n", format!("must be finite and >= alpha = {alpha}")));
    }
    let shape = (2.0 / p * 2f64.ln() + ln_gamma(3.0 / p) - ln_gamma(1.0 / p)).exp();
    let input_power = shape * (gamma_n * gamma_n - alpha * alpha);
    let noise_power = shape * alpha * alpha;
    let inner = alpha * alpha * input_power + (alpha - gamma_n).powi(2) * noise_power;
    Ok(inner.abs().powf(p) / (4.0 * gamma_n.powf(2.0 * p) * alpha.powf(2.0 * p)))
}

/// Per-symbol information-density statistics from i.i.d. `(X, Y)` pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InfoDensityStats {
    pub count: usize,
    pub mean: f64,
    pub mean_std_error: f64,
    pub variance: f64,
    pub variance_std_error: f64,
    pub theory_mean: f64,
}

const SYMBOL_CHUNK: usize = 8192;

/// Samples `count` per-symbol information densities with `X` from `input`.
pub fn info_density_samples(input: &DecompositionSpec, count: usize, seed: u64) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    let noise = input.noise;
    let consts = DensityConstants::new(&noise, input.beta * noise.alpha())?;
    let x_law = input.sampler();
    let z_law = noise.sampler();
    let chunks = count.div_ceil(SYMBOL_CHUNK);
    let values: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = trial_rng(seed, domain::INFO_DENSITY, c as u64);
            let len = SYMBOL_CHUNK.min(count - c * SYMBOL_CHUNK);
            (0..len)
                .map(|_| {
                    let x = x_law.sample(&mut rng);
                    let y = x + z_law.sample(&mut rng);
                    consts.per_symbol(x, y)
                })
                .collect()
        })
        .collect();
    Ok(values.concat())
}

pub fn info_density_stats(input: &DecompositionSpec, count: usize, seed: u64) -> Result<InfoDensityStats> {
    if count < 2 {
        return Err(invalid("count", "need at least two symbols"));
    }
    let values = info_density_samples(input, count, seed)?;
    let s = Summary::of(&values);
    Ok(InfoDensityStats {
        count,
        mean: s.mean,
        mean_std_error: s.std_error,
        variance: s.variance,
        variance_std_error: Summary::variance_std_error(&values),
        theory_mean: input.beta.ln(),
    })
}

/// Empirical per-symbol variance of the information density and its bound.
pub fn variance_check(noise: &GGParams, gamma_n: f64, sample_size: usize, seed: u64) -> Result<(f64, f64)> {
    let bound = variance_bound(noise, gamma_n)?;
    let input = decompose(noise, gamma_n / noise.alpha())?;
    let stats = info_density_stats(&input, sample_size, seed)?;
    Ok((stats.variance, bound))
}
