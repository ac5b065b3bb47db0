//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::time::Instant;

use nalgebra::DMatrix;
use rand_distr::Distribution;

use covert_core::budget::{gamma_achievable, gamma_converse_max, normalized_gaps, BudgetSpec};
use covert_core::colored::{whiten, ColoredNoiseModel};
use covert_core::decomp::{convolution_l1, decompose, decompose_tabulated, tabulated_vs_closed_form_l1, FftOptions};
use covert_core::ggdist::{kl_gg, kl_numeric, GGParams};
use covert_core::rng::{domain, trial_rng};
use covert_core::simkit::{
    estimate_rate, info_density_stats, run_coupled, run_experiment, run_sweep, variance_bound, warden_test,
    CodingExperiment, Decoder, RateGrid, RateStatus, SweepConfig,
};
use covert_core::stats::{ks_test, Summary};

const P_GRID: [f64; 6] = [0.3, 0.5, 1.0, 1.5, 2.0, 3.0];
const ALPHA_GRID: [f64; 3] = [0.5, 1.0, 4.0];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn gg(p: f64, alpha: f64) -> GGParams {
    GGParams::new(p, alpha).expect("valid parameters")
}

fn kl_closed_vs_quadrature() -> Outcome {
    let mut worst: f64 = 0.0;
    for &p in &P_GRID {
        for &alpha in &ALPHA_GRID {
            for ratio in [1.001, 1.01, 1.1, 1.5] {
                let noise = gg(p, alpha);
                let gamma = ratio * alpha;
                let closed = kl_gg(gamma, &noise).unwrap();
                let numeric = kl_numeric(&gg(p, gamma), &noise).unwrap().value;
                worst = worst.max((closed - numeric).abs());
            }
        }
    }
    outcome(worst <= 1e-8, format!("max |closed - quadrature| = {worst:.3e} over 72 points"))
}

fn limit_ratio() -> Outcome {
    let mut worst: f64 = 0.0;
    for &p in &P_GRID {
        let r = 1e-4;
        let ratio = kl_gg(1.0 + r, &gg(p, 1.0)).unwrap() / (r * r);
        worst = worst.max((ratio / (p / 2.0) - 1.0).abs());
    }
    outcome(worst <= 0.01, format!("max relative deviation from p/2 = {worst:.3e}"))
}

fn sampler_moments() -> Outcome {
    let mut worst: f64 = 0.0;
    for &p in &P_GRID {
        for &alpha in &ALPHA_GRID {
            let law = gg(p, alpha);
            let z = law.sample(1_000_000, 11).unwrap().values;
            let abs_p: Vec<f64> = z.iter().map(|v| v.abs().powf(p)).collect();
            let sq: Vec<f64> = z.iter().map(|v| v * v).collect();
            let a = Summary::of(&abs_p);
            let b = Summary::of(&sq);
            worst = worst
                .max((a.mean - law.abs_moment_p()).abs() / a.std_error)
                .max((b.mean - law.second_moment()).abs() / b.std_error);
        }
    }
    outcome(worst <= 5.0, format!("max deviation = {worst:.2} standard errors over 18 laws"))
}

fn self_decomposition() -> Outcome {
    let mut pass = true;
    let mut min_p_value: f64 = 1.0;
    for p in [1.0, 0.7, 0.5] {
        let noise = gg(p, 1.0);
        for beta in [1.01, 1.1, 2.0] {
            let spec = decompose(&noise, beta).unwrap();
            let x = spec.sampler();
            let z = noise.sampler();
            let mut rng = trial_rng(17, domain::INPUT, (p * 1000.0) as u64 ^ (beta * 1000.0) as u64);
            let y: Vec<f64> = (0..100_000).map(|_| x.sample(&mut rng) + z.sample(&mut rng)).collect();
            let target = spec.output_law();
            let ks = ks_test(&y, |v| target.cdf(v));
            min_p_value = min_p_value.min(ks.p_value);
            pass &= ks.passes(0.001);
        }
    }
    let mut worst_l1: f64 = 0.0;
    for beta in [1.01, 1.1, 2.0] {
        let noise = gg(1.0, 1.0);
        let closed = decompose(&noise, beta).unwrap();
        let fft = decompose_tabulated(&noise, beta, FftOptions::default()).unwrap();
        worst_l1 = worst_l1.max(tabulated_vs_closed_form_l1(&fft, &closed).unwrap());
    }
    pass &= worst_l1 <= 1e-3;
    let conv = convolution_l1(&decompose(&gg(0.5, 1.0), 2.0).unwrap(), 0);
    outcome(
        pass,
        format!("min KS p-value = {min_p_value:.4}; p=1 FFT vs closed L1 = {worst_l1:.2e}; p=0.5 beta=2 convolution L1 = {conv:.2e}"),
    )
}

fn covertness_guarantee() -> Outcome {
    let mut pass = true;
    let mut min_ratio = f64::INFINITY;
    for p in [0.3, 0.5, 1.0, 2.0] {
        for &alpha in &ALPHA_GRID {
            for delta in [1e-3, 1e-2, 0.1] {
                for n in [1u64, 100, 10_000, 1_000_000, 100_000_000] {
                    let noise = gg(p, alpha);
                    let r = gamma_achievable(&BudgetSpec::new(noise, delta, n).unwrap());
                    let total = n as f64 * kl_gg(r.gamma_n, &noise).unwrap();
                    pass &= total <= delta * (1.0 + 1e-12);
                    if n >= 10_000 {
                        min_ratio = min_ratio.min(total / delta);
                    }
                }
            }
        }
    }
    pass &= min_ratio >= 0.99;
    outcome(pass, format!("n kl <= delta everywhere; min ratio at n >= 1e4 = {min_ratio:.5}"))
}

fn sandwich() -> Outcome {
    let mut pass = true;
    let mut worst: f64 = 0.0;
    for &p in &P_GRID {
        for &alpha in &ALPHA_GRID {
            for delta in [1e-3, 1e-2, 0.1] {
                for n in [10u64, 1_000, 100_000, 100_000_000] {
                    let s = BudgetSpec::new(gg(p, alpha), delta, n).unwrap();
                    pass &= gamma_converse_max(&s) >= gamma_achievable(&s).gamma_n;
                    if n == 100_000_000 {
                        let g = normalized_gaps(&s);
                        let l = (2.0 / p).sqrt();
                        worst = worst.max((g.achievable / l - 1.0).abs()).max((g.converse / l - 1.0).abs());
                    }
                }
            }
        }
    }
    pass &= worst <= 0.02;
    outcome(pass, format!("converse >= achievable everywhere; max gap deviation at n = 1e8 = {worst:.2e}"))
}

fn information_density() -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    for p in [0.5, 1.0, 2.0] {
        let noise = gg(p, 1.0);
        let gamma = gamma_achievable(&BudgetSpec::new(noise, 0.1, 100).unwrap()).gamma_n;
        let input = decompose(&noise, gamma).unwrap();
        let s = info_density_stats(&input, 1_000_000, 23).unwrap();
        let z = (s.mean - s.theory_mean).abs() / s.mean_std_error;
        pass &= z <= 5.0;
        let mut line = format!("p={p}: mean off by {z:.2} SE");
        if p <= 1.0 {
            let bound = variance_bound(&noise, gamma).unwrap();
            pass &= s.variance <= bound;
            line.push_str(&format!(", var {:.4e} <= bound {bound:.4e}", s.variance));
        }
        details.push(line);
    }
    outcome(pass, details.join("; "))
}

fn square_root_trend() -> Outcome {
    let mut worst: f64 = 0.0;
    for p in [0.5, 1.0, 2.0] {
        let r = gamma_achievable(&BudgetSpec::new(gg(p, 1.0), 0.02, 100_000_000).unwrap());
        worst = worst.max((r.normalized_rate / (2.0 / p).sqrt() - 1.0).abs());
    }
    let formula_ok = worst <= 0.01;

    let config = SweepConfig {
        noise: gg(1.0, 1.0),
        delta: 0.02,
        n_list: vec![400, 1600, 6400],
        epsilon: 0.05,
        trials: 2000,
        seed: 2024,
        decoder: Decoder::MaximumLikelihood,
        threshold_gamma: None,
        grid: RateGrid::default(),
        warden_trials: None,
    };
    let report = run_sweep(&config).unwrap();
    let values: Vec<String> = report
        .rows
        .iter()
        .map(|r| match &r.estimate {
            Some(e) => format!("n={} |M|={} K/sqrt(n delta)={:.3} (cap {:.3})", r.n, e.message_count, e.normalized, e.normalized_cap),
            None => format!("n={} failed: {}", r.n, r.failure.clone().unwrap_or_default()),
        })
        .collect();
    let capped = report
        .rows
        .iter()
        .any(|r| r.estimate.as_ref().is_some_and(|e| e.status == RateStatus::Capped));
    let pass = formula_ok && report.trend_holds() && !capped;
    outcome(pass, format!("formula deviation {worst:.2e}; {}", values.join("; ")))
}

fn whitening_equivalence() -> Outcome {
    let n = 64;
    let transport = whiten(&ColoredNoiseModel::ar1(n, 0.9).unwrap()).unwrap();
    let budget = BudgetSpec::new(GGParams::standard_normal(), 0.5, n as u64).unwrap();
    let exp = CodingExperiment::new(budget, 4, 10_000, 99)
        .unwrap()
        .with_decoder(Decoder::MaximumLikelihood);
    let report = run_coupled(&exp, &transport).unwrap();
    let power = exp.gamma_n * exp.gamma_n - 1.0;
    let (kl_colored, kl_white) = transport
        .kl_invariance_check(&(DMatrix::identity(n, n) * power))
        .unwrap();
    let gap = (kl_colored - kl_white).abs();
    let pass = report.all_identical() && gap <= 1e-9;
    outcome(
        pass,
        format!(
            "{}/{} identical decisions (error rate {:.3}); |kl_colored - kl_white| = {gap:.2e}",
            report.identical_decisions, report.trials, report.white_error_rate.estimate
        ),
    )
}

fn warden_bound() -> Outcome {
    let mut pass = true;
    let mut details = Vec::new();
    for delta in [0.02, 0.1] {
        for p in [0.5, 1.0, 2.0] {
            let noise = gg(p, 1.0);
            let n = 10_000;
            let gamma = gamma_achievable(&BudgetSpec::new(noise, delta, n).unwrap()).gamma_n;
            let w = warden_test(&noise, gamma, n, 4000, 5).unwrap();
            let bound = 1.0 - (delta / 2.0).sqrt();
            pass &= w.ci[1] >= bound;
            details.push(format!("p={p} delta={delta}: {:.3} >= {bound:.3}", w.sum));
        }
    }
    outcome(pass, details.join("; "))
}

fn determinism() -> Outcome {
    let budget = BudgetSpec::new(gg(0.5, 1.0), 0.1, 200).unwrap();
    let exp = CodingExperiment::new(budget, 8, 500, 77).unwrap();
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| {
                let coding = serde_json::to_string(&run_experiment(&exp).unwrap()).unwrap();
                let warden = serde_json::to_string(&warden_test(&gg(1.0, 1.0), 1.01, 500, 300, 3).unwrap()).unwrap();
                let rate = serde_json::to_string(
                    &estimate_rate(&exp.with_decoder(Decoder::MaximumLikelihood), 0.2, &RateGrid::default()).unwrap(),
                )
                .unwrap();
                format!("{coding}\n{warden}\n{rate}")
            })
    };
    let one = run(1);
    let four = run(4);
    let again = run(2);
    outcome(one == four && one == again, format!("{} bytes compared across 1, 2 and 4 threads", one.len()))
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 11] = [
        ("closed-form vs quadrature divergence", kl_closed_vs_quadrature),
        ("small-drift limit ratio", limit_ratio),
        ("sampler moments", sampler_moments),
        ("self-decomposition convolution oracle", self_decomposition),
        ("covertness guarantee", covertness_guarantee),
        ("converse/achievability sandwich", sandwich),
        ("information density statistics", information_density),
        ("square-root-law trend", square_root_trend),
        ("whitening equivalence", whitening_equivalence),
        ("warden bound", warden_bound),
        ("determinism", determinism),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = check();
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        if !result.pass {
            failures += 1;
        }
        println!(
            "[{verdict}] criterion {:>2} ({name}, {:.1}s): {}",
            i + 1,
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    println!("acceptance: {} passed, {failures} failed", criteria.len() - failures);
    if failures > 0 {
        std::process::exit(1);
    }
}
