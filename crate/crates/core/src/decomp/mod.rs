//! The covert input law.
//!
//! For `beta >= 1` we need `X`, independent of the noise `Z ~ N_p(0, alpha^p)`,
//! with `X + Z ~ N_p(0, (beta alpha)^p)`. Such an `X` exists whenever the noise
//! law is self-decomposable, which holds for `p` in `(0, 1]` and for `p = 2`.
//!
//! * `p = 1`: `X` is an atom of mass `beta^-2` at zero mixed with
//!   `N_1(0, beta alpha)`.
//! * `p = 2`: `X ~ N(0, (beta^2 - 1) alpha^2)`.
//! * `p < 1`: `phi_X(t) = phi_Z(beta t) / phi_Z(t)` is inverted numerically on
//!   a uniform grid. The ratio tends to `beta^-(1+p)` as `|t| -> inf`, which is
//!   the mass of an atom at zero; the atom is removed before inversion and the
//!   remaining spectrum is tapered by a Gaussian window so the inverse
//!   transform does not ring.

mod cf;

pub use cf::{cf_gg, CfEvaluator, CfRoute};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Distribution;
use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ggdist::{GGParams, GGSample, GGSampler};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    ClosedFormLaplace,
    ClosedFormGaussian,
    Tabulated,
}

/// Continuous part on a uniform grid: `weights[j]` is the mass of the cell
/// centred at `grid_min + j * grid_step`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedDensity {
    pub grid_min: f64,
    pub grid_step: f64,
    pub weights: Vec<f64>,
}

impl TabulatedDensity {
    pub fn x(&self, j: usize) -> f64 {
        self.grid_min + j as f64 * self.grid_step
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Density value at `x` (piecewise constant on cells).
    pub fn density_at(&self, x: f64) -> f64 {
        let j = ((x - self.grid_min) / self.grid_step).round();
        if j < 0.0 || j >= self.weights.len() as f64 {
            0.0
        } else {
            self.weights[j as usize] / self.grid_step
        }
    }
}

/// Law of the covert input `X`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionSpec {
    pub noise: GGParams,
    pub beta: f64,
    pub representation: Representation,
    pub atom_at_zero: f64,
    /// Present when `representation` is `tabulated` and the atom is not the whole law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuous_part: Option<TabulatedDensity>,
    /// Negative mass removed from the tabulated density before renormalizing.
    #[serde(default)]
    pub clipped_mass: f64,
}

impl DecompositionSpec {
    /// Law of the continuous part for the closed-form representations,
    /// scaled to unit mass.
    pub fn closed_form_continuous(&self) -> Option<GGParams> {
        if self.atom_at_zero >= 1.0 {
            return None;
        }
        let alpha = self.noise.alpha();
        match self.representation {
            Representation::ClosedFormLaplace => GGParams::new(1.0, self.beta * alpha).ok(),
            Representation::ClosedFormGaussian => {
                GGParams::new(2.0, alpha * (self.beta * self.beta - 1.0).sqrt()).ok()
            }
            Representation::Tabulated => None,
        }
    }

    /// Density of the continuous part (carrying mass `1 - atom_at_zero`) at `x`.
    pub fn continuous_density_at(&self, x: f64) -> f64 {
        match (&self.continuous_part, self.closed_form_continuous()) {
            (Some(tab), _) => tab.density_at(x),
            (None, Some(law)) => (1.0 - self.atom_at_zero) * law.pdf(x),
            _ => 0.0,
        }
    }

    /// Law of `X + Z`.
    pub fn output_law(&self) -> GGParams {
        GGParams::new(self.noise.p(), self.beta * self.noise.alpha()).expect("validated scale")
    }

    pub fn sampler(&self) -> InputSampler {
        let continuous = if self.atom_at_zero >= 1.0 {
            Continuous::None
        } else if let Some(tab) = &self.continuous_part {
            let mut cumulative = Vec::with_capacity(tab.weights.len());
            let mut acc = 0.0;
            for w in &tab.weights {
                acc += w;
                cumulative.push(acc);
            }
            Continuous::Table {
                grid_min: tab.grid_min,
                step: tab.grid_step,
                cumulative,
            }
        } else {
            match self.closed_form_continuous() {
                Some(law) => Continuous::Law(law.sampler()),
                None => Continuous::None,
            }
        };
        InputSampler {
            atom: self.atom_at_zero,
            continuous,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec is always serializable")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text).map_err(|e| invalid("json", e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta >= 1.0) {
            return Err(invalid("beta", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&self.atom_at_zero) {
            return Err(invalid("atom_at_zero", "must lie in [0, 1]"));
        }
        let continuous_mass = match (&self.continuous_part, self.representation) {
            (Some(tab), Representation::Tabulated) => {
                if !(tab.grid_step > 0.0) || tab.weights.iter().any(|w| !(*w >= 0.0)) {
                    return Err(invalid("continuous_part", "needs a positive step and nonnegative weights"));
                }
                tab.mass()
            }
            (None, Representation::Tabulated) if self.atom_at_zero < 1.0 => {
                return Err(invalid("continuous_part", "tabulated law without a table"));
            }
            (Some(_), _) => return Err(invalid("continuous_part", "only tabulated laws carry a table")),
            (None, _) => 1.0 - self.atom_at_zero,
        };
        if (self.atom_at_zero + continuous_mass - 1.0).abs() > 1e-6 {
            return Err(invalid("atom_at_zero", "atom and continuous part must sum to 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Continuous {
    None,
    Law(GGSampler),
    Table {
        grid_min: f64,
        step: f64,
        cumulative: Vec<f64>,
    },
}

/// Draws from a [`DecompositionSpec`].
#[derive(Debug, Clone)]
pub struct InputSampler {
    atom: f64,
    continuous: Continuous,
}

impl InputSampler {
    pub fn atom(&self) -> f64 {
        self.atom
    }

    /// A draw from the continuous part alone (zero if there is none).
    pub fn sample_continuous<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.continuous {
            Continuous::None => 0.0,
            Continuous::Law(law) => law.sample(rng),
            Continuous::Table {
                grid_min,
                step,
                cumulative,
            } => {
                let total = *cumulative.last().expect("non-empty table");
                let v = rng.random::<f64>() * total;
                let j = cumulative.partition_point(|&c| c <= v).min(cumulative.len() - 1);
                let below = if j == 0 { 0.0 } else { cumulative[j - 1] };
                let cell = cumulative[j] - below;
                let frac = if cell > 0.0 { (v - below) / cell } else { 0.5 };
                grid_min + (j as f64 - 0.5 + frac) * step
            }
        }
    }
}

impl Distribution<f64> for InputSampler {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.atom >= 1.0 {
            return 0.0;
        }
        if rng.random::<f64>() < self.atom {
            0.0
        } else {
            self.sample_continuous(rng)
        }
    }
}

/// `count` i.i.d. draws of `X`, deterministic in `(spec, count, seed)`.
pub fn sample_input(spec: &DecompositionSpec, count: usize, seed: u64) -> Result<GGSample> {
    if count == 0 {
        return Err(invalid("count", "must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampler = spec.sampler();
    Ok(GGSample {
        seed,
        values: (0..count).map(|_| sampler.sample(&mut rng)).collect(),
    })
}

/// Settings of the numerical inversion used for `p < 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FftOptions {
    /// Number of grid points (a power of two).
    pub grid_points: usize,
    /// Mass of `N_p(0, (beta alpha)^p)` left beyond each end of the grid.
    pub tail_mass: f64,
    /// The spectral window is `exp(-window_decay * (t / t_nyquist)^2)`.
    pub window_decay: f64,
}

impl Default for FftOptions {
    fn default() -> Self {
        Self {
            grid_points: 1 << 16,
            tail_mass: 1e-10,
            window_decay: 18.0,
        }
    }
}

/// Atom at zero of `X`: the limit of `phi_Z(beta t) / phi_Z(t)` as `|t| -> inf`.
///
/// For `p < 2` the density of `Z` has a `|z|^p` cusp at the origin, so
/// `phi_Z(t) ~ C |t|^-(1+p)` and the ratio tends to `beta^-(1+p)`. For `p = 2`
/// the ratio vanishes.
pub fn atom_mass(p: f64, beta: f64) -> f64 {
    if p >= 2.0 {
        0.0
    } else {
        beta.powf(-(1.0 + p))
    }
}

/// Builds the law of `X` for the given noise and `beta = gamma / alpha`.
pub fn decompose(noise: &GGParams, beta: f64) -> Result<DecompositionSpec> {
    decompose_with(noise, beta, FftOptions::default())
}

pub fn decompose_with(noise: &GGParams, beta: f64, options: FftOptions) -> Result<DecompositionSpec> {
    let p = noise.p();
    check_supported(p)?;
    if !beta.is_finite() || beta < 1.0 {
        return Err(invalid("beta", format!("must be finite and >= 1, got {beta}")));
    }
    let representation = if p == 1.0 {
        Representation::ClosedFormLaplace
    } else if p == 2.0 {
        Representation::ClosedFormGaussian
    } else {
        Representation::Tabulated
    };
    if beta == 1.0 {
        return Ok(DecompositionSpec {
            noise: *noise,
            beta,
            representation,
            atom_at_zero: 1.0,
            continuous_part: None,
            clipped_mass: 0.0,
        });
    }
    match representation {
        Representation::Tabulated => decompose_tabulated(noise, beta, options),
        _ => Ok(DecompositionSpec {
            noise: *noise,
            beta,
            representation,
            atom_at_zero: atom_mass(p, beta),
            continuous_part: None,
            clipped_mass: 0.0,
        }),
    }
}

fn check_supported(p: f64) -> Result<()> {
    if p <= 1.0 || p == 2.0 {
        Ok(())
    } else {
        Err(Error::UnsupportedShape {
            p,
            reason: "self-decomposability is only available for p in (0, 1] and p = 2",
        })
    }
}

/// Characteristic-function inversion, valid for `p` in `(0, 1]`.
///
/// Also usable at `p = 1`, where it cross-checks the closed form.
pub fn decompose_tabulated(noise: &GGParams, beta: f64, options: FftOptions) -> Result<DecompositionSpec> {
    let p = noise.p();
    if p > 1.0 {
        return Err(Error::UnsupportedShape {
            p,
            reason: "characteristic-function inversion is only used for p in (0, 1]",
        });
    }
    if !beta.is_finite() || beta < 1.0 {
        return Err(invalid("beta", format!("must be finite and >= 1, got {beta}")));
    }
    let n = options.grid_points;
    if !n.is_power_of_two() || n < 16 {
        return Err(invalid("grid_points", "must be a power of two >= 16"));
    }
    let alpha = noise.alpha();
    let atom = atom_mass(p, beta);
    if beta == 1.0 {
        return Ok(DecompositionSpec {
            noise: *noise,
            beta,
            representation: Representation::Tabulated,
            atom_at_zero: 1.0,
            continuous_part: None,
            clipped_mass: 0.0,
        });
    }

    let target = noise.with_alpha(beta * alpha)?;
    let half_width = target.tail_bound(2.0 * options.tail_mass);
    let dx = 2.0 * half_width / n as f64;
    let dt = 2.0 * std::f64::consts::PI / (n as f64 * dx);
    let half = n / 2;

    let evaluator = CfEvaluator::new(p)?;
    let spectrum: Vec<f64> = (0..=half)
        .into_par_iter()
        .map(|k| -> Result<f64> {
            let t = k as f64 * dt;
            let denom = evaluator.eval(alpha * t)?;
            if !(denom > 1e-300) {
                return Err(Error::CharacteristicFunctionZero { t, value: denom });
            }
            let numer = evaluator.eval(beta * alpha * t)?;
            let window = (-options.window_decay * (k as f64 / half as f64).powi(2)).exp();
            Ok((numer / denom - atom) * window)
        })
        .collect::<Result<_>>()?;

    // x_j = (j - n/2) dx, so the transform picks up a (-1)^k phase.
    let mut buffer: Vec<Complex<f64>> = (0..n)
        .map(|k| {
            let m = if k <= half { k } else { n - k };
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            Complex::new(sign * spectrum[m], 0.0)
        })
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buffer);

    let mut clipped = 0.0;
    let mut weights: Vec<f64> = buffer
        .iter()
        .map(|c| {
            let w = c.re / n as f64;
            if w < 0.0 {
                clipped -= w;
                0.0
            } else {
                w
            }
        })
        .collect();
    let mass: f64 = weights.iter().sum();
    if mass > 0.0 {
        let scale = (1.0 - atom) / mass;
        weights.iter_mut().for_each(|w| *w *= scale);
    }

    Ok(DecompositionSpec {
        noise: *noise,
        beta,
        representation: Representation::Tabulated,
        atom_at_zero: atom,
        continuous_part: Some(TabulatedDensity {
            grid_min: -(half as f64) * dx,
            grid_step: dx,
            weights,
        }),
        clipped_mass: clipped,
    })
}

/// L1 distance between the law of `X + Z` and `N_p(0, (beta alpha)^p)`,
/// computed by discrete convolution on a uniform grid.
///
/// Tabulated specs use their own grid; closed forms are discretized on a grid
/// of `grid_points` cells spanning the `1e-10` quantiles of the target.
pub fn convolution_l1(spec: &DecompositionSpec, grid_points: usize) -> f64 {
    let target = spec.output_law();
    let noise = spec.noise;
    let (grid_min, dx, masses) = match &spec.continuous_part {
        Some(tab) => (tab.grid_min, tab.grid_step, tab.weights.clone()),
        None => {
            let half_width = target.tail_bound(2e-10);
            let dx = 2.0 * half_width / grid_points as f64;
            let grid_min = -((grid_points / 2) as f64) * dx;
            let masses = (0..grid_points)
                .map(|j| spec.continuous_density_at(grid_min + j as f64 * dx) * dx)
                .collect();
            (grid_min, dx, masses)
        }
    };
    let m = masses.len();
    let size = (2 * m).next_power_of_two();

    // Circular convolution of length >= 2m equals the linear one; lags wrap.
    let mut a: Vec<Complex<f64>> = masses.iter().map(|&w| Complex::new(w, 0.0)).collect();
    a.resize(size, Complex::new(0.0, 0.0));
    let mut b: Vec<Complex<f64>> = (0..size)
        .map(|k| {
            let lag = if k < size / 2 { k as f64 } else { k as f64 - size as f64 };
            Complex::new(noise.pdf(lag * dx), 0.0)
        })
        .collect();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    fwd.process(&mut a);
    fwd.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    inv.process(&mut a);

    a.iter()
        .take(m)
        .enumerate()
        .map(|(i, c)| {
            let x = grid_min + i as f64 * dx;
            let conv = c.re / size as f64 + spec.atom_at_zero * noise.pdf(x);
            (conv - target.pdf(x)).abs() * dx
        })
        .sum()
}

/// L1 distance between a tabulated decomposition and a closed-form one for the
/// same noise and `beta`: atom difference plus the cell-wise difference of the
/// continuous parts.
pub fn tabulated_vs_closed_form_l1(tabulated: &DecompositionSpec, closed: &DecompositionSpec) -> Result<f64> {
    let tab = tabulated
        .continuous_part
        .as_ref()
        .ok_or_else(|| invalid("tabulated", "has no continuous table"))?;
    let law = closed
        .closed_form_continuous()
        .ok_or_else(|| invalid("closed", "has no closed-form continuous part"))?;
    let mass = 1.0 - closed.atom_at_zero;
    let half = 0.5 * tab.grid_step;
    let cells: f64 = tab
        .weights
        .iter()
        .enumerate()
        .map(|(j, &w)| {
            let x = tab.x(j);
            (w - mass * (law.cdf(x + half) - law.cdf(x - half))).abs()
        })
        .sum();
    let outside = mass * (law.cdf(tab.x(0) - half) + 1.0 - law.cdf(tab.x(tab.weights.len() - 1) + half));
    Ok((tabulated.atom_at_zero - closed.atom_at_zero).abs() + cells + outside)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gg(p: f64, alpha: f64) -> GGParams {
        GGParams::new(p, alpha).unwrap()
    }

    #[test]
    fn beta_one_is_silence() {
        for p in [0.5, 1.0, 2.0] {
            let s = decompose(&gg(p, 1.0), 1.0).unwrap();
            assert_eq!(s.atom_at_zero, 1.0);
            assert!(s.continuous_part.is_none());
            let x = sample_input(&s, 1000, 3).unwrap();
            assert!(x.values.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn rejects_unsupported() {
        assert!(matches!(decompose(&gg(1.5, 1.0), 1.1), Err(Error::UnsupportedShape { .. })));
        assert!(matches!(decompose(&gg(3.0, 1.0), 1.1), Err(Error::UnsupportedShape { .. })));
        assert!(decompose(&gg(1.0, 1.0), 0.99).is_err());
        assert!(decompose(&gg(1.0, 1.0), f64::NAN).is_err());
    }

    #[test]
    fn laplace_closed_form() {
        let s = decompose(&gg(1.0, 1.0), 2.0).unwrap();
        assert_eq!(s.representation, Representation::ClosedFormLaplace);
        assert_eq!(s.atom_at_zero, 0.25);
        assert_eq!(s.closed_form_continuous(), Some(gg(1.0, 2.0)));
    }

    #[test]
    fn gaussian_closed_form() {
        let s = decompose(&gg(2.0, 1.0), 1.5).unwrap();
        assert_eq!(s.atom_at_zero, 0.0);
        let law = s.closed_form_continuous().unwrap();
        assert!((law.second_moment() - 1.25).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_and_validation() {
        let s = decompose_tabulated(&gg(0.5, 1.0), 1.1, FftOptions {
            grid_points: 1 << 10,
            ..FftOptions::default()
        })
        .unwrap();
        let back = DecompositionSpec::from_json(&s.to_json()).unwrap();
        assert_eq!(back, s);
        let mut bad = s.clone();
        bad.atom_at_zero = 0.5;
        assert!(DecompositionSpec::from_json(&bad.to_json()).is_err());
    }

    #[test]
    fn sampler_respects_atom() {
        let s = decompose(&gg(1.0, 1.0), 2.0).unwrap();
        let x = sample_input(&s, 100_000, 11).unwrap();
        let zeros = x.values.iter().filter(|&&v| v == 0.0).count() as f64 / 1e5;
        assert!((zeros - 0.25).abs() < 5.0 * (0.25f64 * 0.75 / 1e5).sqrt());
        assert_eq!(x, sample_input(&s, 100_000, 11).unwrap());
    }

    #[test]
    fn tabulated_invariants() {
        let s = decompose(&gg(0.5, 1.0), 2.0).unwrap();
        let tab = s.continuous_part.as_ref().unwrap();
        assert_eq!(tab.weights.len(), 1 << 16);
        assert!((s.atom_at_zero + tab.mass() - 1.0).abs() < 1e-6);
        assert!(tab.weights.iter().all(|&w| w >= 0.0));
        assert!(s.clipped_mass <= 1e-6, "clipped {}", s.clipped_mass);
        assert!((s.atom_at_zero - 2f64.powf(-1.5)).abs() < 1e-15);
    }

    #[test]
    fn characteristic_ratio_tends_to_atom() {
        // phi_X(t) = phi_Z(beta t) / phi_Z(t) loses its continuous part as t grows
        let (p, beta) = (0.5, 2.0);
        let z = gg(p, 1.0);
        let ratio = |t: f64| cf::cf_gg(&z, beta * t).unwrap() / cf::cf_gg(&z, t).unwrap();
        let atom = atom_mass(p, beta);
        let near = (ratio(1e6) - atom).abs();
        let far = (ratio(1e2) - atom).abs();
        assert!(near < far);
        assert!(near / atom < 1e-2, "relative gap {}", near / atom);
    }
}
