//! Random codewords drawn i.i.d. from the covert input law.
//!
//! In covert regimes the input is zero with probability close to one, so a
//! codeword is stored as its nonzero entries only and the positions are found
//! by geometric gap sampling.

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::decomp::{DecompositionSpec, InputSampler};
use crate::error::{invalid, Result};

/// Nonzero entries `(position, value)` in increasing position order.
pub type SparseCodeword = Vec<(u32, f64)>;

#[derive(Debug, Clone)]
pub struct CodewordSampler {
    input: InputSampler,
    gap: Option<Geometric>,
    n: usize,
}

impl CodewordSampler {
    pub fn new(spec: &DecompositionSpec, n: usize) -> Result<Self> {
        if n == 0 || n > u32::MAX as usize {
            return Err(invalid("n", "blocklength out of range"));
        }
        let input = spec.sampler();
        let nonzero = 1.0 - input.atom();
        let gap = if nonzero > 0.0 {
            Some(Geometric::new(nonzero).map_err(|e| invalid("atom_at_zero", e.to_string()))?)
        } else {
            None
        };
        Ok(Self { input, gap, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Draws one codeword into `out` (cleared first).
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut SparseCodeword) {
        out.clear();
        let Some(gap) = &self.gap else { return };
        let n = self.n as u64;
        let mut pos = 0u64;
        loop {
            pos = pos.saturating_add(gap.sample(rng));
            if pos >= n {
                break;
            }
            out.push((pos as u32, self.input.sample_continuous(rng)));
            pos += 1;
        }
    }
}

pub fn to_dense(codeword: &SparseCodeword, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    for &(i, v) in codeword {
        x[i as usize] = v;
    }
    x
}

pub fn to_sparse(x: &[f64]) -> SparseCodeword {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| (i as u32, *v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decomp::decompose;
    use crate::ggdist::GGParams;
    use crate::rng::{domain, trial_rng};

    #[test]
    fn nonzero_fraction_matches_atom() {
        let spec = decompose(&GGParams::new(1.0, 1.0).unwrap(), 1.05).unwrap();
        let sampler = CodewordSampler::new(&spec, 1000).unwrap();
        let mut rng = trial_rng(1, domain::INPUT, 0);
        let mut cw = Vec::new();
        let mut nonzero = 0usize;
        for _ in 0..2000 {
            sampler.draw(&mut rng, &mut cw);
            assert!(cw.windows(2).all(|w| w[0].0 < w[1].0));
            assert!(cw.iter().all(|&(i, _)| (i as usize) < 1000));
            nonzero += cw.len();
        }
        let frac = nonzero as f64 / 2e6;
        let expected = 1.0 - 1.05f64.powi(-2);
        let se = (expected * (1.0 - expected) / 2e6).sqrt();
        assert!((frac - expected).abs() < 5.0 * se, "{frac} vs {expected}");
    }

    #[test]
    fn silent_input_gives_empty_codewords() {
        let spec = decompose(&GGParams::new(0.5, 1.0).unwrap(), 1.0).unwrap();
        let sampler = CodewordSampler::new(&spec, 50).unwrap();
        let mut cw = vec![(0, 1.0)];
        sampler.draw(&mut trial_rng(1, domain::INPUT, 0), &mut cw);
        assert!(cw.is_empty());
    }

    #[test]
    fn dense_round_trip() {
        let cw = vec![(1, 0.5), (4, -2.0)];
        let x = to_dense(&cw, 6);
        assert_eq!(x, vec![0.0, 0.5, 0.0, 0.0, -2.0, 0.0]);
        assert_eq!(to_sparse(&x), cw);
    }
}
