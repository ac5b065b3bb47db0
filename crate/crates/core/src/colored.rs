//! Channels with memory.
//!
//! Gaussian noise `Z ~ N(mu, Sigma)` is an invertible affine image
//! `Z = A Z~ + mu` of white noise `Z~ ~ N(0, I)`, with `A` the Cholesky factor
//! of `Sigma`. Codes move between the two channels through `A`:
//!
//! * encoder: a white codeword `x~` is sent as `A x~`;
//! * decoder: a colored output `y` is mapped to `A^-1 (y - mu)` and decoded
//!   with the white decoder.
//!
//! Under the coupling `Z = A Z~ + mu` both channels make identical decisions,
//! and the warden's divergence is unchanged. The same transport also applies to
//! mixed generalized Gaussian noise `Z = A Z~ + mu` with i.i.d.
//! `Z~_i ~ N_p(0, alpha^p)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::ggdist::GGParams;

/// Largest supported dimension for dense matrices.
pub const MAX_DIMENSION: usize = 4096;
/// Transports whose matrix has a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;
/// Bound on `||A A^-1 - I||` (Frobenius, which dominates the spectral norm).
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-9;

/// Second-order structure of the noise.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseStructure {
    /// `Z ~ N(mu, sigma)`.
    Gaussian { sigma: DMatrix<f64> },
    /// `Z = mixing * Z~ + mu` with i.i.d. `Z~_i ~ base`.
    Mixing { mixing: DMatrix<f64>, base: GGParams },
}

/// Additive noise with memory over a block of `n` channel uses.
#[derive(Debug, Clone, PartialEq)]
pub struct ColoredNoiseModel {
    mu: DVector<f64>,
    structure: NoiseStructure,
}

impl ColoredNoiseModel {
    pub fn gaussian(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let n = check_square(&sigma, "sigma")?;
        check_len(&mu, n)?;
        check_symmetric(&sigma)?;
        // Fail early with the offending minor.
        cholesky(&sigma)?;
        Ok(Self {
            mu,
            structure: NoiseStructure::Gaussian { sigma },
        })
    }

    pub fn mixing(mu: DVector<f64>, mixing: DMatrix<f64>, base: GGParams) -> Result<Self> {
        let n = check_square(&mixing, "mixing")?;
        check_len(&mu, n)?;
        Ok(Self {
            mu,
            structure: NoiseStructure::Mixing { mixing, base },
        })
    }

    /// Stationary zero-mean AR(1) noise with unit marginal variance:
    /// `Sigma_ij = rho^|i - j|`.
    pub fn ar1(n: usize, rho: f64) -> Result<Self> {
        if !(rho.abs() < 1.0) {
            return Err(invalid("rho", format!("must satisfy |rho| < 1, got {rho}")));
        }
        if n == 0 || n > MAX_DIMENSION {
            return Err(invalid("n", format!("must lie in 1..={MAX_DIMENSION}, got {n}")));
        }
        let sigma = DMatrix::from_fn(n, n, |i, j| rho.powi(i.abs_diff(j) as i32));
        Self::gaussian(DVector::zeros(n), sigma)
    }

    pub fn dimension(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn structure(&self) -> &NoiseStructure {
        &self.structure
    }

    /// Covariance of the noise; for the mixing branch this is
    /// `E[Z~_1^2] A A^T`.
    pub fn covariance(&self) -> DMatrix<f64> {
        match &self.structure {
            NoiseStructure::Gaussian { sigma } => sigma.clone(),
            NoiseStructure::Mixing { mixing, base } => mixing * mixing.transpose() * base.second_moment(),
        }
    }
}

fn check_square(m: &DMatrix<f64>, name: &'static str) -> Result<usize> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: m.ncols(),
        });
    }
    if n == 0 || n > MAX_DIMENSION {
        return Err(invalid(name, format!("dimension must lie in 1..={MAX_DIMENSION}, got {n}")));
    }
    if let Some((idx, _)) = m.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::MatrixEntry {
            row: idx % n,
            column: idx / n,
            reason: "not finite".into(),
        });
    }
    Ok(n)
}

fn check_len(v: &DVector<f64>, n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: v.len(),
        });
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(invalid("mu", "entries must be finite"));
    }
    Ok(())
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<()> {
    let scale = m.amax();
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                return Err(Error::MatrixEntry {
                    row: i,
                    column: j,
                    reason: format!("asymmetric: {} vs {}", m[(i, j)], m[(j, i)]),
                });
            }
        }
    }
    Ok(())
}

/// Lower-triangular `L` with `L L^T = m`.
///
/// Fails with the order of the first leading principal minor that is not
/// positive.
pub fn cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return Err(Error::NotPositiveDefinite { order: j + 1, pivot: d });
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Ok(l)
}

/// `A`, `A^-1` and `mu` of the map `Z = A Z~ + mu`.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeTransport {
    forward: DMatrix<f64>,
    inverse: DMatrix<f64>,
    offset: DVector<f64>,
    condition: f64,
    base: Option<GGParams>,
}

/// Builds the transport of `model`: the Cholesky factor for Gaussian noise,
/// the mixing matrix itself otherwise.
pub fn whiten(model: &ColoredNoiseModel) -> Result<CodeTransport> {
    let n = model.dimension();
    let (forward, base) = match &model.structure {
        NoiseStructure::Gaussian { sigma } => (cholesky(sigma)?, None),
        NoiseStructure::Mixing { mixing, base } => (mixing.clone(), Some(*base)),
    };
    let singular = forward.clone().svd(false, false).singular_values;
    let smax = singular.max();
    let smin = singular.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }
    let inverse = match &model.structure {
        NoiseStructure::Gaussian { .. } => forward
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or(Error::IllConditioned { condition })?,
        NoiseStructure::Mixing { .. } => forward.clone().try_inverse().ok_or(Error::IllConditioned { condition })?,
    };
    let residual = (&forward * &inverse - DMatrix::<f64>::identity(n, n)).norm();
    if residual > ROUND_TRIP_TOLERANCE {
        return Err(Error::IllConditioned { condition });
    }
    Ok(CodeTransport {
        forward,
        inverse,
        offset: model.mu.clone(),
        condition,
        base,
    })
}

impl CodeTransport {
    /// Transport of white noise onto itself.
    pub fn identity(n: usize) -> Self {
        Self {
            forward: DMatrix::identity(n, n),
            inverse: DMatrix::identity(n, n),
            offset: DVector::zeros(n),
            condition: 1.0,
            base: None,
        }
    }

    pub fn dimension(&self) -> usize {
        self.offset.len()
    }

    pub fn forward_matrix(&self) -> &DMatrix<f64> {
        &self.forward
    }

    pub fn inverse_matrix(&self) -> &DMatrix<f64> {
        &self.inverse
    }

    pub fn offset(&self) -> &DVector<f64> {
        &self.offset
    }

    /// 2-norm condition number of the forward matrix.
    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// Frobenius norm of `A A^-1 - I`.
    pub fn round_trip_residual(&self) -> f64 {
        let n = self.dimension();
        (&self.forward * &self.inverse - DMatrix::<f64>::identity(n, n)).norm()
    }

    /// Base noise law of the mixing branch; `None` for Gaussian noise.
    pub fn base(&self) -> Option<&GGParams> {
        self.base.as_ref()
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dimension() {
            return Err(Error::DimensionMismatch {
                expected: self.dimension(),
                actual: v.len(),
            });
        }
        Ok(())
    }

    /// White codeword to colored codeword: `A x~`.
    pub fn transport_encoder(&self, codeword_white: &[f64]) -> Result<Vec<f64>> {
        self.check(codeword_white)?;
        Ok(mat_vec(&self.forward, codeword_white))
    }

    /// Colored codeword back to white: `A^-1 x`.
    pub fn inverse_encoder(&self, codeword: &[f64]) -> Result<Vec<f64>> {
        self.check(codeword)?;
        Ok(mat_vec(&self.inverse, codeword))
    }

    /// Colored output to white output: `A^-1 (y - mu)`.
    pub fn transport_decoder(&self, received: &[f64]) -> Result<Vec<f64>> {
        self.check(received)?;
        let centered: Vec<f64> = received.iter().zip(self.offset.iter()).map(|(y, m)| y - m).collect();
        Ok(mat_vec(&self.inverse, &centered))
    }

    /// White output to colored output: `A y~ + mu`. Also colors white noise.
    pub fn inverse_decoder(&self, white: &[f64]) -> Result<Vec<f64>> {
        self.check(white)?;
        let mut out = mat_vec(&self.forward, white);
        out.iter_mut().zip(self.offset.iter()).for_each(|(o, m)| *o += m);
        Ok(out)
    }

    /// Divergence between the warden's hypotheses on both sides of the map when
    /// the white-side input is `N(0, input_cov)`.
    ///
    /// Returns `(kl_colored, kl_white)`, where the white side compares
    /// `N(0, I + K)` against `N(0, I)` and the colored side compares
    /// `N(mu, Sigma + A K A^T)` against `N(mu, Sigma)`.
    pub fn kl_invariance_check(&self, input_cov: &DMatrix<f64>) -> Result<(f64, f64)> {
        if self.base.is_some() {
            return Err(invalid("transport", "divergence is only available in closed form for Gaussian noise"));
        }
        let n = self.dimension();
        if input_cov.nrows() != n || input_cov.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: input_cov.nrows(),
            });
        }
        check_psd(input_cov)?;
        let identity = DMatrix::<f64>::identity(n, n);
        let zero = DVector::<f64>::zeros(n);
        let kl_white = gaussian_kl(&zero, &(&identity + input_cov), &zero, &identity)?;
        let a = &self.forward;
        let sigma = a * a.transpose();
        let colored_input = a * input_cov * a.transpose();
        let kl_colored = gaussian_kl(&self.offset, &(&sigma + colored_input), &self.offset, &sigma)?;
        Ok((kl_colored, kl_white))
    }
}

fn mat_vec(m: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..m.nrows())
        .map(|i| (0..n).map(|j| m[(i, j)] * v[j]).sum())
        .collect()
}

fn check_psd(m: &DMatrix<f64>) -> Result<()> {
    check_square(m, "input_cov")?;
    check_symmetric(m)?;
    let eig = m.clone().symmetric_eigen();
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let min = eig.eigenvalues.min();
    if min < -1e-12 * scale {
        return Err(invalid("input_cov", format!("not positive semidefinite (eigenvalue {min:e})")));
    }
    Ok(())
}

/// `D(N(mu1, s1) || N(mu0, s0))` in nats.
pub fn gaussian_kl(mu1: &DVector<f64>, s1: &DMatrix<f64>, mu0: &DVector<f64>, s0: &DMatrix<f64>) -> Result<f64> {
    let n = mu1.len() as f64;
    let l0 = cholesky(s0)?;
    let l1 = cholesky(s1)?;
    // tr(s0^-1 s1) = ||L0^-1 L1||_F^2
    let m = l0
        .solve_lower_triangular(&l1)
        .ok_or(Error::NotPositiveDefinite { order: 0, pivot: 0.0 })?;
    let trace = m.norm_squared();
    let diff = mu0 - mu1;
    let w = l0
        .solve_lower_triangular(&diff)
        .ok_or(Error::NotPositiveDefinite { order: 0, pivot: 0.0 })?;
    let mahalanobis = w.norm_squared();
    let log_det_ratio: f64 = 2.0 * (0..l0.nrows()).map(|i| (l0[(i, i)] / l1[(i, i)]).ln()).sum::<f64>();
    Ok(0.5 * (trace - n + mahalanobis + log_det_ratio))
}

/// Parses a square matrix from JSON (`[[a, b], [c, d]]` or `{"rows": ...}`).
pub fn parse_matrix_json(text: &str) -> Result<DMatrix<f64>> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| invalid("matrix", format!("not valid JSON: {e}")))?;
    let rows = match &value {
        serde_json::Value::Object(map) => map.get("rows"),
        other => Some(other),
    }
    .and_then(|v| v.as_array())
    .ok_or_else(|| invalid("matrix", "expected an array of rows or an object with a `rows` array"))?;
    let rows = rows
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let row = row.as_array().ok_or_else(|| Error::MatrixEntry {
                row: i,
                column: 0,
                reason: "row is not an array".into(),
            })?;
            row.iter()
                .enumerate()
                .map(|(j, v)| {
                    v.as_f64().ok_or_else(|| Error::MatrixEntry {
                        row: i,
                        column: j,
                        reason: format!("`{v}` is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    from_rows(rows)
}

/// Parses a square matrix from headerless CSV, one row per line.
pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::MatrixEntry {
            row: i,
            column: 0,
            reason: e.to_string(),
        })?;
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().map_err(|_| Error::MatrixEntry {
                    row: i,
                    column: j,
                    reason: format!("`{field}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    from_rows(rows)
}

fn from_rows(rows: Vec<Vec<f64>>) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || n > MAX_DIMENSION {
        return Err(invalid("matrix", format!("dimension must lie in 1..={MAX_DIMENSION}, got {n}")));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != n {
            return Err(Error::MatrixEntry {
                row: i,
                column: row.len().min(n),
                reason: format!("row has {} entries, expected {n}", row.len()),
            });
        }
        if let Some(j) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::MatrixEntry {
                row: i,
                column: j,
                reason: "not finite".into(),
            });
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ar1_cholesky_closed_form() {
        let rho = 0.9;
        let t = whiten(&ColoredNoiseModel::ar1(2, rho).unwrap()).unwrap();
        let a = t.forward_matrix();
        assert!((a[(0, 0)] - 1.0).abs() < 1e-15);
        assert_eq!(a[(0, 1)], 0.0);
        assert!((a[(1, 0)] - rho).abs() < 1e-15);
        assert!((a[(1, 1)] - (1.0 - rho * rho).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn names_the_failing_minor() {
        let sigma = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 2.0, 0.0, 2.0, 1.0]);
        let err = ColoredNoiseModel::gaussian(DVector::zeros(3), sigma).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { order: 3, .. }), "{err}");
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.2, 1.0]);
        assert!(matches!(
            ColoredNoiseModel::gaussian(DVector::zeros(2), asym),
            Err(Error::MatrixEntry { row: 1, column: 0, .. })
        ));
    }

    #[test]
    fn singular_mixing_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let m = ColoredNoiseModel::mixing(DVector::zeros(2), a, GGParams::new(1.0, 1.0).unwrap()).unwrap();
        assert!(matches!(whiten(&m), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn identity_and_round_trip() {
        let t = whiten(&ColoredNoiseModel::ar1(8, 0.0).unwrap()).unwrap();
        assert_eq!(t.forward_matrix(), &DMatrix::<f64>::identity(8, 8));
        let x: Vec<f64> = (0..8).map(|i| i as f64 - 3.5).collect();
        assert_eq!(t.transport_encoder(&x).unwrap(), x);

        let mu = DVector::from_fn(16, |i, _| 0.1 * i as f64);
        let sigma = ColoredNoiseModel::ar1(16, 0.95).unwrap().covariance();
        let t = whiten(&ColoredNoiseModel::gaussian(mu, sigma).unwrap()).unwrap();
        assert!(t.round_trip_residual() <= ROUND_TRIP_TOLERANCE);
        let x: Vec<f64> = (0..16).map(|i| (i as f64).sin()).collect();
        let back = t.inverse_encoder(&t.transport_encoder(&x).unwrap()).unwrap();
        let y = t.transport_decoder(&t.inverse_decoder(&x).unwrap()).unwrap();
        for i in 0..16 {
            assert!((back[i] - x[i]).abs() < 1e-9 && (y[i] - x[i]).abs() < 1e-9);
        }
        assert!(matches!(t.transport_encoder(&x[..3]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn kl_invariance_examples() {
        let t = whiten(&ColoredNoiseModel::ar1(2, 0.9).unwrap()).unwrap();
        let (c, w) = t.kl_invariance_check(&DMatrix::zeros(2, 2)).unwrap();
        assert!(c.abs() < 1e-15 && w.abs() < 1e-15);
        let (c, w) = t.kl_invariance_check(&(DMatrix::identity(2, 2) * 0.01)).unwrap();
        // two independent coordinates of N(0, 1.01) against N(0, 1)
        let exact = 0.01 - 1.01f64.ln();
        assert!((w - exact).abs() < 1e-15, "{w} vs {exact}");
        assert!((c - w).abs() < 1e-9);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(t.kl_invariance_check(&bad).is_err());
    }

    #[test]
    fn gaussian_kl_scalar_oracle() {
        // D(N(1, 4) || N(0, 1)) = 0.5 (4 + 1 - 1 - ln 4)
        let kl = gaussian_kl(
            &DVector::from_element(1, 1.0),
            &DMatrix::from_element(1, 1, 4.0),
            &DVector::zeros(1),
            &DMatrix::identity(1, 1),
        )
        .unwrap();
        assert!((kl - 0.5 * (4.0 - 4f64.ln())).abs() < 1e-15);
    }

    #[test]
    fn matrix_parsing_reports_location() {
        let m = parse_matrix_json("[[1, 0.5], [0.5, 1]]").unwrap();
        assert_eq!(m[(0, 1)], 0.5);
        assert_eq!(parse_matrix_json(r#"{"rows": [[2]]}"#).unwrap()[(0, 0)], 2.0);
        assert!(matches!(
            parse_matrix_json("[[1, 0], [0]]"),
            Err(Error::MatrixEntry { row: 1, .. })
        ));
        assert!(matches!(
            parse_matrix_json(r#"[[1, 0], [0, "one"]]"#),
            Err(Error::MatrixEntry { row: 1, column: 1, .. })
        ));
        let c = parse_matrix_csv("1, 0.2\n0.2, 1\n").unwrap();
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 1.0]));
        assert!(matches!(
            parse_matrix_csv("1, 0\n0, x\n"),
            Err(Error::MatrixEntry { row: 1, column: 1, .. })
        ));
    }
}
