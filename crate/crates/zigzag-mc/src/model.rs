//! Gaussian targets: precision operators, orthant truncations, and the
//! spectral quantities used for integration-time tuning.
//!
//! The samplers only ever need two things from the precision matrix: a
//! matrix-vector product and single-column extraction. Structured forms
//! (compound-symmetric, AR(1), tridiagonal) provide both in O(d); a dense
//! fallback covers externally supplied targets.

use std::fs;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::rng::stream_rng;

/// Relative asymmetry above which a loaded dense matrix is rejected.
const DENSE_ASYMMETRY_TOL: f64 = 1e-8;

/// Default stopping tolerance for the smallest-eigenvalue iteration.
pub const DEFAULT_LANCZOS_TOL: f64 = 1e-9;

/// Default matrix-vector product budget for the smallest-eigenvalue iteration.
pub const DEFAULT_LANCZOS_MAX_MATVECS: usize = 200;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension must be at least 1")]
    EmptyDimension,
    #[error("correlation {0} outside [0, 1): compound-symmetric covariance would be singular")]
    InvalidCompoundSymmetricRho(f64),
    #[error("autocorrelation {0} outside (-1, 1)")]
    InvalidAr1Rho(f64),
    #[error("tridiagonal operator needs {expected} off-diagonal entries, got {got}")]
    BadTridiagonalShape { expected: usize, got: usize },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix is not symmetric: relative asymmetry {asymmetry:.3e} at ({row}, {col})")]
    NotSymmetric { asymmetry: f64, row: usize, col: usize },
    #[error("matrix failed the positive-definiteness probe")]
    NotPositiveDefinite,
    #[error("relative base time must be positive, got {0}")]
    InvalidRelativeTime(f64),
    #[error("smallest-eigenvalue estimate did not converge within {0} matrix-vector products")]
    EigenvalueNotConverged(usize),
    #[error("reading target file: {0}")]
    Io(#[from] std::io::Error),
}

/// Symmetric positive-definite precision operator.
#[derive(Clone, Debug)]
pub enum PrecisionOp {
    /// Row-major d x d symmetric matrix.
    Dense { dim: usize, entries: Vec<f64> },
    /// Precision of the compound-symmetric covariance (unit variances,
    /// constant correlation rho): (1/(1-rho)) (I - rho/(1+(d-1)rho) 11^T).
    CompoundSymmetric { dim: usize, rho: f64 },
    /// Precision of a stationary lag-1 autoregressive covariance with unit
    /// marginal variances and autocorrelation rho.
    Ar1 { dim: usize, rho: f64 },
    /// General symmetric tridiagonal form.
    Tridiagonal { diag: Vec<f64>, off: Vec<f64> },
}

impl PrecisionOp {
    pub fn compound_symmetric(dim: usize, rho: f64) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::EmptyDimension);
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(ModelError::InvalidCompoundSymmetricRho(rho));
        }
        Ok(PrecisionOp::CompoundSymmetric { dim, rho })
    }

    pub fn ar1(dim: usize, rho: f64) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::EmptyDimension);
        }
        if !(-1.0..1.0).contains(&rho) || rho <= -1.0 {
            return Err(ModelError::InvalidAr1Rho(rho));
        }
        Ok(PrecisionOp::Ar1 { dim, rho })
    }

    pub fn tridiagonal(diag: Vec<f64>, off: Vec<f64>) -> Result<Self, ModelError> {
        if diag.is_empty() {
            return Err(ModelError::EmptyDimension);
        }
        if off.len() + 1 != diag.len() {
            return Err(ModelError::BadTridiagonalShape {
                expected: diag.len() - 1,
                got: off.len(),
            });
        }
        let op = PrecisionOp::Tridiagonal { diag, off };
        op.probe_positive_definite()?;
        Ok(op)
    }

    /// Builds a dense operator from rows, rejecting asymmetric input and then
    /// symmetrizing exactly so that column extraction equals the matvec of a
    /// basis vector bit for bit.
    pub fn dense_from_rows(rows: &[Vec<f64>]) -> Result<Self, ModelError> {
        let dim = rows.len();
        if dim == 0 {
            return Err(ModelError::EmptyDimension);
        }
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(ModelError::DimensionMismatch(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    row.len(),
                    dim
                )));
            }
        }
        for i in 0..dim {
            for j in (i + 1)..dim {
                let a = rows[i][j];
                let b = rows[j][i];
                let scale = a.abs().max(b.abs());
                if scale > 0.0 {
                    let asym = (a - b).abs() / scale;
                    if asym > DENSE_ASYMMETRY_TOL {
                        return Err(ModelError::NotSymmetric {
                            asymmetry: asym,
                            row: i,
                            col: j,
                        });
                    }
                }
            }
        }
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = rows[i][i];
            for j in (i + 1)..dim {
                let v = 0.5 * (rows[i][j] + rows[j][i]);
                entries[i * dim + j] = v;
                entries[j * dim + i] = v;
            }
        }
        let op = PrecisionOp::Dense { dim, entries };
        op.probe_positive_definite()?;
        Ok(op)
    }

    pub fn dim(&self) -> usize {
        match self {
            PrecisionOp::Dense { dim, .. } => *dim,
            PrecisionOp::CompoundSymmetric { dim, .. } => *dim,
            PrecisionOp::Ar1 { dim, .. } => *dim,
            PrecisionOp::Tridiagonal { diag, .. } => diag.len(),
        }
    }

    /// Structured forms keep cached matvecs exact under incremental updates;
    /// the dense form is refreshed periodically by the simulators.
    pub fn is_structured(&self) -> bool {
        !matches!(self, PrecisionOp::Dense { .. })
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.matvec_into(x, &mut out);
        out
    }

    pub fn matvec_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.dim();
        assert_eq!(x.len(), d);
        assert_eq!(out.len(), d);
        match self {
            PrecisionOp::Dense { dim, entries } => {
                for i in 0..*dim {
                    let row = &entries[i * dim..(i + 1) * dim];
                    let mut acc = 0.0;
                    for (a, b) in row.iter().zip(x) {
                        acc += a * b;
                    }
                    out[i] = acc;
                }
            }
            PrecisionOp::CompoundSymmetric { dim, rho } => {
                let (shrink, ones_coef) = compound_symmetric_coefs(*dim, *rho);
                let sum: f64 = x.iter().sum();
                for i in 0..*dim {
                    out[i] = shrink * (x[i] - ones_coef * sum);
                }
            }
            PrecisionOp::Ar1 { dim, rho } => {
                let (diag_end, diag_mid, off) = ar1_coefs(*dim, *rho);
                tridiag_matvec_coef(diag_end, diag_mid, off, x, out);
            }
            PrecisionOp::Tridiagonal { diag, off } => {
                let n = diag.len();
                for i in 0..n {
                    let mut acc = diag[i] * x[i];
                    if i > 0 {
                        acc += off[i - 1] * x[i - 1];
                    }
                    if i + 1 < n {
                        acc += off[i] * x[i + 1];
                    }
                    out[i] = acc;
                }
            }
        }
    }

    /// Writes column `col` (equivalently row, by symmetry) into `out`.
    pub fn column_into(&self, col: usize, out: &mut [f64]) {
        let d = self.dim();
        assert!(col < d);
        assert_eq!(out.len(), d);
        match self {
            PrecisionOp::Dense { dim, entries } => {
                out.copy_from_slice(&entries[col * dim..(col + 1) * dim]);
            }
            PrecisionOp::CompoundSymmetric { dim, rho } => {
                let (shrink, ones_coef) = compound_symmetric_coefs(*dim, *rho);
                let off = shrink * (-ones_coef);
                out.fill(off);
                out[col] = shrink * (1.0 - ones_coef);
            }
            PrecisionOp::Ar1 { dim, rho } => {
                let (diag_end, diag_mid, off) = ar1_coefs(*dim, *rho);
                out.fill(0.0);
                out[col] = if col == 0 || col == dim - 1 {
                    diag_end
                } else {
                    diag_mid
                };
                if col > 0 {
                    out[col - 1] = off;
                }
                if col + 1 < *dim {
                    out[col + 1] = off;
                }
            }
            PrecisionOp::Tridiagonal { diag, off } => {
                out.fill(0.0);
                out[col] = diag[col];
                if col > 0 {
                    out[col - 1] = off[col - 1];
                }
                if col + 1 < diag.len() {
                    out[col + 1] = off[col];
                }
            }
        }
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.column_into(col, &mut out);
        out
    }

    /// Assembles the full matrix (row-major) from column extractions.
    pub fn to_dense_entries(&self) -> Vec<f64> {
        let d = self.dim();
        let mut entries = vec![0.0; d * d];
        let mut col = vec![0.0; d];
        for j in 0..d {
            self.column_into(j, &mut col);
            for i in 0..d {
                entries[i * d + j] = col[i];
            }
        }
        entries
    }

    /// Probabilistic positive-definiteness check on construction.
    fn probe_positive_definite(&self) -> Result<(), ModelError> {
        let d = self.dim();
        let mut rng = stream_rng(0x5bd1_e995, 0);
        let mut y = vec![0.0; d];
        for _ in 0..4 {
            let a: Vec<f64> = (0..d)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            self.matvec_into(&a, &mut y);
            let quad: f64 = a.iter().zip(&y).map(|(u, v)| u * v).sum();
            if quad <= 0.0 {
                return Err(ModelError::NotPositiveDefinite);
            }
        }
        Ok(())
    }
}

fn compound_symmetric_coefs(dim: usize, rho: f64) -> (f64, f64) {
    let shrink = 1.0 / (1.0 - rho);
    let ones_coef = rho / (1.0 + (dim as f64 - 1.0) * rho);
    (shrink, ones_coef)
}

/// AR(1) precision coefficients: (first/last diagonal, interior diagonal,
/// off-diagonal). A single-coordinate process has unit variance.
fn ar1_coefs(dim: usize, rho: f64) -> (f64, f64, f64) {
    if dim == 1 {
        return (1.0, 1.0, 0.0);
    }
    let scale = 1.0 / (1.0 - rho * rho);
    (scale, (1.0 + rho * rho) * scale, -rho * scale)
}

fn tridiag_matvec_coef(diag_end: f64, diag_mid: f64, off: f64, x: &[f64], out: &mut [f64]) {
    let n = x.len();
    if n == 1 {
        out[0] = diag_end * x[0];
        return;
    }
    out[0] = diag_end * x[0] + off * x[1];
    for i in 1..n - 1 {
        out[i] = diag_mid * x[i] + off * (x[i - 1] + x[i + 1]);
    }
    out[n - 1] = diag_end * x[n - 1] + off * x[n - 2];
}

/// Per-coordinate orthant constraint.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Constraint {
    Positive,
    Negative,
    Free,
}

impl Constraint {
    pub fn admits(self, x: f64) -> bool {
        match self {
            Constraint::Positive => x > 0.0,
            Constraint::Negative => x < 0.0,
            Constraint::Free => true,
        }
    }
}

/// Gaussian N(mean, precision^-1) restricted to an orthant.
#[derive(Clone, Debug)]
pub struct TruncatedGaussianTarget {
    mean: Vec<f64>,
    precision: PrecisionOp,
    orthant: Vec<Constraint>,
}

impl TruncatedGaussianTarget {
    pub fn new(
        mean: Vec<f64>,
        precision: PrecisionOp,
        orthant: Vec<Constraint>,
    ) -> Result<Self, ModelError> {
        let d = precision.dim();
        if mean.len() != d {
            return Err(ModelError::DimensionMismatch(format!(
                "mean has {} entries, precision is {}-dimensional",
                mean.len(),
                d
            )));
        }
        if orthant.len() != d {
            return Err(ModelError::DimensionMismatch(format!(
                "orthant has {} entries, precision is {}-dimensional",
                orthant.len(),
                d
            )));
        }
        Ok(TruncatedGaussianTarget {
            mean,
            precision,
            orthant,
        })
    }

    /// Untruncated target with compound-symmetric covariance (unit variances,
    /// off-diagonal correlation rho) and zero mean.
    pub fn compound_symmetric(dim: usize, rho: f64) -> Result<Self, ModelError> {
        let precision = PrecisionOp::compound_symmetric(dim, rho)?;
        Ok(TruncatedGaussianTarget {
            mean: vec![0.0; dim],
            precision,
            orthant: vec![Constraint::Free; dim],
        })
    }

    /// Untruncated target with stationary AR(1) covariance (unit variances,
    /// lag-1 autocorrelation rho) and zero mean.
    pub fn ar1(dim: usize, rho: f64) -> Result<Self, ModelError> {
        let precision = PrecisionOp::ar1(dim, rho)?;
        Ok(TruncatedGaussianTarget {
            mean: vec![0.0; dim],
            precision,
            orthant: vec![Constraint::Free; dim],
        })
    }

    pub fn with_positive_orthant(mut self) -> Self {
        self.orthant.fill(Constraint::Positive);
        self
    }

    pub fn with_orthant(mut self, orthant: Vec<Constraint>) -> Result<Self, ModelError> {
        if orthant.len() != self.dim() {
            return Err(ModelError::DimensionMismatch(format!(
                "orthant has {} entries, target is {}-dimensional",
                orthant.len(),
                self.dim()
            )));
        }
        self.orthant = orthant;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.precision.dim()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn precision(&self) -> &PrecisionOp {
        &self.precision
    }

    pub fn orthant(&self) -> &[Constraint] {
        &self.orthant
    }

    pub fn is_untruncated(&self) -> bool {
        self.orthant.iter().all(|c| *c == Constraint::Free)
    }

    /// Strict interior of the support.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.orthant).all(|(&xi, c)| c.admits(xi))
    }

    /// Potential gradient Phi (x - mean), valid on the support.
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        self.precision.matvec(&centered)
    }

    /// Potential energy (x - mean)^T Phi (x - mean) / 2.
    pub fn potential(&self, x: &[f64]) -> f64 {
        let centered: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        let g = self.precision.matvec(&centered);
        0.5 * centered.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>()
    }

    /// A point strictly inside the support, preferring the mean.
    pub fn default_start(&self) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.orthant)
            .map(|(&m, c)| match c {
                Constraint::Free => m,
                Constraint::Positive => {
                    if m > 0.0 {
                        m
                    } else {
                        1.0
                    }
                }
                Constraint::Negative => {
                    if m < 0.0 {
                        m
                    } else {
                        -1.0
                    }
                }
            })
            .collect()
    }

    /// Loads a target from the plain-text format:
    ///
    /// ```text
    /// # comment lines start with '#'
    /// d
    /// mu_1 ... mu_d
    /// <d rows of Phi, d entries each>
    /// y_1 ... y_d        (tokens +1, -1, or *)
    /// ```
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ModelError> {
        // (1-based line number, content) with comments and blanks removed
        let lines: Vec<(usize, &str)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
            .collect();
        let mut cursor = lines.into_iter();

        let (dline, dtext) = cursor
            .next()
            .ok_or_else(|| parse_err(0, "missing dimension line"))?;
        let dim: usize = dtext
            .parse()
            .map_err(|_| parse_err(dline, &format!("invalid dimension `{dtext}`")))?;
        if dim == 0 {
            return Err(parse_err(dline, "dimension must be at least 1"));
        }

        let (mline, mtext) = cursor
            .next()
            .ok_or_else(|| parse_err(dline, "missing mean line"))?;
        let mean = parse_floats(mline, mtext, dim)?;

        let mut rows = Vec::with_capacity(dim);
        let mut last_line = mline;
        for k in 0..dim {
            let (rline, rtext) = cursor.next().ok_or_else(|| {
                parse_err(last_line, &format!("missing precision row {} of {}", k + 1, dim))
            })?;
            rows.push(parse_floats(rline, rtext, dim)?);
            last_line = rline;
        }

        let (yline, ytext) = cursor
            .next()
            .ok_or_else(|| parse_err(last_line, "missing orthant line"))?;
        let tokens: Vec<&str> = ytext.split_whitespace().collect();
        if tokens.len() != dim {
            return Err(parse_err(
                yline,
                &format!("expected {} orthant tokens, got {}", dim, tokens.len()),
            ));
        }
        let mut orthant = Vec::with_capacity(dim);
        for t in tokens {
            orthant.push(match t {
                "+1" => Constraint::Positive,
                "-1" => Constraint::Negative,
                "*" => Constraint::Free,
                other => {
                    return Err(parse_err(
                        yline,
                        &format!("orthant token must be +1, -1, or *, got `{other}`"),
                    ))
                }
            });
        }

        if let Some((eline, etext)) = cursor.next() {
            return Err(parse_err(
                eline,
                &format!("unexpected trailing content `{etext}`"),
            ));
        }

        let precision = PrecisionOp::dense_from_rows(&rows)?;
        TruncatedGaussianTarget::new(mean, precision, orthant)
    }
}

fn parse_err(line: usize, message: &str) -> ModelError {
    ModelError::Parse {
        line,
        message: message.to_string(),
    }
}

fn parse_floats(line: usize, text: &str, expected: usize) -> Result<Vec<f64>, ModelError> {
    let mut out = Vec::with_capacity(expected);
    for tok in text.split_whitespace() {
        let v: f64 = tok
            .parse()
            .map_err(|_| parse_err(line, &format!("invalid number `{tok}`")))?;
        out.push(v);
    }
    if out.len() != expected {
        return Err(parse_err(
            line,
            &format!("expected {} numbers, got {}", expected, out.len()),
        ));
    }
    Ok(out)
}

/// Result of the smallest-eigenvalue iteration.
#[derive(Clone, Copy, Debug)]
pub struct SpectralEstimate {
    pub nu_min: f64,
    pub iterations_used: usize,
    pub converged: bool,
}

/// Smallest eigenvalue of `op` by Lanczos tridiagonalization with full
/// reorthogonalization. Convergence is declared once the smallest Ritz value
/// stops moving relative to the best value seen so far; breakdown (an
/// invariant Krylov subspace) restarts from a fresh random vector.
pub fn min_eigenvalue<R: Rng + ?Sized>(
    op: &PrecisionOp,
    tol: f64,
    max_matvecs: usize,
    rng: &mut R,
) -> SpectralEstimate {
    let d = op.dim();
    let mut matvecs = 0usize;
    let mut best = f64::INFINITY;

    loop {
        let mut basis: Vec<Vec<f64>> = Vec::new();
        let mut alphas: Vec<f64> = Vec::new();
        let mut betas: Vec<f64> = Vec::new();
        let mut v = random_unit_vector(d, rng);

        loop {
            let mut w = op.matvec(&v);
            matvecs += 1;
            let alpha = dot(&v, &w);
            alphas.push(alpha);
            basis.push(std::mem::take(&mut v));

            // Full reorthogonalization, applied twice for safety at the
            // desk-scale dimensions this crate targets.
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(&w, b);
                    for (wi, bi) in w.iter_mut().zip(b) {
                        *wi -= c * bi;
                    }
                }
            }
            let beta = dot(&w, &w).sqrt();

            let theta = smallest_tridiag_eigenvalue(&alphas, &betas);
            let scale = theta.abs().max(f64::MIN_POSITIVE);
            let settled = (theta - best).abs() <= tol * scale;
            if theta < best {
                best = theta;
            }
            if settled || basis.len() == d {
                // At full dimension the Ritz values are exact.
                return SpectralEstimate {
                    nu_min: best,
                    iterations_used: matvecs,
                    converged: true,
                };
            }
            if matvecs >= max_matvecs {
                return SpectralEstimate {
                    nu_min: best,
                    iterations_used: matvecs,
                    converged: false,
                };
            }

            let breakdown_scale = alphas.iter().fold(1.0f64, |m, a| m.max(a.abs()));
            if beta <= 1e-12 * breakdown_scale {
                break; // invariant subspace: restart with a fresh vector
            }
            betas.push(beta);
            v = w;
            let inv = 1.0 / beta;
            for vi in v.iter_mut() {
                *vi *= inv;
            }
        }
    }
}

/// NUTS base integration time: nu_min(Phi)^(-1/2) * t_rel.
pub fn base_integration_time<R: Rng + ?Sized>(
    op: &PrecisionOp,
    t_rel: f64,
    rng: &mut R,
) -> Result<f64, ModelError> {
    if !(t_rel > 0.0) {
        return Err(ModelError::InvalidRelativeTime(t_rel));
    }
    let est = min_eigenvalue(op, DEFAULT_LANCZOS_TOL, DEFAULT_LANCZOS_MAX_MATVECS, rng);
    if !est.converged {
        return Err(ModelError::EigenvalueNotConverged(est.iterations_used));
    }
    Ok(est.nu_min.powf(-0.5) * t_rel)
}

fn random_unit_vector<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-100 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta`, by Sturm-count bisection.
fn smallest_tridiag_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    let n = alpha.len();
    if n == 1 {
        return alpha[0];
    }
    debug_assert_eq!(beta.len(), n - 1);

    // Gershgorin bracket.
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let mut r = 0.0;
        if i > 0 {
            r += beta[i - 1].abs();
        }
        if i < n - 1 {
            r += beta[i].abs();
        }
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    let span = (hi - lo).max(lo.abs().max(hi.abs())).max(f64::MIN_POSITIVE);
    let mut lo = lo - 1e-12 * span;
    let mut hi = hi + 1e-12 * span;

    // Number of eigenvalues strictly below x, via the Sturm sequence.
    let count_below = |x: f64| -> usize {
        let mut count = 0;
        let mut diag = 1.0f64;
        for i in 0..n {
            let off = if i > 0 { beta[i - 1] * beta[i - 1] / diag } else { 0.0 };
            diag = alpha[i] - x - off;
            if diag < 0.0 {
                count += 1;
            } else if diag == 0.0 {
                diag = -f64::MIN_POSITIVE * span;
                count += 1;
            }
        }
        count
    };

    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) >= 1 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(lo.abs()).max(f64::MIN_POSITIVE) {
            break;
        }
    }
    0.5 * (lo + hi)
}
