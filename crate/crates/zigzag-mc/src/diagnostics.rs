//! Chain-quality metrics: effective sample size, ESS per velocity-switch
//! event, traveled-distance curves, and principal-component projections.

use thiserror::Error;

use crate::model::{PrecisionOp, TruncatedGaussianTarget};

/// Dense covariance traces above this dimension are refused; use a Monte
/// Carlo estimate instead.
pub const MAX_DENSE_TRACE_DIM: usize = 2048;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("series too short for an ESS estimate: {0} < 10")]
    SeriesTooShort(usize),
    #[error("series contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("chain recorded zero velocity-switch events")]
    NoEvents,
    #[error("projection vector must have unit norm (got {0})")]
    NotUnitNorm(f64),
    #[error("coordinate index {index} out of range for dimension {dim}")]
    CoordinateOutOfRange { index: usize, dim: usize },
    #[error("projection vector has {got} entries, samples have dimension {dim}")]
    ProjectionDimension { got: usize, dim: usize },
    #[error(
        "dense covariance trace refused for dimension {0} > {MAX_DENSE_TRACE_DIM}; \
         use a Monte Carlo estimate"
    )]
    TraceTooLarge(usize),
    #[error("precision matrix is not positive definite")]
    NotPositiveDefinite,
}

/// ESS estimate. `zero_variance` flags a constant series, for which the
/// estimator falls back to the nominal sample count.
#[derive(Clone, Copy, Debug)]
pub struct Ess {
    pub value: f64,
    pub zero_variance: bool,
}

/// Effective sample size by Geyer's initial monotone positive sequence
/// estimator on the empirical autocovariance.
///
/// Negatively autocorrelated (antithetic) chains can legitimately exceed the
/// nominal sample count, so the value is clipped to [1, n log10 n] rather
/// than [1, n].
pub fn ess(series: &[f64]) -> Result<Ess, DiagnosticsError> {
    let n = series.len();
    if n < 10 {
        return Err(DiagnosticsError::SeriesTooShort(n));
    }
    if let Some(bad) = series.iter().position(|x| !x.is_finite()) {
        return Err(DiagnosticsError::NonFinite(bad));
    }
    let nf = n as f64;
    let mean = series.iter().sum::<f64>() / nf;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let gamma0 = centered.iter().map(|x| x * x).sum::<f64>() / nf;
    if gamma0 == 0.0 {
        return Ok(Ess {
            value: nf,
            zero_variance: true,
        });
    }

    // Biased autocovariance at a single lag.
    let gamma = |lag: usize| -> f64 {
        centered[..n - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / nf
    };

    // Initial positive sequence: sum pair sums Gamma_m = gamma_{2m} +
    // gamma_{2m+1} while they stay positive, then enforce monotonicity.
    let max_lag = (n - 2).min((n / 20).max(1000));
    let mut pair_sums: Vec<f64> = Vec::new();
    let mut m = 0usize;
    loop {
        let lag = 2 * m;
        if lag + 1 > max_lag {
            break;
        }
        let pair = gamma(lag) + gamma(lag + 1);
        if pair <= 0.0 {
            break;
        }
        pair_sums.push(pair);
        m += 1;
    }
    let mut running_min = f64::INFINITY;
    let mut total = 0.0;
    for pair in &pair_sums {
        running_min = running_min.min(*pair);
        total += running_min;
    }
    let asymptotic_var = -gamma0 + 2.0 * total;
    let value = if asymptotic_var <= 0.0 {
        // Strongly antithetic series push the estimator to zero from above.
        nf * nf.log10()
    } else {
        (nf * gamma0 / asymptotic_var).clamp(1.0, nf * nf.log10())
    };
    Ok(Ess {
        value,
        zero_variance: false,
    })
}

/// Samples from one chain plus the bookkeeping the efficiency metrics need.
#[derive(Clone, Debug)]
pub struct ChainOutput {
    pub sampler: String,
    pub dim: usize,
    /// Row-major (n_samples x dim).
    pub samples: Vec<f64>,
    /// Velocity-switch events (gradient + boundary; refreshments excluded)
    /// spent producing each sample.
    pub events_per_sample: Vec<u64>,
    pub wall_seconds: f64,
}

impl ChainOutput {
    pub fn n_samples(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.samples.len() / self.dim
        }
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        &self.samples[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coordinate(&self, j: usize) -> Result<Vec<f64>, DiagnosticsError> {
        if j >= self.dim {
            return Err(DiagnosticsError::CoordinateOutOfRange {
                index: j,
                dim: self.dim,
            });
        }
        Ok((0..self.n_samples())
            .map(|i| self.samples[i * self.dim + j])
            .collect())
    }

    pub fn total_events(&self) -> u64 {
        self.events_per_sample.iter().sum()
    }
}

/// The series a metric is computed along: one coordinate or a projection
/// onto a unit vector.
#[derive(Clone, Debug)]
pub enum SeriesSpec<'a> {
    Coordinate(usize),
    Projection(&'a [f64]),
}

impl SeriesSpec<'_> {
    pub fn extract(&self, chain: &ChainOutput) -> Result<Vec<f64>, DiagnosticsError> {
        match self {
            SeriesSpec::Coordinate(j) => chain.coordinate(*j),
            SeriesSpec::Projection(u) => project(chain, u),
        }
    }
}

/// ESS divided by the total number of velocity-switch events spent producing
/// the chain. Platform-independent efficiency metric: both zigzags pay one
/// quadratic solve sweep and one column extraction per event.
pub fn ess_per_event(
    chain: &ChainOutput,
    series: &SeriesSpec<'_>,
) -> Result<f64, DiagnosticsError> {
    let events = chain.total_events();
    if events == 0 {
        return Err(DiagnosticsError::NoEvents);
    }
    let values = series.extract(chain)?;
    Ok(ess(&values)?.value / events as f64)
}

/// Inner products of each sample with a unit vector.
pub fn project(chain: &ChainOutput, u: &[f64]) -> Result<Vec<f64>, DiagnosticsError> {
    if u.len() != chain.dim {
        return Err(DiagnosticsError::ProjectionDimension {
            got: u.len(),
            dim: chain.dim,
        });
    }
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(DiagnosticsError::NotUnitNorm(norm));
    }
    Ok((0..chain.n_samples())
        .map(|i| {
            chain
                .sample(i)
                .iter()
                .zip(u)
                .map(|(a, b)| a * b)
                .sum::<f64>()
        })
        .collect())
}

/// Squared Euclidean distance from `x0` at each supplied point (one per
/// velocity-change event).
pub fn squared_distance_curve<'a, I>(points: I, x0: &[f64]) -> Vec<f64>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    points
        .into_iter()
        .map(|x| squared_distance(x, x0))
        .collect()
}

pub fn squared_distance(x: &[f64], x0: &[f64]) -> f64 {
    x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Expected squared distance between `x0` and an independent draw from the
/// untruncated target: trace(Phi^-1) + |mean - x0|^2. The trace is analytic
/// for the unit-marginal structured families and computed by a dense
/// Cholesky factorization otherwise (refused above
/// [`MAX_DENSE_TRACE_DIM`]).
pub fn expected_squared_distance(
    target: &TruncatedGaussianTarget,
    x0: &[f64],
) -> Result<f64, DiagnosticsError> {
    let trace = match target.precision() {
        PrecisionOp::CompoundSymmetric { dim, .. } | PrecisionOp::Ar1 { dim, .. } => {
            *dim as f64
        }
        op => {
            let d = op.dim();
            if d > MAX_DENSE_TRACE_DIM {
                return Err(DiagnosticsError::TraceTooLarge(d));
            }
            covariance_trace_dense(&op.to_dense_entries(), d)?
        }
    };
    Ok(trace + squared_distance(target.mean(), x0))
}

/// trace(A^-1) for symmetric positive definite A via Cholesky: factor
/// A = L L^T, then trace(A^-1) = sum of squared entries of L^-1.
fn covariance_trace_dense(entries: &[f64], d: usize) -> Result<f64, DiagnosticsError> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut acc = entries[i * d + j];
            for k in 0..j {
                acc -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if acc <= 0.0 {
                    return Err(DiagnosticsError::NotPositiveDefinite);
                }
                l[i * d + i] = acc.sqrt();
            } else {
                l[i * d + j] = acc / l[j * d + j];
            }
        }
    }
    // Column j of L^-1 solves L y = e_j; accumulate |y|^2.
    let mut trace = 0.0;
    let mut y = vec![0.0; d];
    for j in 0..d {
        for i in j..d {
            let mut acc = if i == j { 1.0 } else { 0.0 };
            for k in j..i {
                acc -= l[i * d + k] * y[k];
            }
            y[i] = acc / l[i * d + i];
            trace += y[i] * y[i];
        }
    }
    Ok(trace)
}
