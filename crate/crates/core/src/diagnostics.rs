//! Chain-quality estimators: autocorrelation, IACT, batch-means ESS,
//! multivariate ESS, mean squared jump distance, and a Monte-Carlo probe of
//! the one-step drift of `V(x) = exp(τ‖x‖)`.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{chain_rng, mh_step, KernelConfig};
use crate::targets::TargetDensity;

/// Autocorrelation threshold that ends the IACT sum.
pub const IACT_CUTOFF: f64 = 0.05;

fn mean(series: &[f64]) -> f64 {
    series.iter().sum::<f64>() / series.len() as f64
}

fn centered_sum_sq(series: &[f64]) -> f64 {
    let m = mean(series);
    series.iter().map(|v| (v - m) * (v - m)).sum()
}

/// Lag-`k` sample autocorrelation with the biased `1/n` denominator.
pub fn autocorrelation(series: &[f64], lag: usize) -> Result<f64> {
    let n = series.len();
    if lag >= n {
        return Err(Error::InsufficientData(format!(
            "lag {lag} needs more than {n} samples"
        )));
    }
    let m = mean(series);
    let denom = centered_sum_sq(series);
    if denom == 0.0 {
        return Err(Error::ConstantSeries);
    }
    let num: f64 = series
        .iter()
        .zip(&series[lag..])
        .map(|(a, b)| (a - m) * (b - m))
        .sum();
    Ok(num / denom)
}

/// Autocorrelations for lags `0..=max_lag`, computed by FFT.
pub fn acf(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if n == 0 {
        return Err(Error::InsufficientData("empty series".into()));
    }
    let m = mean(series);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|v| Complex::new(v - m, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let c0 = buf[0].re;
    if c0 <= 0.0 || centered_sum_sq(series) == 0.0 {
        return Err(Error::ConstantSeries);
    }
    Ok(buf[..=max_lag.min(n - 1)].iter().map(|c| c.re / c0).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IactEstimate {
    pub value: f64,
    /// Number of lags summed.
    pub lags: usize,
    /// The autocorrelation never fell below the cutoff before `n/2`.
    pub truncated: bool,
}

/// `1 + 2 Σ_{i=1}^{l} γ̂_i`, summing until the first lag whose
/// autocorrelation is below [`IACT_CUTOFF`], and at most to lag `n/2`.
pub fn iact(series: &[f64]) -> Result<IactEstimate> {
    iact_with_max_lag(series, series.len() / 2)
}

/// [`iact`] with an explicit truncation lag.
pub fn iact_with_max_lag(series: &[f64], max_lag: usize) -> Result<IactEstimate> {
    let n = series.len();
    if n < 10 {
        return Err(Error::InsufficientData(format!("IACT needs n >= 10, got {n}")));
    }
    let rho = acf(series, max_lag.max(1))?;
    let mut sum = 0.0;
    for (k, &r) in rho.iter().enumerate().skip(1) {
        if r < IACT_CUTOFF {
            return Ok(IactEstimate {
                value: 1.0 + 2.0 * sum,
                lags: k - 1,
                truncated: false,
            });
        }
        sum += r;
    }
    Ok(IactEstimate {
        value: 1.0 + 2.0 * sum,
        lags: rho.len() - 1,
        truncated: true,
    })
}

/// Default batch size `⌊√n⌋`.
pub fn default_batch_size(n: usize) -> usize {
    ((n as f64).sqrt().floor() as usize).max(1)
}

fn check_batches(n: usize, batch_size: usize) -> Result<usize> {
    if batch_size == 0 || n < 2 * batch_size {
        return Err(Error::InsufficientData(format!(
            "{n} samples cannot form two batches of {batch_size}"
        )));
    }
    Ok(n / batch_size)
}

/// Nonoverlapping batch-means estimate of the asymptotic variance.
pub fn batch_means_variance(series: &[f64], batch_size: usize) -> Result<f64> {
    let m = check_batches(series.len(), batch_size)?;
    let means: Vec<f64> = series
        .chunks_exact(batch_size)
        .take(m)
        .map(mean)
        .collect();
    let grand = mean(&means);
    let ss: f64 = means.iter().map(|v| (v - grand) * (v - grand)).sum();
    Ok(batch_size as f64 * ss / (m - 1) as f64)
}

/// `n · λ² / σ²` with `λ²` the sample variance and `σ²` the batch-means
/// asymptotic variance.
pub fn ess_univariate(series: &[f64], batch_size: usize) -> Result<f64> {
    let sigma2 = batch_means_variance(series, batch_size)?;
    let n = series.len();
    let lambda2 = centered_sum_sq(series) / (n - 1) as f64;
    if lambda2 == 0.0 || sigma2 == 0.0 {
        return Err(Error::ConstantSeries);
    }
    Ok(n as f64 * lambda2 / sigma2)
}

fn check_rows(rows: &[Vec<f64>]) -> Result<usize> {
    let p = rows.first().map_or(0, Vec::len);
    if p == 0 {
        return Err(Error::InsufficientData("empty chain".into()));
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: bad.len(),
        });
    }
    Ok(p)
}

fn log_det_spd(m: DMatrix<f64>) -> Option<f64> {
    let chol = m.cholesky()?;
    let l = chol.l();
    let ld: f64 = l.diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    ld.is_finite().then_some(ld)
}

/// `n · (|Λ_n| / |Σ_n|)^{1/p}` with `Λ_n` the sample covariance and `Σ_n`
/// the multivariate batch-means covariance.
pub fn mess(rows: &[Vec<f64>], batch_size: usize) -> Result<f64> {
    let p = check_rows(rows)?;
    let n = rows.len();
    let m = check_batches(n, batch_size)?;
    if n < 2 * batch_size * p {
        return Err(Error::InsufficientData(format!(
            "mESS needs n >= 2·batch·p = {}, got {n}",
            2 * batch_size * p
        )));
    }
    let col_means: Vec<f64> = (0..p)
        .map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut sample = DMatrix::zeros(p, p);
    for r in rows {
        for i in 0..p {
            let di = r[i] - col_means[i];
            for j in 0..=i {
                sample[(i, j)] += di * (r[j] - col_means[j]);
            }
        }
    }
    let batch_means: Vec<Vec<f64>> = rows
        .chunks_exact(batch_size)
        .take(m)
        .map(|chunk| {
            (0..p)
                .map(|j| chunk.iter().map(|r| r[j]).sum::<f64>() / batch_size as f64)
                .collect()
        })
        .collect();
    let grand: Vec<f64> = (0..p)
        .map(|j| batch_means.iter().map(|b| b[j]).sum::<f64>() / m as f64)
        .collect();
    let mut batch_cov = DMatrix::zeros(p, p);
    for b in &batch_means {
        for i in 0..p {
            let di = b[i] - grand[i];
            for j in 0..=i {
                batch_cov[(i, j)] += di * (b[j] - grand[j]);
            }
        }
    }
    for i in 0..p {
        for j in 0..i {
            sample[(j, i)] = sample[(i, j)];
            batch_cov[(j, i)] = batch_cov[(i, j)];
        }
    }
    sample /= (n - 1) as f64;
    batch_cov *= batch_size as f64 / (m - 1) as f64;

    let log_sample = log_det_spd(sample).ok_or(Error::SingularEstimate)?;
    let log_batch = log_det_spd(batch_cov).ok_or(Error::SingularEstimate)?;
    Ok(n as f64 * ((log_sample - log_batch) / p as f64).exp())
}

/// Mean squared Euclidean distance between consecutive rows.
pub fn msjd(rows: &[Vec<f64>]) -> Result<f64> {
    check_rows(rows)?;
    if rows.len() < 2 {
        return Err(Error::InsufficientData("MSJD needs at least 2 rows".into()));
    }
    let total: f64 = rows
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    Ok(total / (rows.len() - 1) as f64)
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Estimate `PV(x)/V(x) = E[exp(τ(‖X₁‖ − ‖x‖)) | X₀ = x]` from `n_mc`
/// independent single transitions; draw `i` uses the stream seeded with
/// `seed + i`.
pub fn drift_ratio_estimate<T: TargetDensity + ?Sized>(
    target: &T,
    config: &KernelConfig,
    x: &[f64],
    tau: f64,
    n_mc: usize,
    seed: u64,
) -> Result<DriftEstimate> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::InvalidShape(format!("tau must be > 0, got {tau}")));
    }
    if n_mc < 1000 {
        return Err(Error::InsufficientData(format!(
            "drift probe needs n_mc >= 1000, got {n_mc}"
        )));
    }
    if x.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: x.len(),
        });
    }
    let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    let base = norm(x);
    let values: Vec<f64> = (0..n_mc)
        .map(|i| {
            let mut rng = chain_rng(seed.wrapping_add(i as u64));
            let step = mh_step(&mut rng, target, x, config);
            (tau * (norm(&step.next) - base)).exp()
        })
        .collect();
    let m = mean(&values);
    let var = centered_sum_sq(&values) / (n_mc - 1) as f64;
    Ok(DriftEstimate {
        mean: m,
        std_error: (var / n_mc as f64).sqrt(),
    })
}

/// Per-chain bundle of the estimators above. Estimates that are undefined
/// for a chain (constant coordinates, singular covariance) are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub acceptance_rate: f64,
    pub iact: Vec<Option<f64>>,
    pub ess: Vec<Option<f64>>,
    pub mess: Option<f64>,
    pub msjd: f64,
    pub n: usize,
}

impl DiagnosticsReport {
    /// Compute every estimator on `rows`; `batch_size` defaults to `⌊√n⌋`.
    pub fn compute(rows: &[Vec<f64>], acceptance_rate: f64, batch_size: Option<usize>) -> Result<Self> {
        let d = check_rows(rows)?;
        let n = rows.len();
        let batch = batch_size.unwrap_or_else(|| default_batch_size(n));
        let mut iacts = Vec::with_capacity(d);
        let mut esss = Vec::with_capacity(d);
        for j in 0..d {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            iacts.push(iact(&col).ok().map(|e| e.value));
            esss.push(ess_univariate(&col, batch).ok());
        }
        Ok(DiagnosticsReport {
            acceptance_rate,
            iact: iacts,
            ess: esss,
            mess: mess(rows, batch).ok(),
            msjd: msjd(rows)?,
            n,
        })
    }
}

/// Fraction of consecutive rows that differ; the acceptance rate of an
/// unthinned chain when only its states are known.
pub fn move_rate(rows: &[Vec<f64>]) -> f64 {
    if rows.len() < 2 {
        return 0.0;
    }
    let moves = rows.windows(2).filter(|w| w[0] != w[1]).count();
    moves as f64 / (rows.len() - 1) as f64
}
