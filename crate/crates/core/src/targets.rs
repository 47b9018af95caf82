//! Target log-densities with analytic gradients.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Poisson, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unnormalized log-density over `ℝ^d` together with its gradient.
pub trait TargetDensity: Send + Sync {
    fn dim(&self) -> usize;

    fn log_density(&self, x: &[f64]) -> f64;

    fn grad_log_density(&self, x: &[f64]) -> Vec<f64>;
}

impl<T: TargetDensity + ?Sized> TargetDensity for Box<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
    fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        (**self).grad_log_density(x)
    }
}

impl<T: TargetDensity + ?Sized> TargetDensity for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn log_density(&self, x: &[f64]) -> f64 {
        (**self).log_density(x)
    }
    fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        (**self).grad_log_density(x)
    }
}

/// Central differences `[f(x + εe_i) − f(x − εe_i)] / 2ε`.
pub fn numeric_gradient<T: TargetDensity + ?Sized>(target: &T, x: &[f64], step: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + step;
            let up = target.log_density(&probe);
            probe[i] = orig - step;
            let down = target.log_density(&probe);
            probe[i] = orig;
            (up - down) / (2.0 * step)
        })
        .collect()
}

/// Multivariate normal `N(mean, cov)`.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: DVector<f64>,
    precision: DMatrix<f64>,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: cov.nrows(),
            });
        }
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax().max(1.0) {
            return Err(Error::InvalidCovariance);
        }
        let chol = cov.cholesky().ok_or(Error::InvalidCovariance)?;
        Ok(Gaussian {
            mean: DVector::from_vec(mean),
            precision: chol.inverse(),
        })
    }

    pub fn standard(d: usize) -> Self {
        Gaussian {
            mean: DVector::zeros(d),
            precision: DMatrix::identity(d, d),
        }
    }

    fn centered(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x) - &self.mean
    }
}

impl TargetDensity for Gaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let r = self.centered(x);
        -0.5 * r.dot(&(&self.precision * &r))
    }

    fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        let r = self.centered(x);
        (-(&self.precision * r)).data.into()
    }
}

/// Banana-shaped density: a Gaussian with its second coordinate bent along
/// the parabola `x₂ = 100B − Bx₁²`.
#[derive(Debug, Clone, Copy)]
pub struct Banana {
    bananacity: f64,
    dim: usize,
}

impl Banana {
    pub fn new(bananacity: f64, dim: usize) -> Result<Self> {
        if !(bananacity.is_finite() && bananacity > 0.0) {
            return Err(Error::InvalidData(format!("B must be > 0, got {bananacity}")));
        }
        if dim < 2 {
            return Err(Error::InvalidData(format!("banana needs d >= 2, got {dim}")));
        }
        Ok(Banana { bananacity, dim })
    }

    pub fn bananacity(&self) -> f64 {
        self.bananacity
    }

    fn ridge(&self, x: &[f64]) -> f64 {
        let b = self.bananacity;
        x[1] + b * x[0] * x[0] - 100.0 * b
    }
}

impl TargetDensity for Banana {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let r = self.ridge(x);
        let rest: f64 = x[2..].iter().map(|v| v * v).sum();
        -x[0] * x[0] / 200.0 - 0.5 * r * r - 0.5 * rest
    }

    fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        let r = self.ridge(x);
        let mut g = Vec::with_capacity(self.dim);
        g.push(-x[0] / 100.0 - 2.0 * self.bananacity * x[0] * r);
        g.push(-r);
        g.extend(x[2..].iter().map(|v| -v));
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Normal,
    Bernoulli,
    Poisson,
}

/// Largest linear predictor passed to `exp` in the Poisson family.
pub const POISSON_ETA_MAX: f64 = 700.0;

static POISSON_CLAMPS: AtomicU64 = AtomicU64::new(0);

/// Number of times a Poisson linear predictor has been clamped, process-wide.
pub fn poisson_clamp_count() -> u64 {
    POISSON_CLAMPS.load(Ordering::Relaxed)
}

fn clamp_poisson(eta: f64) -> f64 {
    if eta > POISSON_ETA_MAX {
        POISSON_CLAMPS.fetch_add(1, Ordering::Relaxed);
        POISSON_ETA_MAX
    } else {
        eta
    }
}

fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

impl Family {
    /// Cumulant function `ψ(η)`.
    pub fn psi(self, eta: f64) -> f64 {
        match self {
            Family::Normal => 0.5 * eta * eta,
            Family::Bernoulli => eta.max(0.0) + (-eta.abs()).exp().ln_1p(),
            Family::Poisson => clamp_poisson(eta).exp(),
        }
    }

    /// Mean function `ψ′(η)`.
    pub fn psi_prime(self, eta: f64) -> f64 {
        match self {
            Family::Normal => eta,
            Family::Bernoulli => logistic(eta),
            Family::Poisson => clamp_poisson(eta).exp(),
        }
    }

    fn check_response(self, y: f64) -> bool {
        match self {
            Family::Normal => y.is_finite(),
            Family::Bernoulli => y == 0.0 || y == 1.0,
            Family::Poisson => y >= 0.0 && y.fract() == 0.0 && y.is_finite(),
        }
    }
}

/// Design, response and prior settings for an exponential-family regression
/// with identity link and intercept `u`.
#[derive(Debug, Clone)]
pub struct GlmData {
    /// Row-major `n × p` design.
    x: Vec<f64>,
    y: Vec<f64>,
    n: usize,
    p: usize,
    family: Family,
    /// Per-observation dispersion `a(φ_i)`.
    dispersion: Vec<f64>,
    v_beta: f64,
    v_u: f64,
}

impl GlmData {
    pub fn new(
        x: Vec<f64>,
        y: Vec<f64>,
        p: usize,
        family: Family,
        dispersion: Vec<f64>,
        v_beta: f64,
        v_u: f64,
    ) -> Result<Self> {
        let n = y.len();
        if p == 0 || x.len() != n * p {
            return Err(Error::InvalidData(format!(
                "design has {} entries, expected n*p = {}*{}",
                x.len(),
                n,
                p
            )));
        }
        if dispersion.len() != n {
            return Err(Error::InvalidData(format!(
                "dispersion has {} entries, expected {n}",
                dispersion.len()
            )));
        }
        if dispersion.iter().any(|a| !(a.is_finite() && *a > 0.0)) {
            return Err(Error::InvalidData("dispersion must be > 0".into()));
        }
        if !(v_beta > 0.0 && v_u > 0.0 && v_beta.is_finite() && v_u.is_finite()) {
            return Err(Error::InvalidData("prior variances must be > 0".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("design has non-finite entries".into()));
        }
        if let Some(bad) = y.iter().find(|v| !family.check_response(**v)) {
            return Err(Error::InvalidData(format!(
                "response {bad} is invalid for {family:?}"
            )));
        }
        Ok(GlmData {
            x,
            y,
            n,
            p,
            family,
            dispersion,
            v_beta,
            v_u,
        })
    }

    /// Same dispersion for every observation.
    pub fn with_constant_dispersion(
        x: Vec<f64>,
        y: Vec<f64>,
        p: usize,
        family: Family,
        dispersion: f64,
        v_beta: f64,
        v_u: f64,
    ) -> Result<Self> {
        let n = y.len();
        Self::new(x, y, p, family, vec![dispersion; n], v_beta, v_u)
    }

    /// Load `y, x1..xp` columns from a CSV file with a header row.
    pub fn from_csv(
        path: &Path,
        family: Family,
        dispersion: f64,
        v_beta: f64,
        v_u: f64,
    ) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.clone();
        let y_col = headers
            .iter()
            .position(|h| h.trim() == "y")
            .ok_or_else(|| Error::InvalidData("missing `y` column".into()))?;
        let mut x_cols = Vec::new();
        for j in 1.. {
            match headers.iter().position(|h| h.trim() == format!("x{j}")) {
                Some(c) => x_cols.push(c),
                None => break,
            }
        }
        if x_cols.is_empty() {
            return Err(Error::InvalidData("no `x1..xp` columns".into()));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidData(format!("cannot parse `{s}` as a number")))
        };
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for record in reader.records() {
            let record = record?;
            y.push(parse(&record[y_col])?);
            for &c in &x_cols {
                x.push(parse(&record[c])?);
            }
        }
        let p = x_cols.len();
        Self::with_constant_dispersion(x, y, p, family, dispersion, v_beta, v_u)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn response(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.p..(i + 1) * self.p]
    }

    pub fn dispersion(&self) -> &[f64] {
        &self.dispersion
    }

    pub fn prior_variances(&self) -> (f64, f64) {
        (self.v_beta, self.v_u)
    }

    fn eta(&self, i: usize, beta: &[f64], u: f64) -> f64 {
        self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>() + u
    }
}

/// Log posterior of `(β, u)` up to an additive constant.
pub fn glm_log_posterior(data: &GlmData, beta: &[f64], u: f64) -> f64 {
    let fam = data.family;
    let lik: f64 = (0..data.n)
        .map(|i| {
            let eta = data.eta(i, beta, u);
            (data.y[i] * eta - fam.psi(eta)) / data.dispersion[i]
        })
        .sum();
    let bb: f64 = beta.iter().map(|b| b * b).sum();
    lik - bb / (2.0 * data.v_beta) - u * u / (2.0 * data.v_u)
}

/// Gradient of [`glm_log_posterior`], laid out as `(∇_β, ∇_u)`.
pub fn glm_grad_log_posterior(data: &GlmData, beta: &[f64], u: f64) -> Vec<f64> {
    let fam = data.family;
    let mut grad = vec![0.0; data.p + 1];
    for i in 0..data.n {
        let eta = data.eta(i, beta, u);
        let w = (data.y[i] - fam.psi_prime(eta)) / data.dispersion[i];
        for (g, xij) in grad.iter_mut().zip(data.row(i)) {
            *g += w * xij;
        }
        grad[data.p] += w;
    }
    for (g, b) in grad.iter_mut().zip(beta) {
        *g -= b / data.v_beta;
    }
    grad[data.p] -= u / data.v_u;
    grad
}

/// The GLM posterior as a [`TargetDensity`] over the stacked state `(β, u)`.
#[derive(Debug, Clone)]
pub struct GlmPosterior {
    data: GlmData,
}

impl GlmPosterior {
    pub fn new(data: GlmData) -> Self {
        GlmPosterior { data }
    }

    pub fn data(&self) -> &GlmData {
        &self.data
    }
}

impl TargetDensity for GlmPosterior {
    fn dim(&self) -> usize {
        self.data.p + 1
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        let p = self.data.p;
        glm_log_posterior(&self.data, &x[..p], x[p])
    }

    fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        let p = self.data.p;
        glm_grad_log_posterior(&self.data, &x[..p], x[p])
    }
}

/// Simulated regression data together with the coefficients that produced it.
#[derive(Debug, Clone)]
pub struct SimulatedGlm {
    pub data: GlmData,
    pub beta: Vec<f64>,
    pub intercept: f64,
}

/// Standard-normal predictors, coefficients and intercept drawn from
/// `Uniform(−1, 1)`; responses from the family's sampling distribution
/// (unit-variance Gaussian noise for `Normal`).
pub fn simulate_glm(
    seed: u64,
    family: Family,
    n: usize,
    p: usize,
    v_beta: f64,
    v_u: f64,
) -> Result<SimulatedGlm> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef = Uniform::new(-1.0, 1.0);
    let beta: Vec<f64> = (0..p).map(|_| coef.sample(&mut rng)).collect();
    let intercept = coef.sample(&mut rng);
    let x: Vec<f64> = (0..n * p).map(|_| rng.sample(StandardNormal)).collect();
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let eta: f64 = x[i * p..(i + 1) * p]
            .iter()
            .zip(&beta)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + intercept;
        let yi = match family {
            Family::Normal => eta + rng.sample::<f64, _>(StandardNormal),
            Family::Bernoulli => {
                let draw = Bernoulli::new(logistic(eta))
                    .map_err(|e| Error::InvalidData(e.to_string()))?
                    .sample(&mut rng);
                if draw {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Poisson => Poisson::new(eta.exp())
                .map_err(|e| Error::InvalidData(e.to_string()))?
                .sample(&mut rng),
        };
        y.push(yi);
    }
    let data = GlmData::with_constant_dispersion(x, y, p, family, 1.0, v_beta, v_u)?;
    Ok(SimulatedGlm {
        data,
        beta,
        intercept,
    })
}
