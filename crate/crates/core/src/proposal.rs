//! Geometry of the state-dependent proposal.
//!
//! At a state `x` with log-density gradient `∇`, the proposal is
//! `N(x + h∇, t·(I + (s − 1)·g gᵀ))` where `g = ∇/‖∇‖`. Every operation on
//! the sampling path uses the rank-one closed forms, so nothing here builds
//! a dense matrix except [`covariance_matrix`] and the [`oracle`] module,
//! which exist for checking.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Gradient norms below this are treated as "no direction".
pub const GRAD_EPS: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Unit gradient direction at a point, or a marker that none exists.
#[derive(Debug, Clone, PartialEq)]
pub struct Direction {
    g: Vec<f64>,
    degenerate: bool,
}

impl Direction {
    pub fn unit(&self) -> &[f64] {
        &self.g
    }

    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    /// Build a direction from a vector that is already unit length.
    ///
    /// Only the norm is checked, loosely; this exists for tests and oracles.
    pub fn from_unit(g: Vec<f64>) -> Result<Self> {
        let norm = dot(&g, &g).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidGradient);
        }
        Ok(Direction {
            g,
            degenerate: false,
        })
    }
}

/// Tuning triple of the directional kernel.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ProposalShape {
    /// Drift step along the gradient.
    pub h: f64,
    /// Variance weight on the gradient direction.
    pub s: f64,
    /// Global variance scale.
    pub t: f64,
}

impl ProposalShape {
    pub fn new(h: f64, s: f64, t: f64) -> Result<Self> {
        let shape = ProposalShape { h, s, t };
        shape.validate()?;
        Ok(shape)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h >= 0.0) {
            return Err(Error::InvalidShape(format!("h must be >= 0, got {}", self.h)));
        }
        if !(self.s.is_finite() && self.s > 0.0) {
            return Err(Error::InvalidShape(format!("s must be > 0, got {}", self.s)));
        }
        if !(self.t.is_finite() && self.t > 0.0) {
            return Err(Error::InvalidShape(format!("t must be > 0, got {}", self.t)));
        }
        Ok(())
    }

    /// Log-determinant of the non-degenerate covariance, `log(s·t^d)`.
    pub fn log_det(&self, dim: usize) -> f64 {
        self.s.ln() + dim as f64 * self.t.ln()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn unit_gradient(grad: &[f64]) -> Result<Direction> {
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidGradient);
    }
    let norm = dot(grad, grad).sqrt();
    if norm < GRAD_EPS {
        return Ok(Direction {
            g: vec![0.0; grad.len()],
            degenerate: true,
        });
    }
    Ok(Direction {
        g: grad.iter().map(|v| v / norm).collect(),
        degenerate: false,
    })
}

/// Dense `t·(I + (s − 1)·g gᵀ)`.
pub fn covariance_matrix(dir: &Direction, shape: &ProposalShape) -> Result<DMatrix<f64>> {
    if dir.degenerate {
        return Err(Error::DegenerateDirection);
    }
    let d = dir.dim();
    let g = &dir.g;
    Ok(DMatrix::from_fn(d, d, |i, j| {
        let identity = if i == j { 1.0 } else { 0.0 };
        shape.t * (identity + (shape.s - 1.0) * g[i] * g[j])
    }))
}

/// `vᵀ Σ⁻¹ v` through `Σ⁻¹ = (1/t)·[I + (1/s − 1)·g gᵀ]`.
pub fn quadratic_form(v: &[f64], dir: &Direction, shape: &ProposalShape) -> f64 {
    let sq = dot(v, v);
    if dir.degenerate {
        return sq / shape.t;
    }
    let along = dot(&dir.g, v);
    ((sq + (1.0 / shape.s - 1.0) * along * along) / shape.t).max(0.0)
}

fn proposal_mean(x: &[f64], grad: &[f64], h: f64) -> Vec<f64> {
    x.iter().zip(grad).map(|(xi, gi)| xi + h * gi).collect()
}

fn direction_or_degenerate(grad: &[f64]) -> Direction {
    unit_gradient(grad).unwrap_or(Direction {
        g: vec![0.0; grad.len()],
        degenerate: true,
    })
}

/// Draw `y ~ N(x + h·grad, t·(I + (s − 1)·g gᵀ))`.
///
/// Consumes exactly `x.len()` standard normals from `rng`, in coordinate
/// order. A non-finite gradient is handled like a degenerate one.
pub fn sample_proposal<R: Rng + ?Sized>(
    rng: &mut R,
    x: &[f64],
    grad: &[f64],
    shape: &ProposalShape,
) -> Vec<f64> {
    let z: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
    let grad_ok = grad.iter().all(|v| v.is_finite());
    let mean = if grad_ok {
        proposal_mean(x, grad, shape.h)
    } else {
        x.to_vec()
    };
    let dir = direction_or_degenerate(grad);
    let scale = shape.t.sqrt();
    if dir.degenerate {
        return mean.iter().zip(&z).map(|(m, zi)| m + scale * zi).collect();
    }
    let stretch = (shape.s.sqrt() - 1.0) * dot(&dir.g, &z);
    mean.iter()
        .zip(&z)
        .zip(&dir.g)
        .map(|((m, zi), gi)| m + scale * (zi + stretch * gi))
        .collect()
}

/// `log q(from → to)` including the normalizing constant.
pub fn proposal_log_density(
    from: &[f64],
    grad_at_from: &[f64],
    to: &[f64],
    shape: &ProposalShape,
) -> f64 {
    let d = from.len();
    let grad_ok = grad_at_from.iter().all(|v| v.is_finite());
    let mean = if grad_ok {
        proposal_mean(from, grad_at_from, shape.h)
    } else {
        from.to_vec()
    };
    let diff: Vec<f64> = to.iter().zip(&mean).map(|(a, b)| a - b).collect();
    let dir = direction_or_degenerate(grad_at_from);
    let log_det = if dir.degenerate {
        d as f64 * shape.t.ln()
    } else {
        shape.log_det(d)
    };
    -0.5 * d as f64 * LN_2PI - 0.5 * log_det - 0.5 * quadratic_form(&diff, &dir, shape)
}

/// Explicit orthonormal basis completion, used to check the closed forms.
pub mod oracle {
    use nalgebra::DMatrix;

    use super::Direction;
    use crate::error::{Error, Result};

    /// Orthonormal `G` whose first column is `g`.
    ///
    /// Completes `g` with the standard basis vectors, leaving out the one
    /// most parallel to `g`, and orthonormalizes with two Gram–Schmidt passes.
    pub fn basis_completion_oracle(dir: &Direction) -> Result<DMatrix<f64>> {
        let d = dir.dim();
        let skip = most_parallel_axis(dir.unit());
        let order: Vec<usize> = (0..d).filter(|&i| i != skip).collect();
        basis_completion_with_order(dir, &order)
    }

    /// Same as [`basis_completion_oracle`] with a caller-chosen list of
    /// standard basis vectors to complete with (length `d − 1`).
    pub fn basis_completion_with_order(dir: &Direction, order: &[usize]) -> Result<DMatrix<f64>> {
        if dir.is_degenerate() {
            return Err(Error::DegenerateDirection);
        }
        let d = dir.dim();
        if order.len() + 1 != d || order.iter().any(|&i| i >= d) {
            return Err(Error::OracleFailure);
        }
        let mut columns: Vec<Vec<f64>> = vec![dir.unit().to_vec()];
        for &axis in order {
            let mut v = vec![0.0; d];
            v[axis] = 1.0;
            // two passes: classical GS loses orthogonality otherwise
            for _ in 0..2 {
                for c in &columns {
                    let proj: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
                    for (vi, ci) in v.iter_mut().zip(c) {
                        *vi -= proj * ci;
                    }
                }
            }
            let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm < 1e-8 {
                return Err(Error::OracleFailure);
            }
            columns.push(v.into_iter().map(|a| a / norm).collect());
        }
        Ok(DMatrix::from_fn(d, d, |i, j| columns[j][i]))
    }

    /// `G Λ Gᵀ` with `Λ = diag(s, 1, …, 1)`.
    pub fn weighted_basis_product(basis: &DMatrix<f64>, s: f64) -> DMatrix<f64> {
        let d = basis.nrows();
        let mut lambda = DMatrix::identity(d, d);
        lambda[(0, 0)] = s;
        basis * lambda * basis.transpose()
    }

    fn most_parallel_axis(g: &[f64]) -> usize {
        g.iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}
