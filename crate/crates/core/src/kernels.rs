//! Metropolis–Hastings transitions for the directional kernel and its
//! random-walk and Langevin special cases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::proposal::{proposal_log_density, sample_proposal, ProposalShape};
use crate::targets::{numeric_gradient, TargetDensity};

/// Generator used for every chain; seeded from a single `u64`.
pub type ChainRng = ChaCha8Rng;

pub fn chain_rng(seed: u64) -> ChainRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Flavor {
    #[serde(rename = "DMH")]
    Dmh,
    #[serde(rename = "MALA")]
    Mala,
    #[serde(rename = "RWMH")]
    Rwmh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    Analytic,
    Numeric { step: f64 },
}

/// Kernel flavor plus tuning. RWMH and MALA are presets of the same
/// directional transition with `s = 1` (and `h = 0` for RWMH).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    pub flavor: Flavor,
    pub shape: ProposalShape,
    pub gradient_mode: GradientMode,
}

impl KernelConfig {
    pub fn new(flavor: Flavor, shape: ProposalShape, gradient_mode: GradientMode) -> Result<Self> {
        shape.validate()?;
        match flavor {
            Flavor::Rwmh if shape.h != 0.0 || shape.s != 1.0 => {
                return Err(Error::InvalidShape("RWMH requires h = 0 and s = 1".into()))
            }
            Flavor::Mala if shape.s != 1.0 => {
                return Err(Error::InvalidShape("MALA requires s = 1".into()))
            }
            _ => {}
        }
        if let GradientMode::Numeric { step } = gradient_mode {
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::InvalidShape(format!(
                    "numeric gradient step must be > 0, got {step}"
                )));
            }
        }
        Ok(KernelConfig {
            flavor,
            shape,
            gradient_mode,
        })
    }

    pub fn dmh(h: f64, s: f64, t: f64) -> Result<Self> {
        Self::new(Flavor::Dmh, ProposalShape::new(h, s, t)?, GradientMode::Analytic)
    }

    /// Langevin proposal `N(x + h∇log f, h²I)`.
    pub fn mala(h: f64) -> Result<Self> {
        Self::new(
            Flavor::Mala,
            ProposalShape::new(h, 1.0, h * h)?,
            GradientMode::Analytic,
        )
    }

    /// Random walk `N(x, tI)`.
    pub fn rwmh(t: f64) -> Result<Self> {
        Self::new(
            Flavor::Rwmh,
            ProposalShape::new(0.0, 1.0, t)?,
            GradientMode::Analytic,
        )
    }

    pub fn with_gradient_mode(mut self, mode: GradientMode) -> Result<Self> {
        self.gradient_mode = mode;
        Self::new(self.flavor, self.shape, self.gradient_mode)
    }

    fn uses_gradient(&self) -> bool {
        self.flavor != Flavor::Rwmh
    }

    pub(crate) fn gradient<T: TargetDensity + ?Sized>(&self, target: &T, x: &[f64]) -> Vec<f64> {
        if !self.uses_gradient() {
            return vec![0.0; x.len()];
        }
        match self.gradient_mode {
            GradientMode::Analytic => target.grad_log_density(x),
            GradientMode::Numeric { step } => numeric_gradient(target, x, step),
        }
    }
}

/// Outcome of one Metropolis–Hastings transition.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next: Vec<f64>,
    pub accepted: bool,
    pub log_hastings_ratio: f64,
}

/// Current point with its cached log density and gradient.
#[derive(Debug, Clone)]
pub(crate) struct Point {
    pub x: Vec<f64>,
    pub log_f: f64,
    pub grad: Vec<f64>,
}

impl Point {
    pub(crate) fn new<T: TargetDensity + ?Sized>(
        target: &T,
        config: &KernelConfig,
        x: Vec<f64>,
    ) -> Self {
        let log_f = target.log_density(&x);
        let grad = config.gradient(target, &x);
        Point { x, log_f, grad }
    }
}

fn ratio_between(from: &Point, to: &Point, shape: &ProposalShape) -> f64 {
    if !to.log_f.is_finite() || to.grad.iter().any(|g| !g.is_finite()) {
        return f64::NEG_INFINITY;
    }
    let forward = proposal_log_density(&from.x, &from.grad, &to.x, shape);
    let reverse = proposal_log_density(&to.x, &to.grad, &from.x, shape);
    // grouped so that swapping the endpoints negates each term exactly
    (to.log_f - from.log_f) + (reverse - forward)
}

/// `log[f(y) q(y → x)] − log[f(x) q(x → y)]`, with each proposal density
/// built from its own endpoint's gradient.
pub fn log_hastings_ratio<T: TargetDensity + ?Sized>(
    target: &T,
    x: &[f64],
    y: &[f64],
    config: &KernelConfig,
) -> f64 {
    let from = Point::new(target, config, x.to_vec());
    let log_f_y = target.log_density(y);
    if !log_f_y.is_finite() {
        return f64::NEG_INFINITY;
    }
    let to = Point::new(target, config, y.to_vec());
    ratio_between(&from, &to, &config.shape)
}

/// One transition from a cached point. Draws `d` normals, then one uniform.
pub(crate) fn transition<R: Rng + ?Sized, T: TargetDensity + ?Sized>(
    rng: &mut R,
    target: &T,
    config: &KernelConfig,
    shape: &ProposalShape,
    current: &mut Point,
) -> (bool, f64) {
    let y = sample_proposal(rng, &current.x, &current.grad, shape);
    let u: f64 = rng.gen();
    let log_f_y = target.log_density(&y);
    if !log_f_y.is_finite() {
        return (false, f64::NEG_INFINITY);
    }
    let proposed = Point {
        grad: config.gradient(target, &y),
        x: y,
        log_f: log_f_y,
    };
    let ratio = ratio_between(current, &proposed, shape);
    let accepted = u.ln() <= ratio;
    if accepted {
        *current = proposed;
    }
    (accepted, ratio)
}

pub fn mh_step<R: Rng + ?Sized, T: TargetDensity + ?Sized>(
    rng: &mut R,
    target: &T,
    x: &[f64],
    config: &KernelConfig,
) -> StepResult {
    let mut point = Point::new(target, config, x.to_vec());
    let (accepted, ratio) = transition(rng, target, config, &config.shape, &mut point);
    StepResult {
        next: point.x,
        accepted,
        log_hastings_ratio: ratio,
    }
}

/// Stored output of a run: thinned post-burn-in states and every step's
/// acceptance flag.
#[derive(Debug, Clone, PartialEq)]
pub struct Chain {
    pub states: Vec<Vec<f64>>,
    pub accepted: Vec<bool>,
    pub seed: u64,
    pub config: KernelConfig,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|a| **a).count() as f64 / self.accepted.len() as f64
    }
}

/// Run lengths shared by plain and adaptive runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunLength {
    pub n_steps: usize,
    pub burn_in: usize,
    pub thin: usize,
}

impl RunLength {
    pub fn new(n_steps: usize, burn_in: usize, thin: usize) -> Result<Self> {
        if n_steps <= burn_in {
            return Err(Error::InvalidRunLength(format!(
                "n_steps ({n_steps}) must exceed burn_in ({burn_in})"
            )));
        }
        if thin == 0 {
            return Err(Error::InvalidRunLength("thin must be >= 1".into()));
        }
        Ok(RunLength {
            n_steps,
            burn_in,
            thin,
        })
    }

    pub fn steps(n_steps: usize) -> Result<Self> {
        Self::new(n_steps, 0, 1)
    }

    /// Whether the state after step `i` (1-based) is stored.
    pub(crate) fn keeps(&self, i: usize) -> bool {
        i > self.burn_in && (i - self.burn_in).is_multiple_of(self.thin)
    }
}

pub(crate) fn start_point<T: TargetDensity + ?Sized>(
    target: &T,
    config: &KernelConfig,
    x0: &[f64],
) -> Result<Point> {
    if x0.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: x0.len(),
        });
    }
    let point = Point::new(target, config, x0.to_vec());
    if !point.log_f.is_finite() || x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidStart);
    }
    Ok(point)
}

pub fn run_chain<T: TargetDensity + ?Sized>(
    seed: u64,
    target: &T,
    config: &KernelConfig,
    x0: &[f64],
    length: RunLength,
) -> Result<Chain> {
    let mut current = start_point(target, config, x0)?;
    let mut rng = chain_rng(seed);
    let mut states = Vec::with_capacity((length.n_steps - length.burn_in) / length.thin);
    let mut accepted = Vec::with_capacity(length.n_steps);
    for i in 1..=length.n_steps {
        let (acc, _) = transition(&mut rng, target, config, &config.shape, &mut current);
        accepted.push(acc);
        if length.keeps(i) {
            states.push(current.x.clone());
        }
    }
    Ok(Chain {
        states,
        accepted,
        seed,
        config: *config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::{Banana, Gaussian};

    #[test]
    fn identity_move_has_zero_ratio() {
        let banana = Banana::new(0.03, 2).unwrap();
        let config = KernelConfig::dmh(0.2, 0.5, 1.0).unwrap();
        assert_eq!(log_hastings_ratio(&banana, &[1.0, 2.0], &[1.0, 2.0], &config), 0.0);
    }

    #[test]
    fn rwmh_ratio_is_density_ratio() {
        let banana = Banana::new(0.03, 2).unwrap();
        let config = KernelConfig::rwmh(0.7).unwrap();
        let (x, y) = ([1.0, 2.0], [-0.5, 3.3]);
        let direct = banana.log_density(&y) - banana.log_density(&x);
        assert!((log_hastings_ratio(&banana, &x, &y, &config) - direct).abs() < 1e-12);
    }

    #[test]
    fn ratio_is_antisymmetric() {
        let banana = Banana::new(0.03, 2).unwrap();
        let config = KernelConfig::dmh(0.3, 0.4, 1.5).unwrap();
        let mut rng = chain_rng(1);
        for _ in 0..1000 {
            let x = [rng.gen_range(-20.0..20.0), rng.gen_range(-10.0..5.0)];
            let y = [rng.gen_range(-20.0..20.0), rng.gen_range(-10.0..5.0)];
            let a = log_hastings_ratio(&banana, &x, &y, &config);
            let b = log_hastings_ratio(&banana, &y, &x, &config);
            assert!((a + b).abs() < 1e-9);
        }
    }

    #[test]
    fn nonfinite_proposal_is_rejected() {
        struct HalfLine;
        impl TargetDensity for HalfLine {
            fn dim(&self) -> usize {
                1
            }
            fn log_density(&self, x: &[f64]) -> f64 {
                if x[0] < 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -x[0]
                }
            }
            fn grad_log_density(&self, _: &[f64]) -> Vec<f64> {
                vec![-1.0]
            }
        }
        let config = KernelConfig::rwmh(1.0).unwrap();
        assert_eq!(
            log_hastings_ratio(&HalfLine, &[1.0], &[-1.0], &config),
            f64::NEG_INFINITY
        );
        let mut rng = chain_rng(3);
        for _ in 0..200 {
            let step = mh_step(&mut rng, &HalfLine, &[0.1], &config);
            assert!(step.next[0] >= 0.0);
            assert!(!step.accepted || step.log_hastings_ratio > f64::NEG_INFINITY);
        }
    }

    #[test]
    fn rejected_steps_leave_state_untouched() {
        let target = Gaussian::standard(3);
        let config = KernelConfig::dmh(0.5, 2.0, 4.0).unwrap();
        let mut rng = chain_rng(8);
        let x = vec![0.1, -0.2, 0.3];
        let mut rejected = 0;
        for _ in 0..500 {
            let step = mh_step(&mut rng, &target, &x, &config);
            if step.log_hastings_ratio >= 0.0 {
                assert!(step.accepted);
            }
            if !step.accepted {
                rejected += 1;
                assert_eq!(step.next, x);
            }
        }
        assert!(rejected > 0);
    }

    #[test]
    fn dmh_reduces_to_mala_and_rwmh_bitwise() {
        let banana = Banana::new(0.03, 2).unwrap();
        let h = 0.3;
        let len = RunLength::steps(1000).unwrap();
        let a = run_chain(77, &banana, &KernelConfig::dmh(h, 1.0, h * h).unwrap(), &[1.0, 1.0], len)
            .unwrap();
        let b = run_chain(77, &banana, &KernelConfig::mala(h).unwrap(), &[1.0, 1.0], len).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.accepted, b.accepted);

        let a = run_chain(5, &banana, &KernelConfig::dmh(0.0, 1.0, 2.0).unwrap(), &[1.0, 1.0], len)
            .unwrap();
        let b = run_chain(5, &banana, &KernelConfig::rwmh(2.0).unwrap(), &[1.0, 1.0], len).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.accepted, b.accepted);
    }

    #[test]
    fn one_dimensional_rwmh_acceptance_pin() {
        let target = Gaussian::standard(1);
        let config = KernelConfig::rwmh(5.76).unwrap();
        let chain = run_chain(2024, &target, &config, &[0.0], RunLength::steps(100_000).unwrap())
            .unwrap();
        let rate = chain.acceptance_rate();
        assert!((rate - 0.44).abs() < 0.03, "{rate}");
    }

    #[test]
    fn run_chain_contracts() {
        let target = Gaussian::standard(2);
        let config = KernelConfig::dmh(0.5, 1.0, 0.25).unwrap();
        let len = RunLength::steps(500).unwrap();
        let a = run_chain(9, &target, &config, &[0.0, 0.0], len).unwrap();
        let b = run_chain(9, &target, &config, &[0.0, 0.0], len).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 500);
        assert_eq!(a.accepted.len(), 500);

        let c = run_chain(9, &target, &config, &[0.0, 0.0], RunLength::new(500, 100, 4).unwrap())
            .unwrap();
        assert_eq!(c.len(), 100);
        assert_eq!(c.states[0], a.states[103]);

        for w in a.states.windows(2).zip(&a.accepted[1..]) {
            if !w.1 {
                assert_eq!(w.0[0], w.0[1]);
            }
        }
        assert!(RunLength::new(10, 10, 1).is_err());
        assert!(RunLength::new(10, 0, 0).is_err());
    }

    #[test]
    fn invalid_start_is_reported() {
        let target = Gaussian::standard(2);
        let config = KernelConfig::rwmh(1.0).unwrap();
        let len = RunLength::steps(10).unwrap();
        assert!(matches!(
            run_chain(1, &target, &config, &[f64::NAN, 0.0], len),
            Err(Error::InvalidStart)
        ));
        assert!(matches!(
            run_chain(1, &target, &config, &[0.0], len),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn standard_normal_moments() {
        let target = Gaussian::standard(2);
        let config = KernelConfig::dmh(0.5, 1.0, 0.25).unwrap();
        let chain = run_chain(31, &target, &config, &[0.0, 0.0], RunLength::steps(100_000).unwrap())
            .unwrap();
        let n = chain.len() as f64;
        for j in 0..2 {
            let mean = chain.states.iter().map(|s| s[j]).sum::<f64>() / n;
            let var = chain.states.iter().map(|s| (s[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!(mean.abs() < 0.05, "mean {mean}");
            assert!((0.85..=1.15).contains(&var), "var {var}");
        }
    }

    #[test]
    fn preset_validation() {
        let shape = ProposalShape::new(0.1, 1.0, 1.0).unwrap();
        assert!(KernelConfig::new(Flavor::Rwmh, shape, GradientMode::Analytic).is_err());
        let shape = ProposalShape::new(0.1, 2.0, 1.0).unwrap();
        assert!(KernelConfig::new(Flavor::Mala, shape, GradientMode::Analytic).is_err());
        assert!(KernelConfig::dmh(0.1, 0.0, 1.0).is_err());
        assert!(KernelConfig::dmh(0.1, 1.0, 1.0)
            .unwrap()
            .with_gradient_mode(GradientMode::Numeric { step: 0.0 })
            .is_err());
    }

    #[test]
    fn numeric_gradient_mode_tracks_analytic() {
        let banana = Banana::new(0.03, 2).unwrap();
        let analytic = KernelConfig::dmh(0.2, 0.5, 1.0).unwrap();
        let numeric = analytic
            .with_gradient_mode(GradientMode::Numeric { step: 1e-5 })
            .unwrap();
        let (x, y) = ([2.0, 1.0], [1.5, 2.5]);
        let a = log_hastings_ratio(&banana, &x, &y, &analytic);
        let b = log_hastings_ratio(&banana, &x, &y, &numeric);
        assert!((a - b).abs() < 1e-6);
    }
}
