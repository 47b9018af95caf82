//! Batchwise adaptation of the global proposal scale.
//!
//! After every batch of `B` steps the log standard deviation moves up by
//! `δ(b) = min(0.01, b^{-1/2})` when the batch acceptance fraction reached the
//! target rate and down by `δ(b)` otherwise, then is clamped to `[−M, M]`.
//! The adapted `σ` replaces `√t`; `h` and `s` stay fixed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{chain_rng, start_point, transition, Chain, KernelConfig, RunLength};
use crate::targets::TargetDensity;

/// Step-size schedule for the log-scale updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum DeltaSchedule {
    /// `min(0.01, b^{-1/2})`.
    #[default]
    Standard,
    /// `δ ≡ 0`: the scale never moves.
    Frozen,
}

pub fn delta(b: u64) -> Result<f64> {
    if b < 1 {
        return Err(Error::InvalidBatchIndex(b));
    }
    Ok(0.01f64.min((b as f64).powf(-0.5)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptState {
    /// 1-based index of the batch about to be scored.
    pub batch: u64,
    pub log_sigma: f64,
    pub clamp: f64,
    pub target_rate: f64,
    pub batch_size: usize,
    pub schedule: DeltaSchedule,
}

impl AdaptState {
    pub fn new(log_sigma: f64, clamp: f64, target_rate: f64, batch_size: usize) -> Result<Self> {
        if !(clamp.is_finite() && clamp > 0.0) {
            return Err(Error::InvalidShape(format!("clamp M must be > 0, got {clamp}")));
        }
        if !(target_rate > 0.0 && target_rate < 1.0) {
            return Err(Error::InvalidShape(format!(
                "target acceptance rate must lie in (0, 1), got {target_rate}"
            )));
        }
        if batch_size == 0 {
            return Err(Error::InvalidShape("batch size must be >= 1".into()));
        }
        if !log_sigma.is_finite() {
            return Err(Error::InvalidShape("initial log sigma must be finite".into()));
        }
        Ok(AdaptState {
            batch: 1,
            log_sigma: log_sigma.clamp(-clamp, clamp),
            clamp,
            target_rate,
            batch_size,
            schedule: DeltaSchedule::Standard,
        })
    }

    pub fn frozen(mut self) -> Self {
        self.schedule = DeltaSchedule::Frozen;
        self
    }

    pub fn sigma(&self) -> f64 {
        self.log_sigma.exp()
    }

    /// Variance scale `t = σ²` implied by the current state.
    pub fn variance_scale(&self) -> f64 {
        (2.0 * self.log_sigma).exp()
    }

    fn step_size(&self) -> f64 {
        match self.schedule {
            DeltaSchedule::Standard => delta(self.batch.max(1)).unwrap_or(0.0),
            DeltaSchedule::Frozen => 0.0,
        }
    }
}

pub fn update_scale(state: &AdaptState, batch_acceptance: f64) -> AdaptState {
    let step = state.step_size();
    let moved = if batch_acceptance >= state.target_rate {
        state.log_sigma + step
    } else {
        state.log_sigma - step
    };
    AdaptState {
        batch: state.batch + 1,
        log_sigma: moved.clamp(-state.clamp, state.clamp),
        ..*state
    }
}

/// One row of the adaptation trace: the scale used during a batch and the
/// acceptance fraction it produced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptRecord {
    pub batch_index: u64,
    pub log_sigma: f64,
    pub batch_acceptance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveRun {
    pub chain: Chain,
    pub trace: Vec<AdaptRecord>,
    pub final_state: AdaptState,
}

impl AdaptiveRun {
    /// Mean acceptance over the last `k` complete batches.
    pub fn trailing_acceptance(&self, k: usize) -> f64 {
        let tail = &self.trace[self.trace.len().saturating_sub(k)..];
        tail.iter().map(|r| r.batch_acceptance).sum::<f64>() / tail.len().max(1) as f64
    }
}

/// Run the kernel with `t` replaced by `exp(2·log_sigma)`, updating
/// `log_sigma` at every batch boundary from that batch's raw acceptance.
pub fn run_adaptive_chain<T: TargetDensity + ?Sized>(
    seed: u64,
    target: &T,
    config: &KernelConfig,
    adapt: AdaptState,
    x0: &[f64],
    length: RunLength,
) -> Result<AdaptiveRun> {
    if length.n_steps < adapt.batch_size {
        return Err(Error::InvalidRunLength(format!(
            "n_steps ({}) must be at least the batch size ({})",
            length.n_steps, adapt.batch_size
        )));
    }
    let mut current = start_point(target, config, x0)?;
    let mut rng = chain_rng(seed);
    let mut state = adapt;
    let mut shape = config.shape;
    shape.t = state.variance_scale();

    let mut states = Vec::with_capacity((length.n_steps - length.burn_in) / length.thin);
    let mut accepted = Vec::with_capacity(length.n_steps);
    let mut trace = Vec::with_capacity(length.n_steps / adapt.batch_size);
    let mut in_batch = 0usize;

    for i in 1..=length.n_steps {
        let (acc, _) = transition(&mut rng, target, config, &shape, &mut current);
        accepted.push(acc);
        in_batch += usize::from(acc);
        if length.keeps(i) {
            states.push(current.x.clone());
        }
        if i % state.batch_size == 0 {
            let rate = in_batch as f64 / state.batch_size as f64;
            trace.push(AdaptRecord {
                batch_index: state.batch,
                log_sigma: state.log_sigma,
                batch_acceptance: rate,
            });
            state = update_scale(&state, rate);
            shape.t = state.variance_scale();
            in_batch = 0;
        }
    }
    Ok(AdaptiveRun {
        chain: Chain {
            states,
            accepted,
            seed,
            config: *config,
        },
        trace,
        final_state: state,
    })
}
