//! Directional Metropolis–Hastings.
//!
//! A Metropolis–Hastings sampler whose Gaussian proposal at `x` is centred at
//! `x + h∇log f(x)` with covariance `t·(I + (s − 1)·g gᵀ)`, where `g` is the
//! unit gradient direction. `s` stretches or squeezes the proposal along the
//! gradient; `s = 1` gives MALA and additionally `h = 0` gives the random
//! walk. The crate also ships a batchwise scale-adaptive variant, benchmark
//! targets (Gaussian, banana, exponential-family GLM posteriors), chain
//! diagnostics, and the experiment driver behind the `dirmh` binary.
//!
//! ```
//! use dirmh::kernels::{run_chain, KernelConfig, RunLength};
//! use dirmh::targets::Banana;
//!
//! let target = Banana::new(0.03, 2).unwrap();
//! let config = KernelConfig::dmh(0.1, 0.5, 1.0).unwrap();
//! let chain = run_chain(42, &target, &config, &[0.0, 3.0], RunLength::steps(2000).unwrap()).unwrap();
//! assert_eq!(chain.len(), 2000);
//! ```

pub mod adaptive;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod kernels;
pub mod proposal;
pub mod targets;

pub use error::{Error, Result};
