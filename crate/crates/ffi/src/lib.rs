//! C ABI over the `dirmh` sampler.
//!
//! Targets and chains are opaque handles created by `dirmh_*` constructors
//! and released with the matching `*_free`. Every fallible call returns a
//! [`DirmhStatus`]; the message for the most recent failure on the calling
//! thread is available from [`dirmh_last_error`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use dirmh::adaptive::{run_adaptive_chain, AdaptRecord, AdaptState};
use dirmh::diagnostics::{drift_ratio_estimate, DiagnosticsReport};
use dirmh::kernels::{run_chain, Chain, Flavor, GradientMode, KernelConfig, RunLength};
use dirmh::proposal::ProposalShape;
use dirmh::targets::{Banana, Family, Gaussian, GlmData, GlmPosterior, TargetDensity};
use dirmh::Error;
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirmhStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidStart = 3,
    DimensionMismatch = 4,
    BufferTooSmall = 5,
    Numeric = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirmhFlavor {
    Dmh = 0,
    Mala = 1,
    Rwmh = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DirmhFamily {
    Normal = 0,
    Bernoulli = 1,
    Poisson = 2,
}

/// Kernel tuning passed by value. `numeric_step > 0` switches to
/// central-difference gradients with that step.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DirmhKernel {
    pub flavor: DirmhFlavor,
    pub h: f64,
    pub s: f64,
    pub t: f64,
    pub numeric_step: f64,
}

/// Scalar diagnostics; undefined estimates are NaN.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct DirmhSummary {
    pub acceptance_rate: f64,
    pub mess: f64,
    pub msjd: f64,
    pub n: usize,
}

pub struct DirmhTarget {
    inner: Box<dyn TargetDensity>,
}

pub struct DirmhChain {
    chain: Chain,
    trace: Vec<AdaptRecord>,
}

struct Failure(DirmhStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidStart => DirmhStatus::InvalidStart,
            Error::DimensionMismatch { .. } => DirmhStatus::DimensionMismatch,
            Error::Io { .. } | Error::Csv(_) | Error::Json(_) => DirmhStatus::Io,
            Error::InvalidGradient
            | Error::ConstantSeries
            | Error::SingularEstimate
            | Error::OracleFailure => DirmhStatus::Numeric,
            _ => DirmhStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(DirmhStatus::NullPointer, format!("{what} is null"))
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let text = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> DirmhStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DirmhStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(_) => {
            set_last_error("panic inside dirmh".into());
            DirmhStatus::Panic
        }
    }
}

unsafe fn input<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(ptr, len))
}

unsafe fn output<'a>(ptr: *mut f64, len: usize, what: &str) -> Result<&'a mut [f64], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts_mut(ptr, len))
}

unsafe fn target_ref<'a>(target: *const DirmhTarget) -> Result<&'a DirmhTarget, Failure> {
    target.as_ref().ok_or_else(|| null("target"))
}

unsafe fn chain_ref<'a>(chain: *const DirmhChain) -> Result<&'a DirmhChain, Failure> {
    chain.as_ref().ok_or_else(|| null("chain"))
}

fn kernel_config(k: &DirmhKernel) -> Result<KernelConfig, Failure> {
    let flavor = match k.flavor {
        DirmhFlavor::Dmh => Flavor::Dmh,
        DirmhFlavor::Mala => Flavor::Mala,
        DirmhFlavor::Rwmh => Flavor::Rwmh,
    };
    let mode = if k.numeric_step > 0.0 {
        GradientMode::Numeric {
            step: k.numeric_step,
        }
    } else {
        GradientMode::Analytic
    };
    let shape = ProposalShape::new(k.h, k.s, k.t)?;
    Ok(KernelConfig::new(flavor, shape, mode)?)
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dirmh_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub unsafe extern "C" fn dirmh_target_banana(
    bananacity: f64,
    dim: usize,
    out: *mut *mut DirmhTarget,
) -> DirmhStatus {
    guard(|| {
        let inner = Box::new(Banana::new(bananacity, dim)?);
        store(out, DirmhTarget { inner })
    })
}

/// Gaussian target; `cov` is `dim × dim`, row-major.
#[no_mangle]
pub unsafe extern "C" fn dirmh_target_gaussian(
    mean: *const f64,
    cov: *const f64,
    dim: usize,
    out: *mut *mut DirmhTarget,
) -> DirmhStatus {
    guard(|| {
        if dim == 0 {
            return Err(Failure(DirmhStatus::InvalidArgument, "dim must be >= 1".into()));
        }
        let mean = input(mean, dim, "mean")?.to_vec();
        let cov = input(cov, dim * dim, "cov")?;
        let inner = Box::new(Gaussian::new(mean, DMatrix::from_row_slice(dim, dim, cov))?);
        store(out, DirmhTarget { inner })
    })
}

/// GLM posterior over `(β, u)`; `x` is `n × p`, row-major.
#[no_mangle]
pub unsafe extern "C" fn dirmh_target_glm(
    x: *const f64,
    y: *const f64,
    n: usize,
    p: usize,
    family: DirmhFamily,
    dispersion: f64,
    v_beta: f64,
    v_u: f64,
    out: *mut *mut DirmhTarget,
) -> DirmhStatus {
    guard(|| {
        let x = input(x, n * p, "x")?.to_vec();
        let y = input(y, n, "y")?.to_vec();
        let family = match family {
            DirmhFamily::Normal => Family::Normal,
            DirmhFamily::Bernoulli => Family::Bernoulli,
            DirmhFamily::Poisson => Family::Poisson,
        };
        let data = GlmData::with_constant_dispersion(x, y, p, family, dispersion, v_beta, v_u)?;
        store(
            out,
            DirmhTarget {
                inner: Box::new(GlmPosterior::new(data)),
            },
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn dirmh_target_free(target: *mut DirmhTarget) {
    if !target.is_null() {
        drop(Box::from_raw(target));
    }
}

/// Dimension of the target, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dirmh_target_dim(target: *const DirmhTarget) -> usize {
    target.as_ref().map_or(0, |t| t.inner.dim())
}

#[no_mangle]
pub unsafe extern "C" fn dirmh_target_log_density(
    target: *const DirmhTarget,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> DirmhStatus {
    guard(|| {
        let t = target_ref(target)?;
        check_dim(t, len)?;
        let x = input(x, len, "x")?;
        let out = output(out, 1, "out")?;
        out[0] = t.inner.log_density(x);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn dirmh_target_grad(
    target: *const DirmhTarget,
    x: *const f64,
    len: usize,
    grad: *mut f64,
) -> DirmhStatus {
    guard(|| {
        let t = target_ref(target)?;
        check_dim(t, len)?;
        let x = input(x, len, "x")?;
        let grad = output(grad, len, "grad")?;
        grad.copy_from_slice(&t.inner.grad_log_density(x));
        Ok(())
    })
}

fn check_dim(t: &DirmhTarget, len: usize) -> Result<(), Failure> {
    if len != t.inner.dim() {
        return Err(Error::DimensionMismatch {
            expected: t.inner.dim(),
            got: len,
        }
        .into());
    }
    Ok(())
}

#[no_mangle]
pub unsafe extern "C" fn dirmh_run_chain(
    target: *const DirmhTarget,
    kernel: DirmhKernel,
    seed: u64,
    x0: *const f64,
    len: usize,
    n_steps: usize,
    burn_in: usize,
    thin: usize,
    out: *mut *mut DirmhChain,
) -> DirmhStatus {
    guard(|| {
        let t = target_ref(target)?;
        let x0 = input(x0, len, "x0")?;
        let config = kernel_config(&kernel)?;
        let length = RunLength::new(n_steps, burn_in, thin)?;
        let chain = run_chain(seed, t.inner.as_ref(), &config, x0, length)?;
        store(
            out,
            DirmhChain {
                chain,
                trace: Vec::new(),
            },
        )
    })
}

/// As [`dirmh_run_chain`], with `t` replaced by `exp(2·log_sigma)` and
/// `log_sigma` adapted every `batch_size` steps toward `target_rate`.
#[no_mangle]
pub unsafe extern "C" fn dirmh_run_adaptive_chain(
    target: *const DirmhTarget,
    kernel: DirmhKernel,
    seed: u64,
    x0: *const f64,
    len: usize,
    n_steps: usize,
    burn_in: usize,
    thin: usize,
    log_sigma: f64,
    clamp: f64,
    target_rate: f64,
    batch_size: usize,
    out: *mut *mut DirmhChain,
) -> DirmhStatus {
    guard(|| {
        let t = target_ref(target)?;
        let x0 = input(x0, len, "x0")?;
        let config = kernel_config(&kernel)?;
        let length = RunLength::new(n_steps, burn_in, thin)?;
        let state = AdaptState::new(log_sigma, clamp, target_rate, batch_size)?;
        let run = run_adaptive_chain(seed, t.inner.as_ref(), &config, state, x0, length)?;
        store(
            out,
            DirmhChain {
                chain: run.chain,
                trace: run.trace,
            },
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn dirmh_chain_free(chain: *mut DirmhChain) {
    if !chain.is_null() {
        drop(Box::from_raw(chain));
    }
}

/// Number of stored states, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dirmh_chain_len(chain: *const DirmhChain) -> usize {
    chain.as_ref().map_or(0, |c| c.chain.len())
}

#[no_mangle]
pub unsafe extern "C" fn dirmh_chain_dim(chain: *const DirmhChain) -> usize {
    chain.as_ref().map_or(0, |c| c.chain.dim())
}

/// Fraction of accepted proposals over all steps; NaN for a null handle.
#[no_mangle]
pub unsafe extern "C" fn dirmh_chain_acceptance_rate(chain: *const DirmhChain) -> f64 {
    chain.as_ref().map_or(f64::NAN, |c| c.chain.acceptance_rate())
}

/// Copy the stored states, row-major, into `buf` of length `len × dim`.
#[no_mangle]
pub unsafe extern "C" fn dirmh_chain_states(
    chain: *const DirmhChain,
    buf: *mut f64,
    buf_len: usize,
) -> DirmhStatus {
    guard(|| {
        let c = chain_ref(chain)?;
        let need = c.chain.len() * c.chain.dim();
        if buf_len < need {
            return Err(Failure(
                DirmhStatus::BufferTooSmall,
                format!("need {need} values, buffer holds {buf_len}"),
            ));
        }
        let buf = output(buf, need, "buf")?;
        for (dst, row) in buf.chunks_exact_mut(c.chain.dim().max(1)).zip(&c.chain.states) {
            dst.copy_from_slice(row);
        }
        Ok(())
    })
}

/// Number of adaptation batches recorded (0 for non-adaptive chains).
#[no_mangle]
pub unsafe extern "C" fn dirmh_chain_batches(chain: *const DirmhChain) -> usize {
    chain.as_ref().map_or(0, |c| c.trace.len())
}

/// Per-batch `log_sigma` in force and the batch's acceptance rate.
#[no_mangle]
pub unsafe extern "C" fn dirmh_chain_adaptation(
    chain: *const DirmhChain,
    log_sigma: *mut f64,
    acceptance: *mut f64,
    len: usize,
) -> DirmhStatus {
    guard(|| {
        let c = chain_ref(chain)?;
        if len < c.trace.len() {
            return Err(Failure(
                DirmhStatus::BufferTooSmall,
                format!("need {} values, buffer holds {len}", c.trace.len()),
            ));
        }
        let ls = output(log_sigma, c.trace.len(), "log_sigma")?;
        let acc = output(acceptance, c.trace.len(), "acceptance")?;
        for (i, r) in c.trace.iter().enumerate() {
            ls[i] = r.log_sigma;
            acc[i] = r.batch_acceptance;
        }
        Ok(())
    })
}

/// Diagnostics of the stored states. `batch_size == 0` selects `⌊√n⌋`.
/// `ess` and `iact` must hold `dim` values each; undefined entries are NaN.
#[no_mangle]
pub unsafe extern "C" fn dirmh_chain_diagnostics(
    chain: *const DirmhChain,
    batch_size: usize,
    summary: *mut DirmhSummary,
    ess: *mut f64,
    iact: *mut f64,
    dim: usize,
) -> DirmhStatus {
    guard(|| {
        let c = chain_ref(chain)?;
        if dim != c.chain.dim() {
            return Err(Error::DimensionMismatch {
                expected: c.chain.dim(),
                got: dim,
            }
            .into());
        }
        let summary = summary.as_mut().ok_or_else(|| null("summary"))?;
        let ess = output(ess, dim, "ess")?;
        let iact = output(iact, dim, "iact")?;
        let batch = (batch_size > 0).then_some(batch_size);
        let report = DiagnosticsReport::compute(&c.chain.states, c.chain.acceptance_rate(), batch)?;
        *summary = DirmhSummary {
            acceptance_rate: report.acceptance_rate,
            mess: report.mess.unwrap_or(f64::NAN),
            msjd: report.msjd,
            n: report.n,
        };
        for j in 0..dim {
            ess[j] = report.ess[j].unwrap_or(f64::NAN);
            iact[j] = report.iact[j].unwrap_or(f64::NAN);
        }
        Ok(())
    })
}

/// Monte-Carlo estimate of `E[exp(τ(‖X₁‖ − ‖x‖))]` from `n_mc` single steps.
#[no_mangle]
pub unsafe extern "C" fn dirmh_drift_ratio(
    target: *const DirmhTarget,
    kernel: DirmhKernel,
    x: *const f64,
    len: usize,
    tau: f64,
    n_mc: usize,
    seed: u64,
    mean: *mut f64,
    std_error: *mut f64,
) -> DirmhStatus {
    guard(|| {
        let t = target_ref(target)?;
        let x = input(x, len, "x")?;
        let config = kernel_config(&kernel)?;
        let mean = output(mean, 1, "mean")?;
        let se = output(std_error, 1, "std_error")?;
        let est = drift_ratio_estimate(t.inner.as_ref(), &config, x, tau, n_mc, seed)?;
        mean[0] = est.mean;
        se[0] = est.std_error;
        Ok(())
    })
}
