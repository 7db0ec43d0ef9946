//! C ABI over the `dptr` decision core.
//!
//! Every function returns a [`DptrStatus`]. On failure a message is kept
//! per thread and can be copied out with [`dptr_last_error`]. Estimates live
//! behind an opaque [`DptrEstimates`] handle released with
//! [`dptr_estimates_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};

use dptr::data::ExperimentSample;
use dptr::error::{Error, ErrorKind};
use dptr::estimators::{design_factor, dm_estimate, AteEstimate};
use dptr::pipeline::config::RunConfig;
use dptr::pipeline::run::simulate;
use dptr::pooling::{self, OracleParams, PoolingPlan};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DptrStatus {
    Ok = 0,
    NullPointer = 1,
    ConfigError = 2,
    DataError = 3,
    NumericError = 4,
    /// Output buffer length does not match the number of experiments.
    BufferLength = 5,
    InvalidUtf8 = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DptrMethod {
    Iht = 0,
    Dptr = 1,
    DptrP = 2,
    Bayes = 3,
}

/// Opaque collection of per-experiment estimates.
pub struct DptrEstimates {
    alpha: f64,
    items: Vec<AteEstimate>,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> DptrStatus {
    set_error(e.to_string());
    match e.kind() {
        ErrorKind::Config => DptrStatus::ConfigError,
        ErrorKind::Data => DptrStatus::DataError,
        ErrorKind::Numeric => DptrStatus::NumericError,
    }
}

fn fail(status: DptrStatus, msg: &str) -> DptrStatus {
    set_error(msg.to_string());
    status
}

/// Runs `f`, mapping errors and panics to status codes.
fn guard<F: FnOnce() -> Result<(), DptrStatus>>(f: F) -> DptrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DptrStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(DptrStatus::Panic, "internal panic"),
    }
}

fn lift<T>(r: dptr::Result<T>) -> Result<T, DptrStatus> {
    r.map_err(|e| status_of(&e))
}

unsafe fn handle<'a>(h: *const DptrEstimates) -> Result<&'a DptrEstimates, DptrStatus> {
    h.as_ref().ok_or_else(|| fail(DptrStatus::NullPointer, "null estimates handle"))
}

unsafe fn handle_mut<'a>(h: *mut DptrEstimates) -> Result<&'a mut DptrEstimates, DptrStatus> {
    h.as_mut().ok_or_else(|| fail(DptrStatus::NullPointer, "null estimates handle"))
}

unsafe fn slice<'a, T>(p: *const T, len: usize) -> Result<&'a [T], DptrStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(DptrStatus::NullPointer, "null input array"));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn out_slice<'a, T>(p: *mut T, len: usize, expected: usize) -> Result<&'a mut [T], DptrStatus> {
    if len != expected {
        return Err(fail(
            DptrStatus::BufferLength,
            &format!("output buffer holds {len} values, expected {expected}"),
        ));
    }
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(DptrStatus::NullPointer, "null output array"));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn write<T>(out: *mut T, v: T) -> Result<(), DptrStatus> {
    if out.is_null() {
        return Err(fail(DptrStatus::NullPointer, "null output pointer"));
    }
    *out = v;
    Ok(())
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, DptrStatus> {
    if p.is_null() {
        return Err(fail(DptrStatus::NullPointer, "null string"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(DptrStatus::InvalidUtf8, "string is not valid UTF-8"))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len - 1` bytes). Returns the full message length.
///
/// # Safety
/// `buf` must be valid for `len` bytes or null.
#[no_mangle]
pub unsafe extern "C" fn dptr_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            std::ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dptr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an empty estimates collection with significance level `alpha`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn dptr_estimates_new(alpha: f64, out: *mut *mut DptrEstimates) -> DptrStatus {
    guard(|| {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(fail(DptrStatus::ConfigError, "alpha must lie in (0, 1)"));
        }
        let h = Box::new(DptrEstimates {
            alpha,
            items: Vec::new(),
        });
        write(out, Box::into_raw(h))
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `h` must come from [`dptr_estimates_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn dptr_estimates_free(h: *mut DptrEstimates) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Appends an estimate given its point value, variance `v` (so that the
/// standard error is `sqrt(v / n)`) and sample size. `b <= 0` means no
/// design factor.
///
/// # Safety
/// `h` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn dptr_estimates_push(
    h: *mut DptrEstimates,
    tau_hat: f64,
    v: f64,
    b: f64,
    n: usize,
) -> DptrStatus {
    guard(|| {
        let h = handle_mut(h)?;
        if n == 0 || !(v >= 0.0) || !tau_hat.is_finite() {
            return Err(fail(DptrStatus::DataError, "need n >= 1, v >= 0 and a finite estimate"));
        }
        let b = (b > 0.0).then_some(b);
        h.items.push(AteEstimate::from_variance(tau_hat, v, b, n, h.alpha));
        Ok(())
    })
}

/// Appends the difference-in-means estimate of one two-arm experiment;
/// `treated[i]` is 0 or 1.
///
/// # Safety
/// `h` must be a live handle; `y` and `treated` must hold `len` values.
#[no_mangle]
pub unsafe extern "C" fn dptr_estimates_push_dm(
    h: *mut DptrEstimates,
    y: *const f64,
    treated: *const u8,
    len: usize,
) -> DptrStatus {
    guard(|| {
        let h = handle_mut(h)?;
        let y = slice(y, len)?.to_vec();
        let d = slice(treated, len)?.iter().map(|&t| t != 0).collect();
        let sample = lift(ExperimentSample::new(y, d))?;
        let est = lift(dm_estimate(&sample, h.alpha))?;
        let b = lift(design_factor(&sample))?;
        h.items.push(est.with_b(b));
        Ok(())
    })
}

/// Number of experiments held.
///
/// # Safety
/// `h` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dptr_estimates_len(h: *const DptrEstimates, out: *mut usize) -> DptrStatus {
    guard(|| write(out, handle(h)?.items.len()))
}

/// Point estimate, variance and interval bounds of experiment `k` (0-based).
/// Any output pointer may be null.
///
/// # Safety
/// `h` must be a live handle; non-null outputs must be valid.
#[no_mangle]
pub unsafe extern "C" fn dptr_estimates_get(
    h: *const DptrEstimates,
    k: usize,
    tau_hat: *mut f64,
    v: *mut f64,
    lb: *mut f64,
    ub: *mut f64,
) -> DptrStatus {
    guard(|| {
        let e = handle(h)?
            .items
            .get(k)
            .ok_or_else(|| fail(DptrStatus::DataError, "experiment index out of range"))?;
        for (p, x) in [(tau_hat, e.tau_hat), (v, e.v), (lb, e.lb), (ub, e.ub)] {
            if !p.is_null() {
                *p = x;
            }
        }
        Ok(())
    })
}

/// Cross-experiment anchor: the mean point estimate.
///
/// # Safety
/// `h` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dptr_anchor(h: *const DptrEstimates, out: *mut f64) -> DptrStatus {
    guard(|| write(out, lift(pooling::anchor(&handle(h)?.items))?))
}

/// Shared data-driven scale for per-experiment sample size `n`.
///
/// # Safety
/// `h` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dptr_shared_beta(h: *const DptrEstimates, n: f64, out: *mut f64) -> DptrStatus {
    guard(|| {
        let h = handle(h)?;
        write(out, lift(pooling::shared_beta(&h.items, h.alpha, n))?.value)
    })
}

/// Personalized scales, one per experiment; every estimate needs a design
/// factor.
///
/// # Safety
/// `h` must be valid; `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn dptr_personalized_betas(
    h: *const DptrEstimates,
    n: f64,
    out: *mut f64,
    len: usize,
) -> DptrStatus {
    guard(|| {
        let h = handle(h)?;
        let betas = lift(pooling::personalized_betas(&h.items, h.alpha, n))?;
        let out = out_slice(out, len, betas.len())?;
        for (o, b) in out.iter_mut().zip(&betas) {
            *o = b.value;
        }
        Ok(())
    })
}

/// Oracle scale for known parameters and design factor `b` (2 for a
/// balanced two-arm design).
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn dptr_oracle_beta(
    tau0: f64,
    sigma0_sq: f64,
    sigma_sq: f64,
    n: f64,
    alpha: f64,
    b: f64,
    out: *mut f64,
) -> DptrStatus {
    guard(|| {
        let p = OracleParams {
            tau0,
            sigma0_sq,
            sigma_sq,
            n,
            alpha,
        };
        write(out, lift(pooling::oracle_beta_personalized(&p, b))?)
    })
}

/// Roll-out decision per experiment: `mask[k]` is set to 1 when experiment
/// `k` is selected and 0 otherwise. `n` is the per-experiment sample size
/// used by the data-driven scales.
///
/// # Safety
/// `h` must be valid; `mask` must hold `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn dptr_decide(
    h: *const DptrEstimates,
    method: DptrMethod,
    n: f64,
    mask: *mut u8,
    len: usize,
) -> DptrStatus {
    guard(|| {
        let h = handle(h)?;
        let est = &h.items;
        let decision = match method {
            DptrMethod::Iht => pooling::decide_iht(est),
            DptrMethod::Dptr => pooling::decide_dptr(est, &lift(PoolingPlan::shared(est, h.alpha, n))?),
            DptrMethod::DptrP => pooling::decide_dptr(est, &lift(PoolingPlan::personalized(est, h.alpha, n))?),
            DptrMethod::Bayes => lift(pooling::decide_bayes(est, h.alpha, n))?,
        };
        let out = out_slice(mask, len, est.len())?;
        for (o, selected) in out.iter_mut().zip(decision.mask()) {
            *o = u8::from(selected);
        }
        Ok(())
    })
}

/// Runs a synthetic simulation from TOML config text and writes its output
/// files under `out_dir` (overriding the config's output directory).
///
/// # Safety
/// Both strings must be valid NUL-terminated pointers.
#[no_mangle]
pub unsafe extern "C" fn dptr_simulate_toml(config_toml: *const c_char, out_dir: *const c_char) -> DptrStatus {
    guard(|| {
        let mut cfg = lift(RunConfig::from_toml(c_str(config_toml)?))?;
        cfg.output.dir = c_str(out_dir)?.to_string();
        if cfg.output.dir.is_empty() {
            return Err(fail(DptrStatus::ConfigError, "empty output directory"));
        }
        lift(simulate(&cfg, "dptr_simulate_toml"))?;
        Ok(())
    })
}
