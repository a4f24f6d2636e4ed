//! C ABI over the `lcra` crate.
//!
//! Objects cross the boundary as opaque handles created by `*_new` /
//! `*_parse` and released by the matching `*_free`. Fallible calls return an
//! [`LcraStatus`]; the message of the most recent failure on the calling
//! thread is available from [`lcra_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lcra::design::{beta, plan_power_levels, PowerPlan};
use lcra::detect::{Detector, SicOptions};
use lcra::harness::{run_point, SweepVariable};
use lcra::model::SystemConfig;
use lcra::stats::chi2_cdf;
use lcra::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LcraStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Domain = 4,
    Precondition = 5,
    Overflow = 6,
    Infeasible = 7,
    Usage = 8,
    Io = 9,
    Parse = 10,
    /// Output buffer shorter than the number of layers.
    BufferTooSmall = 11,
    /// A Rust panic was caught at the boundary.
    Panic = 12,
}

/// Parsed system configuration.
pub struct LcraConfig(SystemConfig);

/// Feasible power plan.
pub struct LcraPlan(PowerPlan);

/// One layer of a power plan.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LcraLayerLevel {
    /// Receive power.
    pub v: f64,
    /// Noise plus residual interference seen by the layer.
    pub sigma2: f64,
    /// Post-MMSE SIR.
    pub gamma: f64,
    /// Outer radius of the ring.
    pub radius: f64,
    /// Transmit power at the ring edge.
    pub tx: f64,
    pub kappa: f64,
    pub rho: f64,
}

/// Detector settings for [`lcra_simulate`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LcraSimOptions {
    pub n_trials: usize,
    /// CAVI sweeps per layer; 0 selects the exhaustive MAP detector.
    pub cavi_sweeps: usize,
    /// Detect exactly the true number of active devices.
    pub known_b: bool,
}

/// Mean error counts over the trials of a simulation.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LcraMetrics {
    pub mean_md: f64,
    pub mean_fa: f64,
    /// Standard error of the mean of `md + fa`.
    pub stderr: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> LcraStatus {
    match err {
        Error::Config { .. } => LcraStatus::Config,
        Error::Domain(_) => LcraStatus::Domain,
        Error::Precondition(_) => LcraStatus::Precondition,
        Error::Overflow(_) => LcraStatus::Overflow,
        Error::Infeasible(_) => LcraStatus::Infeasible,
        Error::Usage(_) => LcraStatus::Usage,
        Error::Io { .. } => LcraStatus::Io,
        Error::Parse { .. } => LcraStatus::Parse,
    }
}

/// Runs `body` with panics caught, recording any failure message.
fn guard(body: impl FnOnce() -> Result<(), (LcraStatus, String)>) -> LcraStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => LcraStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside lcra".into());
            LcraStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (LcraStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (LcraStatus, String) {
    (LcraStatus::NullPointer, format!("{what} is NULL"))
}

/// Message of the last failed call on this thread, or NULL if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lcra_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// The default three-layer configuration. Never NULL.
#[no_mangle]
pub extern "C" fn lcra_config_default() -> *mut LcraConfig {
    Box::into_raw(Box::new(LcraConfig(SystemConfig::default())))
}

/// Parses a flat `key = value` configuration.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lcra_config_parse(text: *const c_char, out: *mut *mut LcraConfig) -> LcraStatus {
    guard(|| {
        if text.is_null() {
            return Err(null("text"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CStr::from_ptr(text)
            .to_str()
            .map_err(|e| (LcraStatus::InvalidUtf8, e.to_string()))?;
        let cfg = SystemConfig::from_kv_str(s).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(LcraConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `cfg` must come from this library and not be used afterwards. NULL is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn lcra_config_free(cfg: *mut LcraConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Layer count `Q`, or 0 for NULL.
///
/// # Safety
/// `cfg` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lcra_config_num_layers(cfg: *const LcraConfig) -> usize {
    cfg.as_ref().map_or(0, |c| c.0.q)
}

/// Overrides the configuration seed.
///
/// # Safety
/// `cfg` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn lcra_config_set_seed(cfg: *mut LcraConfig, seed: u64) -> LcraStatus {
    guard(|| {
        let c = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        c.0.seed = seed;
        Ok(())
    })
}

/// Computes the power plan. Fails with `LCRA_STATUS_INFEASIBLE` when the
/// target SNR cannot be met.
///
/// # Safety
/// `cfg` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lcra_plan_new(cfg: *const LcraConfig, out: *mut *mut LcraPlan) -> LcraStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let plan = plan_power_levels(&c.0);
        if !plan.feasible {
            return Err((LcraStatus::Infeasible, "target SNR cannot be met".into()));
        }
        *out = Box::into_raw(Box::new(LcraPlan(plan)));
        Ok(())
    })
}

/// # Safety
/// `plan` must come from this library and not be used afterwards. NULL is a
/// no-op.
#[no_mangle]
pub unsafe extern "C" fn lcra_plan_free(plan: *mut LcraPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// # Safety
/// `plan` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lcra_plan_num_layers(plan: *const LcraPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.0.layers.len())
}

/// Copies layer `index` (0 = strongest) into `out`.
///
/// # Safety
/// `plan` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lcra_plan_layer(
    plan: *const LcraPlan,
    index: usize,
    out: *mut LcraLayerLevel,
) -> LcraStatus {
    guard(|| {
        let p = plan.as_ref().ok_or_else(|| null("plan"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let l = p.0.layers.get(index).ok_or_else(|| {
            (
                LcraStatus::Precondition,
                format!("layer {index} out of range for {} layers", p.0.layers.len()),
            )
        })?;
        *out = LcraLayerLevel {
            v: l.v,
            sigma2: l.sigma2,
            gamma: l.gamma,
            radius: l.radius,
            tx: l.tx,
            kappa: l.kappa,
            rho: l.rho,
        };
        Ok(())
    })
}

/// Large-system MMSE SIR at SNR `gamma` and load `kappa`; NaN outside the
/// domain.
#[no_mangle]
pub extern "C" fn lcra_beta(gamma: f64, kappa: f64) -> f64 {
    if gamma >= 0.0 && kappa >= 0.0 && gamma.is_finite() && kappa.is_finite() {
        beta(gamma, kappa)
    } else {
        f64::NAN
    }
}

/// Chi-squared CDF with `dof` degrees of freedom.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn lcra_chi2_cdf(dof: u32, x: f64, out: *mut f64) -> LcraStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = chi2_cdf(dof, x).map_err(lib_err)?;
        Ok(())
    })
}

/// Monte Carlo run of the SIC pipeline. Writes one entry per layer into
/// `layers` (which must hold at least `Q` entries) and the sum over layers
/// into `total`. Reproducible for a given configuration seed.
///
/// # Safety
/// `cfg` must be a live handle, `layers` must point to `capacity` writable
/// entries and `total` must be valid.
#[no_mangle]
pub unsafe extern "C" fn lcra_simulate(
    cfg: *const LcraConfig,
    options: LcraSimOptions,
    layers: *mut LcraMetrics,
    capacity: usize,
    total: *mut LcraMetrics,
) -> LcraStatus {
    guard(|| {
        let c = cfg.as_ref().ok_or_else(|| null("cfg"))?;
        if layers.is_null() {
            return Err(null("layers"));
        }
        let total = total.as_mut().ok_or_else(|| null("total"))?;
        if capacity < c.0.q {
            return Err((
                LcraStatus::BufferTooSmall,
                format!("need {} layer entries, got {capacity}", c.0.q),
            ));
        }
        if options.n_trials == 0 {
            return Err((LcraStatus::Precondition, "n_trials must be at least 1".into()));
        }
        let detector = match options.cavi_sweeps {
            0 => Detector::Map,
            sweeps => Detector::Cavi { sweeps },
        };
        let opts = SicOptions {
            detector,
            known_b: options.known_b,
            ..SicOptions::default()
        };
        let row = run_point(&c.0, opts, options.n_trials, SweepVariable::Rho, c.0.rho[0], 0).map_err(lib_err)?;
        if !row.feasible {
            return Err((LcraStatus::Infeasible, "target SNR cannot be met".into()));
        }
        let out = std::slice::from_raw_parts_mut(layers, capacity);
        for (dst, m) in out.iter_mut().zip(&row.layers) {
            *dst = LcraMetrics {
                mean_md: m.mean_md,
                mean_fa: m.mean_fa,
                stderr: m.stderr,
            };
        }
        *total = LcraMetrics {
            mean_md: row.total.mean_md,
            mean_fa: row.total.mean_fa,
            stderr: row.total.stderr,
        };
        Ok(())
    })
}
