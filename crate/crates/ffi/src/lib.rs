//! C interface to `bqc-core`.
//!
//! Every fallible function returns a [`BqcStatus`] and writes its result
//! through an out-pointer. On failure, [`bqc_last_error`] describes the most
//! recent error on the calling thread. Verifiable-function instances and
//! simulation results are opaque handles released with their `_free`
//! function. Strings returned by the library are released with
//! [`bqc_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use serde::Serialize;

use bqc_core::attacks::{evaluate_attack, AttackReport, AttackSpec, Coupling};
use bqc_core::bounds;
use bqc_core::protocol::{compare_to_bound, monte_carlo_with, BoundCheck, ProtocolConfig, RunStats, Variant};
use bqc_core::rvf::{RvfInstance, RvfKind};
use bqc_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BqcStatus {
    Ok = 0,
    NullPointer = 1,
    /// An argument lies outside the domain of the function.
    Domain = 2,
    InvalidArgument = 3,
    /// The requested operation is not available for these arguments.
    Unsupported = 4,
    Internal = 5,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BqcRvfKind {
    /// `S = {0, …, n−1}`, `f(q) = q`; parameter `a` is `n`.
    Toy = 0,
    /// Semiprimes of two `a`-bit primes.
    Factoring = 1,
    /// Isomorphic graph pairs on `a` vertices with `b` edges.
    GraphIso = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BqcAttackKind {
    Honest = 0,
    MeasureResend = 1,
    /// Uses `strength`.
    PartialMeasure = 2,
    /// Uses `ancilla_digits`; coherent copy of every round into the ancilla.
    EntanglingProbe = 3,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BqcVariant {
    Interactive = 0,
    Noninteractive = 1,
}

/// Single-round figures of merit of an attack.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BqcAttackReport {
    pub g: f64,
    pub f: f64,
    pub f_offdiagonal: f64,
}

/// Simulation parameters. `stop_on_detect` < 0 selects the variant default.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct BqcSimConfig {
    pub variant: BqcVariant,
    pub attack: BqcAttackKind,
    pub strength: f64,
    pub ancilla_digits: usize,
    pub decoys: usize,
    pub trials: usize,
    pub seed: u64,
    pub announce_position: bool,
    pub stop_on_detect: i32,
}

/// Headline numbers of a finished simulation.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BqcSummary {
    pub trials: usize,
    pub n: usize,
    pub detection: f64,
    pub detection_se: f64,
    pub guess_success: f64,
    pub guess_success_se: f64,
    pub mutual_info_bits: f64,
    pub mi_bias_allowance: f64,
    pub x_exposed_rate: f64,
    pub result_verified_rate: f64,
    pub bound_pass: bool,
}

/// Opaque verifiable-function instance.
pub struct BqcRvf {
    inner: RvfInstance,
}

/// Opaque simulation result.
pub struct BqcRun {
    report: RunReport,
}

#[derive(Serialize)]
struct RunReport {
    config: ProtocolConfig,
    attack: AttackSpec,
    stats: RunStats,
    attack_report: Option<AttackReport>,
    bound_check: BoundCheck,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior nuls removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BqcStatus {
    match e {
        Error::Domain { .. } => BqcStatus::Domain,
        Error::Unsupported(_) => BqcStatus::Unsupported,
        _ => BqcStatus::InvalidArgument,
    }
}

/// Runs `body`, converting errors and panics into status codes.
fn guard(body: impl FnOnce() -> Result<(), (BqcStatus, String)>) -> BqcStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => BqcStatus::Ok,
        Ok(Err((status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            BqcStatus::Internal
        }
    }
}

fn core<T>(r: bqc_core::Result<T>) -> Result<T, (BqcStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (BqcStatus, String) {
    (BqcStatus::NullPointer, format!("{what} is null"))
}

/// Writes `value` through `out`.
///
/// # Safety
/// `out` must be null or valid for writes.
unsafe fn write<T>(out: *mut T, value: T, what: &str) -> Result<(), (BqcStatus, String)> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

/// Message for the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn bqc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Largest decoy survival probability for estimation fidelity `g`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bqc_fidelity_bound(g: f64, n: usize, out: *mut f64) -> BqcStatus {
    guard(|| write(out, core(bounds::fidelity_bound(g, n))?, "out"))
}

/// Estimation fidelity matching `info` bits.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bqc_g_from_info(info: f64, n: usize, out: *mut f64) -> BqcStatus {
    guard(|| write(out, core(bounds::g_from_info(info, n))?, "out"))
}

/// Guaranteed detection probability with `decoys` decoys against an
/// adversary holding `info` bits.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bqc_detection_bound(info: f64, n: usize, decoys: usize, out: *mut f64) -> BqcStatus {
    guard(|| write(out, core(bounds::detection_bound(info, n, decoys))?, "out"))
}

/// `−log₂ g`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bqc_min_entropy(g: f64, out: *mut f64) -> BqcStatus {
    guard(|| write(out, core(bounds::min_entropy_lb(g))?, "out"))
}

fn rvf_kind(kind: BqcRvfKind, a: u32, b: u32) -> RvfKind {
    match kind {
        BqcRvfKind::Toy => RvfKind::Toy { n: a as usize },
        BqcRvfKind::Factoring => RvfKind::Factoring { bits: a },
        BqcRvfKind::GraphIso => RvfKind::GraphIso {
            vertices: a as usize,
            edges: b as usize,
        },
    }
}

/// Builds a verifiable-function instance. See [`BqcRvfKind`] for the meaning
/// of `a` and `b`. Release with [`bqc_rvf_free`].
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bqc_rvf_new(kind: BqcRvfKind, a: u32, b: u32, out: *mut *mut BqcRvf) -> BqcStatus {
    guard(|| {
        let inner = core(RvfInstance::new(rvf_kind(kind, a, b)))?;
        write(out, Box::into_raw(Box::new(BqcRvf { inner })), "out")
    })
}

/// Number of inputs `n`; 0 for a null handle.
///
/// # Safety
/// `rvf` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bqc_rvf_domain_size(rvf: *const BqcRvf) -> usize {
    rvf.as_ref().map_or(0, |r| r.inner.domain_size())
}

/// Dimension `m` of the output register; 0 for a null handle.
///
/// # Safety
/// `rvf` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bqc_rvf_output_size(rvf: *const BqcRvf) -> usize {
    rvf.as_ref().map_or(0, |r| r.inner.output_size())
}

/// # Safety
/// `rvf` must be null or a handle from [`bqc_rvf_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bqc_rvf_free(rvf: *mut BqcRvf) {
    if !rvf.is_null() {
        drop(Box::from_raw(rvf));
    }
}

fn attack_spec(kind: BqcAttackKind, strength: f64, digits: usize) -> AttackSpec {
    match kind {
        BqcAttackKind::Honest => AttackSpec::Honest,
        BqcAttackKind::MeasureResend => AttackSpec::MeasureResend,
        BqcAttackKind::PartialMeasure => AttackSpec::PartialMeasure { strength },
        BqcAttackKind::EntanglingProbe => AttackSpec::EntanglingProbe {
            digits,
            coupling: Coupling::ControlledCopy,
        },
    }
}

/// Exact single-round `(G, F)` of an ancilla-free attack on dimension `n`.
/// Returns [`BqcStatus::Unsupported`] for entangling probes.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bqc_evaluate_attack(
    kind: BqcAttackKind,
    strength: f64,
    n: usize,
    out: *mut BqcAttackReport,
) -> BqcStatus {
    guard(|| {
        let strategy = core(attack_spec(kind, strength, 1).build(n))?;
        let r = core(evaluate_attack(strategy.as_ref()))?;
        write(
            out,
            BqcAttackReport {
                g: r.g,
                f: r.f,
                f_offdiagonal: r.f_offdiagonal,
            },
            "out",
        )
    })
}

/// Monte-Carlo simulation of the protocol. Release the result with
/// [`bqc_run_free`].
///
/// # Safety
/// `rvf` must be a live handle, `config` readable and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bqc_simulate(
    rvf: *const BqcRvf,
    config: *const BqcSimConfig,
    out: *mut *mut BqcRun,
) -> BqcStatus {
    guard(|| {
        let rvf = rvf.as_ref().ok_or_else(|| null("rvf"))?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        if c.trials == 0 {
            return Err((BqcStatus::InvalidArgument, "trials must be at least 1".into()));
        }
        let variant = match c.variant {
            BqcVariant::Interactive => Variant::Interactive,
            BqcVariant::Noninteractive => Variant::Noninteractive,
        };
        let mut cfg = ProtocolConfig::new(rvf.inner.kind(), c.decoys, variant, c.seed);
        cfg.announce_position = c.announce_position;
        if c.stop_on_detect >= 0 {
            cfg.stop_on_detect = c.stop_on_detect != 0;
        }
        let plan = attack_spec(c.attack, c.strength, c.ancilla_digits);
        let prototype = core(plan.build(rvf.inner.domain_size()))?;
        let attack_report = match evaluate_attack(prototype.as_ref()) {
            Ok(r) => Some(r),
            Err(Error::Unsupported(_)) => None,
            Err(e) => return Err((status_of(&e), e.to_string())),
        };
        let stats = core(monte_carlo_with(&cfg, &rvf.inner, prototype.as_ref(), c.trials))?;
        let bound_check = core(compare_to_bound(&stats, attack_report.as_ref(), plan.is_individual()))?;
        let report = RunReport {
            config: cfg,
            attack: plan,
            stats,
            attack_report,
            bound_check,
        };
        write(out, Box::into_raw(Box::new(BqcRun { report })), "out")
    })
}

/// # Safety
/// `run` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn bqc_run_summary(run: *const BqcRun, out: *mut BqcSummary) -> BqcStatus {
    guard(|| {
        let r = &run.as_ref().ok_or_else(|| null("run"))?.report;
        let s = &r.stats;
        write(
            out,
            BqcSummary {
                trials: s.trials,
                n: s.n,
                detection: s.detection.mean,
                detection_se: s.detection.se,
                guess_success: s.guess_success.mean,
                guess_success_se: s.guess_success.se,
                mutual_info_bits: s.mutual_info_bits,
                mi_bias_allowance: s.mi_bias_allowance,
                x_exposed_rate: s.x_exposed_rate,
                result_verified_rate: s.result_verified_rate,
                bound_pass: r.bound_check.pass,
            },
            "out",
        )
    })
}

/// Full report as JSON, same layout as the command line's `simulate`
/// output. Release with [`bqc_string_free`]. Null on failure.
///
/// # Safety
/// `run` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn bqc_run_to_json(run: *const BqcRun) -> *mut c_char {
    let mut text = ptr::null_mut();
    let status = guard(|| {
        let r = &run.as_ref().ok_or_else(|| null("run"))?.report;
        let json = serde_json::to_string(r).map_err(|e| (BqcStatus::Internal, e.to_string()))?;
        text = CString::new(json).map_err(|e| (BqcStatus::Internal, e.to_string()))?.into_raw();
        Ok(())
    });
    if status == BqcStatus::Ok {
        text
    } else {
        ptr::null_mut()
    }
}

/// # Safety
/// `run` must be null or a handle from [`bqc_simulate`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bqc_run_free(run: *mut BqcRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

/// # Safety
/// `s` must be null or a string returned by this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bqc_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    #[test]
    fn errors_set_the_message() {
        let mut v = 0.0;
        let status = unsafe { bqc_fidelity_bound(0.1, 2, &mut v) };
        assert_eq!(status, BqcStatus::Domain);
        let msg = unsafe { CStr::from_ptr(bqc_last_error()) }.to_str().unwrap();
        assert!(msg.contains("G"), "{msg}");
        assert_eq!(unsafe { bqc_fidelity_bound(0.5, 2, ptr::null_mut()) }, BqcStatus::NullPointer);
    }

    #[test]
    fn status_mapping() {
        assert_eq!(status_of(&Error::Unsupported("x".into())), BqcStatus::Unsupported);
        assert_eq!(status_of(&Error::ZeroVector), BqcStatus::InvalidArgument);
    }
}
