//! C ABI for `nlmeas`.
//!
//! A run is created with [`nlm_run_create`] or [`nlm_run_create_eigen`], queried
//! through the `nlm_run_*` accessors and released with [`nlm_run_free`]. Every
//! fallible call returns an [`NlmStatus`]; on failure the message is available
//! from [`nlm_last_error`] on the same thread until the next failing call.

use nlmeas::protocols::{run, EigenbasisSpec, Family, Inferred, ProtocolRun};
use nlmeas::qcore::{Matrix, C64};
use nlmeas::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NlmStatus {
    Ok = 0,
    NullPointer = 1,
    /// Unknown family name, bad UTF-8, or an amplitude buffer of the wrong length.
    InvalidArgument = 2,
    Structural = 3,
    Validation = 4,
    Locality = 5,
    Resource = 6,
    Protocol = 7,
    /// Branch index past the end.
    OutOfRange = 8,
    /// A Rust panic was caught at the boundary.
    Internal = 9,
}

/// Family parameters. Angles in radians; fields a family does not use are ignored.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct NlmParams {
    pub alpha: f64,
    pub beta: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub n_ebits: u32,
    /// Row-major 2×2 twist for `twist4x4` as interleaved (re, im) pairs,
    /// 8 doubles. Null means the identity.
    pub u_b: *const f64,
}

/// Opaque handle to a finished protocol run.
pub struct NlmRun {
    inner: ProtocolRun,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn fail(status: NlmStatus, message: impl Into<String>) -> NlmStatus {
    set_error(message);
    status
}

fn from_error(e: Error) -> NlmStatus {
    let status = match e {
        Error::Structural(_) => NlmStatus::Structural,
        Error::Validation(_) => NlmStatus::Validation,
        Error::Locality(_) => NlmStatus::Locality,
        Error::Resource(_) => NlmStatus::Resource,
        Error::Protocol(_) => NlmStatus::Protocol,
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> NlmStatus) -> NlmStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(NlmStatus::Internal, "internal panic"))
}

unsafe fn build_spec(family: *const c_char, params: *const NlmParams) -> Result<EigenbasisSpec, NlmStatus> {
    if family.is_null() || params.is_null() {
        return Err(fail(NlmStatus::NullPointer, "null family or params"));
    }
    let name = CStr::from_ptr(family)
        .to_str()
        .map_err(|_| fail(NlmStatus::InvalidArgument, "family name is not UTF-8"))?;
    let family: Family = name
        .parse()
        .map_err(|_| fail(NlmStatus::InvalidArgument, format!("unknown family {name:?}")))?;
    let p = &*params;
    let spec = match family {
        Family::TwistedProduct => {
            let mut s = EigenbasisSpec::twisted_product();
            (s.alpha, s.beta, s.n_ebits) = (p.alpha, p.alpha, p.n_ebits);
            s
        }
        Family::GeneralProduct => EigenbasisSpec::general_product(p.alpha, p.n_ebits),
        Family::NonmaxEqual => EigenbasisSpec::nonmax_equal(p.alpha, p.n_ebits),
        Family::NonmaxBell => EigenbasisSpec::nonmax_bell(p.alpha, p.n_ebits),
        Family::NonmaxGeneral => EigenbasisSpec::nonmax_general(p.alpha, p.beta, p.phi1, p.phi2, p.n_ebits),
        Family::Twist4x4 => {
            let u = if p.u_b.is_null() {
                Matrix::identity(2)
            } else {
                let raw = std::slice::from_raw_parts(p.u_b, 8);
                let data = raw.chunks(2).map(|c| C64::new(c[0], c[1])).collect();
                Matrix::from_vec(data).expect("four entries")
            };
            EigenbasisSpec::twist4x4(&u, p.n_ebits).map_err(from_error)?
        }
    };
    spec.validate().map_err(from_error)?;
    Ok(spec)
}

fn finish(result: nlmeas::Result<ProtocolRun>, out: *mut *mut NlmRun) -> NlmStatus {
    match result {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(NlmRun { inner })) };
            NlmStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// Runs `family` on the input with amplitudes `re[i] + i·im[i]`, `len` of
/// them in register order (first qubit most significant). The input is
/// normalized. `im` may be null for real amplitudes.
///
/// # Safety
/// `family` must be a NUL-terminated string, `params` valid, `re` (and `im`
/// if non-null) readable for `len` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nlm_run_create(
    family: *const c_char,
    params: *const NlmParams,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut NlmRun,
) -> NlmStatus {
    guard(|| {
        if re.is_null() || out.is_null() {
            return fail(NlmStatus::NullPointer, "null amplitudes or output pointer");
        }
        let spec = match build_spec(family, params) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let dim = 1usize << spec.system_register().len();
        if len != dim {
            return fail(NlmStatus::InvalidArgument, format!("expected {dim} amplitudes, got {len}"));
        }
        let re = std::slice::from_raw_parts(re, len);
        let amps: Vec<C64> = if im.is_null() {
            re.iter().map(|&r| C64::new(r, 0.0)).collect()
        } else {
            let im = std::slice::from_raw_parts(im, len);
            re.iter().zip(im).map(|(&r, &i)| C64::new(r, i)).collect()
        };
        finish(spec.input_state(amps).and_then(|input| run(&spec, &input)), out)
    })
}

/// Runs `family` on its eigenstate `k` (1-based).
///
/// # Safety
/// Same pointer requirements as [`nlm_run_create`].
#[no_mangle]
pub unsafe extern "C" fn nlm_run_create_eigen(
    family: *const c_char,
    params: *const NlmParams,
    k: usize,
    out: *mut *mut NlmRun,
) -> NlmStatus {
    guard(|| {
        if out.is_null() {
            return fail(NlmStatus::NullPointer, "null output pointer");
        }
        let spec = match build_spec(family, params) {
            Ok(s) => s,
            Err(status) => return status,
        };
        finish(spec.eigenstate(k).and_then(|input| run(&spec, &input)), out)
    })
}

/// Releases a run. Null is ignored.
///
/// # Safety
/// `run` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nlm_run_free(run: *mut NlmRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}

unsafe fn with_run<T>(run: *const NlmRun, out: *mut T, f: impl FnOnce(&ProtocolRun) -> Result<T, NlmStatus>) -> NlmStatus {
    guard(|| {
        if run.is_null() || out.is_null() {
            return fail(NlmStatus::NullPointer, "null run or output pointer");
        }
        match f(&(*run).inner) {
            Ok(v) => {
                *out = v;
                NlmStatus::Ok
            }
            Err(s) => s,
        }
    })
}

fn branch(run: &ProtocolRun, i: usize) -> Result<&nlmeas::protocols::RunBranch, NlmStatus> {
    run.branches
        .get(i)
        .ok_or_else(|| fail(NlmStatus::OutOfRange, format!("branch {i} of {}", run.branches.len())))
}

/// # Safety
/// `run` from this library, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nlm_run_branch_count(run: *const NlmRun, out: *mut usize) -> NlmStatus {
    with_run(run, out, |r| Ok(r.branches.len()))
}

/// # Safety
/// `run` from this library, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nlm_run_branch_probability(run: *const NlmRun, i: usize, out: *mut f64) -> NlmStatus {
    with_run(run, out, |r| Ok(branch(r, i)?.probability))
}

/// Inferred eigenstate index of branch `i`, 1-based; 0 means failure.
///
/// # Safety
/// `run` from this library, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nlm_run_branch_inferred(run: *const NlmRun, i: usize, out: *mut u32) -> NlmStatus {
    with_run(run, out, |r| {
        Ok(match branch(r, i)?.inferred {
            Inferred::Index(k) => k as u32,
            Inferred::Failure => 0,
        })
    })
}

/// # Safety
/// `run` from this library, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nlm_run_success_probability(run: *const NlmRun, out: *mut f64) -> NlmStatus {
    with_run(run, out, |r| Ok(r.success_probability))
}

/// # Safety
/// `run` from this library, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nlm_run_ebits_consumed(run: *const NlmRun, out: *mut u32) -> NlmStatus {
    with_run(run, out, |r| Ok(r.ebits_consumed))
}

/// Entanglement left between the parties' unmeasured ancillas, in bits.
///
/// # Safety
/// `run` from this library, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nlm_run_residual_entanglement(run: *const NlmRun, out: *mut f64) -> NlmStatus {
    with_run(run, out, |r| Ok(r.residual_entanglement))
}

/// Serializes the run as JSON. Free the string with [`nlm_string_free`].
///
/// # Safety
/// `run` from this library, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nlm_run_to_json(run: *const NlmRun, out: *mut *mut c_char) -> NlmStatus {
    with_run(run, out, |r| {
        let text = serde_json::to_string(r).map_err(|e| fail(NlmStatus::Internal, e.to_string()))?;
        CString::new(text)
            .map(CString::into_raw)
            .map_err(|_| fail(NlmStatus::Internal, "NUL in JSON"))
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn nlm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message of the last failure on this thread, or null. Valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn nlm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, static.
#[no_mangle]
pub extern "C" fn nlm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
