//! C ABI over the nusest estimator design.
//!
//! Every fallible call returns a [`NusestStatus`]. On failure a description is
//! available from [`nusest_last_error`] on the same thread until the next failing
//! call. Designs are opaque handles created by [`nusest_design_new`] and released
//! with [`nusest_design_free`]; a handle may be shared between threads for reading.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nusest::{Complex64, EstimatorDesign, SampleVector};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NusestStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DuplicateAbscissa = 3,
    SingularSystem = 4,
    LengthMismatch = 5,
    Internal = 99,
}

/// Opaque estimator design.
pub struct NusestDesign {
    inner: EstimatorDesign,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: NusestStatus, msg: impl Into<String>) -> NusestStatus {
    set_last_error(msg.into());
    status
}

fn from_error(e: nusest::Error) -> NusestStatus {
    let status = match e {
        nusest::Error::DuplicateAbscissa { .. } => NusestStatus::DuplicateAbscissa,
        nusest::Error::SingularSystem { .. } => NusestStatus::SingularSystem,
        nusest::Error::LengthMismatch { .. } => NusestStatus::LengthMismatch,
        _ => NusestStatus::InvalidArgument,
    };
    fail(status, e.to_string())
}

fn guarded<F: FnOnce() -> NusestStatus>(f: F) -> NusestStatus {
    catch_unwind(AssertUnwindSafe(f))
        .unwrap_or_else(|_| fail(NusestStatus::Internal, "internal panic"))
}

/// Message for the last failure on this thread, or NULL if none. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn nusest_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Normalised sinc, `sin(pi x) / (pi x)`.
#[no_mangle]
pub extern "C" fn nusest_sinc(x: f64) -> f64 {
    nusest::sinc::sinc(x)
}

/// Builds a design for `n` abscissas with regularisation `mu >= 0`.
///
/// # Safety
/// `abscissas` must point to `n` readable doubles and `out` to writable storage
/// for one pointer.
#[no_mangle]
pub unsafe extern "C" fn nusest_design_new(
    abscissas: *const f64,
    n: usize,
    mu: f64,
    out: *mut *mut NusestDesign,
) -> NusestStatus {
    guarded(|| {
        if out.is_null() || (abscissas.is_null() && n > 0) {
            return fail(NusestStatus::NullPointer, "null pointer argument");
        }
        *out = ptr::null_mut();
        let xs = if n == 0 {
            &[][..]
        } else {
            slice::from_raw_parts(abscissas, n)
        };
        match EstimatorDesign::new(xs, mu) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(NusestDesign { inner }));
                NusestStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Releases a design. NULL is ignored.
///
/// # Safety
/// `design` must come from [`nusest_design_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn nusest_design_free(design: *mut NusestDesign) {
    if !design.is_null() {
        drop(Box::from_raw(design));
    }
}

/// Number of abscissas, or 0 for NULL.
///
/// # Safety
/// `design` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn nusest_design_len(design: *const NusestDesign) -> usize {
    design.as_ref().map_or(0, |d| d.inner.len())
}

/// Ridge actually added to the Gram diagonal (`mu`, or the fallback).
///
/// # Safety
/// `design` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nusest_design_ridge(
    design: *const NusestDesign,
    out: *mut f64,
) -> NusestStatus {
    let (Some(d), false) = (design.as_ref(), out.is_null()) else {
        return fail(NusestStatus::NullPointer, "null pointer argument");
    };
    *out = d.inner.effective_ridge();
    NusestStatus::Ok
}

/// Writes the `len` real coefficients `c(x)`.
///
/// # Safety
/// `design` must be a live handle and `out` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn nusest_design_coefficients(
    design: *const NusestDesign,
    x: f64,
    out: *mut f64,
    len: usize,
) -> NusestStatus {
    guarded(|| {
        let (Some(d), false) = (design.as_ref(), out.is_null()) else {
            return fail(NusestStatus::NullPointer, "null pointer argument");
        };
        if len != d.inner.len() {
            return from_error(nusest::Error::LengthMismatch {
                expected: d.inner.len(),
                actual: len,
            });
        }
        if !x.is_finite() {
            return fail(NusestStatus::InvalidArgument, "x must be finite");
        }
        let c = d.inner.coefficients(x);
        slice::from_raw_parts_mut(out, len).copy_from_slice(c.as_slice());
        NusestStatus::Ok
    })
}

/// Estimates `s(x)` from complex samples given as `len` interleaved
/// `(re, im)` pairs, writing the result to `out[0]` (re) and `out[1]` (im).
///
/// # Safety
/// `samples` must hold `2 * len` doubles and `out` two doubles.
#[no_mangle]
pub unsafe extern "C" fn nusest_design_estimate(
    design: *const NusestDesign,
    samples: *const f64,
    len: usize,
    x: f64,
    out: *mut f64,
) -> NusestStatus {
    guarded(|| {
        let Some(d) = design.as_ref() else {
            return fail(NusestStatus::NullPointer, "null design");
        };
        if out.is_null() || (samples.is_null() && len > 0) {
            return fail(NusestStatus::NullPointer, "null pointer argument");
        }
        if !x.is_finite() {
            return fail(NusestStatus::InvalidArgument, "x must be finite");
        }
        let raw = if len == 0 {
            &[][..]
        } else {
            slice::from_raw_parts(samples, 2 * len)
        };
        let values = raw
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        // Noise level and amplitude are already folded into the design's mu.
        let sv = match SampleVector::new(values, 0.0, 1.0) {
            Ok(sv) => sv,
            Err(e) => return from_error(e),
        };
        match d.inner.estimate(&sv, x) {
            Ok(z) => {
                let out = slice::from_raw_parts_mut(out, 2);
                out[0] = z.re;
                out[1] = z.im;
                NusestStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Squared-error bound `A^2 (1 - g(x)^T (G + mu I)^{-1} g(x))`.
///
/// # Safety
/// `design` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn nusest_design_error_bound(
    design: *const NusestDesign,
    amplitude_bound: f64,
    x: f64,
    out: *mut f64,
) -> NusestStatus {
    guarded(|| {
        let (Some(d), false) = (design.as_ref(), out.is_null()) else {
            return fail(NusestStatus::NullPointer, "null pointer argument");
        };
        if !(amplitude_bound.is_finite() && amplitude_bound > 0.0 && x.is_finite()) {
            return fail(
                NusestStatus::InvalidArgument,
                "amplitude bound must be finite and > 0, x finite",
            );
        }
        *out = d.inner.error_bound(amplitude_bound, x);
        NusestStatus::Ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn core_errors_map_to_codes() {
        let e = nusest::Error::SingularSystem { ridge: 1e-12 };
        assert_eq!(from_error(e), NusestStatus::SingularSystem);
        let msg = unsafe { std::ffi::CStr::from_ptr(nusest_last_error()) };
        assert!(msg.to_str().unwrap().contains("singular"));
        let e = nusest::Error::RankDeficient { condition: 1e13 };
        assert_eq!(from_error(e), NusestStatus::InvalidArgument);
    }

    #[test]
    fn panics_become_internal_errors() {
        assert_eq!(guarded(|| panic!("boom")), NusestStatus::Internal);
    }
}
