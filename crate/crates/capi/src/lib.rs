//! C ABI for the reconstruction toolkit.
//!
//! Conventions:
//! - Every fallible call returns a [`WndtStatus`]; `WNDT_STATUS_OK` is 0.
//! - On failure, [`wndt_last_error_message`] returns a thread-local,
//!   NUL-terminated description of the most recent error.
//! - `WndtModel` is an opaque handle created by [`wndt_model_load`] and
//!   released with [`wndt_model_free`]. A handle is immutable after
//!   loading and may be shared across threads for prediction.
//! - Profile and spectrum buffers are caller-allocated `double` arrays;
//!   lengths are passed explicitly and validated.

#![allow(clippy::too_many_arguments)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use num_complex::Complex64;
use wavenet_ndt::error::Error;
use wavenet_ndt::nn::{load_checkpoint, CnnModel};
use wavenet_ndt::physics::{
    forward_reflection, wnst_invert, DefectProfile, PlateSpec, ReflectionSpectrum, SpatialGrid,
    WavenumberGrid,
};

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WndtStatus {
    Ok = 0,
    /// A pointer argument that must not be null was null.
    NullPointer = 1,
    /// Invalid argument values or inconsistent buffer lengths.
    InvalidArgument = 2,
    /// File could not be read or written.
    Io = 3,
    /// File exists but has the wrong format or version.
    Format = 4,
    /// Numerical failure (evanescent mode, singular wavenumber, ...).
    Numeric = 5,
    /// Unexpected internal failure.
    Internal = 6,
}

/// Opaque trained-model handle.
pub struct WndtModel {
    inner: CnnModel,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(err: &Error) -> WndtStatus {
    match err {
        Error::Io(_) | Error::Parse(_) | Error::Json(_) => WndtStatus::Io,
        Error::FormatVersionMismatch { .. } => WndtStatus::Format,
        Error::EvanescentMode { .. }
        | Error::SingularWavenumber(_)
        | Error::Divergence { .. }
        | Error::ZeroSignal
        | Error::ZeroReference => WndtStatus::Numeric,
        _ => WndtStatus::InvalidArgument,
    }
}

fn fail(err: &Error) -> WndtStatus {
    set_error(&err.to_string());
    status_for(err)
}

fn guard(body: impl FnOnce() -> WndtStatus) -> WndtStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            WndtStatus::Internal
        }
    }
}

/// Version string of the library, static storage.
#[no_mangle]
pub extern "C" fn wndt_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent error on this thread. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wndt_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Load a model checkpoint from a NUL-terminated path into a new handle.
///
/// # Safety
/// `path` must point to a valid NUL-terminated string and `out_model`
/// to a writable pointer slot.
#[no_mangle]
pub unsafe extern "C" fn wndt_model_load(
    path: *const c_char,
    out_model: *mut *mut WndtModel,
) -> WndtStatus {
    guard(|| {
        if path.is_null() || out_model.is_null() {
            set_error("null pointer argument");
            return WndtStatus::NullPointer;
        }
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("path is not valid UTF-8");
                return WndtStatus::InvalidArgument;
            }
        };
        match load_checkpoint(Path::new(path)) {
            Ok((model, _)) => {
                let handle = Box::new(WndtModel { inner: model });
                unsafe { *out_model = Box::into_raw(handle) };
                WndtStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Release a handle returned by [`wndt_model_load`]. Null is a no-op.
///
/// # Safety
/// `model` must be a pointer previously returned by `wndt_model_load`
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn wndt_model_free(model: *mut WndtModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Number of profile points the model expects, 0 for a null handle.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn wndt_model_input_len(model: *const WndtModel) -> usize {
    if model.is_null() {
        return 0;
    }
    unsafe { &*model }.inner.input_len()
}

/// Run the network on a dimensionless pre-reconstruction profile.
/// `input` and `output` are arrays of `len` doubles; `len` must equal
/// [`wndt_model_input_len`].
///
/// # Safety
/// `model` must be a live handle; `input`/`output` must point to `len`
/// readable/writable doubles.
#[no_mangle]
pub unsafe extern "C" fn wndt_model_predict(
    model: *const WndtModel,
    input: *const f64,
    output: *mut f64,
    len: usize,
) -> WndtStatus {
    guard(|| {
        if model.is_null() || input.is_null() || output.is_null() {
            set_error("null pointer argument");
            return WndtStatus::NullPointer;
        }
        let model = unsafe { &*model };
        if len != model.inner.input_len() {
            set_error("len does not match the model input length");
            return WndtStatus::InvalidArgument;
        }
        let input = unsafe { std::slice::from_raw_parts(input, len) };
        match model.inner.predict(input) {
            Ok(pred) => {
                unsafe { std::slice::from_raw_parts_mut(output, len) }.copy_from_slice(&pred);
                WndtStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Born-model reflection spectrum of a depth profile (meters).
/// `depths` has `point_count` entries; `xi`, `out_re`, `out_im` have
/// `bin_count` entries.
///
/// # Safety
/// All pointers must reference buffers of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn wndt_forward_reflection(
    depths: *const f64,
    origin: f64,
    spacing: f64,
    point_count: usize,
    half_thickness_b: f64,
    shear_speed: f64,
    mode_index: u32,
    xi: *const f64,
    bin_count: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> WndtStatus {
    guard(|| {
        if depths.is_null() || xi.is_null() || out_re.is_null() || out_im.is_null() {
            set_error("null pointer argument");
            return WndtStatus::NullPointer;
        }
        let depths = unsafe { std::slice::from_raw_parts(depths, point_count) };
        let xi = unsafe { std::slice::from_raw_parts(xi, bin_count) };
        let result = (|| {
            let plate = PlateSpec::new(half_thickness_b, shear_speed, mode_index)?;
            let grid = SpatialGrid::new(origin, spacing, point_count)?;
            let profile = DefectProfile::new(grid, depths.to_vec())?;
            let wavenumbers = WavenumberGrid::new(xi.to_vec())?;
            forward_reflection(&profile, &plate, &wavenumbers)
        })();
        match result {
            Ok(spectrum) => {
                let re = unsafe { std::slice::from_raw_parts_mut(out_re, bin_count) };
                let im = unsafe { std::slice::from_raw_parts_mut(out_im, bin_count) };
                for (i, c) in spectrum.coefficients.iter().enumerate() {
                    re[i] = c.re;
                    im[i] = c.im;
                }
                WndtStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Wavenumber-space inversion of a reflection spectrum onto a spatial
/// grid. Writes `point_count` depths (meters, mean-free) to
/// `out_depths`. The spectrum must cover the grid's Fourier bins
/// `xi = pi j / (point_count * spacing)`, j = 1..point_count/2.
///
/// # Safety
/// All pointers must reference buffers of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn wndt_wnst_invert(
    xi: *const f64,
    re: *const f64,
    im: *const f64,
    bin_count: usize,
    half_thickness_b: f64,
    shear_speed: f64,
    mode_index: u32,
    origin: f64,
    spacing: f64,
    point_count: usize,
    out_depths: *mut f64,
) -> WndtStatus {
    guard(|| {
        if xi.is_null() || re.is_null() || im.is_null() || out_depths.is_null() {
            set_error("null pointer argument");
            return WndtStatus::NullPointer;
        }
        let xi = unsafe { std::slice::from_raw_parts(xi, bin_count) };
        let re = unsafe { std::slice::from_raw_parts(re, bin_count) };
        let im = unsafe { std::slice::from_raw_parts(im, bin_count) };
        let result = (|| {
            let plate = PlateSpec::new(half_thickness_b, shear_speed, mode_index)?;
            let grid = SpatialGrid::new(origin, spacing, point_count)?;
            let coefficients = re.iter().zip(im).map(|(&r, &i)| Complex64::new(r, i)).collect();
            let spectrum =
                ReflectionSpectrum::new(WavenumberGrid::new(xi.to_vec())?, coefficients)?;
            wnst_invert(&spectrum, &plate, &grid)
        })();
        match result {
            Ok(profile) => {
                unsafe { std::slice::from_raw_parts_mut(out_depths, point_count) }
                    .copy_from_slice(&profile.depths);
                WndtStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// One analytic + network reconstruction in a single call, mirroring the
/// CLI's `reconstruct` command. The spectrum is inverted on the grid and
/// written to `out_wnst` (meters). When `model` is non-null, the network
/// post-processes the inversion (normalized by the plate half thickness)
/// and the rescaled result is written to `out_convnet`.
///
/// # Safety
/// All non-null pointers must reference buffers of the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn wndt_reconstruct(
    model: *const WndtModel,
    xi: *const f64,
    re: *const f64,
    im: *const f64,
    bin_count: usize,
    half_thickness_b: f64,
    shear_speed: f64,
    mode_index: u32,
    origin: f64,
    spacing: f64,
    point_count: usize,
    out_wnst: *mut f64,
    out_convnet: *mut f64,
) -> WndtStatus {
    guard(|| {
        let status = unsafe {
            wndt_wnst_invert(
                xi,
                re,
                im,
                bin_count,
                half_thickness_b,
                shear_speed,
                mode_index,
                origin,
                spacing,
                point_count,
                out_wnst,
            )
        };
        if status != WndtStatus::Ok {
            return status;
        }
        if model.is_null() {
            return WndtStatus::Ok;
        }
        if out_convnet.is_null() {
            set_error("out_convnet is null but a model was supplied");
            return WndtStatus::NullPointer;
        }
        let model = unsafe { &*model };
        let wnst = unsafe { std::slice::from_raw_parts(out_wnst, point_count) };
        let normalized: Vec<f64> = wnst.iter().map(|d| d / half_thickness_b).collect();
        match model.inner.predict(&normalized) {
            Ok(pred) => {
                let out = unsafe { std::slice::from_raw_parts_mut(out_convnet, point_count) };
                for (o, p) in out.iter_mut().zip(&pred) {
                    *o = p * half_thickness_b;
                }
                WndtStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}
