//! C ABI over `patchblur`.
//!
//! Images and models are opaque heap handles created by `pb_*_load` /
//! `pb_image_from_gray8` and released with the matching `*_free`. Every
//! fallible call returns a [`PbStatus`]; on failure a description is available
//! from [`pb_last_error_message`] on the same thread.
//!
//! Panics never cross the boundary: they are caught and reported as
//! [`PbStatus::Internal`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use patchblur::grid::extract_vector;
use patchblur::image::load_gray;
use patchblur::{model_config, Error, FeatureConfig, GbdtModel, GrayImage};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PbStatus {
    Ok = 0,
    /// Null pointer, non-UTF-8 path, or an out-of-range argument.
    InvalidArgument = 1,
    /// File could not be read or decoded.
    Unreadable = 2,
    /// Image dimensions are unusable for the requested operation.
    InvalidImage = 3,
    /// Model document is malformed or its configuration is unknown.
    ModelFormat = 4,
    /// Feature vector length or model configuration does not match.
    ShapeMismatch = 5,
    /// A feature value is NaN or infinite.
    NonFinite = 6,
    /// Output buffer too small; the required length was written back.
    BufferTooSmall = 7,
    Io = 8,
    Internal = 9,
}

/// Grayscale image with intensities in [0, 1].
pub struct PbImage(GrayImage);

/// Trained classifier together with the feature layout it expects.
pub struct PbModel {
    model: GbdtModel,
    config: FeatureConfig,
    config_id: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<Vec<u8>>) {
    let mut bytes = msg.into();
    bytes.retain(|&b| b != 0);
    let s = CString::new(bytes).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn status_of(e: &Error) -> PbStatus {
    match e {
        Error::UnreadableFile { .. } | Error::UnsupportedFormat(_) => PbStatus::Unreadable,
        Error::InvalidDimensions { .. }
        | Error::RegionTooSmall { .. }
        | Error::RegionOutOfBounds { .. }
        | Error::WindowLargerThanRegion { .. }
        | Error::ImageTooSmall { .. } => PbStatus::InvalidImage,
        Error::ModelFormat(_) | Error::Json(_) => PbStatus::ModelFormat,
        Error::ShapeMismatch(_) | Error::ConfigMismatch { .. } => PbStatus::ShapeMismatch,
        Error::NonFiniteFeature { .. } => PbStatus::NonFinite,
        Error::InvalidParams(_) => PbStatus::InvalidArgument,
        Error::Io(_) => PbStatus::Io,
        _ => PbStatus::Internal,
    }
}

/// Runs `f`, translating errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), (PbStatus, String)>) -> PbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            PbStatus::Internal
        }
    }
}

fn lib_err(e: Error) -> (PbStatus, String) {
    (status_of(&e), e.to_string())
}

fn arg_err(msg: &str) -> (PbStatus, String) {
    (PbStatus::InvalidArgument, msg.to_string())
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, (PbStatus, String)> {
    if path.is_null() {
        return Err(arg_err("path is null"));
    }
    let s = CStr::from_ptr(path).to_str().map_err(|_| arg_err("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, (PbStatus, String)> {
    p.as_ref().ok_or_else(|| arg_err(&format!("{what} is null")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the most recent failure on the calling thread; empty if none.
/// The pointer stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn pb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Decodes an image file (PNG or JPEG) to grayscale.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pb_image_load(path: *const c_char, out: *mut *mut PbImage) -> PbStatus {
    guard(|| {
        if out.is_null() {
            return Err(arg_err("out is null"));
        }
        let img = load_gray(path_arg(path)?).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(PbImage(img)));
        Ok(())
    })
}

/// Wraps 8-bit grayscale pixels. `stride` is the byte distance between rows
/// (at least `width`).
///
/// # Safety
/// `pixels` must point to `stride * height` readable bytes; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn pb_image_from_gray8(
    pixels: *const u8,
    width: usize,
    height: usize,
    stride: usize,
    out: *mut *mut PbImage,
) -> PbStatus {
    guard(|| {
        if pixels.is_null() || out.is_null() {
            return Err(arg_err("null pointer"));
        }
        if stride < width {
            return Err(arg_err("stride is smaller than width"));
        }
        let len = stride.checked_mul(height).ok_or_else(|| arg_err("image too large"))?;
        let src = std::slice::from_raw_parts(pixels, len);
        let packed: Vec<u8> = if stride == width {
            src.to_vec()
        } else {
            src.chunks(stride).flat_map(|row| &row[..width]).copied().collect()
        };
        let img = GrayImage::from_gray8(width, height, &packed).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(PbImage(img)));
        Ok(())
    })
}

/// # Safety
/// `img` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pb_image_free(img: *mut PbImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Width in pixels; 0 for a null handle.
///
/// # Safety
/// `img` must be null or a live image handle.
#[no_mangle]
pub unsafe extern "C" fn pb_image_width(img: *const PbImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.width())
}

/// Height in pixels; 0 for a null handle.
///
/// # Safety
/// `img` must be null or a live image handle.
#[no_mangle]
pub unsafe extern "C" fn pb_image_height(img: *const PbImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.height())
}

/// Loads a model document written by `patchblur train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pb_model_load(path: *const c_char, out: *mut *mut PbModel) -> PbStatus {
    guard(|| {
        if out.is_null() {
            return Err(arg_err("out is null"));
        }
        let model = GbdtModel::load(path_arg(path)?).map_err(lib_err)?;
        let config = model_config(&model).map_err(lib_err)?;
        patchblur::ensure_config(&model, &config).map_err(lib_err)?;
        let config_id = CString::new(model.config_id.clone()).map_err(|_| arg_err("config id contains NUL"))?;
        *out = Box::into_raw(Box::new(PbModel { model, config, config_id }));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn pb_model_free(model: *mut PbModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Feature vector length the model expects; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn pb_model_n_features(model: *const PbModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.n_features)
}

/// Feature configuration id, e.g. `lbp-grid/g7/t0.016/w21/e1e-12`. Owned by
/// the model; valid until `pb_model_free`. Null for a null handle.
///
/// # Safety
/// `model` must be null or a live model handle.
#[no_mangle]
pub unsafe extern "C" fn pb_model_config_id(model: *const PbModel) -> *const c_char {
    model.as_ref().map_or(std::ptr::null(), |m| m.config_id.as_ptr())
}

/// Extracts the model's feature vector from `img` into `out[0..len]`.
/// `written` receives the vector length; when `len` is too small nothing is
/// copied and `PB_STATUS_BUFFER_TOO_SMALL` is returned.
///
/// # Safety
/// Handles must be live; `out` must have room for `len` doubles; `written`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn pb_extract_features(
    model: *const PbModel,
    img: *const PbImage,
    out: *mut f64,
    len: usize,
    written: *mut usize,
) -> PbStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let img = handle(img, "image")?;
        if written.is_null() {
            return Err(arg_err("written is null"));
        }
        let v = extract_vector(&img.0, &m.config).map_err(lib_err)?;
        *written = v.values.len();
        if len < v.values.len() {
            return Err((PbStatus::BufferTooSmall, format!("buffer holds {len} values, {} needed", v.values.len())));
        }
        if out.is_null() {
            return Err(arg_err("out is null"));
        }
        std::ptr::copy_nonoverlapping(v.values.as_ptr(), out, v.values.len());
        Ok(())
    })
}

/// Blur probability for a precomputed feature vector.
///
/// # Safety
/// `model` must be live; `features` must point to `len` doubles;
/// `probability` must be writable.
#[no_mangle]
pub unsafe extern "C" fn pb_predict_proba(
    model: *const PbModel,
    features: *const f64,
    len: usize,
    probability: *mut f64,
) -> PbStatus {
    guard(|| {
        let m = handle(model, "model")?;
        if features.is_null() || probability.is_null() {
            return Err(arg_err("null pointer"));
        }
        let x = std::slice::from_raw_parts(features, len);
        *probability = m.model.predict_proba(x).map_err(lib_err)?;
        Ok(())
    })
}

/// Extracts features and classifies in one call. `label` receives 1 (blur)
/// when the probability exceeds `threshold`, else 0 (sharp). Either output
/// pointer may be null.
///
/// # Safety
/// Handles must be live; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn pb_classify_image(
    model: *const PbModel,
    img: *const PbImage,
    threshold: f64,
    probability: *mut f64,
    label: *mut u8,
) -> PbStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let img = handle(img, "image")?;
        if !(0.0..=1.0).contains(&threshold) {
            return Err(arg_err("threshold must lie in [0, 1]"));
        }
        let p = patchblur::classify(&m.model, &img.0, &m.config).map_err(lib_err)?;
        if !probability.is_null() {
            *probability = p;
        }
        if !label.is_null() {
            *label = u8::from(p > threshold);
        }
        Ok(())
    })
}
