//! C ABI over the faceveil toolkit.
//!
//! Every fallible function returns an [`FvStatus`]; on failure a message is
//! available from [`fv_last_error_message`] on the same thread. Objects are
//! opaque handles released with their `_free` function. Strings returned to
//! the caller are released with [`fv_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use faceveil::detector::{BuiltinDetector, Cascade, DetectorConfig, ExternalConfig, ExternalDetector, FaceDetector};
use faceveil::evaluation::{evaluate, Corpus, ScoringOptions};
use faceveil::filters::{apply, FaceContext, FilterSpec};
use faceveil::imaging::{load_image, save_image, FaceAnnotation, Image};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Filter = 5,
    Detect = 6,
    Cascade = 7,
    Eval = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// An 8-bit image with 1 or 3 interleaved channels.
pub struct FvImage(Image);

/// A face detector (built-in cascade or external process/HTTP endpoint).
pub struct FvDetector(Arc<dyn FaceDetector>);

/// A detection box in pixel coordinates.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FvBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    /// Raw windows merged into this box.
    pub support: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(FvStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail(status: FvStatus, e: impl std::fmt::Display) -> Failure {
    Failure(status, e.to_string())
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> FfiResult<()>) -> FvStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FvStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            FvStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return Err(fail(FvStatus::NullPointer, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(FvStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn opt_str_arg<'a>(p: *const c_char, name: &str) -> FfiResult<Option<&'a str>> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, name).map(Some)
    }
}

unsafe fn ref_arg<'a, T>(p: *const T, name: &str) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| fail(FvStatus::NullPointer, format!("{name} is null")))
}

unsafe fn out_arg<'a, T>(p: *mut T, name: &str) -> FfiResult<&'a mut T> {
    p.as_mut().ok_or_else(|| fail(FvStatus::NullPointer, format!("{name} is null")))
}

fn json<T: serde::de::DeserializeOwned>(text: &str, what: &str) -> FfiResult<T> {
    serde_json::from_str(text).map_err(|e| fail(FvStatus::InvalidArgument, format!("invalid {what}: {e}")))
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior NULs removed").into_raw()
}

/// Message of the last failed call on this thread, or NULL after a success.
/// Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn fv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fv_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn fv_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates an image from `len` interleaved samples (`len == width * height * channels`).
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fv_image_new(width: u32, height: u32, channels: u8, data: *const u8, len: usize, out: *mut *mut FvImage) -> FvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if data.is_null() && len > 0 {
            return Err(fail(FvStatus::NullPointer, "data is null"));
        }
        let samples = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(data, len).to_vec() };
        let img = Image::new(width, height, channels, samples).map_err(|e| fail(FvStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(FvImage(img)));
        Ok(())
    })
}

/// Loads a PNG or baseline JPEG file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fv_image_load(path: *const c_char, out: *mut *mut FvImage) -> FvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let img = load_image(str_arg(path, "path")?).map_err(|e| fail(FvStatus::Io, e))?;
        *out = Box::into_raw(Box::new(FvImage(img)));
        Ok(())
    })
}

/// Writes the image as PNG.
///
/// # Safety
/// `image` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fv_image_save(image: *const FvImage, path: *const c_char) -> FvStatus {
    guard(|| {
        let img = ref_arg(image, "image")?;
        save_image(&img.0, str_arg(path, "path")?).map_err(|e| fail(FvStatus::Io, e))
    })
}

/// # Safety
/// `image` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fv_image_width(image: *const FvImage) -> u32 {
    image.as_ref().map_or(0, |i| i.0.width())
}

/// # Safety
/// `image` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fv_image_height(image: *const FvImage) -> u32 {
    image.as_ref().map_or(0, |i| i.0.height())
}

/// # Safety
/// `image` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fv_image_channels(image: *const FvImage) -> u8 {
    image.as_ref().map_or(0, |i| i.0.channels())
}

/// Borrowed pointer to the samples, valid while the image lives. Writes the sample count to `len`.
///
/// # Safety
/// `image` must be a live handle or NULL; `len` must be writable or NULL.
#[no_mangle]
pub unsafe extern "C" fn fv_image_data(image: *const FvImage, len: *mut usize) -> *const u8 {
    let Some(img) = image.as_ref() else { return ptr::null() };
    if let Some(len) = len.as_mut() {
        *len = img.0.samples().len();
    }
    img.0.samples().as_ptr()
}

/// # Safety
/// `image` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fv_image_free(image: *mut FvImage) {
    if !image.is_null() {
        drop(Box::from_raw(image));
    }
}

/// Applies a filter spec (JSON) to an image. `face_json` is an optional face
/// annotation (box plus eye keypoints) used by region filters; pass NULL to omit.
///
/// # Safety
/// Pointers must be valid as documented; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fv_filter_apply(
    spec_json: *const c_char,
    image: *const FvImage,
    face_json: *const c_char,
    out: *mut *mut FvImage,
) -> FvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let img = ref_arg(image, "image")?;
        let spec: FilterSpec = json(str_arg(spec_json, "spec_json")?, "filter spec")?;
        let ctx = match opt_str_arg(face_json, "face_json")? {
            None => None,
            Some(text) => {
                let face: FaceAnnotation = json(text, "face annotation")?;
                Some(FaceContext::from_annotation(&face).map_err(|e| fail(FvStatus::InvalidArgument, e))?)
            }
        };
        let result = apply(&spec, &img.0, ctx.as_ref()).map_err(|e| fail(FvStatus::Filter, e))?;
        *out = Box::into_raw(Box::new(FvImage(result)));
        Ok(())
    })
}

fn detector_config(config_json: Option<&str>) -> FfiResult<DetectorConfig> {
    let config: DetectorConfig = match config_json {
        None => DetectorConfig::default(),
        Some(text) => json(text, "detector config")?,
    };
    config.validate().map_err(|e| fail(FvStatus::InvalidArgument, e))?;
    Ok(config)
}

/// Built-in detector. `cascade_path` selects an XML or JSON cascade (NULL for the
/// bundled one); `config_json` overrides scan settings (NULL for defaults).
///
/// # Safety
/// String arguments must be NULL or NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fv_detector_builtin(cascade_path: *const c_char, config_json: *const c_char, out: *mut *mut FvDetector) -> FvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let config = detector_config(opt_str_arg(config_json, "config_json")?)?;
        let det = match opt_str_arg(cascade_path, "cascade_path")? {
            None => BuiltinDetector::bundled(config),
            Some(p) => {
                let path = PathBuf::from(p);
                let cascade = Cascade::load(&path).map_err(|e| fail(FvStatus::Cascade, e))?;
                let name = path.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned());
                BuiltinDetector::new(Arc::new(cascade), config, name)
            }
        }
        .map_err(|e| fail(FvStatus::Detect, e))?;
        *out = Box::into_raw(Box::new(FvDetector(Arc::new(det))));
        Ok(())
    })
}

/// External detector from a JSON endpoint configuration, e.g.
/// `{"endpoint": {"kind": "http", "url": "http://127.0.0.1:9000/"}}`.
///
/// # Safety
/// `config_json` must be NUL-terminated; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fv_detector_external(config_json: *const c_char, out: *mut *mut FvDetector) -> FvStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg: ExternalConfig = json(str_arg(config_json, "config_json")?, "external detector config")?;
        let det = ExternalDetector::new(cfg).map_err(|e| fail(FvStatus::InvalidArgument, e))?;
        *out = Box::into_raw(Box::new(FvDetector(Arc::new(det))));
        Ok(())
    })
}

/// Detector identifier as a new string (free with [`fv_string_free`]); NULL for a NULL handle.
///
/// # Safety
/// `detector` must be a live handle or NULL.
#[no_mangle]
pub unsafe extern "C" fn fv_detector_id(detector: *const FvDetector) -> *mut c_char {
    detector.as_ref().map_or(ptr::null_mut(), |d| into_c_string(d.0.id()))
}

/// Runs the detector. Up to `capacity` boxes are written to `boxes`; the total
/// count goes to `count`. Returns `BufferTooSmall` when `count > capacity`, so
/// callers may query with `capacity = 0` first.
///
/// # Safety
/// `boxes` must have room for `capacity` entries (or be NULL with capacity 0); `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fv_detector_detect(
    detector: *const FvDetector,
    image: *const FvImage,
    boxes: *mut FvBox,
    capacity: usize,
    count: *mut usize,
) -> FvStatus {
    guard(|| {
        let det = ref_arg(detector, "detector")?;
        let img = ref_arg(image, "image")?;
        let count = out_arg(count, "count")?;
        if boxes.is_null() && capacity > 0 {
            return Err(fail(FvStatus::NullPointer, "boxes is null"));
        }
        let found = det.0.detect(&img.0).map_err(|e| fail(FvStatus::Detect, e))?;
        *count = found.len();
        for (i, d) in found.iter().take(capacity).enumerate() {
            let support = u32::try_from(d.support).unwrap_or(u32::MAX);
            *boxes.add(i) = FvBox { x: d.bbox.x, y: d.bbox.y, w: d.bbox.w, h: d.bbox.h, support };
        }
        if found.len() > capacity {
            return Err(fail(FvStatus::BufferTooSmall, format!("{} boxes found, room for {capacity}", found.len())));
        }
        Ok(())
    })
}

/// # Safety
/// `detector` must come from this library and not have been freed. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn fv_detector_free(detector: *mut FvDetector) {
    if !detector.is_null() {
        drop(Box::from_raw(detector));
    }
}

/// Evaluates a filter spec over `n_manifests` JSONL manifests and returns the
/// JSON report in `report_json` (free with [`fv_string_free`]). `options_json`
/// holds scoring options or is NULL for defaults.
///
/// # Safety
/// `manifests` must hold `n_manifests` NUL-terminated strings; `report_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fv_evaluate(
    manifests: *const *const c_char,
    n_manifests: usize,
    spec_json: *const c_char,
    detector: *const FvDetector,
    options_json: *const c_char,
    report_json: *mut *mut c_char,
) -> FvStatus {
    guard(|| {
        let out = out_arg(report_json, "report_json")?;
        if manifests.is_null() && n_manifests > 0 {
            return Err(fail(FvStatus::NullPointer, "manifests is null"));
        }
        let paths = (0..n_manifests).map(|i| str_arg(*manifests.add(i), "manifest").map(PathBuf::from)).collect::<FfiResult<Vec<_>>>()?;
        let spec: FilterSpec = json(str_arg(spec_json, "spec_json")?, "filter spec")?;
        let det = ref_arg(detector, "detector")?;
        let opts: ScoringOptions = match opt_str_arg(options_json, "options_json")? {
            None => ScoringOptions::default(),
            Some(t) => json(t, "scoring options")?,
        };
        let corpus = Corpus::load(&paths).map_err(|e| fail(FvStatus::Io, e))?;
        let report = evaluate(&corpus, &spec, det.0.as_ref(), &opts).map_err(|e| fail(FvStatus::Eval, e))?;
        *out = into_c_string(report.to_json());
        Ok(())
    })
}
