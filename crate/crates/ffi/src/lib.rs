//! C ABI over the lucenet core: build, load, save and run models, compute
//! saliency maps, ROC AUC and confusion metrics.
//!
//! Every fallible call returns a [`LucenetStatus`]; on failure the message is
//! kept per thread and can be fetched with [`lucenet_last_error`]. Models are
//! opaque handles released with [`lucenet_model_free`]; strings returned by
//! the library are released with [`lucenet_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use lucenet::data::{DataError, Label, SampleImage};
use lucenet::eval::{accuracy, roc_curve, sensitivity, specificity, ConfusionCounts, EvalError};
use lucenet::interp::{saliency, InterpError};
use lucenet::model::{load_checkpoint, DenseNetConfig, Init, Model, ModelError, DEFAULT_INIT_STD};
use lucenet::tensor::Tensor;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LucenetStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    Shape = 5,
    Runtime = 6,
}

/// Opaque model handle.
pub struct LucenetModel {
    model: Model,
}

/// Confusion metrics; NaN marks an undefined ratio (zero denominator).
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct LucenetMetrics {
    pub sensitivity: f64,
    pub specificity: f64,
    pub accuracy: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(LucenetStatus, String);

type Res<T> = Result<T, Failure>;

fn fail<T>(status: LucenetStatus, msg: impl Into<String>) -> Res<T> {
    Err(Failure(status, msg.into()))
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        let status = match &e {
            ModelError::Io { .. } => LucenetStatus::Io,
            ModelError::BadMagic
            | ModelError::VersionMismatch { .. }
            | ModelError::Truncated(_)
            | ModelError::Header(_)
            | ModelError::UnknownParameter(_)
            | ModelError::MissingParameter(_) => LucenetStatus::Format,
            ModelError::ConfigMismatch(_) | ModelError::ShapeDisagreement { .. } | ModelError::InputShape { .. } => {
                LucenetStatus::Shape
            }
            ModelError::Config(_) | ModelError::UnknownLayer(_) => LucenetStatus::InvalidArgument,
            ModelError::Tensor(_) => LucenetStatus::Runtime,
        };
        Failure(status, e.to_string())
    }
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure(LucenetStatus::InvalidArgument, e.to_string())
    }
}

impl From<InterpError> for Failure {
    fn from(e: InterpError) -> Self {
        match e {
            InterpError::Model(e) => e.into(),
            InterpError::Data(e) => e.into(),
            InterpError::Shape(m) => Failure(LucenetStatus::Shape, m),
            e => Failure(LucenetStatus::Runtime, e.to_string()),
        }
    }
}

impl From<EvalError> for Failure {
    fn from(e: EvalError) -> Self {
        Failure(LucenetStatus::InvalidArgument, e.to_string())
    }
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, turning errors and panics into a status plus last-error message.
fn guard(f: impl FnOnce() -> Res<()>) -> LucenetStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
            LucenetStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(&format!("internal error: {msg}"));
            LucenetStatus::Runtime
        }
    }
}

unsafe fn model_ref<'a>(model: *const LucenetModel) -> Res<&'a Model> {
    match model.as_ref() {
        Some(m) => Ok(&m.model),
        None => fail(LucenetStatus::NullPointer, "model handle is null"),
    }
}

unsafe fn path_arg(path: *const c_char) -> Res<PathBuf> {
    if path.is_null() {
        return fail(LucenetStatus::NullPointer, "path is null");
    }
    match CStr::from_ptr(path).to_str() {
        Ok(s) => Ok(PathBuf::from(s)),
        Err(_) => fail(LucenetStatus::InvalidArgument, "path is not UTF-8"),
    }
}

unsafe fn slice_arg<'a, T>(data: *const T, len: usize, what: &str) -> Res<&'a [T]> {
    if len == 0 {
        return Ok(&[]);
    }
    if data.is_null() {
        return fail(LucenetStatus::NullPointer, format!("{what} is null"));
    }
    Ok(slice::from_raw_parts(data, len))
}

unsafe fn out_arg<'a, T>(out: *mut T, what: &str) -> Res<&'a mut T> {
    match out.as_mut() {
        Some(o) => Ok(o),
        None => fail(LucenetStatus::NullPointer, format!("{what} is null")),
    }
}

fn boxed(model: Model) -> *mut LucenetModel {
    Box::into_raw(Box::new(LucenetModel { model }))
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lucenet_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null after a success.
/// The caller owns the copy and frees it with `lucenet_string_free`.
#[no_mangle]
pub extern "C" fn lucenet_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null_mut(), |c| c.clone().into_raw()))
}

/// Frees a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lucenet_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a randomly initialized model (Gaussian weights, std 0.05) with the
/// default head. `layout` lists the dense layers per block.
///
/// # Safety
/// `layout` must point to `layout_len` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lucenet_model_build(
    input_size: usize,
    stem_filters: usize,
    growth_rate: usize,
    layout: *const usize,
    layout_len: usize,
    seed: u64,
    out: *mut *mut LucenetModel,
) -> LucenetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let block_layout = slice_arg(layout, layout_len, "layout")?.to_vec();
        let config = DenseNetConfig { input_size, stem_filters, growth_rate, block_layout, ..Default::default() };
        let model = Model::build(config, Init::Gaussian { seed, std: DEFAULT_INIT_STD })?;
        *out = boxed(model);
        Ok(())
    })
}

/// Loads a full-model checkpoint.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lucenet_model_load(path: *const c_char, out: *mut *mut LucenetModel) -> LucenetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = path_arg(path)?;
        *out = boxed(load_checkpoint(&path)?);
        Ok(())
    })
}

/// Writes a full-model checkpoint.
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn lucenet_model_save(model: *const LucenetModel, path: *const c_char) -> LucenetStatus {
    guard(|| {
        let model = model_ref(model)?;
        model.save(&path_arg(path)?)?;
        Ok(())
    })
}

/// Releases a model handle. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn lucenet_model_free(model: *mut LucenetModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Side of the square input the model expects; 0 for a null handle.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lucenet_model_input_size(model: *const LucenetModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.config().input_size)
}

/// SHA-256 of the serialized model, hex encoded; free with `lucenet_string_free`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lucenet_model_fingerprint(model: *const LucenetModel, out: *mut *mut c_char) -> LucenetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let fp = model_ref(model)?.fingerprint();
        *out = CString::new(fp).expect("hex has no NUL").into_raw();
        Ok(())
    })
}

/// Inference logits for `count` row-major images of `input_size`² pixels in [0, 1].
///
/// # Safety
/// `pixels` must hold `count * input_size²` floats and `logits` room for `count`.
#[no_mangle]
pub unsafe extern "C" fn lucenet_model_predict(
    model: *const LucenetModel,
    pixels: *const f32,
    count: usize,
    logits: *mut f32,
) -> LucenetStatus {
    guard(|| {
        let model = model_ref(model)?;
        if count == 0 {
            return fail(LucenetStatus::InvalidArgument, "count must be at least 1");
        }
        let size = model.config().input_size;
        let data = slice_arg(pixels, count * size * size, "pixels")?;
        if logits.is_null() {
            return fail(LucenetStatus::NullPointer, "logits is null");
        }
        let batch = Tensor::new(&[count, 1, size, size], data.to_vec())
            .map_err(|e| Failure(LucenetStatus::InvalidArgument, e.to_string()))?;
        let out = model.predict(&batch)?;
        slice::from_raw_parts_mut(logits, count).copy_from_slice(out.data());
        Ok(())
    })
}

/// |d logit / d pixel| for one `width` x `height` image, written to `map`.
///
/// # Safety
/// `pixels` and `map` must each hold `width * height` floats.
#[no_mangle]
pub unsafe extern "C" fn lucenet_saliency(
    model: *const LucenetModel,
    pixels: *const f32,
    width: usize,
    height: usize,
    map: *mut f32,
) -> LucenetStatus {
    guard(|| {
        let model = model_ref(model)?;
        let data = slice_arg(pixels, width * height, "pixels")?;
        if map.is_null() {
            return fail(LucenetStatus::NullPointer, "map is null");
        }
        let image = SampleImage::new("ffi", Label::WellFixed, width, height, data.to_vec())?;
        let sal = saliency(model, &image)?;
        slice::from_raw_parts_mut(map, width * height).copy_from_slice(&sal.values);
        Ok(())
    })
}

/// ROC AUC of `scores` against `labels` (nonzero = positive). Both classes
/// must be present.
///
/// # Safety
/// `scores` and `labels` must each hold `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lucenet_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> LucenetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let scores = slice_arg(scores, n, "scores")?;
        let labels: Vec<bool> = slice_arg(labels, n, "labels")?.iter().map(|&l| l != 0).collect();
        *out = roc_curve(scores, &labels)?.auc;
        Ok(())
    })
}

/// Sensitivity, specificity and accuracy from confusion counts.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lucenet_metrics(
    tp: usize,
    fp: usize,
    tn: usize,
    fn_: usize,
    out: *mut LucenetMetrics,
) -> LucenetStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let c = ConfusionCounts::new(tp, fp, tn, fn_);
        let v = |m: lucenet::eval::Metric| m.value().unwrap_or(f64::NAN);
        *out = LucenetMetrics {
            sensitivity: v(sensitivity(&c)),
            specificity: v(specificity(&c)),
            accuracy: v(accuracy(&c)),
        };
        Ok(())
    })
}
