//! C ABI over `rstcnn`.
//!
//! Every fallible function returns an [`RstStatus`]; on failure the message
//! is kept per thread and read back with [`rst_last_error`]. Handles are
//! opaque, created by `*_build`/`*_load`/`*_from_config` functions and
//! released with the matching `*_free`. Arrays are row-major `f64`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use rstcnn::analysis::equivariance_errors;
use rstcnn::basis::{bessel_j, bessel_zero, build_basis, sample_filter_bank, BankGrid, FilterBank, SpatialKind};
use rstcnn::group::{FeatureMap, GroupElement, ImageTensor};
use rstcnn::net::{Model, NetworkConfig};
use rstcnn::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RstStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Parse = 4,
    Dimension = 5,
    Unsupported = 6,
    Precondition = 7,
    Undefined = 8,
    Io = 9,
    Panic = 10,
}

/// Spatial basis selector.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RstBasisKind {
    FbDisk = 0,
    SlSquare = 1,
}

/// Sampled filter bank `[K, N_r, N_s, L, L]`.
pub struct RstBank(FilterBank);

/// Network with synthesized filters.
pub struct RstModel(Model);

/// Feature map `[channels, N_r, N_s, H, W]`.
pub struct RstFeature(FeatureMap);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> RstStatus {
    match e {
        Error::UnsupportedOrder { .. } | Error::PoolExhausted { .. } => RstStatus::Unsupported,
        Error::EvenStencil(_) | Error::Config(_) => RstStatus::Config,
        Error::DimensionMismatch(_) | Error::OffLattice { .. } => RstStatus::Dimension,
        Error::Parse { .. } | Error::CountMismatch { .. } => RstStatus::Parse,
        Error::UndefinedError => RstStatus::Undefined,
        Error::Precondition { .. } => RstStatus::Precondition,
        Error::Cell { source, .. } => status_of(source),
        Error::Io(_) => RstStatus::Io,
    }
}

struct Fail(RstStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RstStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RstStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            RstStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(RstStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(RstStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

/// Copy the calling thread's last error message into `buf` as a
/// NUL-terminated string, truncating to `len - 1` bytes. Returns the full
/// message length in bytes, excluding the terminator.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn rst_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Bessel function of the first kind `J_order(x)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rst_bessel_j(order: u32, x: f64, out: *mut f64) -> RstStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = bessel_j(order, x)?;
        Ok(())
    })
}

/// The `q`-th positive zero (`q >= 1`) of `J_order`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rst_bessel_zero(order: u32, q: u32, out: *mut f64) -> RstStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = bessel_zero(order, q)?;
        Ok(())
    })
}

/// Sample the first `k` spatial modes on an `L x L` stencil for every
/// rotation and scale sample.
///
/// # Safety
/// `out` must be a valid pointer; on success it receives a new handle.
#[no_mangle]
pub unsafe extern "C" fn rst_bank_build(
    kind: RstBasisKind,
    k: usize,
    n_rot: usize,
    n_scale: usize,
    t: f64,
    stencil: usize,
    layer_scale: i32,
    out: *mut *mut RstBank,
) -> RstStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let kind = match kind {
            RstBasisKind::FbDisk => SpatialKind::FbDisk,
            RstBasisKind::SlSquare => SpatialKind::SlSquare,
        };
        let basis = build_basis(kind, k, 0, 1)?;
        let grid = BankGrid {
            n_rot,
            n_scale,
            t,
            stencil,
            layer_scale,
        };
        let bank = sample_filter_bank(&basis, &grid)?;
        *out = Box::into_raw(Box::new(RstBank(bank)));
        Ok(())
    })
}

/// Read an RSTBANK1 filter bank file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rst_bank_load(path: *const c_char, out: *mut *mut RstBank) -> RstStatus {
    guard(|| {
        let path = PathBuf::from(str_arg(path, "path")?);
        let out = out_arg(out, "out")?;
        *out = Box::into_raw(Box::new(RstBank(FilterBank::load(path)?)));
        Ok(())
    })
}

/// Write a filter bank as an RSTBANK1 file.
///
/// # Safety
/// `bank` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn rst_bank_save(bank: *const RstBank, path: *const c_char) -> RstStatus {
    guard(|| {
        let bank = handle(bank, "bank")?;
        let path = PathBuf::from(str_arg(path, "path")?);
        bank.0.save(path)?;
        Ok(())
    })
}

/// Write `[K, N_r, N_s, L, L]` to `shape`.
///
/// # Safety
/// `bank` must be a live handle and `shape` point to 5 writable values.
#[no_mangle]
pub unsafe extern "C" fn rst_bank_shape(bank: *const RstBank, shape: *mut usize) -> RstStatus {
    guard(|| {
        let bank = handle(bank, "bank")?;
        if shape.is_null() {
            return Err(null("shape"));
        }
        ptr::copy_nonoverlapping(bank.0.shape().as_ptr(), shape, 5);
        Ok(())
    })
}

/// Borrow the bank's values. The pointer stays valid until the bank is
/// freed.
///
/// # Safety
/// `bank` must be a live handle; `values` and `len` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rst_bank_values(
    bank: *const RstBank,
    values: *mut *const f64,
    len: *mut usize,
) -> RstStatus {
    guard(|| {
        let bank = handle(bank, "bank")?;
        let values = out_arg(values, "values")?;
        let len = out_arg(len, "len")?;
        *values = bank.0.values.as_ptr();
        *len = bank.0.values.len();
        Ok(())
    })
}

/// # Safety
/// `bank` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rst_bank_free(bank: *mut RstBank) {
    if !bank.is_null() {
        drop(Box::from_raw(bank));
    }
}

/// Build a network from TOML config text with A2-normalized random
/// coefficients drawn from `seed`.
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rst_model_from_config(
    config: *const c_char,
    seed: u64,
    out: *mut *mut RstModel,
) -> RstStatus {
    guard(|| {
        let text = str_arg(config, "config")?;
        let out = out_arg(out, "out")?;
        let model = Model::random(NetworkConfig::from_toml_str(text)?, seed)?;
        *out = Box::into_raw(Box::new(RstModel(model)));
        Ok(())
    })
}

/// Number of layers.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rst_model_depth(model: *const RstModel, out: *mut usize) -> RstStatus {
    guard(|| {
        let model = handle(model, "model")?;
        *out_arg(out, "out")? = model.0.depth();
        Ok(())
    })
}

unsafe fn image_arg(
    values: *const f64,
    channels: usize,
    height: usize,
    width: usize,
) -> Result<ImageTensor, Fail> {
    if values.is_null() {
        return Err(null("input"));
    }
    let n = channels
        .checked_mul(height)
        .and_then(|v| v.checked_mul(width))
        .ok_or_else(|| Fail(RstStatus::InvalidArgument, "input size overflows".into()))?;
    let data = std::slice::from_raw_parts(values, n).to_vec();
    Ok(ImageTensor::from_vec(channels, height, width, data)?)
}

/// Run the network on a `[channels, height, width]` image.
///
/// # Safety
/// `model` must be a live handle, `input` point to
/// `channels * height * width` values and `out` be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rst_model_forward(
    model: *const RstModel,
    input: *const f64,
    channels: usize,
    height: usize,
    width: usize,
    out: *mut *mut RstFeature,
) -> RstStatus {
    guard(|| {
        let model = handle(model, "model")?;
        let out = out_arg(out, "out")?;
        let x = image_arg(input, channels, height, width)?;
        *out = Box::into_raw(Box::new(RstFeature(model.0.forward(&x)?)));
        Ok(())
    })
}

/// Relative equivariance error of every layer for the group element
/// `(eta, beta, (vx, vy))`, written to `errors[0..depth]`.
///
/// # Safety
/// `model` must be a live handle, `input` point to
/// `channels * height * width` values and `errors` to `errors_len` slots.
#[no_mangle]
pub unsafe extern "C" fn rst_model_equivariance_errors(
    model: *const RstModel,
    input: *const f64,
    channels: usize,
    height: usize,
    width: usize,
    eta: f64,
    beta: f64,
    vx: f64,
    vy: f64,
    margin: usize,
    errors: *mut f64,
    errors_len: usize,
) -> RstStatus {
    guard(|| {
        let model = handle(model, "model")?;
        if errors.is_null() {
            return Err(null("errors"));
        }
        if errors_len < model.0.depth() {
            return Err(Fail(
                RstStatus::InvalidArgument,
                format!("errors holds {errors_len} slots, need {}", model.0.depth()),
            ));
        }
        let x = image_arg(input, channels, height, width)?;
        let g = GroupElement::new(eta, beta, [vx, vy]);
        let e = equivariance_errors(&model.0, &x, &g, margin)?;
        ptr::copy_nonoverlapping(e.as_ptr(), errors, e.len());
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rst_model_free(model: *mut RstModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Write `[channels, N_r, N_s, H, W]` to `shape`.
///
/// # Safety
/// `feature` must be a live handle and `shape` point to 5 writable values.
#[no_mangle]
pub unsafe extern "C" fn rst_feature_shape(feature: *const RstFeature, shape: *mut usize) -> RstStatus {
    guard(|| {
        let f = handle(feature, "feature")?;
        if shape.is_null() {
            return Err(null("shape"));
        }
        ptr::copy_nonoverlapping(f.0.shape().as_ptr(), shape, 5);
        Ok(())
    })
}

/// Borrow the feature values. The pointer stays valid until the feature is
/// freed.
///
/// # Safety
/// `feature` must be a live handle; `values` and `len` valid pointers.
#[no_mangle]
pub unsafe extern "C" fn rst_feature_values(
    feature: *const RstFeature,
    values: *mut *const f64,
    len: *mut usize,
) -> RstStatus {
    guard(|| {
        let f = handle(feature, "feature")?;
        let values = out_arg(values, "values")?;
        let len = out_arg(len, "len")?;
        *values = f.0.values.as_ptr();
        *len = f.0.values.len();
        Ok(())
    })
}

/// # Safety
/// `feature` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rst_feature_free(feature: *mut RstFeature) {
    if !feature.is_null() {
        drop(Box::from_raw(feature));
    }
}
