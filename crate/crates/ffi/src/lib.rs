//! C ABI over the instaffect library.
//!
//! Every fallible function returns an [`IaStatus`]; on failure a message is
//! available from [`ia_last_error`] on the same thread. Objects are handed out
//! as opaque handles and must be released with the matching `*_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use instaffect::metrics::EvalReport;
use instaffect::mrmr::{mutual_information, DiscretizedSeries};
use instaffect::network::{read_model, NetworkModel};
use instaffect::pipeline::{FramePredictor, Workspace};
use instaffect::svr::SvrModel;
use instaffect::{streams, Error, Tensor};

/// Samples per audio window (60 ms at 44.1 kHz).
pub const IA_AUDIO_WINDOW: usize = 2646;
const _: () = assert!(IA_AUDIO_WINDOW == streams::AUDIO_WINDOW);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Shape = 3,
    Io = 4,
    Format = 5,
    MissingArtifact = 6,
    Numeric = 7,
    Undefined = 8,
    Panic = 9,
}

impl From<&Error> for IaStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Shape(_) => IaStatus::Shape,
            Error::InvalidArgument(_) | Error::Config(_) => IaStatus::InvalidArgument,
            Error::Numeric(_) | Error::NoQualifyingWindow | Error::Leakage(_) => IaStatus::Numeric,
            Error::Undefined(_) => IaStatus::Undefined,
            Error::Format { .. } | Error::Corpus { .. } => IaStatus::Format,
            Error::Io { .. } => IaStatus::Io,
            Error::MissingArtifact(_) => IaStatus::MissingArtifact,
        }
    }
}

/// Opaque trained SVR.
pub struct IaSvrModel(SvrModel);

/// Opaque stream CNN.
pub struct IaNetwork(NetworkModel);

/// Opaque frame-to-rating predictor loaded from a pipeline work directory.
pub struct IaPredictor(FramePredictor);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct IaEvalReport {
    pub n: usize,
    pub rmse: f64,
    pub mae: f64,
    /// Meaningful only when `cc_defined` is true (both series vary).
    pub cc: f64,
    pub cc_defined: bool,
    pub ccc: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

type FfiResult<T> = Result<T, (IaStatus, String)>;

fn lib_err(e: Error) -> (IaStatus, String) {
    ((&e).into(), e.to_string())
}

fn null(what: &str) -> (IaStatus, String) {
    (IaStatus::NullPointer, format!("{what} is null"))
}

/// Runs `body`, converting errors and panics into a status plus last-error message.
fn guard(body: impl FnOnce() -> FfiResult<()>) -> IaStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => {
            set_error("");
            IaStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            IaStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> FfiResult<&'a [T]> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(null(what))
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> FfiResult<&'a mut [T]> {
    if len == 0 {
        Ok(&mut [])
    } else if p.is_null() {
        Err(null(what))
    } else {
        Ok(std::slice::from_raw_parts_mut(p, len))
    }
}

unsafe fn to_path(p: *const c_char) -> FfiResult<PathBuf> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (IaStatus::InvalidArgument, "path is not valid UTF-8".to_string()))?;
    Ok(PathBuf::from(s))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> FfiResult<()> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

unsafe fn handle<'a, T>(p: *const T) -> FfiResult<&'a T> {
    p.as_ref().ok_or_else(|| null("handle"))
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call into this library on the
/// same thread.
#[no_mangle]
pub extern "C" fn ia_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ia_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ia_svr_model_load(path: *const c_char, out: *mut *mut IaSvrModel) -> IaStatus {
    guard(|| {
        let model = SvrModel::read(&to_path(path)?).map_err(lib_err)?;
        write_out(out, boxed(IaSvrModel(model)), "out")
    })
}

/// # Safety
/// `model` must come from [`ia_svr_model_load`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ia_svr_model_dim(model: *const IaSvrModel, out: *mut usize) -> IaStatus {
    guard(|| write_out(out, handle(model)?.0.dim, "out"))
}

/// Predicts the rating for one feature vector of `len` values, which must
/// equal the model dimension.
///
/// # Safety
/// `x` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ia_svr_model_predict(
    model: *const IaSvrModel,
    x: *const f64,
    len: usize,
    out: *mut f64,
) -> IaStatus {
    guard(|| {
        let m = handle(model)?;
        let v = m.0.predict(slice(x, len, "x")?).map_err(lib_err)?;
        write_out(out, v, "out")
    })
}

/// # Safety
/// `model` must be null or come from [`ia_svr_model_load`], and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ia_svr_model_free(model: *mut IaSvrModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Loads a stream CNN written by the `train-cnn` stage.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ia_network_load(path: *const c_char, out: *mut *mut IaNetwork) -> IaStatus {
    guard(|| {
        let net = read_model(&to_path(path)?).map_err(lib_err)?;
        write_out(out, boxed(IaNetwork(net)), "out")
    })
}

/// Number of input values per sample (channels times spatial extent).
///
/// # Safety
/// `net` must come from [`ia_network_load`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ia_network_input_len(net: *const IaNetwork, out: *mut usize) -> IaStatus {
    guard(|| write_out(out, handle(net)?.0.input_shape().iter().product(), "out"))
}

/// # Safety
/// `net` must come from [`ia_network_load`]; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ia_network_feature_width(net: *const IaNetwork, out: *mut usize) -> IaStatus {
    guard(|| write_out(out, handle(net)?.0.feature_width(), "out"))
}

/// Writes the learned feature vector of one sample into `out`, which must
/// hold exactly the feature width.
///
/// # Safety
/// `sample` must point to `len` floats and `out` to `out_len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ia_network_extract(
    net: *const IaNetwork,
    sample: *const f32,
    len: usize,
    out: *mut f64,
    out_len: usize,
) -> IaStatus {
    guard(|| {
        let n = &handle(net)?.0;
        let x = Tensor::new(n.input_shape().to_vec(), slice(sample, len, "sample")?.to_vec()).map_err(lib_err)?;
        let f = n.extract_features_from(&[x]).map_err(lib_err)?;
        let dst = slice_mut(out, out_len, "out")?;
        if dst.len() != f.cols() {
            return Err((
                IaStatus::Shape,
                format!("output holds {} values, feature width is {}", dst.len(), f.cols()),
            ));
        }
        dst.copy_from_slice(f.row(0));
        Ok(())
    })
}

/// # Safety
/// `net` must be null or come from [`ia_network_load`], and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ia_network_free(net: *mut IaNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Loads the trained artifacts of a pipeline work directory (after `fit-svr`).
///
/// # Safety
/// `work_dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ia_predictor_open(work_dir: *const c_char, out: *mut *mut IaPredictor) -> IaStatus {
    guard(|| {
        let p = FramePredictor::load(&Workspace::new(&to_path(work_dir)?)).map_err(lib_err)?;
        write_out(out, boxed(IaPredictor(p)), "out")
    })
}

/// Predicts the rating of one frame: `frame` holds H*W pixels in [0, 1]
/// (row-major, as the video stream expects) and `audio` the frame's
/// [`IA_AUDIO_WINDOW`] samples in [-1, 1].
///
/// # Safety
/// `frame` and `audio` must point to `frame_len` and `audio_len` floats;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ia_predictor_predict(
    predictor: *const IaPredictor,
    frame: *const f32,
    frame_len: usize,
    audio: *const f32,
    audio_len: usize,
    out: *mut f64,
) -> IaStatus {
    guard(|| {
        let p = &handle(predictor)?.0;
        let v = Tensor::new(
            p.video.input_shape().to_vec(),
            slice(frame, frame_len, "frame")?.to_vec(),
        )
        .map_err(lib_err)?;
        let a = Tensor::new(
            p.audio.input_shape().to_vec(),
            slice(audio, audio_len, "audio")?.to_vec(),
        )
        .map_err(lib_err)?;
        let r = p.predict_frame(v, a).map_err(lib_err)?;
        write_out(out, r, "out")
    })
}

/// # Safety
/// `predictor` must be null or come from [`ia_predictor_open`], and is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn ia_predictor_free(predictor: *mut IaPredictor) {
    if !predictor.is_null() {
        drop(Box::from_raw(predictor));
    }
}

/// RMSE, MAE, CC and CCC of `n` predictions against `n` ground-truth values.
///
/// # Safety
/// `pred` and `truth` must point to `n` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ia_evaluate(
    pred: *const f64,
    truth: *const f64,
    n: usize,
    out: *mut IaEvalReport,
) -> IaStatus {
    guard(|| {
        let r = EvalReport::compute(slice(pred, n, "pred")?, slice(truth, n, "truth")?).map_err(lib_err)?;
        let report = IaEvalReport {
            n: r.n,
            rmse: r.rmse,
            mae: r.mae,
            cc: r.cc.unwrap_or(f64::NAN),
            cc_defined: r.cc.is_some(),
            ccc: r.ccc,
        };
        write_out(out, report, "out")
    })
}

/// Mutual information in nats between two level sequences of length `n`,
/// with levels in `[0, bins_a)` and `[0, bins_b)`.
///
/// # Safety
/// `a` and `b` must point to `n` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ia_mutual_information(
    a: *const usize,
    b: *const usize,
    n: usize,
    bins_a: usize,
    bins_b: usize,
    out: *mut f64,
) -> IaStatus {
    guard(|| {
        let sa = DiscretizedSeries::from_levels(slice(a, n, "a")?.to_vec(), bins_a).map_err(lib_err)?;
        let sb = DiscretizedSeries::from_levels(slice(b, n, "b")?.to_vec(), bins_b).map_err(lib_err)?;
        write_out(out, mutual_information(&sa, &sb).map_err(lib_err)?, "out")
    })
}

/// Copies audio window `index` (zero-padded past the end of the signal) into
/// `out`, which must hold [`IA_AUDIO_WINDOW`] samples.
///
/// # Safety
/// `samples` must point to `n` floats and `out` to `out_len` writable floats.
#[no_mangle]
pub unsafe extern "C" fn ia_audio_window(
    samples: *const f32,
    n: usize,
    index: usize,
    out: *mut f32,
    out_len: usize,
) -> IaStatus {
    guard(|| {
        if out_len != IA_AUDIO_WINDOW {
            return Err((
                IaStatus::Shape,
                format!("output holds {out_len} samples, a window has {IA_AUDIO_WINDOW}"),
            ));
        }
        let w = streams::audio_window(slice(samples, n, "samples")?, index);
        slice_mut(out, out_len, "out")?.copy_from_slice(&w);
        Ok(())
    })
}
