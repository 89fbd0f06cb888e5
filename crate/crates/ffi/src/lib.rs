//! C ABI over the `bilmdm` library.
//!
//! Every function returns a [`BlmdmStatus`]; on failure the message is kept
//! per thread and read with [`bilmdm_last_error`]. Cubes are opaque handles
//! released with [`bilmdm_cube_free`]; strings returned through out-pointers
//! are released with [`bilmdm_string_free`]. Complex data crosses the
//! boundary as interleaved `(re, im)` doubles in BLMD order (column-major
//! within a frame, frames last).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::path::PathBuf;

use bilmdm::io::{read_blmd, write_blmd};
use bilmdm::metrics::evaluate;
use bilmdm::pipeline::{run_pipeline, PipelineConfig};
use bilmdm::{Error, ImageSequence, C64};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlmdmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Io = 4,
    Format = 5,
    Shape = 6,
    Numerical = 7,
    Panic = 8,
}

/// Opaque complex `n_p × n_f × n_fr` cube.
pub struct BlmdmCube {
    inner: ImageSequence,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> BlmdmStatus {
    match e {
        Error::Stage { source, .. } => status_of(source),
        Error::Config(_) | Error::Json(_) => BlmdmStatus::Config,
        Error::Io { .. } => BlmdmStatus::Io,
        Error::BadMagic { .. }
        | Error::UnsupportedVersion { .. }
        | Error::UnsupportedDtype { .. }
        | Error::Truncated { .. } => BlmdmStatus::Format,
        Error::Shape(_) => BlmdmStatus::Shape,
        Error::Numerical(_) => BlmdmStatus::Numerical,
    }
}

struct Failure(BlmdmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = match e.stage() {
            Some(_) => e.to_string(),
            None => format!("error: {e}"),
        };
        Failure(status_of(&e), msg)
    }
}

fn null(what: &str) -> Failure {
    Failure(BlmdmStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, records any failure and converts panics into a status.
fn guard(f: impl FnOnce() -> Result<(), Failure> + UnwindSafe) -> BlmdmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(f) {
        Ok(Ok(())) => BlmdmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            BlmdmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(BlmdmStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn cube_arg<'a>(p: *const BlmdmCube, what: &str) -> Result<&'a BlmdmCube, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

fn give_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(BlmdmStatus::InvalidArgument, "interior NUL in output".into()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bilmdm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL after a success.
/// The pointer stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn bilmdm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Builds a cube from `2·n_p·n_f·n_fr` interleaved doubles.
///
/// # Safety
/// `data` must point to that many readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bilmdm_cube_new(
    n_p: usize,
    n_f: usize,
    n_fr: usize,
    data: *const f64,
    out: *mut *mut BlmdmCube,
) -> BlmdmStatus {
    guard(|| {
        if data.is_null() {
            return Err(null("data"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let count = n_p
            .checked_mul(n_f)
            .and_then(|v| v.checked_mul(n_fr))
            .ok_or_else(|| Failure(BlmdmStatus::InvalidArgument, "dimensions overflow".into()))?;
        let raw = std::slice::from_raw_parts(data, 2 * count);
        let values = raw.chunks_exact(2).map(|p| C64::new(p[0], p[1])).collect();
        let inner = ImageSequence::new(n_p, n_f, n_fr, values)?;
        *out = Box::into_raw(Box::new(BlmdmCube { inner }));
        Ok(())
    })
}

/// Reads a 3-d BLMD file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bilmdm_cube_read(path: *const c_char, out: *mut *mut BlmdmCube) -> BlmdmStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let inner = read_blmd(&PathBuf::from(path))?;
        *out = Box::into_raw(Box::new(BlmdmCube { inner }));
        Ok(())
    })
}

/// Writes `cube` as a BLMD file.
///
/// # Safety
/// `cube` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bilmdm_cube_write(cube: *const BlmdmCube, path: *const c_char) -> BlmdmStatus {
    guard(|| {
        let cube = cube_arg(cube, "cube")?;
        let path = str_arg(path, "path")?;
        write_blmd(&PathBuf::from(path), &cube.inner)?;
        Ok(())
    })
}

/// # Safety
/// `cube` must be a live handle; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn bilmdm_cube_dims(
    cube: *const BlmdmCube,
    n_p: *mut usize,
    n_f: *mut usize,
    n_fr: *mut usize,
) -> BlmdmStatus {
    guard(|| {
        let cube = cube_arg(cube, "cube")?;
        if n_p.is_null() || n_f.is_null() || n_fr.is_null() {
            return Err(null("dimension out-pointer"));
        }
        let (a, b, c) = cube.inner.shape();
        *n_p = a;
        *n_f = b;
        *n_fr = c;
        Ok(())
    })
}

/// Copies the cube into `out` as interleaved doubles. `len` is the capacity
/// of `out` in doubles and must be at least `2·n_p·n_f·n_fr`.
///
/// # Safety
/// `cube` must be a live handle; `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn bilmdm_cube_copy_data(cube: *const BlmdmCube, out: *mut f64, len: usize) -> BlmdmStatus {
    guard(|| {
        let cube = cube_arg(cube, "cube")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let data = cube.inner.data();
        if len < 2 * data.len() {
            return Err(Failure(
                BlmdmStatus::InvalidArgument,
                format!("buffer holds {len} doubles, cube needs {}", 2 * data.len()),
            ));
        }
        let dst = std::slice::from_raw_parts_mut(out, 2 * data.len());
        for (pair, z) in dst.chunks_exact_mut(2).zip(data) {
            pair[0] = z.re;
            pair[1] = z.im;
        }
        Ok(())
    })
}

/// Releases a cube; NULL is ignored.
///
/// # Safety
/// `cube` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bilmdm_cube_free(cube: *mut BlmdmCube) {
    if !cube.is_null() {
        drop(Box::from_raw(cube));
    }
}

/// Runs the full pipeline from a JSON configuration and returns report.json
/// contents through `report_json`.
///
/// # Safety
/// `config_json` must be a NUL-terminated string; `report_json` writable.
#[no_mangle]
pub unsafe extern "C" fn bilmdm_run_pipeline(config_json: *const c_char, report_json: *mut *mut c_char) -> BlmdmStatus {
    guard(|| {
        let text = str_arg(config_json, "config_json")?;
        if report_json.is_null() {
            return Err(null("report_json"));
        }
        let cfg = PipelineConfig::from_json(text)?;
        let run = run_pipeline(&cfg)?;
        let json = serde_json::to_string_pretty(&run.report).map_err(Error::from)?;
        give_string(report_json, json)
    })
}

/// Scores `recon` against `truth` and returns the metrics as JSON.
///
/// # Safety
/// Both cubes must be live handles; `metrics_json` must be writable.
#[no_mangle]
pub unsafe extern "C" fn bilmdm_metrics(
    truth: *const BlmdmCube,
    recon: *const BlmdmCube,
    metrics_json: *mut *mut c_char,
) -> BlmdmStatus {
    guard(|| {
        let truth = cube_arg(truth, "truth")?;
        let recon = cube_arg(recon, "recon")?;
        if metrics_json.is_null() {
            return Err(null("metrics_json"));
        }
        let report = evaluate(&truth.inner, &recon.inner)?;
        let json = serde_json::to_string(&report).map_err(Error::from)?;
        give_string(metrics_json, json)
    })
}

/// Releases a string returned by this library; NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn bilmdm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
