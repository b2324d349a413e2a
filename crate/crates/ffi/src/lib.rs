//! C interface to fsq.
//!
//! Every function returns an [`FsqStatus`]. On failure the message is kept
//! per thread and can be read with [`fsq_last_error`]. Objects are opaque and
//! owned by the caller once created; release them with the matching `_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use fsq_core::cache::LandscapeCache;
use fsq_core::error::Error;
use fsq_core::fiber::Fiber;
use fsq_core::io::load_fibers;
use fsq_core::query::{evaluate_set, parse_query_file, resolve, FiberResult, ResolvedQuery};
use fsq_core::scene::{load_scene, Scene};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FsqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Io = 4,
    Format = 5,
    Parse = 6,
    Resolve = 7,
    Geometry = 8,
    OutOfRange = 9,
    Panic = 10,
}

impl From<&Error> for FsqStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::DegreeOutOfRange(_) => FsqStatus::OutOfRange,
            Error::Geometry(_) | Error::GeometryMismatch(_) => FsqStatus::Geometry,
            Error::InvalidArgument(_) => FsqStatus::InvalidArgument,
            Error::Parse { .. } => FsqStatus::Parse,
            Error::Resolve(_) => FsqStatus::Resolve,
            Error::Format { .. } | Error::Scene { .. } => FsqStatus::Format,
            Error::Io { .. } => FsqStatus::Io,
        }
    }
}

/// A loaded scene of named structures.
pub struct FsqScene(Scene);

/// A query bound to a scene, ready to score fibers.
pub struct FsqQuery(ResolvedQuery);

/// An ordered collection of fibers.
pub struct FsqFiberSet(Vec<Fiber>);

/// Per-fiber scores from one evaluation.
pub struct FsqResults(Vec<FiberResult>);

/// Score of one fiber.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FsqScore {
    pub fiber_id: u64,
    pub degree: f64,
    pub accepted: bool,
    pub clause_count: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(FsqStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(FsqStatus::from(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FsqStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => FsqStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            FsqStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(FsqStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(FsqStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next fsq call on the same thread.
#[no_mangle]
pub extern "C" fn fsq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fsq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fsq_scene_load(path: *const c_char, out: *mut *mut FsqScene) -> FsqStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let scene = load_scene(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(FsqScene(scene)));
        Ok(())
    })
}

/// # Safety
/// `scene` must be null or come from `fsq_scene_load`, and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fsq_scene_free(scene: *mut FsqScene) {
    if !scene.is_null() {
        drop(Box::from_raw(scene));
    }
}

/// # Safety
/// `scene` must be a live scene; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fsq_scene_structure_count(scene: *const FsqScene, out: *mut usize) -> FsqStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(scene, "scene")?.0.len();
        Ok(())
    })
}

/// Parse query text (directives included) and bind it to `scene`.
/// `cache_dir` may be null to compute every landscape.
///
/// # Safety
/// Pointers must be valid; strings NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn fsq_query_compile(
    scene: *const FsqScene,
    text: *const c_char,
    cache_dir: *const c_char,
    out: *mut *mut FsqQuery,
) -> FsqStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let scene = ref_arg(scene, "scene")?;
        let qf = parse_query_file(str_arg(text, "text")?)?;
        let cache = if cache_dir.is_null() {
            None
        } else {
            Some(LandscapeCache::open(PathBuf::from(str_arg(cache_dir, "cache_dir")?))?)
        };
        let q = resolve(&qf.ast, &qf.options, &scene.0, cache.as_ref())?;
        *out = Box::into_raw(Box::new(FsqQuery(q)));
        Ok(())
    })
}

/// # Safety
/// `query` must be null or come from `fsq_query_compile`.
#[no_mangle]
pub unsafe extern "C" fn fsq_query_free(query: *mut FsqQuery) {
    if !query.is_null() {
        drop(Box::from_raw(query));
    }
}

/// # Safety
/// `query` must be a live query.
#[no_mangle]
pub unsafe extern "C" fn fsq_query_set_threshold(query: *mut FsqQuery, threshold: f64) -> FsqStatus {
    guard(|| {
        let q = out_arg(query, "query")?;
        q.0 = q.0.clone().with_threshold(threshold)?;
        Ok(())
    })
}

/// # Safety
/// `query` must be a live query; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fsq_query_clause_count(query: *const FsqQuery, out: *mut usize) -> FsqStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(query, "query")?.0.clauses.len();
        Ok(())
    })
}

/// Create an empty fiber set.
#[no_mangle]
pub extern "C" fn fsq_fibers_new() -> *mut FsqFiberSet {
    Box::into_raw(Box::new(FsqFiberSet(Vec::new())))
}

/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fsq_fibers_load(path: *const c_char, out: *mut *mut FsqFiberSet) -> FsqStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let set = load_fibers(str_arg(path, "path")?)?;
        *out = Box::into_raw(Box::new(FsqFiberSet(set.into_fibers())));
        Ok(())
    })
}

/// Append a fiber. `xyz` holds `n_points` points as consecutive x, y, z in mm.
///
/// # Safety
/// `xyz` must point to `3 * n_points` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn fsq_fibers_push(
    set: *mut FsqFiberSet,
    id: u64,
    xyz: *const f64,
    n_points: usize,
) -> FsqStatus {
    guard(|| {
        let set = out_arg(set, "set")?;
        if xyz.is_null() && n_points > 0 {
            return Err(null("xyz"));
        }
        if set.0.iter().any(|f| f.id() == id) {
            return Err(Fail(FsqStatus::InvalidArgument, format!("duplicate fiber id {id}")));
        }
        let coords = if n_points == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(xyz, 3 * n_points)
        };
        let points = coords.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
        set.0.push(Fiber::new(id, points)?);
        Ok(())
    })
}

/// # Safety
/// `set` must be a live fiber set; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fsq_fibers_len(set: *const FsqFiberSet, out: *mut usize) -> FsqStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(set, "set")?.0.len();
        Ok(())
    })
}

/// # Safety
/// `set` must be null or a fiber set not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fsq_fibers_free(set: *mut FsqFiberSet) {
    if !set.is_null() {
        drop(Box::from_raw(set));
    }
}

/// Score every fiber of `set`, in input order.
///
/// # Safety
/// Handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fsq_evaluate(
    query: *const FsqQuery,
    set: *const FsqFiberSet,
    out: *mut *mut FsqResults,
) -> FsqStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let q = ref_arg(query, "query")?;
        let set = ref_arg(set, "set")?;
        *out = Box::into_raw(Box::new(FsqResults(evaluate_set(&q.0, &set.0))));
        Ok(())
    })
}

/// # Safety
/// `results` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fsq_results_len(results: *const FsqResults, out: *mut usize) -> FsqStatus {
    guard(|| {
        *out_arg(out, "out")? = ref_arg(results, "results")?.0.len();
        Ok(())
    })
}

unsafe fn result_at<'a>(results: *const FsqResults, index: usize) -> Result<&'a FiberResult, Fail> {
    let r = ref_arg(results, "results")?;
    r.0.get(index).ok_or_else(|| {
        Fail(
            FsqStatus::OutOfRange,
            format!("index {index} out of range for {} results", r.0.len()),
        )
    })
}

/// # Safety
/// `results` must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fsq_results_get(
    results: *const FsqResults,
    index: usize,
    out: *mut FsqScore,
) -> FsqStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let r = result_at(results, index)?;
        *out = FsqScore {
            fiber_id: r.id,
            degree: r.degree,
            accepted: r.accepted,
            clause_count: r.clause_degrees.len(),
        };
        Ok(())
    })
}

/// Copy up to `cap` clause degrees of result `index` into `buf`.
///
/// # Safety
/// `buf` must have room for `cap` doubles (it may be null when `cap` is 0).
#[no_mangle]
pub unsafe extern "C" fn fsq_results_clause_degrees(
    results: *const FsqResults,
    index: usize,
    buf: *mut f64,
    cap: usize,
    written: *mut usize,
) -> FsqStatus {
    guard(|| {
        let r = result_at(results, index)?;
        let n = r.clause_degrees.len().min(cap);
        if n > 0 {
            if buf.is_null() {
                return Err(null("buf"));
            }
            std::slice::from_raw_parts_mut(buf, n).copy_from_slice(&r.clause_degrees[..n]);
        }
        if let Some(w) = written.as_mut() {
            *w = n;
        }
        Ok(())
    })
}

/// # Safety
/// `results` must be null or come from `fsq_evaluate`.
#[no_mangle]
pub unsafe extern "C" fn fsq_results_free(results: *mut FsqResults) {
    if !results.is_null() {
        drop(Box::from_raw(results));
    }
}
