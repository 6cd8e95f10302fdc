//! C interface to graspd.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! style functions and released with the matching `*_free`. Every fallible
//! call returns a [`GraspdStatus`]; on failure a description is available
//! from [`graspd_last_error`] on the same thread until the next call.
//! Strings returned by the library must be released with
//! [`graspd_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use graspd::cli::SynthConfig;
use graspd::hand::HandModel;
use graspd::math::Vec3;
use graspd::metrics::evaluate_grasp;
use graspd::opt::{feasible, synthesize, Checkpoint, SynthesisInputs};
use graspd::sdf::{Sdf, SdfGrid};
use graspd::sim::mass_properties;

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GraspdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Numerical = 4,
    Panic = 5,
}

/// An articulated hand.
pub struct GraspdHand {
    model: HandModel,
}

/// A signed distance grid.
pub struct GraspdSdf {
    grid: SdfGrid,
}

/// The candidate kept by one synthesis run.
pub struct GraspdGrasp {
    best: Checkpoint,
    feasible: bool,
}

/// Scores for one grasp. `ratio` is negative when nothing interpenetrates;
/// `displacement` is infinite when the shake test diverged.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GraspdEvalReport {
    pub contact_area: f64,
    pub interpen_volume: f64,
    pub ratio: f64,
    pub epsilon: f64,
    pub displacement: f64,
    pub contact_count: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn fail(status: GraspdStatus, msg: impl Into<String>) -> GraspdStatus {
    set_error(msg);
    status
}

fn guard<F: FnOnce() -> GraspdStatus>(f: F) -> GraspdStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(GraspdStatus::Panic, msg)
        }
    }
}

unsafe fn read_str<'a>(s: *const c_char) -> Result<&'a str, GraspdStatus> {
    if s.is_null() {
        return Err(fail(GraspdStatus::NullPointer, "string argument is null"));
    }
    CStr::from_ptr(s).to_str().map_err(|e| fail(GraspdStatus::InvalidArgument, format!("not UTF-8: {e}")))
}

unsafe fn read_config(json: *const c_char) -> Result<SynthConfig, GraspdStatus> {
    if json.is_null() {
        return Ok(SynthConfig::default());
    }
    let text = read_str(json)?;
    serde_json::from_str(text).map_err(|e| fail(GraspdStatus::InvalidArgument, format!("config: {e}")))
}

fn boxed<T>(value: T, out: *mut *mut T) -> GraspdStatus {
    if out.is_null() {
        return fail(GraspdStatus::NullPointer, "output pointer is null");
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    GraspdStatus::Ok
}

/// Message for the last failed call on this thread, or null. Valid until
/// the next call into the library from this thread.
#[no_mangle]
pub extern "C" fn graspd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn graspd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Loads a bundled hand (`"tripod"` or `"pinch"`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn graspd_hand_builtin(name: *const c_char, out: *mut *mut GraspdHand) -> GraspdStatus {
    guard(|| {
        let name = match read_str(name) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match HandModel::builtin(name) {
            Ok(model) => boxed(GraspdHand { model }, out),
            Err(e) => fail(GraspdStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Parses a hand description.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn graspd_hand_from_json(json: *const c_char, out: *mut *mut GraspdHand) -> GraspdStatus {
    guard(|| {
        let text = match read_str(json) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match HandModel::from_json(text) {
            Ok(model) => boxed(GraspdHand { model }, out),
            Err(e) => fail(GraspdStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `hand` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn graspd_hand_free(hand: *mut GraspdHand) {
    if !hand.is_null() {
        drop(Box::from_raw(hand));
    }
}

/// Number of joint angles; 0 for a null handle.
///
/// # Safety
/// `hand` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn graspd_hand_num_joints(hand: *const GraspdHand) -> usize {
    hand.as_ref().map_or(0, |h| h.model.num_joints())
}

/// Number of surface sample points; 0 for a null handle.
///
/// # Safety
/// `hand` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn graspd_hand_num_points(hand: *const GraspdHand) -> usize {
    hand.as_ref().map_or(0, |h| h.model.num_points())
}

/// Reads a binary grid file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn graspd_sdf_load(path: *const c_char, out: *mut *mut GraspdSdf) -> GraspdStatus {
    guard(|| {
        let p = match read_str(path) {
            Ok(s) => s,
            Err(s) => return s,
        };
        match SdfGrid::load(Path::new(p)) {
            Ok(grid) => boxed(GraspdSdf { grid }, out),
            Err(graspd::sdf::SdfError::Io(e)) => fail(GraspdStatus::Io, format!("{p}: {e}")),
            Err(e) => fail(GraspdStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// Builds a grid from node values in x-fastest order over the box
/// `min..max`.
///
/// # Safety
/// `dims`, `min` and `max` must point to 3 values, `values` to `len`.
#[no_mangle]
pub unsafe extern "C" fn graspd_sdf_from_values(
    dims: *const usize,
    min: *const f64,
    max: *const f64,
    values: *const f64,
    len: usize,
    out: *mut *mut GraspdSdf,
) -> GraspdStatus {
    guard(|| {
        if dims.is_null() || min.is_null() || max.is_null() || (values.is_null() && len > 0) {
            return fail(GraspdStatus::NullPointer, "grid argument is null");
        }
        let d = std::slice::from_raw_parts(dims, 3);
        let lo = std::slice::from_raw_parts(min, 3);
        let hi = std::slice::from_raw_parts(max, 3);
        let vals = if len == 0 { Vec::new() } else { std::slice::from_raw_parts(values, len).to_vec() };
        match SdfGrid::new([d[0], d[1], d[2]], Vec3::new(lo[0], lo[1], lo[2]), Vec3::new(hi[0], hi[1], hi[2]), vals) {
            Ok(grid) => boxed(GraspdSdf { grid }, out),
            Err(e) => fail(GraspdStatus::InvalidArgument, e.to_string()),
        }
    })
}

/// # Safety
/// `sdf` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn graspd_sdf_free(sdf: *mut GraspdSdf) {
    if !sdf.is_null() {
        drop(Box::from_raw(sdf));
    }
}

/// Signed distance at a world point.
///
/// # Safety
/// `point` must point to 3 values and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn graspd_sdf_distance(sdf: *const GraspdSdf, point: *const f64, out: *mut f64) -> GraspdStatus {
    guard(|| {
        let (Some(s), false, false) = (sdf.as_ref(), point.is_null(), out.is_null()) else {
            return fail(GraspdStatus::NullPointer, "argument is null");
        };
        let p = std::slice::from_raw_parts(point, 3);
        *out = s.grid.distance(Vec3::new(p[0], p[1], p[2]));
        GraspdStatus::Ok
    })
}

/// Runs one grasp optimization. `config_json` may be null for defaults;
/// `job` selects the random stream.
///
/// # Safety
/// Handles must be live; `config_json` null or NUL-terminated; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn graspd_synthesize(
    hand: *const GraspdHand,
    sdf: *const GraspdSdf,
    config_json: *const c_char,
    job: u64,
    out: *mut *mut GraspdGrasp,
) -> GraspdStatus {
    guard(|| {
        let (Some(h), Some(s)) = (hand.as_ref(), sdf.as_ref()) else {
            return fail(GraspdStatus::NullPointer, "hand or sdf is null");
        };
        let cfg = match read_config(config_json) {
            Ok(c) => c,
            Err(st) => return st,
        };
        let body = match mass_properties(&s.grid, cfg.density) {
            Ok(b) => b,
            Err(e) => return fail(GraspdStatus::InvalidArgument, e.to_string()),
        };
        let inputs = SynthesisInputs { model: &h.model, object: &s.grid, body, params: cfg.contact, shake: cfg.shake };
        match synthesize(&inputs, &cfg.optimizer, job) {
            Ok(run) if run.diverged => fail(GraspdStatus::Numerical, format!("job {job} diverged")),
            Ok(run) => {
                let feasible = feasible(&run.best.report, &cfg.optimizer);
                boxed(GraspdGrasp { best: run.best, feasible }, out)
            }
            Err(graspd::opt::OptError::Config(m)) => fail(GraspdStatus::InvalidArgument, m),
            Err(e) => fail(GraspdStatus::Numerical, e.to_string()),
        }
    })
}

/// # Safety
/// `grasp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn graspd_grasp_free(grasp: *mut GraspdGrasp) {
    if !grasp.is_null() {
        drop(Box::from_raw(grasp));
    }
}

/// Whether the kept candidate meets both constraints; false for null.
///
/// # Safety
/// `grasp` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn graspd_grasp_feasible(grasp: *const GraspdGrasp) -> bool {
    grasp.as_ref().is_some_and(|g| g.feasible)
}

/// The kept candidate, its losses and displacement as JSON. Release with
/// [`graspd_string_free`].
///
/// # Safety
/// `grasp` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn graspd_grasp_to_json(grasp: *const GraspdGrasp, out: *mut *mut c_char) -> GraspdStatus {
    guard(|| {
        let (Some(g), false) = (grasp.as_ref(), out.is_null()) else {
            return fail(GraspdStatus::NullPointer, "argument is null");
        };
        let text = serde_json::to_string(&g.best).expect("checkpoint serializes");
        match CString::new(text) {
            Ok(c) => {
                *out = c.into_raw();
                GraspdStatus::Ok
            }
            Err(e) => fail(GraspdStatus::Numerical, e.to_string()),
        }
    })
}

/// Scores a grasp against `sdf`.
///
/// # Safety
/// Handles must be live; `config_json` null or NUL-terminated; `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn graspd_evaluate(
    hand: *const GraspdHand,
    sdf: *const GraspdSdf,
    grasp: *const GraspdGrasp,
    config_json: *const c_char,
    out: *mut GraspdEvalReport,
) -> GraspdStatus {
    guard(|| {
        let (Some(h), Some(s), Some(g), false) = (hand.as_ref(), sdf.as_ref(), grasp.as_ref(), out.is_null()) else {
            return fail(GraspdStatus::NullPointer, "argument is null");
        };
        let cfg = match read_config(config_json) {
            Ok(c) => c,
            Err(st) => return st,
        };
        let body = match mass_properties(&s.grid, cfg.density) {
            Ok(b) => b,
            Err(e) => return fail(GraspdStatus::InvalidArgument, e.to_string()),
        };
        match evaluate_grasp(&h.model, &g.best.candidate.hand_pose, &s.grid, &body, &cfg.contact, &cfg.epsilon, &cfg.shake) {
            Ok(r) => {
                *out = GraspdEvalReport {
                    contact_area: r.contact_area,
                    interpen_volume: r.interpen_volume,
                    ratio: r.ratio.unwrap_or(-1.0),
                    epsilon: r.epsilon,
                    displacement: r.displacement,
                    contact_count: r.contact_count,
                };
                GraspdStatus::Ok
            }
            Err(e) => fail(GraspdStatus::InvalidArgument, e.to_string()),
        }
    })
}
