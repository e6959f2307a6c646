//! C ABI over `dib_core`.
//!
//! Every function returns a [`DibStatus`]; on failure a message is kept per
//! thread and can be read with [`dib_last_error`]. Objects are opaque handles
//! created by `*_new`/`*_solve` functions and released with the matching
//! `*_free`. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use dib_core::datagen::random_model;
use dib_core::discrete_ba::{ba_solve, BaConfig, BaSolution};
use dib_core::error::DibError;
use dib_core::gauss_dib::{ba_gauss_solve, cib_bound, sum_boundary, GaussBaConfig};
use dib_core::info::{FieldFactor, JointPmf, LinearGaussianModel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DibStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Numerical = 4,
    Solver = 5,
    Io = 6,
    Panic = 7,
}

pub const DIB_FIELD_REAL: u32 = 0;
pub const DIB_FIELD_COMPLEX: u32 = 1;

/// Discrete joint pmf of `(X_1, .., X_K, Y)`.
pub struct DibJoint(JointPmf);

/// Linear Gaussian multiview model.
pub struct DibGaussModel(LinearGaussianModel);

/// Result of the discrete alternating solver.
pub struct DibBaSolution {
    s: f64,
    solution: BaSolution,
}

/// One operating point; quantities in nats. `cost` is NaN for boundary
/// points.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DibPoint {
    pub s: f64,
    pub relevance: f64,
    pub sum_complexity: f64,
    pub cost: f64,
    pub iterations: u64,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &DibError) -> DibStatus {
    match e {
        DibError::Dimension(_) => DibStatus::Dimension,
        DibError::InvalidDistribution(_) | DibError::Usage(_) | DibError::SearchSpaceTooLarge(_) => {
            DibStatus::InvalidArgument
        }
        DibError::Numerical(_) | DibError::DegenerateRow { .. } | DibError::Training(_) => DibStatus::Numerical,
        DibError::Solver(_) => DibStatus::Solver,
        DibError::Io { .. } | DibError::Format { .. } | DibError::Checksum { .. } | DibError::Json(_) => DibStatus::Io,
    }
}

struct Fail(DibStatus, String);

impl From<DibError> for Fail {
    fn from(e: DibError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(DibStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> DibStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DibStatus::Ok,
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
            set_error(format!("panic: {msg}"));
            DibStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn reference<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn field(f: u32) -> Result<FieldFactor, Fail> {
    match f {
        DIB_FIELD_REAL => Ok(FieldFactor::Real),
        DIB_FIELD_COMPLEX => Ok(FieldFactor::Complex),
        other => Err(Fail(DibStatus::InvalidArgument, format!("unknown field {other}"))),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn dib_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or null. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn dib_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Builds a joint pmf from row-major probabilities over `dims` (target last).
///
/// # Safety
/// `dims` must hold `ndims` values, `probs` must hold `nprobs` values and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dib_joint_new(
    dims: *const usize,
    ndims: usize,
    probs: *const f64,
    nprobs: usize,
    out: *mut *mut DibJoint,
) -> DibStatus {
    guard(|| {
        let dims = slice(dims, ndims, "dims")?.to_vec();
        let probs = slice(probs, nprobs, "probs")?.to_vec();
        let joint = JointPmf::new(dims, probs)?;
        write_out(out, Box::into_raw(Box::new(DibJoint(joint))), "out")
    })
}

/// # Safety
/// `joint` must be null or come from [`dib_joint_new`], and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dib_joint_free(joint: *mut DibJoint) {
    if !joint.is_null() {
        drop(Box::from_raw(joint));
    }
}

/// Runs the discrete alternating solver with default tolerances.
/// `cardinalities` may be null (then `|U_k| = |X_k|`).
///
/// # Safety
/// Pointers must be valid for the given lengths; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dib_ba_solve(
    joint: *const DibJoint,
    s: f64,
    seed: u64,
    restarts: usize,
    cardinalities: *const usize,
    ncard: usize,
    out: *mut *mut DibBaSolution,
) -> DibStatus {
    guard(|| {
        let joint = &reference(joint, "joint")?.0;
        let cards = if cardinalities.is_null() {
            None
        } else {
            Some(slice(cardinalities, ncard, "cardinalities")?.to_vec())
        };
        let cfg = BaConfig {
            s,
            seed,
            restarts,
            cardinalities: cards,
            ..BaConfig::default()
        };
        let sol = ba_solve(joint, &cfg)?;
        write_out(out, Box::into_raw(Box::new(DibBaSolution { s, solution: sol })), "out")
    })
}

/// # Safety
/// `sol` must be null or come from [`dib_ba_solve`], and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dib_ba_solution_free(sol: *mut DibBaSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// # Safety
/// `sol` must be a live solution handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dib_ba_solution_point(sol: *const DibBaSolution, out: *mut DibPoint) -> DibStatus {
    guard(|| {
        let handle = reference(sol, "solution")?;
        let sol = &handle.solution;
        let p = DibPoint {
            s: handle.s,
            relevance: sol.pair.relevance,
            sum_complexity: sol.pair.sum_complexity,
            cost: sol.cost,
            iterations: sol.trace.iterations as u64,
            converged: sol.trace.converged,
        };
        write_out(out, p, "out")
    })
}

/// Copies encoder `k` (row-major `|X_k| x |U_k|`) into `buf`. The shape is
/// always written to `rows`/`cols`; pass `buf = null` to query it.
///
/// # Safety
/// `buf` must hold `len` doubles when non-null; `rows`/`cols` writable.
#[no_mangle]
pub unsafe extern "C" fn dib_ba_solution_encoder(
    sol: *const DibBaSolution,
    k: usize,
    buf: *mut f64,
    len: usize,
    rows: *mut usize,
    cols: *mut usize,
) -> DibStatus {
    guard(|| {
        let sol = &reference(sol, "solution")?.solution;
        let encs = sol.encoders.encoders();
        let enc = encs
            .get(k)
            .ok_or_else(|| Fail(DibStatus::InvalidArgument, format!("encoder {k} of {}", encs.len())))?;
        write_out(rows, enc.rows(), "rows")?;
        write_out(cols, enc.cols(), "cols")?;
        if buf.is_null() {
            return Ok(());
        }
        let table = enc.table();
        if len < table.len() {
            return Err(Fail(DibStatus::Dimension, format!("buffer holds {len}, need {}", table.len())));
        }
        ptr::copy_nonoverlapping(table.as_ptr(), buf, table.len());
        Ok(())
    })
}

/// Random model with target dimension `n_y` and views of the given sizes.
///
/// # Safety
/// `dims` must hold `nviews` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dib_gauss_model_random(
    n_y: usize,
    dims: *const usize,
    nviews: usize,
    seed: u64,
    out: *mut *mut DibGaussModel,
) -> DibStatus {
    guard(|| {
        let dims = slice(dims, nviews, "dims")?;
        let model = random_model(n_y, dims, seed)?;
        write_out(out, Box::into_raw(Box::new(DibGaussModel(model))), "out")
    })
}

/// Scalar model: unit target and noise variances, one gain per view.
///
/// # Safety
/// `gains` must hold `n` values and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn dib_gauss_model_scalar(
    gains: *const f64,
    n: usize,
    out: *mut *mut DibGaussModel,
) -> DibStatus {
    guard(|| {
        let model = LinearGaussianModel::scalar(slice(gains, n, "gains")?)?;
        write_out(out, Box::into_raw(Box::new(DibGaussModel(model))), "out")
    })
}

/// Model from the JSON written by `dib gen-data`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dib_gauss_model_from_json(json: *const c_char, out: *mut *mut DibGaussModel) -> DibStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json)
            .to_str()
            .map_err(|e| Fail(DibStatus::InvalidArgument, e.to_string()))?;
        let model: LinearGaussianModel = serde_json::from_str(text).map_err(DibError::from)?;
        write_out(out, Box::into_raw(Box::new(DibGaussModel(model))), "out")
    })
}

/// # Safety
/// `model` must be null or a handle from a `dib_gauss_model_*` constructor,
/// and not be used again.
#[no_mangle]
pub unsafe extern "C" fn dib_gauss_model_free(model: *mut DibGaussModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Gaussian alternating solver at one `s`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dib_ba_gauss_solve(
    model: *const DibGaussModel,
    s: f64,
    seed: u64,
    field_kind: u32,
    out: *mut DibPoint,
) -> DibStatus {
    guard(|| {
        let model = &reference(model, "model")?.0;
        let cfg = GaussBaConfig {
            s,
            seed,
            ..GaussBaConfig::default()
        };
        let sol = ba_gauss_solve(model, &cfg, field(field_kind)?)?;
        let p = DibPoint {
            s: sol.point.s,
            relevance: sol.point.relevance,
            sum_complexity: sol.point.sum_complexity,
            cost: sol.cost,
            iterations: sol.point.iterations as u64,
            converged: sol.point.converged,
        };
        write_out(out, p, "out")
    })
}

/// Sum-rate boundary at each `s` in `s_grid`; `out` receives `n` points.
///
/// # Safety
/// `s_grid` must hold `n` values and `out` room for `n` points.
#[no_mangle]
pub unsafe extern "C" fn dib_sum_boundary(
    model: *const DibGaussModel,
    s_grid: *const f64,
    n: usize,
    field_kind: u32,
    out: *mut DibPoint,
) -> DibStatus {
    guard(|| {
        let model = &reference(model, "model")?.0;
        let grid = slice(s_grid, n, "s_grid")?;
        if n > 0 && out.is_null() {
            return Err(null("out"));
        }
        let points = sum_boundary(model, grid, field(field_kind)?)?;
        for (i, p) in points.iter().enumerate() {
            out.add(i).write(DibPoint {
                s: p.s,
                relevance: p.relevance,
                sum_complexity: p.sum_complexity,
                cost: f64::NAN,
                iterations: p.iterations as u64,
                converged: p.converged,
            });
        }
        Ok(())
    })
}

/// Centralized relevance achievable at total rate `rate`.
///
/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn dib_cib_bound(
    model: *const DibGaussModel,
    rate: f64,
    field_kind: u32,
    out: *mut f64,
) -> DibStatus {
    guard(|| {
        let model = &reference(model, "model")?.0;
        let v = cib_bound(model, rate, field(field_kind)?)?;
        write_out(out, v, "out")
    })
}
