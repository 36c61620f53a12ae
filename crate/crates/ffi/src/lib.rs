//! C interface to polyred.
//!
//! Every function returns a [`PolyredStatus`]; results come back through out
//! pointers. On failure a message is available from
//! [`polyred_last_error_message`] on the same thread. Handles are opaque and
//! released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use polyred::affine::Bindings;
use polyred::codegen::{emit_c, plan_privatization, ParallelChoice, Placement, PrivatizationPlan};
use polyred::deps::{analyze, Granularity};
use polyred::detect::detect;
use polyred::exec::{differential_check, Memory};
use polyred::frontend::parse;
use polyred::ir::Scop;
use polyred::schedule::{classify_dims, search, validate, DimClassification, LegalityMode, SearchConfig, Validated};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolyredStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    /// Dependence analysis, search or planning could not proceed.
    AnalysisError = 4,
    IllegalSchedule = 5,
    InvalidArgument = 6,
    ExecutionError = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolyredMode {
    Strict = 0,
    Relaxed = 1,
    Privatized = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PolyredScheduleSource {
    Original = 0,
    Search = 1,
}

/// A parsed kernel.
pub struct PolyredScop {
    scop: Scop,
}

/// A validated schedule of a kernel with its privatization plan.
pub struct PolyredPlan {
    scop: Scop,
    validated: Validated,
    classification: DimClassification,
    plan: PrivatizationPlan,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

type Fallible<T> = Result<T, (PolyredStatus, String)>;

fn fail<E: std::fmt::Display>(status: PolyredStatus) -> impl Fn(E) -> (PolyredStatus, String) {
    move |e| (status, e.to_string())
}

/// Runs `f`, recording the error message and turning panics into a status.
fn guard(f: impl FnOnce() -> Fallible<()>) -> PolyredStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PolyredStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            PolyredStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Fallible<&'a str> {
    if p.is_null() {
        return Err((PolyredStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| (PolyredStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Fallible<&'a T> {
    p.as_ref().ok_or((PolyredStatus::NullArgument, format!("{what} is null")))
}

fn out<T>(p: *mut T, what: &str) -> Fallible<()> {
    if p.is_null() {
        Err((PolyredStatus::NullArgument, format!("{what} is null")))
    } else {
        Ok(())
    }
}

fn mode(m: PolyredMode) -> LegalityMode {
    match m {
        PolyredMode::Strict => LegalityMode::Strict,
        PolyredMode::Relaxed => LegalityMode::Relaxed,
        PolyredMode::Privatized => LegalityMode::Privatized,
    }
}

/// `N=4,M=3` into bindings.
fn bindings(s: &str) -> Fallible<Bindings> {
    let mut b = Bindings::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (k, v) = part.split_once('=').ok_or((PolyredStatus::InvalidArgument, format!("expected NAME=VALUE, found `{part}`")))?;
        let v = v.trim().parse().map_err(|_| (PolyredStatus::InvalidArgument, format!("`{v}` is not an integer")))?;
        b.insert(k.trim().to_string(), v);
    }
    Ok(b)
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn polyred_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a kernel; with `fuse` consecutive statements of a block are fused.
///
/// # Safety
/// `source` must be a nul-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn polyred_scop_parse(source: *const c_char, fuse: bool, out_scop: *mut *mut PolyredScop) -> PolyredStatus {
    guard(|| {
        out(out_scop, "out_scop")?;
        let src = text(source, "source")?;
        let scop = parse(src, fuse).map_err(fail(PolyredStatus::ParseError))?;
        *out_scop = Box::into_raw(Box::new(PolyredScop { scop }));
        Ok(())
    })
}

/// # Safety
/// `scop` must come from [`polyred_scop_parse`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polyred_scop_free(scop: *mut PolyredScop) {
    if !scop.is_null() {
        drop(Box::from_raw(scop));
    }
}

/// Number of statements of the kernel.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn polyred_scop_statement_count(scop: *const PolyredScop, count: *mut usize) -> PolyredStatus {
    guard(|| {
        out(count, "count")?;
        *count = handle(scop, "scop")?.scop.statements.len();
        Ok(())
    })
}

/// Number of detected reductions.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn polyred_scop_reduction_count(scop: *const PolyredScop, count: *mut usize) -> PolyredStatus {
    guard(|| {
        out(count, "count")?;
        *count = detect(&handle(scop, "scop")?.scop).map_err(fail(PolyredStatus::AnalysisError))?.len();
        Ok(())
    })
}

/// Validates the original or searched schedule under `mode` and plans
/// parallelization and privatization.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn polyred_plan_new(
    scop: *const PolyredScop,
    legality: PolyredMode,
    source: PolyredScheduleSource,
    out_plan: *mut *mut PolyredPlan,
) -> PolyredStatus {
    guard(|| {
        out(out_plan, "out_plan")?;
        let scop = &handle(scop, "scop")?.scop;
        let m = mode(legality);
        let deps = analyze(scop, Granularity::Hybrid).map_err(fail(PolyredStatus::AnalysisError))?;
        let schedule = match source {
            PolyredScheduleSource::Original => scop.original_schedule(),
            PolyredScheduleSource::Search => search(scop, &deps, m, SearchConfig::default()).map_err(fail(PolyredStatus::AnalysisError))?.schedule,
        };
        let validated = validate(scop, &schedule, &deps, m).map_err(fail(PolyredStatus::IllegalSchedule))?;
        let classification = classify_dims(scop, &schedule, &deps, m).map_err(fail(PolyredStatus::AnalysisError))?;
        let reds = detect(scop).map_err(fail(PolyredStatus::AnalysisError))?;
        let plan = plan_privatization(scop, &schedule, &classification, &reds, &ParallelChoice::Auto, Placement::Auto).map_err(fail(PolyredStatus::AnalysisError))?;
        *out_plan = Box::into_raw(Box::new(PolyredPlan { scop: scop.clone(), validated, classification, plan }));
        Ok(())
    })
}

/// # Safety
/// `plan` must come from [`polyred_plan_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polyred_plan_free(plan: *mut PolyredPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Parallel schedule dimension, or -1 when the code stays sequential.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn polyred_plan_parallel_dim(plan: *const PolyredPlan, dim: *mut i64) -> PolyredStatus {
    guard(|| {
        out(dim, "dim")?;
        *dim = handle(plan, "plan")?.plan.parallel_dim.map_or(-1, |d| d as i64);
        Ok(())
    })
}

/// Number of privatized reductions.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn polyred_plan_privatized_count(plan: *const PolyredPlan, count: *mut usize) -> PolyredStatus {
    guard(|| {
        out(count, "count")?;
        *count = handle(plan, "plan")?.plan.privatized.len();
        Ok(())
    })
}

/// OpenMP C for the plan. Release the string with [`polyred_string_free`].
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn polyred_plan_emit_c(plan: *const PolyredPlan, code: *mut *mut c_char) -> PolyredStatus {
    guard(|| {
        out(code, "code")?;
        let p = handle(plan, "plan")?;
        let c = emit_c(&p.scop, p.validated.schedule(), &p.classification, &p.plan).map_err(fail(PolyredStatus::AnalysisError))?;
        *code = CString::new(c).map_err(fail(PolyredStatus::AnalysisError))?.into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn polyred_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs the plan on `contexts` simulated threads for `seeds` interleavings
/// starting at `seed`, comparing memory with sequential execution.
/// `params` binds every parameter, e.g. `"NX=4,NY=3"`.
///
/// # Safety
/// Pointers must be valid; `params` nul-terminated.
#[no_mangle]
pub unsafe extern "C" fn polyred_plan_verify(
    plan: *const PolyredPlan,
    params: *const c_char,
    contexts: usize,
    seeds: usize,
    seed: u64,
    all_equal: *mut bool,
) -> PolyredStatus {
    guard(|| {
        out(all_equal, "all_equal")?;
        let p = handle(plan, "plan")?;
        let b = bindings(text(params, "params")?)?;
        if let Some(missing) = p.scop.params.iter().find(|x| !b.contains_key(*x)) {
            return Err((PolyredStatus::InvalidArgument, format!("params is missing {missing}")));
        }
        if contexts == 0 || seeds == 0 {
            return Err((PolyredStatus::InvalidArgument, "contexts and seeds must be at least 1".into()));
        }
        let seed_list: Vec<u64> = (0..seeds as u64).map(|k| seed.wrapping_add(k)).collect();
        let configs = [("plan".to_string(), p.validated.clone(), p.plan.clone())];
        let report = differential_check(&p.scop, &configs, &b, &[contexts], &seed_list, &Memory::seeded(seed)).map_err(fail(PolyredStatus::ExecutionError))?;
        *all_equal = report.all_equal();
        Ok(())
    })
}
