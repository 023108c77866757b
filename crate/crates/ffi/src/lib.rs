//! C ABI over `transit_hierarchy`.
//!
//! Handles are opaque and owned by the caller; every `*_new`/`*_from_*`
//! has a matching `*_free`. Functions return a [`ThStatus`]; on failure
//! [`th_last_error`] describes the problem for the calling thread. Panics are
//! caught at the boundary and reported as `TH_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use transit_hierarchy::cli::report::{Document, ResultBody};
use transit_hierarchy::cli::{self, AnalyzeArgs, CliError, ConfigArgs, InputArgs};
use transit_hierarchy::hierarchy::{
    analyze, HierarchyConfig, HierarchyResult, PhaseCounts, SignConvention, UndefinedPairs,
};
use transit_hierarchy::ingest::{parse_mode_registry, read_chains};
use transit_hierarchy::model::{validate_chain, Leg, ModeId, ModeRegistry};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    InvalidRegistry = 4,
    InvalidChain = 5,
    InvalidArgument = 6,
    Internal = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThSign {
    Flipped = 0,
    Literal = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThUndefined {
    Exclude = 0,
    Zero = 1,
}

/// One leg of a chain. Stops are not needed for hierarchy counting.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ThLeg {
    pub mode: u32,
    pub board_time: i64,
    pub alight_time: i64,
    pub distance: f64,
}

/// Per-mode scores, all in `[0, 1]`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ThScore {
    pub ascending: f64,
    pub descending: f64,
    pub overall: f64,
    /// 0 when the mode has no defined pair in either phase.
    pub observed: bool,
}

pub struct ThRegistry {
    inner: ModeRegistry,
}

pub struct ThCounts {
    inner: PhaseCounts,
}

pub struct ThResult {
    inner: HierarchyResult,
    registry: ModeRegistry,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Failure(ThStatus, String);

impl Failure {
    fn null(what: &str) -> Self {
        Failure(ThStatus::NullArgument, format!("{what} is null"))
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ThStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ThStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside transit_hierarchy");
            ThStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|e| Failure(ThStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("out"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn json_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s).map(CString::into_raw).map_err(|e| Failure(ThStatus::Internal, e.to_string()))
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn th_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn th_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a registry from a modes JSON array.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn th_registry_from_json(json: *const c_char, out: *mut *mut ThRegistry) -> ThStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let inner =
            parse_mode_registry(text.as_bytes()).map_err(|e| Failure(ThStatus::InvalidRegistry, e.to_string()))?;
        put(out, ThRegistry { inner })
    })
}

/// The built-in six-mode Seoul registry.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn th_registry_seoul(out: *mut *mut ThRegistry) -> ThStatus {
    guard(|| put(out, ThRegistry { inner: transit_hierarchy::model::seoul_registry() }))
}

/// Number of modes, or 0 for a null handle.
///
/// # Safety
/// `registry` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn th_registry_len(registry: *const ThRegistry) -> usize {
    registry.as_ref().map_or(0, |r| r.inner.len())
}

/// # Safety
/// `registry` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn th_registry_free(registry: *mut ThRegistry) {
    if !registry.is_null() {
        drop(Box::from_raw(registry));
    }
}

/// Empty counts sized for `registry`.
///
/// # Safety
/// `registry` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn th_counts_new(registry: *const ThRegistry, out: *mut *mut ThCounts) -> ThStatus {
    guard(|| {
        let registry = handle(registry, "registry")?;
        put(out, ThCounts { inner: PhaseCounts::new(registry.inner.len()) })
    })
}

/// Validates one chain and adds its transfers. An invalid chain leaves the
/// counts untouched and returns `TH_STATUS_INVALID_CHAIN`.
///
/// # Safety
/// Handles must be live; `legs` must point to `n_legs` readable legs.
#[no_mangle]
pub unsafe extern "C" fn th_counts_add_chain(
    counts: *mut ThCounts,
    registry: *const ThRegistry,
    legs: *const ThLeg,
    n_legs: usize,
) -> ThStatus {
    guard(|| {
        let counts = handle_mut(counts, "counts")?;
        let registry = handle(registry, "registry")?;
        let legs: &[ThLeg] = if n_legs == 0 {
            &[]
        } else if legs.is_null() {
            return Err(Failure::null("legs"));
        } else {
            std::slice::from_raw_parts(legs, n_legs)
        };
        let legs = legs
            .iter()
            .map(|l| Leg {
                mode: ModeId(l.mode),
                board_stop: String::new(),
                alight_stop: String::new(),
                board_time: l.board_time,
                alight_time: l.alight_time,
                distance: l.distance,
            })
            .collect();
        let chain =
            validate_chain("ffi", legs, &registry.inner).map_err(|e| Failure(ThStatus::InvalidChain, e.to_string()))?;
        counts.inner.add_chain(&chain, &registry.inner).map_err(|e| Failure(ThStatus::InvalidArgument, e.to_string()))
    })
}

/// Streams a chains CSV file into `counts`. Rejected chains are skipped and
/// counted; either out-pointer may be null.
///
/// # Safety
/// Handles must be live; `path` NUL-terminated; out-pointers null or writable.
#[no_mangle]
pub unsafe extern "C" fn th_counts_add_csv(
    counts: *mut ThCounts,
    registry: *const ThRegistry,
    path: *const c_char,
    accepted: *mut u64,
    rejected: *mut u64,
) -> ThStatus {
    guard(|| {
        let counts = handle_mut(counts, "counts")?;
        let registry = handle(registry, "registry")?;
        let path = str_arg(path, "path")?;
        let file = std::fs::File::open(path).map_err(|e| Failure(ThStatus::Io, format!("{path}: {e}")))?;
        let (chains, report) = read_chains(std::io::BufReader::new(file), &registry.inner)
            .map_err(|e| Failure(ThStatus::Io, format!("{path}: {e}")))?;
        let mut local = PhaseCounts::new(registry.inner.len());
        for chain in &chains {
            local.add_chain(chain, &registry.inner).map_err(|e| Failure(ThStatus::Internal, e.to_string()))?;
        }
        counts.inner.merge_from(&local).map_err(|e| Failure(ThStatus::InvalidArgument, e.to_string()))?;
        if let Some(a) = accepted.as_mut() {
            *a = report.chains_accepted;
        }
        if let Some(r) = rejected.as_mut() {
            *r = report.chains_rejected;
        }
        Ok(())
    })
}

/// Adds `src` into `dst`; both must have the same number of modes.
///
/// # Safety
/// Both handles must be live.
#[no_mangle]
pub unsafe extern "C" fn th_counts_merge(dst: *mut ThCounts, src: *const ThCounts) -> ThStatus {
    guard(|| {
        let src = &handle(src, "src")?.inner;
        let dst = handle_mut(dst, "dst")?;
        dst.inner.merge_from(src).map_err(|e| Failure(ThStatus::InvalidArgument, e.to_string()))
    })
}

/// Transfers counted for the ordered pair `from -> to` (mode ids) in one phase;
/// 0 for out-of-range ids or a null handle.
///
/// # Safety
/// `counts` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn th_counts_get(counts: *const ThCounts, ascending: bool, from: u32, to: u32) -> u64 {
    let Some(c) = counts.as_ref() else { return 0 };
    let m = c.inner.modes() as u32;
    if from == 0 || to == 0 || from > m || to > m {
        return 0;
    }
    if ascending {
        c.inner.ascending(ModeId(from), ModeId(to))
    } else {
        c.inner.descending(ModeId(from), ModeId(to))
    }
}

/// # Safety
/// `counts` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn th_counts_chains(counts: *const ThCounts) -> u64 {
    counts.as_ref().map_or(0, |c| c.inner.chains_counted())
}

/// # Safety
/// `counts` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn th_counts_free(counts: *mut ThCounts) {
    if !counts.is_null() {
        drop(Box::from_raw(counts));
    }
}

/// Rates, distances, scores and ranking from `counts`. `counts` is not consumed.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn th_analyze(
    counts: *const ThCounts,
    registry: *const ThRegistry,
    sign: ThSign,
    undefined: ThUndefined,
    out: *mut *mut ThResult,
) -> ThStatus {
    guard(|| {
        let counts = handle(counts, "counts")?;
        let registry = handle(registry, "registry")?;
        let config = HierarchyConfig {
            ascending_sign: match sign {
                ThSign::Flipped => SignConvention::Flipped,
                ThSign::Literal => SignConvention::Literal,
            },
            undefined_pairs: match undefined {
                ThUndefined::Exclude => UndefinedPairs::Exclude,
                ThUndefined::Zero => UndefinedPairs::Zero,
            },
        };
        let inner = analyze(counts.inner.clone(), &registry.inner, &config)
            .map_err(|e| Failure(ThStatus::InvalidArgument, e.to_string()))?;
        put(out, ThResult { inner, registry: registry.inner.clone() })
    })
}

/// Scores of mode `mode_id`.
///
/// # Safety
/// `result` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn th_result_score(result: *const ThResult, mode_id: u32, out: *mut ThScore) -> ThStatus {
    guard(|| {
        let result = handle(result, "result")?;
        let out = handle_mut(out, "out")?;
        if !result.registry.contains(ModeId(mode_id)) {
            return Err(Failure(ThStatus::InvalidArgument, format!("unknown mode id {mode_id}")));
        }
        let s = result.inner.score(ModeId(mode_id));
        *out = ThScore {
            ascending: s.ascending_score,
            descending: s.descending_score,
            overall: s.overall,
            observed: s.is_observed(),
        };
        Ok(())
    })
}

/// Number of observed (ranked) modes.
///
/// # Safety
/// `result` must be null or live.
#[no_mangle]
pub unsafe extern "C" fn th_result_ranked_len(result: *const ThResult) -> usize {
    result.as_ref().map_or(0, |r| r.inner.ranking.ranked.len())
}

/// Mode id at rank `k` (0 = highest in the hierarchy).
///
/// # Safety
/// `result` must be live; `mode_id` writable.
#[no_mangle]
pub unsafe extern "C" fn th_result_ranked_at(result: *const ThResult, k: usize, mode_id: *mut u32) -> ThStatus {
    guard(|| {
        let result = handle(result, "result")?;
        let out = handle_mut(mode_id, "mode_id")?;
        let entry = result
            .inner
            .ranking
            .ranked
            .get(k)
            .ok_or_else(|| Failure(ThStatus::InvalidArgument, format!("rank {k} out of range")))?;
        *out = entry.mode.0;
        Ok(())
    })
}

/// The result as JSON (the `result` object of an analyze document). Free the
/// string with [`th_string_free`].
///
/// # Safety
/// `result` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn th_result_to_json(result: *const ThResult, out: *mut *mut c_char) -> ThStatus {
    guard(|| {
        let result = handle(result, "result")?;
        let out = handle_mut(out, "out")?;
        let body = ResultBody::new(&result.inner, &result.registry);
        let json = serde_json::to_string(&body).map_err(|e| Failure(ThStatus::Internal, e.to_string()))?;
        *out = json_string(json)?;
        Ok(())
    })
}

/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn th_result_free(result: *mut ThResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Runs the whole `analyze` command on files and returns the document JSON.
/// Free the string with [`th_string_free`].
///
/// # Safety
/// Paths must be NUL-terminated; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn th_analyze_files(
    chains_path: *const c_char,
    modes_path: *const c_char,
    sign: ThSign,
    undefined: ThUndefined,
    out: *mut *mut c_char,
) -> ThStatus {
    guard(|| {
        let chains = PathBuf::from(str_arg(chains_path, "chains_path")?);
        let modes = PathBuf::from(str_arg(modes_path, "modes_path")?);
        let out = handle_mut(out, "out")?;
        let args = AnalyzeArgs {
            input: InputArgs { chains, modes, out: None },
            config: ConfigArgs {
                ascending_sign: match sign {
                    ThSign::Flipped => SignConvention::Flipped,
                    ThSign::Literal => SignConvention::Literal,
                },
                undefined_pairs: match undefined {
                    ThUndefined::Exclude => UndefinedPairs::Exclude,
                    ThUndefined::Zero => UndefinedPairs::Zero,
                },
            },
        };
        let doc = cli::cmd_analyze(&args, 1).map_err(|e| {
            let status = match e {
                CliError::Usage(_) => ThStatus::InvalidArgument,
                CliError::Input(_) => ThStatus::Io,
                CliError::Internal(_) => ThStatus::Internal,
            };
            Failure(status, e.to_string())
        })?;
        *out = json_string(Document::Analyze(doc).to_json())?;
        Ok(())
    })
}

/// Frees a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn th_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
