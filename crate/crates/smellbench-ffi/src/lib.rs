//! C ABI over the scoring and statistics core, so evaluation pipelines in
//! other languages can call into the same arithmetic.
//!
//! Conventions: every fallible function returns an [`SbStatus`] code and
//! writes results through out-pointers; detection reports travel as opaque
//! handles created by `sb_report_parse` and released by `sb_report_free`;
//! the last error message is kept per thread and read back with
//! `sb_last_error_message`.

use std::cell::RefCell;
use std::ffi::CString;
use std::os::raw::c_char;
use std::slice;

use smellbench::scoring::{diff_reports, severity_score, weighted_effectiveness, ComponentScores};
use smellbench::smell::{classify_difficulty, parse_detection_report, DetectionReport, Difficulty, SmellType};
use smellbench::stats::{
    bootstrap_ci, cliffs_delta, cohen_kappa, fleiss_kappa, holm_adjust, kendall_chi_square,
    wilcoxon_signed_rank, OrdinalScale, Weighting,
};

/// Status codes returned by every fallible binding.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    ParseError = 3,
    ComputeError = 4,
}

/// Smell types accepted by `sb_classify_difficulty`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbSmellType {
    ScatteredFunctionality = 0,
    RedundantAbstraction = 1,
    UnstableDependency = 2,
    ImproperApiUsage = 3,
    GodObject = 4,
    HubLikeDependency = 5,
    CyclicDependency = 6,
}

impl From<SbSmellType> for SmellType {
    fn from(value: SbSmellType) -> Self {
        match value {
            SbSmellType::ScatteredFunctionality => SmellType::ScatteredFunctionality,
            SbSmellType::RedundantAbstraction => SmellType::RedundantAbstraction,
            SbSmellType::UnstableDependency => SmellType::UnstableDependency,
            SbSmellType::ImproperApiUsage => SmellType::ImproperApiUsage,
            SbSmellType::GodObject => SmellType::GodObject,
            SbSmellType::HubLikeDependency => SmellType::HubLikeDependency,
            SbSmellType::CyclicDependency => SmellType::CyclicDependency,
        }
    }
}

/// Difficulty tiers returned by `sb_classify_difficulty`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SbDifficulty {
    Easy = 0,
    Medium = 1,
    Hard = 2,
}

/// Opaque detection-report handle.
pub struct SbReport {
    inner: DetectionReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let message = CString::new(message.into()).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}

/// Pointer to the thread-local message for the most recent failure, or
/// null when the last call succeeded. Valid until the next failing call on
/// this thread.
#[no_mangle]
pub extern "C" fn sb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map(|s| s.as_ptr())
            .unwrap_or(std::ptr::null())
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Parse a detection report from a UTF-8 JSON buffer into an opaque handle.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` to a writable
/// pointer slot. A handle returned here must be released with
/// [`sb_report_free`].
#[no_mangle]
pub unsafe extern "C" fn sb_report_parse(
    data: *const u8,
    len: usize,
    out: *mut *mut SbReport,
) -> SbStatus {
    if data.is_null() || out.is_null() {
        set_error("null argument");
        return SbStatus::NullArgument;
    }
    let bytes = slice::from_raw_parts(data, len);
    match parse_detection_report(bytes) {
        Ok(report) => {
            clear_error();
            *out = Box::into_raw(Box::new(SbReport { inner: report }));
            SbStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            SbStatus::ParseError
        }
    }
}

/// Release a handle returned by [`sb_report_parse`]. Null is a no-op.
///
/// # Safety
/// `report` must be a pointer previously returned by `sb_report_parse`
/// that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn sb_report_free(report: *mut SbReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Number of smell instances in a parsed report.
///
/// # Safety
/// `report` must be a live handle from `sb_report_parse`.
#[no_mangle]
pub unsafe extern "C" fn sb_report_instance_count(report: *const SbReport) -> usize {
    report.as_ref().map_or(0, |r| r.inner.instances.len())
}

/// Net smell delta between two parsed reports.
///
/// # Safety
/// Both handles must be live; the out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_diff_reports(
    pre: *const SbReport,
    post: *const SbReport,
    out_resolved: *mut usize,
    out_introduced: *mut usize,
    out_net: *mut i64,
) -> SbStatus {
    let (Some(pre), Some(post)) = (pre.as_ref(), post.as_ref()) else {
        set_error("null report handle");
        return SbStatus::NullArgument;
    };
    let net = diff_reports(&pre.inner, &post.inner);
    if !out_resolved.is_null() {
        *out_resolved = net.resolved;
    }
    if !out_introduced.is_null() {
        *out_introduced = net.introduced;
    }
    if !out_net.is_null() {
        *out_net = net.net;
    }
    clear_error();
    SbStatus::Ok
}

/// Difficulty tier for a benchmark-eligible smell type and metric value.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_classify_difficulty(
    smell_type: SbSmellType,
    metric_value: f64,
    out: *mut SbDifficulty,
) -> SbStatus {
    if out.is_null() {
        set_error("null out pointer");
        return SbStatus::NullArgument;
    }
    match classify_difficulty(smell_type.into(), metric_value) {
        Ok(tier) => {
            clear_error();
            *out = match tier {
                Difficulty::Easy => SbDifficulty::Easy,
                Difficulty::Medium => SbDifficulty::Medium,
                Difficulty::Hard => SbDifficulty::Hard,
            };
            SbStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            SbStatus::InvalidArgument
        }
    }
}

/// Severity-proportional per-task score, clamped to [-1, 1].
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_severity_score(
    sev_old: f64,
    sev_new: f64,
    out: *mut f64,
) -> SbStatus {
    if out.is_null() {
        set_error("null out pointer");
        return SbStatus::NullArgument;
    }
    match severity_score(sev_old, sev_new) {
        Ok(score) => {
            clear_error();
            *out = score;
            SbStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            SbStatus::InvalidArgument
        }
    }
}

/// Weighted effectiveness E = 0.60*tp + 0.20*fp + 0.20*partial.
#[no_mangle]
pub extern "C" fn sb_weighted_effectiveness(tp: f64, fp: f64, partial: f64) -> f64 {
    weighted_effectiveness(&ComponentScores {
        tp,
        fp,
        partial,
        counts: (0, 0, 0),
    })
}

/// Cohen's kappa over two equally long rating arrays of category indices.
/// `quadratic` selects quadratic disagreement weights.
///
/// # Safety
/// `a` and `b` must point to `len` readable values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_cohen_kappa(
    a: *const usize,
    b: *const usize,
    len: usize,
    categories: usize,
    quadratic: bool,
    out: *mut f64,
) -> SbStatus {
    if a.is_null() || b.is_null() || out.is_null() {
        set_error("null argument");
        return SbStatus::NullArgument;
    }
    let a = slice::from_raw_parts(a, len);
    let b = slice::from_raw_parts(b, len);
    let scale = match OrdinalScale::new((0..categories).map(|i| i.to_string()).collect()) {
        Ok(scale) => scale,
        Err(e) => {
            set_error(e.to_string());
            return SbStatus::InvalidArgument;
        }
    };
    let weighting = if quadratic {
        Weighting::Quadratic
    } else {
        Weighting::None
    };
    match cohen_kappa(a, b, weighting, &scale) {
        Ok(result) => {
            clear_error();
            *out = result.value;
            SbStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            SbStatus::ComputeError
        }
    }
}

/// Fleiss' kappa over a row-major item x category count matrix.
///
/// # Safety
/// `counts` must point to `items * categories` readable values; `out` must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn sb_fleiss_kappa(
    counts: *const usize,
    items: usize,
    categories: usize,
    out: *mut f64,
) -> SbStatus {
    if counts.is_null() || out.is_null() {
        set_error("null argument");
        return SbStatus::NullArgument;
    }
    let flat = slice::from_raw_parts(counts, items * categories);
    let matrix: Vec<Vec<usize>> = flat.chunks(categories).map(<[usize]>::to_vec).collect();
    match fleiss_kappa(&matrix) {
        Ok(result) => {
            clear_error();
            *out = result.value;
            SbStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            SbStatus::ComputeError
        }
    }
}

/// Chi-square statistic implied by a Kendall's W value: `m(n-1)W` on
/// `n-1` degrees of freedom.
///
/// # Safety
/// Out-pointers must be writable when non-null.
#[no_mangle]
pub unsafe extern "C" fn sb_kendall_chi_square(
    w: f64,
    rankings: usize,
    subjects: usize,
    out_chi2: *mut f64,
    out_df: *mut usize,
) -> SbStatus {
    if subjects < 2 || rankings < 2 {
        set_error("kendall chi-square needs m >= 2 rankings over n >= 2 subjects");
        return SbStatus::InvalidArgument;
    }
    let (chi2, df) = kendall_chi_square(w, rankings, subjects);
    if !out_chi2.is_null() {
        *out_chi2 = chi2;
    }
    if !out_df.is_null() {
        *out_df = df;
    }
    clear_error();
    SbStatus::Ok
}

/// Two-sided Wilcoxon signed-rank test on paired arrays.
///
/// # Safety
/// `x` and `y` must point to `len` readable values; out-pointers must be
/// writable when non-null.
#[no_mangle]
pub unsafe extern "C" fn sb_wilcoxon_signed_rank(
    x: *const f64,
    y: *const f64,
    len: usize,
    out_statistic: *mut f64,
    out_p: *mut f64,
) -> SbStatus {
    if x.is_null() || y.is_null() {
        set_error("null argument");
        return SbStatus::NullArgument;
    }
    let x = slice::from_raw_parts(x, len);
    let y = slice::from_raw_parts(y, len);
    match wilcoxon_signed_rank(x, y) {
        Ok(result) => {
            clear_error();
            if !out_statistic.is_null() {
                *out_statistic = result.statistic;
            }
            if !out_p.is_null() {
                *out_p = result.p_value;
            }
            SbStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            SbStatus::ComputeError
        }
    }
}

/// Holm step-down adjustment in place: `adjusted` receives `len` values.
///
/// # Safety
/// `p` must point to `len` readable values and `adjusted` to `len`
/// writable slots.
#[no_mangle]
pub unsafe extern "C" fn sb_holm_adjust(
    p: *const f64,
    len: usize,
    adjusted: *mut f64,
) -> SbStatus {
    if p.is_null() || adjusted.is_null() {
        set_error("null argument");
        return SbStatus::NullArgument;
    }
    let p = slice::from_raw_parts(p, len);
    match holm_adjust(p) {
        Ok(result) => {
            clear_error();
            let out = slice::from_raw_parts_mut(adjusted, len);
            out.copy_from_slice(&result);
            SbStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            SbStatus::InvalidArgument
        }
    }
}

/// Cliff's delta between two samples.
///
/// # Safety
/// `a`/`b` must point to `a_len`/`b_len` readable values; `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn sb_cliffs_delta(
    a: *const f64,
    a_len: usize,
    b: *const f64,
    b_len: usize,
    out: *mut f64,
) -> SbStatus {
    if a.is_null() || b.is_null() || out.is_null() {
        set_error("null argument");
        return SbStatus::NullArgument;
    }
    let a = slice::from_raw_parts(a, a_len);
    let b = slice::from_raw_parts(b, b_len);
    match cliffs_delta(a, b) {
        Ok(delta) => {
            clear_error();
            *out = delta;
            SbStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            SbStatus::ComputeError
        }
    }
}

/// Percentile bootstrap CI of the mean, deterministic under `seed`.
///
/// # Safety
/// `samples` must point to `len` readable values; out-pointers must be
/// writable when non-null.
#[no_mangle]
pub unsafe extern "C" fn sb_bootstrap_ci(
    samples: *const f64,
    len: usize,
    resamples: usize,
    alpha: f64,
    seed: u64,
    out_lo: *mut f64,
    out_hi: *mut f64,
) -> SbStatus {
    if samples.is_null() {
        set_error("null argument");
        return SbStatus::NullArgument;
    }
    let samples = slice::from_raw_parts(samples, len);
    match bootstrap_ci(samples, resamples, alpha, seed) {
        Ok((lo, hi)) => {
            clear_error();
            if !out_lo.is_null() {
                *out_lo = lo;
            }
            if !out_hi.is_null() {
                *out_hi = hi;
            }
            SbStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            SbStatus::ComputeError
        }
    }
}
