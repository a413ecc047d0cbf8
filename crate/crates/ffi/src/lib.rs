//! C ABI for clusterscope.
//!
//! Every fallible function returns a [`CsStatus`]. On failure the message can
//! be read with [`cs_last_error`] from the same thread. Handles are opaque and
//! released with their `_free` function; strings handed to the caller are
//! released with [`cs_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use clusterscope::cluster::select_k;
use clusterscope::data::{self, CsvOptions, Dataset, FeatureMatrix, Schema};
use clusterscope::pipeline::{self, RunConfig, RunReport};
use clusterscope::stats;
use clusterscope::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Schema = 5,
    Config = 6,
    MissingArtifact = 7,
    EmptyCohort = 8,
    Panic = 9,
}

/// A cohort after complete-case filtering, with its standardized features.
pub struct CsDataset {
    data: Dataset,
    features: FeatureMatrix,
}

/// The result of a full pipeline run.
pub struct CsReport {
    report: RunReport,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(CsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        Failure(status_of(&e), msg)
    }
}

fn status_of(e: &Error) -> CsStatus {
    match e {
        Error::Io { .. } => CsStatus::Io,
        Error::Csv(_) | Error::Json(_) | Error::Parse { .. } => CsStatus::Parse,
        Error::Schema(_) => CsStatus::Schema,
        Error::EmptyCohort => CsStatus::EmptyCohort,
        Error::Config(_) => CsStatus::Config,
        Error::InvalidArgument(_) => CsStatus::InvalidArgument,
        Error::MissingArtifact(_) => CsStatus::MissingArtifact,
        Error::Stage { source, .. } => status_of(source),
    }
}

fn null(what: &str) -> Failure {
    Failure(CsStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(CsStatus::InvalidArgument, msg.into())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            CsStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("`{what}` is not valid UTF-8")))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(value);
    Ok(())
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).unwrap_or_default().into_raw()
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cs_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn cs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn cs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

fn dataset_from(raw: Dataset) -> Result<Box<CsDataset>, Failure> {
    let data = data::complete_case_filter(&raw)?;
    let features = data::to_feature_matrix(&data)?;
    Ok(Box::new(CsDataset { data, features }))
}

/// Generates the built-in synthetic cohort. `n = 0` keeps the default size.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_dataset_synth(n: usize, seed: u64, out: *mut *mut CsDataset) -> CsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let mut spec = pipeline::load_generator_spec("default")?;
        if n > 0 {
            spec.n = n;
        }
        let ds = dataset_from(data::generate_synthetic_cohort(&spec, seed)?)?;
        write_out(out, Box::into_raw(ds), "out")
    })
}

/// Loads a CSV cohort against a JSON column schema. `na_token` may be null.
///
/// # Safety
/// String arguments must be null-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_dataset_load_csv(
    csv_path: *const c_char,
    schema_path: *const c_char,
    na_token: *const c_char,
    out: *mut *mut CsDataset,
) -> CsStatus {
    guard(|| {
        let csv = PathBuf::from(str_arg(csv_path, "csv_path")?);
        let schema = Schema::load(&PathBuf::from(str_arg(schema_path, "schema_path")?))?;
        let na = if na_token.is_null() { String::new() } else { str_arg(na_token, "na_token")?.to_string() };
        if out.is_null() {
            return Err(null("out"));
        }
        let ds = dataset_from(data::load_csv(&csv, &schema, &CsvOptions { na_token: na })?)?;
        write_out(out, Box::into_raw(ds), "out")
    })
}

/// Rows kept after complete-case filtering; 0 for null.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_dataset_n_rows(ds: *const CsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.data.n_rows())
}

/// Standardized feature count; 0 for null.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_dataset_n_features(ds: *const CsDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.features.d())
}

/// Name of feature `j`, to be released with `cs_string_free`.
///
/// # Safety
/// `ds` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_dataset_feature_name(ds: *const CsDataset, j: usize, out: *mut *mut c_char) -> CsStatus {
    guard(|| {
        let d = ds.as_ref().ok_or_else(|| null("ds"))?;
        let name = d.features.feature_names.get(j).ok_or_else(|| invalid(format!("feature {j} out of range")))?;
        write_out(out, to_c_string(name.clone()), "out")
    })
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_dataset_free(ds: *mut CsDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// K-means with K chosen by silhouette over `k_min..=k_max`. `labels` must
/// hold `labels_len >= cs_dataset_n_rows(ds)` entries; `silhouette` may be null.
///
/// # Safety
/// Pointers must be valid for the stated lengths.
#[no_mangle]
pub unsafe extern "C" fn cs_cluster(
    ds: *const CsDataset,
    k_min: usize,
    k_max: usize,
    seed: u64,
    labels: *mut usize,
    labels_len: usize,
    k: *mut usize,
    silhouette: *mut f64,
) -> CsStatus {
    guard(|| {
        let d = ds.as_ref().ok_or_else(|| null("ds"))?;
        if labels.is_null() {
            return Err(null("labels"));
        }
        let n = d.features.n();
        if labels_len < n {
            return Err(invalid(format!("labels holds {labels_len} entries, need {n}")));
        }
        let (sel, c) = select_k(&d.features, k_min, k_max, seed)?;
        std::slice::from_raw_parts_mut(labels, n).copy_from_slice(&c.labels);
        write_out(k, sel.k, "k")?;
        if !silhouette.is_null() {
            silhouette.write(c.silhouette.unwrap_or(f64::NAN));
        }
        Ok(())
    })
}

/// Two-sided two-sample t-test; Student or Welch by the variance ratio.
/// `statistic` may be null.
///
/// # Safety
/// `a` and `b` must hold `na` and `nb` values.
#[no_mangle]
pub unsafe extern "C" fn cs_t_test(
    a: *const f64,
    na: usize,
    b: *const f64,
    nb: usize,
    p_value: *mut f64,
    statistic: *mut f64,
) -> CsStatus {
    guard(|| {
        if a.is_null() || b.is_null() {
            return Err(null("sample"));
        }
        let (a, b) = (std::slice::from_raw_parts(a, na), std::slice::from_raw_parts(b, nb));
        let r = stats::t_test(a, b, stats::choose_t_test(a, b)?)?;
        write_out(p_value, r.p_value, "p_value")?;
        if !statistic.is_null() {
            statistic.write(r.statistic);
        }
        Ok(())
    })
}

/// Two-sided Fisher exact test on `[[a, b], [c, d]]`.
///
/// # Safety
/// `p_value` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_fisher_exact(a: u64, b: u64, c: u64, d: u64, p_value: *mut f64) -> CsStatus {
    guard(|| write_out(p_value, stats::fisher_exact([[a, b], [c, d]])?, "p_value"))
}

/// Chi-square (or Fisher for sparse 2x2) test on a row-major `rows x cols` table.
///
/// # Safety
/// `table` must hold `rows * cols` counts.
#[no_mangle]
pub unsafe extern "C" fn cs_contingency_test(table: *const u64, rows: usize, cols: usize, p_value: *mut f64) -> CsStatus {
    guard(|| {
        if table.is_null() {
            return Err(null("table"));
        }
        let len = rows.checked_mul(cols).ok_or_else(|| invalid("table too large"))?;
        let flat = std::slice::from_raw_parts(table, len);
        let t: Vec<Vec<u64>> = flat.chunks(cols.max(1)).map(<[u64]>::to_vec).collect();
        write_out(p_value, stats::categorical_test(&t)?.p_value, "p_value")
    })
}

/// Runs the whole pipeline into `out_dir`. `config_json` may be null for the
/// defaults; otherwise its top-level keys override the default configuration.
///
/// # Safety
/// String arguments must be null-terminated; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_run(config_json: *const c_char, out_dir: *const c_char, out: *mut *mut CsReport) -> CsStatus {
    guard(|| {
        let dir = PathBuf::from(str_arg(out_dir, "out_dir")?);
        let mut cfg = if config_json.is_null() {
            RunConfig::default()
        } else {
            let overrides: serde_json::Value =
                serde_json::from_str(str_arg(config_json, "config_json")?).map_err(Error::from)?;
            let mut base = serde_json::to_value(RunConfig::default()).map_err(Error::from)?;
            match (base.as_object_mut(), overrides) {
                (Some(b), serde_json::Value::Object(o)) => b.extend(o),
                _ => return Err(Failure(CsStatus::Config, "config_json must be a JSON object".into())),
            }
            serde_json::from_value::<RunConfig>(base).map_err(|e| Failure(CsStatus::Config, e.to_string()))?
        };
        cfg.out = dir;
        if out.is_null() {
            return Err(null("out"));
        }
        let report = pipeline::run(&cfg)?;
        write_out(out, Box::into_raw(Box::new(CsReport { report })), "out")
    })
}

/// Report as pretty JSON, identical to `report.json`.
///
/// # Safety
/// `r` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_report_json(r: *const CsReport, out: *mut *mut c_char) -> CsStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("report"))?;
        let mut s = serde_json::to_string_pretty(&r.report).map_err(Error::from)?;
        s.push('\n');
        write_out(out, to_c_string(s), "out")
    })
}

/// Report as Markdown, identical to `report.md`.
///
/// # Safety
/// `r` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cs_report_markdown(r: *const CsReport, out: *mut *mut c_char) -> CsStatus {
    guard(|| {
        let r = r.as_ref().ok_or_else(|| null("report"))?;
        write_out(out, to_c_string(r.report.to_markdown()), "out")
    })
}

/// Chosen number of clusters; 0 for null.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_report_k(r: *const CsReport) -> usize {
    r.as_ref().map_or(0, |r| r.report.clustering.k)
}

/// Features with contradictory directions across methods; 0 for null.
///
/// # Safety
/// `r` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cs_report_conflicts(r: *const CsReport) -> usize {
    r.as_ref().map_or(0, |r| r.report.consistency.conflicts.len())
}

/// # Safety
/// `r` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cs_report_free(r: *mut CsReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
