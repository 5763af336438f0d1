//! C ABI for the qckmeans pipeline.
//!
//! Objects cross the boundary as opaque handles. Every fallible call returns a
//! [`QckStatus`]; on failure the message is available from
//! [`qck_last_error_message`] on the same thread until the next failing call.
//! Handles returned through out-pointers are owned by the caller and must be
//! released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::path::Path;
use std::ptr;

use qckmeans::bench::{generate, load_csv, CsvOptions, SyntheticSpec};
use qckmeans::data::Dataset;
use qckmeans::pipeline::{self, ClusteringResult, Formulation, PipelineConfig, SolverMode};
use qckmeans::statevec::NoiseModel;
use qckmeans::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QckStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidData = 3,
    InvalidParameter = 4,
    DimensionMismatch = 5,
    Capacity = 6,
    EmptyCluster = 7,
    Parse = 8,
    Io = 9,
    Json = 10,
    BufferTooSmall = 11,
    Panic = 12,
}

/// Solver used for each selection step.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QckSolver {
    Qaoa = 0,
    Exhaustive = 1,
}

/// Selection formulation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QckFormulation {
    Grouped = 0,
    Coupled = 1,
}

/// Opaque dataset handle.
pub struct QckDataset(Dataset);

/// Opaque pipeline configuration handle.
pub struct QckConfig(PipelineConfig);

/// Opaque clustering result handle.
pub struct QckResult(ClusteringResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    let c = CString::new(text).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> QckStatus {
    match err {
        Error::InvalidData(_) => QckStatus::InvalidData,
        Error::InvalidParameter(_) => QckStatus::InvalidParameter,
        Error::DimensionMismatch { .. } => QckStatus::DimensionMismatch,
        Error::Capacity { .. } => QckStatus::Capacity,
        Error::EmptyCluster(_) => QckStatus::EmptyCluster,
        Error::Parse { .. } | Error::Csv(_) => QckStatus::Parse,
        Error::Io(_) => QckStatus::Io,
        Error::Json(_) => QckStatus::Json,
    }
}

fn fail(status: QckStatus, msg: impl Into<String>) -> QckStatus {
    set_error(msg);
    status
}

/// Runs `f`, converting library errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), QckStatus>) -> QckStatus {
    match std::panic::catch_unwind(std::panic::AssertUnwindSafe(f)) {
        Ok(Ok(())) => QckStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(QckStatus::Panic, "panic inside qckmeans"),
    }
}

trait IntoStatus<T> {
    fn status(self) -> Result<T, QckStatus>;
}

impl<T> IntoStatus<T> for qckmeans::Result<T> {
    fn status(self) -> Result<T, QckStatus> {
        self.map_err(|e| fail(status_of(&e), e.to_string()))
    }
}

unsafe fn str_arg<'a>(s: *const c_char) -> Result<&'a str, QckStatus> {
    if s.is_null() {
        return Err(fail(QckStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(QckStatus::InvalidUtf8, "string argument is not UTF-8"))
}

unsafe fn ref_arg<'a, T>(p: *const T) -> Result<&'a T, QckStatus> {
    p.as_ref().ok_or_else(|| fail(QckStatus::NullPointer, "null handle"))
}

unsafe fn mut_arg<'a, T>(p: *mut T) -> Result<&'a mut T, QckStatus> {
    p.as_mut().ok_or_else(|| fail(QckStatus::NullPointer, "null handle"))
}

unsafe fn out_arg<T>(out: *mut *mut T, value: T) -> Result<(), QckStatus> {
    if out.is_null() {
        return Err(fail(QckStatus::NullPointer, "null output pointer"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out<T: Copy>(src: &[T], dst: *mut T, len: usize) -> Result<(), QckStatus> {
    if dst.is_null() {
        return Err(fail(QckStatus::NullPointer, "null output buffer"));
    }
    if len < src.len() {
        return Err(fail(
            QckStatus::BufferTooSmall,
            format!("buffer holds {len} values, {} needed", src.len()),
        ));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len());
    Ok(())
}

/// Message of the last failing call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qck_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qck_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Peak register width for `candidates` per group and subsample size `subsample`.
#[no_mangle]
pub extern "C" fn qck_q_peak(candidates: usize, subsample: usize) -> usize {
    pipeline::q_peak(candidates, subsample)
}

/// Copies a row-major `rows x cols` buffer into a new dataset.
///
/// # Safety
/// `values` must point to `rows * cols` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn qck_dataset_from_buffer(
    values: *const f64,
    rows: usize,
    cols: usize,
    out: *mut *mut QckDataset,
) -> QckStatus {
    guard(|| {
        if values.is_null() {
            return Err(fail(QckStatus::NullPointer, "null value buffer"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| fail(QckStatus::InvalidParameter, "rows * cols overflows"))?;
        let data = Dataset::new(rows, cols, std::slice::from_raw_parts(values, len).to_vec()).status()?;
        out_arg(out, QckDataset(data))
    })
}

/// Loads a numeric CSV file. `delimiter` is a single ASCII byte.
///
/// # Safety
/// `path` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qck_dataset_from_csv(
    path: *const c_char,
    has_header: bool,
    delimiter: c_char,
    out: *mut *mut QckDataset,
) -> QckStatus {
    guard(|| {
        let path = str_arg(path)?;
        let opts = CsvOptions {
            delimiter: delimiter as u8 as char,
            has_header,
            columns: None,
        };
        let data = load_csv(Path::new(path), &opts).status()?;
        out_arg(out, QckDataset(data))
    })
}

/// Generates a synthetic preset (circles, moons, spiral, blobs, vd_blobs).
///
/// # Safety
/// `name` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qck_dataset_synthetic(
    name: *const c_char,
    n: usize,
    seed: u64,
    out: *mut *mut QckDataset,
) -> QckStatus {
    guard(|| {
        let spec = SyntheticSpec::preset(str_arg(name)?, n, seed).status()?;
        let data = generate(&spec).status()?;
        out_arg(out, QckDataset(data))
    })
}

/// # Safety
/// `dataset` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn qck_dataset_rows(dataset: *const QckDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.rows())
}

/// # Safety
/// `dataset` must be null or a live dataset handle.
#[no_mangle]
pub unsafe extern "C" fn qck_dataset_cols(dataset: *const QckDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.0.cols())
}

/// Copies the row-major values into `dst`, which holds `len` doubles.
///
/// # Safety
/// `dataset` must be a live handle and `dst` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qck_dataset_values(dataset: *const QckDataset, dst: *mut f64, len: usize) -> QckStatus {
    guard(|| copy_out(ref_arg(dataset)?.0.values(), dst, len))
}

/// # Safety
/// `dataset` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qck_dataset_free(dataset: *mut QckDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Default configuration for `k` clusters.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn qck_config_new(k: usize, out: *mut *mut QckConfig) -> QckStatus {
    guard(|| out_arg(out, QckConfig(PipelineConfig::with_k(k))))
}

/// Parses a JSON configuration; missing fields take their defaults.
///
/// # Safety
/// `json` must be a valid NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn qck_config_from_json(json: *const c_char, out: *mut *mut QckConfig) -> QckStatus {
    guard(|| {
        let cfg: PipelineConfig = serde_json::from_str(str_arg(json)?).map_err(Error::from).status()?;
        out_arg(out, QckConfig(cfg))
    })
}

/// Serializes the configuration as JSON. Free the string with [`qck_string_free`].
///
/// # Safety
/// `config` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qck_config_to_json(config: *const QckConfig, out: *mut *mut c_char) -> QckStatus {
    guard(|| {
        let text = serde_json::to_string(&ref_arg(config)?.0).map_err(Error::from).status()?;
        string_out(text, out)
    })
}

/// Sets the number of frequencies; 0 restores the default.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_config_set_frequencies(config: *mut QckConfig, m: usize) -> QckStatus {
    guard(|| {
        mut_arg(config)?.0.m = (m > 0).then_some(m);
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_config_set_candidates(config: *mut QckConfig, candidates: usize) -> QckStatus {
    guard(|| {
        mut_arg(config)?.0.candidates = candidates;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_config_set_depth(config: *mut QckConfig, p: usize) -> QckStatus {
    guard(|| {
        mut_arg(config)?.0.qaoa.p = p;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_config_set_subsample(config: *mut QckConfig, b: usize) -> QckStatus {
    guard(|| {
        mut_arg(config)?.0.qff.subsample = b;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_config_set_shots(config: *mut QckConfig, qaoa_shots: u64, qff_shots: u64) -> QckStatus {
    guard(|| {
        let cfg = &mut mut_arg(config)?.0;
        cfg.qaoa.shots = qaoa_shots;
        cfg.qff.shots_per_basis = qff_shots;
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_config_set_solver(config: *mut QckConfig, solver: QckSolver) -> QckStatus {
    guard(|| {
        mut_arg(config)?.0.solver = match solver {
            QckSolver::Qaoa => SolverMode::Qaoa,
            QckSolver::Exhaustive => SolverMode::Exhaustive,
        };
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_config_set_formulation(config: *mut QckConfig, formulation: QckFormulation) -> QckStatus {
    guard(|| {
        mut_arg(config)?.0.formulation = match formulation {
            QckFormulation::Grouped => Formulation::Grouped,
            QckFormulation::Coupled => Formulation::Coupled,
        };
        Ok(())
    })
}

/// Enables depolarizing and readout noise; all zeros disables it.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_config_set_noise(config: *mut QckConfig, p1: f64, p2: f64, p_ro: f64) -> QckStatus {
    guard(|| {
        let cfg = &mut mut_arg(config)?.0;
        cfg.noise = if p1 == 0.0 && p2 == 0.0 && p_ro == 0.0 {
            None
        } else {
            Some(NoiseModel::new(p1, p2, p_ro).status()?)
        };
        Ok(())
    })
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_config_set_analytic(config: *mut QckConfig, analytic: bool) -> QckStatus {
    guard(|| {
        mut_arg(config)?.0.analytic = analytic;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qck_config_free(config: *mut QckConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Clusters `dataset` with `config` (null for defaults with k = 3).
///
/// # Safety
/// `dataset` must be a live handle, `config` null or a live handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn qck_run(
    dataset: *const QckDataset,
    config: *const QckConfig,
    seed: u64,
    out: *mut *mut QckResult,
) -> QckStatus {
    guard(|| {
        let data = &ref_arg(dataset)?.0;
        let default = PipelineConfig::default();
        let cfg = config.as_ref().map_or(&default, |c| &c.0);
        let result = pipeline::run_qc_kmeans(data, cfg, seed).status()?;
        out_arg(out, QckResult(result))
    })
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_result_sse(result: *const QckResult) -> f64 {
    result.as_ref().map_or(f64::NAN, |r| r.0.sse_original)
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_result_k(result: *const QckResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.centroids.rows())
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_result_dim(result: *const QckResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.centroids.cols())
}

/// Number of points in the assignment.
///
/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_result_len(result: *const QckResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.assignment.len())
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_result_q_peak(result: *const QckResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.q_peak)
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_result_iterations(result: *const QckResult) -> usize {
    result.as_ref().map_or(0, |r| r.0.iterations)
}

/// # Safety
/// `result` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qck_result_total_shots(result: *const QckResult) -> u64 {
    result.as_ref().map_or(0, |r| r.0.total_shots)
}

/// Copies the `k x dim` row-major centroids into `dst`.
///
/// # Safety
/// `result` must be a live handle and `dst` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qck_result_centroids(result: *const QckResult, dst: *mut f64, len: usize) -> QckStatus {
    guard(|| copy_out(ref_arg(result)?.0.centroids.values(), dst, len))
}

/// Copies the cluster index of each point into `dst`.
///
/// # Safety
/// `result` must be a live handle and `dst` must point to `len` writable values.
#[no_mangle]
pub unsafe extern "C" fn qck_result_assignment(result: *const QckResult, dst: *mut usize, len: usize) -> QckStatus {
    guard(|| copy_out(&ref_arg(result)?.0.assignment, dst, len))
}

/// Serializes the full result, trace included. Free with [`qck_string_free`].
///
/// # Safety
/// `result` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn qck_result_to_json(result: *const QckResult, out: *mut *mut c_char) -> QckStatus {
    guard(|| {
        let text = serde_json::to_string(&ref_arg(result)?.0).map_err(Error::from).status()?;
        string_out(text, out)
    })
}

/// # Safety
/// `result` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qck_result_free(result: *mut QckResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qck_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

unsafe fn string_out(text: String, out: *mut *mut c_char) -> Result<(), QckStatus> {
    if out.is_null() {
        return Err(fail(QckStatus::NullPointer, "null output pointer"));
    }
    let c = CString::new(text).map_err(|_| fail(QckStatus::InvalidUtf8, "interior NUL in output"))?;
    *out = c.into_raw();
    Ok(())
}
