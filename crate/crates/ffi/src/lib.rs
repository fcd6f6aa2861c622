//! C interface to the ddvef solvers.
//!
//! Configurations and run histories are opaque handles owned by the caller
//! and released with the matching `_free` function. Every fallible call
//! returns a [`DdvefStatus`]; the message of the last failure on the calling
//! thread is available from [`ddvef_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use ddvef_core::config::{DiffusionModelKind, RunConfig};
use ddvef_core::diffusion::{run_diffusion_model, TemperatureDataset};
use ddvef_core::grid::SpatialMesh;
use ddvef_core::io;
use ddvef_core::metrics::compare_runs;
use ddvef_core::moments::LoState;
use ddvef_core::transport::run_fom;
use ddvef_core::vef::fused_pipeline;
use ddvef_core::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdvefStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    FileNotFound = 4,
    Io = 5,
    Format = 6,
    Dimension = 7,
    NonConvergence = 8,
    Numerical = 9,
    Panic = 10,
}

/// Built-in problem sizes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdvefScale {
    Full = 0,
    Ci = 1,
}

/// Diffusion model selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DdvefModel {
    P1 = 0,
    P1Over3 = 1,
    Fld = 2,
}

impl From<DdvefModel> for DiffusionModelKind {
    fn from(m: DdvefModel) -> Self {
        match m {
            DdvefModel::P1 => DiffusionModelKind::P1,
            DdvefModel::P1Over3 => DiffusionModelKind::P1Over3,
            DdvefModel::Fld => DiffusionModelKind::Fld,
        }
    }
}

/// Run configuration.
pub struct DdvefConfig {
    inner: RunConfig,
}

/// Solution history: temperature and radiation moments at every time level.
pub struct DdvefHistory {
    mesh: SpatialMesh,
    states: Vec<LoState>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(DdvefStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Step { source, .. } => Failure::from_ref(source),
            other => Failure::from_ref(other),
        };
        Failure(status, e.to_string())
    }
}

impl Failure {
    fn from_ref(e: &Error) -> DdvefStatus {
        match e {
            Error::Config(_) | Error::Parse { .. } => DdvefStatus::Config,
            Error::Domain(_) => DdvefStatus::InvalidArgument,
            Error::NonConvergence { .. } => DdvefStatus::NonConvergence,
            Error::LinearSolve(_) | Error::UndefinedNorm => DdvefStatus::Numerical,
            Error::Dimension(_) => DdvefStatus::Dimension,
            Error::Format(_) | Error::MissingClosure(_) => DdvefStatus::Format,
            Error::FileNotFound(_) => DdvefStatus::FileNotFound,
            Error::Io(_) => DdvefStatus::Io,
            Error::Step { source, .. } => Failure::from_ref(source),
        }
    }

    fn null(what: &str) -> Self {
        Failure(DdvefStatus::NullPointer, format!("{what} is null"))
    }

    fn invalid(message: String) -> Self {
        Failure(DdvefStatus::InvalidArgument, message)
    }
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> DdvefStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DdvefStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            DdvefStatus::Panic
        }
    }
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn string<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure::invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::null("output handle"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn copy_out(values: &[f64], buf: *mut f64, len: usize) -> Result<(), Failure> {
    if buf.is_null() {
        return Err(Failure::null("buffer"));
    }
    if len < values.len() {
        return Err(Failure::invalid(format!(
            "buffer holds {len} values, {} needed",
            values.len()
        )));
    }
    ptr::copy_nonoverlapping(values.as_ptr(), buf, values.len());
    Ok(())
}

fn history(cfg: &RunConfig, states: Vec<LoState>) -> Result<DdvefHistory, Failure> {
    Ok(DdvefHistory {
        mesh: cfg.mesh()?,
        states,
    })
}

/// Message of the last failed call on this thread. The pointer stays valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ddvef_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Built-in configuration of the given scale.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn ddvef_config_new(
    scale: DdvefScale,
    out: *mut *mut DdvefConfig,
) -> DdvefStatus {
    guard(|| {
        let inner = match scale {
            DdvefScale::Full => RunConfig::default(),
            DdvefScale::Ci => RunConfig::ci_scale(),
        };
        put(out, DdvefConfig { inner })
    })
}

/// Configuration from the text of a configuration file.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ddvef_config_parse(
    text: *const c_char,
    out: *mut *mut DdvefConfig,
) -> DdvefStatus {
    guard(|| {
        let inner = RunConfig::parse(string(text, "text")?)?;
        inner.validate()?;
        put(out, DdvefConfig { inner })
    })
}

/// Configuration read from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ddvef_config_from_file(
    path: *const c_char,
    out: *mut *mut DdvefConfig,
) -> DdvefStatus {
    guard(|| {
        let inner = RunConfig::from_file(&PathBuf::from(string(path, "path")?))?;
        inner.validate()?;
        put(out, DdvefConfig { inner })
    })
}

/// Mesh size, group count and number of time steps of a configuration.
/// Null output pointers are skipped.
///
/// # Safety
/// `cfg` must be a live handle; non-null outputs must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ddvef_config_dims(
    cfg: *const DdvefConfig,
    nx: *mut usize,
    ny: *mut usize,
    groups: *mut usize,
    steps: *mut usize,
) -> DdvefStatus {
    guard(|| {
        let c = &borrow(cfg, "config")?.inner;
        for (p, v) in [
            (nx, c.nx),
            (ny, c.ny),
            (groups, c.group_bounds.len()),
            (steps, c.steps),
        ] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddvef_config_free(cfg: *mut DdvefConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Run the full-order transport model.
///
/// # Safety
/// `cfg` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ddvef_run_fom(
    cfg: *const DdvefConfig,
    out: *mut *mut DdvefHistory,
) -> DdvefStatus {
    guard(|| {
        let c = &borrow(cfg, "config")?.inner;
        let states = run_fom(c)?.iter().map(LoState::from).collect();
        put(out, history(c, states)?)
    })
}

/// Run a diffusion model.
///
/// # Safety
/// `cfg` must be a live handle and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ddvef_run_diffusion(
    cfg: *const DdvefConfig,
    model: DdvefModel,
    out: *mut *mut DdvefHistory,
) -> DdvefStatus {
    guard(|| {
        let c = &borrow(cfg, "config")?.inner;
        let states = run_diffusion_model(model.into(), c)?;
        put(out, history(c, states)?)
    })
}

/// Run the VEF model closed by transport on the temperatures of
/// `temperatures`.
///
/// # Safety
/// `cfg` and `temperatures` must be live handles and `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ddvef_run_vef(
    cfg: *const DdvefConfig,
    temperatures: *const DdvefHistory,
    out: *mut *mut DdvefHistory,
) -> DdvefStatus {
    guard(|| {
        let c = &borrow(cfg, "config")?.inner;
        let t = borrow(temperatures, "temperatures")?;
        let data = TemperatureDataset::from_states(&t.mesh, &t.states);
        let states = fused_pipeline(&data, c)?;
        put(out, history(c, states)?)
    })
}

/// Number of time levels, the initial one included. Zero for null.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ddvef_history_levels(h: *const DdvefHistory) -> usize {
    h.as_ref().map_or(0, |h| h.states.len())
}

/// Number of cells. Zero for null.
///
/// # Safety
/// `h` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ddvef_history_cells(h: *const DdvefHistory) -> usize {
    h.as_ref().map_or(0, |h| h.mesh.num_cells())
}

unsafe fn level<'a>(h: *const DdvefHistory, n: usize) -> Result<&'a LoState, Failure> {
    let h = borrow(h, "history")?;
    h.states.get(n).ok_or_else(|| {
        Failure::invalid(format!(
            "time level {n} out of range ({} levels)",
            h.states.len()
        ))
    })
}

/// Time of level `n` [ns].
///
/// # Safety
/// `h` must be a live handle and `time` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ddvef_history_time(
    h: *const DdvefHistory,
    n: usize,
    time: *mut f64,
) -> DdvefStatus {
    guard(|| {
        let s = level(h, n)?;
        copy_out(&[s.time], time, 1)
    })
}

/// Cell temperatures of level `n` [KeV] into `buf` of `len` values.
///
/// # Safety
/// `h` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ddvef_history_temperature(
    h: *const DdvefHistory,
    n: usize,
    buf: *mut f64,
    len: usize,
) -> DdvefStatus {
    guard(|| copy_out(&level(h, n)?.temperature, buf, len))
}

/// Group-summed radiation energy density of level `n` [Jerk/cm^3].
///
/// # Safety
/// `h` must be a live handle and `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ddvef_history_energy(
    h: *const DdvefHistory,
    n: usize,
    buf: *mut f64,
    len: usize,
) -> DdvefStatus {
    guard(|| copy_out(&level(h, n)?.moments.total_energy(), buf, len))
}

/// Write a history to a dataset file.
///
/// # Safety
/// `h` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ddvef_history_write(
    h: *const DdvefHistory,
    path: *const c_char,
) -> DdvefStatus {
    guard(|| {
        let h = borrow(h, "history")?;
        let path = PathBuf::from(string(path, "path")?);
        io::write_file(&path, &io::history_records(&h.mesh, &h.states))?;
        Ok(())
    })
}

/// Read a history from a dataset file; the domain size comes from `cfg`.
///
/// # Safety
/// `cfg` must be a live handle, `path` a NUL-terminated string and `out`
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn ddvef_history_read(
    cfg: *const DdvefConfig,
    path: *const c_char,
    out: *mut *mut DdvefHistory,
) -> DdvefStatus {
    guard(|| {
        let c = &borrow(cfg, "config")?.inner;
        let path = PathBuf::from(string(path, "path")?);
        let (dims, states) = io::history_from_records(&io::read_file(&path)?)?;
        let mesh = SpatialMesh::new(dims.nx, dims.ny, c.lx, c.ly)?;
        put(out, DdvefHistory { mesh, states })
    })
}

/// Relative spatial 2-norm errors of `run` against `reference` in
/// temperature and total radiation energy, one value per time level.
///
/// # Safety
/// `run` and `reference` must be live handles; `temperature` and `energy`
/// must each be valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn ddvef_compare(
    run: *const DdvefHistory,
    reference: *const DdvefHistory,
    temperature: *mut f64,
    energy: *mut f64,
    len: usize,
) -> DdvefStatus {
    guard(|| {
        let a = borrow(run, "run")?;
        let b = borrow(reference, "reference")?;
        if (a.mesh.nx, a.mesh.ny) != (b.mesh.nx, b.mesh.ny) {
            return Err(Error::Dimension(format!(
                "run is {}x{}, reference is {}x{}",
                a.mesh.nx, a.mesh.ny, b.mesh.nx, b.mesh.ny
            ))
            .into());
        }
        let report = compare_runs(&a.mesh, &a.states, &b.states)?;
        copy_out(&report.temperature, temperature, len)?;
        copy_out(&report.energy, energy, len)
    })
}

/// # Safety
/// `h` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ddvef_history_free(h: *mut DdvefHistory) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}
