//! C ABI for the gateway planner.
//!
//! Conventions: every fallible call returns a [`GsplanStatus`] and writes its
//! result through an out-pointer. On failure a message is available from
//! [`gsplan_last_error`] on the same thread. Handles are opaque and must be
//! released with their matching `*_free` function; strings returned by the
//! library are released with [`gsplan_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use gsplan::atmos::{attenuation_001, CoefficientTable, RainModelInputs};
use gsplan::config::load_config;
use gsplan::geogrid::GridSpec;
use gsplan::masks::gen_geopolitical_mask;
use gsplan::orbits::{elevation_angle, GeodeticPoint, SatState};
use gsplan::output::write_report_json;
use gsplan::planner::{load_inputs, run_plan, InputKind, PlanError, PlanOutcome};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GsplanStatus {
    Ok = 0,
    /// Null pointer, bad UTF-8 or a value outside its domain.
    InvalidArgument = 1,
    /// The run configuration failed to load or validate.
    ConfigError = 2,
    /// An input raster or intermediate could not be used.
    DataError = 3,
    /// A bug; includes caught panics.
    InternalError = 4,
    /// Index past the end of a collection.
    OutOfRange = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl ToString) {
    let s = CString::new(msg.to_string().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn fail(status: GsplanStatus, msg: impl ToString) -> GsplanStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> GsplanStatus) -> GsplanStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(GsplanStatus::InternalError, "panic inside gsplan"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, GsplanStatus> {
    if p.is_null() {
        return Err(fail(GsplanStatus::InvalidArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(GsplanStatus::InvalidArgument, format!("{name} is not UTF-8")))
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(GsplanStatus::InvalidArgument, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Message for the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn gsplan_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gsplan_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Rain attenuation coefficient table.
pub struct GsplanCoefficientTable(CoefficientTable);

/// The table shipped with the library.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsplan_table_bundled(out: *mut *mut GsplanCoefficientTable) -> GsplanStatus {
    non_null!(out);
    guard(|| {
        *out = Box::into_raw(Box::new(GsplanCoefficientTable(CoefficientTable::bundled())));
        GsplanStatus::Ok
    })
}

/// Loads a `freq_ghz,k_h,k_v,alpha_h,alpha_v` CSV table.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsplan_table_from_csv(
    path: *const c_char,
    out: *mut *mut GsplanCoefficientTable,
) -> GsplanStatus {
    non_null!(out);
    guard(|| {
        let path = match str_arg(path, "path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        match CoefficientTable::from_path(path) {
            Ok(t) => {
                *out = Box::into_raw(Box::new(GsplanCoefficientTable(t)));
                GsplanStatus::Ok
            }
            Err(e) => fail(GsplanStatus::DataError, e),
        }
    })
}

/// # Safety
/// `table` must come from a table constructor and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gsplan_table_free(table: *mut GsplanCoefficientTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Inputs for a single rain attenuation evaluation.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GsplanRainInputs {
    pub frequency_ghz: f64,
    pub elevation_deg: f64,
    /// 0 horizontal, 90 vertical, 45 circular.
    pub polarization_tilt_deg: f64,
    pub rain_rate_mm_h: f64,
    pub rain_height_km: f64,
    pub station_height_km: f64,
    pub latitude_deg: f64,
}

/// Attenuation exceeded for 0.01 % of an average year, dB.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gsplan_rain_attenuation(
    table: *const GsplanCoefficientTable,
    inputs: *const GsplanRainInputs,
    out_db: *mut f64,
) -> GsplanStatus {
    non_null!(table, inputs, out_db);
    guard(|| {
        let i = *inputs;
        let model = RainModelInputs {
            frequency_ghz: i.frequency_ghz,
            elevation_deg: i.elevation_deg,
            polarization_tilt_deg: i.polarization_tilt_deg,
            rain_rate_mm_h: i.rain_rate_mm_h,
            rain_height_km: i.rain_height_km,
            station_height_km: i.station_height_km,
            latitude_deg: i.latitude_deg,
        };
        match attenuation_001(&model, &(*table).0) {
            Ok(a) => {
                *out_db = a;
                GsplanStatus::Ok
            }
            Err(e) => fail(GsplanStatus::InvalidArgument, e),
        }
    })
}

/// Elevation in degrees of an Earth-fixed satellite position (meters) seen
/// from a geodetic observer.
///
/// # Safety
/// `out_deg` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsplan_elevation_deg(
    observer_lat: f64,
    observer_lon: f64,
    observer_alt_m: f64,
    sat_x_m: f64,
    sat_y_m: f64,
    sat_z_m: f64,
    out_deg: *mut f64,
) -> GsplanStatus {
    non_null!(out_deg);
    guard(|| {
        let vals = [observer_lat, observer_lon, observer_alt_m, sat_x_m, sat_y_m, sat_z_m];
        if vals.iter().any(|v| !v.is_finite()) || !(-90.0..=90.0).contains(&observer_lat) {
            return fail(GsplanStatus::InvalidArgument, "non-finite input or latitude outside [-90, 90]");
        }
        let obs = GeodeticPoint {
            lat: observer_lat,
            lon: observer_lon,
            alt_m: observer_alt_m,
        };
        let sat = SatState {
            sat_id: 0,
            position_ecef: [sat_x_m, sat_y_m, sat_z_m],
            epoch_s: 0.0,
        };
        *out_deg = elevation_angle(&obs, &sat);
        GsplanStatus::Ok
    })
}

/// Lattice bounds and steps in degrees.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct GsplanGridSpec {
    pub lat_min: f64,
    pub lat_max: f64,
    pub lon_min: f64,
    pub lon_max: f64,
    pub step_lat: f64,
    pub step_lon: f64,
}

fn to_spec(s: &GsplanGridSpec) -> Result<GridSpec, GsplanStatus> {
    GridSpec::new(s.lat_min, s.lat_max, s.lon_min, s.lon_max, s.step_lat, s.step_lon)
        .map_err(|e| fail(GsplanStatus::InvalidArgument, e))
}

/// Number of cells in the lattice.
///
/// # Safety
/// Both pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn gsplan_grid_len(spec: *const GsplanGridSpec, out_len: *mut usize) -> GsplanStatus {
    non_null!(spec, out_len);
    guard(|| match to_spec(&*spec) {
        Ok(s) => {
            *out_len = s.len();
            GsplanStatus::Ok
        }
        Err(st) => st,
    })
}

/// Fills `out` (one byte per cell, row-major from the southern row, 1 =
/// allowed) with the seeded random geopolitical mask. `len` must equal the
/// cell count.
///
/// # Safety
/// `spec` must be valid and `out` must point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn gsplan_geopolitical_mask(
    spec: *const GsplanGridSpec,
    seed: u64,
    blocked_fraction: f64,
    out: *mut u8,
    len: usize,
) -> GsplanStatus {
    non_null!(spec, out);
    guard(|| {
        let s = match to_spec(&*spec) {
            Ok(s) => s,
            Err(st) => return st,
        };
        if !(0.0..=1.0).contains(&blocked_fraction) {
            return fail(GsplanStatus::InvalidArgument, "blocked_fraction must lie in [0, 1]");
        }
        if len != s.len() {
            return fail(
                GsplanStatus::InvalidArgument,
                format!("buffer holds {len} cells, grid has {}", s.len()),
            );
        }
        let m = gen_geopolitical_mask(&s, seed, blocked_fraction);
        let buf = std::slice::from_raw_parts_mut(out, len);
        for (b, a) in buf.iter_mut().zip(m.mask.accepted()) {
            *b = u8::from(*a);
        }
        GsplanStatus::Ok
    })
}

/// A completed plan.
pub struct GsplanPlan(PlanOutcome);

/// One selected gateway.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct GsplanSite {
    pub gw_id: usize,
    pub region_id: usize,
    pub region_cells: usize,
    pub lat: f64,
    pub lon: f64,
}

fn plan_status(e: &PlanError) -> GsplanStatus {
    match e {
        PlanError::Input { .. } | PlanError::Layer { .. } | PlanError::EmptyData(_) => GsplanStatus::DataError,
        PlanError::UnknownLayer { .. } => GsplanStatus::InvalidArgument,
        PlanError::DuplicateLayer(_) | PlanError::Grid(_) => GsplanStatus::InternalError,
    }
}

/// Loads a TOML run configuration and runs the full plan.
///
/// # Safety
/// `config_path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsplan_plan_run(config_path: *const c_char, out: *mut *mut GsplanPlan) -> GsplanStatus {
    non_null!(out);
    guard(|| {
        let path = match str_arg(config_path, "config_path") {
            Ok(p) => p,
            Err(s) => return s,
        };
        let cfg = match load_config(path) {
            Ok(c) => c,
            Err(e) => return fail(GsplanStatus::ConfigError, e),
        };
        let outcome = load_inputs(&cfg, &InputKind::ALL).and_then(|inputs| run_plan(&cfg, &inputs));
        match outcome {
            Ok(o) => {
                let broken = o.invariant_violations();
                if !broken.is_empty() {
                    return fail(GsplanStatus::InternalError, broken.join("; "));
                }
                *out = Box::into_raw(Box::new(GsplanPlan(o)));
                GsplanStatus::Ok
            }
            Err(e) => fail(plan_status(&e), e),
        }
    })
}

/// # Safety
/// `plan` must come from [`gsplan_plan_run`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn gsplan_plan_free(plan: *mut GsplanPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Number of gateway sites; 0 for a null handle.
///
/// # Safety
/// `plan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gsplan_plan_site_count(plan: *const GsplanPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.0.report.sites.len())
}

/// Fraction of cells accepted by every criterion; NaN for a null handle.
///
/// # Safety
/// `plan` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gsplan_plan_all_fraction(plan: *const GsplanPlan) -> f64 {
    plan.as_ref().map_or(f64::NAN, |p| p.0.report.all_criteria_fraction)
}

/// Copies site `index` into `out`.
///
/// # Safety
/// `plan` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsplan_plan_site(plan: *const GsplanPlan, index: usize, out: *mut GsplanSite) -> GsplanStatus {
    non_null!(plan, out);
    let sites = &(*plan).0.report.sites;
    guard(|| match sites.get(index) {
        Some(s) => {
            *out = GsplanSite {
                gw_id: s.gw_id,
                region_id: s.region_id,
                region_cells: s.region_cells,
                lat: s.lat,
                lon: s.lon,
            };
            GsplanStatus::Ok
        }
        None => fail(
            GsplanStatus::OutOfRange,
            format!("site {index} of {}", sites.len()),
        ),
    })
}

/// The full report as JSON. Free the string with [`gsplan_string_free`].
///
/// # Safety
/// `plan` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn gsplan_plan_report_json(plan: *const GsplanPlan, out: *mut *mut c_char) -> GsplanStatus {
    non_null!(plan, out);
    guard(|| {
        let mut buf = Vec::new();
        if let Err(e) = write_report_json(&(*plan).0.report, &mut buf) {
            return fail(GsplanStatus::InternalError, e);
        }
        match CString::new(buf) {
            Ok(s) => {
                *out = s.into_raw();
                GsplanStatus::Ok
            }
            Err(e) => fail(GsplanStatus::InternalError, e),
        }
    })
}
