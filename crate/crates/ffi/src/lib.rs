//! C interface to the georeferencing, mission-file and trajectory-metric
//! parts of `uav-vla`.
//!
//! Every fallible call returns a [`UavVlaStatus`]; on failure
//! [`uav_vla_last_error`] describes what went wrong on the calling thread.
//! Objects are opaque handles released with their `_free` function. Strings
//! handed out by the library are released with [`uav_vla_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, UnwindSafe};
use std::ptr;

use uav_vla::eval::{self, Method, Trajectory};
use uav_vla::geo::{self, GeoPoint, GeoReference, PixelPoint};
use uav_vla::mission::{self, MissionPlan, ParseOptions};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UavVlaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InvalidUtf8 = 3,
    Parse = 4,
    InvalidPlan = 5,
    Evaluation = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UavVlaMethod {
    Knn = 0,
    Dtw = 1,
    Sequential = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavVlaGeoPoint {
    pub lat: f64,
    pub lon: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavVlaPixel {
    pub x: f64,
    pub y: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavVlaMetric {
    pub rmse_m: f64,
    pub total_sq_m2: f64,
    pub matched_pairs: usize,
    /// Sequential only: the trajectories differ in length.
    pub length_mismatch: bool,
}

/// Opaque georeference handle.
pub struct UavVlaGeoReference(GeoReference);

/// Opaque mission plan handle.
pub struct UavVlaMissionPlan(MissionPlan);

/// Opaque trajectory handle.
pub struct UavVlaTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Error(UavVlaStatus, String);

fn set_last_error(message: String) {
    let message = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(message));
}

fn guard<F>(f: F) -> UavVlaStatus
where
    F: FnOnce() -> Result<(), Error> + UnwindSafe,
{
    match catch_unwind(f) {
        Ok(Ok(())) => UavVlaStatus::Ok,
        Ok(Err(Error(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            UavVlaStatus::Panic
        }
    }
}

fn null(what: &str) -> Error {
    Error(UavVlaStatus::NullPointer, format!("{what} is NULL"))
}

unsafe fn borrow<'a, T>(p: *const T, what: &str) -> Result<&'a T, Error> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Error> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Error> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Error(UavVlaStatus::InvalidUtf8, format!("{what}: {e}")))
}

fn geo_point(p: UavVlaGeoPoint) -> Result<GeoPoint, Error> {
    GeoPoint::new(p.lat, p.lon).map_err(invalid)
}

fn invalid(e: impl ToString) -> Error {
    Error(UavVlaStatus::InvalidArgument, e.to_string())
}

fn to_c(p: GeoPoint) -> UavVlaGeoPoint {
    UavVlaGeoPoint {
        lat: p.lat,
        lon: p.lon,
    }
}

fn boxed<T>(value: T) -> *mut T {
    Box::into_raw(Box::new(value))
}

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn uav_vla_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Great-circle distance in meters.
///
/// # Safety
/// `out_m` must be NULL or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_haversine_m(
    a: UavVlaGeoPoint,
    b: UavVlaGeoPoint,
    out_m: *mut f64,
) -> UavVlaStatus {
    guard(|| {
        *out(out_m, "out_m")? = geo::haversine_m(geo_point(a)?, geo_point(b)?);
        Ok(())
    })
}

/// # Safety
/// `out_ref` must be NULL or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_georef_new(
    top_left: UavVlaGeoPoint,
    bottom_right: UavVlaGeoPoint,
    width_px: u32,
    height_px: u32,
    out_ref: *mut *mut UavVlaGeoReference,
) -> UavVlaStatus {
    guard(|| {
        let slot = out(out_ref, "out_ref")?;
        let r = GeoReference::new(
            geo_point(top_left)?,
            geo_point(bottom_right)?,
            width_px,
            height_px,
        )
        .map_err(invalid)?;
        *slot = boxed(UavVlaGeoReference(r));
        Ok(())
    })
}

/// Parses the per-image metadata JSON.
///
/// # Safety
/// `json` must be NULL or a NUL-terminated string; `out_ref` must be NULL or
/// point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_georef_from_json(
    json: *const c_char,
    out_ref: *mut *mut UavVlaGeoReference,
) -> UavVlaStatus {
    guard(|| {
        let slot = out(out_ref, "out_ref")?;
        let r = GeoReference::from_json(text(json, "json")?)
            .map_err(|e| Error(UavVlaStatus::Parse, e.to_string()))?;
        *slot = boxed(UavVlaGeoReference(r));
        Ok(())
    })
}

/// # Safety
/// `reference` must be NULL or a handle from this library not freed yet.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_georef_free(reference: *mut UavVlaGeoReference) {
    if !reference.is_null() {
        drop(Box::from_raw(reference));
    }
}

/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_pixel_to_geo(
    reference: *const UavVlaGeoReference,
    pixel: UavVlaPixel,
    out_point: *mut UavVlaGeoPoint,
) -> UavVlaStatus {
    guard(|| {
        let r = &borrow(reference, "reference")?.0;
        let slot = out(out_point, "out_point")?;
        let p = PixelPoint::new(pixel.x, pixel.y).map_err(invalid)?;
        *slot = to_c(geo::pixel_to_geo(p, r).map_err(invalid)?);
        Ok(())
    })
}

/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_geo_to_pixel(
    reference: *const UavVlaGeoReference,
    point: UavVlaGeoPoint,
    out_pixel: *mut UavVlaPixel,
) -> UavVlaStatus {
    guard(|| {
        let r = &borrow(reference, "reference")?.0;
        let slot = out(out_pixel, "out_pixel")?;
        let p = geo::geo_to_pixel(geo_point(point)?, r).map_err(invalid)?;
        *slot = UavVlaPixel { x: p.x, y: p.y };
        Ok(())
    })
}

/// Home position: 10% of the image size in from the top-left corner.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_make_home(
    reference: *const UavVlaGeoReference,
    out_point: *mut UavVlaGeoPoint,
) -> UavVlaStatus {
    guard(|| {
        let r = &borrow(reference, "reference")?.0;
        *out(out_point, "out_point")? = to_c(mission::make_home(r));
        Ok(())
    })
}

/// Parses a `QGC WPL 110` file. With `lenient`, unknown command codes are
/// kept instead of rejected.
///
/// # Safety
/// `wpl_text` must be NULL or a NUL-terminated string; `out_plan` must be
/// NULL or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_plan_parse(
    wpl_text: *const c_char,
    lenient: bool,
    out_plan: *mut *mut UavVlaMissionPlan,
) -> UavVlaStatus {
    guard(|| {
        let slot = out(out_plan, "out_plan")?;
        let plan = mission::parse_wpl_with(text(wpl_text, "wpl_text")?, ParseOptions { lenient })
            .map_err(|e| Error(UavVlaStatus::Parse, e.to_string()))?;
        *slot = boxed(UavVlaMissionPlan(plan));
        Ok(())
    })
}

/// HOME, TAKEOFF, one WAYPOINT per target in the given order,
/// RETURN_TO_LAUNCH, LAND.
///
/// # Safety
/// `targets` must point to `count` points (or be NULL when `count` is 0);
/// `out_plan` must be NULL or point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_plan_build_survey(
    targets: *const UavVlaGeoPoint,
    count: usize,
    home: UavVlaGeoPoint,
    altitude_m: f64,
    out_plan: *mut *mut UavVlaMissionPlan,
) -> UavVlaStatus {
    guard(|| {
        let slot = out(out_plan, "out_plan")?;
        let raw = if count == 0 {
            &[][..]
        } else if targets.is_null() {
            return Err(null("targets"));
        } else {
            std::slice::from_raw_parts(targets, count)
        };
        let targets = raw
            .iter()
            .map(|&p| geo_point(p))
            .collect::<Result<Vec<_>, _>>()?;
        let plan = mission::build_survey_plan(&targets, geo_point(home)?, altitude_m)
            .map_err(|e| Error(UavVlaStatus::InvalidPlan, e.to_string()))?;
        *slot = boxed(UavVlaMissionPlan(plan));
        Ok(())
    })
}

/// Checks the flight invariants (takeoff before waypoints, ends with LAND,
/// ...). Parsing alone checks only the file structure.
///
/// # Safety
/// `plan` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_plan_validate(plan: *const UavVlaMissionPlan) -> UavVlaStatus {
    guard(|| {
        borrow(plan, "plan")?
            .0
            .validate()
            .map_err(|e| Error(UavVlaStatus::InvalidPlan, e.to_string()))
    })
}

/// Serializes to `QGC WPL 110` text. Free the result with
/// [`uav_vla_string_free`].
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_plan_serialize(
    plan: *const UavVlaMissionPlan,
    out_text: *mut *mut c_char,
) -> UavVlaStatus {
    guard(|| {
        let plan = &borrow(plan, "plan")?.0;
        let slot = out(out_text, "out_text")?;
        let text = CString::new(mission::serialize_wpl(plan)).map_err(invalid)?;
        *slot = text.into_raw();
        Ok(())
    })
}

/// Number of items, home included. 0 for NULL.
///
/// # Safety
/// `plan` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_plan_len(plan: *const UavVlaMissionPlan) -> usize {
    plan.as_ref().map_or(0, |p| p.0.len())
}

/// # Safety
/// `plan` must be NULL or a handle from this library not freed yet.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_plan_free(plan: *mut UavVlaMissionPlan) {
    if !plan.is_null() {
        drop(Box::from_raw(plan));
    }
}

/// Ground track of a plan.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_plan_trajectory(
    plan: *const UavVlaMissionPlan,
    out_trajectory: *mut *mut UavVlaTrajectory,
) -> UavVlaStatus {
    guard(|| {
        let plan = &borrow(plan, "plan")?.0;
        *out(out_trajectory, "out_trajectory")? =
            boxed(UavVlaTrajectory(mission::extract_trajectory(plan)));
        Ok(())
    })
}

/// Trajectory from explicit points; consecutive repeats are rejected.
///
/// # Safety
/// `points` must point to `count` points; `out_trajectory` must be NULL or
/// point to writable memory.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_trajectory_new(
    points: *const UavVlaGeoPoint,
    count: usize,
    out_trajectory: *mut *mut UavVlaTrajectory,
) -> UavVlaStatus {
    guard(|| {
        let slot = out(out_trajectory, "out_trajectory")?;
        if points.is_null() {
            return Err(null("points"));
        }
        let pts = std::slice::from_raw_parts(points, count)
            .iter()
            .map(|&p| geo_point(p))
            .collect::<Result<Vec<_>, _>>()?;
        let t = Trajectory::new(pts).map_err(invalid)?;
        *slot = boxed(UavVlaTrajectory(t));
        Ok(())
    })
}

/// Number of points. 0 for NULL.
///
/// # Safety
/// `trajectory` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_trajectory_len(trajectory: *const UavVlaTrajectory) -> usize {
    trajectory.as_ref().map_or(0, |t| t.0.len())
}

/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_trajectory_point(
    trajectory: *const UavVlaTrajectory,
    index: usize,
    out_point: *mut UavVlaGeoPoint,
) -> UavVlaStatus {
    guard(|| {
        let t = &borrow(trajectory, "trajectory")?.0;
        let slot = out(out_point, "out_point")?;
        let p = t
            .points()
            .get(index)
            .ok_or_else(|| invalid(format!("index {index} out of range for {} points", t.len())))?;
        *slot = to_c(*p);
        Ok(())
    })
}

/// Sum of great-circle distances between consecutive points.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_trajectory_length_m(
    trajectory: *const UavVlaTrajectory,
    out_m: *mut f64,
) -> UavVlaStatus {
    guard(|| {
        let t = &borrow(trajectory, "trajectory")?.0;
        *out(out_m, "out_m")? = eval::trajectory_length_m(t);
        Ok(())
    })
}

/// # Safety
/// `trajectory` must be NULL or a handle from this library not freed yet.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_trajectory_free(trajectory: *mut UavVlaTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// RMSE of `generated` against `truth` with one of the three matching
/// methods.
///
/// # Safety
/// Pointers must be NULL or valid.
#[no_mangle]
pub unsafe extern "C" fn uav_vla_evaluate(
    generated: *const UavVlaTrajectory,
    truth: *const UavVlaTrajectory,
    method: UavVlaMethod,
    out_metric: *mut UavVlaMetric,
) -> UavVlaStatus {
    guard(|| {
        let g = &borrow(generated, "generated")?.0;
        let t = &borrow(truth, "truth")?.0;
        let slot = out(out_metric, "out_metric")?;
        let method = match method {
            UavVlaMethod::Knn => Method::Knn,
            UavVlaMethod::Dtw => Method::Dtw,
            UavVlaMethod::Sequential => Method::Sequential,
        };
        let r = eval::compute(method, g, t)
            .map_err(|e| Error(UavVlaStatus::Evaluation, e.to_string()))?;
        *slot = UavVlaMetric {
            rmse_m: r.rmse_m,
            total_sq_m2: r.total_sq_m2,
            matched_pairs: r.matched_pairs,
            length_mismatch: r.length_mismatch,
        };
        Ok(())
    })
}
