//! Georeferencing math: pixel/geographic transforms for north-up imagery,
//! great-circle distances and a local planar projection.
//!
//! Everything here is a pure function over `Copy` values.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mean Earth radius in meters (spherical model).
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Tolerance, in degrees, for a geographic point to count as inside a
/// reference's bounding box.
pub const BOUNDS_TOLERANCE_DEG: f64 = 1e-9;

/// Maximum separation (in degrees, per axis) accepted by [`local_xy_m`].
pub const LOCAL_PROJECTION_LIMIT_DEG: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("invalid georeference: {0}")]
    InvalidReference(String),
    #[error("{axis} coordinate {value} outside [{min}, {max}]")]
    OutOfBounds {
        axis: Axis,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("point is {separation_deg:.6} degrees from the projection origin along {axis}, limit is {LOCAL_PROJECTION_LIMIT_DEG}")]
    ProjectionDomain { axis: Axis, separation_deg: f64 },
}

/// Axis named by bounds and projection errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    /// Pixel column.
    X,
    /// Pixel row.
    Y,
    Latitude,
    Longitude,
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Latitude => "latitude",
            Axis::Longitude => "longitude",
        })
    }
}

#[derive(Deserialize)]
struct RawGeoPoint {
    lat: f64,
    lon: f64,
}

/// WGS-84 position in decimal degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeoPoint")]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::InvalidCoordinate(format!(
                "latitude {lat} not in [-90, 90]"
            )));
        }
        if !lon.is_finite() || !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::InvalidCoordinate(format!(
                "longitude {lon} not in [-180, 180]"
            )));
        }
        Ok(Self { lat, lon })
    }
}

impl TryFrom<RawGeoPoint> for GeoPoint {
    type Error = GeoError;

    fn try_from(raw: RawGeoPoint) -> Result<Self, Self::Error> {
        GeoPoint::new(raw.lat, raw.lon)
    }
}

impl fmt::Display for GeoPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.8}, {:.8})", self.lat, self.lon)
    }
}

/// Image position: `x` is the column (rightward), `y` the row (downward),
/// origin at the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
}

impl PixelPoint {
    pub fn new(x: f64, y: f64) -> Result<Self, GeoError> {
        if !x.is_finite() || !y.is_finite() || x < 0.0 || y < 0.0 {
            return Err(GeoError::InvalidCoordinate(format!(
                "pixel ({x}, {y}) must be finite and non-negative"
            )));
        }
        Ok(Self { x, y })
    }
}

#[derive(Deserialize)]
struct RawGeoReference {
    top_left: GeoPoint,
    bottom_right: GeoPoint,
    width_px: u32,
    height_px: u32,
}

/// Corner metadata binding an unrotated, north-up raster to geographic
/// coordinates.
///
/// The JSON form is
/// `{"top_left": {"lat": f, "lon": f}, "bottom_right": {"lat": f, "lon": f}, "width_px": n, "height_px": n}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGeoReference")]
pub struct GeoReference {
    top_left: GeoPoint,
    bottom_right: GeoPoint,
    width_px: u32,
    height_px: u32,
}

impl TryFrom<RawGeoReference> for GeoReference {
    type Error = GeoError;

    fn try_from(raw: RawGeoReference) -> Result<Self, Self::Error> {
        GeoReference::new(raw.top_left, raw.bottom_right, raw.width_px, raw.height_px)
    }
}

impl GeoReference {
    pub fn new(
        top_left: GeoPoint,
        bottom_right: GeoPoint,
        width_px: u32,
        height_px: u32,
    ) -> Result<Self, GeoError> {
        if width_px == 0 || height_px == 0 {
            return Err(GeoError::InvalidReference(format!(
                "image size {width_px}x{height_px} must be positive"
            )));
        }
        if top_left.lat <= bottom_right.lat {
            return Err(GeoError::InvalidReference(format!(
                "top-left latitude {} must be north of bottom-right latitude {}",
                top_left.lat, bottom_right.lat
            )));
        }
        if top_left.lon == bottom_right.lon {
            return Err(GeoError::InvalidReference(
                "corner longitudes must differ".to_string(),
            ));
        }
        let reference = Self {
            top_left,
            bottom_right,
            width_px,
            height_px,
        };
        let (mx, my) = reference.meters_per_pixel();
        if !(mx.is_finite() && mx > 0.0 && my.is_finite() && my > 0.0) {
            return Err(GeoError::InvalidReference(format!(
                "derived resolution {mx} x {my} m/px is not positive"
            )));
        }
        Ok(reference)
    }

    /// Parses the per-image metadata JSON.
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn top_left(&self) -> GeoPoint {
        self.top_left
    }

    pub fn bottom_right(&self) -> GeoPoint {
        self.bottom_right
    }

    pub fn width_px(&self) -> u32 {
        self.width_px
    }

    pub fn height_px(&self) -> u32 {
        self.height_px
    }

    /// Ground resolution along x and y, measured along the scene's top edge
    /// and left edge.
    pub fn meters_per_pixel(&self) -> (f64, f64) {
        let top_right = GeoPoint {
            lat: self.top_left.lat,
            lon: self.bottom_right.lon,
        };
        let bottom_left = GeoPoint {
            lat: self.bottom_right.lat,
            lon: self.top_left.lon,
        };
        (
            haversine_m(self.top_left, top_right) / f64::from(self.width_px),
            haversine_m(self.top_left, bottom_left) / f64::from(self.height_px),
        )
    }

    fn check_pixel(&self, p: PixelPoint) -> Result<(), GeoError> {
        let (w, h) = (f64::from(self.width_px), f64::from(self.height_px));
        if !(0.0..=w).contains(&p.x) {
            return Err(GeoError::OutOfBounds {
                axis: Axis::X,
                value: p.x,
                min: 0.0,
                max: w,
            });
        }
        if !(0.0..=h).contains(&p.y) {
            return Err(GeoError::OutOfBounds {
                axis: Axis::Y,
                value: p.y,
                min: 0.0,
                max: h,
            });
        }
        Ok(())
    }
}

fn check_span(axis: Axis, value: f64, a: f64, b: f64) -> Result<(), GeoError> {
    let (min, max) = if a <= b { (a, b) } else { (b, a) };
    if value < min - BOUNDS_TOLERANCE_DEG || value > max + BOUNDS_TOLERANCE_DEG {
        return Err(GeoError::OutOfBounds {
            axis,
            value,
            min,
            max,
        });
    }
    Ok(())
}

/// Maps an image position to latitude/longitude by linear interpolation
/// between the reference corners.
pub fn pixel_to_geo(p: PixelPoint, reference: &GeoReference) -> Result<GeoPoint, GeoError> {
    reference.check_pixel(p)?;
    let tl = reference.top_left;
    let br = reference.bottom_right;
    let fy = p.y / f64::from(reference.height_px);
    let fx = p.x / f64::from(reference.width_px);
    Ok(GeoPoint {
        lat: tl.lat + fy * (br.lat - tl.lat),
        lon: tl.lon + fx * (br.lon - tl.lon),
    })
}

/// Inverse of [`pixel_to_geo`].
pub fn geo_to_pixel(g: GeoPoint, reference: &GeoReference) -> Result<PixelPoint, GeoError> {
    let tl = reference.top_left;
    let br = reference.bottom_right;
    check_span(Axis::Latitude, g.lat, tl.lat, br.lat)?;
    check_span(Axis::Longitude, g.lon, tl.lon, br.lon)?;
    let (w, h) = (
        f64::from(reference.width_px),
        f64::from(reference.height_px),
    );
    // Points inside the tolerance band may land a hair outside the raster.
    let x = ((g.lon - tl.lon) / (br.lon - tl.lon) * w).clamp(0.0, w);
    let y = ((g.lat - tl.lat) / (br.lat - tl.lat) * h).clamp(0.0, h);
    Ok(PixelPoint { x, y })
}

/// Great-circle distance on a sphere of radius [`EARTH_RADIUS_M`].
pub fn haversine_m(a: GeoPoint, b: GeoPoint) -> f64 {
    let phi1 = a.lat.to_radians();
    let phi2 = b.lat.to_radians();
    let dphi = (b.lat - a.lat).to_radians();
    let dlambda = (b.lon - a.lon).to_radians();
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Local equirectangular projection around `origin`: returns meters east and
/// meters north.
///
/// Only defined within one degree of the origin on each axis.
pub fn local_xy_m(g: GeoPoint, origin: GeoPoint) -> Result<(f64, f64), GeoError> {
    let dlat = g.lat - origin.lat;
    let dlon = g.lon - origin.lon;
    if dlat.abs() >= LOCAL_PROJECTION_LIMIT_DEG {
        return Err(GeoError::ProjectionDomain {
            axis: Axis::Latitude,
            separation_deg: dlat.abs(),
        });
    }
    if dlon.abs() >= LOCAL_PROJECTION_LIMIT_DEG {
        return Err(GeoError::ProjectionDomain {
            axis: Axis::Longitude,
            separation_deg: dlon.abs(),
        });
    }
    let x = dlon.to_radians() * EARTH_RADIUS_M * origin.lat.to_radians().cos();
    let y = dlat.to_radians() * EARTH_RADIUS_M;
    Ok((x, y))
}
