//! WGS84 geodesy: geodetic <-> ECEF conversions and local reference frames.
//!
//! Geodetic coordinates are EPSG:4979 (latitude, longitude in degrees,
//! ellipsoidal height in meters); the Cartesian frame is EPSG:4978 ECEF,
//! meters, x through the prime meridian, z through the north pole.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

/// WGS84 semi-major axis, meters.
pub const WGS84_A: f64 = 6_378_137.0;
/// WGS84 inverse flattening.
pub const WGS84_INV_F: f64 = 298.257_223_563;
/// WGS84 flattening.
pub const WGS84_F: f64 = 1.0 / WGS84_INV_F;
/// WGS84 first eccentricity squared, e^2 = f(2 - f).
pub const WGS84_E2: f64 = WGS84_F * (2.0 - WGS84_F);
/// WGS84 semi-minor axis, meters, b = a(1 - f).
pub const WGS84_B: f64 = WGS84_A * (1.0 - WGS84_F);

/// AIS sentinel for "true heading unavailable".
pub const HEADING_UNAVAILABLE: u16 = 511;

#[derive(Debug, Error, PartialEq)]
pub enum GeodesyError {
    #[error("coordinate out of range: lat {lat_deg} deg, lon {lon_deg} deg")]
    InvalidCoordinate { lat_deg: f64, lon_deg: f64 },
    #[error("heading unavailable or invalid ({0})")]
    MissingHeading(f64),
}

/// Geodetic position on the WGS84 ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodeticCoord {
    pub lat_deg: f64,
    pub lon_deg: f64,
    /// Height above the ellipsoid, meters.
    pub height_m: f64,
}

impl GeodeticCoord {
    /// Validates latitude in [-90, 90] and longitude in [-180, 180].
    pub fn new(lat_deg: f64, lon_deg: f64, height_m: f64) -> Result<Self, GeodesyError> {
        if !(-90.0..=90.0).contains(&lat_deg)
            || !(-180.0..=180.0).contains(&lon_deg)
            || !height_m.is_finite()
        {
            return Err(GeodesyError::InvalidCoordinate { lat_deg, lon_deg });
        }
        Ok(Self {
            lat_deg,
            lon_deg,
            height_m,
        })
    }
}

/// Earth-centered earth-fixed position, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EcefCoord {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl EcefCoord {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn as_vector(&self) -> Vec3 {
        Vector3::new(self.x, self.y, self.z)
    }

    pub fn from_vector(v: Vec3) -> Self {
        Self {
            x: v.x,
            y: v.y,
            z: v.z,
        }
    }
}

impl std::ops::Add<Vec3> for EcefCoord {
    type Output = EcefCoord;
    fn add(self, rhs: Vec3) -> EcefCoord {
        EcefCoord::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl std::ops::Sub<EcefCoord> for EcefCoord {
    type Output = Vec3;
    fn sub(self, rhs: EcefCoord) -> Vec3 {
        Vector3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

/// Local east/north/up tangent frame at some geodetic point.
///
/// Axes are unit vectors expressed in ECEF; `up` is the ellipsoid normal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnuFrame {
    pub origin: EcefCoord,
    pub east: Vec3,
    pub north: Vec3,
    pub up: Vec3,
}

impl EnuFrame {
    /// ECEF point for local (east, north, up) offsets in meters.
    pub fn to_ecef(&self, enu: Vec3) -> EcefCoord {
        self.origin + (self.east * enu.x + self.north * enu.y + self.up * enu.z)
    }

    /// Local (east, north, up) offsets of an ECEF point, meters.
    pub fn to_enu(&self, p: EcefCoord) -> Vec3 {
        let d = p - self.origin;
        Vector3::new(self.east.dot(&d), self.north.dot(&d), self.up.dot(&d))
    }
}

/// Vessel-fixed object frame anchored at the water-level reference point.
///
/// `x` points along the heading (toward the bow), `z` is the local up
/// (ellipsoid normal), `y = z x x` points to port. Roll and pitch are
/// assumed zero, so the frame is orthonormal by construction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VesselFrame {
    pub origin: EcefCoord,
    pub x: Vec3,
    pub y: Vec3,
    pub z: Vec3,
}

impl VesselFrame {
    pub fn translated(&self, delta: Vec3) -> Self {
        Self {
            origin: self.origin + delta,
            ..*self
        }
    }
}

/// Geodetic to ECEF. Exact closed form.
pub fn geodetic_to_ecef(g: &GeodeticCoord) -> EcefCoord {
    let lat = g.lat_deg.to_radians();
    let lon = g.lon_deg.to_radians();
    let (sin_lat, cos_lat) = lat.sin_cos();
    let (sin_lon, cos_lon) = lon.sin_cos();
    // Prime vertical radius of curvature.
    let n = WGS84_A / (1.0 - WGS84_E2 * sin_lat * sin_lat).sqrt();
    EcefCoord::new(
        (n + g.height_m) * cos_lat * cos_lon,
        (n + g.height_m) * cos_lat * sin_lon,
        (n * (1.0 - WGS84_E2) + g.height_m) * sin_lat,
    )
}

/// ECEF to geodetic by fixed-point iteration on the latitude.
///
/// Converges to 1e-12 rad in well under 10 iterations everywhere off the
/// polar axis; on the axis the longitude is conventionally 0.
pub fn ecef_to_geodetic(p: &EcefCoord) -> GeodeticCoord {
    let rho = p.x.hypot(p.y);
    let lon = if rho == 0.0 { 0.0 } else { p.y.atan2(p.x) };

    if rho == 0.0 && p.z == 0.0 {
        // Geocenter: degenerate, pin to the equator at height -a.
        return GeodeticCoord {
            lat_deg: 0.0,
            lon_deg: 0.0,
            height_m: -WGS84_A,
        };
    }

    // Height formula switches hemispherically to stay well-conditioned.
    let height_at = |lat: f64, n: f64| {
        if lat.abs() > std::f64::consts::FRAC_PI_4 {
            p.z / lat.sin() - n * (1.0 - WGS84_E2)
        } else {
            rho / lat.cos() - n
        }
    };
    let radius_at = |lat: f64| {
        let s = lat.sin();
        WGS84_A / (1.0 - WGS84_E2 * s * s).sqrt()
    };

    let mut lat = p.z.atan2(rho * (1.0 - WGS84_E2));
    for _ in 0..10 {
        let n = radius_at(lat);
        let h = height_at(lat, n);
        let next = p.z.atan2(rho * (1.0 - WGS84_E2 * n / (n + h)));
        let done = (next - lat).abs() < 1e-12;
        lat = next;
        if done {
            break;
        }
    }
    let n = radius_at(lat);
    let h = height_at(lat, n);
    GeodeticCoord {
        lat_deg: lat.to_degrees(),
        lon_deg: lon.to_degrees(),
        height_m: h,
    }
}

/// East/north/up tangent frame at a geodetic point.
pub fn enu_frame_at(g: &GeodeticCoord) -> EnuFrame {
    let lat = g.lat_deg.to_radians();
    let lon = g.lon_deg.to_radians();
    let (sin_lat, cos_lat) = lat.sin_cos();
    let (sin_lon, cos_lon) = lon.sin_cos();
    EnuFrame {
        origin: geodetic_to_ecef(g),
        east: Vector3::new(-sin_lon, cos_lon, 0.0),
        north: Vector3::new(-sin_lat * cos_lon, -sin_lat * sin_lon, cos_lat),
        up: Vector3::new(cos_lat * cos_lon, cos_lat * sin_lon, sin_lat),
    }
}

/// Vessel object frame at `anchor` for a true heading in degrees
/// (clockwise from north).
///
/// The AIS sentinel 511 and non-finite values are rejected; anything else
/// is normalized into [0, 360).
pub fn vessel_frame(anchor: &GeodeticCoord, heading_deg: f64) -> Result<VesselFrame, GeodesyError> {
    if !heading_deg.is_finite() || heading_deg == f64::from(HEADING_UNAVAILABLE) {
        return Err(GeodesyError::MissingHeading(heading_deg));
    }
    let h = heading_deg.rem_euclid(360.0).to_radians();
    let enu = enu_frame_at(anchor);
    let x = enu.north * h.cos() + enu.east * h.sin();
    let z = enu.up;
    let y = z.cross(&x);
    Ok(VesselFrame {
        origin: enu.origin,
        x,
        y,
        z,
    })
}
