//! Geographic points and the flat-earth degree/kilometre conversion.

use crate::error::{Error, Result};
use crate::math;

/// A (longitude, latitude) pair in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub const fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }

    pub fn is_finite(&self) -> bool {
        self.lon.is_finite() && self.lat.is_finite()
    }
}

/// Degrees per kilometre along each axis, fixed at a reference latitude.
///
/// Distances anywhere in the region use the same pair of factors, so a
/// kernel bandwidth of `h` km becomes `h * (delta_lon, delta_lat)` degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KmScale {
    pub delta_lon: f64,
    pub delta_lat: f64,
    pub ref_lat: f64,
}

impl KmScale {
    pub const KM_PER_DEG_LAT: f64 = 110.574;
    pub const KM_PER_DEG_LON_AT_EQUATOR: f64 = 111.320;

    pub fn at_latitude(ref_lat: f64) -> Result<Self> {
        if !ref_lat.is_finite() || ref_lat.abs() >= 89.0 {
            return Err(Error::InvalidParameter("reference latitude must lie in (-89, 89)"));
        }
        let cos_lat = math::cos(ref_lat.to_radians());
        Ok(Self {
            delta_lon: 1.0 / (Self::KM_PER_DEG_LON_AT_EQUATOR * cos_lat),
            delta_lat: 1.0 / Self::KM_PER_DEG_LAT,
            ref_lat,
        })
    }

    /// Displacement from `from` to `to` in kilometres (east, north).
    #[inline]
    pub fn displacement_km(&self, from: GeoPoint, to: GeoPoint) -> (f64, f64) {
        ((to.lon - from.lon) / self.delta_lon, (to.lat - from.lat) / self.delta_lat)
    }

    /// The point `east_km` east and `north_km` north of `origin`.
    #[inline]
    pub fn offset(&self, origin: GeoPoint, east_km: f64, north_km: f64) -> GeoPoint {
        GeoPoint::new(origin.lon + east_km * self.delta_lon, origin.lat + north_km * self.delta_lat)
    }

    /// Square degrees per square kilometre.
    #[inline]
    pub fn deg2_per_km2(&self) -> f64 {
        self.delta_lon * self.delta_lat
    }
}

/// Equirectangular distance in kilometres.
pub fn dist_km(a: GeoPoint, b: GeoPoint, scale: &KmScale) -> f64 {
    let (dx, dy) = scale.displacement_km(a, b);
    math::hypot(dx, dy)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BoundingBox {
    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self> {
        let finite = [min_lon, min_lat, max_lon, max_lat].iter().all(|v| v.is_finite());
        if !finite || min_lon >= max_lon || min_lat >= max_lat {
            return Err(Error::InvalidParameter("bounding box must have min < max on both axes"));
        }
        Ok(Self { min_lon, min_lat, max_lon, max_lat })
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        p.lon >= self.min_lon && p.lon <= self.max_lon && p.lat >= self.min_lat && p.lat <= self.max_lat
    }

    pub fn center(&self) -> GeoPoint {
        GeoPoint::new(0.5 * (self.min_lon + self.max_lon), 0.5 * (self.min_lat + self.max_lat))
    }
}
