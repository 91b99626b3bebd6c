//! Square analysis cells laid out in km from the south-west corner of a box.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geo::{BoundingBox, GeoPoint, KmScale};
use crate::math;

/// Row-major grid of `rows x cols` square cells of side `cell_km`; row 0 is
/// the southernmost, column 0 the westernmost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub origin: GeoPoint,
    pub cell_km: f64,
    pub rows: usize,
    pub cols: usize,
    pub scale: KmScale,
}

impl Grid {
    /// Smallest grid anchored at the box's south-west corner that covers it.
    pub fn covering(bbox: &BoundingBox, cell_km: f64, scale: KmScale) -> Result<Self> {
        if !(cell_km > 0.0 && cell_km.is_finite()) {
            return Err(Error::InvalidParameter("cell size must be positive"));
        }
        let origin = GeoPoint::new(bbox.min_lon, bbox.min_lat);
        let (w_km, h_km) = scale.displacement_km(origin, GeoPoint::new(bbox.max_lon, bbox.max_lat));
        // Tolerate rounding when the box is an exact multiple of the cell.
        let cols = math::ceil(w_km / cell_km - 1e-9).max(1.0) as usize;
        let rows = math::ceil(h_km / cell_km - 1e-9).max(1.0) as usize;
        Self::new(origin, cell_km, rows, cols, scale)
    }

    pub fn new(origin: GeoPoint, cell_km: f64, rows: usize, cols: usize, scale: KmScale) -> Result<Self> {
        if !(cell_km > 0.0 && cell_km.is_finite()) || rows == 0 || cols == 0 || !origin.is_finite() {
            return Err(Error::InvalidParameter("grid needs a finite origin, positive cell size and at least one cell"));
        }
        Ok(Self { origin, cell_km, rows, cols, scale })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_km * self.cell_km
    }

    pub fn total_area(&self) -> f64 {
        self.cell_area() * self.len() as f64
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.cols + col
    }

    #[inline]
    pub fn row_col(&self, index: usize) -> (usize, usize) {
        (index / self.cols, index % self.cols)
    }

    /// Cell centre in km east/north of the origin.
    #[inline]
    pub fn center_km(&self, index: usize) -> (f64, f64) {
        let (r, c) = self.row_col(index);
        ((c as f64 + 0.5) * self.cell_km, (r as f64 + 0.5) * self.cell_km)
    }

    pub fn center(&self, index: usize) -> GeoPoint {
        let (x, y) = self.center_km(index);
        self.scale.offset(self.origin, x, y)
    }

    pub fn centers(&self) -> impl Iterator<Item = GeoPoint> + '_ {
        (0..self.len()).map(move |i| self.center(i))
    }

    pub fn to_km(&self, p: GeoPoint) -> (f64, f64) {
        self.scale.displacement_km(self.origin, p)
    }

    pub fn bounds(&self) -> BoundingBox {
        let ne = self.scale.offset(self.origin, self.cols as f64 * self.cell_km, self.rows as f64 * self.cell_km);
        BoundingBox { min_lon: self.origin.lon, min_lat: self.origin.lat, max_lon: ne.lon, max_lat: ne.lat }
    }

    /// Index of the cell containing `p`; points on the far edges belong to
    /// the last row/column.
    pub fn cell_of(&self, p: GeoPoint) -> Result<usize> {
        let (x, y) = self.to_km(p);
        let col = math::floor(x / self.cell_km);
        let row = math::floor(y / self.cell_km);
        let (w, h) = (self.cols as f64, self.rows as f64);
        let inside = |v: f64, lim: f64, raw: f64| raw.is_finite() && v >= 0.0 && (v < lim || (v == lim && raw <= lim * self.cell_km));
        if !inside(col, w, x) || !inside(row, h, y) {
            return Err(Error::OutOfRegion { lon: p.lon, lat: p.lat });
        }
        Ok(self.index((row as usize).min(self.rows - 1), (col as usize).min(self.cols - 1)))
    }

    /// Distance in km from `p` to the nearest point of cell `index` (zero
    /// inside the cell).
    pub fn distance_to_cell_km(&self, index: usize, p: GeoPoint) -> f64 {
        let (x, y) = self.to_km(p);
        let (r, c) = self.row_col(index);
        let gap = |v: f64, lo: f64| (lo - v).max(v - (lo + self.cell_km)).max(0.0);
        math::hypot(gap(x, c as f64 * self.cell_km), gap(y, r as f64 * self.cell_km))
    }

    /// Sum of `values` times cell area.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.cell_area()
    }

    pub fn zeros(&self) -> Vec<f64> {
        alloc::vec![0.0; self.len()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> Grid {
        let scale = KmScale::at_latitude(23.5).unwrap();
        let origin = GeoPoint::new(85.0, 23.0);
        let ne = scale.offset(origin, 25.0, 10.0);
        Grid::covering(&BoundingBox::new(origin.lon, origin.lat, ne.lon, ne.lat).unwrap(), 2.5, scale).unwrap()
    }

    #[test]
    fn cells_tile_the_box() {
        let g = grid();
        assert_eq!((g.rows, g.cols), (4, 10));
        assert_eq!(g.len(), 40);
        assert!((g.cell_area() - 6.25).abs() < 1e-15);
        for i in 0..g.len() {
            assert_eq!(g.cell_of(g.center(i)).unwrap(), i);
        }
        assert!(g.cell_of(g.scale.offset(g.origin, -0.1, 1.0)).is_err());
        assert!(g.cell_of(g.scale.offset(g.origin, 1.0, 10.5)).is_err());
    }

    #[test]
    fn cell_distance() {
        let g = grid();
        let p = g.scale.offset(g.origin, 1.0, 1.0);
        assert_eq!(g.distance_to_cell_km(0, p), 0.0);
        let d = g.distance_to_cell_km(g.index(0, 2), p);
        assert!((d - 4.0).abs() < 1e-9);
    }
}
