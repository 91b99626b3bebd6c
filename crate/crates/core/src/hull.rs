//! Convex hull of a handful of points in the km plane and the distance to it.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geo::GeoPoint;
use crate::grid::Grid;
use crate::math;

type Pt = (f64, f64);

fn cross(o: Pt, a: Pt, b: Pt) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull, counter-clockwise without collinear vertices. Degenerate
/// inputs give one vertex (a point) or two (a segment).
#[derive(Debug, Clone, PartialEq)]
pub struct ConvexHull {
    vertices: Vec<Pt>,
}

impl ConvexHull {
    pub fn new(points: &[Pt]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InsufficientHistory { needed: 1, got: 0 });
        }
        let mut pts = points.to_vec();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        pts.dedup();
        if pts.len() < 3 {
            return Ok(Self { vertices: pts });
        }
        // Andrew's monotone chain.
        let mut hull: Vec<Pt> = Vec::with_capacity(pts.len() * 2);
        for &p in &pts {
            while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        let lower = hull.len() + 1;
        for &p in pts.iter().rev().skip(1) {
            while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
        if hull.len() < 3 {
            // All collinear: keep the two extremes.
            hull = alloc::vec![pts[0], pts[pts.len() - 1]];
        }
        Ok(Self { vertices: hull })
    }

    pub fn vertices(&self) -> &[Pt] {
        &self.vertices
    }

    /// Euclidean distance from `p` to the hull, zero inside.
    pub fn distance(&self, p: Pt) -> f64 {
        let v = &self.vertices;
        match v.len() {
            1 => math::hypot(p.0 - v[0].0, p.1 - v[0].1),
            2 => segment_distance(p, v[0], v[1]),
            k => {
                let inside = (0..k).all(|i| cross(v[i], v[(i + 1) % k], p) >= 0.0);
                if inside {
                    0.0
                } else {
                    (0..k).map(|i| segment_distance(p, v[i], v[(i + 1) % k])).fold(f64::INFINITY, f64::min)
                }
            }
        }
    }
}

fn segment_distance(p: Pt, a: Pt, b: Pt) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 { (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0) } else { 0.0 };
    math::hypot(p.0 - (a.0 + t * dx), p.1 - (a.1 + t * dy))
}

/// Cells whose centre lies within `buffer_km` of the convex hull of `recent`.
pub fn extended_hull_mask(recent: &[GeoPoint], buffer_km: f64, grid: &Grid) -> Result<Vec<bool>> {
    if recent.is_empty() {
        return Err(Error::InsufficientHistory { needed: 1, got: 0 });
    }
    if !(buffer_km >= 0.0) {
        return Err(Error::InvalidParameter("hull buffer must be non-negative"));
    }
    let pts: Vec<Pt> = recent.iter().map(|&p| grid.to_km(p)).collect();
    let hull = ConvexHull::new(&pts)?;
    Ok((0..grid.len()).map(|i| hull.distance(grid.center_km(i)) <= buffer_km).collect())
}
