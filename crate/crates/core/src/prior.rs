//! Rule-based expert map over the analysis grid.
//!
//! A cell is "marked" when it is densely forested, away from security camps
//! and inside the buffered convex hull of the last few sightings. Fresh
//! informant reports add their own marks within a radius, and overlapping
//! marks stack, giving raw levels 0 to 3 that are normalized into a density.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geo::{dist_km, GeoPoint};
use crate::grid::Grid;
use crate::hull::extended_hull_mask;

/// Precomputed forest cover fraction per grid cell, row-major like [`Grid`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForestRaster {
    values: Vec<f64>,
}

impl ForestRaster {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidParameter("forest raster shape does not match the grid"));
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("forest density must lie in [0, 1]"));
        }
        Ok(Self { values })
    }

    pub fn uniform(grid: &Grid, value: f64) -> Result<Self> {
        Self::new(grid, alloc::vec![value; grid.len()])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// An informant report of a location, optionally tied to one gang.
#[derive(Debug, Clone, PartialEq)]
pub struct IntelInput {
    pub location: GeoPoint,
    pub received_day: u32,
    pub gang: Option<String>,
}

impl IntelInput {
    pub fn new(location: GeoPoint, received_day: u32) -> Self {
        Self { location, received_day, gang: None }
    }

    pub fn applies_to(&self, gang: &str) -> bool {
        self.gang.as_deref().is_none_or(|g| g == gang)
    }

    /// Received on or before `today` and at most `max_age` days old.
    pub fn is_fresh(&self, today: u32, max_age: u32) -> bool {
        self.received_day <= today && today - self.received_day <= max_age
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorThresholds {
    /// Minimum forest fraction for a marked cell.
    pub forest_min: f64,
    /// Cells within this distance of a camp are unmarked.
    pub camp_km: f64,
    /// Buffer around the convex hull of recent sightings.
    pub hull_buffer_km: f64,
    /// Radius marked around an informant report.
    pub intel_km: f64,
    pub intel_max_age_days: u32,
    /// Number of recent sightings spanning the hull.
    pub k0: usize,
}

impl Default for PriorThresholds {
    fn default() -> Self {
        Self { forest_min: 0.5, camp_km: 3.0, hull_buffer_km: 10.0, intel_km: 10.0, intel_max_age_days: 10, k0: 3 }
    }
}

/// Credibility weight on the expert map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Credibility {
    pub with_intel: f64,
    pub without_intel: f64,
}

impl Default for Credibility {
    fn default() -> Self {
        Self { with_intel: 0.5, without_intel: 0.1 }
    }
}

pub fn prior_credibility(intel_fresh: bool, credibility: &Credibility) -> f64 {
    if intel_fresh {
        credibility.with_intel
    } else {
        credibility.without_intel
    }
}

/// What the expert rules look at in one cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellEvidence {
    pub forest: f64,
    /// Distance to the nearest camp, infinite when there are none.
    pub camp_km: f64,
    pub in_hull: bool,
    /// Fresh reports (at most two are used) within the intel radius.
    pub intel_hits: usize,
}

/// Raw expert level of a cell.
pub fn raw_level(e: &CellEvidence, t: &PriorThresholds) -> u8 {
    let marked = e.forest >= t.forest_min && e.camp_km > t.camp_km && e.in_hull;
    match (marked, e.intel_hits) {
        (true, 0) => 1,
        (true, 1) => 2,
        (true, _) => 3,
        (false, 0) => 0,
        (false, 1) => 1,
        (false, _) => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorSupport {
    /// Density proportional to the raw levels.
    Rules,
    /// No cell was marked; uniform over the extended hull.
    HullFallback,
    /// Neither marks nor hull cells; uniform over the grid.
    GridFallback,
}

/// Normalized expert density (per km^2) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpertPrior {
    pub grid: Grid,
    pub density: Vec<f64>,
    pub support_mask: Vec<bool>,
    pub raw_levels: Vec<u8>,
    pub hull_mask: Vec<bool>,
    /// Number of fresh reports that entered the map (0 to 2).
    pub fresh_intel: usize,
    pub support: PriorSupport,
}

impl ExpertPrior {
    /// Density of the cell containing `p`.
    pub fn density_at(&self, p: GeoPoint) -> Result<f64> {
        Ok(self.density[self.grid.cell_of(p)?])
    }

    pub fn used_fresh_intel(&self) -> bool {
        self.fresh_intel > 0
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.density)
    }
}

/// Builds the expert map for `today`.
///
/// `recent` holds the latest sightings, oldest first; the last `k0` span the
/// hull. Reports must already be filtered to the gang in question; stale or
/// future ones are ignored and of the rest the two most recent are used.
pub fn build_expert_prior(
    grid: &Grid,
    forest: &ForestRaster,
    camps: &[GeoPoint],
    recent: &[GeoPoint],
    intel: &[IntelInput],
    today: u32,
    thresholds: &PriorThresholds,
) -> Result<ExpertPrior> {
    let k0 = thresholds.k0.max(1);
    if recent.len() < k0 {
        return Err(Error::InsufficientHistory { needed: k0, got: recent.len() });
    }
    if forest.values.len() != grid.len() {
        return Err(Error::InvalidParameter("forest raster shape does not match the grid"));
    }
    let hull_mask = extended_hull_mask(&recent[recent.len() - k0..], thresholds.hull_buffer_km, grid)?;

    let mut fresh: Vec<&IntelInput> = intel.iter().filter(|i| i.is_fresh(today, thresholds.intel_max_age_days)).collect();
    // Stable: ties keep input order.
    fresh.sort_by(|a, b| b.received_day.cmp(&a.received_day));
    fresh.truncate(2);

    let scale = &grid.scale;
    let raw_levels: Vec<u8> = (0..grid.len())
        .map(|i| {
            let center = grid.center(i);
            let camp_km = camps.iter().map(|&c| dist_km(center, c, scale)).fold(f64::INFINITY, f64::min);
            let intel_hits = fresh.iter().filter(|r| dist_km(center, r.location, scale) <= thresholds.intel_km).count();
            let evidence = CellEvidence { forest: forest.values[i], camp_km, in_hull: hull_mask[i], intel_hits };
            raw_level(&evidence, thresholds)
        })
        .collect();

    let total: u64 = raw_levels.iter().map(|&r| r as u64).sum();
    let area = grid.cell_area();
    let (density, support) = if total > 0 {
        let norm = total as f64 * area;
        (raw_levels.iter().map(|&r| r as f64 / norm).collect(), PriorSupport::Rules)
    } else {
        let hull_cells = hull_mask.iter().filter(|&&m| m).count();
        if hull_cells > 0 {
            let v = 1.0 / (hull_cells as f64 * area);
            (hull_mask.iter().map(|&m| if m { v } else { 0.0 }).collect(), PriorSupport::HullFallback)
        } else {
            (alloc::vec![1.0 / grid.total_area(); grid.len()], PriorSupport::GridFallback)
        }
    };
    let support_mask = density.iter().map(|&d| d > 0.0).collect();
    Ok(ExpertPrior { grid: *grid, density, support_mask, raw_levels, hull_mask, fresh_intel: fresh.len(), support })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::{BoundingBox, KmScale};
    use alloc::vec;
    use proptest::prelude::*;

    fn grid() -> Grid {
        let scale = KmScale::at_latitude(23.5).unwrap();
        let origin = GeoPoint::new(85.0, 23.0);
        let ne = scale.offset(origin, 50.0, 50.0);
        Grid::covering(&BoundingBox::new(origin.lon, origin.lat, ne.lon, ne.lat).unwrap(), 2.5, scale).unwrap()
    }

    fn t() -> PriorThresholds {
        PriorThresholds::default()
    }

    #[test]
    fn case_table() {
        let e = |forest, camp_km, in_hull, intel_hits| CellEvidence { forest, camp_km, in_hull, intel_hits };
        assert_eq!(raw_level(&e(0.6, 5.0, true, 0), &t()), 1);
        assert_eq!(raw_level(&e(0.6, 5.0, true, 1), &t()), 2);
        assert_eq!(raw_level(&e(0.6, 5.0, true, 2), &t()), 3);
        assert_eq!(raw_level(&e(0.3, 5.0, false, 1), &t()), 1);
        assert_eq!(raw_level(&e(0.3, 5.0, false, 2), &t()), 2);
        assert_eq!(raw_level(&e(0.3, 5.0, false, 0), &t()), 0);
        // Each failing clause on its own.
        assert_eq!(raw_level(&e(0.6, 3.0, true, 0), &t()), 0);
        assert_eq!(raw_level(&e(0.6, 5.0, false, 0), &t()), 0);
        assert_eq!(raw_level(&e(0.49, 5.0, true, 1), &t()), 1);
        assert_eq!(raw_level(&e(0.5, f64::INFINITY, true, 0), &t()), 1);
    }

    #[test]
    fn credibility() {
        let c = Credibility::default();
        assert_eq!(prior_credibility(true, &c), 0.5);
        assert_eq!(prior_credibility(false, &c), 0.1);
        let custom = Credibility { with_intel: 0.3, without_intel: 0.05 };
        assert_eq!(prior_credibility(true, &custom), 0.3);
        assert_eq!(prior_credibility(false, &custom), 0.05);
    }

    #[test]
    fn freshness() {
        let i = IntelInput::new(GeoPoint::new(85.0, 23.0), 100);
        assert!(i.is_fresh(100, 10));
        assert!(i.is_fresh(110, 10));
        assert!(!i.is_fresh(111, 10));
        assert!(!i.is_fresh(99, 10));
    }

    #[test]
    fn normalized_and_fallbacks() {
        let g = grid();
        let recent: Vec<GeoPoint> = [(20.0, 20.0), (25.0, 22.0), (22.0, 27.0)].iter().map(|&(x, y)| g.scale.offset(g.origin, x, y)).collect();
        let forest = ForestRaster::uniform(&g, 0.8).unwrap();
        let p = build_expert_prior(&g, &forest, &[], &recent, &[], 50, &t()).unwrap();
        assert_eq!(p.support, PriorSupport::Rules);
        assert!((p.mass() - 1.0).abs() < 1e-9);
        assert_eq!(p.raw_levels.iter().zip(&p.hull_mask).filter(|(r, h)| (**r == 1) != **h).count(), 0);

        let bare = ForestRaster::uniform(&g, 0.1).unwrap();
        let p = build_expert_prior(&g, &bare, &[], &recent, &[], 50, &t()).unwrap();
        assert_eq!(p.support, PriorSupport::HullFallback);
        assert!((p.mass() - 1.0).abs() < 1e-9);

        let outside = vec![g.scale.offset(g.origin, 500.0, 500.0); 3];
        let p = build_expert_prior(&g, &bare, &[], &outside, &[], 50, &t()).unwrap();
        assert_eq!(p.support, PriorSupport::GridFallback);
        assert!((p.mass() - 1.0).abs() < 1e-9);

        assert!(matches!(
            build_expert_prior(&g, &forest, &[], &recent[..2], &[], 50, &t()),
            Err(Error::InsufficientHistory { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn only_two_most_recent_reports_count() {
        let g = grid();
        let recent: Vec<GeoPoint> = vec![g.scale.offset(g.origin, 25.0, 25.0); 3];
        let forest = ForestRaster::uniform(&g, 0.8).unwrap();
        let spot = g.scale.offset(g.origin, 25.0, 28.0);
        let reports: Vec<IntelInput> = [41, 45, 48].iter().map(|&d| IntelInput::new(spot, d)).collect();
        let p = build_expert_prior(&g, &forest, &[], &recent, &reports, 50, &t()).unwrap();
        assert_eq!(p.fresh_intel, 2);
        assert_eq!(*p.raw_levels.iter().max().unwrap(), 3);
        let stale = [IntelInput::new(spot, 30)];
        let p = build_expert_prior(&g, &forest, &[], &recent, &stale, 50, &t()).unwrap();
        assert!(!p.used_fresh_intel());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn fresh_report_never_lowers_a_level(
            rx in 0.0f64..50.0, ry in 0.0f64..50.0,
            cx in 0.0f64..50.0, cy in 0.0f64..50.0,
            forest_seed in 0u64..1000,
        ) {
            let g = grid();
            let recent = vec![g.scale.offset(g.origin, 20.0, 20.0), g.scale.offset(g.origin, 30.0, 24.0), g.scale.offset(g.origin, 26.0, 31.0)];
            let values: Vec<f64> = (0..g.len()).map(|i| ((i as u64 * 2654435761 + forest_seed) % 100) as f64 / 100.0).collect();
            let forest = ForestRaster::new(&g, values).unwrap();
            let camps = [g.scale.offset(g.origin, cx, cy)];
            let base = build_expert_prior(&g, &forest, &camps, &recent, &[], 40, &t()).unwrap();
            let report = [IntelInput::new(g.scale.offset(g.origin, rx, ry), 35)];
            let more = build_expert_prior(&g, &forest, &camps, &recent, &report, 40, &t()).unwrap();
            prop_assert!(base.raw_levels.iter().zip(&more.raw_levels).all(|(a, b)| a <= b));
            prop_assert!(more.raw_levels.iter().all(|&r| r <= 3));
            prop_assert!((more.mass() - 1.0).abs() < 1e-9);
        }
    }
}
