//! Grid forecasts and how close they came.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geo::{GeoPoint, KmScale};
use crate::grid::Grid;
use crate::likelihood::{coefficients, KernelTable, LikelihoodCoefficients, LikelihoodModel, PointEvaluator};
use crate::math;
use crate::particles::ParticleSet;
use crate::prior::ExpertPrior;
use crate::track::History;

/// Monitoring bands of the forecast maps, km^2.
pub const MONITORING_BANDS_KM2: [f64; 2] = [500.0, 1000.0];

/// Per-km^2 forecast on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveDensity {
    pub grid: Grid,
    /// `blended` rescaled to integrate to one over the grid.
    pub values: Vec<f64>,
    /// `(1 - p_n) * data_part + p_n * expert_part` before rescaling.
    pub blended: Vec<f64>,
    /// Particle average of the model's conditional density.
    pub data_part: Vec<f64>,
    pub expert_part: Option<Vec<f64>>,
    pub p_n: f64,
}

impl PredictiveDensity {
    /// A forecast made directly from cell values.
    pub fn from_values(grid: Grid, blended: Vec<f64>) -> Result<Self> {
        if blended.len() != grid.len() || blended.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("one finite non-negative value per cell"));
        }
        let mass = grid.integrate(&blended);
        if !(mass > 0.0) {
            return Err(Error::DegeneratePosterior);
        }
        let values = blended.iter().map(|v| v / mass).collect();
        Ok(Self { grid, values, data_part: blended.clone(), blended, expert_part: None, p_n: 0.0 })
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }
}

/// Particle-averaged conditional density of the next location at every cell
/// centre, per km^2.
pub fn particle_average(set: &ParticleSet, history: &History, grid: &Grid, model: LikelihoodModel, scale: &KmScale) -> Result<Vec<f64>> {
    let total: f64 = set.weights().iter().sum();
    if !(total > 0.0) {
        return Err(Error::DegeneratePosterior);
    }
    let distinct: Vec<_> = set.distinct().into_iter().filter(|(_, w)| *w > 0.0).collect();
    let mut by_theta: BTreeMap<u64, LikelihoodCoefficients> = BTreeMap::new();
    let mut hs: Vec<u64> = Vec::new();
    for (p, _) in &distinct {
        if let alloc::collections::btree_map::Entry::Vacant(e) = by_theta.entry(p.theta.to_bits()) {
            e.insert(coefficients(history, p.theta, model)?);
        }
        hs.push(p.h.to_bits());
    }
    hs.sort_unstable();
    hs.dedup();
    let levels = by_theta.values().map(|c| c.levels().len()).max().unwrap_or(1);

    let mut out = Vec::with_capacity(grid.len());
    for cell in 0..grid.len() {
        let point = PointEvaluator::new(history.observed(), grid.center(cell), scale);
        let tables: Vec<KernelTable> = hs.iter().map(|h| KernelTable::new(&point, f64::from_bits(*h), levels)).collect();
        let mut value = 0.0;
        for (p, w) in &distinct {
            let table = &tables[hs.binary_search(&p.h.to_bits()).expect("collected above")];
            value += w / total * math::exp(table.log_density(&by_theta[&p.theta.to_bits()]));
        }
        out.push(value);
    }
    Ok(out)
}

/// Forecast for the day after `history` from the particles in force before
/// that day's update, blended with the expert map at weight `p_n`.
pub fn predictive_density(
    set: &ParticleSet,
    history: &History,
    expert: Option<&ExpertPrior>,
    p_n: f64,
    grid: &Grid,
    model: LikelihoodModel,
    scale: &KmScale,
) -> Result<PredictiveDensity> {
    if !(0.0..=1.0).contains(&p_n) {
        return Err(Error::InvalidParameter("credibility must lie in [0, 1]"));
    }
    let expert_part = match expert {
        Some(e) if e.grid != *grid => return Err(Error::InvalidParameter("expert map is on a different grid")),
        Some(e) => Some(e.density.clone()),
        None if p_n > 0.0 => return Err(Error::InvalidParameter("positive credibility needs an expert map")),
        None => None,
    };
    let data_part = if p_n < 1.0 { particle_average(set, history, grid, model, scale)? } else { grid.zeros() };
    let blended: Vec<f64> = match &expert_part {
        Some(e) => data_part.iter().zip(e).map(|(d, e)| (1.0 - p_n) * d + p_n * e).collect(),
        None => data_part.clone(),
    };
    let mut pd = PredictiveDensity::from_values(*grid, blended)?;
    pd.data_part = data_part;
    pd.expert_part = expert_part;
    pd.p_n = p_n;
    Ok(pd)
}

/// Cells by decreasing density; ties in row-major order.
pub fn ranked_cells(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order
}

/// Required area to monitor: total area of cells at least as dense as the
/// cell holding `actual`.
pub fn ram(pd: &PredictiveDensity, actual: GeoPoint) -> Result<f64> {
    let at = pd.values[pd.grid.cell_of(actual)?];
    let count = pd.values.iter().filter(|v| **v >= at).count();
    Ok(count as f64 * pd.grid.cell_area())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProximityCurve {
    /// `(p, m(p))`: the fraction of area monitored and the distance, km, from
    /// the actual location to the nearest monitored cell.
    pub samples: Vec<(f64, f64)>,
}

pub fn default_p_grid() -> Vec<f64> {
    (1..=100).map(|k| k as f64 / 100.0).collect()
}

/// Distance from `actual` to the top `ceil(p * cells)` cells for each `p`.
/// A cell's distance is measured to its nearest point, so it is zero for the
/// cell containing `actual`.
pub fn proximity_curve(pd: &PredictiveDensity, actual: GeoPoint, p_grid: &[f64]) -> Result<ProximityCurve> {
    pd.grid.cell_of(actual)?;
    if p_grid.iter().any(|p| !(*p > 0.0 && *p <= 1.0)) || p_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter("area fractions must be ascending within (0, 1]"));
    }
    let order = ranked_cells(&pd.values);
    let cells = order.len();
    let mut best = Vec::with_capacity(cells);
    let mut running = f64::INFINITY;
    for &c in &order {
        running = running.min(pd.grid.distance_to_cell_km(c, actual));
        best.push(running);
    }
    let samples = p_grid
        .iter()
        .map(|&p| {
            let top = (math::ceil(p * cells as f64 - 1e-9) as usize).clamp(1, cells);
            (p, best[top - 1])
        })
        .collect();
    Ok(ProximityCurve { samples })
}

/// Trapezoid area under the proximity curve divided by the span of `p`, so
/// a constant curve scores its constant.
pub fn aupc(curve: &ProximityCurve) -> Result<f64> {
    let s = &curve.samples;
    if s.len() < 2 {
        return Err(Error::InvalidParameter("need at least two curve samples"));
    }
    let span = s[s.len() - 1].0 - s[0].0;
    if !(span > 0.0) {
        return Err(Error::InvalidParameter("curve samples must span a positive range"));
    }
    let area: f64 = s.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    Ok(area / span)
}

/// Band of each cell: 1 for the top cells whose area adds up to at most
/// `limits[0]`, 2 for the next ones up to `limits[1]`, and so on; 0 outside.
pub fn monitoring_bands(pd: &PredictiveDensity, limits: &[f64]) -> Vec<u8> {
    let mut bands = alloc::vec![0u8; pd.grid.len()];
    let area = pd.grid.cell_area();
    let mut band = 0;
    for (rank, &c) in ranked_cells(&pd.values).iter().enumerate() {
        let covered = (rank + 1) as f64 * area;
        while band < limits.len() && covered > limits[band] + 1e-9 {
            band += 1;
        }
        if band == limits.len() {
            break;
        }
        bands[c] = band as u8 + 1;
    }
    bands
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Variant {
    WithPrior,
    WithoutPrior,
    Partial,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::WithPrior => "with-prior",
            Variant::WithoutPrior => "without-prior",
            Variant::Partial => "partial-model",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "with-prior" => Some(Variant::WithPrior),
            "without-prior" => Some(Variant::WithoutPrior),
            "partial-model" => Some(Variant::Partial),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssessmentRecord {
    pub gang_id: String,
    /// Position among this gang's assessed sightings.
    pub instance: usize,
    pub day: u32,
    pub ram: f64,
    pub aupc: f64,
    pub variant: Variant,
}

/// How often one variant beat another, in percent of matched instances.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// `None` for the pooled row.
    pub gang_id: Option<String>,
    pub instances: usize,
    pub ram_better: f64,
    pub ram_at_least: f64,
    pub aupc_better: f64,
    pub aupc_at_least: f64,
}

fn aligned<'a>(a: &'a [AssessmentRecord], b: &'a [AssessmentRecord]) -> Result<Vec<(&'a AssessmentRecord, &'a AssessmentRecord)>> {
    if a.len() != b.len() {
        return Err(Error::Misaligned);
    }
    let key = |r: &AssessmentRecord| (r.day, r.gang_id.clone(), r.instance);
    let mut a: Vec<&AssessmentRecord> = a.iter().collect();
    let mut b: Vec<&AssessmentRecord> = b.iter().collect();
    a.sort_by_key(|r| key(r));
    b.sort_by_key(|r| key(r));
    if a.iter().zip(&b).any(|(x, y)| key(x) != key(y)) {
        return Err(Error::Misaligned);
    }
    Ok(a.into_iter().zip(b).collect())
}

fn percent(hits: usize, of: usize) -> f64 {
    100.0 * hits as f64 / of as f64
}

fn tally(gang_id: Option<String>, pairs: &[(&AssessmentRecord, &AssessmentRecord)]) -> Comparison {
    let n = pairs.len();
    let count = |f: &dyn Fn(&AssessmentRecord, &AssessmentRecord) -> bool| pairs.iter().filter(|(a, b)| f(a, b)).count();
    Comparison {
        gang_id,
        instances: n,
        ram_better: percent(count(&|a, b| a.ram < b.ram), n),
        ram_at_least: percent(count(&|a, b| a.ram <= b.ram), n),
        aupc_better: percent(count(&|a, b| a.aupc < b.aupc), n),
        aupc_at_least: percent(count(&|a, b| a.aupc <= b.aupc), n),
    }
}

/// Per-gang win rates of `a` over `b` (smaller metrics win), followed by a
/// pooled row when more than one gang is present.
pub fn compare_variants(a: &[AssessmentRecord], b: &[AssessmentRecord]) -> Result<Vec<Comparison>> {
    let pairs = aligned(a, b)?;
    let mut gangs: Vec<&str> = pairs.iter().map(|(x, _)| x.gang_id.as_str()).collect();
    gangs.sort_unstable();
    gangs.dedup();
    let mut rows: Vec<Comparison> = gangs
        .iter()
        .map(|g| {
            let mine: Vec<_> = pairs.iter().filter(|(x, _)| x.gang_id == *g).copied().collect();
            tally(Some(String::from(*g)), &mine)
        })
        .collect();
    if gangs.len() > 1 {
        rows.push(tally(None, &pairs));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrailingWindow {
    /// Index, in time order, of the first instance in the window.
    pub start: usize,
    pub instances: usize,
    pub ram_better: f64,
    pub aupc_better: f64,
}

/// Strict win rates of `a` over `b` among instances `k..` in time order, for
/// every `k`.
pub fn trailing_windows(a: &[AssessmentRecord], b: &[AssessmentRecord]) -> Result<Vec<TrailingWindow>> {
    let pairs = aligned(a, b)?;
    let n = pairs.len();
    let mut out = Vec::with_capacity(n);
    let (mut ram_wins, mut aupc_wins) = (0, 0);
    for k in (0..n).rev() {
        let (x, y) = pairs[k];
        ram_wins += usize::from(x.ram < y.ram);
        aupc_wins += usize::from(x.aupc < y.aupc);
        let len = n - k;
        out.push(TrailingWindow { start: k, instances: len, ram_better: percent(ram_wins, len), aupc_better: percent(aupc_wins, len) });
    }
    out.reverse();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::likelihood_prop2;
    use crate::params::{ModelParams, ParamBox};
    use crate::prior::{build_expert_prior, ForestRaster, PriorThresholds};
    use alloc::vec;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn scale() -> KmScale {
        KmScale::at_latitude(23.5).unwrap()
    }

    fn grid(rows: usize, cols: usize) -> Grid {
        Grid::new(GeoPoint::new(85.0, 23.4), 2.5, rows, cols, scale()).unwrap()
    }

    fn fixture() -> (Grid, History, ExpertPrior, ParticleSet) {
        let g = grid(24, 24);
        let s = scale();
        let o = g.center(g.index(12, 12));
        let h = History::new(6, vec![(1, o), (2, s.offset(o, 3.0, 1.0)), (3, s.offset(o, 4.0, -2.0)), (5, s.offset(o, 6.0, 0.0))]).unwrap();
        let recent: Vec<GeoPoint> = h.points().collect();
        let prior = build_expert_prior(&g, &ForestRaster::uniform(&g, 0.8).unwrap(), &[], &recent, &[], 7, &PriorThresholds::default()).unwrap();
        let set = ParticleSet::init(150, &ParamBox::new(1.0, 30.0, 0.5, 8.0).unwrap(), 6, &mut ChaCha8Rng::seed_from_u64(3)).unwrap().decile_compress();
        (g, h, prior, set)
    }

    fn record(instance: usize, ram: f64, aupc: f64, variant: Variant) -> AssessmentRecord {
        AssessmentRecord { gang_id: "A".into(), instance, day: instance as u32 + 10, ram, aupc, variant }
    }

    #[test]
    fn blend_limits_and_identity() {
        let (g, h, prior, set) = fixture();
        let s = scale();
        let m = LikelihoodModel::Full;
        let expert_only = predictive_density(&set, &h, Some(&prior), 1.0, &g, m, &s).unwrap();
        for (a, b) in expert_only.blended.iter().zip(&prior.density) {
            assert!((a - b).abs() <= 1e-12 * b.max(1.0));
        }
        let data_only = predictive_density(&set, &h, Some(&prior), 0.0, &g, m, &s).unwrap();
        let mixed = predictive_density(&set, &h, Some(&prior), 0.3, &g, m, &s).unwrap();
        for i in 0..g.len() {
            let want = 0.7 * data_only.blended[i] + 0.3 * expert_only.blended[i];
            assert!((mixed.blended[i] - want).abs() < 1e-12);
        }
        assert!((mixed.mass() - 1.0).abs() < 1e-6);
        assert!(predictive_density(&set, &h, None, 0.5, &g, m, &s).is_err());
    }

    #[test]
    fn single_particle_matches_the_mixture() {
        let (g, h, _, _) = fixture();
        let s = scale();
        let p = ModelParams { theta: 6.0, h: 2.0 };
        let set = ParticleSet::from_parts(vec![p], vec![1.0], 0.0, 6).unwrap();
        let pd = predictive_density(&set, &h, None, 0.0, &g, LikelihoodModel::Full, &s).unwrap();
        let mix = likelihood_prop2(&h, p, &s).unwrap();
        for (i, c) in g.centers().enumerate() {
            let want = mix.eval_km2(c);
            assert!((pd.blended[i] - want).abs() <= 1e-12 * want.max(1e-3), "{i}");
        }
        // Riemann mass of a forecast well inside a 60 km square.
        assert!((g.integrate(&pd.blended) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn ram_examples() {
        let g = grid(10, 10);
        let mut v = vec![1.0; 100];
        let uniform = PredictiveDensity::from_values(g, v.clone()).unwrap();
        assert_eq!(ram(&uniform, g.center(17)).unwrap(), g.total_area());
        v[42] = 5.0;
        let peaked = PredictiveDensity::from_values(g, v).unwrap();
        assert_eq!(ram(&peaked, g.center(42)).unwrap(), 6.25);
        assert!(ram(&peaked, GeoPoint::new(80.0, 20.0)).is_err());
        let curve = proximity_curve(&peaked, g.center(42), &default_p_grid()).unwrap();
        assert!(curve.samples.iter().all(|(_, m)| *m == 0.0));
        assert_eq!(aupc(&curve).unwrap(), 0.0);
    }

    #[test]
    fn ram_matches_rank_after_sorting() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let g = grid(12, 15);
        for _ in 0..100 {
            // Coarse values so ties occur.
            let values: Vec<f64> = (0..g.len()).map(|_| (rng.random::<f64>() * 20.0).floor() + 1.0).collect();
            let pd = PredictiveDensity::from_values(g, values).unwrap();
            let actual = g.center(rng.random_range(0..g.len()));
            let at = pd.values[g.cell_of(actual).unwrap()];
            let mut sorted = pd.values.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let rank = sorted.iter().rposition(|v| *v == at).unwrap() + 1;
            assert_eq!(ram(&pd, actual).unwrap(), rank as f64 * g.cell_area());
        }
    }

    #[test]
    fn aupc_examples() {
        let zero = ProximityCurve { samples: vec![(0.1, 0.0), (1.0, 0.0)] };
        assert_eq!(aupc(&zero).unwrap(), 0.0);
        let flat = ProximityCurve { samples: default_p_grid().into_iter().map(|p| (p, 3.5)).collect() };
        assert!((aupc(&flat).unwrap() - 3.5).abs() < 1e-12);
        let linear = ProximityCurve { samples: (0..=100).map(|k| (k as f64 / 100.0, 1.0 - k as f64 / 100.0)).collect() };
        assert!((aupc(&linear).unwrap() - 0.5).abs() < 1e-12);
        assert!(aupc(&ProximityCurve { samples: vec![(1.0, 0.0)] }).is_err());
    }

    #[test]
    fn full_coverage_reaches_the_actual_cell() {
        let g = grid(8, 8);
        let pd = PredictiveDensity::from_values(g, (0..64).map(|i| i as f64 + 1.0).collect()).unwrap();
        let actual = scale().offset(g.origin, 3.3, 7.1);
        let curve = proximity_curve(&pd, actual, &[0.01, 0.5, 1.0]).unwrap();
        assert_eq!(curve.samples[2].1, 0.0);
        assert!(curve.samples[0].1 > 0.0);
    }

    #[test]
    fn bands_hold_the_top_cells() {
        let g = grid(30, 30);
        let values: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 900) as f64 + 1.0).collect();
        let pd = PredictiveDensity::from_values(g, values).unwrap();
        let bands = monitoring_bands(&pd, &MONITORING_BANDS_KM2);
        let order = ranked_cells(&pd.values);
        // 80 cells of 6.25 km^2 make 500 km^2 exactly.
        assert!(order[..80].iter().all(|&c| bands[c] == 1));
        assert!(order[80..160].iter().all(|&c| bands[c] == 2));
        assert!(order[160..].iter().all(|&c| bands[c] == 0));
    }

    #[test]
    fn variant_comparisons() {
        let a: Vec<_> = (0..10).map(|i| record(i, 10.0, 1.0, Variant::WithPrior)).collect();
        let same = compare_variants(&a, &a).unwrap();
        assert_eq!(same.len(), 1);
        assert_eq!((same[0].ram_better, same[0].ram_at_least), (0.0, 100.0));

        let worse: Vec<_> = (0..10).map(|i| record(i, 20.0, 2.0, Variant::WithoutPrior)).collect();
        let dom = &compare_variants(&a, &worse).unwrap()[0];
        assert_eq!((dom.ram_better, dom.ram_at_least, dom.aupc_better), (100.0, 100.0, 100.0));

        // Seven wins and three losses.
        let mixed: Vec<_> = (0..10).map(|i| record(i, if i < 7 { 20.0 } else { 5.0 }, if i < 7 { 2.0 } else { 0.5 }, Variant::WithoutPrior)).collect();
        let c = &compare_variants(&a, &mixed).unwrap()[0];
        assert_eq!((c.ram_better, c.ram_at_least, c.aupc_better, c.aupc_at_least), (70.0, 70.0, 70.0, 70.0));
        let windows = trailing_windows(&a, &mixed).unwrap();
        assert_eq!(windows[0].ram_better, 70.0);
        assert_eq!(windows[7].ram_better, 0.0);
        assert_eq!(windows[6].instances, 4);
        assert_eq!(windows[6].ram_better, 25.0);

        assert_eq!(compare_variants(&a, &a[..9]), Err(Error::Misaligned));
        let mut shifted = worse.clone();
        shifted[3].instance = 30;
        assert_eq!(compare_variants(&a, &shifted), Err(Error::Misaligned));

        let mut two = a.clone();
        two[0].gang_id = "B".into();
        let rows = compare_variants(&two, &two).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].gang_id, None);
        assert_eq!(rows[2].instances, 10);
    }

    #[test]
    fn variant_names_round_trip() {
        for v in [Variant::WithPrior, Variant::WithoutPrior, Variant::Partial] {
            assert_eq!(Variant::parse(v.as_str()), Some(v));
        }
    }

    proptest! {
        #[test]
        fn curves_never_increase(seed in any::<u64>(), row in 0usize..10, col in 0usize..10) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = grid(10, 10);
            let pd = PredictiveDensity::from_values(g, (0..100).map(|_| rng.random::<f64>() + 1e-3).collect()).unwrap();
            let actual = g.center(g.index(row, col));
            let curve = proximity_curve(&pd, actual, &default_p_grid()).unwrap();
            prop_assert!(curve.samples.windows(2).all(|w| w[1].1 <= w[0].1));
            prop_assert!(aupc(&curve).unwrap() >= 0.0);
        }

        #[test]
        fn raising_the_actual_cell_never_grows_ram(seed in any::<u64>(), cell in 0usize..100, bump in 0.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let g = grid(10, 10);
            let mut values: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
            let actual = g.center(cell);
            let before = ram(&PredictiveDensity::from_values(g, values.clone()).unwrap(), actual).unwrap();
            values[cell] += bump;
            let after = ram(&PredictiveDensity::from_values(g, values).unwrap(), actual).unwrap();
            prop_assert!(after <= before);
        }
    }
}
