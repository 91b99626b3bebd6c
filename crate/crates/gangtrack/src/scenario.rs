//! Synthetic multi-gang scenarios: tracks drawn from the weighted kernel
//! density model, thinned to irregular sightings, plus forest, camps and
//! informant reports for the expert map.

use std::fs;
use std::path::Path;

use gangtrack_core::sim::draw_next;
use gangtrack_core::{BoundingBox, ForestRaster, GeoPoint, Grid, IntelInput, KmScale, ModelParams, Track};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{GridSettings, RunConfig, ScenarioConfig};
use crate::error::CliError;
use crate::io;

/// Margin around the true tracks, km.
const MARGIN_KM: f64 = 20.0;
const FOREST_PATCH_KM: f64 = 8.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Every day of every gang.
    pub truth: Vec<Track>,
    pub observed: Vec<Track>,
    pub grid: Grid,
    pub forest: ForestRaster,
    pub camps: Vec<GeoPoint>,
    pub intel: Vec<IntelInput>,
}

fn normal_km<R: Rng>(rng: &mut R, sd: f64) -> (f64, f64) {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    (sd * x, sd * y)
}

fn gang_name(i: usize) -> String {
    if i < 26 {
        char::from(b'A' + i as u8).to_string()
    } else {
        format!("G{i}")
    }
}

/// Builds a scenario; the same config always gives the same scenario.
pub fn generate(cfg: &ScenarioConfig) -> Result<Scenario, CliError> {
    cfg.validate()?;
    let center = GeoPoint::new(cfg.center_lon, cfg.center_lat);
    let scale = KmScale::at_latitude(center.lat)?;
    let params = ModelParams::new(cfg.theta, cfg.h)?;

    let mut truth = Vec::with_capacity(cfg.gangs);
    let mut observed = Vec::with_capacity(cfg.gangs);
    for g in 0..cfg.gangs {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(g as u64 + 1);
        let (dx, dy) = normal_km(&mut rng, cfg.spread_km);
        let mut points = vec![scale.offset(center, dx, dy)];
        while points.len() < cfg.days {
            let next = draw_next(&points, params, &scale, &mut rng)?;
            points.push(next);
        }
        let name = gang_name(g);
        let mut full = Track::new(name.as_str());
        let mut seen = Track::new(name.as_str());
        for (d, p) in points.iter().enumerate() {
            let day = d as u32 + 1;
            full.insert(day, *p)?;
            if day == 1 || rng.random::<f64>() < cfg.sighting_prob {
                seen.insert(day, *p)?;
            }
        }
        truth.push(full);
        observed.push(seen);
    }

    let all: Vec<GeoPoint> = truth.iter().flat_map(|t| t.observations().values().copied()).collect();
    let lo = all.iter().fold(GeoPoint::new(f64::INFINITY, f64::INFINITY), |a, p| GeoPoint::new(a.lon.min(p.lon), a.lat.min(p.lat)));
    let hi = all.iter().fold(GeoPoint::new(f64::NEG_INFINITY, f64::NEG_INFINITY), |a, p| GeoPoint::new(a.lon.max(p.lon), a.lat.max(p.lat)));
    let sw = scale.offset(lo, -MARGIN_KM, -MARGIN_KM);
    let ne = scale.offset(hi, MARGIN_KM, MARGIN_KM);
    let bbox = BoundingBox::new(sw.lon, sw.lat, ne.lon, ne.lat)?;
    let grid = Grid::covering(&bbox, cfg.cell_km, scale)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(0);
    let (w_km, h_km) = (grid.cols as f64 * grid.cell_km, grid.rows as f64 * grid.cell_km);
    let anywhere = |rng: &mut ChaCha8Rng| scale.offset(grid.origin, rng.random::<f64>() * w_km, rng.random::<f64>() * h_km);

    // Forest patches around a sample of true locations, plus a few elsewhere.
    let mut patches: Vec<GeoPoint> = truth.iter().flat_map(|t| t.observations().values().step_by(5).copied()).collect();
    for _ in 0..cfg.gangs * 3 {
        patches.push(anywhere(&mut rng));
    }
    let forest_values: Vec<f64> = grid
        .centers()
        .map(|c| {
            let cover: f64 = patches
                .iter()
                .map(|p| {
                    let d = gangtrack_core::dist_km(c, *p, &scale) / FOREST_PATCH_KM;
                    (-0.5 * d * d).exp()
                })
                .sum();
            (cover.min(1.0) * 100.0).round() / 100.0
        })
        .collect();
    let forest = ForestRaster::new(&grid, forest_values)?;

    let camps: Vec<GeoPoint> = (0..cfg.camps).map(|_| anywhere(&mut rng)).collect();

    let mut intel = Vec::with_capacity(cfg.intel_reports);
    for _ in 0..cfg.intel_reports {
        let g = rng.random_range(0..cfg.gangs);
        let day = rng.random_range(2..=cfg.days as u32);
        let at = truth[g].get(day).expect("truth covers every day");
        let (dx, dy) = normal_km(&mut rng, 2.0);
        intel.push(IntelInput { location: scale.offset(at, dx, dy), received_day: day - 1, gang: Some(truth[g].gang_id.clone()) });
    }
    intel.sort_by_key(|a| a.received_day);

    Ok(Scenario { truth, observed, grid, forest, camps, intel })
}

/// Writes the scenario's input files and a run config pointing at them;
/// returns the config's path.
pub fn write(cfg: &ScenarioConfig, scenario: &Scenario) -> Result<std::path::PathBuf, CliError> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    io::write_tracks(&dir.join("observations.csv"), &scenario.observed)?;
    io::write_tracks(&dir.join("truth.csv"), &scenario.truth)?;
    io::write_points(&dir.join("camps.csv"), &scenario.camps)?;
    io::write_forest(&dir.join("forest.csv"), &scenario.grid, &scenario.forest)?;
    io::write_intel(&dir.join("intel.csv"), &scenario.intel)?;

    let b = scenario.grid.bounds();
    let run = RunConfig {
        observations: "observations.csv".into(),
        camps: Some("camps.csv".into()),
        forest: Some("forest.csv".into()),
        intel: Some("intel.csv".into()),
        grid: GridSettings {
            bbox: Some([b.min_lon, b.min_lat, b.max_lon, b.max_lat]),
            cell_km: scenario.grid.cell_km,
            ref_lat: Some(scenario.grid.scale.ref_lat),
            ..GridSettings::default()
        },
        filter: Default::default(),
        thresholds: Default::default(),
        credibility: Default::default(),
        expert_prior: true,
        seed: cfg.seed,
        output_dir: "run".into(),
    };
    let path = dir.join("run.json");
    fs::write(&path, serde_json::to_string_pretty(&run).map_err(CliError::runtime)? + "\n")?;
    Ok(path)
}

pub fn write_to(dir: &Path, cfg: &ScenarioConfig) -> Result<std::path::PathBuf, CliError> {
    let cfg = ScenarioConfig { output_dir: dir.to_path_buf(), ..cfg.clone() };
    let scenario = generate(&cfg)?;
    write(&cfg, &scenario)
}
