//! The command implementations behind the `gangtrack` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use gangtrack_core::predict::{
    aupc, compare_variants, default_p_grid, monitoring_bands, predictive_density, proximity_curve, ram, trailing_windows,
    AssessmentRecord, Comparison, PredictiveDensity, TrailingWindow, Variant, MONITORING_BANDS_KM2,
};
use gangtrack_core::sequential::{run_sequential, update_schedule, FilterConfig, PriorContext, UpdateEvent, UpdateObserver};
use gangtrack_core::sim::{mask_track, run_study, simulate_track};
use gangtrack_core::{
    BoundingBox, EvaluationPoints, ExpertPrior, ForestRaster, GeoPoint, Grid, KmScale, LikelihoodModel, ParticleSet, PosteriorSummary,
    Track,
};
use serde::Serialize;

use crate::config::{ModelChoice, RunConfig, ScenarioConfig, SimulateConfig, StudyConfig};
use crate::error::CliError;
use crate::io::{self, StudyRow, SummaryRow};
use crate::{scenario, snapshot, svg};

pub const SUMMARIES_FILE: &str = "summaries.csv";
pub const SNAPSHOT_DIR: &str = "snapshots";

/// Everything a run reads from disk.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub tracks: Vec<Track>,
    pub grid: Grid,
    pub scale: KmScale,
    pub context: PriorContext,
}

fn observation_bounds(tracks: &[Track]) -> Option<BoundingBox> {
    let mut points = tracks.iter().flat_map(|t| t.observations().values());
    let first = points.next()?;
    let mut b = BoundingBox { min_lon: first.lon, min_lat: first.lat, max_lon: first.lon, max_lat: first.lat };
    for p in points {
        b.min_lon = b.min_lon.min(p.lon);
        b.min_lat = b.min_lat.min(p.lat);
        b.max_lon = b.max_lon.max(p.lon);
        b.max_lat = b.max_lat.max(p.lat);
    }
    Some(b)
}

pub fn load_inputs(cfg: &RunConfig) -> Result<Inputs, CliError> {
    let tracks = io::read_tracks(&cfg.observations)?;
    let g = &cfg.grid;
    let (bbox, scale) = match g.bbox {
        Some([a, b, c, d]) => {
            let bbox = BoundingBox::new(a, b, c, d).map_err(CliError::config)?;
            let scale = KmScale::at_latitude(g.ref_lat.unwrap_or(bbox.center().lat)).map_err(CliError::config)?;
            (bbox, scale)
        }
        None => {
            let obs = observation_bounds(&tracks).ok_or_else(|| CliError::InsufficientData("the observation file is empty".into()))?;
            let scale = KmScale::at_latitude(g.ref_lat.unwrap_or(obs.center().lat)).map_err(CliError::config)?;
            let sw = scale.offset(GeoPoint::new(obs.min_lon, obs.min_lat), -g.margin_km, -g.margin_km);
            let ne = scale.offset(GeoPoint::new(obs.max_lon, obs.max_lat), g.margin_km, g.margin_km);
            let bbox = BoundingBox::new(sw.lon, sw.lat, ne.lon, ne.lat).map_err(CliError::config)?;
            (bbox, scale)
        }
    };
    let grid = Grid::covering(&bbox, g.cell_km, scale).map_err(CliError::config)?;
    for t in &tracks {
        for (day, p) in t.observations() {
            if grid.cell_of(*p).is_err() {
                return Err(CliError::Config(format!("gang {} day {day} at ({}, {}) lies outside the grid", t.gang_id, p.lon, p.lat)));
            }
        }
    }
    let forest = match &cfg.forest {
        Some(path) => io::read_forest(path, &grid)?,
        None => ForestRaster::uniform(&grid, 1.0).map_err(CliError::config)?,
    };
    let camps = match &cfg.camps {
        Some(path) => io::read_points(path)?,
        None => Vec::new(),
    };
    let intel = match &cfg.intel {
        Some(path) => io::read_intel(path)?,
        None => Vec::new(),
    };
    let context = PriorContext {
        grid,
        forest,
        camps,
        intel,
        thresholds: (&cfg.thresholds).into(),
        credibility: (&cfg.credibility).into(),
    };
    Ok(Inputs { tracks, grid, scale, context })
}

fn effective_model(cfg: &RunConfig, choice: Option<ModelChoice>) -> ModelChoice {
    choice.unwrap_or(cfg.filter.likelihood)
}

fn filter_config(cfg: &RunConfig, model: ModelChoice) -> Result<FilterConfig, CliError> {
    Ok(FilterConfig { model: model.into(), ..cfg.filter.to_config()? })
}

/// The particles whose likelihoods stand in for `set` under `points`.
fn evaluation_set(set: &ParticleSet, points: EvaluationPoints) -> ParticleSet {
    match points {
        EvaluationPoints::DecileProxies => set.decile_compress(),
        EvaluationPoints::Exact => set.clone(),
    }
}

#[derive(Debug, Clone, Default)]
pub struct FitOptions {
    pub model: Option<ModelChoice>,
    /// Snapshot JSON to continue from.
    pub resume: Option<PathBuf>,
    /// Ignore sightings after this day.
    pub until_day: Option<u32>,
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub updates: usize,
    pub summaries: PathBuf,
    pub last_snapshot: Option<PathBuf>,
    pub max_mass_error: f64,
}

struct SnapshotWriter {
    dir: PathBuf,
    seed: u64,
    model: ModelChoice,
    expert_prior: bool,
    last: Option<PathBuf>,
    failure: Option<CliError>,
}

impl UpdateObserver for SnapshotWriter {
    fn after_update(&mut self, event: &UpdateEvent, set: &ParticleSet, _summary: &PosteriorSummary) -> gangtrack_core::Result<()> {
        let meta = snapshot::SnapshotMeta {
            update: event.index,
            gang_id: event.gang_id.clone(),
            day: event.day,
            seed: self.seed,
            likelihood: self.model,
            expert_prior: self.expert_prior,
            particles: set.len(),
            expert_mass: set.expert_mass(),
            particle_file: format!("{}.csv", snapshot::stem(event.index)),
        };
        match snapshot::write(&self.dir, &meta, set) {
            Ok(path) => {
                self.last = Some(path);
                Ok(())
            }
            Err(e) => {
                self.failure = Some(e);
                Err(gangtrack_core::Error::InvalidParameter("could not write snapshot"))
            }
        }
    }
}

fn truncate_tracks(tracks: &[Track], until: u32) -> Result<Vec<Track>, CliError> {
    tracks
        .iter()
        .map(|t| {
            let mut out = Track::new(t.gang_id.clone());
            for (&d, &p) in t.observations().range(..=until) {
                out.insert(d, p)?;
            }
            Ok(out)
        })
        .collect()
}

/// Runs the filter over every gang and writes summaries and per-update
/// snapshots to the output directory.
pub fn fit(cfg: &RunConfig, opts: &FitOptions) -> Result<FitReport, CliError> {
    let inputs = load_inputs(cfg)?;
    let model = effective_model(cfg, opts.model);
    let filter = filter_config(cfg, model)?;
    let tracks = match opts.until_day {
        Some(d) => truncate_tracks(&inputs.tracks, d)?,
        None => inputs.tracks.clone(),
    };
    if update_schedule(&inputs.tracks, filter.min_sightings).is_empty() {
        return Err(CliError::InsufficientData(format!(
            "no gang has a sighting preceded by {} others; updates start after the third",
            filter.min_sightings
        )));
    }

    let out = &cfg.output_dir;
    fs::create_dir_all(out)?;
    let summaries_path = out.join(SUMMARIES_FILE);
    let mut rows: Vec<SummaryRow> = Vec::new();
    let resume = match &opts.resume {
        Some(path) => {
            let (meta, state) = snapshot::read(path)?;
            if meta.seed != cfg.seed || meta.likelihood != model || meta.expert_prior != cfg.expert_prior || meta.particles != filter.particles {
                return Err(CliError::Config(format!("snapshot {} was written by a different configuration", path.display())));
            }
            if summaries_path.exists() {
                rows = io::read_rows::<SummaryRow>(&summaries_path)?.into_iter().filter(|r| r.update < state.updates_done).collect();
            }
            Some(state)
        }
        None => None,
    };

    let mut writer =
        SnapshotWriter { dir: out.join(SNAPSHOT_DIR), seed: cfg.seed, model, expert_prior: cfg.expert_prior, last: None, failure: None };
    let knowledge = cfg.expert_prior.then_some(&inputs.context);
    let run = run_sequential(&tracks, knowledge, &filter, &inputs.scale, cfg.seed, resume, &mut writer);
    if let Some(e) = writer.failure.take() {
        return Err(e);
    }
    let run = run?;
    rows.extend(run.records.iter().map(|r| SummaryRow::new(r.index, &r.gang_id, &r.summary)));
    io::write_rows(&summaries_path, &rows)?;
    Ok(FitReport { updates: run.records.len(), summaries: summaries_path, last_snapshot: writer.last, max_mass_error: run.max_mass_error })
}

#[derive(Debug, Clone)]
pub struct PredictOptions {
    pub day: u32,
    pub gang: String,
    pub force_pn: Option<f64>,
    pub model: Option<ModelChoice>,
}

#[derive(Debug, Clone)]
pub struct PredictReport {
    pub density: PathBuf,
    pub prior: PathBuf,
    pub svg: PathBuf,
    pub snapshot: PathBuf,
    pub p_n: f64,
    /// Cells in each monitoring band.
    pub band_cells: Vec<usize>,
    pub forecast: PredictiveDensity,
    pub expert: ExpertPrior,
}

/// Forecast for `gang` on `day` from the latest snapshot before that day.
pub fn predict(cfg: &RunConfig, opts: &PredictOptions) -> Result<PredictReport, CliError> {
    if let Some(p) = opts.force_pn {
        if !(0.0..=1.0).contains(&p) {
            return Err(CliError::Config(format!("--force-pn {p} is outside [0, 1]")));
        }
    }
    let inputs = load_inputs(cfg)?;
    let model = effective_model(cfg, opts.model);
    let filter = filter_config(cfg, model)?;
    let track = inputs
        .tracks
        .iter()
        .find(|t| t.gang_id == opts.gang)
        .ok_or_else(|| CliError::NotFound(format!("unknown gang {:?}", opts.gang)))?;
    let (snap_path, _) = snapshot::latest_before(&cfg.output_dir.join(SNAPSHOT_DIR), opts.day)?;
    let (_, state) = snapshot::read(&snap_path)?;

    let history = track.history_before(opts.day)?;
    let (expert, credibility) = inputs.context.prior_for(track, opts.day)?;
    let p_n = opts.force_pn.unwrap_or(if cfg.expert_prior { credibility } else { 0.0 });
    let set = evaluation_set(&state.set, filter.evaluation);
    let forecast = predictive_density(&set, &history, Some(&expert), p_n, &inputs.grid, model.into(), &inputs.scale)?;
    let bands = monitoring_bands(&forecast, &MONITORING_BANDS_KM2);

    let dir = cfg.output_dir.join("predict");
    let stem = format!("{}_day{}", opts.gang, opts.day);
    let density_path = dir.join(format!("density_{stem}.csv"));
    let prior_path = dir.join(format!("prior_{stem}.csv"));
    let svg_path = dir.join(format!("map_{stem}.svg"));
    io::write_map(&density_path, &inputs.grid, &forecast.values)?;
    io::write_map(&prior_path, &inputs.grid, &expert.density)?;
    let title = format!("gang {} day {} (p = {p_n})", opts.gang, opts.day);
    let picture = svg::heatmap(&inputs.grid, &forecast.values, &bands, &track.recent_before(opts.day, 10), track.get(opts.day), &title);
    fs::write(&svg_path, picture)?;

    let band_cells = (1..=MONITORING_BANDS_KM2.len() as u8).map(|b| bands.iter().filter(|x| **x == b).count()).collect();
    Ok(PredictReport { density: density_path, prior: prior_path, svg: svg_path, snapshot: snap_path, p_n, band_cells, forecast, expert })
}

struct Assessor<'a> {
    tracks: &'a [Track],
    grid: &'a Grid,
    scale: &'a KmScale,
    model: LikelihoodModel,
    points: EvaluationPoints,
    variant: Variant,
    p_grid: Vec<f64>,
    records: Vec<AssessmentRecord>,
}

impl UpdateObserver for Assessor<'_> {
    fn before_update(&mut self, event: &UpdateEvent, set: &ParticleSet, prior: Option<&ExpertPrior>, p_n: f64) -> gangtrack_core::Result<()> {
        let history = self.tracks[event.track].history_before(event.day)?;
        let eval = evaluation_set(set, self.points);
        let pd = predictive_density(&eval, &history, prior, p_n, self.grid, self.model, self.scale)?;
        let curve = proximity_curve(&pd, event.point, &self.p_grid)?;
        let instance = self.records.iter().filter(|r| r.gang_id == event.gang_id).count();
        self.records.push(AssessmentRecord {
            gang_id: event.gang_id.clone(),
            instance,
            day: event.day,
            ram: ram(&pd, event.point)?,
            aupc: aupc(&curve)?,
            variant: self.variant,
        });
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    /// Absent on the pooled row.
    pub gang_id: Option<String>,
    pub instances: usize,
    pub ram_better_pct: f64,
    pub ram_at_least_pct: f64,
    pub aupc_better_pct: f64,
    pub aupc_at_least_pct: f64,
}

impl From<&Comparison> for ComparisonRow {
    fn from(c: &Comparison) -> Self {
        Self {
            gang_id: c.gang_id.clone(),
            instances: c.instances,
            ram_better_pct: c.ram_better,
            ram_at_least_pct: c.ram_at_least,
            aupc_better_pct: c.aupc_better,
            aupc_at_least_pct: c.aupc_at_least,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrailingRow {
    pub start: usize,
    pub instances: usize,
    pub ram_better_pct: f64,
    pub aupc_better_pct: f64,
}

impl From<&TrailingWindow> for TrailingRow {
    fn from(t: &TrailingWindow) -> Self {
        Self { start: t.start, instances: t.instances, ram_better_pct: t.ram_better, aupc_better_pct: t.aupc_better }
    }
}

/// How often `better` beat `baseline`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantComparison {
    pub better: String,
    pub baseline: String,
    pub rows: Vec<ComparisonRow>,
    pub trailing: Vec<TrailingRow>,
}

fn comparison(a: &[AssessmentRecord], b: &[AssessmentRecord], va: Variant, vb: Variant) -> Result<VariantComparison, CliError> {
    Ok(VariantComparison {
        better: va.as_str().into(),
        baseline: vb.as_str().into(),
        rows: compare_variants(a, b).map_err(CliError::runtime)?.iter().map(Into::into).collect(),
        trailing: trailing_windows(a, b).map_err(CliError::runtime)?.iter().map(Into::into).collect(),
    })
}

#[derive(Debug, Clone, Default)]
pub struct EvaluateOptions {
    pub include_partial: bool,
}

#[derive(Debug, Clone)]
pub struct EvaluateReport {
    pub records: Vec<AssessmentRecord>,
    pub comparisons: Vec<VariantComparison>,
    pub assessments: PathBuf,
    pub comparison: PathBuf,
}

/// Scores one-step forecasts of every update sighting under each variant.
pub fn evaluate(cfg: &RunConfig, opts: &EvaluateOptions) -> Result<EvaluateReport, CliError> {
    let inputs = load_inputs(cfg)?;
    let full_model = cfg.filter.likelihood;
    let base = filter_config(cfg, full_model)?;
    if update_schedule(&inputs.tracks, base.min_sightings).is_empty() {
        return Err(CliError::NoInstances(format!("no sighting is preceded by {} others of its gang", base.min_sightings)));
    }
    let mut runs = vec![(Variant::WithPrior, full_model, true), (Variant::WithoutPrior, full_model, false)];
    if opts.include_partial {
        runs.push((Variant::Partial, ModelChoice::Partial, false));
    }
    let mut by_variant = Vec::new();
    for (variant, model, with_prior) in runs {
        let filter = FilterConfig { model: model.into(), ..base };
        let mut assessor = Assessor {
            tracks: &inputs.tracks,
            grid: &inputs.grid,
            scale: &inputs.scale,
            model: model.into(),
            points: filter.evaluation,
            variant,
            p_grid: default_p_grid(),
            records: Vec::new(),
        };
        let knowledge = with_prior.then_some(&inputs.context);
        run_sequential(&inputs.tracks, knowledge, &filter, &inputs.scale, cfg.seed, None, &mut assessor)?;
        by_variant.push((variant, assessor.records));
    }

    let mut comparisons = vec![comparison(&by_variant[0].1, &by_variant[1].1, Variant::WithPrior, Variant::WithoutPrior)?];
    if opts.include_partial {
        comparisons.push(comparison(&by_variant[1].1, &by_variant[2].1, Variant::WithoutPrior, Variant::Partial)?);
    }
    let records: Vec<AssessmentRecord> = by_variant.into_iter().flat_map(|(_, r)| r).collect();

    let dir = &cfg.output_dir;
    let assessments = dir.join("assessments.csv");
    io::write_rows(&assessments, records.iter().map(io::AssessmentRow::from))?;
    let comparison_path = dir.join("comparison.json");
    fs::write(&comparison_path, serde_json::to_string_pretty(&comparisons).map_err(CliError::runtime)? + "\n")?;
    Ok(EvaluateReport { records, comparisons, assessments, comparison: comparison_path })
}

#[derive(Debug, Clone, Serialize)]
struct SimulateManifest<'a> {
    config: &'a SimulateConfig,
    full_days: usize,
    observed_days: usize,
    removed_days: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct SimulateReport {
    pub full: PathBuf,
    pub masked: PathBuf,
    pub manifest: PathBuf,
}

fn renamed(track: &Track, gang: &str) -> Result<Track, CliError> {
    let mut out = Track::new(gang);
    for (&d, &p) in track.observations() {
        out.insert(d, p)?;
    }
    Ok(out)
}

/// Draws a track from the full model and a copy with days removed.
pub fn simulate(cfg: &SimulateConfig) -> Result<SimulateReport, CliError> {
    let sim = cfg.sim_config()?;
    let full = renamed(&simulate_track(&sim)?, &cfg.gang_id)?;
    let masked = mask_track(&full, sim.missing_frac, sim.seed)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let report = SimulateReport { full: dir.join("full.csv"), masked: dir.join("masked.csv"), manifest: dir.join("manifest.json") };
    io::write_tracks(&report.full, std::slice::from_ref(&full))?;
    io::write_tracks(&report.masked, std::slice::from_ref(&masked))?;
    let removed_days = full.observations().keys().copied().filter(|d| masked.get(*d).is_none()).collect();
    let manifest = SimulateManifest { config: cfg, full_days: full.len(), observed_days: masked.len(), removed_days };
    fs::write(&report.manifest, serde_json::to_string_pretty(&manifest).map_err(CliError::runtime)? + "\n")?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyOutcome {
    pub seed: u64,
    pub likelihood: ModelChoice,
    pub updates: usize,
    pub final_summary: Option<FinalInterval>,
    pub theta_covered: bool,
    pub h_covered: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FinalInterval {
    pub day: u32,
    pub theta_mean: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub h_mean: f64,
    pub h_lo: f64,
    pub h_hi: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StudyManifest {
    pub config: StudyConfig,
    pub wall_time_s: f64,
    pub outcomes: Vec<StudyOutcome>,
    /// Seeds whose full-likelihood final interval covers both true values.
    pub full_covers_both: usize,
    /// Seeds whose partial-likelihood final interval misses at least one.
    pub partial_misses_any: usize,
}

#[derive(Debug, Clone)]
pub struct StudyReport {
    pub manifest: StudyManifest,
    pub manifest_path: PathBuf,
}

/// Full vs. partial likelihood on simulated tracks with days removed, one
/// run per seed.
pub fn study(cfg: &StudyConfig) -> Result<StudyReport, CliError> {
    if cfg.seeds.is_empty() {
        return Err(CliError::Config("the study needs at least one seed".into()));
    }
    let started = Instant::now();
    let base = cfg.filter.to_config()?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let models = [ModelChoice::Full, ModelChoice::Partial];
    let mut outcomes = Vec::new();
    for &seed in &cfg.seeds {
        let sim = SimulateConfig { seed, ..cfg.simulation.clone() }.sim_config()?;
        let result = run_study(&sim, &base, &models.map(LikelihoodModel::from))?;
        io::write_tracks(&dir.join(format!("seed_{seed}_track_full.csv")), &[renamed(&result.full, &cfg.simulation.gang_id)?])?;
        io::write_tracks(&dir.join(format!("seed_{seed}_track_masked.csv")), &[renamed(&result.masked, &cfg.simulation.gang_id)?])?;
        for (choice, series) in models.iter().zip(&result.series) {
            let name = match choice {
                ModelChoice::Full => "full",
                ModelChoice::Partial => "partial",
            };
            io::write_rows(
                &dir.join(format!("seed_{seed}_{name}.csv")),
                series.summaries.iter().enumerate().map(|(i, s)| StudyRow::new(i, s)),
            )?;
            let last = series.last();
            let (theta_covered, h_covered) = last.map_or((false, false), |s| s.covers(sim.truth()));
            outcomes.push(StudyOutcome {
                seed,
                likelihood: *choice,
                updates: series.summaries.len(),
                final_summary: last.map(|s| FinalInterval {
                    day: s.day,
                    theta_mean: s.theta_mean,
                    theta_lo: s.theta_lo,
                    theta_hi: s.theta_hi,
                    h_mean: s.h_mean,
                    h_lo: s.h_lo,
                    h_hi: s.h_hi,
                }),
                theta_covered,
                h_covered,
            });
        }
    }
    let full_covers_both = outcomes.iter().filter(|o| o.likelihood == ModelChoice::Full && o.theta_covered && o.h_covered).count();
    let partial_misses_any =
        outcomes.iter().filter(|o| o.likelihood == ModelChoice::Partial && !(o.theta_covered && o.h_covered)).count();
    let manifest = StudyManifest {
        config: cfg.clone(),
        wall_time_s: started.elapsed().as_secs_f64(),
        outcomes,
        full_covers_both,
        partial_misses_any,
    };
    let manifest_path = dir.join("manifest.json");
    fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).map_err(CliError::runtime)? + "\n")?;
    Ok(StudyReport { manifest, manifest_path })
}

/// Writes a synthetic scenario and returns the run config that reads it.
pub fn make_scenario(cfg: &ScenarioConfig) -> Result<PathBuf, CliError> {
    let s = scenario::generate(cfg)?;
    scenario::write(cfg, &s)
}

/// Reads back a map CSV written by [`predict`].
pub fn read_map_values(path: &Path) -> Result<Vec<f64>, CliError> {
    Ok(io::read_map(path)?.into_iter().map(|r| r.density).collect())
}
