//! JSON run configurations.
//!
//! Every field except the input and output paths has a default, so a minimal
//! config is `{"observations": "obs.csv", "output_dir": "out"}`. Relative
//! paths are resolved against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use gangtrack_core::prior::Credibility;
use gangtrack_core::sequential::FilterConfig;
use gangtrack_core::{EvaluationPoints, GeoPoint, KmScale, LikelihoodModel, ParamBox, PriorThresholds};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

fn default_true() -> bool {
    true
}

/// Which likelihood the filter uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModelChoice {
    #[default]
    Full,
    Partial,
}

impl From<ModelChoice> for LikelihoodModel {
    fn from(m: ModelChoice) -> Self {
        match m {
            ModelChoice::Full => LikelihoodModel::Full,
            ModelChoice::Partial => LikelihoodModel::Partial,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EvaluationChoice {
    #[default]
    Deciles,
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterSettings {
    pub particles: usize,
    pub theta_min: f64,
    pub theta_max: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub smoothing: f64,
    pub min_sightings: usize,
    pub likelihood: ModelChoice,
    pub evaluation: EvaluationChoice,
}

impl Default for FilterSettings {
    fn default() -> Self {
        let f = FilterConfig::default();
        Self {
            particles: f.particles,
            theta_min: f.bounds.theta_min,
            theta_max: f.bounds.theta_max,
            h_min: f.bounds.h_min,
            h_max: f.bounds.h_max,
            smoothing: f.smoothing,
            min_sightings: f.min_sightings,
            likelihood: ModelChoice::Full,
            evaluation: EvaluationChoice::Deciles,
        }
    }
}

impl FilterSettings {
    pub fn to_config(&self) -> Result<FilterConfig, CliError> {
        let cfg = FilterConfig {
            particles: self.particles,
            bounds: ParamBox::new(self.theta_min, self.theta_max, self.h_min, self.h_max).map_err(CliError::config)?,
            smoothing: self.smoothing,
            model: self.likelihood.into(),
            min_sightings: self.min_sightings,
            evaluation: match self.evaluation {
                EvaluationChoice::Deciles => EvaluationPoints::DecileProxies,
                EvaluationChoice::Exact => EvaluationPoints::Exact,
            },
        };
        cfg.validate().map_err(CliError::config)?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThresholdSettings {
    pub forest_min: f64,
    pub camp_km: f64,
    pub hull_buffer_km: f64,
    pub intel_km: f64,
    pub intel_max_age_days: u32,
    pub k0: usize,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        let t = PriorThresholds::default();
        Self {
            forest_min: t.forest_min,
            camp_km: t.camp_km,
            hull_buffer_km: t.hull_buffer_km,
            intel_km: t.intel_km,
            intel_max_age_days: t.intel_max_age_days,
            k0: t.k0,
        }
    }
}

impl From<&ThresholdSettings> for PriorThresholds {
    fn from(t: &ThresholdSettings) -> Self {
        PriorThresholds {
            forest_min: t.forest_min,
            camp_km: t.camp_km,
            hull_buffer_km: t.hull_buffer_km,
            intel_km: t.intel_km,
            intel_max_age_days: t.intel_max_age_days,
            k0: t.k0,
        }
    }
}

/// Credibility of the expert map with and without fresh intelligence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CredibilitySettings {
    pub with_intel: f64,
    pub without_intel: f64,
}

impl Default for CredibilitySettings {
    fn default() -> Self {
        let c = Credibility::default();
        Self { with_intel: c.with_intel, without_intel: c.without_intel }
    }
}

impl From<&CredibilitySettings> for Credibility {
    fn from(c: &CredibilitySettings) -> Self {
        Credibility { with_intel: c.with_intel, without_intel: c.without_intel }
    }
}

/// Analysis grid. Without a `bbox` the grid covers the observations plus
/// `margin_km` on every side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSettings {
    /// `[min_lon, min_lat, max_lon, max_lat]`.
    pub bbox: Option<[f64; 4]>,
    pub cell_km: f64,
    pub margin_km: f64,
    /// Latitude fixing the km conversion; defaults to the grid's centre.
    pub ref_lat: Option<f64>,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self { bbox: None, cell_km: 2.5, margin_km: 20.0, ref_lat: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub observations: PathBuf,
    #[serde(default)]
    pub camps: Option<PathBuf>,
    /// Sparse `row,col,forest` raster on the analysis grid; absent cells
    /// are 0. Without a raster every cell counts as forest.
    #[serde(default)]
    pub forest: Option<PathBuf>,
    #[serde(default)]
    pub intel: Option<PathBuf>,
    #[serde(default)]
    pub grid: GridSettings,
    #[serde(default)]
    pub filter: FilterSettings,
    #[serde(default)]
    pub thresholds: ThresholdSettings,
    #[serde(default)]
    pub credibility: CredibilitySettings,
    /// Whether `fit` and `predict` blend in the expert map.
    #[serde(default = "default_true")]
    pub expert_prior: bool,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.filter.to_config()?;
        let c = &self.credibility;
        if !(0.0..=1.0).contains(&c.with_intel) || !(0.0..=1.0).contains(&c.without_intel) {
            return Err(CliError::Config("credibility weights must lie in [0, 1]".into()));
        }
        if !(self.grid.cell_km > 0.0 && self.grid.cell_km.is_finite()) || !(self.grid.margin_km >= 0.0) {
            return Err(CliError::Config("grid needs a positive cell size and non-negative margin".into()));
        }
        if self.thresholds.k0 == 0 || self.thresholds.k0 > self.filter.min_sightings {
            return Err(CliError::Config("k0 must be between 1 and min_sightings".into()));
        }
        Ok(())
    }

    fn resolve(&mut self, base: &Path) {
        for p in [Some(&mut self.observations), self.camps.as_mut(), self.forest.as_mut(), self.intel.as_mut(), Some(&mut self.output_dir)]
            .into_iter()
            .flatten()
        {
            *p = base.join(&*p);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: usize,
    pub theta: f64,
    pub h: f64,
    pub missing_frac: f64,
    pub seed: u64,
    pub center_lon: f64,
    pub center_lat: f64,
    pub initial_sd_km: f64,
    pub gang_id: String,
    pub output_dir: PathBuf,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let s = gangtrack_core::sim::SimConfig::appendix_c(0);
        Self {
            n: s.n,
            theta: s.theta,
            h: s.h,
            missing_frac: s.missing_frac,
            seed: 0,
            center_lon: s.center.lon,
            center_lat: s.center.lat,
            initial_sd_km: s.initial_sd_km,
            gang_id: "sim".into(),
            output_dir: PathBuf::from("sim-out"),
        }
    }
}

impl SimulateConfig {
    pub fn sim_config(&self) -> Result<gangtrack_core::sim::SimConfig, CliError> {
        let center = GeoPoint::new(self.center_lon, self.center_lat);
        let cfg = gangtrack_core::sim::SimConfig {
            n: self.n,
            theta: self.theta,
            h: self.h,
            missing_frac: self.missing_frac,
            seed: self.seed,
            center,
            initial_sd_km: self.initial_sd_km,
            scale: KmScale::at_latitude(center.lat).map_err(CliError::config)?,
        };
        cfg.validate().map_err(CliError::config)?;
        Ok(cfg)
    }
}

/// Full vs. partial likelihood study over several seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub simulation: SimulateConfig,
    pub seeds: Vec<u64>,
    pub filter: FilterSettings,
    pub output_dir: PathBuf,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            simulation: SimulateConfig::default(),
            seeds: (0..10).collect(),
            filter: FilterSettings { particles: 500, ..FilterSettings::default() },
            output_dir: PathBuf::from("study-out"),
        }
    }
}

/// Synthetic multi-gang scenario with every input the expert map uses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub gangs: usize,
    pub days: usize,
    /// Chance that a gang is sighted on a given day after its first.
    pub sighting_prob: f64,
    pub theta: f64,
    pub h: f64,
    pub center_lon: f64,
    pub center_lat: f64,
    /// Gang starting points scatter this far (sd, km) from the centre.
    pub spread_km: f64,
    pub camps: usize,
    pub intel_reports: usize,
    pub cell_km: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            gangs: 3,
            days: 60,
            sighting_prob: 0.6,
            theta: 10.0,
            h: 2.0,
            center_lon: 85.3,
            center_lat: 23.4,
            spread_km: 15.0,
            camps: 6,
            intel_reports: 8,
            cell_km: 2.5,
            seed: 0,
            output_dir: PathBuf::from("scenario"),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.gangs == 0 || self.days < 2 {
            return Err(CliError::Config("a scenario needs at least one gang and two days".into()));
        }
        if !(self.sighting_prob > 0.0 && self.sighting_prob <= 1.0) {
            return Err(CliError::Config("sighting_prob must lie in (0, 1]".into()));
        }
        if !(self.spread_km >= 0.0 && self.cell_km > 0.0) {
            return Err(CliError::Config("spread must be non-negative and cells positive".into()));
        }
        gangtrack_core::ModelParams::new(self.theta, self.h).map_err(CliError::config)?;
        KmScale::at_latitude(self.center_lat).map_err(CliError::config)?;
        Ok(())
    }
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn base_dir(path: &Path) -> PathBuf {
    path.parent().map(Path::to_path_buf).unwrap_or_default()
}

pub fn load_run_config(path: &Path) -> Result<RunConfig, CliError> {
    let mut cfg: RunConfig = read_json(path)?;
    cfg.resolve(&base_dir(path));
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_simulate_config(path: &Path) -> Result<SimulateConfig, CliError> {
    let mut cfg: SimulateConfig = read_json(path)?;
    cfg.output_dir = base_dir(path).join(&cfg.output_dir);
    Ok(cfg)
}

pub fn load_study_config(path: &Path) -> Result<StudyConfig, CliError> {
    let mut cfg: StudyConfig = read_json(path)?;
    cfg.output_dir = base_dir(path).join(&cfg.output_dir);
    Ok(cfg)
}

pub fn load_scenario_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let mut cfg: ScenarioConfig = read_json(path)?;
    cfg.output_dir = base_dir(path).join(&cfg.output_dir);
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_run_config_takes_defaults() {
        let cfg: RunConfig = serde_json::from_str(r#"{"observations": "o.csv", "output_dir": "out"}"#).unwrap();
        assert_eq!(cfg.filter, FilterSettings::default());
        assert!(cfg.expert_prior);
        assert_eq!(cfg.grid.cell_km, 2.5);
        cfg.validate().unwrap();
        let f = cfg.filter.to_config().unwrap();
        assert_eq!(f, FilterConfig::default());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(serde_json::from_str::<RunConfig>(r#"{"observations": "o", "output_dir": "o", "sead": 1}"#).is_err());
    }

    #[test]
    fn bad_values_are_config_errors() {
        let mut cfg: RunConfig = serde_json::from_str(r#"{"observations": "o.csv", "output_dir": "out"}"#).unwrap();
        cfg.filter.particles = 10;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 2);
        let sim = SimulateConfig { missing_frac: 1.2, ..SimulateConfig::default() };
        assert_eq!(sim.sim_config().unwrap_err().exit_code(), 2);
    }

    #[test]
    fn paths_resolve_against_the_config_directory() {
        let mut cfg: RunConfig =
            serde_json::from_str(r#"{"observations": "o.csv", "forest": "f.csv", "output_dir": "out"}"#).unwrap();
        cfg.resolve(Path::new("/data/run"));
        assert_eq!(cfg.observations, Path::new("/data/run/o.csv"));
        assert_eq!(cfg.forest.as_deref(), Some(Path::new("/data/run/f.csv")));
        assert_eq!(cfg.camps, None);
    }
}
