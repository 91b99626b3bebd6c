//! Particle sets saved after each update.
//!
//! Update `k` is stored as `update_<k>.csv` (particles) next to
//! `update_<k>.json` (everything else needed to resume).

use std::fs;
use std::path::{Path, PathBuf};

use gangtrack_core::sequential::SequentialState;
use gangtrack_core::ParticleSet;
use serde::{Deserialize, Serialize};

use crate::config::ModelChoice;
use crate::error::CliError;
use crate::io;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotMeta {
    pub update: usize,
    pub gang_id: String,
    pub day: u32,
    pub seed: u64,
    pub likelihood: ModelChoice,
    pub expert_prior: bool,
    pub particles: usize,
    pub expert_mass: f64,
    /// File name of the particle CSV, relative to this file.
    pub particle_file: String,
}

pub fn stem(update: usize) -> String {
    format!("update_{update:05}")
}

pub fn write(dir: &Path, meta: &SnapshotMeta, set: &ParticleSet) -> Result<PathBuf, CliError> {
    fs::create_dir_all(dir)?;
    io::write_particles(&dir.join(&meta.particle_file), set)?;
    let path = dir.join(format!("{}.json", stem(meta.update)));
    let text = serde_json::to_string_pretty(meta).map_err(CliError::runtime)?;
    fs::write(&path, text + "\n")?;
    Ok(path)
}

pub fn read_meta(path: &Path) -> Result<SnapshotMeta, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::NotFound(format!("snapshot {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Loads a snapshot as the filter state that follows it.
pub fn read(path: &Path) -> Result<(SnapshotMeta, SequentialState), CliError> {
    let meta = read_meta(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let (particles, weights) = io::read_particles(&dir.join(&meta.particle_file))?;
    if particles.len() != meta.particles {
        return Err(CliError::Config(format!("{}: expected {} particles, found {}", path.display(), meta.particles, particles.len())));
    }
    let set = ParticleSet::from_parts(particles, weights, meta.expert_mass, meta.day).map_err(CliError::config)?;
    let state = SequentialState { set, updates_done: meta.update + 1 };
    Ok((meta, state))
}

/// Every snapshot in `dir`, by update index.
pub fn list(dir: &Path) -> Result<Vec<(PathBuf, SnapshotMeta)>, CliError> {
    let entries = match fs::read_dir(dir) {
        Ok(e) => e,
        Err(_) => return Ok(Vec::new()),
    };
    let mut found = Vec::new();
    for entry in entries {
        let path = entry?.path();
        let is_snapshot = path.extension().is_some_and(|e| e == "json")
            && path.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("update_"));
        if is_snapshot {
            let meta = read_meta(&path)?;
            found.push((path, meta));
        }
    }
    found.sort_by_key(|(_, m)| m.update);
    Ok(found)
}

/// The latest snapshot taken strictly before `day`: the particles in force
/// when forecasting that day.
pub fn latest_before(dir: &Path, day: u32) -> Result<(PathBuf, SnapshotMeta), CliError> {
    list(dir)?
        .into_iter().rfind(|(_, m)| m.day < day)
        .ok_or_else(|| CliError::NotFound(format!("no fitted snapshot before day {day} in {}", dir.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use gangtrack_core::ModelParams;

    fn meta(update: usize, day: u32) -> SnapshotMeta {
        SnapshotMeta {
            update,
            gang_id: "A".into(),
            day,
            seed: 3,
            likelihood: ModelChoice::Full,
            expert_prior: true,
            particles: 4,
            expert_mass: 0.0,
            particle_file: format!("{}.csv", stem(update)),
        }
    }

    #[test]
    fn write_read_list() {
        let dir = tempfile::tempdir().unwrap();
        let particles = vec![ModelParams { theta: 2.0, h: 1.0 }; 4];
        let set = ParticleSet::from_parts(particles, vec![0.25; 4], 0.0, 7).unwrap();
        for (u, d) in [(0, 7), (1, 7), (2, 9)] {
            write(dir.path(), &meta(u, d), &set).unwrap();
        }
        let (m, state) = read(&dir.path().join("update_00001.json")).unwrap();
        assert_eq!(m.update, 1);
        assert_eq!(state.updates_done, 2);
        assert_eq!(state.set, set);
        assert_eq!(list(dir.path()).unwrap().len(), 3);
        assert_eq!(latest_before(dir.path(), 9).unwrap().1.update, 1);
        assert_eq!(latest_before(dir.path(), 10).unwrap().1.update, 2);
        assert_eq!(latest_before(dir.path(), 7).unwrap_err().exit_code(), 4);
        assert_eq!(read(&dir.path().join("update_00042.json")).unwrap_err().exit_code(), 4);
    }
}
