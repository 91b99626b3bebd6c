//! CSV file formats.
//!
//! Floats are written in shortest round-trip form, so every file read back
//! through these parsers gives bit-identical values.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use gangtrack_core::predict::AssessmentRecord;
use gangtrack_core::predict::Variant;
use gangtrack_core::{ForestRaster, GeoPoint, Grid, IntelInput, ModelParams, ParticleSet, PosteriorSummary, Track};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRow {
    pub gang_id: String,
    pub day_index: u32,
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointRow {
    pub lon: f64,
    pub lat: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestRow {
    pub row: usize,
    pub col: usize,
    pub forest: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntelRow {
    pub lon: f64,
    pub lat: f64,
    pub received_day: u32,
    /// Empty when the report concerns every gang.
    pub gang: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub update: usize,
    pub gang_id: String,
    pub day: u32,
    pub theta_mean: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub h_mean: f64,
    pub h_lo: f64,
    pub h_hi: f64,
    pub q0_prior: f64,
    pub q0_posterior: f64,
}

impl SummaryRow {
    pub fn new(update: usize, gang_id: &str, s: &PosteriorSummary) -> Self {
        Self {
            update,
            gang_id: gang_id.to_string(),
            day: s.day,
            theta_mean: s.theta_mean,
            theta_lo: s.theta_lo,
            theta_hi: s.theta_hi,
            h_mean: s.h_mean,
            h_lo: s.h_lo,
            h_hi: s.h_hi,
            q0_prior: s.q0_prior,
            q0_posterior: s.q0_posterior,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParticleRow {
    pub theta: f64,
    pub h: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapRow {
    pub lon: f64,
    pub lat: f64,
    pub density: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssessmentRow {
    pub gang_id: String,
    pub instance: usize,
    pub day: u32,
    pub variant: String,
    pub ram_km2: f64,
    pub aupc_km: f64,
}

impl From<&AssessmentRecord> for AssessmentRow {
    fn from(r: &AssessmentRecord) -> Self {
        Self {
            gang_id: r.gang_id.clone(),
            instance: r.instance,
            day: r.day,
            variant: r.variant.as_str().to_string(),
            ram_km2: r.ram,
            aupc_km: r.aupc,
        }
    }
}

impl TryFrom<AssessmentRow> for AssessmentRecord {
    type Error = CliError;

    fn try_from(r: AssessmentRow) -> Result<Self, CliError> {
        let variant = Variant::parse(&r.variant).ok_or_else(|| CliError::Config(format!("unknown variant {:?}", r.variant)))?;
        Ok(AssessmentRecord { gang_id: r.gang_id, instance: r.instance, day: r.day, ram: r.ram_km2, aupc: r.aupc_km, variant })
    }
}

/// One row of a study series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub update: usize,
    pub day: u32,
    pub theta_mean: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub h_mean: f64,
    pub h_lo: f64,
    pub h_hi: f64,
}

impl StudyRow {
    pub fn new(update: usize, s: &PosteriorSummary) -> Self {
        Self {
            update,
            day: s.day,
            theta_mean: s.theta_mean,
            theta_lo: s.theta_lo,
            theta_hi: s.theta_hi,
            h_mean: s.h_mean,
            h_lo: s.h_lo,
            h_hi: s.h_hi,
        }
    }
}

pub fn read_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

pub fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut writer = csv::Writer::from_path(path).map_err(CliError::runtime)?;
    let mut any = false;
    for row in rows {
        writer.serialize(row).map_err(CliError::runtime)?;
        any = true;
    }
    if !any {
        // An empty iterator would otherwise leave the file without a header.
        drop(writer);
        fs::write(path, "")?;
        return Ok(());
    }
    writer.flush()?;
    Ok(())
}

/// Groups sightings into tracks ordered by gang id.
pub fn tracks_from_rows(rows: &[ObservationRow]) -> Result<Vec<Track>, CliError> {
    let mut tracks: BTreeMap<&str, Track> = BTreeMap::new();
    for r in rows {
        let track = tracks.entry(r.gang_id.as_str()).or_insert_with(|| Track::new(r.gang_id.as_str()));
        if track.get(r.day_index).is_some() {
            return Err(CliError::Config(format!("gang {} has two sightings on day {}", r.gang_id, r.day_index)));
        }
        track
            .insert(r.day_index, GeoPoint::new(r.lon, r.lat))
            .map_err(|e| CliError::Config(format!("gang {} day {}: {e}", r.gang_id, r.day_index)))?;
    }
    Ok(tracks.into_values().collect())
}

pub fn track_rows(tracks: &[Track]) -> Vec<ObservationRow> {
    let mut rows = Vec::new();
    for t in tracks {
        for (&day, p) in t.observations() {
            rows.push(ObservationRow { gang_id: t.gang_id.clone(), day_index: day, lon: p.lon, lat: p.lat });
        }
    }
    rows
}

pub fn read_tracks(path: &Path) -> Result<Vec<Track>, CliError> {
    tracks_from_rows(&read_rows(path)?)
}

pub fn write_tracks(path: &Path, tracks: &[Track]) -> Result<(), CliError> {
    write_rows(path, track_rows(tracks))
}

pub fn read_points(path: &Path) -> Result<Vec<GeoPoint>, CliError> {
    let rows: Vec<PointRow> = read_rows(path)?;
    let points: Vec<GeoPoint> = rows.iter().map(|r| GeoPoint::new(r.lon, r.lat)).collect();
    if points.iter().any(|p| !p.is_finite()) {
        return Err(CliError::Config(format!("{}: non-finite coordinates", path.display())));
    }
    Ok(points)
}

pub fn write_points(path: &Path, points: &[GeoPoint]) -> Result<(), CliError> {
    write_rows(path, points.iter().map(|p| PointRow { lon: p.lon, lat: p.lat }))
}

pub fn read_forest(path: &Path, grid: &Grid) -> Result<ForestRaster, CliError> {
    let rows: Vec<ForestRow> = read_rows(path)?;
    let mut values = grid.zeros();
    for r in rows {
        if r.row >= grid.rows || r.col >= grid.cols {
            return Err(CliError::Config(format!("{}: cell ({}, {}) is outside the grid", path.display(), r.row, r.col)));
        }
        values[grid.index(r.row, r.col)] = r.forest;
    }
    ForestRaster::new(grid, values).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

/// Writes the non-zero cells only.
pub fn write_forest(path: &Path, grid: &Grid, forest: &ForestRaster) -> Result<(), CliError> {
    let rows = forest.values().iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(i, v)| {
        let (row, col) = grid.row_col(i);
        ForestRow { row, col, forest: *v }
    });
    write_rows(path, rows)
}

pub fn read_intel(path: &Path) -> Result<Vec<IntelInput>, CliError> {
    let rows: Vec<IntelRow> = read_rows(path)?;
    Ok(rows
        .into_iter()
        .map(|r| IntelInput { location: GeoPoint::new(r.lon, r.lat), received_day: r.received_day, gang: r.gang.filter(|g| !g.is_empty()) })
        .collect())
}

pub fn write_intel(path: &Path, intel: &[IntelInput]) -> Result<(), CliError> {
    write_rows(
        path,
        intel.iter().map(|i| IntelRow { lon: i.location.lon, lat: i.location.lat, received_day: i.received_day, gang: i.gang.clone() }),
    )
}

pub fn read_particles(path: &Path) -> Result<(Vec<ModelParams>, Vec<f64>), CliError> {
    let rows: Vec<ParticleRow> = read_rows(path)?;
    Ok(rows.iter().map(|r| (ModelParams { theta: r.theta, h: r.h }, r.weight)).unzip())
}

pub fn write_particles(path: &Path, set: &ParticleSet) -> Result<(), CliError> {
    write_rows(path, set.particles().iter().zip(set.weights()).map(|(p, w)| ParticleRow { theta: p.theta, h: p.h, weight: *w }))
}

/// Cell-centre map in row-major order.
pub fn write_map(path: &Path, grid: &Grid, values: &[f64]) -> Result<(), CliError> {
    write_rows(path, grid.centers().zip(values).map(|(c, v)| MapRow { lon: c.lon, lat: c.lat, density: *v }))
}

pub fn read_map(path: &Path) -> Result<Vec<MapRow>, CliError> {
    read_rows(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use gangtrack_core::KmScale;

    #[test]
    fn observations_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("obs.csv");
        fs::write(&path, "gang_id,day_index,lon,lat\nB,3,85.1,23.2\nA,1,85.0,23.0\nA,4,85.05,23.1\n").unwrap();
        let tracks = read_tracks(&path).unwrap();
        assert_eq!(tracks.iter().map(|t| t.gang_id.as_str()).collect::<Vec<_>>(), ["A", "B"]);
        assert_eq!(tracks[0].len(), 2);
        let again = dir.path().join("again.csv");
        write_tracks(&again, &tracks).unwrap();
        assert_eq!(read_tracks(&again).unwrap(), tracks);
    }

    #[test]
    fn duplicate_day_is_rejected() {
        let rows = vec![
            ObservationRow { gang_id: "A".into(), day_index: 1, lon: 85.0, lat: 23.0 },
            ObservationRow { gang_id: "A".into(), day_index: 1, lon: 85.1, lat: 23.0 },
        ];
        assert_eq!(tracks_from_rows(&rows).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn intel_gang_is_optional() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("intel.csv");
        fs::write(&path, "lon,lat,received_day,gang\n85.0,23.0,4,\n85.1,23.1,5,A\n").unwrap();
        let intel = read_intel(&path).unwrap();
        assert_eq!(intel[0].gang, None);
        assert_eq!(intel[1].gang.as_deref(), Some("A"));
        let again = dir.path().join("again.csv");
        write_intel(&again, &intel).unwrap();
        assert_eq!(read_intel(&again).unwrap(), intel);
    }

    #[test]
    fn forest_is_sparse_and_checked() {
        let dir = tempfile::tempdir().unwrap();
        let scale = KmScale::at_latitude(23.0).unwrap();
        let grid = Grid::new(GeoPoint::new(85.0, 23.0), 2.5, 3, 4, scale).unwrap();
        let path = dir.path().join("forest.csv");
        fs::write(&path, "row,col,forest\n0,1,0.75\n2,3,1\n").unwrap();
        let forest = read_forest(&path, &grid).unwrap();
        assert_eq!(forest.values()[1], 0.75);
        assert_eq!(forest.values()[11], 1.0);
        assert_eq!(forest.values().iter().filter(|v| **v == 0.0).count(), 10);
        let again = dir.path().join("again.csv");
        write_forest(&again, &grid, &forest).unwrap();
        assert_eq!(read_forest(&again, &grid).unwrap(), forest);

        fs::write(&path, "row,col,forest\n3,0,0.5\n").unwrap();
        assert_eq!(read_forest(&path, &grid).unwrap_err().exit_code(), 2);
        fs::write(&path, "row,col,forest\n0,0,1.5\n").unwrap();
        assert!(read_forest(&path, &grid).is_err());
    }

    #[test]
    fn particles_round_trip_bit_for_bit() {
        let dir = tempfile::tempdir().unwrap();
        let particles: Vec<ModelParams> = (0..7).map(|i| ModelParams { theta: 1.0 + i as f64 / 3.0, h: 0.1 * (i as f64).sqrt() + 0.5 }).collect();
        let set = ParticleSet::from_parts(particles, vec![1.0 / 7.0; 7], 0.0, 5).unwrap();
        let path = dir.path().join("p.csv");
        write_particles(&path, &set).unwrap();
        let (p, w) = read_particles(&path).unwrap();
        assert_eq!(p, set.particles());
        assert_eq!(w, set.weights());
    }

    #[test]
    fn empty_rows_give_an_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("none.csv");
        write_rows::<PointRow>(&path, []).unwrap();
        assert!(read_points(&path).unwrap().is_empty());
    }
}
