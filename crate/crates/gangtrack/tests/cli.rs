use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use gangtrack::commands::{self, EvaluateOptions, FitOptions, PredictOptions};
use gangtrack::config::{load_run_config, ModelChoice, RunConfig, ScenarioConfig};
use gangtrack::io::{self, SummaryRow};
use gangtrack::scenario;
use gangtrack_core::predict::Variant;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gangtrack"))
}

fn exit_code(cmd: &mut Command) -> i32 {
    let out = cmd.output().expect("binary runs");
    out.status.code().expect("exited normally")
}

fn small_scenario(dir: &Path, days: usize) -> PathBuf {
    let cfg = ScenarioConfig { gangs: 2, days, cell_km: 5.0, ..ScenarioConfig::default() };
    scenario::write_to(dir, &cfg).unwrap()
}

/// A copy of the run config writing to `output`.
fn with_output(config: &Path, output: &str) -> PathBuf {
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(config).unwrap()).unwrap();
    v["output_dir"] = output.into();
    let path = config.with_file_name(format!("{output}.json"));
    fs::write(&path, serde_json::to_string_pretty(&v).unwrap()).unwrap();
    path
}

fn load(config: &Path) -> RunConfig {
    load_run_config(config).unwrap()
}

#[test]
fn simulate_writes_tracks_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nested/sim");
    assert_eq!(exit_code(bin().args(["simulate", "--seed", "3", "--output-dir"]).arg(&out)), 0);
    let full = io::read_tracks(&out.join("full.csv")).unwrap();
    let masked = io::read_tracks(&out.join("masked.csv")).unwrap();
    assert_eq!(full[0].len(), 200);
    assert_eq!(masked[0].len(), 200 - 79);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["removed_days"].as_array().unwrap().len(), 79);
    assert_eq!(manifest["config"]["seed"], 3);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"missing_frac": 1.2, "output_dir": "x"}"#).unwrap();
    assert_eq!(exit_code(bin().arg("simulate").arg("--config").arg(&bad)), 2);
    fs::write(&bad, "{not json").unwrap();
    assert_eq!(exit_code(bin().arg("simulate").arg("--config").arg(&bad)), 2);
}

#[test]
fn fit_shares_one_stream_across_gangs() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_scenario(dir.path(), 25);
    assert_eq!(exit_code(bin().arg("fit").arg("--config").arg(&config)), 0);
    let rows: Vec<SummaryRow> = io::read_rows(&dir.path().join("run/summaries.csv")).unwrap();
    let gangs: std::collections::BTreeSet<&str> = rows.iter().map(|r| r.gang_id.as_str()).collect();
    assert_eq!(gangs.len(), 2);
    assert!(rows.windows(2).all(|w| w[0].update + 1 == w[1].update && w[0].day <= w[1].day));
    assert!(rows.iter().all(|r| r.theta_lo <= r.theta_mean && r.theta_mean <= r.theta_hi));
    let snaps = fs::read_dir(dir.path().join("run/snapshots")).unwrap().count();
    assert_eq!(snaps, 2 * rows.len());
}

#[test]
fn resume_continues_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_scenario(dir.path(), 30);
    let whole = with_output(&config, "whole");
    let split = with_output(&config, "split");
    assert_eq!(exit_code(bin().arg("fit").arg("--config").arg(&whole)), 0);
    assert_eq!(exit_code(bin().args(["fit", "--until-day", "15", "--config"]).arg(&split)), 0);
    let partial: Vec<SummaryRow> = io::read_rows(&dir.path().join("split/summaries.csv")).unwrap();
    let last = partial.last().unwrap().update;
    let snap = dir.path().join(format!("split/snapshots/update_{last:05}.json"));
    assert_eq!(exit_code(bin().args(["fit", "--config"]).arg(&split).arg("--resume").arg(&snap)), 0);

    let read = |p: &str| fs::read(dir.path().join(p)).unwrap();
    assert_eq!(read("whole/summaries.csv"), read("split/summaries.csv"));
    let all: Vec<SummaryRow> = io::read_rows(&dir.path().join("whole/summaries.csv")).unwrap();
    let final_csv = format!("snapshots/update_{:05}.csv", all.last().unwrap().update);
    assert_eq!(read(&format!("whole/{final_csv}")), read(&format!("split/{final_csv}")));

    // A different seed may not continue someone else's run.
    assert_eq!(exit_code(bin().args(["fit", "--seed", "99", "--config"]).arg(&split).arg("--resume").arg(&snap)), 2);
}

#[test]
fn fit_without_enough_sightings_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.csv");
    let config = dir.path().join("run.json");
    fs::write(&config, r#"{"observations": "obs.csv", "output_dir": "out"}"#).unwrap();
    fs::write(&obs, "gang_id,day_index,lon,lat\n").unwrap();
    assert_eq!(exit_code(bin().arg("fit").arg("--config").arg(&config)), 3);
    fs::write(&obs, "gang_id,day_index,lon,lat\nA,1,85.0,23.0\nA,2,85.01,23.0\nA,3,85.0,23.01\nB,1,85.2,23.1\n").unwrap();
    assert_eq!(exit_code(bin().arg("fit").arg("--config").arg(&config)), 3);
    fs::write(&config, r#"{"observations": "missing.csv", "output_dir": "out"}"#).unwrap();
    assert_eq!(exit_code(bin().arg("fit").arg("--config").arg(&config)), 2);
}

#[test]
fn predict_blends_and_bands() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_scenario(dir.path(), 25);
    let cfg = load(&config);
    assert_eq!(commands::predict(&cfg, &PredictOptions { day: 20, gang: "A".into(), force_pn: None, model: None }).unwrap_err().exit_code(), 4);
    commands::fit(&cfg, &FitOptions::default()).unwrap();

    let r = commands::predict(&cfg, &PredictOptions { day: 20, gang: "A".into(), force_pn: Some(1.0), model: None }).unwrap();
    let density = commands::read_map_values(&r.density).unwrap();
    let prior = commands::read_map_values(&r.prior).unwrap();
    assert_eq!(density.len(), prior.len());
    for (d, p) in density.iter().zip(&prior) {
        assert!((d - p).abs() < 1e-12);
    }
    assert!(fs::read_to_string(&r.svg).unwrap().contains("<svg"));

    let r = commands::predict(&cfg, &PredictOptions { day: 20, gang: "A".into(), force_pn: Some(0.3), model: None }).unwrap();
    let mut sorted = r.forecast.values.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let cell = r.forecast.grid.cell_area();
    let top = |limit: f64| (limit / cell + 1e-9).floor() as usize;
    assert_eq!(r.band_cells, vec![top(500.0), top(1000.0) - top(500.0)]);

    let unknown = commands::predict(&cfg, &PredictOptions { day: 20, gang: "Z".into(), force_pn: None, model: None });
    assert_eq!(unknown.unwrap_err().exit_code(), 4);
    let bad_pn = commands::predict(&cfg, &PredictOptions { day: 20, gang: "A".into(), force_pn: Some(1.5), model: None });
    assert_eq!(bad_pn.unwrap_err().exit_code(), 2);
    assert_eq!(exit_code(bin().args(["predict", "--day", "20", "--gang", "Z", "--config"]).arg(&config)), 4);
}

#[test]
fn evaluate_emits_comparison_tables() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_scenario(dir.path(), 20);
    let cfg = load(&config);
    let r = commands::evaluate(&cfg, &EvaluateOptions { include_partial: true }).unwrap();
    assert_eq!(r.comparisons.len(), 2);
    assert_eq!(r.comparisons[0].rows.len(), 3);
    let per_variant = |v: Variant| r.records.iter().filter(|x| x.variant == v).count();
    assert_eq!(per_variant(Variant::WithPrior), per_variant(Variant::Partial));
    assert!(r.records.iter().all(|x| x.ram >= cfg.grid.cell_km * cfg.grid.cell_km && x.aupc >= 0.0));
    let rows: Vec<io::AssessmentRow> = io::read_rows(&r.assessments).unwrap();
    assert_eq!(rows.len(), r.records.len());
    let json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&r.comparison).unwrap()).unwrap();
    assert_eq!(json[0]["better"], "with-prior");
    assert_eq!(json[1]["baseline"], "partial-model");
}

#[test]
fn evaluate_single_instance_and_none() {
    let dir = tempfile::tempdir().unwrap();
    let obs = dir.path().join("obs.csv");
    let config = dir.path().join("run.json");
    fs::write(&config, r#"{"observations": "obs.csv", "output_dir": "out", "filter": {"particles": 200}}"#).unwrap();
    fs::write(&obs, "gang_id,day_index,lon,lat\nA,1,85.0,23.0\nA,2,85.01,23.0\nA,4,85.0,23.01\nA,5,85.02,23.02\n").unwrap();
    let r = commands::evaluate(&load(&config), &EvaluateOptions::default()).unwrap();
    assert_eq!(r.comparisons.len(), 1);
    assert_eq!(r.comparisons[0].rows.len(), 1);
    assert_eq!(r.comparisons[0].rows[0].instances, 1);

    fs::write(&obs, "gang_id,day_index,lon,lat\nA,1,85.0,23.0\nA,2,85.01,23.0\n").unwrap();
    assert_eq!(exit_code(bin().arg("evaluate").arg("--config").arg(&config)), 5);
}

#[test]
fn variant_flag_selects_the_likelihood() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_scenario(dir.path(), 15);
    let cfg = load(&config);
    let full = commands::fit(&cfg, &FitOptions::default()).unwrap();
    let full_rows = fs::read(&full.summaries).unwrap();
    commands::fit(&cfg, &FitOptions { model: Some(ModelChoice::Partial), ..FitOptions::default() }).unwrap();
    assert_ne!(fs::read(&full.summaries).unwrap(), full_rows);
    let meta = gangtrack::snapshot::read_meta(&full.last_snapshot.unwrap()).unwrap();
    assert_eq!(meta.likelihood, ModelChoice::Partial);
}

#[test]
fn study_writes_series_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("study.json");
    fs::write(&config, r#"{"simulation": {"n": 40}, "seeds": [1, 2], "filter": {"particles": 200}, "output_dir": "st"}"#).unwrap();
    assert_eq!(exit_code(bin().arg("study").arg("--config").arg(&config)), 0);
    let out = dir.path().join("st");
    for s in [1, 2] {
        for v in ["full", "partial"] {
            let rows: Vec<io::StudyRow> = io::read_rows(&out.join(format!("seed_{s}_{v}.csv"))).unwrap();
            assert!(!rows.is_empty());
        }
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["outcomes"].as_array().unwrap().len(), 4);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
}
