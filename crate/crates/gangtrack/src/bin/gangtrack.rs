use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gangtrack::commands::{self, EvaluateOptions, FitOptions, PredictOptions};
use gangtrack::config::{self, ModelChoice, ScenarioConfig, SimulateConfig, StudyConfig};
use gangtrack::CliError;

/// Next-location prediction from irregular sightings.
#[derive(Debug, Parser)]
#[command(name = "gangtrack", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw a track from the full model and remove a share of its days.
    Simulate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Write a synthetic multi-gang data set and a run config for it.
    Scenario {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run the particle filter over all gangs.
    Fit {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        variant: Option<ModelChoice>,
        /// Continue from a snapshot JSON written by an earlier fit.
        #[arg(long)]
        resume: Option<PathBuf>,
        /// Ignore sightings after this day.
        #[arg(long)]
        until_day: Option<u32>,
    },
    /// Forecast map for one gang on one day.
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        day: u32,
        #[arg(long)]
        gang: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        variant: Option<ModelChoice>,
        /// Use this credibility weight instead of the configured one.
        #[arg(long)]
        force_pn: Option<f64>,
    },
    /// Score one-step forecasts with and without the expert map.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Also score the observed-days-only likelihood.
        #[arg(long)]
        partial: bool,
    },
    /// Full vs. partial likelihood on simulated tracks over several seeds.
    Study {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Run this single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, seed, output_dir } => {
            let mut cfg = match config {
                Some(p) => config::load_simulate_config(&p)?,
                None => SimulateConfig::default(),
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.output_dir = output_dir.unwrap_or(cfg.output_dir);
            let r = commands::simulate(&cfg)?;
            println!("wrote {}, {} and {}", r.full.display(), r.masked.display(), r.manifest.display());
        }
        Command::Scenario { config, seed, output_dir } => {
            let mut cfg = match config {
                Some(p) => config::load_scenario_config(&p)?,
                None => ScenarioConfig::default(),
            };
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.output_dir = output_dir.unwrap_or(cfg.output_dir);
            let path = commands::make_scenario(&cfg)?;
            println!("wrote scenario; run config at {}", path.display());
        }
        Command::Fit { config, seed, variant, resume, until_day } => {
            let mut cfg = config::load_run_config(&config)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            let r = commands::fit(&cfg, &FitOptions { model: variant, resume, until_day })?;
            println!("{} updates; summaries in {}", r.updates, r.summaries.display());
            if let Some(s) = r.last_snapshot {
                println!("last snapshot {}", s.display());
            }
        }
        Command::Predict { config, day, gang, seed, variant, force_pn } => {
            let mut cfg = config::load_run_config(&config)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            let r = commands::predict(&cfg, &PredictOptions { day, gang, force_pn, model: variant })?;
            println!("p = {} from {}", r.p_n, r.snapshot.display());
            println!("band cells {:?}; wrote {}, {} and {}", r.band_cells, r.density.display(), r.prior.display(), r.svg.display());
        }
        Command::Evaluate { config, seed, partial } => {
            let mut cfg = config::load_run_config(&config)?;
            cfg.seed = seed.unwrap_or(cfg.seed);
            let r = commands::evaluate(&cfg, &EvaluateOptions { include_partial: partial })?;
            for c in &r.comparisons {
                for row in &c.rows {
                    println!(
                        "{} vs {} [{}]: RAM better {:.1}% (at least as good {:.1}%), AUPC better {:.1}% ({:.1}%) over {} instances",
                        c.better,
                        c.baseline,
                        row.gang_id.as_deref().unwrap_or("all"),
                        row.ram_better_pct,
                        row.ram_at_least_pct,
                        row.aupc_better_pct,
                        row.aupc_at_least_pct,
                        row.instances
                    );
                }
            }
            println!("wrote {} and {}", r.assessments.display(), r.comparison.display());
        }
        Command::Study { config, seed, output_dir } => {
            let mut cfg = match config {
                Some(p) => config::load_study_config(&p)?,
                None => StudyConfig::default(),
            };
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            cfg.output_dir = output_dir.unwrap_or(cfg.output_dir);
            let r = commands::study(&cfg)?;
            let m = &r.manifest;
            println!(
                "{} seeds in {:.1} s: full covers both in {}, partial misses one in {}",
                cfg.seeds.len(),
                m.wall_time_s,
                m.full_covers_both,
                m.partial_misses_any
            );
            println!("wrote {}", r.manifest_path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gangtrack: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
