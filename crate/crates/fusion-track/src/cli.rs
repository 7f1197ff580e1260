//! `fusion-track` command line.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use fusion_track_core::fogsim::{simulate_session, SessionResult};
use fusion_track_core::runner::{check_requirement, RequirementCheck, SweepKey, SweepSpec};
use fusion_track_core::scenario::{builtin_requirement_profiles, find_profile, RequirementProfile};
use fusion_track_core::stats::ErrorReport;
use rayon::prelude::*;

use crate::config::{Experiment, ScenarioFile};
use crate::export::{self, Metadata};
use crate::{parallel, AppError};

/// Deterministic EKF tracking of a highway vehicle from IMU and 5G range/AOA
/// observations, plus a fog positioning latency simulator.
#[derive(Debug, Parser)]
#[command(name = "fusion-track", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Input {
    /// JSON scenario document; library defaults when omitted.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Directory for result files; created if missing.
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
    /// Worker threads; defaults to the available hardware parallelism.
    #[arg(long, value_name = "N", value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Track the configured scenario and write per-epoch, summary and
    /// requirement CSVs.
    Run {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        output: Output,
        /// Runs pooled into the summary (seeds base, base^1, ...).
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        seeds: u64,
    },
    /// Run the ISD x N x mode grid of the `sweep` section.
    Sweep {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        output: Output,
        /// Also write every epoch of every run to epochs.csv.
        #[arg(long)]
        per_epoch: bool,
    },
    /// Simulate report latency and context transfers for each architecture
    /// of the `fog` section.
    Fogsim {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        output: Output,
    },
    /// Print the built-in requirement profiles.
    Profiles,
    /// Check a scenario document without running or writing anything.
    Validate {
        #[arg(long, value_name = "PATH")]
        config: PathBuf,
    },
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// One line per profile: name, accuracy, confidence level, velocity, density.
pub fn format_profile(p: &RequirementProfile) -> String {
    let accuracy = match p.accuracy_upper_m {
        Some(upper) => format!("{}-{} m", p.accuracy_m, upper),
        None => format!("{} m", p.accuracy_m),
    };
    let sigma = p.sigma_level.map(|s| s.label()).unwrap_or("σ unspecified");
    let density = match p.density_text {
        "N/A" => "N/A".to_string(),
        d => format!("{d} per km²"),
    };
    format!(
        "{}, {}, {}, velocity {} km/h, density {}",
        p.name, accuracy, sigma, p.velocity_text, density
    )
}

fn load(input: &Input) -> Result<Experiment, AppError> {
    let file = match &input.config {
        Some(path) => ScenarioFile::load(path)?,
        None => ScenarioFile::default(),
    };
    let mut experiment = file.experiment()?;
    if let Some(seed) = input.seed {
        experiment.scenario.seed = seed;
    }
    Ok(experiment)
}

fn prepare_out(dir: &Path) -> Result<(), AppError> {
    fs::create_dir_all(dir).map_err(|e| AppError::Output {
        path: dir.display().to_string(),
        source: e,
    })
}

fn profiles_for(experiment: &Experiment) -> Vec<&'static RequirementProfile> {
    match &experiment.requirements {
        Some(names) => names.iter().filter_map(|n| find_profile(n)).collect(),
        None => builtin_requirement_profiles().iter().collect(),
    }
}

fn checks(report: &ErrorReport, profiles: &[&'static RequirementProfile]) -> Vec<RequirementCheck> {
    profiles
        .iter()
        .map(|p| check_requirement(report, p))
        .collect()
}

fn threads(output: &Output) -> Option<usize> {
    output.jobs.map(|n| n as usize)
}

fn execute(command: Command) -> Result<(), AppError> {
    match command {
        Command::Profiles => {
            for p in builtin_requirement_profiles() {
                println!("{}", format_profile(p));
            }
            Ok(())
        }
        Command::Validate { config } => {
            let e = ScenarioFile::load(&config)?.experiment()?;
            let s = &e.scenario;
            let cells = e.sweep.isd_values.len() * e.sweep.n_values.len() * e.sweep.modes.len();
            println!(
                "ok: {} epochs, {} base stations, {} sweep cells x {} seeds, {} fog instances",
                s.epoch_count(),
                s.bs_count(),
                cells,
                e.sweep.seeds,
                e.topology.fog_instances.len()
            );
            Ok(())
        }
        Command::Run {
            input,
            output,
            seeds,
        } => {
            let e = load(&input)?;
            prepare_out(&output.out)?;
            let s = &e.scenario;
            let spec = SweepSpec {
                isd_values: vec![s.isd_m],
                n_values: vec![s.n_fused_bs],
                modes: vec![s.mode],
                seeds,
            };
            let result = parallel::sweep(s, &spec, threads(&output))?;
            export::write_epochs(&output.out.join("epochs.csv"), &result.runs)?;
            export::write_summary(&output.out.join("summary.csv"), &result.cells)?;
            let profiles = profiles_for(&e);
            let reqs: Vec<(SweepKey, Vec<RequirementCheck>)> = result
                .cells
                .iter()
                .map(|(k, r)| (*k, checks(r, &profiles)))
                .collect();
            export::write_requirements(&output.out.join("requirements.csv"), &reqs, false)?;
            Metadata::new("run", s, seeds).write(&output.out.join("metadata.json"))?;
            for (key, report) in &result.cells {
                log::info!(
                    "{} n={} isd={}: p90 {:.3} m",
                    key.mode,
                    key.n_bs,
                    key.isd_m,
                    report.percentile(90.0)
                );
            }
            Ok(())
        }
        Command::Sweep {
            input,
            output,
            per_epoch,
        } => {
            let e = load(&input)?;
            prepare_out(&output.out)?;
            let result = parallel::sweep(&e.scenario, &e.sweep, threads(&output))?;
            export::write_summary(&output.out.join("summary.csv"), &result.cells)?;
            let profiles = profiles_for(&e);
            let reqs: Vec<(SweepKey, Vec<RequirementCheck>)> = result
                .cells
                .iter()
                .map(|(k, r)| (*k, checks(r, &profiles)))
                .collect();
            export::write_requirements(&output.out.join("requirements.csv"), &reqs, true)?;
            if per_epoch {
                export::write_epochs(&output.out.join("epochs.csv"), &result.runs)?;
            }
            Metadata::new("sweep", &e.scenario, e.sweep.seeds)
                .write(&output.out.join("metadata.json"))?;
            Ok(())
        }
        Command::Fogsim { input, output } => {
            let e = load(&input)?;
            prepare_out(&output.out)?;
            let sessions: Vec<SessionResult> = parallel::with_pool(threads(&output), || {
                e.architectures
                    .par_iter()
                    .map(|&arch| simulate_session(&e.scenario, &e.topology, arch))
                    .collect::<Result<Vec<_>, _>>()
            })??;
            for s in &sessions {
                let name = format!("events_{}.csv", s.architecture.as_str());
                export::write_events(&output.out.join(name), &s.events)?;
            }
            export::write_latency_summary(&output.out.join("latency.csv"), &sessions)?;
            Metadata::new("fogsim", &e.scenario, 1).write(&output.out.join("metadata.json"))?;
            Ok(())
        }
    }
}
