//! Experiment runner: parses JSON configs, dispatches to the library, and
//! writes machine-readable reports. Subcommands: `run`, `trace`,
//! `check-spectrum`. Exit codes: 0 success, 1 config/domain error,
//! 2 internal error.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use config::{build_instance, TaskConfig};
use ntlab_core::hilbert::all_projector_overlaps;
use ntlab_core::normality::{normality_report, TimeFractionOptions};
use ntlab_core::spectra::occupation_horizon;
use ntlab_core::typicality::{run_experiment, ExperimentOutput, TypicalityEstimate};

#[derive(Parser)]
#[command(name = "ntlab", version, about = "Normal-typicality experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON config file ({"task": "experiment" | "normality", ...}).
    config: PathBuf,
    /// Directory for report.json, manifest.json, and CSV traces.
    #[arg(long, default_value = ".")]
    output_dir: PathBuf,
    /// Overrides the config's master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Caps the worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment or normality config and write report.json.
    Run(RunArgs),
    /// Write per-time occupation curves (occupation.csv) and tolerance
    /// bands (bands.json) for one instance.
    Trace(RunArgs),
    /// Print the degeneracy/resonance report of a spectrum file as JSON.
    CheckSpectrum {
        /// JSON file: either a flat array of energies or
        /// {"energies": [...], "degeneracy_tol": ..., "resonance_tol": ...}.
        spectrum: PathBuf,
    },
}

enum CliError {
    /// Malformed config or violated domain precondition (exit 1).
    Config(String),
    /// I/O or serialization failure (exit 2).
    Internal(String),
}

impl From<ntlab_core::Error> for CliError {
    fn from(e: ntlab_core::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

type CliResult<T> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => with_threads(&args, cmd_run),
        Command::Trace(args) => with_threads(&args, cmd_trace),
        Command::CheckSpectrum { spectrum } => cmd_check_spectrum(&spectrum),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn with_threads(args: &RunArgs, body: fn(&RunArgs) -> CliResult<()>) -> CliResult<()> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Internal(format!("thread pool: {e}")))?;
    }
    body(args)
}

fn read_config(args: &RunArgs) -> CliResult<TaskConfig> {
    let text = fs::read_to_string(&args.config)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    let mut task: TaskConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
    if let Some(seed) = args.seed {
        *task.master_seed_mut() = seed;
    }
    Ok(task)
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool_version: &'a str,
    config_echo: &'a TaskConfig,
    started: String,
    finished: String,
    outputs: Vec<String>,
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| CliError::Internal(format!("serializing {name}: {e}")))?;
    bytes.push(b'\n');
    fs::write(dir.join(name), bytes)
        .map_err(|e| CliError::Internal(format!("writing {name}: {e}")))
}

/// 17 significant digits, '.' decimal separator.
fn fmt_value(x: f64) -> String {
    format!("{x:.16e}")
}

fn finish_manifest(
    dir: &Path,
    task: &TaskConfig,
    started: String,
    mut outputs: Vec<String>,
) -> CliResult<()> {
    outputs.push("manifest.json".into());
    let manifest = RunManifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        config_echo: task,
        started,
        finished: timestamp(),
        outputs,
    };
    write_json(dir, "manifest.json", &manifest)
}

fn ensure_output_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("{}: {e}", dir.display())))
}

fn cmd_run(args: &RunArgs) -> CliResult<()> {
    let task = read_config(args)?;
    ensure_output_dir(&args.output_dir)?;
    let started = timestamp();
    let mut outputs = vec!["report.json".into()];

    match &task {
        TaskConfig::Experiment(config) => {
            let output = run_experiment(config)?;
            write_json(&args.output_dir, "report.json", &output)?;
            if let ExperimentOutput::Estimate(est) = &output {
                if let Some(records) = &est.per_trial_records {
                    write_trials_csv(&args.output_dir, est, records)?;
                    outputs.push("trials.csv".into());
                }
            }
        }
        TaskConfig::Normality(request) => {
            let instance = build_instance(
                request.dimension,
                &request.dims,
                &request.spectrum,
                &request.decomposition,
                &request.state,
                request.seed,
            )?;
            let params = request.params.to_params(request.dims.len())?;
            let time = if request.compute_time_fraction {
                Some(TimeFractionOptions {
                    t_max: occupation_horizon(&instance.spectrum, request.cycles)?,
                    n_samples: request.n_samples,
                    seed: request.seed.global(3),
                    convergence_check: request.convergence_check,
                })
            } else {
                None
            };
            let report = normality_report(
                &instance.state,
                &instance.spectrum,
                &instance.decomposition,
                &params,
                time,
            )?;
            for block in &report.per_block {
                if let (Some(f), Some(f2)) = (block.time_fraction, block.time_fraction_doubled_t) {
                    if (f - f2).abs() > 0.01 {
                        eprintln!(
                            "warning: block {} time fraction moved from {f:.4} to {f2:.4} when doubling the horizon; increase cycles or n_samples",
                            block.block_index
                        );
                    }
                }
            }
            write_json(&args.output_dir, "report.json", &report)?;
        }
        TaskConfig::Trace(_) => {
            return Err(CliError::Config(
                "task \"trace\" belongs to the `trace` subcommand".into(),
            ))
        }
    }
    finish_manifest(&args.output_dir, &task, started, outputs)
}

fn write_trials_csv(
    dir: &Path,
    est: &TypicalityEstimate,
    records: &[ntlab_core::typicality::TrialRecord],
) -> CliResult<()> {
    let mut text = String::from("trial");
    for label in &est.trial_value_labels {
        text.push(',');
        text.push_str(label);
    }
    text.push_str(",success\n");
    for record in records {
        text.push_str(&record.trial.to_string());
        for v in &record.values {
            text.push(',');
            text.push_str(&fmt_value(*v));
        }
        text.push(',');
        text.push_str(if record.success { "1" } else { "0" });
        text.push('\n');
    }
    fs::write(dir.join("trials.csv"), text)
        .map_err(|e| CliError::Internal(format!("writing trials.csv: {e}")))
}

#[derive(Serialize)]
struct Bands {
    epsilon: f64,
    /// `d_nu / D` per block.
    fractions: Vec<f64>,
    /// Half-width `eps * sqrt(d_nu / (N D))` per block.
    von_neumann_halfwidth: Vec<f64>,
    /// Half-width `eps * d_nu / D` per block.
    strong_halfwidth: Vec<f64>,
}

fn cmd_trace(args: &RunArgs) -> CliResult<()> {
    let task = read_config(args)?;
    let request = match &task {
        TaskConfig::Trace(request) => request,
        _ => {
            return Err(CliError::Config(
                "the `trace` subcommand expects a config with task \"trace\"".into(),
            ))
        }
    };
    if request.n_samples < 2 {
        return Err(CliError::Config(format!(
            "n_samples: need at least 2 grid points, got {}",
            request.n_samples
        )));
    }
    ensure_output_dir(&args.output_dir)?;
    let started = timestamp();

    let instance = build_instance(
        request.dimension,
        &request.dims,
        &request.spectrum,
        &request.decomposition,
        &request.state,
        request.seed,
    )?;
    let t_max = match request.t_max {
        Some(t) if t > 0.0 => t,
        Some(t) => {
            return Err(CliError::Config(format!("t_max: must be positive, got {t}")));
        }
        None => occupation_horizon(&instance.spectrum, request.cycles)?,
    };

    let projs = all_projector_overlaps(&instance.decomposition)?;
    let n = request.n_samples;
    let mut text = String::from("t");
    for nu in 1..=projs.len() {
        text.push_str(&format!(",occ_{nu}"));
    }
    text.push('\n');
    for k in 0..n {
        let t = t_max * k as f64 / (n - 1) as f64;
        text.push_str(&fmt_value(t));
        for p in &projs {
            let occ =
                ntlab_core::macro_occupation_at_time(&instance.state, &instance.spectrum, p, t)?;
            text.push(',');
            text.push_str(&fmt_value(occ));
        }
        text.push('\n');
    }
    fs::write(args.output_dir.join("occupation.csv"), text)
        .map_err(|e| CliError::Internal(format!("writing occupation.csv: {e}")))?;

    let params = request.params.to_params(request.dims.len())?;
    let dim = request.dimension as f64;
    let bands = Bands {
        epsilon: params.epsilon,
        fractions: request.dims.iter().map(|&d| d as f64 / dim).collect(),
        von_neumann_halfwidth: request
            .dims
            .iter()
            .map(|&d| params.epsilon * (d as f64 / (params.blocks as f64 * dim)).sqrt())
            .collect(),
        strong_halfwidth: request
            .dims
            .iter()
            .map(|&d| params.epsilon * d as f64 / dim)
            .collect(),
    };
    write_json(&args.output_dir, "bands.json", &bands)?;

    finish_manifest(
        &args.output_dir,
        &task,
        started,
        vec!["occupation.csv".into(), "bands.json".into()],
    )
}

/// Spectrum file: a flat array of energies, or an object with explicit
/// tolerances.
#[derive(serde::Deserialize)]
#[serde(untagged)]
enum SpectrumFile {
    Flat(Vec<f64>),
    Tagged {
        energies: Vec<f64>,
        #[serde(default)]
        degeneracy_tol: Option<f64>,
        #[serde(default)]
        resonance_tol: Option<f64>,
    },
}

fn cmd_check_spectrum(path: &Path) -> CliResult<()> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let file: SpectrumFile = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let spectrum = match file {
        SpectrumFile::Flat(energies) => {
            ntlab_core::EnergySpectrum::with_default_tolerances(energies)?
        }
        SpectrumFile::Tagged {
            energies,
            degeneracy_tol,
            resonance_tol,
        } => match (degeneracy_tol, resonance_tol) {
            (None, None) => ntlab_core::EnergySpectrum::with_default_tolerances(energies)?,
            (d, r) => {
                let span = energies.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - energies.iter().cloned().fold(f64::INFINITY, f64::min);
                let fallback = ntlab_core::EnergySpectrum::DEFAULT_TOL_FACTOR * span;
                ntlab_core::EnergySpectrum::new(
                    energies,
                    d.unwrap_or(fallback),
                    r.unwrap_or(fallback),
                )?
            }
        },
    };
    let report = ntlab_core::check_spectrum(&spectrum);
    let text = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::Internal(format!("serializing report: {e}")))?;
    println!("{text}");
    Ok(())
}
