use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::{require_input, RunConfig};
use output::{sha256_hex, write_atomic, InputRecord, Manifest, RunLog, Versions};

#[derive(Parser, Debug)]
#[command(name = "cam", version, about = "Complex angular momentum analysis of scattering matrices")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true, env = "CAM_REGGE_CONFIG")]
    config: Option<PathBuf>,
    /// Directory for default-named outputs and the manifest.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Suppress warnings on stderr (they still go to the manifest).
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate an S-matrix table from a pole model.
    Synth {
        spec: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Regge poles in the complex J plane at every energy.
    PolesJ {
        table: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Complex-energy poles at every integer J.
    PolesE {
        table: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Link poles into trajectories.
    Track {
        poles: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Split the integral cross section into background and pole terms.
    Decompose {
        table: Option<PathBuf>,
        #[arg(long)]
        trajectories: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Where to write the integer-crossing features.
        #[arg(long)]
        fano: Option<PathBuf>,
        /// Skip the integer-crossing features.
        #[arg(long)]
        no_fano: bool,
    },
    /// Fit the linear map between complex energies and Regge trajectories.
    Map {
        ce_trajectories: Option<PathBuf>,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Where to write the predicted Regge trajectory.
        #[arg(long)]
        regge: Option<PathBuf>,
        #[arg(long)]
        label: Option<String>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Synth { .. } => "synth",
            Command::PolesJ { .. } => "poles-j",
            Command::PolesE { .. } => "poles-e",
            Command::Track { .. } => "track",
            Command::Decompose { .. } => "decompose",
            Command::Map { .. } => "map",
        }
    }
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;

fn exit_code(err: &anyhow::Error) -> u8 {
    let numerical = err
        .chain()
        .any(|e| e.downcast_ref::<cam_core::Error>().is_some_and(|e| e.is_numerical()));
    if numerical {
        EXIT_NUMERICAL
    } else {
        EXIT_VALIDATION
    }
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = &cli.out_dir {
        config.out_dir = dir.clone();
    }
    if cli.jobs.is_some() {
        config.jobs = cli.jobs;
    }
    if let Command::Decompose { no_fano: true, .. } = cli.command {
        config.decomposition.fano = false;
    }
    if let Command::Map { label: Some(label), .. } = &cli.command {
        config.map.label = Some(label.clone());
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: &Cli, config: &RunConfig, log: &mut RunLog) -> Result<()> {
    if let Some(jobs) = config.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("starting the worker pool")?;
    }
    let inputs = &config.inputs;
    match &cli.command {
        Command::Synth { spec, output } => {
            let spec = require_input(spec.as_ref(), inputs.spec.as_ref(), "spec")?;
            commands::synth(&spec, output.as_ref(), config, log)
        }
        Command::PolesJ { table, output } => {
            let table = require_input(table.as_ref(), inputs.table.as_ref(), "table")?;
            commands::poles_j(&table, output.as_ref(), config, log)
        }
        Command::PolesE { table, output } => {
            let table = require_input(table.as_ref(), inputs.table.as_ref(), "table")?;
            commands::poles_e(&table, output.as_ref(), config, log)
        }
        Command::Track { poles, output } => {
            let poles = require_input(poles.as_ref(), inputs.poles.as_ref(), "poles")?;
            commands::track_cmd(&poles, output.as_ref(), config, log)
        }
        Command::Decompose { table, trajectories, output, fano, .. } => {
            let table = require_input(table.as_ref(), inputs.table.as_ref(), "table")?;
            let trajectories = match trajectories.as_ref().or(inputs.trajectories.as_ref()) {
                Some(p) => Some(require_input(Some(p), None, "trajectories")?),
                None => None,
            };
            commands::decompose_cmd(&table, trajectories.as_deref(), output.as_ref(), fano.as_ref(), config, log)
        }
        Command::Map { ce_trajectories, output, regge, .. } => {
            let ce = require_input(ce_trajectories.as_ref(), inputs.ce_trajectories.as_ref(), "ce_trajectories")?;
            commands::map_cmd(&ce, output.as_ref(), regge.as_ref(), config, log)
        }
    }
}

fn conventions() -> serde_json::Value {
    serde_json::json!({
        "energy_unit": "meV",
        "cross_section_unit": "angstrom^2",
        "lambda": "J + 1/2",
        "hbar2_over_2mu_meV_angstrom2_amu": cam_core::scatter::HBAR2_OVER_2MU,
        "background_lower_limit": "lambda = J_min + 1/2",
        "upper_half_plane": "Im lambda > 0 for Regge poles, Im E < 0 for complex-energy poles",
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let mut log = RunLog { quiet: cli.quiet, ..RunLog::default() };

    let (config, outcome) = match effective_config(&cli) {
        Ok(config) => {
            let outcome = run(&cli, &config, &mut log);
            (config, outcome)
        }
        Err(e) => {
            let mut fallback = RunConfig::default();
            if let Some(dir) = &cli.out_dir {
                fallback.out_dir = dir.clone();
            }
            (fallback, Err(e))
        }
    };
    let code = match &outcome {
        Ok(()) => 0,
        Err(e) => exit_code(e),
    };
    if let Err(e) = &outcome {
        eprintln!("error: {e:#}");
    }

    let config_value = serde_json::to_value(&config).unwrap_or(serde_json::Value::Null);
    let config_bytes = serde_json::to_vec(&config_value).unwrap_or_default();
    let mut inputs: Vec<InputRecord> = Vec::new();
    if let Some(path) = &cli.config {
        inputs.push(InputRecord::of(path));
    }
    inputs.extend(log.inputs.iter().map(|p| InputRecord::of(p)));
    let manifest = Manifest {
        command: name.to_string(),
        status: if code == 0 { "ok" } else { "failed" },
        exit_code: code as i32,
        error: outcome.as_ref().err().map(|e| format!("{e:#}")),
        versions: Versions { cam_cli: env!("CARGO_PKG_VERSION"), cam_core: cam_core::VERSION },
        config_sha256: sha256_hex(&config_bytes),
        config: config_value,
        inputs,
        outputs: log.outputs.iter().map(|p| p.display().to_string()).collect(),
        conventions: conventions(),
        warnings: log.warnings.clone(),
    };
    let manifest_path = config.out_dir.join(format!("{name}.manifest.json"));
    let written = write_atomic(&manifest_path, |w| {
        serde_json::to_writer_pretty(&mut *w, &manifest)?;
        writeln!(w)?;
        Ok(())
    });
    if let Err(e) = written {
        eprintln!("error: manifest not written: {e:#}");
        return ExitCode::from(code.max(EXIT_VALIDATION));
    }
    ExitCode::from(code)
}
