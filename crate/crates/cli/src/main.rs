use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qdcascade::config::{parse_config_with, preset, ExperimentKind, Overrides, RunConfig, PRESETS};
use qdcascade::formats::SortPolicy;
use qdcascade::reproduce::{reproduce_paper, ReproduceOptions, Scale};
use qdcascade::run::{analyze, simulate, TagFormat};
use qdcascade::Error;

/// Quantum-dot cascade photon source simulator and correlation analysis.
#[derive(Debug, Parser)]
#[command(name = "qdcascade", version)]
struct Cli {
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Named parameter preset (default: desk, or the config file's preset).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one experiment and write its time tags, histograms and report.
    Simulate {
        /// hbt, tomography, tpi, lifetime, power or coherence.
        experiment: String,
        /// Write time tags in the binary format.
        #[arg(long)]
        binary: bool,
    },
    /// Analyze time-tag or histogram files written by `simulate`.
    Analyze {
        /// Experiment the files belong to.
        #[arg(long, short)]
        experiment: String,
        /// Sort unsorted time-tag files instead of rejecting them.
        #[arg(long)]
        sort: bool,
        #[arg(required = true)]
        files: Vec<PathBuf>,
    },
    /// Run every experiment and analysis and write the full report.
    Reproduce {
        /// Short runs for a smoke test.
        #[arg(long)]
        quick: bool,
    },
    /// List or show parameter presets.
    Preset {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Debug, Subcommand)]
enum PresetAction {
    List,
    Show { name: String },
}

fn run_config(cli: &Cli, experiment: &str) -> Result<RunConfig, Error> {
    let text = match &cli.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let overrides = Overrides {
        experiment: Some(experiment.to_string()),
        preset: cli.preset.clone().or_else(|| cli.config.is_none().then(|| "desk".to_string())),
        seed: cli.seed,
        workers: cli.workers,
        out: cli.out.clone(),
    };
    parse_config_with(&text, &overrides)
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Simulate { experiment, binary } => {
            experiment.parse::<ExperimentKind>()?;
            let cfg = run_config(cli, experiment)?;
            let out = simulate(&cfg, if *binary { TagFormat::Binary } else { TagFormat::Csv })?;
            print!("{}", out.report.summary());
            for f in &out.files {
                println!("wrote {}", f.display());
            }
        }
        Command::Analyze { experiment, sort, files } => {
            let cfg = run_config(cli, experiment)?;
            let out = analyze(&cfg, files, if *sort { SortPolicy::Sort } else { SortPolicy::Reject })?;
            print!("{}", out.report.summary());
        }
        Command::Reproduce { quick } => {
            if cli.config.is_some() || cli.preset.as_deref().is_some_and(|p| p != "paper-default") {
                return Err(Error::Config {
                    location: "reproduce".into(),
                    message: "reproduce always uses the paper-default preset".into(),
                });
            }
            let outdir = cli.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            let opts = ReproduceOptions {
                seed: cli.seed.unwrap_or(0),
                outdir: Some(outdir.clone()),
                workers: cli.workers.unwrap_or(0),
                scale: if *quick { Scale::quick() } else { Scale::desk() },
            };
            let report = reproduce_paper(&opts)?;
            report.write(&outdir.join("report.json"))?;
            let summary = outdir.join("summary.txt");
            std::fs::write(&summary, report.summary()).map_err(|e| Error::Io(format!("{}: {e}", summary.display())))?;
            print!("{}", report.summary());
        }
        Command::Preset { action: PresetAction::List } => {
            for (name, description) in PRESETS {
                println!("{name:<14} {description}");
            }
        }
        Command::Preset { action: PresetAction::Show { name } } => {
            let p = preset(name)?;
            println!("{}", serde_json::to_string_pretty(&p).expect("preset serializes"));
        }
    }
    Ok(())
}

fn failure_json(e: &Error) -> serde_json::Value {
    let (step, inner) = match e {
        Error::Step { step, source } => (Some(step.as_str()), source.as_ref()),
        other => (None, other),
    };
    serde_json::json!({
        "error": {
            "kind": inner.kind(),
            "step": step,
            "message": inner.to_string(),
        }
    })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let json = serde_json::json!({
                "error": { "kind": "usage", "step": null, "message": e.kind().to_string() }
            });
            eprint!("{}", e.render());
            eprintln!("{json}");
            return ExitCode::from(2);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", failure_json(&e));
            ExitCode::FAILURE
        }
    }
}
