use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ldg_plates::config::RunConfig;
use ldg_plates::output::ArtifactWriter;
use ldg_plates::presets::{run_experiment, run_level, LEVEL_HEADER, LEVEL_PRESETS, PRESETS};
use ldg_plates::verify::{gel_curvatures, run_suite};

/// Environment variable holding the root of relative output directories.
const OUTPUT_ROOT_VAR: &str = "LDG_PLATES_OUTPUT";

#[derive(Parser)]
#[command(
    name = "ldg-plates",
    version,
    about = "LDG gradient flows for prestrained plates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a preset or a config file and write VTK, CSV and summary files.
    Run {
        #[arg(long, conflicts_with = "config")]
        preset: Option<String>,
        /// Refinement level of level presets.
        #[arg(long, conflicts_with = "config")]
        level: Option<u32>,
        /// TOML config; keys override the preset it names.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory, relative to the output root.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Write zero wall times for reproducible logs.
        #[arg(long)]
        deterministic: bool,
    },
    /// Run the property suite.
    Verify,
    /// Sweep refinement levels of a level preset.
    Table {
        #[arg(long, default_value = "vertical_load")]
        preset: String,
        #[arg(long, value_delimiter = ',', default_values_t = [3u32, 4, 5])]
        levels: Vec<u32>,
        /// Stabilization parameters gamma0 = gamma1 to sweep.
        #[arg(long, value_delimiter = ',')]
        gamma: Vec<f64>,
    },
    /// List presets.
    Presets,
}

fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("output"), PathBuf::from)
}

fn run(
    preset: Option<String>,
    level: Option<u32>,
    config: Option<PathBuf>,
    output: Option<PathBuf>,
    deterministic: bool,
) -> ldg_plates::Result<()> {
    let mut cfg = match (&config, &preset) {
        (Some(path), _) => RunConfig::from_file(path)?,
        (None, Some(name)) => RunConfig::from_preset(name, level)?,
        (None, None) => {
            return Err(ldg_plates::Error::Config(
                "either --preset or --config is required".into(),
            ));
        }
    };
    cfg.deterministic |= deterministic;
    if output.is_some() {
        cfg.output_dir = output;
    }
    cfg.validate()?;
    let dir = cfg
        .output_dir
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.experiment.name));
    let dir = if dir.is_absolute() {
        dir
    } else {
        output_root().join(dir)
    };
    let artifacts = ArtifactWriter::new(&dir, cfg.deterministic)?;
    artifacts.text("config.toml", &cfg.to_toml()?)?;
    let outcome = run_experiment(&cfg.experiment, Some(&artifacts))?;
    print!("{}", outcome.summary());
    println!("output: {}", dir.display());
    Ok(())
}

fn verify() -> bool {
    let checks = run_suite();
    for c in &checks {
        println!("{c}");
    }
    match gel_curvatures() {
        Ok([pos, neg, flat]) => {
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            println!(
                "Gaussian curvature: gel_disc {:.10}, gel_disc_hyperbolic {:.10}, flat {:.10}",
                mean(&pos),
                mean(&neg),
                mean(&flat)
            );
        }
        Err(e) => println!("Gaussian curvature: {e}"),
    }
    let failed = checks.iter().filter(|c| !c.passed()).count();
    println!("{} checks, {failed} failed", checks.len());
    failed == 0
}

fn table(preset: &str, levels: &[u32], gammas: &[f64]) -> ldg_plates::Result<()> {
    if !LEVEL_PRESETS.contains(&preset) {
        return Err(ldg_plates::Error::Config(format!(
            "preset `{preset}` has no refinement levels"
        )));
    }
    let gammas: Vec<Option<f64>> = if gammas.is_empty() {
        vec![None]
    } else {
        gammas.iter().copied().map(Some).collect()
    };
    for g in gammas {
        match g {
            Some(g) => println!("{preset}, gamma0 = gamma1 = {g}"),
            None => println!("{preset}"),
        }
        println!("{LEVEL_HEADER}");
        for &l in levels {
            println!("{}", run_level(preset, l, g)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if matches!(cli.command, Command::Verify) {
        "error"
    } else {
        "warn"
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Run {
            preset,
            level,
            config,
            output,
            deterministic,
        } => run(preset, level, config, output, deterministic),
        Command::Verify => {
            return if verify() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            };
        }
        Command::Table {
            preset,
            levels,
            gamma,
        } => table(&preset, &levels, &gamma),
        Command::Presets => {
            for p in PRESETS {
                println!("{p}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
