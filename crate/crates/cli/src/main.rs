use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lprom::experiment::{ExperimentConfig, ExperimentRegistry, Pipeline, Scale, Stage, StageStatus};
use lprom::Error;

#[derive(Parser)]
#[command(name = "lprom", version, about = "Learning-based projection reduced order models for 1D transport PDEs")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Profile used when CONFIG names a registry entry.
    #[arg(long, global = true, default_value = "desk")]
    scale: String,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Artifact directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate training and test snapshots.
    Snapshots { config: String },
    /// Train the LP networks.
    Train { config: String },
    /// Build POD bases and singular spectra.
    Pod { config: String },
    /// Run the online stage for every mode and order.
    Rom { config: String },
    /// Tabulate E_average per mode and order.
    Compare { config: String },
    /// Singular spectra of the training snapshots.
    Spectrum { config: String },
    /// Every stage in order.
    Run { config: String },
    /// Print a resolved configuration as TOML.
    Config { config: String },
    /// List registry entries.
    List,
}

/// A TOML file when the path exists, otherwise a registry id.
fn resolve(spec: &str, g: &Global) -> lprom::Result<ExperimentConfig> {
    let mut cfg = if Path::new(spec).is_file() {
        ExperimentConfig::load(Path::new(spec))?
    } else {
        let scale: Scale = g.scale.parse()?;
        ExperimentRegistry::standard().get(spec)?.config(scale)
    };
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &g.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn stages(cmd: &Command) -> Vec<Stage> {
    match cmd {
        Command::Snapshots { .. } => vec![Stage::Snapshots],
        Command::Train { .. } => vec![Stage::Train],
        Command::Pod { .. } => vec![Stage::Pod],
        Command::Rom { .. } => vec![Stage::Rom],
        Command::Compare { .. } => vec![Stage::Compare],
        Command::Spectrum { .. } => vec![Stage::Spectrum],
        Command::Run { .. } => Stage::ALL.to_vec(),
        Command::Config { .. } | Command::List => Vec::new(),
    }
}

fn execute(cli: &Cli) -> lprom::Result<()> {
    if let Some(n) = cli.global.threads {
        rayon_pool(n)?;
    }
    let spec = match &cli.command {
        Command::List => {
            for e in ExperimentRegistry::standard().entries() {
                println!("{:<22} {}", e.id(), e.summary());
            }
            return Ok(());
        }
        Command::Config { config } => {
            print!("{}", resolve(config, &cli.global)?.to_toml()?);
            return Ok(());
        }
        Command::Snapshots { config }
        | Command::Train { config }
        | Command::Pod { config }
        | Command::Rom { config }
        | Command::Compare { config }
        | Command::Spectrum { config }
        | Command::Run { config } => config,
    };
    let mut pipeline = Pipeline::new(resolve(spec, &cli.global)?)?;
    for stage in stages(&cli.command) {
        let status = pipeline.run_stage(stage)?;
        println!("{}: {:?}", stage.name(), status);
        if status == StageStatus::Partial {
            for f in pipeline.manifest().failures.iter().filter(|f| f.stage == stage.name()) {
                println!("  failed {}: {}", f.item, f.error);
            }
        }
    }
    println!("artifacts in {}", pipeline.artifacts.root.display());
    Ok(())
}

fn rayon_pool(n: usize) -> lprom::Result<()> {
    lprom::set_threads(n).map_err(|e| Error::Config(format!("--threads: {e}")))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
