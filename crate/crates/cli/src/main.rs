use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use oaprog::strategies::StrategyKind;
use oaprog_cli::config::SelectMode;
use oaprog_cli::{CliError, Pipeline, RunConfig, Stage};

#[derive(Parser)]
#[command(name = "oaprog", about = "Knee osteoarthritis progression modelling pipeline")]
struct Cli {
    /// Run configuration (TOML). Defaults are used for anything left out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overrides the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overrides `paths.out` (default `./oaprog-out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, env = "OAPROG_WORKERS")]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one stage.
    Run {
        stage: Stage,
        #[arg(long)]
        strategy: Option<StrategyKind>,
        #[arg(long)]
        mode: Option<SelectMode>,
        #[arg(long)]
        match_count: Option<bool>,
    },
    /// Run every stage in order.
    All {
        #[arg(long)]
        strategy: Option<StrategyKind>,
    },
    /// Print the effective configuration as TOML.
    Config,
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.paths.out = Some(out.clone());
    }
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    match &cli.command {
        Command::Run { strategy, mode, match_count, .. } => {
            if let Some(s) = strategy {
                config.strategy = *s;
            }
            if let Some(m) = mode {
                config.select.mode = *m;
            }
            if let Some(m) = match_count {
                config.select.match_count = *m;
            }
        }
        Command::All { strategy } => {
            if let Some(s) = strategy {
                config.strategy = *s;
            }
        }
        Command::Config => {
            config.validate()?;
            print!("{}", config.to_toml()?);
            return Ok(());
        }
    }
    let out = config.paths.out.clone().unwrap_or_else(|| PathBuf::from("oaprog-out"));
    let pipeline = Pipeline::new(config, &out)?;
    pipeline.out.write_text("config.toml", &pipeline.config.to_toml()?)?;
    let files = match cli.command {
        Command::Run { stage, .. } => pipeline.run(stage),
        Command::All { .. } => pipeline.run_all(),
        Command::Config => unreachable!(),
    };
    match files {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Err(e) => {
            let record = serde_json::to_string_pretty(&e.record()).expect("serializable record");
            let _ = pipeline.out.write_text("error.json", &format!("{record}\n"));
            Err(e)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::to_string(&e.record()).expect("serializable record");
            eprintln!("{record}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
