use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use arearemap::experiment::{self, ExperimentConfig};
use arearemap::Result;

/// Area-preserving vorticity experiments.
#[derive(Parser)]
#[command(name = "arearemap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a compiled-in preset or a config file.
    Run(RunArgs),
    /// Compare the outputs of two runs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the compiled-in presets, or print one.
    Presets { name: Option<String> },
}

#[derive(Args)]
struct RunArgs {
    /// Name of a compiled-in preset (see `arearemap presets`).
    #[arg(long, conflicts_with = "config", required_unless_present = "config")]
    preset: Option<String>,
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; defaults to the config's `output.dir`, then `out/<name>`.
    #[arg(long, env = "AREAREMAP_OUT")]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Override the number of time steps.
    #[arg(long)]
    steps: Option<usize>,
}

fn run(args: RunArgs) -> Result<()> {
    let mut cfg = match (&args.preset, &args.config) {
        (Some(name), _) => experiment::preset(name)?,
        (None, Some(path)) => ExperimentConfig::load(path)?,
        (None, None) => unreachable!("clap requires one of --preset/--config"),
    };
    if let Some(steps) = args.steps {
        cfg.scheme.steps = steps;
        cfg.validate()?;
    }
    let out = args
        .out
        .or_else(|| cfg.output.dir.clone())
        .unwrap_or_else(|| PathBuf::from("out").join(&cfg.name));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.max(1))
        .build()
        .map_err(|e| arearemap::Error::Config(format!("thread pool: {e}")))?;
    let summary = pool.install(|| experiment::run_experiment(&cfg, &out))?;
    print!("{}", summary.to_text());
    println!("output={}", out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Compare { a, b, out } => experiment::compare(&a, &b).and_then(|report| {
            let text = report.to_string();
            print!("{text}");
            if let Some(path) = out {
                std::fs::write(path, text)?;
            }
            Ok(())
        }),
        Command::Presets { name: None } => {
            for p in experiment::PRESETS {
                println!("{p}");
            }
            Ok(())
        }
        Command::Presets { name: Some(name) } => match experiment::preset_text(&name) {
            Some(text) => {
                print!("{text}");
                Ok(())
            }
            None => experiment::preset(&name).map(|_| ()),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
