use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use specpart_cli::classify_cmd::classify_run;
use specpart_cli::driver::{resume, run_config, Overrides, RunOutcome};
use specpart_cli::export::export_run;
use specpart_cli::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "specpart", version, about = "Numerically optimal spectral partitions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Flags {
    /// Seed for the random initial densities.
    #[arg(long)]
    seed: Option<u64>,
    /// Iteration cap per continuation level.
    #[arg(long = "max-iter")]
    max_iter: Option<usize>,
    /// Output directory.
    #[arg(long)]
    output: Option<PathBuf>,
}

impl From<Flags> for Overrides {
    fn from(f: Flags) -> Self {
        Overrides {
            seed: f.seed,
            max_iter: f.max_iter,
            output: f.output,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a partition described by a TOML configuration.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Continue an interrupted run from its checkpoint.
    Resume {
        checkpoint: PathBuf,
        #[command(flatten)]
        flags: Flags,
    },
    /// Count cell neighbors and, in 3D, group cells by spectral signature.
    Classify { run_dir: PathBuf },
    /// Write labels, boundaries, meshes and operators of a run.
    Export { run_dir: PathBuf },
}

fn summarize(out: &RunOutcome) {
    let r = &out.report;
    println!(
        "{} iterations ({} accepted), stopped: {:?}",
        r.iterations, r.accepted_steps, r.stop_reason
    );
    println!("energy {:.10}", r.energy);
    println!(
        "degrees of freedom {}, restricted problem size min/mean/max {}/{:.1}/{}",
        r.degrees_of_freedom, r.restricted.min, r.restricted.mean, r.restricted.max
    );
    println!("results in {}", out.directory.display());
}

fn post_process(out: &RunOutcome) -> CliResult<()> {
    let cfg = &out.report.config.output;
    if cfg.classify {
        let c = classify_run(&out.directory)?;
        println!("neighbor histogram {:?}", c.neighbors.histogram);
        if let Some(s) = &c.spectral {
            println!("{} shape classes, sizes {:?}", s.class_count, s.class_sizes);
        }
    }
    if cfg.export {
        export_run(&out.directory)?;
    }
    Ok(())
}

fn dispatch(cli: Cli, interrupted: &AtomicBool) -> CliResult<()> {
    let stop = |_: &_| interrupted.load(Ordering::SeqCst);
    match cli.command {
        Command::Run { config, flags } => {
            let out = run_config(&config, &flags.into(), &stop)?;
            summarize(&out);
            post_process(&out)
        }
        Command::Resume { checkpoint, flags } => {
            let out = resume(&checkpoint, &flags.into(), &stop)?;
            summarize(&out);
            post_process(&out)
        }
        Command::Classify { run_dir } => {
            let c = classify_run(&run_dir)?;
            println!("{}", serde_json::to_string_pretty(&c.neighbors.histogram).unwrap_or_default());
            if let Some(s) = &c.spectral {
                println!("{} shape classes, sizes {:?}", s.class_count, s.class_sizes);
            }
            Ok(())
        }
        Command::Export { run_dir } => {
            for p in export_run(&run_dir)? {
                println!("{}", p.display());
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let interrupted = Arc::new(AtomicBool::new(false));
    {
        let flag = interrupted.clone();
        if let Err(e) = ctrlc::set_handler(move || flag.store(true, Ordering::SeqCst)) {
            eprintln!("warning: cannot install interrupt handler: {e}");
        }
    }
    match dispatch(cli, &interrupted) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Interrupted(path) = &e {
                eprintln!("resume with: specpart resume {}", path.display());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
