//! `evoprune` command-line driver.
//!
//! Exit codes: 0 success, 2 config error, 3 data or format error,
//! 4 optimization-stage error.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use evoprune::config::RunConfig;
use evoprune::moea::Engine;
use evoprune::phase2::AnchorRule;
use evoprune::pipeline::{cmd_phase1, cmd_phase2, cmd_pipeline, cmd_report, cmd_train};
use evoprune::{Error, ErrorClass, Result};

#[derive(Parser, Debug)]
#[command(name = "evoprune", version, about = "Two-phase evolutionary pruning of feedforward networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run config; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory shared by all stages.
    #[arg(long, global = true, default_value = "evoprune-out")]
    out: PathBuf,
    /// Engine (nsga2 or moead) for the stage being run; Phase 2 under `pipeline`.
    #[arg(long, global = true)]
    engine: Option<String>,
    /// Phase-1 row indices of the heavy and light anchors.
    #[arg(long, global = true, num_args = 2, value_names = ["HEAVY", "LIGHT"])]
    anchors: Option<Vec<usize>>,
    /// Worker threads for evaluation (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq)]
enum Command {
    /// Generate data, train the baseline and save a checkpoint.
    Train,
    /// Threshold search on the saved baseline.
    Phase1,
    /// Anchor selection and mask refinement.
    Phase2,
    /// Summary JSON and SVG plot from the exported fronts.
    Report,
    /// Run train, phase1, phase2 and report in order.
    Pipeline,
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let c = &cli.common;
    let mut cfg = match &c.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    if let Some(name) = &c.engine {
        let engine = Engine::from_str(name)?;
        match cli.command {
            Command::Phase1 => cfg.phase1.engine = engine,
            _ => cfg.phase2.engine = engine,
        }
    }
    if let Some(pair) = &c.anchors {
        cfg.anchors = AnchorRule::Manual {
            heavy: pair[0],
            light: pair[1],
        };
    }
    if c.jobs == Some(0) {
        return Err(Error::Config("--jobs must be at least 1".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = build_config(cli)?;
    let out = &cli.common.out;
    match cli.command {
        Command::Train => {
            let r = cmd_train(&cfg, out)?;
            println!("baseline validation accuracy: {:.4}", r.val_accuracy);
            println!("nonzero prunable weights: {}", r.nonzeros);
            println!("checkpoint: {}", r.checkpoint.display());
        }
        Command::Phase1 => println!("phase 1 front: {}", cmd_phase1(&cfg, out)?.display()),
        Command::Phase2 => println!("phase 2 front: {}", cmd_phase2(&cfg, out)?.display()),
        Command::Report => {
            let (summary, paths) = cmd_report(&cfg, out)?;
            let r = &summary.report;
            println!("phase 1 HV {:.6}, final HV {:.6}, delta {:+.6}", r.phase1_hv, r.final_hv, r.hv_delta);
            println!(
                "phase 2 solutions {}, in final front {}, dominating the light anchor {}",
                r.phase2_size, r.phase2_in_merged, r.dominating
            );
            println!("summary: {}", paths.summary.display());
            println!("plot: {}", paths.plot.display());
        }
        Command::Pipeline => println!("manifest: {}", cmd_pipeline(&cfg, out)?.display()),
    }
    Ok(())
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Config => 2,
        ErrorClass::DataOrFormat => 3,
        ErrorClass::Optimization => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = match cli.common.jobs {
        Some(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(Error::Config(format!("cannot start {n} worker threads: {e}"))),
        },
        _ => run(&cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
