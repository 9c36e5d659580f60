use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qlyap::error::Error;
use qlyap::experiment::{
    ConfigFile, ExperimentConfig, ensure_out_dir, parse_state_vector, run_census, run_check,
    run_simulate, run_track, write_json, write_trajectories_csv,
};
use qlyap::state::DensityMatrix;

/// Lyapunov feedback control of density operators: diagnostics, batch
/// experiments, stationary-state census, and trajectory tracking.
#[derive(Parser)]
#[command(name = "qlyap", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// TOML config file (see README for the schema).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named model preset; overrides the config's model section.
    #[arg(long)]
    preset: Option<String>,
    /// Output directory for CSV/JSON artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    /// Number of Haar-random initial states.
    #[arg(long)]
    samples: Option<usize>,
    /// Base RNG seed; sample `i` uses `seed + i`.
    #[arg(long)]
    seed: Option<u64>,
    /// Integration horizon.
    #[arg(long)]
    t_final: Option<f64>,
    /// Worker threads for the sample batch (0 = all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Model diagnostics: regularity, connectivity, target class and counts.
    Check {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Batch of closed-loop trajectories toward the configured target.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        batch: BatchArgs,
    },
    /// Classify every diagonal stationary state of a stationary target.
    Census {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Track a (pseudo-)pure target; reports its exceptionality first.
    Track {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        batch: BatchArgs,
        /// Target state vector, e.g. "1,0,0,2" or "1,1i,0" (normalized).
        #[arg(long)]
        target: Option<String>,
        /// Pure-component weight for a pseudo-pure target (default 1 = pure).
        #[arg(long)]
        weight: Option<f64>,
    },
}

fn load_config(common: &CommonArgs) -> Result<ExperimentConfig, Error> {
    let file = match &common.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    if common.config.is_none() && common.preset.is_none() {
        return Err(Error::Config("pass --config PATH and/or --preset NAME".into()));
    }
    let mut cfg = ExperimentConfig::resolve(&file, common.preset.as_deref())?;
    if let Some(dir) = &common.out {
        cfg.out_dir = Some(dir.clone());
    }
    Ok(cfg)
}

fn apply_batch_args(cfg: &mut ExperimentConfig, batch: &BatchArgs) {
    if let Some(n) = batch.samples {
        cfg.n_samples = n;
    }
    if let Some(s) = batch.seed {
        cfg.seed = s;
    }
    if let Some(t) = batch.t_final {
        cfg.integrator.t_final = t;
    }
    if let Some(j) = batch.jobs {
        cfg.jobs = j;
    }
}

fn write_batch_outputs(
    cfg: &ExperimentConfig,
    summary: &qlyap::experiment::BatchSummary,
    batch: &qlyap::experiment::BatchTrajectories,
) -> Result<(), Error> {
    if let Some(dir) = &cfg.out_dir {
        ensure_out_dir(dir)?;
        if cfg.write_csv && cfg.gzip {
            qlyap::experiment::write_trajectories_csv_gz(&dir.join("trajectories.csv.gz"), batch)?;
        } else if cfg.write_csv {
            write_trajectories_csv(&dir.join("trajectories.csv"), batch)?;
        }
        if cfg.write_json {
            write_json(&dir.join("summary.json"), summary)?;
        }
    }
    Ok(())
}

fn print_batch_summary(summary: &qlyap::experiment::BatchSummary) {
    if let Some(e) = &summary.exceptionality {
        println!(
            "target: pseudo-pure exceptional = {} (V_max = {:.4})",
            e.exceptional, e.v_max
        );
    }
    println!(
        "{}: {} samples -> {} converged, {} flatlined, {} undecided, {} failed",
        summary.command,
        summary.n_samples,
        summary.counts.converged,
        summary.counts.flatlined,
        summary.counts.undecided,
        summary.counts.failed
    );
    if let Some(n) = summary.n_intermediate {
        println!("final V strictly between 1% and 99% of V_max: {n} samples");
    }
    for (id, msg) in &summary.errors {
        if *id == usize::MAX {
            eprintln!("note: {msg}");
        } else {
            eprintln!("sample {id} failed: {msg}");
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Check { common } => {
            let cfg = load_config(&common)?;
            let report = run_check(&cfg)?;
            print!("{}", report.render());
            if let Some(dir) = &cfg.out_dir {
                ensure_out_dir(dir)?;
                write_json(&dir.join("check.json"), &report)?;
            }
            Ok(())
        }
        Command::Simulate { common, batch } => {
            let mut cfg = load_config(&common)?;
            apply_batch_args(&mut cfg, &batch);
            if cfg.integrator.t_final <= 0.0 {
                return Err(Error::Config("t_final must be positive".into()));
            }
            let (summary, trajectories) = run_simulate(&cfg)?;
            print_batch_summary(&summary);
            write_batch_outputs(&cfg, &summary, &trajectories)
        }
        Command::Census { common } => {
            let cfg = load_config(&common)?;
            let report = run_census(&cfg)?;
            print!("{}", report.render());
            if let Some(dir) = &cfg.out_dir {
                ensure_out_dir(dir)?;
                write_json(&dir.join("census.json"), &report)?;
            }
            Ok(())
        }
        Command::Track { common, batch, target, weight } => {
            let mut cfg = load_config(&common)?;
            apply_batch_args(&mut cfg, &batch);
            if let Some(text) = &target {
                let psi = parse_state_vector(text)?;
                if psi.len() != cfg.model.dim() {
                    return Err(Error::Config(format!(
                        "--target has {} components, model dimension is {}",
                        psi.len(),
                        cfg.model.dim()
                    )));
                }
                let rho = DensityMatrix::pseudo_pure(&psi, weight.unwrap_or(1.0))
                    .map_err(|e| Error::Config(format!("--target: {e}")))?;
                cfg = cfg.with_target(rho)?;
            }
            let (summary, trajectories) = run_track(&cfg)?;
            print_batch_summary(&summary);
            write_batch_outputs(&cfg, &summary, &trajectories)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
