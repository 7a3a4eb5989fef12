use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use paq_core::harness::{
    aggregate, emit_csv, emit_plot, run_diagnostics, run_experiment, run_scale_check, ExperimentConfig, ExperimentKind,
};
use paq_core::Error;

#[derive(Parser)]
#[command(name = "paq", version, about = "Metric learning from perceptual adjustment queries: simulation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare PAQ with pairwise, triplet and ranking queries on noiseless oracles.
    CompareQueries(Common),
    /// Sweep N against d, r or m with the full averaging/truncation pipeline.
    Sweep(Common),
    /// Monte Carlo checks of the bias and inverse-moment identities.
    Diagnose(Common),
    /// Check that scaling (y, η↑, Σ*) scales the estimate by the same factor.
    ScaleCheck(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's output_dir.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides the config's master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    threads: Option<usize>,
    /// Write zero wall times so that reruns give byte-identical CSV files.
    #[arg(long)]
    no_timing: bool,
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Io(_) => 1,
        _ => 3,
    }
}

fn load(common: &Common, allowed: &[ExperimentKind]) -> Result<(ExperimentConfig, PathBuf), Error> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    if !allowed.contains(&cfg.experiment) {
        return Err(Error::Config(format!("experiment {} does not match this command", cfg.experiment.as_str())));
    }
    let out = common.out.clone().unwrap_or_else(|| cfg.output_dir());
    fs::create_dir_all(&out)?;
    Ok((cfg, out))
}

fn write_json<T: serde::Serialize>(value: &T, path: &Path) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn run_records(common: &Common, allowed: &[ExperimentKind]) -> Result<(), Error> {
    let (cfg, out) = load(common, allowed)?;
    let records = run_experiment(&cfg)?;
    let stem = cfg.experiment.as_str();
    let csv = out.join(format!("{stem}.csv"));
    let svg = out.join(format!("{stem}.svg"));
    emit_csv(&records, &csv, !common.no_timing)?;
    emit_plot(&records, &svg)?;
    for (series, points) in aggregate(&records) {
        for p in points {
            println!("{series:>16}  x={:<10} mean={:.4}  se={:.4}  n={}", p.x, p.mean, p.standard_error, p.count);
        }
    }
    println!("wrote {} and {}", csv.display(), svg.display());
    Ok(())
}

fn run(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::CompareQueries(c) => run_records(c, &[ExperimentKind::CompareQueries]),
        Command::Sweep(c) => run_records(c, &[ExperimentKind::SweepD, ExperimentKind::SweepR, ExperimentKind::SweepM]),
        Command::Diagnose(c) => {
            let (cfg, out) = load(c, &[ExperimentKind::Diagnostics])?;
            let summary = run_diagnostics(&cfg)?;
            for line in &summary.checks {
                println!(
                    "{:<24} estimate={:.6e} target={:.6e} se={:.3e} z={:.2}",
                    line.name, line.estimate, line.target, line.standard_error, line.z_score
                );
            }
            println!(
                "truncation: {} of {} responses capped ({:.4})",
                summary.truncation_hits, summary.truncation_n, summary.truncation_hit_rate
            );
            let path = out.join("diagnostics.json");
            write_json(&summary, &path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::ScaleCheck(c) => {
            let (cfg, out) = load(c, &[ExperimentKind::ScaleCheck])?;
            let lines = run_scale_check(&cfg)?;
            for l in &lines {
                println!("c={:<8} relative deviation={:.3e}", l.c, l.relative_deviation);
            }
            let path = out.join("scale_check.json");
            write_json(&lines, &path)?;
            println!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn threads(cli: &Cli) -> Option<usize> {
    match &cli.command {
        Command::CompareQueries(c) | Command::Sweep(c) | Command::Diagnose(c) | Command::ScaleCheck(c) => c.threads,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(k) = threads(&cli) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(k.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
