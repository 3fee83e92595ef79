use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use safeslope_cli::config::ExperimentConfig;
use safeslope_cli::experiment::{analyze, ground_truth, run_experiment};
use safeslope_cli::output;

#[derive(Parser)]
#[command(
    name = "safeslope",
    about = "Safe Bayesian optimization experiments over discrete grids",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Configuration file (flat `key = value`); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the trial count.
    #[arg(long)]
    trials: Option<usize>,
    /// Override the iteration budget.
    #[arg(long)]
    iters: Option<u64>,
    /// Override the algorithm (safeslope|safeucb).
    #[arg(long)]
    algorithm: Option<String>,
    /// Override the fidelity (single|multi).
    #[arg(long)]
    fidelity: Option<String>,
    /// Override the confidence mode (nested|unnested).
    #[arg(long)]
    mode: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.set("seed", &seed.to_string())?;
        }
        if let Some(trials) = self.trials {
            config.set("trials", &trials.to_string())?;
        }
        if let Some(iters) = self.iters {
            config.set("iterations", &iters.to_string())?;
        }
        if let Some(algorithm) = &self.algorithm {
            config.set("algorithm", algorithm)?;
        }
        if let Some(fidelity) = &self.fidelity {
            config.set("fidelity", fidelity)?;
        }
        if let Some(mode) = &self.mode {
            config.set("mode", mode)?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment cell and write per-trial and aggregate CSVs.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output directory for trial_<k>.csv and aggregate.csv.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Write the objective surfaces (surface.csv) for the configured system.
    Surface {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Print information-gain bounds, exploration constants, and
    /// convergence-time estimates; optionally write analysis.csv.
    Analyze {
        #[command(flatten)]
        config: ConfigArgs,
        /// Also write analysis.csv into this directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the self-contained oracle suite and exit nonzero on any failure.
    Verify {
        /// Master seed for the oracle instances.
        #[arg(long, default_value_t = 20260811)]
        seed: u64,
        /// Run reduced instance counts.
        #[arg(long)]
        quick: bool,
    },
}

fn cmd_run(config: &ExperimentConfig, out: &PathBuf) -> Result<()> {
    let result = run_experiment(config)?;
    output::write_experiment(&result, out)?;
    println!(
        "cell {}: {} trials x {} iterations, f_star = {:.6}",
        config.cell_label(),
        config.trials,
        config.iterations,
        result.truth.f_star
    );
    for (k, record) in result.records.iter().enumerate() {
        let regret = result.regret_curves[k].last().copied().unwrap_or(0.0);
        let unsafe_count = result.unsafe_curves[k].last().copied().unwrap_or(0.0);
        println!(
            "  trial {k}: stop = {}, final regret = {regret:.4}, unsafe samples = {unsafe_count}",
            record.stop.label()
        );
    }
    println!("wrote {} trial files and aggregate.csv to {}", result.records.len(), out.display());
    Ok(())
}

fn cmd_surface(config: &ExperimentConfig, out: &PathBuf) -> Result<()> {
    let truth = ground_truth(config)?;
    std::fs::create_dir_all(out)
        .with_context(|| format!("cannot create output directory {}", out.display()))?;
    let path = out.join("surface.csv");
    let csv = output::surface_csv(
        &truth.grid,
        &truth.f,
        &truth.f_low,
        truth.f_star,
        truth.argmin_index,
    );
    std::fs::write(&path, csv).with_context(|| format!("cannot write {}", path.display()))?;
    println!(
        "wrote {} rows to {} (f_star = {:.6} at point {})",
        truth.grid.len(),
        path.display(),
        truth.f_star,
        truth.argmin_index
    );
    Ok(())
}

fn cmd_analyze(config: &ExperimentConfig, out: Option<&PathBuf>) -> Result<()> {
    let rows = analyze(config)?;
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (k, v) in &rows {
        println!("{k:<width$}  {v}");
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        let path = dir.join("analysis.csv");
        std::fs::write(&path, output::analysis_csv(&rows))
            .with_context(|| format!("cannot write {}", path.display()))?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_verify(seed: u64, quick: bool) -> Result<bool> {
    let sizes = if quick {
        safeslope::verify::OracleSizes::quick()
    } else {
        safeslope::verify::OracleSizes::default()
    };
    let reports = safeslope::verify::run_oracles(seed, &sizes);
    print!("{}", safeslope::verify::format_report_table(&reports));
    Ok(reports.iter().all(|r| r.passed))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run { config, out } => config.resolve().and_then(|c| cmd_run(&c, out)).map(|_| true),
        Command::Surface { config, out } => {
            config.resolve().and_then(|c| cmd_surface(&c, out)).map(|_| true)
        }
        Command::Analyze { config, out } => {
            config.resolve().and_then(|c| cmd_analyze(&c, out.as_ref())).map(|_| true)
        }
        Command::Verify { seed, quick } => cmd_verify(*seed, *quick),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::FAILURE
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
