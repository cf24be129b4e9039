use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use surrohpo::experiment::{emit_plot_data, run_experiment, ExperimentConfig};
use surrohpo::hydrograph::HydrographSpec;

/// Surrogate-based hyperparameter search experiments.
#[derive(Parser)]
#[command(name = "surrohpo", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every strategy and trial of an experiment config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check a config without running it.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write convergence, time and hyperparameter tables from a run directory.
    EmitPlots {
        run_dir: PathBuf,
        /// Destination directory (default: <run_dir>/plots).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic hydrograph as CSV.
    GenData {
        /// Hydrograph parameters (TOML); defaults when omitted.
        spec: Option<PathBuf>,
        /// Output CSV file.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        days: Option<usize>,
    },
}

#[derive(Args)]
struct Overrides {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    budget: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(t) = self.trials {
            cfg.trials = t;
        }
        if let Some(b) = self.budget {
            cfg.hpo.budget = b;
        }
    }
}

fn load(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    overrides.apply(&mut cfg);
    // relative paths inside the config are relative to the config file
    if let surrohpo::experiment::ObjectiveConfig::Mlp(m) = &mut cfg.objective {
        if let surrohpo::objective::DataSource::Csv { path: data } = &mut m.data {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
    }
    Ok(cfg)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let Some(out) = cfg.out.clone() else {
                bail!("no output directory: set `out` in the config or pass --out");
            };
            let report = run_experiment(&cfg, &out)?;
            for (strategy, traces) in &report.traces {
                let bests: Vec<String> = traces
                    .iter()
                    .map(|t| format!("{:.6e}", t.best_so_far.last().copied().unwrap_or(f64::NAN)))
                    .collect();
                println!("{strategy}: best per trial {}", bests.join(" "));
            }
            for b in &report.baselines {
                println!(
                    "{} trial {}: best mse {:.4e}, persistence {:.4e}",
                    b.strategy, b.trial, b.best_mse, b.persistence_mse
                );
            }
            println!("wrote {} in {:.1}s", out.display(), report.seconds);
        }
        Command::Validate { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let domain = cfg.validate()?;
            println!(
                "ok: {} dimensions, {} points, {} strategies x {} trials, budget {}",
                domain.dim(),
                domain.cardinality(),
                cfg.strategies.len(),
                cfg.trials,
                cfg.hpo.budget
            );
        }
        Command::EmitPlots { run_dir, out } => {
            let dest = out.unwrap_or_else(|| run_dir.join("plots"));
            let files = emit_plot_data(&run_dir, &dest)?;
            for p in [files.convergence, files.time, files.hyperparameters] {
                println!("{}", p.display());
            }
        }
        Command::GenData { spec, out, seed, days } => {
            let mut h: HydrographSpec = match &spec {
                Some(p) => {
                    let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                    toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
                }
                None => HydrographSpec::default(),
            };
            if let Some(s) = seed {
                h.seed = s;
            }
            if let Some(d) = days {
                h.days = d;
            }
            let series = h.generate()?;
            series.write_csv(&out)?;
            println!("wrote {} days to {}", series.len(), out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
