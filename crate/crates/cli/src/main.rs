use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use mmcoop::harness::{
    emit_comparison, emit_outputs, emit_sweep, run_baseline_repeats, run_comparison_series, run_delay_sweep,
    run_scenario, summarize, summarize_paired, BaselineComparison, ScenarioConfig,
};
use mmcoop::sensing::{calibrate_sensor, read_calibration_samples};
use mmcoop::stability::{certificate_report, CertificateInputs};

#[derive(Parser)]
#[command(name = "mmcoop", version, about = "Cooperative manipulation under delayed communication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and print its summary as JSON.
    Run {
        config: PathBuf,
        /// Directory for the CSV time series, summary and plot data.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Search for a stability certificate and print the report as JSON.
    Certify {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        tau: f64,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        beta: f64,
        /// Also bisect for the largest certifiable delay bound.
        #[arg(long)]
        max_delay: bool,
    },
    /// Average convergence time and steady-state error over seeds for
    /// several delay bounds.
    Sweep {
        config: PathBuf,
        #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
        bounds: Vec<f64>,
        #[arg(long, default_value_t = 100)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the proposed law with the leader-follower baseline at zero delay.
    Compare {
        config: PathBuf,
        /// Replace robot 0's program with the large disturbance.
        #[arg(long)]
        large_disturbance: bool,
        /// Number of seeds; traces are written for the first one only.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit force/torque sensor offsets and tool weight from a CSV of samples.
    Calibrate { samples: PathBuf },
}

fn load(config: &PathBuf) -> Result<ScenarioConfig> {
    ScenarioConfig::load(config).with_context(|| format!("loading {}", config.display()))
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, out, seed } => {
            let mut cfg = load(&config)?;
            if let Some(seed) = seed {
                cfg.rng_seed = seed;
            }
            let series = run_scenario(&cfg)?;
            for w in &series.warnings {
                eprintln!("warning: {w}");
            }
            let summary = summarize(&series, &cfg.metrics);
            if let Some(dir) = out {
                for path in emit_outputs(&series, &summary, &dir)? {
                    eprintln!("wrote {}", path.display());
                }
            }
            print_json(&summary)
        }
        Command::Certify { n, tau, k, beta, max_delay } => {
            print_json(&certificate_report(CertificateInputs { n, tau, k, beta }, max_delay)?)
        }
        Command::Sweep { config, bounds, repeats, out } => {
            let cfg = load(&config)?;
            let rows = run_delay_sweep(&cfg, &bounds, repeats)?;
            if let Some(dir) = out {
                for path in emit_sweep(&rows, &dir)? {
                    eprintln!("wrote {}", path.display());
                }
            }
            print_json(&rows)
        }
        Command::Compare { config, large_disturbance, repeats, out } => {
            if repeats == 0 {
                bail!("--repeats must be at least 1");
            }
            let mut cfg = load(&config)?;
            if large_disturbance {
                cfg = cfg.with_large_disturbance();
            }
            if let Some(dir) = out {
                let runs = run_comparison_series(&cfg)?;
                let first = BaselineComparison {
                    seed: cfg.rng_seed,
                    proposed: summarize_paired(&runs.proposed, &runs.uncorrected, &cfg.metrics),
                    leader_follower: summarize_paired(&runs.leader_follower, &runs.uncorrected, &cfg.metrics),
                };
                for path in emit_comparison(&first, &runs.proposed, &runs.leader_follower, &runs.uncorrected, &dir)? {
                    eprintln!("wrote {}", path.display());
                }
            }
            let results = run_baseline_repeats(&cfg, repeats)?;
            if repeats == 1 {
                print_json(&results[0])
            } else {
                print_json(&results)
            }
        }
        Command::Calibrate { samples } => {
            let data = read_calibration_samples(&samples).with_context(|| format!("reading {}", samples.display()))?;
            print_json(&calibrate_sensor(&data)?)
        }
    }
}
