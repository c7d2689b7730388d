use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cwdmd_cli::checks::{run_property_suite, SuiteOptions};
use cwdmd_cli::config::{ConfigError, ExperimentConfig};
use cwdmd_cli::experiment::{run_lorenz_experiment, run_lti_experiment, run_resolvent_sweep, run_simulation};
use cwdmd_cli::RunError;

#[derive(Parser)]
#[command(name = "cwdmd", version, about = "Wavelet-based EDMD experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the ensemble and write one trajectory CSV per initial condition.
    Simulate(Common),
    /// Run the linear experiment (defaults reproduce the reference setup).
    Lti(Common),
    /// Run the Lorenz experiment (also accepts registry systems).
    Lorenz(Common),
    /// Run the property suite; exits 3 on any failure.
    Check {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Multiply the FFT normalization constant (fault injection).
        #[arg(long, default_value_t = 1.0)]
        fault_cwt_scale: f64,
    },
    /// Sweep the resolvent quadrature over Im s at mid-window states.
    ResolventSweep(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; the command's defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated target frequencies in Hz.
    #[arg(long, value_delimiter = ',')]
    target_hz: Option<Vec<f64>>,
    /// SVD truncation tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

impl Common {
    fn resolve(&self, default: fn() -> ExperimentConfig) -> Result<ExperimentConfig, ConfigError> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => default(),
        };
        if let Some(seed) = self.seed {
            config.initial_conditions.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(t) = &self.target_hz {
            config.target_frequencies_hz = t.clone();
        }
        if let Some(tol) = self.tol {
            config.truncation_tol = tol;
        }
        config.validate()?;
        Ok(config)
    }
}

fn fail(err: RunError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Check { seed, fault_cwt_scale } => {
            let results = run_property_suite(&SuiteOptions { seed: *seed, cwt_normalization_factor: *fault_cwt_scale });
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            return if results.iter().all(|r| r.passed) { ExitCode::SUCCESS } else { ExitCode::from(3) };
        }
        Command::Simulate(c) => c.resolve(ExperimentConfig::lti_default).map_err(RunError::from).and_then(|cfg| {
            let files = run_simulation(&cfg)?;
            println!("wrote {} files to {}", files.len(), cfg.output_dir.display());
            Ok(())
        }),
        Command::Lti(c) | Command::Lorenz(c) => {
            let lti = matches!(cli.command, Command::Lti(_));
            let default = if lti { ExperimentConfig::lti_default } else { ExperimentConfig::lorenz_default };
            c.resolve(default).map_err(RunError::from).and_then(|cfg| {
                let run = if lti { run_lti_experiment(&cfg)? } else { run_lorenz_experiment(&cfg)? };
                let r = &run.report;
                println!("rank {} of {} observables, {} snapshot pairs", r.retained_rank, r.observable_rows, r.snapshot_pairs);
                for s in &r.selected {
                    println!(
                        "target {:.4} Hz: lambda = {:.6} {:+.6}i (distance {:.3e})",
                        s.target_hz, s.mode.re_lambda, s.mode.im_lambda, s.distance
                    );
                }
                for m in &r.metrics {
                    println!(
                        "interior correlation {:.6}, relative L2 {:.4} ({} ICs, {} excluded)",
                        m.correlation, m.relative_l2, m.interior_ics, m.excluded_ics
                    );
                }
                for w in &r.warnings {
                    eprintln!("warning: {w}");
                }
                println!("report written to {}", cfg.output_dir.join("report.json").display());
                Ok(())
            })
        }
        Command::ResolventSweep(c) => c.resolve(ExperimentConfig::lti_default).map_err(RunError::from).and_then(|cfg| {
            let rep = run_resolvent_sweep(&cfg)?;
            println!("quadrature peak at {:.4} rad/s", rep.quadrature.peak_rad);
            if let Some(a) = &rep.analytic {
                println!("analytic peak at {:.4} rad/s", a.peak_rad);
            }
            Ok(())
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}
