//! `farmopt` command line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand};
use farmopt::admm::AdmmSettings;
use farmopt::bench::{build_instance, run_experiments, run_single, sample_wind_rose, ExperimentConfig};
use farmopt::error::FarmError;
use farmopt::farm::PhysicalParams;
use farmopt::mlr::{Formulation, SolverConfig};
use farmopt_reference::{envelope_suite, gradient_suite};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "farmopt", version, about = "Joint wind-farm layout and yaw optimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one randomly generated instance and write its report.
    Solve {
        #[arg(long)]
        n_turbines: usize,
        #[arg(long)]
        scenarios: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// mlr, joint, or admm.
        #[arg(long, default_value = "mlr")]
        formulation: Formulation,
        /// TOML file overriding physical parameters.
        #[arg(long)]
        params_file: Option<PathBuf>,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
        /// Wall-clock limit, s.
        #[arg(long)]
        time_limit: Option<f64>,
    },
    /// Run a batch of experiments described by a TOML file.
    Bench { config: PathBuf },
    /// Compare exact and finite-difference gradients on random instances.
    CheckGradients {
        #[arg(long, default_value_t = 1000)]
        instances: usize,
        #[arg(long, default_value_t = 50)]
        envelope_instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print a sampled wind rose as CSV.
    Rose {
        #[arg(long)]
        scenarios: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Runs the command line and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match cli.command {
        Command::Solve {
            n_turbines,
            scenarios,
            seed,
            formulation,
            params_file,
            out,
            time_limit,
        } => solve(n_turbines, scenarios, seed, formulation, params_file.as_deref(), &out, time_limit),
        Command::Bench { config } => bench(&config),
        Command::CheckGradients {
            instances,
            envelope_instances,
            seed,
        } => check_gradients(instances, envelope_instances, seed),
        Command::Rose { scenarios, seed } => match sample_wind_rose(scenarios, seed) {
            Ok(rose) => {
                print!("{}", rose.to_csv());
                EXIT_OK
            }
            Err(e) => usage(e),
        },
    }
}

fn usage(e: FarmError) -> i32 {
    eprintln!("error: {e}");
    EXIT_USAGE
}

fn failure(e: FarmError) -> i32 {
    eprintln!("solver failure: {e}");
    EXIT_FAILURE
}

fn solve(
    n: usize,
    w: usize,
    seed: u64,
    formulation: Formulation,
    params_file: Option<&Path>,
    out: &Path,
    time_limit: Option<f64>,
) -> i32 {
    let params = match params_file.map_or(Ok(PhysicalParams::default()), PhysicalParams::from_file) {
        Ok(p) => p,
        Err(e) => return usage(e),
    };
    let (problem, start) = match build_instance(n, w, seed, &params) {
        Ok(v) => v,
        Err(e) => return usage(e),
    };
    let budget = Duration::from_secs_f64(time_limit.unwrap_or(f64::MAX / 4.0).clamp(0.0, 1e12));
    let report = match run_single(formulation, &problem, &start, &SolverConfig::default(), &AdmmSettings::default(), budget) {
        Ok(r) => r,
        Err(e) => return failure(e),
    };
    if let Err(e) = report.write(out) {
        return failure(e);
    }
    println!(
        "{} N={} W={} seed={}: {:.3} GWh/yr, {:.2} s, converged={}",
        report.formulation, n, w, seed, report.objective_gwh, report.runtime_s, report.converged
    );
    if let Some(m) = &report.message {
        println!("note: {m}");
    }
    EXIT_OK
}

fn bench(path: &Path) -> i32 {
    let config = match ExperimentConfig::from_file(path) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    match run_experiments(&config) {
        Ok(records) => {
            let converged = records.iter().filter(|r| r.converged).count();
            println!(
                "{} runs, {} converged; results in {}",
                records.len(),
                converged,
                config.output_dir.display()
            );
            EXIT_OK
        }
        Err(e) => failure(e),
    }
}

fn check_gradients(instances: usize, envelope_instances: usize, seed: u64) -> i32 {
    let direct = gradient_suite(instances, seed);
    println!(
        "power gradient: {} instances, max relative error {:.3e} (limit 1e-4)",
        direct.instances, direct.max_relative_error
    );
    let envelope = match envelope_suite(envelope_instances, seed) {
        Ok(s) => s,
        Err(e) => return failure(e),
    };
    println!(
        "envelope gradient: {} instances, max relative error {:.3e} (limit 1e-3)",
        envelope.instances, envelope.max_relative_error
    );
    if direct.max_relative_error <= 1e-4 && envelope.max_relative_error <= 1e-3 {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}
