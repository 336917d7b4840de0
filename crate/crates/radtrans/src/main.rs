//! Command-line front end: `run` a configured problem, `check` the built-in
//! invariants, or `bench` the convolution against the ray-quadrature oracle.
//!
//! Exit codes: 0 success (run converged / checks passed), 2 run finished
//! without converging, 1 configuration or usage error.

use clap::{Parser, Subcommand};
use radtrans::config::RunConfig;
use radtrans::diagnostics::{self, FIT_EXPONENT_RANGE};
use radtrans::output::{write_csv, write_iteration_log, write_pgm};
use radtrans::solver::{solve, SolveMode, SolveOutput};
use radtrans::spectral::KELVIN_PER_UNIT;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "radtrans",
    version,
    about = "Stationary radiative transfer around an illuminated planet"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem and write field artifacts.
    Run {
        /// Path to a `key = value` configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's `out` key).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in invariant checks (one line per check).
    Check,
    /// Time one grey sweep via FFT convolution vs direct ray quadrature.
    Bench {
        /// Comma-separated grid sizes.
        #[arg(long, value_delimiter = ',', default_value = "16,32,64")]
        sizes: Vec<usize>,
    },
}

fn main() -> ExitCode {
    if let Err(message) = configure_threads() {
        eprintln!("{message}");
        return ExitCode::from(1);
    }
    // clap reports usage problems with exit code 2 by default; this tool
    // reserves 2 for non-convergence, so usage errors map to 1 instead.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run { config, out } => cmd_run(&config, out),
        Command::Check => cmd_check(),
        Command::Bench { sizes } => cmd_bench(&sizes),
    }
}

/// Applies the `RADTRANS_THREADS` cap before any worker pool spins up.
/// Unset or `0` leaves the automatic sizing in place.
fn configure_threads() -> Result<(), String> {
    let raw = match std::env::var("RADTRANS_THREADS") {
        Err(std::env::VarError::NotPresent) => return Ok(()),
        Err(e) => return Err(format!("RADTRANS_THREADS: {e}")),
        Ok(raw) => raw,
    };
    let n: usize = raw
        .trim()
        .parse()
        .map_err(|_| format!("RADTRANS_THREADS must be a non-negative integer, got '{raw}'"))?;
    if n == 0 {
        return Ok(());
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| format!("RADTRANS_THREADS: cannot configure thread pool: {e}"))
}

fn cmd_run(config_path: &Path, out_override: Option<PathBuf>) -> ExitCode {
    let run_cfg = match RunConfig::from_file(config_path) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    let built = match run_cfg.build() {
        Ok(built) => built,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(1);
        }
    };
    let out_dir = out_override.unwrap_or_else(|| PathBuf::from(&built.out_dir));
    if let Err(e) = std::fs::create_dir_all(&out_dir) {
        eprintln!(
            "cannot create output directory '{}': {e}",
            out_dir.display()
        );
        return ExitCode::from(1);
    }

    let output = match solve(&built.problem, built.mode, built.diffusion.as_ref()) {
        Ok(output) => output,
        Err(e) => {
            eprintln!("solver error: {e}");
            return ExitCode::from(1);
        }
    };

    if let Err(e) = write_artifacts(&output, &out_dir) {
        eprintln!("cannot write outputs to '{}': {e}", out_dir.display());
        return ExitCode::from(1);
    }

    print_summary(built.problem.grid.n(), built.mode, &output);
    if output.report.converged {
        ExitCode::SUCCESS
    } else {
        eprintln!(
            "not converged after {} iterations (residual {:.3e}, tol {:.3e})",
            output.report.iterations(),
            output.report.final_residual(),
            built.problem.tol
        );
        ExitCode::from(2)
    }
}

fn write_artifacts(output: &SolveOutput, out_dir: &Path) -> std::io::Result<()> {
    write_csv(&output.temperature, out_dir.join("T.csv"))?;
    write_pgm(&output.temperature, out_dir.join("T.pgm"))?;
    write_csv(&output.mean_intensity, out_dir.join("J.csv"))?;
    write_pgm(&output.mean_intensity, out_dir.join("J.pgm"))?;
    write_csv(&output.boundary_source, out_dir.join("SE.csv"))?;
    write_pgm(&output.boundary_source, out_dir.join("SE.pgm"))?;
    write_iteration_log(&output.report, out_dir.join("iterations.log"))
}

fn print_summary(n: usize, mode: SolveMode, output: &SolveOutput) {
    let mode_name = match mode {
        SolveMode::Grey => "grey",
        SolveMode::Spectral => "spectral",
    };
    let report = &output.report;
    println!(
        "{mode_name} run on {n}x{n}: {} iterations, residual {:.3e}, converged: {}",
        report.iterations(),
        report.final_residual(),
        report.converged
    );
    if let Some(last) = report.stats.last() {
        let to_celsius = |t: f64| t * KELVIN_PER_UNIT - 273.0;
        println!(
            "temperature range [{:.6}, {:.6}] ({:.1} C to {:.1} C)",
            last.t_min,
            last.t_max,
            to_celsius(last.t_min),
            to_celsius(last.t_max)
        );
    }
    let worst_clamp = report
        .stats
        .iter()
        .map(|s| s.max_clamp_violation)
        .fold(0.0_f64, f64::max);
    if worst_clamp > 1e-9 {
        println!(
            "warning: temperature update exceeded the ceiling by {worst_clamp:.3e} before clamping"
        );
    }
}

fn cmd_check() -> ExitCode {
    let results = match diagnostics::run_checks() {
        Ok(results) => results,
        Err(e) => {
            eprintln!("check harness failed: {e}");
            return ExitCode::from(1);
        }
    };
    let mut all_pass = true;
    for result in &results {
        println!("{}", result.line());
        all_pass &= result.pass;
    }
    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_bench(sizes: &[usize]) -> ExitCode {
    let rows = match diagnostics::run_bench(sizes) {
        Ok(rows) => rows,
        Err(e) => {
            eprintln!("bench failed: {e}");
            return ExitCode::from(1);
        }
    };
    println!(
        "{:>6} {:>12} {:>12} {:>9} {:>12}",
        "n", "conv_ms", "oracle_ms", "speedup", "l2_rel_diff"
    );
    for row in &rows {
        println!(
            "{:>6} {:>12.3} {:>12.3} {:>9.1} {:>12.3e}",
            row.n,
            row.conv_ms,
            row.oracle_ms,
            row.speedup(),
            row.l2_rel_diff
        );
    }
    match diagnostics::fit_exponent(&rows) {
        None => {
            println!("fit: not enough sizes for a scaling estimate");
            ExitCode::SUCCESS
        }
        Some(beta) => {
            let (lo, hi) = FIT_EXPONENT_RANGE;
            let ok = (lo..=hi).contains(&beta);
            println!(
                "fit exponent: {beta:.2} (expected {lo}..{hi}) {}",
                if ok { "OK" } else { "FAIL" }
            );
            if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
    }
}
