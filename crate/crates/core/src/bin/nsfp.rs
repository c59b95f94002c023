use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;

use nsfp::harness::output::report_csv;
use nsfp::harness::{parse_config, run_continuation, simulate, verify::verify, RunConfig};

#[derive(Parser)]
#[command(name = "nsfp", version, about = "Compressible Navier-Stokes-Fokker-Planck solver and Mach continuation harness")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides `[output] directory`.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Single compressible run at `[model] epsilon`.
    Simulate { config: PathBuf },
    /// Incompressible reference plus one run per entry of `epsilon_list`.
    Continuation { config: PathBuf },
    /// Configuration-space and projection identity checks.
    Verify { config: PathBuf },
}

fn load(path: &std::path::Path, out: &Option<PathBuf>) -> nsfp::Result<RunConfig> {
    let mut cfg = parse_config(path)?;
    if let Some(dir) = out {
        cfg.output_dir = dir.clone();
    }
    Ok(cfg)
}

fn run(cli: Cli) -> nsfp::Result<bool> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| nsfp::Error::Config(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Simulate { config } => {
            let cfg = load(&config, &cli.output_dir)?;
            let run = simulate(&cfg)?;
            let last = run.ledger.samples.last().expect("ledger has the initial sample");
            println!("t = {}", run.final_state.time);
            println!("energy = {:.10e}, cumulative dissipation = {:.10e}", last.terms.energy(), last.cumulative);
            println!("energy monitor: {}", if run.ledger.all_pass() { "pass" } else { "FAIL" });
            println!("mass drift = {:.3e}, polymer mass drift = {:.3e}", run.mass_drift, run.polymer_mass_drift);
            if let Some(w) = run.fitted_omega() {
                println!("fitted omega (1,0) = {w:.6}");
            }
            println!("output: {}", cfg.output_dir.display());
            Ok(run.ledger.all_pass())
        }
        Command::Continuation { config } => {
            let cfg = load(&config, &cli.output_dir)?;
            let report = run_continuation(&cfg, true)?;
            print!("{}", report_csv(&report));
            println!("orders are empirical; output: {}", cfg.output_dir.display());
            Ok(report.rows.iter().all(|r| r.metrics.is_some()))
        }
        Command::Verify { config } => {
            let cfg = load(&config, &cli.output_dir)?;
            let checks = verify(&cfg)?;
            for c in &checks {
                println!("{c}");
            }
            Ok(checks.iter().all(|c| c.pass()))
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
