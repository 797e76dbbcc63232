use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ksns::config::{parse_config, SimConfig};
use ksns::diagnostics::gronwall_bound;
use ksns::sweep::{emit_report, run_sweep};
use ksns::Error;

#[derive(Parser)]
#[command(name = "ksns", version, about = "Keller-Segel-Navier-Stokes simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation.
    Run { config: PathBuf },
    /// Run every (m, eps) child of the configured sweep.
    Sweep { config: PathBuf },
    /// Run with all invariant suites asserted and report each one.
    Verify { config: PathBuf },
    /// Print the uniform bound max{y0 + B, B/(A sigma) + 2B}.
    #[command(allow_negative_numbers = true)]
    Gronwall {
        #[arg(long)]
        y0: f64,
        #[arg(long = "A")]
        a: f64,
        #[arg(long = "B")]
        b: f64,
        #[arg(long)]
        sigma: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8, Error> {
    match cmd {
        Command::Run { config } => {
            let cfg = parse_config(&config)?;
            if cfg.sweep.is_some() {
                return sweep(&cfg);
            }
            let res = ksns::run(&cfg)?;
            println!(
                "{}: {} after {} steps, t = {}, max |n|inf = {:.6e}",
                cfg.scenario.name,
                res.termination.label(),
                res.steps,
                res.final_state.t,
                res.max_n_inf()
            );
            if let Some(p) = &res.diagnostics_path {
                println!("diagnostics: {}", p.display());
            }
            Ok(report_failures(&res.failures))
        }
        Command::Sweep { config } => {
            let cfg = parse_config(&config)?;
            sweep(&cfg)
        }
        Command::Verify { config } => {
            let mut cfg = parse_config(&config)?;
            cfg.snapshot_interval = None;
            verify(&mut cfg)
        }
        Command::Gronwall { y0, a, b, sigma } => {
            println!("{}", gronwall_bound(y0, a, b, sigma)?);
            Ok(0)
        }
    }
}

fn sweep(cfg: &SimConfig) -> Result<u8, Error> {
    let report = run_sweep(cfg)?;
    let (csv, txt) = emit_report(&report, &cfg.output_dir)?;
    print!("{}", report.table());
    println!("wrote {} and {}", csv.display(), txt.display());
    Ok(report_failures(&report.failures()))
}

fn verify(cfg: &mut SimConfig) -> Result<u8, Error> {
    let v = &mut cfg.verify;
    v.finite = true;
    v.positivity = true;
    v.mass = true;
    v.c_mass = true;
    v.truncation = true;
    v.divergence = true;
    let res = ksns::run::run_in_memory(cfg)?;
    let suites = [
        "finite",
        "positivity",
        "mass",
        "c_mass",
        "truncation",
        "divergence",
        "plateau",
    ];
    for suite in suites {
        if suite == "plateau" && !cfg.verify.plateau {
            continue;
        }
        let failed = res.failures.iter().any(|f| f.starts_with(suite) && f[suite.len()..].starts_with(':'));
        println!("{} {suite}", if failed { "FAIL" } else { "PASS" });
    }
    println!("termination: {}", res.termination.label());
    Ok(report_failures(&res.failures))
}

fn report_failures(failures: &[String]) -> u8 {
    for f in failures {
        eprintln!("invariant failure: {f}");
    }
    u8::from(!failures.is_empty())
}
