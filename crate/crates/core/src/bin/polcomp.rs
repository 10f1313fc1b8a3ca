use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use polcomp::harness::output::fmt_sig9;
use polcomp::harness::{run_batch, run_scenario, HarnessError, ScenarioConfig, ScenarioKind};

#[derive(Parser)]
#[command(name = "polcomp", version, about = "Polarization-compensation simulator for entanglement-based QKD")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the stochastic search against a simulated fiber.
    Optimize(RunArgs),
    /// Log the fiber output polarization with a fixed compensator.
    DriftLog(RunArgs),
    /// Run a batch of independently seeded optimize runs.
    Batch(RunArgs),
    /// Check a config file and print the effective configuration.
    ValidateConfig(ConfigArg),
}

#[derive(Args)]
struct ConfigArg {
    /// TOML scenario file; defaults are used when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    seed: Option<u64>,
    /// Output path prefix for CSV files.
    #[arg(long)]
    out: Option<String>,
    /// Simulated duration per run, seconds.
    #[arg(long)]
    duration: Option<f64>,
}

fn load(arg: &ConfigArg) -> Result<ScenarioConfig, HarnessError> {
    match &arg.config {
        Some(p) => ScenarioConfig::load(p),
        None => Ok(ScenarioConfig::default()),
    }
}

fn prepare(args: &RunArgs, kind: ScenarioKind) -> Result<ScenarioConfig, HarnessError> {
    let mut cfg = load(&args.config)?;
    cfg.run.kind = kind;
    if let Some(seed) = args.seed {
        cfg.run.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.run.output_prefix = Some(out.clone());
    }
    if let Some(d) = args.duration {
        cfg.run.duration = d;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<(), HarnessError> {
    match cli.command {
        Command::Optimize(args) => {
            let cfg = prepare(&args, ScenarioKind::Optimize)?;
            let r = run_scenario(&cfg)?;
            let s = &r.summary;
            println!(
                "seed={} iterations={} initial_qber={} final_qber={} iters_to_floor={} recovered_jumps={}",
                s.seed,
                s.iterations,
                fmt_sig9(s.initial_qber),
                fmt_sig9(s.final_qber),
                s.iters_to_floor.map(|n| n.to_string()).unwrap_or_else(|| "-".into()),
                s.recovered_jumps,
            );
        }
        Command::DriftLog(args) => {
            let cfg = prepare(&args, ScenarioKind::DriftLog)?;
            let r = run_scenario(&cfg)?;
            if let Some(d) = &r.drift {
                println!(
                    "samples={} jumps={} expected_jumps={} max_smooth_step_rad={}",
                    d.samples,
                    d.jumps,
                    fmt_sig9(d.expected_jumps),
                    fmt_sig9(d.max_smooth_step),
                );
            }
        }
        Command::Batch(args) => {
            let cfg = prepare(&args, ScenarioKind::Batch)?;
            let b = run_batch(&cfg)?;
            let a = &b.aggregate;
            let opt = |x: Option<f64>| x.map(fmt_sig9).unwrap_or_else(|| "-".into());
            println!(
                "runs={} failed={} success_fraction={} median_iters_to_floor={} median_convergence_time_s={}",
                a.runs,
                a.failed_runs,
                fmt_sig9(a.success_fraction),
                opt(a.median_iters_to_floor),
                opt(a.median_convergence_time),
            );
            for (i, r) in b.runs.iter().enumerate() {
                if let Err(e) = r {
                    eprintln!("run {i} failed: {e}");
                }
            }
        }
        Command::ValidateConfig(arg) => {
            let cfg = load(&arg)?;
            cfg.validate()?;
            cfg.resolved_stack()?;
            print!("{}", cfg.to_toml_string());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
