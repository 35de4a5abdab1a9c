use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use occo_harness::comparator::Level;
use occo_harness::config::{load_config, parse_delays, sweep};
use occo_harness::env::Case;
use occo_harness::run::{run_experiment, Algo, RunConfig};
use occo_harness::{HarnessError, Result};

#[derive(Parser)]
#[command(name = "occo", about = "Online convex-concave optimization experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration and write its trace CSV.
    Run {
        #[arg(long, default_value = "I")]
        case: String,
        #[arg(long, default_value = "iii")]
        level: String,
        #[arg(long, default_value_t = 10_000)]
        rounds: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "modular")]
        algo: String,
        #[arg(long, default_value = "1,3,7,8")]
        delays: String,
        #[arg(long, default_value_t = 1.0)]
        epsilon: f64,
        #[arg(long, default_value_t = 1e-12)]
        tol: f64,
        #[arg(long, default_value_t = 0.5)]
        damping: f64,
        #[arg(long, default_value_t = 64)]
        t0: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every combination listed in a key=value config file.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { case, level, rounds, seed, algo, delays, epsilon, tol, damping, t0, out } => {
            let cfg = RunConfig {
                case: case.parse::<Case>()?,
                level: level.parse::<Level>()?,
                rounds,
                seed,
                algo: algo.parse::<Algo>()?,
                delays: parse_delays(&delays)?,
                out: Some(out.clone()),
                epsilon,
                tol,
                damping,
                t0,
                retain_trace: false,
            };
            let o = run_experiment(&cfg)?;
            println!("{}: {} rounds, final time-averaged gap {} -> {}", cfg.file_stem(), rounds, o.final_avg_gap, out.display());
        }
        Command::Sweep { config } => {
            let sc = load_config(&config)?;
            let outs = sweep(&sc)?;
            for o in &outs {
                println!("{}: final time-averaged gap {}", o.config.file_stem(), o.final_avg_gap);
            }
            println!("wrote {} runs to {}", outs.len(), sc.out_dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(HarnessError::exit_code(&e) as u8)
        }
    }
}
