//! `swarmdef` command-line front end.
//!
//! Exit codes: 0 success, 1 runtime or I/O failure, 2 usage error (bad
//! flag, unknown policy name), 3 invalid or unreadable scenario config.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use swarmdef::encoding::ObservationSpec;
use swarmdef::engine::replay::replay_hash;
use swarmdef::evaluation::{self, export_csv, export_replay, export_summary, run_batch};
use swarmdef::policies::{policy_from_name, Policy};
use swarmdef::scenario::{load_scenario_file, ScenarioConfig};
use swarmdef::{stepserver, Error};

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser, Debug)]
#[command(
    name = "swarmdef",
    version,
    about = "Drone swarm defense simulator and evaluation harness"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario JSON file; the built-in reference scenario when absent.
    #[arg(long, global = true, env = "SWARMDEF_CONFIG")]
    config: Option<PathBuf>,
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the reference scenario as JSON.
    SampleConfig {
        /// Write to this file instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one episode and print its metrics.
    Simulate {
        #[arg(long, default_value = "heuristic")]
        policy: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the per-step replay log here.
        #[arg(long)]
        replay: Option<PathBuf>,
    },
    /// Run seeded batches and write a CSV plus a summary report.
    Evaluate {
        #[arg(long, default_value = "heuristic")]
        policy: String,
        /// Episodes per seed.
        #[arg(long, default_value_t = 100)]
        episodes: u64,
        /// Number of batch seeds, numbered from --first-seed.
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        /// Output directory for episodes.csv and summary.json.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; defaults to available parallelism.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Serve the reset/step protocol.
    Serve {
        #[arg(long, value_enum, default_value_t = Transport::Stdio)]
        transport: Transport,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value_t = 64)]
        max_connections: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Transport {
    Stdio,
    Tcp,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::UnknownPolicy(_) => EXIT_USAGE,
        Error::Parse { .. } | Error::Validation(_) => EXIT_CONFIG,
        Error::Io { .. } => EXIT_RUNTIME,
        _ => EXIT_RUNTIME,
    }
}

fn load_config(path: Option<&Path>) -> Result<ScenarioConfig, (u8, String)> {
    let config = match path {
        Some(p) => load_scenario_file(p).map_err(|e| (EXIT_CONFIG, e.to_string()))?,
        None => ScenarioConfig::default(),
    };
    config
        .validate()
        .map_err(|e| (EXIT_CONFIG, e.to_string()))?;
    Ok(config)
}

fn make_policy(name: &str, config: &ScenarioConfig) -> Result<Box<dyn Policy>, (u8, String)> {
    policy_from_name(name, &ObservationSpec::from_config(config))
        .map_err(|e| (exit_code(&e), e.to_string()))
}

fn fail(e: Error) -> (u8, String) {
    (exit_code(&e), e.to_string())
}

fn run(cli: Cli) -> Result<(), (u8, String)> {
    match cli.command {
        Command::SampleConfig { out } => {
            let text = ScenarioConfig::default().to_json_pretty() + "\n";
            match out {
                Some(p) => std::fs::write(&p, text)
                    .map_err(|e| (EXIT_RUNTIME, format!("{}: {e}", p.display())))?,
                None => print!("{text}"),
            }
        }
        Command::Simulate {
            policy,
            seed,
            replay,
        } => {
            let config = load_config(cli.common.config.as_deref())?;
            let policy = make_policy(&policy, &config)?;
            let start = std::time::Instant::now();
            let (report, records) =
                evaluation::simulate(&config, policy.as_ref(), seed).map_err(fail)?;
            info!("episode finished in {:.3} s", start.elapsed().as_secs_f64());
            if let Some(path) = &replay {
                export_replay(&records, path).map_err(fail)?;
            }
            let out = json!({
                "policy": policy.name(),
                "seed": report.seed,
                "steps": report.steps,
                "damage_pct": report.damage_pct,
                "tracking_pct": report.tracking_pct,
                "utilization_pct": report.utilization_pct,
                "episode_return": report.episode_return,
                "impacts": report.impacts.len(),
                "fires": report.fires.len(),
                "replay_sha256": replay_hash(&records),
            });
            println!(
                "{}",
                serde_json::to_string_pretty(&out).expect("json value")
            );
        }
        Command::Evaluate {
            policy,
            episodes,
            seeds,
            first_seed,
            out,
            workers,
        } => {
            if episodes == 0 || seeds == 0 {
                return Err((
                    EXIT_USAGE,
                    "--episodes and --seeds must be at least 1".into(),
                ));
            }
            let config = load_config(cli.common.config.as_deref())?;
            let policy = make_policy(&policy, &config)?;
            let workers = workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let seed_list: Vec<u64> = (first_seed..first_seed + seeds).collect();
            info!(
                "{} x {} episodes on {workers} workers",
                seed_list.len(),
                episodes
            );
            let report =
                run_batch(&config, policy.as_ref(), episodes, &seed_list, workers).map_err(fail)?;
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)
                    .map_err(|e| (EXIT_RUNTIME, format!("{}: {e}", dir.display())))?;
                export_csv(&report, &dir.join("episodes.csv")).map_err(fail)?;
                export_summary(&report, &dir.join("summary.json")).map_err(fail)?;
            }
            println!(
                "{}",
                serde_json::to_string_pretty(&report.summary()).expect("summary serializes")
            );
        }
        Command::Serve {
            transport,
            host,
            port,
            max_connections,
        } => {
            let config = load_config(cli.common.config.as_deref())?;
            match transport {
                Transport::Stdio => stepserver::serve_stdio(config).map_err(fail)?,
                Transport::Tcp => {
                    stepserver::serve_tcp(config, (host.as_str(), port), max_connections.max(1))
                        .map_err(fail)?
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .parse_default_env()
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("swarmdef: {message}");
            ExitCode::from(code)
        }
    }
}
