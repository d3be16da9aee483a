use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gridwalk::bench::{run_suite, Suite};
use gridwalk::explorer::{build_environment, replay, run_exploration, AblationVariant, RecordedStep, RunConfig, RunReport};
use gridwalk::Error;

const EXIT_PARTIAL: u8 = 2;
const EXIT_CONFIG: u8 = 3;

#[derive(Parser)]
#[command(name = "gridwalk", version, about = "Curiosity-driven RL exploration of web GUIs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explore the configured target and write the run report.
    Explore {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        variant: Option<AblationVariant>,
    },
    /// Re-execute recorded action sequences and check their states.
    Replay {
        /// JSON list of sequences, or a report.json holding `sequences`.
        #[arg(long)]
        sequences: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Run a comparison suite on the simulated fixtures.
    Bench {
        #[arg(long)]
        suite: Suite,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
        /// Write the JSON table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rebuild a report from a run directory's trajectory log.
    Report {
        #[arg(long)]
        run: PathBuf,
    },
}

fn load_sequences(path: &PathBuf) -> Result<Vec<Vec<RecordedStep>>, Error> {
    let value: serde_json::Value = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    let seqs = match value.get("sequences") {
        Some(v) => v.clone(),
        None => value,
    };
    Ok(serde_json::from_value(seqs)?)
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Explore { config, variant } => {
            let mut config = RunConfig::load(&config)?;
            if let Some(v) = variant {
                config.variant = v;
            }
            let report = run_exploration(&config)?;
            print_summary(&report);
            if config.output_dir.is_none() {
                println!("{}", serde_json::to_string_pretty(&report)?);
            }
            Ok(if report.partial { ExitCode::from(EXIT_PARTIAL) } else { ExitCode::SUCCESS })
        }
        Command::Replay { sequences, config } => {
            let config = RunConfig::load(&config)?;
            let seqs = load_sequences(&sequences)?;
            let (mut env, _) = build_environment(&config)?;
            let report = replay(&seqs, env.as_mut())?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            eprintln!(
                "{} sequences, {} broken, {} diverged",
                report.sequences.len(),
                report.broken(),
                report.diverged()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { suite, seeds, out } => {
            let seeds: Vec<u64> = (0..seeds).collect();
            let table = run_suite(suite, &seeds)?;
            let json = serde_json::to_string_pretty(&table)?;
            match out {
                Some(path) => std::fs::write(path, json)?,
                None => println!("{json}"),
            }
            eprint!("{}", table.summary());
            Ok(ExitCode::SUCCESS)
        }
        Command::Report { run } => {
            let log = BufReader::new(File::open(run.join("trajectory.jsonl"))?);
            let report = RunReport::from_trajectory(log)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_summary(report: &RunReport) {
    let coverage = match (report.coverage(), report.state_count) {
        (Some(c), Some(n)) => format!(", fixture coverage {c}/{n}"),
        _ => String::new(),
    };
    eprintln!(
        "{} episodes ({}), {} distinct states{coverage}, {} unique failures{}",
        report.completed_episodes(),
        report.variant.name(),
        report.distinct_states,
        report.failures.len(),
        report.abort_reason.as_deref().map(|r| format!(", stopped: {r}")).unwrap_or_default(),
    );
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(Error::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
