//! `topicbench`: run conditions, replay logs, print metrics, assess ratings,
//! host the review service, and generate planted demo corpora.
//!
//! Exit status is 0 on success, 1 for bad input, 2 when the pipeline fails.

use std::io::Write as _;
use std::net::{IpAddr, SocketAddr};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::json;
use thiserror::Error;
use topicbench::assessment::{assess, read_ratings, PacketKey};
use topicbench::config::{Mode, RunConfig};
use topicbench::harness::{cli_run, load_state_dir, replay_files, ComparisonTable};
use topicbench::synth::{planted_corpus, PlantedSpec};
use topicbench_service::{serve, ApiError, ServeError, Session};

#[derive(Parser)]
#[command(name = "topicbench", version, about = "Embedding topic runs with audited refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster, describe, score, and refine under one or more conditions.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// oneshot, ma_only, de_only, or full; repeat or comma-separate.
        #[arg(long, value_delimiter = ',', default_value = "full")]
        mode: Vec<Mode>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-apply an audit log to the initial state and verify every record.
    Replay {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Metrics of a state directory written by `run`.
    Metrics {
        #[arg(long)]
        state: PathBuf,
    },
    /// Reliability and condition comparisons from blinded ratings.
    Assess {
        /// Line-delimited JSON ratings.
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        key: PathBuf,
    },
    /// Serve one session over HTTP for review.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
        #[arg(long, default_value = "full")]
        mode: Mode,
        /// Export state, packets, and ratings here after every change.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a planted-topic corpus, embeddings, and config.
    Generate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 300)]
        docs: usize,
        #[arg(long, default_value_t = 3)]
        topics: usize,
        /// Topics to fit; defaults to the planted count.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

#[derive(Debug, Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] topicbench::Error),
    #[error(transparent)]
    Serve(#[from] ServeError),
    #[error("service: {0}")]
    Session(#[from] ApiError),
    #[error("io: {0}")]
    Runtime(#[source] std::io::Error),
    #[error("output: {0}")]
    Output(#[from] serde_json::Error),
}

impl CliError {
    fn is_input_error(&self) -> bool {
        match self {
            CliError::Core(e) => e.is_input_error(),
            CliError::Serve(ServeError::Bind { .. }) => true,
            CliError::Serve(_) | CliError::Runtime(_) | CliError::Output(_) => false,
            CliError::Session(e) => e.status().is_client_error(),
        }
    }
}

/// A closed pipe (`| head`) is not a failure.
fn print_json(value: &impl serde::Serialize) -> Result<(), CliError> {
    let body = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{body}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Runtime(e)),
        _ => Ok(()),
    }
}

fn dedup(modes: Vec<Mode>) -> Vec<Mode> {
    let mut out = Vec::new();
    for m in modes {
        if !out.contains(&m) {
            out.push(m);
        }
    }
    out
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Run { config, mode, out } => {
            let config = RunConfig::load(&config)?;
            let outcomes = cli_run(config, &dedup(mode), &out)?;
            for o in &outcomes {
                let s = &o.state;
                println!(
                    "{}: {} steps, {} records ({} accepted), score {:.4}, hash {}",
                    o.mode,
                    o.steps,
                    s.log.len(),
                    s.log.accepted().count(),
                    s.score(),
                    s.state_hash()
                );
            }
            if outcomes.len() > 1 {
                print!("\n{}", ComparisonTable::from_outcomes(&outcomes).to_markdown());
            }
            println!("artifacts in {}", out.display());
        }
        Command::Replay { log, config } => {
            let config = RunConfig::load(&config)?;
            let (_, outcome) = replay_files(&log, config)?;
            print_json(&outcome)?;
        }
        Command::Metrics { state } => {
            let s = load_state_dir(&state)?;
            print_json(&json!({
                "iteration": s.iteration,
                "k": s.k(),
                "state_hash": s.state_hash(),
                "summary": s.metrics.summary(s.score()),
                "score_history": s.score_history,
                "indicators": topicbench::audit::indicators(&s.log),
            }))?;
        }
        Command::Assess { ratings, key } => {
            let key = PacketKey::load(&key).map_err(topicbench::Error::from)?;
            let ratings = read_ratings(&ratings).map_err(topicbench::Error::from)?;
            let report = assess(&ratings, &key).map_err(topicbench::Error::from)?;
            print_json(&report)?;
        }
        Command::Serve {
            config,
            port,
            host,
            mode,
            out,
        } => {
            let config = RunConfig::load(&config)?;
            let session = Session::load(config, mode, out)?;
            let addr = SocketAddr::new(host, port);
            let runtime = tokio::runtime::Runtime::new().map_err(CliError::Runtime)?;
            eprintln!("serving {mode} session on http://{addr}");
            runtime.block_on(serve(session, addr))?;
        }
        Command::Generate {
            out,
            docs,
            topics,
            k,
            seed,
        } => {
            let spec = PlantedSpec {
                n_docs: docs,
                n_topics: topics,
                dim: PlantedSpec::default().dim.max(topics),
                seed,
                ..PlantedSpec::default()
            };
            planted_corpus(&spec)?.write(&out, k.unwrap_or(topics))?;
            println!("wrote {} documents in {} topics to {}", docs, topics, out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
    }
}
