use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Parser, Subcommand};
use rayon::prelude::*;

use hhrl::config::{InterventionConfig, LearnerRef};
use hhrl::rl::{TableId, TableSnapshot};
use hhrl::runner::log::read_records;
use hhrl::runner::report::{report_emit, AggregateReport, ReportFormat, RunSummary};
use hhrl::runner::{replay, run_intervention};
use hhrl::service::{http, SessionManager};

#[derive(Parser)]
#[command(name = "hhrl", version, about = "Personalized tutoring sessions: simulate, report, serve, play")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run simulated interventions, one per seed.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Seeds as `a..b` (inclusive), a comma list, or a single number.
        #[arg(long, default_value = "1")]
        seeds: String,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Replay event logs and write their convergence reports.
    Report {
        #[arg(required = true)]
        logs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: ReportFormat,
        #[arg(long, default_value = "reports")]
        out: PathBuf,
    },
    /// Serve live sessions over HTTP and websocket.
    Serve {
        #[arg(long, env = "HHRL_BIND", default_value = "127.0.0.1:8080")]
        bind: String,
        #[arg(long, env = "HHRL_DATA_DIR", default_value = "data")]
        data_dir: PathBuf,
        /// Idle timeout in seconds.
        #[arg(long, env = "HHRL_SESSION_TIMEOUT", default_value_t = 900)]
        session_timeout: u64,
    },
    /// Play one session in the terminal.
    Play {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the session's event log here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

fn parse_seeds(s: &str) -> anyhow::Result<Vec<u64>> {
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().context("seed range start")?;
        let b: u64 = b.trim().parse().context("seed range end")?;
        anyhow::ensure!(a <= b, "empty seed range {s}");
        return Ok((a..=b).collect());
    }
    s.split(',').map(|p| p.trim().parse::<u64>().with_context(|| format!("bad seed {p:?}"))).collect()
}

fn write_tables(path: &Path, run: &hhrl::runner::InterventionRun, config: &InterventionConfig) -> io::Result<()> {
    let tables = serde_json::json!({
        "loc": TableSnapshot::capture(TableId::Loc, &run.loc_table, config.engine.loc, None),
        "lof": TableSnapshot::capture(TableId::Lof, &run.lof_table, config.engine.lof, None),
    });
    fs::write(path, serde_json::to_string_pretty(&tables).expect("tables serialize"))
}

fn simulate(config_path: &Path, seeds: &str, out: &Path, jobs: usize) -> ExitCode {
    let config = match InterventionConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let seeds = match parse_seeds(seeds) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let LearnerRef::Simulated(name) = config.learner.clone() else {
        eprintln!("error: invalid configuration at `learner`: simulate needs a simulated learner");
        return ExitCode::from(2);
    };
    if let Err(e) = fs::create_dir_all(out) {
        eprintln!("error: cannot create {}: {e}", out.display());
        return ExitCode::from(1);
    }
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool");
    let results: Vec<Result<RunSummary, String>> = pool.install(|| {
        seeds
            .par_iter()
            .map(|&seed| {
                let mut c = config.clone();
                c.seed = seed;
                let stem = format!("{name}-seed{seed}");
                let run_one = || -> anyhow::Result<RunSummary> {
                    let log_path = out.join(format!("{stem}.events.ndjson"));
                    let mut sink = BufWriter::new(File::create(&log_path)?);
                    let run = run_intervention(&c, Some(&mut sink))?;
                    drop(sink);
                    report_emit(&run.report, out, &stem, ReportFormat::Csv)?;
                    report_emit(&run.report, out, &stem, ReportFormat::Json)?;
                    write_tables(&out.join(format!("{stem}.tables.json")), &run, &c)?;
                    Ok(RunSummary::new(&name, seed, &run.report))
                };
                run_one().map_err(|e| format!("seed {seed}: {e:#}"))
            })
            .collect()
    });
    let (mut runs, mut failures) = (Vec::new(), Vec::new());
    for r in results {
        match r {
            Ok(s) => runs.push(s),
            Err(e) => failures.push(e),
        }
    }
    let aggregate = AggregateReport::new(runs, failures.clone());
    if let Err(e) = aggregate.write(out) {
        eprintln!("error: cannot write aggregate report: {e}");
        return ExitCode::from(1);
    }
    println!("{} runs written to {}", aggregate.runs.len(), out.display());
    if let Some(a) = aggregate.mean_oracle_agreement {
        println!("mean oracle agreement {a:.3}");
    }
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        for f in &failures {
            eprintln!("failed: {f}");
        }
        ExitCode::from(1)
    }
}

fn report(logs: &[PathBuf], format: ReportFormat, out: &Path) -> ExitCode {
    let mut code = ExitCode::SUCCESS;
    for path in logs {
        let result = File::open(path)
            .map_err(hhrl::LogError::from)
            .and_then(|f| read_records(BufReader::new(f)))
            .and_then(|records| replay(&records));
        let replayed = match result {
            Ok(r) => r,
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                code = ExitCode::from(1);
                continue;
            }
        };
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("log");
        let stem = name.strip_suffix(".events.ndjson").or_else(|| name.strip_suffix(".ndjson")).unwrap_or(name);
        match report_emit(&replayed.report, out, stem, format) {
            Ok(files) => {
                for f in files {
                    println!("{}", f.display());
                }
            }
            Err(e) => {
                eprintln!("{}: cannot write report: {e}", path.display());
                code = ExitCode::from(1);
            }
        }
    }
    code
}

async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

fn serve(bind: &str, data_dir: &Path, timeout: u64) -> ExitCode {
    let runtime = tokio::runtime::Runtime::new().expect("tokio runtime");
    runtime.block_on(async {
        let manager = match SessionManager::open(data_dir, Duration::from_secs(timeout)) {
            Ok(m) => m,
            Err(e) => {
                eprintln!("error: cannot open data directory {}: {e}", data_dir.display());
                return ExitCode::from(1);
            }
        };
        let listener = match tokio::net::TcpListener::bind(bind).await {
            Ok(l) => l,
            Err(e) => {
                eprintln!("error: cannot bind {bind}: {e}");
                return ExitCode::from(1);
            }
        };
        let addr = listener.local_addr().map(|a| a.to_string()).unwrap_or_else(|_| bind.to_string());
        println!("listening on {addr}");
        let reaper = http::spawn_reaper(manager.clone());
        let served = axum::serve(listener, http::router(manager.clone()))
            .with_graceful_shutdown(shutdown_signal())
            .await;
        reaper.abort();
        if let Err(e) = served {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
        match manager.flush_all() {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: flush failed: {e}");
                ExitCode::from(1)
            }
        }
    })
}

fn play(config: Option<&Path>, seed: Option<u64>, log: Option<&Path>) -> ExitCode {
    let config = match config.map(InterventionConfig::load).transpose() {
        Ok(c) => c.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let seed = seed.unwrap_or_else(rand::random);
    let mut log_file = match log.map(File::create).transpose() {
        Ok(f) => f.map(BufWriter::new),
        Err(e) => {
            eprintln!("error: cannot create log: {e}");
            return ExitCode::from(1);
        }
    };
    let stdin = io::stdin();
    let sink = log_file.as_mut().map(|f| f as &mut dyn io::Write);
    match hhrl::textplay::play_session(&config.engine, seed, stdin.lock(), io::stdout(), sink) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(io::stderr)
        .init();
    let cli = Cli::parse();
    match cli.command {
        Command::Simulate { config, seeds, out, jobs } => simulate(&config, &seeds, &out, jobs),
        Command::Report { logs, format, out } => report(&logs, format, &out),
        Command::Serve { bind, data_dir, session_timeout } => serve(&bind, &data_dir, session_timeout),
        Command::Play { config, seed, log } => play(config.as_deref(), seed, log.as_deref()),
    }
}
