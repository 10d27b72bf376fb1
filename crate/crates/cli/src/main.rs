use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use foresight_core::batch::run_protocols;
use foresight_core::harness::run_with_hook;
use foresight_core::report::{aggregate, bins_csv, comparison_csv};
use foresight_core::{
    compute_metrics, CodecConfig, Error as CoreError, ExperimentConfig, FeedbackMode, GvfLearner,
    LearnerSource, ProtocolOutcome, ProtocolReport, TrialConfig, TrialLog, WeightSnapshot,
};
use foresight_server::Session;

#[derive(Parser, Debug)]
#[command(name = "foresight", version, about = "Predictive load feedback for a simulated servo limb")]
struct Cli {
    /// TOML config file layered over the built-in defaults.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config value, e.g. `--set thresholds.predictive_value=850`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct SeedArgs {
    /// Seed to run. Repeat for several independent runs.
    #[arg(long = "seed", value_name = "N", default_values_t = [0u64])]
    seeds: Vec<u64>,
    #[arg(long = "duration-ticks", value_name = "N")]
    duration_ticks: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a single trial with the scripted operator.
    Simulate {
        #[arg(long, value_name = "NAME")]
        task: FeedbackMode,
        #[command(flatten)]
        seeds: SeedArgs,
        /// Output directory. Trained snapshots are looked up here too.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Snapshot for reactive/predictive trials. Defaults to DIR/snapshot.json.
        #[arg(long, value_name = "PATH")]
        snapshot: Option<PathBuf>,
        /// Pace ticks to the wall clock instead of running flat out.
        #[arg(long)]
        realtime: bool,
    },
    /// Run training followed by the three test tasks.
    Protocol {
        #[command(flatten)]
        seeds: SeedArgs,
        #[arg(long, value_name = "DIR", default_value = "runs")]
        out: PathBuf,
    },
    /// Serve live sessions over a web socket.
    Serve {
        #[arg(long, value_name = "ADDR", default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Where session logs and the training snapshot are written.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        /// Start with this trained snapshot loaded.
        #[arg(long, value_name = "PATH")]
        snapshot: Option<PathBuf>,
        #[arg(long, value_name = "N", default_value_t = 0)]
        seed: u64,
    },
    /// Recompute metrics from a saved trial log.
    Replay {
        log: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Combine protocol reports into comparison tables.
    Report {
        /// report.json files or directories containing them.
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
}

/// Failure classes that map onto exit codes.
enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<CoreError>() {
            Some(CoreError::Config { .. }) => Failure::Config(e),
            _ => Failure::Runtime(e),
        }
    }
}

fn error_code(e: &anyhow::Error, fallback: &str) -> String {
    e.chain()
        .find_map(|c| c.downcast_ref::<CoreError>())
        .map(|c| c.code().to_string())
        .unwrap_or_else(|| fallback.to_string())
}

fn report_failure(code: &str, e: &anyhow::Error) {
    let body = serde_json::json!({ "error": { "code": code, "message": format!("{e:#}") } });
    eprintln!("{body}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .with_writer(std::io::stderr)
        .init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            report_failure(&error_code(&e, "config"), &e);
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            report_failure(&error_code(&e, "runtime"), &e);
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli, duration_ticks: Option<u64>) -> Result<ExperimentConfig, Failure> {
    let mut config = ExperimentConfig::load(cli.config.as_deref(), &cli.overrides)
        .context("loading configuration")
        .map_err(Failure::Config)?;
    if let Some(n) = duration_ticks {
        config.trial.duration_ticks = n;
    }
    Ok(config)
}

fn run(cli: Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Simulate {
            task,
            seeds,
            out,
            snapshot,
            realtime,
        } => {
            let config = load_config(&cli, seeds.duration_ticks)?;
            simulate(&config, *task, &seeds.seeds, out.as_deref(), snapshot.as_deref(), *realtime)?;
        }
        Command::Protocol { seeds, out } => {
            let config = load_config(&cli, seeds.duration_ticks)?;
            protocol(&config, &seeds.seeds, out)?;
        }
        Command::Serve {
            addr,
            out,
            snapshot,
            seed,
        } => {
            let config = load_config(&cli, None)?;
            serve(config, *addr, out.clone(), snapshot.as_deref(), *seed)?;
        }
        Command::Replay { log, out } => {
            let config = load_config(&cli, None)?;
            replay(&config.codec, log, out.as_deref())?;
        }
        Command::Report { inputs, out } => report(inputs, out.as_deref())?,
    }
    Ok(())
}

/// Write to stdout, treating a closed pipe as success.
fn emit(text: &str) {
    use std::io::Write;
    let mut stdout = std::io::stdout().lock();
    let _ = stdout.write_all(text.as_bytes()).and_then(|()| stdout.flush());
}

fn seed_dir(out: &Path, seed: u64, many: bool) -> PathBuf {
    if many {
        out.join(format!("seed-{seed}"))
    } else {
        out.to_path_buf()
    }
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> anyhow::Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn simulate(
    config: &ExperimentConfig,
    task: FeedbackMode,
    seeds: &[u64],
    out: Option<&Path>,
    snapshot: Option<&Path>,
    realtime: bool,
) -> anyhow::Result<()> {
    let many = seeds.len() > 1;
    for &seed in seeds {
        let dir = out.map(|o| seed_dir(o, seed, many));
        let (source, learner) = match task {
            FeedbackMode::Training => (
                LearnerSource::FreshLearning,
                Some(GvfLearner::new(
                    config.codec.feature_length(),
                    config.learner.alpha,
                    config.learner.gamma,
                )?),
            ),
            _ => {
                let path = snapshot
                    .map(Path::to_path_buf)
                    .or_else(|| dir.as_ref().map(|d| d.join("snapshot.json")));
                match path {
                    Some(p) if p.exists() || snapshot.is_some() || task == FeedbackMode::Predictive => {
                        let snap = WeightSnapshot::load(&p)?;
                        (LearnerSource::FromSnapshot(p), Some(GvfLearner::restore(&snap)?))
                    }
                    None if task == FeedbackMode::Predictive => {
                        return Err(CoreError::NoSnapshot(
                            "predictive trials need --snapshot or a trained snapshot in --out".into(),
                        )
                        .into())
                    }
                    _ => (LearnerSource::None, None),
                }
            }
        };
        let trial = TrialConfig::from_experiment(config, task, source, seed);
        let started = Instant::now();
        let period = Duration::from_secs_f64(config.sim.dt_ms / 1000.0);
        let mut ticks = 0u32;
        let outcome = run_with_hook(&trial, learner, |_| {
            if realtime {
                ticks += 1;
                let deadline = started + period * ticks;
                if let Some(wait) = deadline.checked_duration_since(Instant::now()) {
                    std::thread::sleep(wait);
                }
            }
        })?;

        let metrics_json = serde_json::to_string_pretty(&outcome.metrics)?;
        match &dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
                outcome.log.save(&dir.join(format!("{task}.log")))?;
                write(&dir.join(format!("{task}.metrics.json")), &metrics_json)?;
                if let Some(snap) = &outcome.snapshot {
                    snap.save(&dir.join("snapshot.json"))?;
                }
                eprintln!(
                    "seed {seed}: {task} total load {} -> {}",
                    outcome.metrics.total_summed_load,
                    dir.display()
                );
            }
            None => emit(&format!("{metrics_json}\n")),
        }
    }
    Ok(())
}

fn write_protocol(outcome: &ProtocolOutcome, dir: &Path, config: &ExperimentConfig) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (log, task) in outcome.logs.iter().zip(&outcome.report.tasks) {
        log.save(&dir.join(format!("{}.log", task.task)))?;
    }
    outcome.snapshot.save(&dir.join("snapshot.json"))?;
    write(&dir.join("report.json"), outcome.report.to_json())?;
    write(&dir.join("bins.csv"), bins_csv([&outcome.report]))?;
    write(&dir.join("config.toml"), config.to_toml_string())?;
    Ok(())
}

fn protocol(config: &ExperimentConfig, seeds: &[u64], out: &Path) -> anyhow::Result<()> {
    let outcomes = run_protocols(config, seeds)?;
    let many = seeds.len() > 1;
    for o in &outcomes {
        write_protocol(o, &seed_dir(out, o.report.seed, many), config)?;
    }
    let reports: Vec<&ProtocolReport> = outcomes.iter().map(|o| &o.report).collect();
    let table = comparison_csv(reports.iter().copied());
    write(&out.join("comparison.csv"), &table)?;
    if many {
        write(&out.join("bins.csv"), bins_csv(reports.iter().copied()))?;
    }
    emit(&table);
    Ok(())
}

fn serve(
    config: ExperimentConfig,
    addr: SocketAddr,
    out: Option<PathBuf>,
    snapshot: Option<&Path>,
    seed: u64,
) -> anyhow::Result<()> {
    let mut session = Session::new(config, out, seed)?;
    if let Some(path) = snapshot {
        session = session.with_snapshot(WeightSnapshot::load(path)?)?;
    }
    let runtime = tokio::runtime::Runtime::new().context("starting async runtime")?;
    runtime.block_on(async move {
        let listener = foresight_server::bind(addr).await?;
        eprintln!("listening on ws://{}/ws", listener.local_addr()?);
        foresight_server::serve(listener, session).await?;
        anyhow::Ok(())
    })
}

fn replay(codec: &CodecConfig, log_path: &Path, out: Option<&Path>) -> anyhow::Result<()> {
    let log = TrialLog::load(log_path).with_context(|| format!("reading {}", log_path.display()))?;
    if log.header.num_bins != codec.num_bins || log.header.range_deg != codec.range_deg {
        bail!(CoreError::Domain(format!(
            "log was recorded with {} bins over {} deg, config has {} over {}",
            log.header.num_bins, log.header.range_deg, codec.num_bins, codec.range_deg
        )));
    }
    let metrics = compute_metrics(&log, codec)?;
    let json = serde_json::to_string_pretty(&metrics)?;
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            write(&dir.join(format!("{}.metrics.json", log.header.task)), &json)?;
        }
        None => emit(&format!("{json}\n")),
    }
    Ok(())
}

fn collect_reports(path: &Path, found: &mut Vec<PathBuf>) -> anyhow::Result<()> {
    if path.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(path)
            .with_context(|| format!("reading {}", path.display()))?
            .collect::<Result<_, _>>()?;
        entries.sort_by_key(|e| e.path());
        for e in entries {
            let p = e.path();
            if p.is_dir() {
                collect_reports(&p, found)?;
            } else if p.file_name().is_some_and(|n| n == "report.json") {
                found.push(p);
            }
        }
    } else {
        found.push(path.to_path_buf());
    }
    Ok(())
}

fn report(inputs: &[PathBuf], out: Option<&Path>) -> anyhow::Result<()> {
    let mut files = Vec::new();
    for p in inputs {
        collect_reports(p, &mut files)?;
    }
    if files.is_empty() {
        bail!("no report.json files found");
    }
    let mut reports = Vec::with_capacity(files.len());
    for f in &files {
        let text = std::fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        reports.push(ProtocolReport::from_json(&text).with_context(|| format!("parsing {}", f.display()))?);
    }
    let table = comparison_csv(&reports);
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        write(&dir.join("comparison.csv"), &table)?;
        write(&dir.join("bins.csv"), bins_csv(&reports))?;
        write(
            &dir.join("aggregate.json"),
            serde_json::to_string_pretty(&aggregate(&reports))?,
        )?;
    }
    emit(&table);
    Ok(())
}
