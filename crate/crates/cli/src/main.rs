use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use finsler_billiards::experiment::{
    betti_table, run_search, run_trace, run_verify, ExperimentConfig, Mode, TraceReport,
};
use finsler_billiards::topology::betti_numbers;

#[derive(Parser, Debug)]
#[command(name = "finsler", version, about = "Finsler and magnetic billiard experiments")]
struct Cli {
    /// Worker threads for the orbit search (default: available parallelism).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Write the report here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Search for periodic orbits and check the orbit-count bound.
    Search(ConfigArgs),
    /// Follow a billiard trajectory from the configured initial state.
    Trace {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Betti numbers of the cyclic configuration space quotient.
    Betti {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        r: usize,
        #[arg(long, value_enum, default_value_t = BettiFormat::Table)]
        format: BettiFormat,
    },
    /// Betti profile, bounds and their consistency checks as JSON.
    Verify {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        r: usize,
    },
    /// Run whatever mode the config file names.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

#[derive(Args, Debug)]
struct ConfigArgs {
    #[arg(long)]
    config: PathBuf,
    /// Override `search.rng_seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the period.
    #[arg(long)]
    r: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BettiFormat {
    Table,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Search,
    Trace,
    Betti,
    Verify,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Search => Mode::Search,
            ModeArg::Trace => Mode::Trace,
            ModeArg::Betti => Mode::Betti,
            ModeArg::Verify => Mode::Verify,
        }
    }
}

fn load(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut config = ExperimentConfig::from_json(&text)
        .with_context(|| format!("parsing {}", args.config.display()))?;
    if let Some(seed) = args.seed {
        config.search.rng_seed = seed;
    }
    if let Some(r) = args.r {
        config.r = r;
    }
    Ok(config)
}

fn emit(out: Option<&Path>, body: &[u8]) -> Result<()> {
    match out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(body)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn json(value: &impl serde::Serialize) -> Result<Vec<u8>> {
    let mut body = serde_json::to_vec_pretty(value)?;
    body.push(b'\n');
    Ok(body)
}

fn trace_csv(report: &TraceReport) -> Result<Vec<u8>> {
    let d = report.states.first().map_or(0, |s| s.x.len());
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = std::iter::once("t".to_string())
        .chain((1..=d).map(|i| format!("x{i}")))
        .chain((1..=d).map(|i| format!("v{i}")));
    w.write_record(header)?;
    for (t, s) in report.states.iter().enumerate() {
        let row = std::iter::once(t.to_string())
            .chain(s.x.iter().chain(&s.v).map(|c| c.to_string()));
        w.write_record(row)?;
    }
    Ok(w.into_inner()?)
}

fn search(config: &ExperimentConfig, out: Option<&Path>) -> Result<u8> {
    let report = run_search(config)?;
    log::info!(
        "{} classes, status {:?}",
        report.classes,
        report.status
    );
    emit(out, &json(&report)?)?;
    Ok(report.status.exit_code() as u8)
}

fn trace(config: &ExperimentConfig, format: Format, out: Option<&Path>) -> Result<u8> {
    let report = run_trace(config)?;
    let body = match format {
        Format::Csv => trace_csv(&report)?,
        Format::Json => json(&report)?,
    };
    emit(out, &body)?;
    Ok(0)
}

fn betti(d: usize, r: usize, format: BettiFormat, out: Option<&Path>) -> Result<u8> {
    let profile = betti_numbers(d, r)?;
    let body = match format {
        BettiFormat::Table => betti_table(&profile).into_bytes(),
        BettiFormat::Json => json(&profile)?,
    };
    emit(out, &body)?;
    Ok(0)
}

fn verify(d: usize, r: usize, out: Option<&Path>) -> Result<u8> {
    let report = run_verify(d, r)?;
    emit(out, &json(&report)?)?;
    if !report.all_hold() {
        bail!("consistency checks failed for d = {d}, r = {r}");
    }
    Ok(0)
}

fn run(cli: Cli) -> Result<u8> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            bail!("--jobs must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the worker pool")?;
    }
    let out = cli.out.as_deref();
    match cli.command {
        Command::Search(args) => search(&load(&args)?, out),
        Command::Trace { config, format } => trace(&load(&config)?, format, out),
        Command::Betti { d, r, format } => betti(d, r, format, out),
        Command::Verify { d, r } => verify(d, r, out),
        Command::Run {
            config,
            mode,
            format,
        } => {
            let mut config = load(&config)?;
            if let Some(mode) = mode {
                config.mode = mode.into();
            }
            let d = config.validate()?.dim();
            match config.mode {
                Mode::Search => search(&config, out),
                Mode::Trace => trace(&config, format, out),
                Mode::Betti => betti(d, config.r, BettiFormat::Json, out),
                Mode::Verify => verify(d, config.r, out),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FINSLER_LOG", "error"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
