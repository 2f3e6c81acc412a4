use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use tnk_cli::cache::{Cache, CACHE_ENV};
use tnk_cli::config::{parse_config, RunConfig, Suite, ToleranceProfile};
use tnk_cli::{run, summary_lines, with_suites, write_outputs};
use tnk_core::index::{replay_case, FuzzCase};
use tnk_core::Exec;

#[derive(Parser, Debug)]
#[command(name = "tnk", version, about = "Numerical verification for instantons on multi-Taub-NUT spaces")]
struct Cli {
    /// JSON run configuration; defaults to the basic instanton on TN_1.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for report.json, CSVs and fuzz failures.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for sampling and fuzzing; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long = "tolerance-profile", global = true, value_enum)]
    tolerance_profile: Option<ToleranceProfile>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the resolved configuration, its hash and the cache location.
    Info,
    /// Geometry or instanton checks.
    Verify {
        #[arg(value_enum)]
        target: VerifyTarget,
    },
    /// Holonomy, asymptotic data and flux.
    Holonomy,
    /// Second Chern character by quadrature and its boundary flux.
    Chern2,
    /// Pontryagin number of the metric.
    Pontryagin,
    /// Index closed forms, assembly, fuzzing and decay classes.
    Index,
    /// Run several suites; `--all` runs every suite.
    Report {
        #[arg(long)]
        all: bool,
    },
    /// Re-check a saved fuzz failure.
    Replay { file: PathBuf },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum VerifyTarget {
    Geometry,
    Instanton,
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => parse_config(p)?,
        None => RunConfig::basic(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(p) = cli.tolerance_profile {
        cfg.profile = p;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<bool> {
    let suites: Vec<Suite> = match &cli.command {
        Command::Info => {
            let cfg = load_config(cli)?;
            let cache = Cache::from_env();
            println!("config_hash: {}", cfg.hash());
            println!("suites: {:?}", cfg.expanded_suites().iter().map(|s| s.name()).collect::<Vec<_>>());
            println!("profile: {:?}", cfg.profile);
            println!("parallel: {}", Exec::Parallel.is_parallel());
            match cache.dir() {
                Some(d) => println!("cache: {}", d.display()),
                None => println!("cache: disabled (set {CACHE_ENV})"),
            }
            println!("{}", serde_json::to_string_pretty(&cfg)?);
            return Ok(true);
        }
        Command::Replay { file } => {
            let text = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
            let case: FuzzCase = serde_json::from_str(&text)?;
            let ok = replay_case(&case)?;
            println!("case {} ({}): {}", case.id, case.kind, if ok { "agrees" } else { "mismatch" });
            return Ok(ok);
        }
        Command::Verify { target: VerifyTarget::Geometry } => vec![Suite::Geometry],
        Command::Verify { target: VerifyTarget::Instanton } => vec![Suite::Instanton],
        Command::Holonomy => vec![Suite::Holonomy],
        Command::Chern2 => vec![Suite::Chern2],
        Command::Pontryagin => vec![Suite::Pontryagin],
        Command::Index => vec![Suite::Index],
        Command::Report { all: true } => vec![Suite::All],
        Command::Report { all: false } => {
            let cfg = load_config(cli)?;
            if cli.config.is_none() {
                bail!("`report` without --all needs --config listing suites");
            }
            cfg.suites.clone()
        }
    };
    let cfg = with_suites(&load_config(cli)?, &suites);
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("tnk-out"));
    let report = run(&cfg, &Cache::from_env(), Exec::Parallel, Some(&out))?;
    write_outputs(&report, &out)?;
    for line in summary_lines(&report) {
        println!("{line}");
    }
    println!("report: {}", out.join("report.json").display());
    Ok(report.global_pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
