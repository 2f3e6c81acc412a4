//! Verification runner: config, suites, caching and report output.

pub mod cache;
pub mod config;
pub mod report;
pub mod suites;

use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use tnk_core::Exec;

use crate::cache::Cache;
use crate::config::{RunConfig, Suite};
use crate::report::{Bound, RunMeta, RunReport, SuiteReport};
use crate::suites::{run_suite, RunContext};

/// Version written into every CSV header comment.
pub const CSV_VERSION: u32 = 1;

/// Runs the configured suites in order, with data parallelism inside each suite.
pub fn run(cfg: &RunConfig, cache: &Cache, exec: Exec, out_dir: Option<&Path>) -> Result<RunReport> {
    cfg.validate()?;
    let ctx = RunContext::new(cfg, cache, exec, out_dir)?;
    let mut suites = Vec::new();
    let mut timing = Vec::new();
    for suite in cfg.expanded_suites() {
        let t = Instant::now();
        suites.push(run_suite(&ctx, suite));
        timing.push((suite.name().to_string(), t.elapsed().as_secs_f64() * 1e3));
    }
    let meta = RunMeta {
        timing_ms: timing,
        cache_hits: ctx.cache_hits.lock().expect("cache-hit log").clone(),
        cache_dir: cache.dir().map(|d| d.display().to_string()),
    };
    Ok(RunReport::new(ctx.hash.clone(), cfg.seed, cfg.profile, suites, meta))
}

/// Writes `report.json` and one CSV per suite into `dir`.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating output dir {}", dir.display()))?;
    fs::write(dir.join("report.json"), serde_json::to_string_pretty(report)?)?;
    for s in &report.suites {
        write_csv(s, &dir.join(format!("{}.csv", s.suite)))?;
    }
    Ok(())
}

const CSV_COLUMNS: [&str; 7] = ["op", "pass", "residual", "tolerance", "bound", "error", "values"];

pub fn write_csv(suite: &SuiteReport, path: &Path) -> Result<()> {
    let mut buf = format!(
        "# tnk-csv v{CSV_VERSION} suite={} columns={}\n",
        suite.suite,
        CSV_COLUMNS.join(",")
    )
    .into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(CSV_COLUMNS)?;
        for r in &suite.records {
            let bound = match r.bound {
                Bound::Upper => "upper",
                Bound::Lower => "lower",
            };
            w.write_record([
                r.op.clone(),
                r.pass.to_string(),
                format!("{:e}", r.residual),
                format!("{:e}", r.tolerance),
                bound.to_string(),
                r.error.clone().unwrap_or_default(),
                serde_json::to_string(&r.values)?,
            ])?;
        }
        w.flush()?;
    }
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Human-readable summary lines for the terminal.
pub fn summary_lines(report: &RunReport) -> Vec<String> {
    let mut out = Vec::new();
    for s in &report.suites {
        for r in &s.records {
            let tag = if r.pass { "PASS" } else { "FAIL" };
            let cmp = match r.bound {
                Bound::Upper => "<=",
                Bound::Lower => ">=",
            };
            let mut line = format!("[{tag}] {}/{}: {:.3e} {cmp} {:.1e}", s.suite, r.op, r.residual, r.tolerance);
            if let Some(e) = &r.error {
                line.push_str(&format!(" ({e})"));
            }
            out.push(line);
        }
    }
    out.push(format!(
        "global: {}",
        if report.global_pass { "PASS" } else { "FAIL" }
    ));
    out
}

/// A run restricted to one suite.
pub fn with_suites(cfg: &RunConfig, suites: &[Suite]) -> RunConfig {
    let mut c = cfg.clone();
    c.suites = suites.to_vec();
    c
}
