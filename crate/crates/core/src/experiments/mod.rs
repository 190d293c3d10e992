//! Configuration-driven experiment harness. Replicates are independent tasks
//! on a bounded worker pool; aggregation is keyed by replicate index, so a
//! record is a pure function of (config, base seed) for any worker count.

pub mod config;
pub mod record;
mod runners;
pub mod svg;

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{Error, Result};

pub use config::{
    DensityPreset, ExperimentConfig, ExperimentKind, FiltrationChoice, ImageParams, ProcessKind,
    RMaxPolicy, TorusParams, CONFIG_SCHEMA,
};
pub use record::{CheckOutcome, FitResult, RunRecord, StatGroup};
pub use runners::stability_margin;

thread_local! {
    static WORKER_OVERRIDE: std::cell::Cell<Option<usize>> = const { std::cell::Cell::new(None) };
}

/// Worker count: an explicit override, else the `TDA_WORKERS` environment
/// variable, else the machine's available parallelism. Records are
/// bit-identical for every worker count; this only controls resources.
pub fn worker_count() -> usize {
    WORKER_OVERRIDE
        .get()
        .or_else(|| std::env::var("TDA_WORKERS").ok().and_then(|s| s.parse().ok()))
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Run with a fixed worker count regardless of the environment.
pub fn run_experiment_with_workers(
    config: &ExperimentConfig,
    out_dir: Option<&Path>,
    workers: usize,
) -> Result<RunRecord> {
    WORKER_OVERRIDE.set(Some(workers));
    let result = run_experiment(config, out_dir);
    WORKER_OVERRIDE.set(None);
    result
}

/// Run replicate closures on a private pool, collecting per-replicate
/// results in index order.
pub(crate) fn run_replicates_lossy<T, F>(replicates: usize, f: F) -> Result<Vec<Result<T>>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count())
        .build()
        .map_err(|e| Error::InvalidParameter(format!("worker pool: {e}")))?;
    Ok(pool.install(|| (0..replicates as u64).into_par_iter().map(&f).collect()))
}

/// As `run_replicates_lossy`, but any replicate failure fails the run (the
/// failure surfaced is the lowest replicate index).
pub(crate) fn run_replicates<T, F>(replicates: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    run_replicates_lossy(replicates, f)?.into_iter().collect()
}

/// Validate and run one experiment; artifacts (records.json, CSV tables,
/// SVG plots, images) go to `out_dir` when given.
pub fn run_experiment(config: &ExperimentConfig, out_dir: Option<&Path>) -> Result<RunRecord> {
    config.validate()?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let start = Instant::now();
    let mut record = match config.kind {
        ExperimentKind::Convergence => runners::run_convergence(config, out_dir)?,
        ExperimentKind::SpacingsD1 => runners::run_spacings_d1(config, out_dir)?,
        ExperimentKind::Tail => runners::run_tail_experiment(config, out_dir)?,
        ExperimentKind::StabilityAudit => runners::run_stability_audit(config, out_dir)?,
        ExperimentKind::RateFit => runners::run_rate_fit(config, out_dir)?,
        ExperimentKind::Figure2 => runners::run_figure2(config, out_dir)?,
        ExperimentKind::BettiConvergence => runners::run_betti_convergence(config, out_dir)?,
        ExperimentKind::MarginalHistograms => runners::run_marginal_histograms(config, out_dir)?,
    };
    record.wall_clock_ms = start.elapsed().as_millis() as u64;
    if let Some(dir) = out_dir {
        write_record_artifacts(dir, &record)?;
    }
    Ok(record)
}

fn write_record_artifacts(dir: &Path, record: &RunRecord) -> Result<()> {
    crate::io::write_json(&dir.join("records.json"), record)?;

    let mut w = csv::Writer::from_path(dir.join("groups.csv"))?;
    w.write_record(["key", "mean", "stderr", "replicates"])?;
    for g in &record.groups {
        w.write_record([
            g.key.clone(),
            format!("{}", g.mean),
            format!("{}", g.stderr),
            g.replicate_values.len().to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("checks.csv"))?;
    w.write_record(["name", "passed", "value", "threshold"])?;
    for c in &record.checks {
        w.write_record([
            c.name.clone(),
            c.passed.to_string(),
            format!("{}", c.value),
            format!("{}", c.threshold),
        ])?;
    }
    w.flush()?;

    if !record.fits.is_empty() {
        let mut w = csv::Writer::from_path(dir.join("fits.csv"))?;
        w.write_record(["key", "slope", "intercept", "r_squared"])?;
        for f in &record.fits {
            w.write_record([
                f.key.clone(),
                format!("{}", f.slope),
                format!("{}", f.intercept),
                format!("{}", f.r_squared),
            ])?;
        }
        w.flush()?;
    }
    Ok(())
}
