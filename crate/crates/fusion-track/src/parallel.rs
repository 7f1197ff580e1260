//! Sweeps on a rayon pool. Jobs come from the core plan and results are
//! assembled in canonical order, so the thread count never changes output.

use fusion_track_core::runner::{
    assemble_sweep, sweep_plan, RunResult, SweepJob, SweepKey, SweepSpec,
};
use fusion_track_core::scenario::ScenarioConfig;
use fusion_track_core::stats::ErrorReport;
use rayon::prelude::*;

use crate::AppError;

/// Runs `f` on a pool of `jobs` threads; `None` uses rayon's default.
pub fn with_pool<T: Send>(
    jobs: Option<usize>,
    f: impl FnOnce() -> T + Send,
) -> Result<T, AppError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    let pool = builder.build().map_err(|e| AppError::Pool(e.to_string()))?;
    Ok(pool.install(f))
}

/// Executes every job; results line up with `jobs`.
pub fn execute_all(jobs: &[SweepJob]) -> Result<Vec<RunResult>, AppError> {
    jobs.par_iter()
        .map(SweepJob::execute)
        .collect::<Result<Vec<_>, _>>()
        .map_err(AppError::from)
}

pub struct SweepOutput {
    pub jobs: Vec<SweepJob>,
    pub runs: Vec<RunResult>,
    pub cells: Vec<(SweepKey, ErrorReport)>,
}

pub fn sweep(
    base: &ScenarioConfig,
    spec: &SweepSpec,
    threads: Option<usize>,
) -> Result<SweepOutput, AppError> {
    let jobs = sweep_plan(base, spec)?;
    log::info!("sweep: {} runs", jobs.len());
    let runs = with_pool(threads, || execute_all(&jobs))??;
    let cells = assemble_sweep(&jobs, runs.clone())?;
    Ok(SweepOutput { jobs, runs, cells })
}
