//! Path-parallel execution of a [`Simulation`].
//!
//! Workers share the simulation read-only and results are collected in path
//! order, so the output does not depend on the worker count.

use evoflow_core::simulate::{PathOutcome, SampleSet, Simulation};
use rayon::prelude::*;

use crate::error::AppError;

pub fn run(sim: &Simulation<'_>, workers: usize) -> Result<SampleSet, AppError> {
    if workers <= 1 {
        return Ok(sim.run()?);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| AppError::Usage(format!("cannot start {workers} workers: {e}")))?;
    let outcomes: Vec<PathOutcome> = pool.install(|| {
        (0..sim.n_paths())
            .into_par_iter()
            .map(|i| sim.run_path(i))
            .collect()
    });
    Ok(sim.collect(&outcomes)?)
}
