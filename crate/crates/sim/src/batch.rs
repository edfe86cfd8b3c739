//! Runs many seeds of one scenario on a bounded pool of threads.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{Context, Result};
use terra_core::sweep::{self, RunSummary};

use crate::scenario_file::ScenarioFile;

pub struct RunResult {
    pub seed: u64,
    pub summary: RunSummary,
}

/// Runs `seeds` with up to `jobs` workers. Results come back in seed order
/// whatever the worker count.
pub fn run_seeds(file: &ScenarioFile, seeds: &[u64], jobs: usize) -> Result<Vec<RunResult>> {
    let scenarios = seeds
        .iter()
        .map(|&s| file.build(s))
        .collect::<Result<Vec<_>>>()?;
    let jobs = jobs.clamp(1, seeds.len().max(1));
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<RunSummary>>>> =
        seeds.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= scenarios.len() {
                    break;
                }
                let out = sweep::run(&scenarios[i]).map_err(anyhow::Error::from);
                *slots[i].lock().expect("result slot poisoned") = Some(out);
            });
        }
    });
    seeds
        .iter()
        .zip(slots)
        .map(|(&seed, slot)| {
            let summary = slot
                .into_inner()
                .expect("result slot poisoned")
                .expect("every run index is claimed")
                .with_context(|| format!("run with seed {seed}"))?;
            Ok(RunResult { seed, summary })
        })
        .collect()
}

/// Default worker count: the machine's available parallelism.
pub fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
