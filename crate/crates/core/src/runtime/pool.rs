use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{KrrError, Result};

/// Work and traffic accrued by one task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Counters {
    pub flops: u64,
    pub messages: u64,
    pub bytes: u64,
}

impl Counters {
    pub fn add_flops(&mut self, flops: u64) {
        self.flops += flops;
    }

    pub fn send(&mut self, messages: u64, bytes_per_message: u64) {
        self.messages += messages;
        self.bytes += messages * bytes_per_message;
    }

    pub fn merge(&mut self, other: &Counters) {
        self.flops += other.flops;
        self.messages += other.messages;
        self.bytes += other.bytes;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskStats {
    pub id: usize,
    pub wall_seconds: f64,
    pub counters: Counters,
}

/// Per-task measurements of one [`Runtime::run`] call, in task order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunStats {
    pub tasks: Vec<TaskStats>,
}

impl RunStats {
    /// Critical path: the slowest task.
    pub fn max_wall_seconds(&self) -> f64 {
        self.tasks.iter().map(|t| t.wall_seconds).fold(0.0, f64::max)
    }

    pub fn min_wall_seconds(&self) -> f64 {
        self.tasks
            .iter()
            .map(|t| t.wall_seconds)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn total_wall_seconds(&self) -> f64 {
        self.tasks.iter().map(|t| t.wall_seconds).sum()
    }

    pub fn totals(&self) -> Counters {
        let mut c = Counters::default();
        for t in &self.tasks {
            c.merge(&t.counters);
        }
        c
    }
}

/// Owns the worker pool that executes independent partition tasks.
pub struct Runtime {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl std::fmt::Debug for Runtime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Runtime").field("workers", &self.workers).finish()
    }
}

impl Runtime {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(KrrError::InvalidArgument("worker count must be >= 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("pkrr-worker-{i}"))
            .build()
            .map_err(|e| KrrError::InvalidArgument(format!("cannot start worker pool: {e}")))?;
        Ok(Self { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    /// Runs every task to completion and returns their results in task
    /// order. A failing or panicking task is reported under its index and
    /// does not stop the others.
    pub fn run<T, F>(&self, tasks: Vec<F>) -> (Vec<Result<T>>, RunStats)
    where
        T: Send,
        F: FnOnce(&mut Counters) -> Result<T> + Send,
    {
        let outcomes: Vec<(Result<T>, TaskStats)> = self.pool.install(|| {
            tasks
                .into_par_iter()
                .enumerate()
                .map(|(id, task)| {
                    let mut counters = Counters::default();
                    let start = Instant::now();
                    let result = match catch_unwind(AssertUnwindSafe(|| task(&mut counters))) {
                        Ok(Ok(v)) => Ok(v),
                        Ok(Err(e)) => Err(e.in_partition(id)),
                        Err(payload) => Err(KrrError::TaskPanicked {
                            id,
                            message: panic_message(payload.as_ref()),
                        }),
                    };
                    let wall_seconds = start.elapsed().as_secs_f64();
                    (
                        result,
                        TaskStats {
                            id,
                            wall_seconds,
                            counters,
                        },
                    )
                })
                .collect()
        });
        let (results, tasks) = outcomes.into_iter().unzip();
        (results, RunStats { tasks })
    }
}

fn panic_message(payload: &(dyn std::any::Any + Send)) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "non-string panic payload".into()
    }
}
