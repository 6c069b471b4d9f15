//! Multi-threaded ASHA driver, plus the ledger and summary files.
//!
//! Workers share one scheduler behind a mutex and train outside the lock.
//! With one worker the job order, and so the ledger, is fully deterministic.
//! With more workers promotions depend on which trial reports first.

use std::sync::{Condvar, Mutex};

use reentry_core::hypersearch::{
    run_job, AshaConfig, AshaScheduler, HyperConfig, Job, LedgerEntry, Objective, SearchOutcome, SearchSpace,
    TrialStatus,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

struct Shared<T> {
    sched: AshaScheduler,
    states: Vec<Option<T>>,
}

/// Runs the search with up to `jobs` concurrent trials.
pub fn run_parallel<O>(space: &SearchSpace, asha: AshaConfig, objective: &O, seed: u64, jobs: usize) -> Result<SearchOutcome>
where
    O: Objective + Sync,
    O::Trial: Send,
{
    if jobs == 0 {
        return Err(Error::config("--jobs must be at least 1"));
    }
    let sched = AshaScheduler::new(space, asha, seed)?;
    let states = (0..asha.num_trials).map(|_| None).collect();
    let shared = Mutex::new(Shared { sched, states });
    let wake = Condvar::new();

    std::thread::scope(|s| {
        for _ in 0..jobs.min(asha.num_trials) {
            s.spawn(|| worker(&shared, &wake, objective));
        }
    });
    let shared = shared.into_inner().map_err(|_| Error::Numerical("a tuning worker panicked".into()))?;
    Ok(shared.sched.outcome()?)
}

fn worker<O>(shared: &Mutex<Shared<O::Trial>>, wake: &Condvar, objective: &O)
where
    O: Objective + Sync,
    O::Trial: Send,
{
    let mut guard = shared.lock().expect("scheduler lock");
    loop {
        match guard.sched.next_job() {
            Job::Run { trial, rung, to_epoch } => {
                let record = guard.sched.trials[trial].clone();
                let mut state = guard.states[trial].take();
                drop(guard);
                let loss = run_job(objective, &record, &mut state, to_epoch);
                guard = shared.lock().expect("scheduler lock");
                guard.sched.report(trial, rung, loss);
                if guard.sched.trials[trial].status == TrialStatus::Paused {
                    guard.states[trial] = state;
                }
                wake.notify_all();
            }
            Job::Wait => guard = wake.wait(guard).expect("scheduler lock"),
            Job::Done => {
                wake.notify_all();
                return;
            }
        }
    }
}

/// One JSON object per rung decision.
pub fn ledger_jsonl(ledger: &[LedgerEntry]) -> Result<String> {
    let mut out = String::new();
    for e in ledger {
        out.push_str(&serde_json::to_string(e)?);
        out.push('\n');
    }
    Ok(out)
}

/// Best configuration in the shape of the paper's hyperparameter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneSummary {
    pub trial: usize,
    pub learning_rate: f64,
    pub num_layers: usize,
    pub hidden_size: usize,
    pub batch_size: usize,
    pub decay_k: f64,
    pub val_loss: f64,
    pub rungs: Vec<usize>,
    pub trials: usize,
    pub completed: usize,
}

impl TuneSummary {
    pub fn of(outcome: &SearchOutcome) -> Self {
        let HyperConfig { learning_rate, num_layers, hidden_size, batch_size, decay_k } = outcome.best.config;
        Self {
            trial: outcome.best.id,
            learning_rate,
            num_layers,
            hidden_size,
            batch_size,
            decay_k,
            val_loss: outcome.best.final_loss().unwrap_or(f64::INFINITY),
            rungs: outcome.rungs.clone(),
            trials: outcome.trials.len(),
            completed: outcome.trials.iter().filter(|t| t.status == TrialStatus::Completed).count(),
        }
    }
}
