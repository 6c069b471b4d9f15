//! Random search with asynchronous successive halving (ASHA).
//!
//! [`AshaScheduler`] is a pure state machine: callers ask it for the next job,
//! run it however they like, and report the resulting loss back. The serial
//! driver [`run_search`] lives here; a threaded driver can reuse the same
//! scheduler behind a lock.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::FeatureTensor;
use crate::math::{exp, ln, mix_seed};
use crate::train::{TrainConfig, Trainer};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("no trial reached the final rung")]
    NoCompletedTrials,
    #[error("trial {0} has no loss at rung {1}")]
    MissingLoss(usize, usize),
    #[error("invalid search configuration: {0}")]
    InvalidConfig(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub learning_rate: (f64, f64),
    pub num_layers: (usize, usize),
    pub hidden_size: (usize, usize),
    pub batch_size: (usize, usize),
    pub decay_k: (f64, f64),
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            learning_rate: (1e-6, 1e-1),
            num_layers: (1, 3),
            hidden_size: (16, 256),
            batch_size: (8, 64),
            decay_k: (0.1, 0.99),
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<(), SearchError> {
        let log_ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo;
        let int_ok = |(lo, hi): (usize, usize)| lo >= 1 && hi >= lo;
        if !log_ok(self.learning_rate) || !(log_ok(self.decay_k) && self.decay_k.1 < 1.0) {
            return Err(SearchError::InvalidConfig("log-uniform bounds must be positive and ordered"));
        }
        if !int_ok(self.num_layers) || !int_ok(self.hidden_size) || !int_ok(self.batch_size) {
            return Err(SearchError::InvalidConfig("integer bounds must be positive and ordered"));
        }
        Ok(())
    }
}

/// One point of the search space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperConfig {
    pub learning_rate: f64,
    pub num_layers: usize,
    pub hidden_size: usize,
    pub batch_size: usize,
    pub decay_k: f64,
}

impl HyperConfig {
    /// Overrides the tuned fields of `base`.
    pub fn apply(&self, base: TrainConfig) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            num_layers: self.num_layers,
            hidden_size: self.hidden_size,
            batch_size: self.batch_size,
            decay_k: self.decay_k,
            ..base
        }
    }
}

fn log_uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        return lo;
    }
    exp(rng.random_range(ln(lo)..ln(hi)))
}

pub fn sample_config<R: Rng + ?Sized>(space: &SearchSpace, rng: &mut R) -> HyperConfig {
    HyperConfig {
        learning_rate: log_uniform(rng, space.learning_rate),
        num_layers: rng.random_range(space.num_layers.0..=space.num_layers.1),
        hidden_size: rng.random_range(space.hidden_size.0..=space.hidden_size.1),
        batch_size: rng.random_range(space.batch_size.0..=space.batch_size.1),
        decay_k: log_uniform(rng, space.decay_k),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AshaConfig {
    pub num_trials: usize,
    pub reduction_factor: usize,
    pub grace_period: usize,
    pub max_epochs: usize,
}

impl Default for AshaConfig {
    fn default() -> Self {
        Self { num_trials: 100, reduction_factor: 4, grace_period: 400, max_epochs: 2100 }
    }
}

impl AshaConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        if self.reduction_factor < 2 {
            return Err(SearchError::InvalidConfig("reduction factor must be at least 2"));
        }
        if self.grace_period == 0 || self.grace_period > self.max_epochs {
            return Err(SearchError::InvalidConfig("grace period must lie in 1..=max_epochs"));
        }
        if self.num_trials == 0 {
            return Err(SearchError::InvalidConfig("at least one trial is required"));
        }
        Ok(())
    }
}

/// Epoch milestones `grace * eta^i` below `max_epochs`, followed by `max_epochs`.
pub fn rung_epochs(cfg: &AshaConfig) -> Vec<usize> {
    let mut out = Vec::new();
    let mut e = cfg.grace_period;
    while e < cfg.max_epochs {
        out.push(e);
        e = e.saturating_mul(cfg.reduction_factor.max(2));
    }
    out.push(cfg.max_epochs);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Pending,
    Running,
    /// Waiting at a rung for a promotion decision.
    Paused,
    Halted,
    Completed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub id: usize,
    pub config: HyperConfig,
    pub seed: u64,
    /// Validation loss at each rung reached; failures are stored as +inf.
    pub rung_losses: Vec<f64>,
    pub epochs_trained: usize,
    pub status: TrialStatus,
}

impl TrialRecord {
    pub fn final_loss(&self) -> Option<f64> {
        self.rung_losses.last().copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Promote,
    Halt,
    Complete,
}

/// One finalized rung report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub trial: usize,
    pub config: HyperConfig,
    pub rung: usize,
    pub epoch: usize,
    /// `None` when the trial failed at this rung.
    pub val_loss: Option<f64>,
    pub decision: Decision,
}

/// Promote iff `trial`'s loss at `rung` ranks within the top `ceil(n / eta)`
/// of the `n` losses recorded there so far. Ties go to the earlier id.
pub fn asha_decide(records: &[TrialRecord], trial: usize, rung: usize, eta: usize) -> Result<Decision, SearchError> {
    let rec = records.iter().find(|r| r.id == trial).ok_or(SearchError::MissingLoss(trial, rung))?;
    let own = *rec.rung_losses.get(rung).ok_or(SearchError::MissingLoss(trial, rung))?;
    let key = |loss: f64| if loss.is_nan() { f64::INFINITY } else { loss };
    let mut n: usize = 0;
    let mut ahead = 0;
    for r in records {
        if let Some(&l) = r.rung_losses.get(rung) {
            n += 1;
            if r.id != trial && (key(l) < key(own) || (key(l) == key(own) && r.id < trial)) {
                ahead += 1;
            }
        }
    }
    Ok(if ahead < n.div_ceil(eta) { Decision::Promote } else { Decision::Halt })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Job {
    /// Train `trial` until `to_epoch` total epochs and report the loss at `rung`.
    Run { trial: usize, rung: usize, to_epoch: usize },
    /// Nothing to hand out until a running job reports.
    Wait,
    Done,
}

/// ASHA bookkeeping. New trials are launched before any promotion; among
/// promotable paused trials the lowest rung goes first, then the lowest loss.
/// With one worker this reproduces synchronous successive halving.
#[derive(Debug, Clone)]
pub struct AshaScheduler {
    pub asha: AshaConfig,
    pub rungs: Vec<usize>,
    pub trials: Vec<TrialRecord>,
    pub ledger: Vec<LedgerEntry>,
    next_new: usize,
    running: BTreeSet<usize>,
}

impl AshaScheduler {
    /// Samples every trial's configuration up front, in id order.
    pub fn new(space: &SearchSpace, asha: AshaConfig, seed: u64) -> Result<Self, SearchError> {
        space.validate()?;
        asha.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let trials = (0..asha.num_trials)
            .map(|id| TrialRecord {
                id,
                config: sample_config(space, &mut rng),
                seed: mix_seed(seed, id as u64),
                rung_losses: vec![],
                epochs_trained: 0,
                status: TrialStatus::Pending,
            })
            .collect();
        Ok(Self { rungs: rung_epochs(&asha), asha, trials, ledger: vec![], next_new: 0, running: BTreeSet::new() })
    }

    pub fn next_job(&mut self) -> Job {
        if self.next_new < self.trials.len() {
            let id = self.next_new;
            self.next_new += 1;
            self.trials[id].status = TrialStatus::Running;
            self.running.insert(id);
            return Job::Run { trial: id, rung: 0, to_epoch: self.rungs[0] };
        }
        for rung in 0..self.rungs.len() - 1 {
            let best = self
                .trials
                .iter()
                .filter(|t| t.status == TrialStatus::Paused && t.rung_losses.len() == rung + 1)
                .filter(|t| asha_decide(&self.trials, t.id, rung, self.asha.reduction_factor) == Ok(Decision::Promote))
                .min_by(|a, b| a.rung_losses[rung].total_cmp(&b.rung_losses[rung]).then(a.id.cmp(&b.id)))
                .map(|t| t.id);
            if let Some(id) = best {
                self.finalize(id, rung, Decision::Promote);
                self.trials[id].status = TrialStatus::Running;
                self.running.insert(id);
                return Job::Run { trial: id, rung: rung + 1, to_epoch: self.rungs[rung + 1] };
            }
        }
        if !self.running.is_empty() {
            return Job::Wait;
        }
        for id in 0..self.trials.len() {
            if self.trials[id].status == TrialStatus::Paused {
                let rung = self.trials[id].rung_losses.len() - 1;
                self.trials[id].status = TrialStatus::Halted;
                self.finalize(id, rung, Decision::Halt);
            }
        }
        Job::Done
    }

    fn finalize(&mut self, id: usize, rung: usize, decision: Decision) {
        let t = &self.trials[id];
        let loss = t.rung_losses[rung];
        self.ledger.push(LedgerEntry {
            trial: id,
            config: t.config,
            rung,
            epoch: self.rungs[rung],
            val_loss: loss.is_finite().then_some(loss),
            decision,
        });
    }

    /// Records the outcome of a `Job::Run`. Errors and non-finite losses halt
    /// the trial with an infinite loss.
    pub fn report(&mut self, trial: usize, rung: usize, loss: Result<f64, String>) {
        self.running.remove(&trial);
        let rec = &mut self.trials[trial];
        debug_assert_eq!(rec.rung_losses.len(), rung);
        rec.epochs_trained = self.rungs[rung];
        match loss {
            Ok(l) if l.is_finite() => {
                rec.rung_losses.push(l);
                if rung + 1 == self.rungs.len() {
                    rec.status = TrialStatus::Completed;
                    self.finalize(trial, rung, Decision::Complete);
                } else {
                    rec.status = TrialStatus::Paused;
                }
            }
            _ => {
                rec.rung_losses.push(f64::INFINITY);
                rec.status = TrialStatus::Halted;
                self.finalize(trial, rung, Decision::Halt);
            }
        }
    }

    /// Trials that passed rung `rung` (reached rung `rung + 1`).
    pub fn survivors(&self, rung: usize) -> Vec<usize> {
        self.trials.iter().filter(|t| t.rung_losses.len() > rung + 1).map(|t| t.id).collect()
    }

    pub fn outcome(self) -> Result<SearchOutcome, SearchError> {
        let best = self
            .trials
            .iter()
            .filter(|t| t.status == TrialStatus::Completed)
            .min_by(|a, b| a.final_loss().unwrap_or(f64::INFINITY).total_cmp(&b.final_loss().unwrap_or(f64::INFINITY)).then(a.id.cmp(&b.id)))
            .cloned()
            .ok_or(SearchError::NoCompletedTrials)?;
        Ok(SearchOutcome { best, rungs: self.rungs, trials: self.trials, ledger: self.ledger })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub best: TrialRecord,
    pub rungs: Vec<usize>,
    pub trials: Vec<TrialRecord>,
    pub ledger: Vec<LedgerEntry>,
}

/// Something that can be trained incrementally and scored.
pub trait Objective {
    type Trial;
    fn start(&self, id: usize, config: &HyperConfig, seed: u64) -> Result<Self::Trial, String>;
    /// Continues training to `to_epoch` total epochs and returns the loss.
    fn advance(&self, trial: &mut Self::Trial, to_epoch: usize) -> Result<f64, String>;
}

/// Single-worker search.
pub fn run_search<O: Objective>(
    space: &SearchSpace,
    asha: AshaConfig,
    objective: &O,
    seed: u64,
) -> Result<SearchOutcome, SearchError> {
    let mut sched = AshaScheduler::new(space, asha, seed)?;
    let mut states: Vec<Option<O::Trial>> = (0..asha.num_trials).map(|_| None).collect();
    loop {
        match sched.next_job() {
            Job::Run { trial, rung, to_epoch } => {
                let loss = run_job(objective, &sched.trials[trial], &mut states[trial], to_epoch);
                sched.report(trial, rung, loss);
                if matches!(sched.trials[trial].status, TrialStatus::Halted | TrialStatus::Completed) {
                    states[trial] = None;
                }
            }
            Job::Wait => unreachable!("a serial driver never leaves jobs running"),
            Job::Done => break,
        }
    }
    sched.outcome()
}

/// Starts the trial on first use, then advances it.
pub fn run_job<O: Objective>(
    objective: &O,
    record: &TrialRecord,
    state: &mut Option<O::Trial>,
    to_epoch: usize,
) -> Result<f64, String> {
    if state.is_none() {
        *state = Some(objective.start(record.id, &record.config, record.seed)?);
    }
    objective.advance(state.as_mut().expect("just set"), to_epoch)
}

/// Trains real models; the loss is the latest validation loss.
pub struct TrainingObjective<'a> {
    pub tensor: &'a FeatureTensor,
    pub base: TrainConfig,
}

impl Objective for TrainingObjective<'_> {
    type Trial = Trainer;

    fn start(&self, _id: usize, config: &HyperConfig, seed: u64) -> Result<Trainer, String> {
        let cfg = TrainConfig { seed, ..config.apply(self.base) };
        Trainer::new(self.tensor, cfg).map_err(|e| alloc::format!("{e}"))
    }

    fn advance(&self, trial: &mut Trainer, to_epoch: usize) -> Result<f64, String> {
        trial.advance_to(to_epoch).map_err(|e| alloc::format!("{e}"))?;
        trial.last_val_loss().ok_or_else(|| String::from("no epochs were run"))
    }
}
