//! Monte Carlo teleportation runs over a [`SourceModel`] and the matching
//! closed-form expectations.
//!
//! A trial *consumes* the input qubit whenever Alice receives a particle and
//! performs her Bell measurement. It is a *coincidence* when Bob also receives
//! one. A consumed trial fails when Bob got nothing or his corrected state has
//! fidelity below the threshold; trials where Alice received nothing are left
//! out of the failure-rate denominator.

mod sampler;
mod stats;

pub use sampler::{haar_random_qubit, trial_rng, QubitSampler};
pub use stats::{binomial_ci95, binomial_sigma, wilson_interval, Z_95};

use rand::Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::protocol::{measure_alice_only, teleport_ideal, teleport_with_resource, BellOutcome};
use crate::qstate::StateError;
use crate::source::{sample_emission, DeliveryKind, SourceError, SourceModel};

/// Default fidelity a delivered state must reach to count as a replica.
pub const DEFAULT_FIDELITY_THRESHOLD: f64 = 0.99;

/// Trials per work unit. Fixed so that the split into units, and therefore
/// every reduction, is independent of the worker count.
const BLOCK_TRIALS: u64 = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("fidelity threshold {0} is outside (0.5, 1]")]
    ThresholdOutOfRange(f64),
    #[error("no channel delivers a particle to Alice")]
    NoConsumedChannels,
    #[error("no channel delivers particles to both Alice and Bob")]
    NoCoincidenceChannels,
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
    pub fidelity_threshold: f64,
    pub sampler: QubitSampler,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            trials: 1,
            seed: 0,
            workers: 1,
            fidelity_threshold: DEFAULT_FIDELITY_THRESHOLD,
            sampler: QubitSampler::Haar,
        }
    }
}

impl ExperimentConfig {
    pub fn new(trials: u64, seed: u64) -> Self {
        ExperimentConfig {
            trials,
            seed,
            ..Default::default()
        }
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.fidelity_threshold = threshold;
        self
    }

    pub fn with_sampler(mut self, sampler: QubitSampler) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.trials == 0 {
            return Err(ExperimentError::InvalidConfig {
                field: "trials",
                reason: "must be at least 1".into(),
            });
        }
        if self.workers == 0 {
            return Err(ExperimentError::InvalidConfig {
                field: "workers",
                reason: "must be at least 1".into(),
            });
        }
        check_threshold(self.fidelity_threshold)
    }
}

fn check_threshold(threshold: f64) -> Result<(), ExperimentError> {
    if threshold > 0.5 && threshold <= 1.0 {
        Ok(())
    } else {
        Err(ExperimentError::ThresholdOutOfRange(threshold))
    }
}

/// What happened in one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord<'m> {
    pub trial_index: u64,
    pub channel_label: &'m str,
    /// Alice measured, destroying the input qubit.
    pub consumed: bool,
    /// Both parties received a particle.
    pub coincidence: bool,
    pub outcome: Option<BellOutcome>,
    /// Fidelity of Bob's corrected state to the input; present iff coincidence.
    pub fidelity: Option<f64>,
}

impl TrialRecord<'_> {
    pub fn failed(&self, threshold: f64) -> bool {
        self.consumed && self.fidelity.map_or(true, |f| f < threshold)
    }
}

/// Runs trial `trial_index` of a run seeded with `seed`. Depends on nothing
/// else, so trials can be evaluated in any order.
pub fn run_trial<'m>(
    model: &'m SourceModel,
    sampler: &QubitSampler,
    seed: u64,
    trial_index: u64,
) -> Result<TrialRecord<'m>, ExperimentError> {
    let mut rng = trial_rng(seed, trial_index);
    let qubit = sampler.sample([rng.random(), rng.random()]);
    let channel_draw: f64 = rng.random();
    let bell_draw: f64 = rng.random();

    let emission = sample_emission(model, channel_draw)?;
    let mut record = TrialRecord {
        trial_index,
        channel_label: emission.channel_label,
        consumed: false,
        coincidence: false,
        outcome: None,
        fidelity: None,
    };
    if let Some(resource) = &emission.joint_resource {
        let (outcome, fidelity) = if emission.delivery == DeliveryKind::EntangledPair {
            let r = teleport_ideal(&qubit, bell_draw)?;
            (r.outcome, r.bob_state.fidelity(&qubit)?)
        } else {
            let r = teleport_with_resource(&qubit, resource, bell_draw)?;
            (r.outcome, r.bob_state.fidelity(&qubit)?)
        };
        record.consumed = true;
        record.coincidence = true;
        record.outcome = Some(outcome);
        record.fidelity = Some(fidelity);
    } else if let Some(particle) = &emission.alice_particle {
        let (outcome, _) = measure_alice_only(&qubit, particle, bell_draw)?;
        record.consumed = true;
        record.outcome = Some(outcome);
    }
    Ok(record)
}

/// Aggregated statistics of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    pub source_name: String,
    pub trials_requested: u64,
    pub trials_consumed: u64,
    pub coincidences: u64,
    pub failures: u64,
    /// Failures over consumed trials; `None` if nothing was consumed.
    pub unconditional_failure_rate: Option<f64>,
    /// Mean fidelity over coincidences; `None` if there were none.
    pub postselected_mean_fidelity: Option<f64>,
    pub analytic_failure_rate: Option<f64>,
    pub analytic_postselected_fidelity: Option<f64>,
    /// 95% Wilson interval on the failure rate.
    pub failure_rate_ci95: Option<(f64, f64)>,
    pub seed: u64,
    pub fidelity_threshold: f64,
}

#[derive(Default)]
struct Tally {
    consumed: u64,
    coincidences: u64,
    failures: u64,
    fidelity_sum: f64,
}

impl Tally {
    fn add(&mut self, r: &TrialRecord<'_>, threshold: f64) {
        self.consumed += u64::from(r.consumed);
        self.coincidences += u64::from(r.coincidence);
        self.failures += u64::from(r.failed(threshold));
        if let Some(f) = r.fidelity {
            self.fidelity_sum += f;
        }
    }
}

/// Runs `config.trials` trials and hands every record to `sink` in trial
/// order. Records are computed in parallel on `config.workers` threads but
/// reduced sequentially in trial order, so the report is bit-identical for
/// any worker count.
pub fn run_trials<'m, F>(
    model: &'m SourceModel,
    config: &ExperimentConfig,
    mut sink: F,
) -> Result<ExperimentReport, ExperimentError>
where
    F: FnMut(&TrialRecord<'m>),
{
    config.validate()?;
    let threshold = config.fidelity_threshold;
    let blocks = config.trials.div_ceil(BLOCK_TRIALS);
    let run_block = |block: u64| -> Result<Vec<TrialRecord<'m>>, ExperimentError> {
        let start = block * BLOCK_TRIALS;
        let end = (start + BLOCK_TRIALS).min(config.trials);
        (start..end)
            .map(|i| run_trial(model, &config.sampler, config.seed, i))
            .collect()
    };

    let mut tally = Tally::default();
    let mut absorb = |records: Vec<TrialRecord<'m>>| {
        for r in &records {
            tally.add(r, threshold);
            sink(r);
        }
    };

    if config.workers == 1 {
        for block in 0..blocks {
            absorb(run_block(block)?);
        }
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.workers)
            .build()
            .map_err(|e| ExperimentError::InvalidConfig {
                field: "workers",
                reason: e.to_string(),
            })?;
        // Bounded batches keep memory flat for long runs.
        let batch = 8 * config.workers as u64;
        let mut first = 0;
        while first < blocks {
            let last = (first + batch).min(blocks);
            let computed: Vec<_> =
                pool.install(|| (first..last).into_par_iter().map(run_block).collect());
            for records in computed {
                absorb(records?);
            }
            first = last;
        }
    }

    let failure_rate = (tally.consumed > 0).then(|| tally.failures as f64 / tally.consumed as f64);
    Ok(ExperimentReport {
        source_name: model.name().to_string(),
        trials_requested: config.trials,
        trials_consumed: tally.consumed,
        coincidences: tally.coincidences,
        failures: tally.failures,
        unconditional_failure_rate: failure_rate,
        postselected_mean_fidelity: (tally.coincidences > 0)
            .then(|| tally.fidelity_sum / tally.coincidences as f64),
        analytic_failure_rate: analytic_failure_rate(model, threshold).ok(),
        analytic_postselected_fidelity: analytic_postselected_fidelity(model).ok(),
        failure_rate_ci95: (tally.consumed > 0)
            .then(|| binomial_ci95(tally.failures, tally.consumed)),
        seed: config.seed,
        fidelity_threshold: threshold,
    })
}

/// [`run_trials`] collecting the records.
pub fn run_trials_collect<'m>(
    model: &'m SourceModel,
    config: &ExperimentConfig,
) -> Result<(ExperimentReport, Vec<TrialRecord<'m>>), ExperimentError> {
    let mut records = Vec::with_capacity(config.trials.min(1 << 20) as usize);
    let report = run_trials(model, config, |r| records.push(r.clone()))?;
    Ok((report, records))
}

/// Exact fidelity of Bob's corrected state for a delivery that reaches both
/// parties, averaged over inputs and outcomes.
fn delivered_fidelity(delivery: DeliveryKind) -> Option<f64> {
    match delivery {
        DeliveryKind::EntangledPair => Some(1.0),
        // Maximally mixed at Bob whatever Alice observes.
        DeliveryKind::UncorrelatedPair => Some(0.5),
        _ => None,
    }
}

/// Expected failure rate among consumed trials.
pub fn analytic_failure_rate(model: &SourceModel, fidelity_threshold: f64) -> Result<f64, ExperimentError> {
    check_threshold(fidelity_threshold)?;
    let mut succeeded = 0.0;
    let mut failed = 0.0;
    for c in model.channels() {
        if !c.delivery.alice_receives() {
            continue;
        }
        if delivered_fidelity(c.delivery).is_some_and(|f| f >= fidelity_threshold) {
            succeeded += c.probability;
        } else {
            failed += c.probability;
        }
    }
    let consumed = succeeded + failed;
    if consumed == 0.0 {
        return Err(ExperimentError::NoConsumedChannels);
    }
    Ok(failed / consumed)
}

/// Expected fidelity conditioned on a coincidence.
pub fn analytic_postselected_fidelity(model: &SourceModel) -> Result<f64, ExperimentError> {
    let mut weight = 0.0;
    let mut total = 0.0;
    for c in model.channels() {
        if let Some(f) = delivered_fidelity(c.delivery) {
            weight += c.probability;
            total += c.probability * f;
        }
    }
    if weight == 0.0 {
        return Err(ExperimentError::NoCoincidenceChannels);
    }
    Ok(total / weight)
}
