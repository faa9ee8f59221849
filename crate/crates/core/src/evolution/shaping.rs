//! Incremental shaping of the evaluation pool.

use serde::{Deserialize, Serialize};

use super::EvolutionError;
use crate::trials::handpicked::handpicked;
use crate::trials::{Trial, TrialError};

/// First id handed to randomly generated replacement candidates.
pub const CANDIDATE_ID_BASE: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapingVariant {
    #[default]
    Standard,
    /// One early pool trial swapped for an unseen-passing trial.
    UnseenPassingAugmented,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ShapingConfig {
    pub stagnation_limit: usize,
    pub threshold_base: f64,
    pub threshold_n_divisor: f64,
    pub threshold_gen_divisor: f64,
    pub candidate_score_cutoff: f64,
    pub candidate_cap: usize,
    pub pool_size: usize,
    pub handpicked_replacements: usize,
    pub variant: ShapingVariant,
}

impl Default for ShapingConfig {
    fn default() -> Self {
        Self {
            stagnation_limit: 600,
            threshold_base: 198.0,
            threshold_n_divisor: 14.0,
            threshold_gen_divisor: 2500.0,
            candidate_score_cutoff: 170.0,
            candidate_cap: 30,
            pool_size: 30,
            handpicked_replacements: 5,
            variant: ShapingVariant::Standard,
        }
    }
}

impl ShapingConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |m: &str| Err(EvolutionError::Config(m.to_string()));
        if !(self.candidate_score_cutoff < 200.0) {
            return bad("candidate_score_cutoff must be below 200");
        }
        if self.candidate_cap == 0 || self.pool_size == 0 {
            return bad("candidate_cap and pool_size must be positive");
        }
        if !(self.threshold_n_divisor > 0.0 && self.threshold_gen_divisor > 0.0) {
            return bad("threshold divisors must be positive");
        }
        Ok(())
    }

    pub fn threshold(&self, n: usize, gen: usize) -> f64 {
        self.threshold_base - n as f64 / self.threshold_n_divisor - gen as f64 / self.threshold_gen_divisor
    }

    /// Upper bound on distinct trials one run can encounter after `additions`
    /// pool changes: the initial pool, the handpicked replacements, and at
    /// most `candidate_cap` candidates per later change.
    pub fn exposure_bound(&self, additions: usize) -> usize {
        let handpicked = additions.min(self.handpicked_replacements);
        self.pool_size + self.handpicked_replacements + (additions - handpicked) * self.candidate_cap
    }
}

/// `198 - n/14 - gen/2500`.
pub fn threshold(n: usize, gen: usize) -> f64 {
    ShapingConfig::default().threshold(n, gen)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ReplacementSource {
    Handpicked,
    /// `tried` candidates were generated; `fallback` when none failed.
    Candidate { tried: usize, fallback: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Replacement {
    pub generation: usize,
    pub removed_id: u64,
    pub added_id: u64,
    pub source: ReplacementSource,
    /// Why the change fired.
    pub by_threshold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapingState {
    pub pool: Vec<Trial>,
    /// Handpicked trials not yet inserted, in order.
    pub queue: Vec<Trial>,
    pub n_added: usize,
    pub last_change_gen: usize,
    pub replacements_log: Vec<Replacement>,
    /// Random candidates generated so far; also the next candidate id offset.
    pub candidates_generated: u64,
}

impl ShapingState {
    pub fn new(pool: Vec<Trial>, queue: Vec<Trial>) -> Self {
        Self {
            pool,
            queue,
            n_added: 0,
            last_change_gen: 0,
            replacements_log: Vec::new(),
            candidates_generated: 0,
        }
    }

    /// Distinct trials this run has put into or considered for the pool:
    /// the initial pool, the handpicked insertions and every random
    /// candidate.
    pub fn trials_seen(&self) -> usize {
        let handpicked = self
            .replacements_log
            .iter()
            .filter(|r| r.source == ReplacementSource::Handpicked)
            .count();
        self.pool.len() + handpicked + self.candidates_generated as usize
    }
}

/// The 30-trial starting pool and the handpicked replacement queue.
pub fn make_initial_pool(variant: ShapingVariant) -> (Vec<Trial>, Vec<Trial>) {
    let set = handpicked();
    let mut pool: Vec<Trial> = set.initial.iter().map(|h| h.trial()).collect();
    if variant == ShapingVariant::UnseenPassingAugmented {
        let slot = pool
            .iter()
            .position(|t| t.id == set.unseen_passing.replaces_id)
            .expect("bundled data names a pool trial");
        pool[slot] = set.unseen_passing.trial.trial();
    }
    let queue = set.replacements.iter().map(|h| h.trial()).collect();
    (pool, queue)
}

/// One generation's shaping step.
///
/// `best_mean` is the best agent's mean pool score; `score` runs the best
/// agent on a trial; `candidate` draws a random trial with the given id.
pub fn shaping_update<S, C>(
    state: &mut ShapingState,
    cfg: &ShapingConfig,
    best_mean: f64,
    gen: usize,
    mut score: S,
    mut candidate: C,
) -> Result<Option<Replacement>, EvolutionError>
where
    S: FnMut(&Trial) -> f64,
    C: FnMut(u64) -> Result<Trial, TrialError>,
{
    let by_threshold = best_mean > cfg.threshold(state.n_added, gen);
    let by_timer = gen.saturating_sub(state.last_change_gen) > cfg.stagnation_limit;
    if !(by_threshold || by_timer) {
        return Ok(None);
    }

    // the trial the best agent does best on; ties go to the lowest index
    let mut slot = 0;
    let mut top = f64::NEG_INFINITY;
    for (i, t) in state.pool.iter().enumerate() {
        let s = score(t);
        if s > top {
            top = s;
            slot = i;
        }
    }

    let (added, source) = if state.n_added < cfg.handpicked_replacements {
        if state.queue.is_empty() {
            return Err(EvolutionError::HandpickedExhausted(state.n_added));
        }
        (state.queue.remove(0), ReplacementSource::Handpicked)
    } else {
        let mut tried = 0;
        loop {
            let t = candidate(CANDIDATE_ID_BASE + state.candidates_generated)?;
            state.candidates_generated += 1;
            tried += 1;
            let fails = score(&t) < cfg.candidate_score_cutoff;
            if fails || tried == cfg.candidate_cap {
                break (t, ReplacementSource::Candidate { tried, fallback: !fails });
            }
        }
    };

    let change = Replacement {
        generation: gen,
        removed_id: state.pool[slot].id,
        added_id: added.id,
        source,
        by_threshold,
    };
    state.pool[slot] = added;
    state.n_added += 1;
    state.last_change_gen = gen;
    state.replacements_log.push(change);
    Ok(Some(change))
}
