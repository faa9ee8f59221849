//! Mutation-only real-valued GA with elitism, linear-rank selection and a
//! shaped evaluation pool.
//!
//! All randomness comes from streams keyed by (generation, individual), so a
//! run is a pure function of its config and seed regardless of thread count.

mod checkpoint;
mod shaping;

use std::path::PathBuf;

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{decode, random_genome, Architecture, Genome, GenomeError, ParameterRanges, Provenance};
use crate::seed::{stream_rng, Stream};
use crate::trials::{sample_trial, Trial, TrialConfig, TrialError};
use crate::world::{TrialRunner, WorldConfig, WorldError};

pub use checkpoint::{
    config_hash, Checkpoint, RunLogRecord, BEST_GENOME_FILE, CHECKPOINT_FILE, CHECKPOINT_SCHEMA, RUNLOG_FILE, RUNLOG_SCHEMA,
};
pub use shaping::{
    make_initial_pool, shaping_update, threshold, Replacement, ReplacementSource, ShapingConfig, ShapingState,
    ShapingVariant, CANDIDATE_ID_BASE,
};

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("invalid evolution config: {0}")]
    Config(String),
    #[error("handpicked replacement list exhausted after {0} additions")]
    HandpickedExhausted(usize),
    #[error("genome has no genes")]
    EmptyGenome,
    #[error("checkpoint was written by a different configuration (hash {found}, expected {expected})")]
    ConfigMismatch { expected: String, found: String },
    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Genome(#[from] GenomeError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error(transparent)]
    Trial(#[from] TrialError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolutionConfig {
    pub population_size: usize,
    pub elite_count: usize,
    pub mutation_variance: f64,
    pub generations: usize,
    pub trials_per_eval: usize,
    pub seed: u64,
    pub architecture: Architecture,
    pub shaping: ShapingConfig,
    pub ranges: ParameterRanges,
    pub world: WorldConfig,
    /// Generator for random replacement candidates.
    pub trials: TrialConfig,
}

impl Default for EvolutionConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            elite_count: 2,
            mutation_variance: 1.0,
            generations: 9000,
            trials_per_eval: 30,
            seed: 0,
            architecture: Architecture { n_interneurons: 2 },
            shaping: ShapingConfig::default(),
            ranges: ParameterRanges::default(),
            world: WorldConfig::default(),
            trials: TrialConfig::default(),
        }
    }
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        let bad = |m: String| Err(EvolutionError::Config(m));
        if self.population_size == 0 || self.generations == 0 || self.trials_per_eval == 0 {
            return bad("population_size, generations and trials_per_eval must be positive".into());
        }
        if self.elite_count >= self.population_size {
            return bad(format!("elite_count {} must be below population_size {}", self.elite_count, self.population_size));
        }
        if !(self.mutation_variance.is_finite() && self.mutation_variance >= 0.0) {
            return bad(format!("mutation_variance {}", self.mutation_variance));
        }
        if self.trials_per_eval != self.shaping.pool_size {
            return bad(format!(
                "trials_per_eval {} must equal the shaping pool size {}",
                self.trials_per_eval, self.shaping.pool_size
            ));
        }
        self.architecture.validate()?;
        self.ranges.validate()?;
        self.world.validate()?;
        self.trials.validate()?;
        self.shaping.validate()
    }
}

/// Probability of drawing the individual of rank `r` (1 = worst) out of `n`.
pub fn rank_probability(r: usize, n: usize) -> f64 {
    2.0 * r as f64 / (n as f64 * (n as f64 + 1.0))
}

/// Linear-rank selection over a fixed fitness vector.
#[derive(Debug, Clone)]
pub struct RankSelector {
    /// Individual indices from worst to best.
    by_rank: Vec<usize>,
}

impl RankSelector {
    pub fn new(fitness: &[f64]) -> Self {
        let mut by_rank: Vec<usize> = (0..fitness.len()).collect();
        // stable: equal fitness keeps index order
        by_rank.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]));
        Self { by_rank }
    }

    /// Index of the individual holding rank `r` (1-based).
    pub fn at_rank(&self, r: usize) -> usize {
        self.by_rank[r - 1]
    }

    pub fn select<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let n = self.by_rank.len() as u64;
        // rank r owns r consecutive tickets out of n(n+1)/2
        let ticket = rng.random_range(0..n * (n + 1) / 2);
        // smallest r with r(r+1)/2 > ticket
        let mut r = ((((8 * ticket + 1) as f64).sqrt() - 1.0) / 2.0) as u64;
        while r * (r + 1) / 2 <= ticket {
            r += 1;
        }
        while r > 1 && (r - 1) * r / 2 > ticket {
            r -= 1;
        }
        self.by_rank[r as usize - 1]
    }
}

pub fn rank_select<R: Rng + ?Sized>(fitness: &[f64], rng: &mut R) -> usize {
    RankSelector::new(fitness).select(rng)
}

/// `parent + m·u`, `u` uniform on the unit sphere and `m ~ N(0, variance)`.
/// Genes are not clamped.
pub fn mutate<R: Rng + ?Sized>(parent: &Genome, variance: f64, rng: &mut R) -> Result<Genome, EvolutionError> {
    let dim = parent.genes.len();
    if dim == 0 {
        return Err(EvolutionError::EmptyGenome);
    }
    let dir = loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            break v.into_iter().map(|x| x / norm).collect::<Vec<_>>();
        }
    };
    let m: f64 = Normal::new(0.0, variance.sqrt())
        .map_err(|e| EvolutionError::Config(e.to_string()))?
        .sample(rng);
    Ok(Genome {
        genes: parent.genes.iter().zip(&dir).map(|(g, u)| g + m * u).collect(),
        architecture: parent.architecture,
        provenance: None,
    })
}

/// Mean score of `genome` over `pool`.
pub fn evaluate(genome: &Genome, pool: &[Trial], ranges: &ParameterRanges, world: &WorldConfig) -> Result<f64, EvolutionError> {
    Ok(pool_scores(genome, pool, ranges, world)?.iter().sum::<f64>() / pool.len() as f64)
}

/// Per-trial scores of `genome` on `pool`, in pool order.
pub fn pool_scores(genome: &Genome, pool: &[Trial], ranges: &ParameterRanges, world: &WorldConfig) -> Result<Vec<f64>, EvolutionError> {
    let params = decode(genome, ranges)?;
    let mut runner = TrialRunner::new(&params, &genome.architecture, world)?;
    Ok(pool.iter().map(|t| runner.run(t, false).score).collect())
}

/// Fitness of every individual, computed in parallel and returned in
/// population order.
pub fn evaluate_population(
    population: &[Genome],
    pool: &[Trial],
    ranges: &ParameterRanges,
    world: &WorldConfig,
) -> Result<Vec<f64>, EvolutionError> {
    population.par_iter().map(|g| evaluate(g, pool, ranges, world)).collect()
}

/// Indices of the `k` fittest individuals, best first; ties favour the lower
/// index.
pub fn elite_indices(fitness: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..fitness.len()).collect();
    idx.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Elites copied verbatim, the rest mutated from rank-selected parents. Child
/// `k` of generation `gen` draws from its own stream.
pub fn next_generation(
    population: &[Genome],
    fitness: &[f64],
    cfg: &EvolutionConfig,
    gen: usize,
) -> Result<Vec<Genome>, EvolutionError> {
    let selector = RankSelector::new(fitness);
    let mut next: Vec<Genome> = elite_indices(fitness, cfg.elite_count)
        .into_iter()
        .map(|i| population[i].clone())
        .collect();
    for k in next.len()..population.len() {
        let mut rng = stream_rng(cfg.seed, Stream::Mutation, gen as u64, k as u64);
        let parent = &population[selector.select(&mut rng)];
        next.push(mutate(parent, cfg.mutation_variance, &mut rng)?);
    }
    Ok(next)
}

pub fn initial_population(cfg: &EvolutionConfig) -> Result<Vec<Genome>, EvolutionError> {
    (0..cfg.population_size)
        .map(|i| {
            let mut rng = stream_rng(cfg.seed, Stream::InitialPopulation, i as u64, 0);
            Ok(random_genome(cfg.architecture, &mut rng)?)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub best: f64,
    pub mean: f64,
    /// Highest `best` seen so far.
    pub best_so_far: f64,
    /// Number of pool changes made before this generation was evaluated.
    pub pool_version: usize,
    pub pool_change: Option<Replacement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvolutionResult {
    /// Best individual of the last generation.
    pub best_genome: Genome,
    pub best_fitness: f64,
    pub history: Vec<GenerationRecord>,
    pub shaping: ShapingState,
    pub seed: u64,
    pub config_hash: String,
}

/// Output and scheduling options that do not affect results.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Worker threads for fitness evaluation; `None` uses rayon's default.
    pub threads: Option<usize>,
    /// Directory for the run log, checkpoint and best genome.
    pub out_dir: Option<PathBuf>,
    /// Write a checkpoint every this many generations (0 = never).
    pub checkpoint_every: usize,
    /// Continue from `out_dir`'s checkpoint if present.
    pub resume: bool,
    /// Stop after this generation index (exclusive), as if interrupted.
    pub stop_after: Option<usize>,
}

pub fn run_evolution(cfg: &EvolutionConfig) -> Result<EvolutionResult, EvolutionError> {
    run_evolution_with(cfg, &RunOptions::default())
}

pub fn run_evolution_with(cfg: &EvolutionConfig, opts: &RunOptions) -> Result<EvolutionResult, EvolutionError> {
    cfg.validate()?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = opts.threads {
        builder = builder.num_threads(n);
    }
    let pool = builder.build()?;
    pool.install(|| Driver::new(cfg, opts)?.run())
}

struct Driver<'a> {
    cfg: &'a EvolutionConfig,
    opts: &'a RunOptions,
    hash: String,
    population: Vec<Genome>,
    shaping: ShapingState,
    history: Vec<GenerationRecord>,
    next_gen: usize,
    log: Option<checkpoint::RunLog>,
}

impl<'a> Driver<'a> {
    fn new(cfg: &'a EvolutionConfig, opts: &'a RunOptions) -> Result<Self, EvolutionError> {
        let hash = config_hash(cfg);
        let resumed = match (&opts.out_dir, opts.resume) {
            (Some(dir), true) => Checkpoint::load(dir, &hash)?,
            _ => None,
        };
        let (population, shaping, history, next_gen) = match resumed {
            Some(ck) => (ck.population, ck.shaping, ck.history, ck.next_generation),
            None => {
                let (pool, queue) = make_initial_pool(cfg.shaping.variant);
                (initial_population(cfg)?, ShapingState::new(pool, queue), Vec::new(), 0)
            }
        };
        let log = match &opts.out_dir {
            Some(dir) => Some(checkpoint::RunLog::create(dir, cfg, &hash, &history)?),
            None => None,
        };
        Ok(Self { cfg, opts, hash, population, shaping, history, next_gen, log })
    }

    fn run(mut self) -> Result<EvolutionResult, EvolutionError> {
        let cfg = self.cfg;
        let end = self.opts.stop_after.map_or(cfg.generations, |s| s.min(cfg.generations));
        let mut last = None;
        for gen in self.next_gen..end {
            let fitness = evaluate_population(&self.population, &self.shaping.pool, &cfg.ranges, &cfg.world)?;
            let best_idx = elite_indices(&fitness, 1)[0];
            let best = fitness[best_idx];
            let mean = fitness.iter().sum::<f64>() / fitness.len() as f64;
            let pool_version = self.shaping.n_added;

            let champion = &self.population[best_idx];
            let params = decode(champion, &cfg.ranges)?;
            let mut runner = TrialRunner::new(&params, &champion.architecture, &cfg.world)?;
            let change = shaping_update(
                &mut self.shaping,
                &cfg.shaping,
                best,
                gen,
                |t| runner.run(t, false).score,
                |id| candidate_trial(cfg, gen, id),
            )?;

            let best_so_far = self.history.last().map_or(best, |r| r.best_so_far.max(best));
            let record = GenerationRecord { generation: gen, best, mean, best_so_far, pool_version, pool_change: change };
            if let Some(log) = self.log.as_mut() {
                log.append(&record)?;
            }
            self.history.push(record);

            let mut winner = champion.clone();
            winner.provenance = Some(Provenance { seed: cfg.seed, generation: gen as u64, run_id: self.hash[..16].to_string() });
            last = Some((winner, best));

            if gen + 1 < cfg.generations {
                self.population = next_generation(&self.population, &fitness, cfg, gen)?;
            }
            self.next_gen = gen + 1;
            if let Some(dir) = &self.opts.out_dir {
                let k = self.opts.checkpoint_every;
                if k > 0 && (gen + 1) % k == 0 {
                    self.checkpoint().save(dir)?;
                }
            }
        }
        if let Some(dir) = &self.opts.out_dir {
            if self.opts.checkpoint_every > 0 {
                self.checkpoint().save(dir)?;
            }
        }
        let (best_genome, best_fitness) = match last {
            Some(x) => x,
            None => self.best_of_current()?,
        };
        if let (Some(dir), true) = (&self.opts.out_dir, self.next_gen == cfg.generations) {
            checkpoint::write_best_genome(dir, &best_genome, cfg)?;
        }
        Ok(EvolutionResult {
            best_genome,
            best_fitness,
            history: self.history,
            shaping: self.shaping,
            seed: cfg.seed,
            config_hash: self.hash,
        })
    }

    /// Used when a resumed run has nothing left to do.
    fn best_of_current(&self) -> Result<(Genome, f64), EvolutionError> {
        let cfg = self.cfg;
        let fitness = evaluate_population(&self.population, &self.shaping.pool, &cfg.ranges, &cfg.world)?;
        let i = elite_indices(&fitness, 1)[0];
        Ok((self.population[i].clone(), fitness[i]))
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            schema: CHECKPOINT_SCHEMA.to_string(),
            config_hash: self.hash.clone(),
            next_generation: self.next_gen,
            population: self.population.clone(),
            shaping: self.shaping.clone(),
            history: self.history.clone(),
        }
    }
}

/// Candidate replacement trial `id` drawn for generation `gen`.
pub fn candidate_trial(cfg: &EvolutionConfig, gen: usize, id: u64) -> Result<Trial, TrialError> {
    let mut rng = stream_rng(cfg.seed, Stream::Shaping, gen as u64, id);
    sample_trial(&mut rng, id, &cfg.world, &cfg.trials)
}
