//! Trials: two falling objects with constant velocities.
//!
//! Generation is rejection sampling against the catchability constraints;
//! [`classify`] assigns the (overlapping) subproblem labels.

mod classify;
mod corpus;
pub mod handpicked;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::{stream_rng, Stream};
use crate::world::{ray_circle_distance, ray_directions, WorldConfig};

pub use classify::{classify, CategoryLabels, DIRECTLY_ABOVE_TOLERANCE};
pub(crate) use corpus::hex;
pub use corpus::{config_hash, read_corpus, write_corpus, CorpusHeader, LabelRecord, CORPUS_SCHEMA};

#[derive(Debug, Error)]
pub enum TrialError {
    #[error("no valid trial after {0} attempts; generator geometry is misconfigured")]
    Exhausted(usize),
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("unsupported corpus schema {0:?}")]
    Schema(String),
    #[error("corpus line {line}: {source}")]
    Malformed {
        line: usize,
        source: serde_json::Error,
    },
    #[error("corpus header says {expected} trials, found {found}")]
    Count { expected: usize, found: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Start state and constant velocity of one falling object. `vy` is the
/// downward speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub x0: f64,
    pub y0: f64,
    pub vx: f64,
    pub vy: f64,
}

impl ObjectSpec {
    /// Time at which the center reaches the agent's level.
    pub fn landing_time(&self) -> f64 {
        self.y0 / self.vy
    }

    /// `(x_land, t_land)`.
    pub fn landing(&self) -> (f64, f64) {
        let t = self.landing_time();
        (self.x0 + self.vx * t, t)
    }

    pub fn position_at(&self, t: f64) -> (f64, f64) {
        (self.x0 + self.vx * t, self.y0 - self.vy * t)
    }
}

/// One episode. `first` is the faster object, which lands first.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trial {
    pub id: u64,
    pub first: ObjectSpec,
    pub second: ObjectSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Which {
    First,
    Second,
}

impl Trial {
    pub fn object(&self, which: Which) -> &ObjectSpec {
        match which {
            Which::First => &self.first,
            Which::Second => &self.second,
        }
    }

    pub fn landing(&self, which: Which) -> (f64, f64) {
        self.object(which).landing()
    }

    /// Reflection about the world's center line.
    pub fn mirrored(&self, cfg: &WorldConfig) -> Trial {
        let c = cfg.center();
        let flip = |o: &ObjectSpec| ObjectSpec {
            x0: c - (o.x0 - c),
            vx: -o.vx,
            ..*o
        };
        Trial {
            id: self.id,
            first: flip(&self.first),
            second: flip(&self.second),
        }
    }
}

/// Landing position and time of one object.
pub fn landing(trial: &Trial, which: Which) -> (f64, f64) {
    trial.landing(which)
}

/// Time at which the faster object overtakes the slower one in height, if
/// that happens strictly between the start and the first landing.
pub fn passing_time(trial: &Trial) -> Option<f64> {
    let (a, b) = (&trial.first, &trial.second);
    if a.y0 <= b.y0 || a.vy <= b.vy {
        return None;
    }
    let tp = (a.y0 - b.y0) / (a.vy - b.vy);
    (tp > 0.0 && tp < a.landing_time()).then_some(tp)
}

/// Whether an object circle centred at `center` (world coordinates, above
/// the agent's level) intersects at least one sensor ray of an agent at
/// `agent_x`.
pub fn in_fov(agent_x: f64, center: [f64; 2], cfg: &WorldConfig) -> bool {
    let c = cfg.center();
    in_fov_rel(agent_x - c, [center[0] - c, center[1]], cfg, &ray_directions(cfg))
}

/// [`in_fov`] with coordinates relative to the world center line.
pub(crate) fn in_fov_rel(agent_x: f64, center: [f64; 2], cfg: &WorldConfig, rays: &[[f64; 2]]) -> bool {
    let r = cfg.object_radius();
    rays.iter()
        .any(|&d| ray_circle_distance([agent_x, 0.0], d, cfg.sensor_range, center, r).is_some())
}

/// Generator settings. Velocity ranges and the reachability factor are the
/// task definition; start heights set the trial geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrialConfig {
    pub start_height: [f64; 2],
    pub first_vy: [f64; 2],
    pub second_vy: [f64; 2],
    pub vx: [f64; 2],
    /// Fraction of the agent's top speed assumed when checking that the
    /// second object is reachable after the first lands.
    pub alpha: f64,
    pub max_attempts: usize,
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            start_height: [160.0, 200.0],
            first_vy: [3.0, 4.0],
            second_vy: [1.0, 2.0],
            vx: [-2.0, 2.0],
            alpha: 0.7,
            max_attempts: 100_000,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), TrialError> {
        for (name, [lo, hi]) in [
            ("start_height", self.start_height),
            ("first_vy", self.first_vy),
            ("second_vy", self.second_vy),
            ("vx", self.vx),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(TrialError::Config(format!("{name} range [{lo}, {hi}]")));
            }
        }
        if self.start_height[0] <= 0.0 || self.first_vy[0] <= 0.0 || self.second_vy[0] <= 0.0 {
            return Err(TrialError::Config("heights and fall speeds must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(TrialError::Config(format!("alpha {}", self.alpha)));
        }
        if self.max_attempts == 0 {
            return Err(TrialError::Config("max_attempts must be positive".into()));
        }
        Ok(())
    }
}

/// A violated trial constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    VelocityRange,
    StartOutOfView,
    FirstNotFirst,
    SecondUnreachable,
    FirstUnreachable,
    LandsOutsideWorld,
}

/// Reachability part of the trial constraints: the faster object lands
/// first, the agent can get under it in time from the start, it can then get
/// to the second landing point at `alpha` times top speed, and both land
/// inside the agent's range of motion.
pub fn is_catchable(trial: &Trial, world: &WorldConfig, gen: &TrialConfig) -> bool {
    reachability_violation(trial, world, gen).is_none()
}

fn reachability_violation(trial: &Trial, world: &WorldConfig, gen: &TrialConfig) -> Option<Violation> {
    let c = world.center();
    let (xl1, t1) = trial.first.landing();
    let (xl2, t2) = trial.second.landing();
    if !(t1 < t2) {
        return Some(Violation::FirstNotFirst);
    }
    if ((xl1 - c) - (xl2 - c)).abs() > world.max_speed * gen.alpha * (t2 - t1) {
        return Some(Violation::SecondUnreachable);
    }
    if (xl1 - c).abs() > world.max_speed * t1 {
        return Some(Violation::FirstUnreachable);
    }
    let limit = world.agent_limit();
    if (xl1 - c).abs() > limit || (xl2 - c).abs() > limit {
        return Some(Violation::LandsOutsideWorld);
    }
    None
}

/// Every constraint a generated trial must satisfy.
pub fn violations(trial: &Trial, world: &WorldConfig, gen: &TrialConfig) -> Vec<Violation> {
    let mut out = Vec::new();
    let within = |v: f64, [lo, hi]: [f64; 2]| lo <= v && v <= hi;
    let (a, b) = (&trial.first, &trial.second);
    if !(within(a.vy, gen.first_vy)
        && within(b.vy, gen.second_vy)
        && within(a.vx, gen.vx)
        && within(b.vx, gen.vx))
    {
        out.push(Violation::VelocityRange);
    }
    let rays = ray_directions(world);
    let c = world.center();
    let start_visible = |o: &ObjectSpec| in_fov_rel(0.0, [o.x0 - c, o.y0], world, &rays);
    if !(start_visible(a) && start_visible(b)) {
        out.push(Violation::StartOutOfView);
    }
    out.extend(reachability_violation(trial, world, gen));
    out
}

/// Lattice for start abscissae. Snapped offsets make the reflection
/// `c - (x - c)` exact in floating point.
const X_LATTICE: f64 = 4_294_967_296.0; // 2^32

fn draw_object<R: Rng + ?Sized>(rng: &mut R, world: &WorldConfig, gen: &TrialConfig, vy: [f64; 2]) -> ObjectSpec {
    let half_angle = world.visual_angle / 2.0;
    let y0 = rng.random_range(gen.start_height[0]..=gen.start_height[1]);
    let half_width = y0 * half_angle.tan() + world.object_radius() / half_angle.cos();
    let offset = rng.random_range(-half_width..=half_width);
    let offset = (offset * X_LATTICE).round() / X_LATTICE;
    ObjectSpec {
        x0: world.center() + offset,
        y0,
        vx: rng.random_range(gen.vx[0]..=gen.vx[1]),
        vy: rng.random_range(vy[0]..=vy[1]),
    }
}

/// Proposal acceptance test used by the sampler.
pub fn is_valid(trial: &Trial, world: &WorldConfig, gen: &TrialConfig) -> bool {
    let rays = ray_directions(world);
    let c = world.center();
    let visible = |o: &ObjectSpec| in_fov_rel(0.0, [o.x0 - c, o.y0], world, &rays);
    visible(&trial.first) && visible(&trial.second) && is_catchable(trial, world, gen)
}

/// Rejection-sample one valid trial.
pub fn sample_trial<R: Rng + ?Sized>(
    rng: &mut R,
    id: u64,
    world: &WorldConfig,
    gen: &TrialConfig,
) -> Result<Trial, TrialError> {
    for _ in 0..gen.max_attempts {
        let first = draw_object(rng, world, gen, gen.first_vy);
        let second = draw_object(rng, world, gen, gen.second_vy);
        let trial = Trial { id, first, second };
        if is_valid(&trial, world, gen) {
            return Ok(trial);
        }
    }
    Err(TrialError::Exhausted(gen.max_attempts))
}

/// Draw one raw proposal without checking it (used to study rejection).
pub fn propose_trial<R: Rng + ?Sized>(rng: &mut R, world: &WorldConfig, gen: &TrialConfig) -> Trial {
    let first = draw_object(rng, world, gen, gen.first_vy);
    let second = draw_object(rng, world, gen, gen.second_vy);
    Trial { id: 0, first, second }
}

/// Trial `id` of the corpus for `seed`. Each index has its own RNG stream,
/// so corpora are identical however they are partitioned across threads.
pub fn corpus_trial(seed: u64, id: u64, world: &WorldConfig, gen: &TrialConfig) -> Result<Trial, TrialError> {
    let mut rng = stream_rng(seed, Stream::Trial, id, 0);
    sample_trial(&mut rng, id, world, gen)
}

/// Trials `0..count` for `seed`, generated in parallel, in index order.
pub fn generate_corpus(
    seed: u64,
    count: usize,
    world: &WorldConfig,
    gen: &TrialConfig,
) -> Result<Vec<Trial>, TrialError> {
    gen.validate()?;
    (0..count as u64)
        .into_par_iter()
        .map(|id| corpus_trial(seed, id, world, gen))
        .collect()
}
