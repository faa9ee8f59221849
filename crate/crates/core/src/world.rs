//! The falling-object world: agent body, ray sensors, motors and trial
//! execution.
//!
//! Horizontal positions inside [`WorldState`] are measured from the world's
//! center line (`x = 0` at `world_width / 2`), so reflecting a state about
//! the center is an exact sign flip. Public results and traces use world
//! coordinates (`0..world_width`).

use std::f64::consts::PI;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctrnn::{logistic, CtrnnParams};
use crate::genome::Architecture;
use crate::trials::Trial;

/// Best possible score on a single trial.
pub const MAX_SCORE: f64 = 200.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WorldError {
    #[error("world parameter {0} must be positive and finite")]
    NonPositive(&'static str),
    #[error("sensor count must be odd and at least 1, got {0}")]
    SensorCount(usize),
    #[error("network has {got} neurons but architecture needs {expected}")]
    NetworkSize { got: usize, expected: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorldConfig {
    pub world_width: f64,
    pub agent_diameter: f64,
    pub object_diameter: f64,
    pub sensor_range: f64,
    pub sensor_count: usize,
    pub visual_angle: f64,
    pub max_speed: f64,
    pub dt: f64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        Self {
            world_width: 400.0,
            agent_diameter: 30.0,
            object_diameter: 26.0,
            sensor_range: 205.0,
            sensor_count: 9,
            visual_angle: PI / 6.0,
            max_speed: 5.0,
            dt: 0.1,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<(), WorldError> {
        let positive = [
            ("world_width", self.world_width),
            ("agent_diameter", self.agent_diameter),
            ("object_diameter", self.object_diameter),
            ("sensor_range", self.sensor_range),
            ("visual_angle", self.visual_angle),
            ("max_speed", self.max_speed),
            ("dt", self.dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(WorldError::NonPositive(name));
            }
        }
        if self.sensor_count % 2 == 0 {
            return Err(WorldError::SensorCount(self.sensor_count));
        }
        if self.agent_diameter >= self.world_width {
            return Err(WorldError::NonPositive("world_width - agent_diameter"));
        }
        Ok(())
    }

    pub fn center(&self) -> f64 {
        self.world_width / 2.0
    }

    /// The agent starts every trial at the world center.
    pub fn agent_start_x(&self) -> f64 {
        self.center()
    }

    pub fn object_radius(&self) -> f64 {
        self.object_diameter / 2.0
    }

    pub fn agent_radius(&self) -> f64 {
        self.agent_diameter / 2.0
    }

    /// Center offset at or below which an object counts as caught.
    pub fn catch_radius(&self) -> f64 {
        (self.agent_diameter + self.object_diameter) / 2.0
    }

    /// Largest distance of the agent center from the world center line.
    pub fn agent_limit(&self) -> f64 {
        self.center() - self.agent_radius()
    }
}

/// Unit direction vectors `(dx, dy)` of the sensor rays, left to right.
///
/// Rays are spread evenly over the visual angle, symmetric about the
/// vertical; the middle ray points straight up. Mirror rays have exactly
/// negated `dx`.
pub fn ray_directions(cfg: &WorldConfig) -> Vec<[f64; 2]> {
    let count = cfg.sensor_count;
    let half = (count / 2) as i64;
    let spacing = if count > 1 {
        cfg.visual_angle / (count - 1) as f64
    } else {
        0.0
    };
    (0..count as i64)
        .map(|k| {
            let j = k - half;
            let a = j.unsigned_abs() as f64 * spacing;
            let (s, c) = a.sin_cos();
            [if j < 0 { -s } else { s }, c]
        })
        .collect()
}

/// Distance along a ray to the first point of a circle, if within `range`.
///
/// Returns the smallest `s` in `[0, range]` with `|origin + s dir - center| = radius`;
/// `Some(0.0)` when the origin is inside the circle.
pub fn ray_circle_distance(
    origin: [f64; 2],
    dir: [f64; 2],
    range: f64,
    center: [f64; 2],
    radius: f64,
) -> Option<f64> {
    let fx = origin[0] - center[0];
    let fy = origin[1] - center[1];
    let b = fx * dir[0] + fy * dir[1];
    let c = fx * fx + fy * fy - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    let far = -b + sq;
    if far < 0.0 {
        return None;
    }
    let near = (-b - sq).max(0.0);
    (near <= range).then_some(near)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FallingObject {
    /// Horizontal position relative to the world center line.
    pub x: f64,
    /// Height above the agent's level.
    pub y: f64,
    pub vx: f64,
    /// Downward speed (positive).
    pub vy: f64,
    pub alive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    /// Agent center relative to the world center line.
    pub agent_x: f64,
    pub objects: Vec<FallingObject>,
    pub t: f64,
}

impl WorldState {
    pub fn from_trial(trial: &Trial, cfg: &WorldConfig) -> Self {
        let center = cfg.center();
        let objects = [&trial.first, &trial.second]
            .into_iter()
            .map(|o| FallingObject {
                x: o.x0 - center,
                y: o.y0,
                vx: o.vx,
                vy: o.vy,
                alive: true,
            })
            .collect();
        Self {
            agent_x: cfg.agent_start_x() - center,
            objects,
            t: 0.0,
        }
    }

    pub fn agent_world_x(&self, cfg: &WorldConfig) -> f64 {
        cfg.center() + self.agent_x
    }

    pub fn all_landed(&self) -> bool {
        self.objects.iter().all(|o| !o.alive)
    }
}

/// Sensor activations: `(range - d) / range` for the nearest alive object hit
/// by each ray, `0` when nothing is within range. Nearer objects occlude
/// farther ones on the same ray.
pub fn sense(cfg: &WorldConfig, state: &WorldState) -> Vec<f64> {
    let rays = ray_directions(cfg);
    let mut out = vec![0.0; rays.len()];
    sense_into(cfg, &rays, state, &mut out);
    out
}

pub(crate) fn sense_into(cfg: &WorldConfig, rays: &[[f64; 2]], state: &WorldState, out: &mut [f64]) {
    let range = cfg.sensor_range;
    let radius = cfg.object_radius();
    let origin = [state.agent_x, 0.0];
    for (slot, dir) in out.iter_mut().zip(rays) {
        let mut nearest = f64::INFINITY;
        for o in state.objects.iter().filter(|o| o.alive) {
            if let Some(d) = ray_circle_distance(origin, *dir, range, [o.x, o.y], radius) {
                nearest = nearest.min(d);
            }
        }
        *slot = if nearest.is_finite() {
            (range - nearest) / range
        } else {
            0.0
        };
    }
}

/// Horizontal agent velocity from the two opposing motor outputs.
pub fn motor_velocity(cfg: &WorldConfig, out_left: f64, out_right: f64) -> f64 {
    cfg.max_speed * (out_right - out_left)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LandingEvent {
    /// Index of the object in `WorldState::objects`.
    pub object: usize,
    /// Interpolated time at which the object's center reached the agent's level.
    pub time: f64,
    /// Fraction of the step at which the crossing happened.
    pub fraction: f64,
    /// Object center at the crossing, relative to the world center line.
    pub object_x: f64,
    /// Agent center at the crossing, relative to the world center line.
    pub agent_x: f64,
    /// `|agent_x - object_x|`.
    pub offset: f64,
}

/// Advance the world by one step with the given agent velocity.
pub fn step_world(
    cfg: &WorldConfig,
    state: &WorldState,
    agent_v: f64,
) -> (WorldState, Vec<LandingEvent>) {
    let mut next = state.clone();
    let mut events = Vec::new();
    step_world_in_place(cfg, &mut next, agent_v, &mut events);
    (next, events)
}

pub(crate) fn step_world_in_place(
    cfg: &WorldConfig,
    state: &mut WorldState,
    agent_v: f64,
    events: &mut Vec<LandingEvent>,
) {
    let dt = cfg.dt;
    let limit = cfg.agent_limit();
    let v = agent_v.clamp(-cfg.max_speed, cfg.max_speed);
    let agent_prev = state.agent_x;
    // Silent clamp at the walls: the controller gets no signal.
    let agent_next = (agent_prev + v * dt).clamp(-limit, limit);
    state.agent_x = agent_next;
    for (i, o) in state.objects.iter_mut().enumerate() {
        if !o.alive {
            continue;
        }
        let y_prev = o.y;
        let x_prev = o.x;
        let dy = o.vy * dt;
        o.x = x_prev + o.vx * dt;
        o.y = y_prev - dy;
        if o.y <= 0.0 {
            let fraction = (y_prev / dy).clamp(0.0, 1.0);
            let object_x = x_prev + o.vx * dt * fraction;
            let agent_x = agent_prev + (agent_next - agent_prev) * fraction;
            events.push(LandingEvent {
                object: i,
                time: state.t + dt * fraction,
                fraction,
                object_x,
                agent_x,
                offset: (agent_x - object_x).abs(),
            });
            o.alive = false;
        }
    }
    state.t += dt;
}

/// Trial score from the two landing offsets. Not clamped below zero.
pub fn score(offset1: f64, offset2: f64) -> f64 {
    MAX_SCORE - (offset1 + offset2)
}

/// Score as a percentage of the maximum.
pub fn score_percent(score: f64) -> f64 {
    score / MAX_SCORE * 100.0
}

/// One row of a per-step trajectory trace, in world coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: f64,
    pub agent_x: f64,
    /// `(x, y, alive)` per object.
    pub objects: Vec<(f64, f64, bool)>,
    pub sensors: Vec<f64>,
    pub motors: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_id: u64,
    pub score: f64,
    pub landing_offsets: [f64; 2],
    pub caught: [bool; 2],
    pub steps: usize,
    /// Set when the network state became non-finite; the score is then `-inf`.
    pub aborted: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub trace: Option<Vec<TraceRow>>,
}

impl TrialResult {
    pub fn caught_first(&self) -> bool {
        self.caught[0]
    }

    pub fn caught_second(&self) -> bool {
        self.caught[1]
    }

    pub fn caught_both(&self) -> bool {
        self.caught[0] && self.caught[1]
    }
}

/// Upper bound on simulation steps; far above the longest valid trial.
const STEP_LIMIT: usize = 1_000_000;

/// Reusable buffers for running many trials with the same network.
pub struct TrialRunner<'a> {
    params: &'a CtrnnParams,
    cfg: &'a WorldConfig,
    rays: Vec<[f64; 2]>,
    sensors: Vec<usize>,
    motors: [usize; 2],
    inputs: Vec<f64>,
    outputs: Vec<f64>,
    activations: Vec<f64>,
    events: Vec<LandingEvent>,
}

impl<'a> TrialRunner<'a> {
    pub fn new(
        params: &'a CtrnnParams,
        arch: &Architecture,
        cfg: &'a WorldConfig,
    ) -> Result<Self, WorldError> {
        cfg.validate()?;
        let expected = arch.n_neurons();
        if params.n_neurons() != expected {
            return Err(WorldError::NetworkSize {
                got: params.n_neurons(),
                expected,
            });
        }
        let rays = ray_directions(cfg);
        let sensors: Vec<usize> = arch.sensor_indices().collect();
        if sensors.len() != rays.len() {
            return Err(WorldError::SensorCount(cfg.sensor_count));
        }
        let n = params.n_neurons();
        Ok(Self {
            params,
            cfg,
            activations: vec![0.0; rays.len()],
            rays,
            sensors,
            motors: arch.motor_indices(),
            inputs: vec![0.0; n],
            outputs: vec![0.0; n],
            events: Vec::with_capacity(2),
        })
    }

    pub fn run(&mut self, trial: &Trial, record_trace: bool) -> TrialResult {
        let cfg = self.cfg;
        let params = self.params;
        let center = cfg.center();
        let mut net = params.reset();
        let mut world = WorldState::from_trial(trial, cfg);
        let mut offsets = [f64::INFINITY; 2];
        let mut trace = record_trace.then(Vec::new);
        let mut steps = 0;
        let mut aborted = false;

        while !world.all_landed() && steps < STEP_LIMIT {
            sense_into(cfg, &self.rays, &world, &mut self.activations);
            for (&neuron, &a) in self.sensors.iter().zip(&self.activations) {
                self.inputs[neuron] = a;
            }
            params.step_unchecked(&mut net, &self.inputs, cfg.dt, &mut self.outputs);
            if net.y.iter().any(|y| !y.is_finite()) {
                aborted = true;
                break;
            }
            let [left, right] = self.motors.map(|m| {
                logistic(params.gains()[m] * (net.y[m] + params.biases()[m]))
            });
            let v = motor_velocity(cfg, left, right);
            self.events.clear();
            step_world_in_place(cfg, &mut world, v, &mut self.events);
            for e in &self.events {
                offsets[e.object] = e.offset;
            }
            steps += 1;
            if let Some(rows) = trace.as_mut() {
                rows.push(TraceRow {
                    t: world.t,
                    agent_x: center + world.agent_x,
                    objects: world
                        .objects
                        .iter()
                        .map(|o| (center + o.x, o.y, o.alive))
                        .collect(),
                    sensors: self.activations.clone(),
                    motors: [left, right],
                });
            }
        }

        if aborted || !world.all_landed() {
            return TrialResult {
                trial_id: trial.id,
                score: f64::NEG_INFINITY,
                landing_offsets: offsets,
                caught: [false; 2],
                steps,
                aborted: true,
                trace,
            };
        }
        let catch = cfg.catch_radius();
        TrialResult {
            trial_id: trial.id,
            score: score(offsets[0], offsets[1]),
            landing_offsets: offsets,
            caught: offsets.map(|o| o <= catch),
            steps,
            aborted: false,
            trace,
        }
    }
}

/// Run one trial: sense, feed sensors, step the network, move, until both
/// objects have landed.
pub fn run_trial(
    params: &CtrnnParams,
    arch: &Architecture,
    trial: &Trial,
    cfg: &WorldConfig,
    record_trace: bool,
) -> Result<TrialResult, WorldError> {
    Ok(TrialRunner::new(params, arch, cfg)?.run(trial, record_trace))
}

/// Write a trace as comma-separated text with a header row.
pub fn write_trace_csv<W: Write>(mut w: W, rows: &[TraceRow]) -> io::Result<()> {
    let n_obj = rows.first().map_or(2, |r| r.objects.len());
    let n_sens = rows.first().map_or(0, |r| r.sensors.len());
    let mut header = vec!["t".to_string(), "agent_x".to_string()];
    for k in 1..=n_obj {
        header.push(format!("obj{k}_x"));
        header.push(format!("obj{k}_y"));
        header.push(format!("obj{k}_alive"));
    }
    header.extend((0..n_sens).map(|k| format!("sensor{k}")));
    header.push("motor_left".into());
    header.push("motor_right".into());
    writeln!(w, "{}", header.join(","))?;
    for r in rows {
        let mut fields = vec![r.t.to_string(), r.agent_x.to_string()];
        for &(x, y, alive) in &r.objects {
            fields.push(x.to_string());
            fields.push(y.to_string());
            fields.push(u8::from(alive).to_string());
        }
        fields.extend(r.sensors.iter().map(f64::to_string));
        fields.push(r.motors[0].to_string());
        fields.push(r.motors[1].to_string());
        writeln!(w, "{}", fields.join(","))?;
    }
    Ok(())
}
