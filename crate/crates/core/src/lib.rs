//! Simulation, evolution and analysis toolkit for a two-object selective
//! attention task.
//!
//! A bilaterally symmetric continuous-time recurrent neural network (CTRNN)
//! drives a circular agent along the bottom of a 400-unit wide world. Two
//! objects fall towards it at constant velocities and the agent has to catch
//! both. The crate is split into:
//!
//! * [`ctrnn`]: network parameters, state and forward Euler integration.
//! * [`world`]: agent body, ray sensors, motors, falling objects and trial
//!   execution.
//! * [`genome`]: flat real-valued genomes and their symmetric decoding.
//! * [`trials`]: constrained trial generation, the subproblem taxonomy and
//!   corpus files.
//! * [`evolution`]: rank-selection GA with hypersphere mutation, elitism and
//!   incremental shaping of the evaluation pool.
//! * [`analysis`]: batch evaluation, per-category reports and the trial
//!   frequency audit.

pub mod analysis;
pub mod ctrnn;
pub mod evolution;
pub mod genome;
pub mod seed;
pub mod trials;
pub mod world;

pub use analysis::{
    batch_evaluate, category_report, frequency_audit, stationary_baseline, AuditRow, AuditTable,
    CategoryReport, ReportRow,
};
pub use ctrnn::{logistic, CtrnnError, CtrnnParams, CtrnnState};
pub use evolution::{
    run_evolution, threshold, EvolutionConfig, EvolutionError, EvolutionResult, ShapingConfig,
    ShapingState, ShapingVariant,
};
pub use genome::{Architecture, Genome, GenomeError};
pub use trials::{classify, CategoryLabels, Trial, TrialConfig, TrialError};
pub use world::{run_trial, TrialResult, WorldConfig, WorldState};
