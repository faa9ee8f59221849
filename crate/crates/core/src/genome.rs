//! Real-valued genomes and their decoding into bilaterally symmetric CTRNNs.
//!
//! Neuron layout: 9 sensory neurons (left to right), then the interneurons,
//! then the left and right motor neurons. The mirror image of neuron `i` is
//! obtained by reversing each block.
//!
//! Every free parameter is shared by a mirror orbit (a neuron and its mirror
//! partner, or a connection `j -> i` and `m(j) -> m(i)`), and each orbit owns
//! one gene. Gene order: sensor block (shared gain, shared bias, outgoing
//! weights), interneuron block (gains, biases, time constants, outgoing
//! weights), motor block (biases, time constants, outgoing weights). Within a
//! block weights are in row-major order over orbit representatives, the
//! lexicographically smaller `(from, to)` of each orbit.

use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ctrnn::{CtrnnError, CtrnnParams};

pub const N_SENSORS: usize = 9;
pub const N_MOTORS: usize = 2;
pub const GENOME_SCHEMA: &str = "attn-genome/1";

#[derive(Debug, Error)]
pub enum GenomeError {
    #[error("interneuron count must be even, got {0}")]
    OddInterneurons(usize),
    #[error("genome has {got} genes, architecture needs {expected}")]
    Length { got: usize, expected: usize },
    #[error("gene {index} is not finite ({value})")]
    NonFinite { index: usize, value: f64 },
    #[error("decoded network is invalid: {0}")]
    Network(#[from] CtrnnError),
    #[error("invalid parameter ranges: {0}")]
    Ranges(String),
    #[error("unsupported genome schema {0:?}")]
    Schema(String),
    #[error("genome file: {0}")]
    Format(#[from] serde_json::Error),
    #[error("genome file: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    pub n_interneurons: usize,
}

impl Architecture {
    pub fn new(n_interneurons: usize) -> Result<Self, GenomeError> {
        let arch = Self { n_interneurons };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<(), GenomeError> {
        if self.n_interneurons % 2 != 0 {
            return Err(GenomeError::OddInterneurons(self.n_interneurons));
        }
        Ok(())
    }

    pub fn n_neurons(&self) -> usize {
        N_SENSORS + self.n_interneurons + N_MOTORS
    }

    pub fn sensor_indices(&self) -> std::ops::Range<usize> {
        0..N_SENSORS
    }

    pub fn interneuron_indices(&self) -> std::ops::Range<usize> {
        N_SENSORS..N_SENSORS + self.n_interneurons
    }

    /// `[left, right]`.
    pub fn motor_indices(&self) -> [usize; 2] {
        let first = N_SENSORS + self.n_interneurons;
        [first, first + 1]
    }

    /// Mirror partner of neuron `i`.
    pub fn mirror(&self, i: usize) -> usize {
        let h = self.n_interneurons;
        if i < N_SENSORS {
            N_SENSORS - 1 - i
        } else if i < N_SENSORS + h {
            2 * N_SENSORS + h - 1 - i
        } else {
            2 * (N_SENSORS + h) + 1 - i
        }
    }

    pub fn mirror_map(&self) -> Vec<usize> {
        (0..self.n_neurons()).map(|i| self.mirror(i)).collect()
    }

    fn is_sensor(&self, i: usize) -> bool {
        i < N_SENSORS
    }

    fn is_motor(&self, i: usize) -> bool {
        i >= N_SENSORS + self.n_interneurons
    }

    /// One gene per free parameter orbit, in genome order.
    pub fn gene_slots(&self) -> Vec<GeneSlot> {
        let n = self.n_neurons();
        let targets: Vec<usize> = (N_SENSORS..n).collect();
        let weights_from = |from: usize| {
            targets
                .iter()
                .copied()
                .filter(move |&to| (from, to) <= (self.mirror(from), self.mirror(to)))
                .map(move |to| GeneSlot::Weight { from, to })
        };
        let reps = |range: std::ops::Range<usize>| -> Vec<usize> {
            range.filter(|&i| i <= self.mirror(i)).collect()
        };
        let mut slots = vec![GeneSlot::SensorGain, GeneSlot::SensorBias];
        for from in self.sensor_indices() {
            slots.extend(weights_from(from));
        }
        let inter = reps(self.interneuron_indices());
        slots.extend(inter.iter().map(|&i| GeneSlot::Gain(i)));
        slots.extend(inter.iter().map(|&i| GeneSlot::Bias(i)));
        slots.extend(inter.iter().map(|&i| GeneSlot::TimeConstant(i)));
        for from in self.interneuron_indices() {
            slots.extend(weights_from(from));
        }
        let [left, right] = self.motor_indices();
        slots.push(GeneSlot::Bias(left));
        slots.push(GeneSlot::TimeConstant(left));
        for from in [left, right] {
            slots.extend(weights_from(from));
        }
        slots
    }
}

/// Length `M` of a genome for `arch`.
pub fn genome_length(arch: &Architecture) -> Result<usize, GenomeError> {
    arch.validate()?;
    Ok(arch.gene_slots().len())
}

/// The parameter orbit a gene controls. Neuron indices name the orbit
/// representative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneSlot {
    SensorGain,
    SensorBias,
    Gain(usize),
    Bias(usize),
    TimeConstant(usize),
    Weight { from: usize, to: usize },
}

/// Affine maps from clamped genes in `[-1, 1]` to parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterRanges {
    pub weight: [f64; 2],
    pub bias: [f64; 2],
    pub gain: [f64; 2],
    /// Lower bound exclusive.
    pub time_constant: [f64; 2],
    pub motor_gain: f64,
    pub sensor_time_constant: f64,
}

impl Default for ParameterRanges {
    fn default() -> Self {
        Self {
            weight: [-16.0, 16.0],
            bias: [-5.0, 5.0],
            gain: [1.0, 10.0],
            time_constant: [1.0, 30.0],
            motor_gain: 5.0,
            sensor_time_constant: 1.1,
        }
    }
}

/// Nudge applied when a time constant would land exactly on its lower bound.
const TAU_NUDGE: f64 = 1e-9;

impl ParameterRanges {
    pub fn validate(&self) -> Result<(), GenomeError> {
        let bad = |what: &str| Err(GenomeError::Ranges(what.to_string()));
        for (name, [lo, hi]) in [
            ("weight", self.weight),
            ("bias", self.bias),
            ("gain", self.gain),
            ("time_constant", self.time_constant),
        ] {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return bad(name);
            }
        }
        if self.gain[0] <= 0.0 {
            return bad("gain lower bound must be positive");
        }
        if self.time_constant[0] < 1.0 {
            return bad("time constants must exceed 1");
        }
        if !(self.motor_gain > 0.0 && self.motor_gain.is_finite()) {
            return bad("motor_gain");
        }
        if !(self.sensor_time_constant > 1.0 && self.sensor_time_constant.is_finite()) {
            return bad("sensor_time_constant");
        }
        Ok(())
    }

    fn map(range: [f64; 2], gene: f64) -> f64 {
        let g = gene.clamp(-1.0, 1.0);
        range[0] + (range[1] - range[0]) * (g + 1.0) / 2.0
    }

    pub fn weight(&self, gene: f64) -> f64 {
        Self::map(self.weight, gene)
    }

    pub fn bias(&self, gene: f64) -> f64 {
        Self::map(self.bias, gene)
    }

    pub fn gain(&self, gene: f64) -> f64 {
        Self::map(self.gain, gene)
    }

    pub fn time_constant(&self, gene: f64) -> f64 {
        let tau = Self::map(self.time_constant, gene);
        if tau <= self.time_constant[0] {
            self.time_constant[0] + TAU_NUDGE
        } else {
            tau
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub generation: u64,
    #[serde(default)]
    pub run_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub genes: Vec<f64>,
    pub architecture: Architecture,
    #[serde(default)]
    pub provenance: Option<Provenance>,
}

impl Genome {
    pub fn new(genes: Vec<f64>, architecture: Architecture) -> Result<Self, GenomeError> {
        let g = Self {
            genes,
            architecture,
            provenance: None,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn zeros(architecture: Architecture) -> Result<Self, GenomeError> {
        let m = genome_length(&architecture)?;
        Self::new(vec![0.0; m], architecture)
    }

    pub fn validate(&self) -> Result<(), GenomeError> {
        let expected = genome_length(&self.architecture)?;
        if self.genes.len() != expected {
            return Err(GenomeError::Length {
                got: self.genes.len(),
                expected,
            });
        }
        if let Some((index, &value)) = self.genes.iter().enumerate().find(|(_, g)| !g.is_finite()) {
            return Err(GenomeError::NonFinite { index, value });
        }
        Ok(())
    }

    /// Genes clamped to `[-1, 1]`; decodes identically to `self`.
    pub fn clamped(&self) -> Genome {
        Genome {
            genes: self.genes.iter().map(|g| g.clamp(-1.0, 1.0)).collect(),
            ..self.clone()
        }
    }

    pub fn decode(&self) -> Result<CtrnnParams, GenomeError> {
        decode(self, &ParameterRanges::default())
    }
}

/// Decode a genome into a mirror-symmetric network.
pub fn decode(genome: &Genome, ranges: &ParameterRanges) -> Result<CtrnnParams, GenomeError> {
    genome.validate()?;
    ranges.validate()?;
    let arch = genome.architecture;
    let n = arch.n_neurons();
    let m = |i| arch.mirror(i);
    let mut weights = vec![0.0; n * n];
    let mut gains = vec![0.0; n];
    let mut biases = vec![0.0; n];
    let mut taus = vec![0.0; n];
    for &motor in &arch.motor_indices() {
        gains[motor] = ranges.motor_gain;
    }
    for s in arch.sensor_indices() {
        taus[s] = ranges.sensor_time_constant;
    }
    for (slot, &gene) in arch.gene_slots().iter().zip(&genome.genes) {
        match *slot {
            GeneSlot::SensorGain => arch.sensor_indices().for_each(|s| gains[s] = ranges.gain(gene)),
            GeneSlot::SensorBias => arch.sensor_indices().for_each(|s| biases[s] = ranges.bias(gene)),
            GeneSlot::Gain(i) => {
                gains[i] = ranges.gain(gene);
                gains[m(i)] = gains[i];
            }
            GeneSlot::Bias(i) => {
                biases[i] = ranges.bias(gene);
                biases[m(i)] = biases[i];
            }
            GeneSlot::TimeConstant(i) => {
                taus[i] = ranges.time_constant(gene);
                taus[m(i)] = taus[i];
            }
            GeneSlot::Weight { from, to } => {
                let w = ranges.weight(gene);
                weights[from * n + to] = w;
                weights[m(from) * n + m(to)] = w;
            }
        }
    }
    let input_mask = (0..n).map(|i| arch.is_sensor(i)).collect();
    debug_assert!(arch.is_motor(n - 1));
    Ok(CtrnnParams::with_mirror(
        weights,
        gains,
        biases,
        taus,
        input_mask,
        arch.mirror_map(),
    )?)
}

/// Genes i.i.d. uniform on `[-1, 1]`.
pub fn random_genome<R: Rng + ?Sized>(arch: Architecture, rng: &mut R) -> Result<Genome, GenomeError> {
    let m = genome_length(&arch)?;
    let genes = (0..m).map(|_| rng.random_range(-1.0..=1.0)).collect();
    Genome::new(genes, arch)
}

/// On-disk genome document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenomeFile {
    pub schema: String,
    pub architecture: Architecture,
    pub ranges: ParameterRanges,
    pub genes: Vec<f64>,
    #[serde(default)]
    pub provenance: Option<Provenance>,
    /// Free-form resolved run configuration, kept for regeneration.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl GenomeFile {
    pub fn new(genome: &Genome, ranges: &ParameterRanges, config: serde_json::Value) -> Self {
        Self {
            schema: GENOME_SCHEMA.to_string(),
            architecture: genome.architecture,
            ranges: ranges.clone(),
            genes: genome.genes.clone(),
            provenance: genome.provenance.clone(),
            config,
        }
    }

    pub fn genome(&self) -> Result<Genome, GenomeError> {
        let mut g = Genome::new(self.genes.clone(), self.architecture)?;
        g.provenance = self.provenance.clone();
        Ok(g)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), GenomeError> {
        serde_json::to_writer_pretty(&mut w, self)?;
        writeln!(w)?;
        Ok(())
    }

    pub fn read<R: Read>(r: R) -> Result<Self, GenomeError> {
        let file: GenomeFile = serde_json::from_reader(r)?;
        if file.schema != GENOME_SCHEMA {
            return Err(GenomeError::Schema(file.schema));
        }
        file.ranges.validate()?;
        file.genome()?;
        Ok(file)
    }
}
