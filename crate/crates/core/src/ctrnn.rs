//! Continuous-time recurrent neural networks integrated with forward Euler.
//!
//! State equation for neuron `i`:
//!
//! ```text
//! tau_i * dy_i/dt = -y_i + sum_j w[j][i] * logistic(g_j * (y_j + theta_j)) + I_i
//! ```
//!
//! `w[j][i]` is the connection strength from neuron `j` to neuron `i`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CtrnnError {
    #[error("network must have at least one neuron")]
    Empty,
    #[error("{what} has length {got}, expected {expected}")]
    Length {
        what: &'static str,
        got: usize,
        expected: usize,
    },
    #[error("gain of neuron {0} is {1}, must be > 0")]
    Gain(usize, f64),
    #[error("time constant of neuron {0} is {1}, must be > 1")]
    TimeConstant(usize, f64),
    #[error("sensory neuron {to} receives a network connection from {from}")]
    SensorConnection { from: usize, to: usize },
    #[error("mirror map is not an involution at neuron {0}")]
    Mirror(usize),
    #[error("neuron index {0} out of range")]
    Index(usize),
    #[error("step size must be positive and finite, got {0}")]
    StepSize(f64),
    #[error("non-finite value {value} in {what} at neuron {index}")]
    NonFinite {
        what: &'static str,
        index: usize,
        value: f64,
    },
    #[error("external input {value} on non-sensory neuron {index}")]
    InputOnNonSensory { index: usize, value: f64 },
}

/// Standard logistic function `1 / (1 + e^-x)`.
#[inline]
pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Network parameters.
///
/// Weights are stored row-major by source neuron: `weight(from, to)` lives at
/// `from * n + to`. Neurons flagged in `input_mask` are sensory: they may
/// receive external input but no network connections.
#[derive(Debug, Clone, PartialEq)]
pub struct CtrnnParams {
    n: usize,
    weights: Vec<f64>,
    gains: Vec<f64>,
    biases: Vec<f64>,
    time_constants: Vec<f64>,
    input_mask: Vec<bool>,
    /// Synaptic sums are accumulated over these groups, in this order. Each
    /// group is a neuron and (optionally) its mirror partner.
    sum_groups: Vec<(usize, Option<usize>)>,
    mirror: Option<Vec<usize>>,
}

impl CtrnnParams {
    pub fn new(
        weights: Vec<f64>,
        gains: Vec<f64>,
        biases: Vec<f64>,
        time_constants: Vec<f64>,
        input_mask: Vec<bool>,
    ) -> Result<Self, CtrnnError> {
        Self::build(weights, gains, biases, time_constants, input_mask, None)
    }

    /// Like [`CtrnnParams::new`] but records a mirror permutation. Synaptic
    /// sums then add each mirror pair's contributions together, so reflecting
    /// the state reflects the successor state exactly, not just up to
    /// rounding.
    pub fn with_mirror(
        weights: Vec<f64>,
        gains: Vec<f64>,
        biases: Vec<f64>,
        time_constants: Vec<f64>,
        input_mask: Vec<bool>,
        mirror: Vec<usize>,
    ) -> Result<Self, CtrnnError> {
        Self::build(weights, gains, biases, time_constants, input_mask, Some(mirror))
    }

    fn build(
        weights: Vec<f64>,
        gains: Vec<f64>,
        biases: Vec<f64>,
        time_constants: Vec<f64>,
        input_mask: Vec<bool>,
        mirror: Option<Vec<usize>>,
    ) -> Result<Self, CtrnnError> {
        let n = gains.len();
        if n == 0 {
            return Err(CtrnnError::Empty);
        }
        let check = |what, got: usize, expected| {
            if got == expected {
                Ok(())
            } else {
                Err(CtrnnError::Length {
                    what,
                    got,
                    expected,
                })
            }
        };
        check("weights", weights.len(), n * n)?;
        check("biases", biases.len(), n)?;
        check("time_constants", time_constants.len(), n)?;
        check("input_mask", input_mask.len(), n)?;
        for (i, &g) in gains.iter().enumerate() {
            if !(g > 0.0 && g.is_finite()) {
                return Err(CtrnnError::Gain(i, g));
            }
        }
        for (i, &tau) in time_constants.iter().enumerate() {
            if !(tau > 1.0 && tau.is_finite()) {
                return Err(CtrnnError::TimeConstant(i, tau));
            }
        }
        for (i, &b) in biases.iter().enumerate() {
            if !b.is_finite() {
                return Err(CtrnnError::NonFinite {
                    what: "biases",
                    index: i,
                    value: b,
                });
            }
        }
        for from in 0..n {
            for to in 0..n {
                let w = weights[from * n + to];
                if !w.is_finite() {
                    return Err(CtrnnError::NonFinite {
                        what: "weights",
                        index: from * n + to,
                        value: w,
                    });
                }
                if input_mask[to] && w != 0.0 {
                    return Err(CtrnnError::SensorConnection { from, to });
                }
            }
        }
        let sum_groups = match &mirror {
            Some(m) => {
                check("mirror", m.len(), n)?;
                for (i, &j) in m.iter().enumerate() {
                    if j >= n || m[j] != i {
                        return Err(CtrnnError::Mirror(i));
                    }
                }
                mirror_groups(m)
            }
            None => (0..n).map(|j| (j, None)).collect(),
        };
        Ok(Self {
            n,
            weights,
            gains,
            biases,
            time_constants,
            input_mask,
            sum_groups,
            mirror,
        })
    }

    pub fn n_neurons(&self) -> usize {
        self.n
    }

    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[from * self.n + to]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn time_constants(&self) -> &[f64] {
        &self.time_constants
    }

    pub fn input_mask(&self) -> &[bool] {
        &self.input_mask
    }

    pub fn mirror(&self) -> Option<&[usize]> {
        self.mirror.as_deref()
    }

    /// Output of neuron `i` in `state`: `logistic(g_i * (y_i + theta_i))`.
    pub fn output(&self, state: &CtrnnState, i: usize) -> Result<f64, CtrnnError> {
        if i >= self.n || i >= state.y.len() {
            return Err(CtrnnError::Index(i));
        }
        Ok(logistic(self.gains[i] * (state.y[i] + self.biases[i])))
    }

    /// All-zero state at `t = 0`.
    pub fn reset(&self) -> CtrnnState {
        CtrnnState {
            y: vec![0.0; self.n],
            t: 0.0,
        }
    }

    /// One forward Euler step. Outputs are computed from the pre-step state
    /// for every neuron (synchronous update).
    pub fn step(
        &self,
        state: &CtrnnState,
        external_inputs: &[f64],
        dt: f64,
    ) -> Result<CtrnnState, CtrnnError> {
        self.validate_inputs(state, external_inputs, dt)?;
        let mut next = state.clone();
        let mut scratch = vec![0.0; self.n];
        self.step_unchecked(&mut next, external_inputs, dt, &mut scratch);
        for (i, &y) in next.y.iter().enumerate() {
            if !y.is_finite() {
                return Err(CtrnnError::NonFinite {
                    what: "state",
                    index: i,
                    value: y,
                });
            }
        }
        Ok(next)
    }

    fn validate_inputs(
        &self,
        state: &CtrnnState,
        external_inputs: &[f64],
        dt: f64,
    ) -> Result<(), CtrnnError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(CtrnnError::StepSize(dt));
        }
        if state.y.len() != self.n {
            return Err(CtrnnError::Length {
                what: "state",
                got: state.y.len(),
                expected: self.n,
            });
        }
        if external_inputs.len() != self.n {
            return Err(CtrnnError::Length {
                what: "external_inputs",
                got: external_inputs.len(),
                expected: self.n,
            });
        }
        for (i, (&v, &y)) in external_inputs.iter().zip(&state.y).enumerate() {
            if !v.is_finite() {
                return Err(CtrnnError::NonFinite {
                    what: "external_inputs",
                    index: i,
                    value: v,
                });
            }
            if !y.is_finite() {
                return Err(CtrnnError::NonFinite {
                    what: "state",
                    index: i,
                    value: y,
                });
            }
            if v != 0.0 && !self.input_mask[i] {
                return Err(CtrnnError::InputOnNonSensory { index: i, value: v });
            }
        }
        Ok(())
    }

    /// In-place Euler step without validation. `outputs` is scratch space of
    /// length `n`; on return it holds the pre-step outputs.
    pub(crate) fn step_unchecked(
        &self,
        state: &mut CtrnnState,
        external_inputs: &[f64],
        dt: f64,
        outputs: &mut [f64],
    ) {
        let n = self.n;
        for (j, o) in outputs.iter_mut().enumerate() {
            *o = logistic(self.gains[j] * (state.y[j] + self.biases[j]));
        }
        for i in 0..n {
            let mut net = 0.0;
            if !self.input_mask[i] {
                for &(a, b) in &self.sum_groups {
                    let term = self.weights[a * n + i] * outputs[a];
                    net += match b {
                        Some(b) => term + self.weights[b * n + i] * outputs[b],
                        None => term,
                    };
                }
            }
            let y = state.y[i];
            state.y[i] = y + (dt / self.time_constants[i]) * (-y + net + external_inputs[i]);
        }
        state.t += dt;
    }
}

fn mirror_groups(mirror: &[usize]) -> Vec<(usize, Option<usize>)> {
    mirror
        .iter()
        .enumerate()
        .filter(|&(j, &m)| j <= m)
        .map(|(j, &m)| if j == m { (j, None) } else { (j, Some(m)) })
        .collect()
}

/// Per-neuron state values plus elapsed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtrnnState {
    pub y: Vec<f64>,
    pub t: f64,
}
