use nalgebra::DVector;

use crate::control::TriggerParams;
use crate::matgraph::Gauge;

use super::Mode;

/// One broadcast by one agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub agent: usize,
    pub time: f64,
}

/// Sampled output of a simulation run.
///
/// Stacked vectors are agent-major: component `k` of agent `i` sits at
/// index `i * d + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub mode: Mode,
    pub n: usize,
    pub d: usize,
    pub delta_sat: f64,
    pub t_end: f64,
    pub refine_tol: f64,
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Applied controls `sat_Δ(û_i)` at each sample.
    pub controls: Vec<DVector<f64>>,
    /// Auxiliary variables; empty in continuous modes.
    pub psi: Vec<DVector<f64>>,
    /// Per-agent trigger excess at each sample; empty in continuous modes.
    pub excess: Vec<DVector<f64>>,
    pub lyapunov: Vec<f64>,
    /// Whether any control component sat at `±Δ` at some integration stage
    /// in the interval ending at this sample (for the first sample, at `t = 0`).
    pub saturation_active: Vec<bool>,
    pub events: Vec<Event>,
    pub event_counts: Vec<usize>,
    /// Last sample time with `saturation_active` set.
    pub t_sf: Option<f64>,
    pub params: Vec<TriggerParams>,
    pub gauge: Gauge,
    /// Shared input value in leader-follower modes.
    pub target: Option<DVector<f64>>,
}

impl SimulationRecord {
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn final_state(&self) -> Option<&DVector<f64>> {
        self.states.last()
    }

    /// State of agent `i` at sample `k`.
    pub fn agent_state(&self, k: usize, i: usize) -> DVector<f64> {
        self.states[k].rows(i * self.d, self.d).into_owned()
    }

    pub fn total_events(&self) -> usize {
        self.events.len()
    }

    /// Event times of agent `i`, ascending.
    pub fn agent_events(&self, i: usize) -> Vec<f64> {
        self.events.iter().filter(|e| e.agent == i).map(|e| e.time).collect()
    }
}
