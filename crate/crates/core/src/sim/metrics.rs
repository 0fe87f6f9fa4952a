use nalgebra::DVector;

use crate::matgraph::{Gauge, MatrixWeightedNetwork};

use super::SimulationRecord;

/// `max_{(i,j) ∈ E} ‖x_i - sgn(A_ij) x_j‖`.
pub fn bipartite_disagreement(x: &DVector<f64>, g: &MatrixWeightedNetwork) -> f64 {
    let d = g.d();
    g.edges()
        .iter()
        .map(|e| (x.rows(e.i * d, d) - x.rows(e.j * d, d) * e.weight.sign()).norm())
        .fold(0.0, f64::max)
}

/// `max_i ‖|x_i| - |w0|‖` with componentwise absolute values.
pub fn leader_tracking_error(x: &DVector<f64>, w0: &DVector<f64>) -> f64 {
    let d = w0.len();
    (0..x.len() / d)
        .map(|i| (x.rows(i * d, d).abs() - w0.abs()).norm())
        .fold(0.0, f64::max)
}

/// `(1/n) Σ_i σ_i x_i`.
pub fn gauged_average(x: &DVector<f64>, gauge: &Gauge, d: usize) -> DVector<f64> {
    let n = gauge.len();
    let mut acc = DVector::zeros(d);
    for i in 0..n {
        acc += x.rows(i * d, d) * gauge.sign(i);
    }
    acc / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredictionAnchor {
    /// Gauged average taken at the last saturated sample.
    SaturationFree(f64),
    /// Saturation never engaged; the gauged average of `x(0)` is conserved.
    Initial,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusPrediction {
    /// Predicted common limit of `σ_i x_i`.
    pub value: DVector<f64>,
    pub anchor: PredictionAnchor,
}

/// Predicted leaderless consensus value: the gauged average of the state at
/// the last instant any control is saturated. Returns `None` for an empty
/// record.
pub fn predict_consensus_value(rec: &SimulationRecord, gauge: &Gauge) -> Option<ConsensusPrediction> {
    if rec.is_empty() {
        return None;
    }
    let (k, anchor) = match rec.t_sf {
        Some(t) => {
            let k = rec.times.iter().rposition(|&s| s == t).unwrap_or(0);
            (k, PredictionAnchor::SaturationFree(t))
        }
        None => (0, PredictionAnchor::Initial),
    };
    Some(ConsensusPrediction {
        value: gauged_average(&rec.states[k], gauge, rec.d),
        anchor,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentZeno {
    pub event_count: usize,
    /// Smallest gap between consecutive broadcasts; `None` with fewer than two.
    pub min_gap: Option<f64>,
    /// Inter-event lower bound `(2 M₀ Λ_i)⁻¹ √(ψ_i(0)/(θ_i g_i)) e^{-(β_i+δ_i/θ_i) T/2}`
    /// at `T = t_end`, with `Λ_i` the sum of `λ_d` over the agent's edges
    /// (input edges included) and `M₀` the largest observed `‖x_i‖`.
    pub analytic_bound: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZenoReport {
    pub agents: Vec<AgentZeno>,
    pub total_events: usize,
    pub min_gap: Option<f64>,
    pub max_state_norm: f64,
}

/// Per-agent event statistics. Empty for continuous runs.
pub fn zeno_report(rec: &SimulationRecord, g: &MatrixWeightedNetwork) -> ZenoReport {
    let d = rec.d;
    let mut m0 = rec
        .states
        .iter()
        .flat_map(|x| (0..rec.n).map(move |i| x.rows(i * d, d).norm()))
        .fold(0.0, f64::max);
    if let Some(w0) = &rec.target {
        m0 = m0.max(w0.norm());
    }
    if !rec.mode.is_event_triggered() {
        return ZenoReport {
            agents: Vec::new(),
            total_events: 0,
            min_gap: None,
            max_state_norm: m0,
        };
    }
    let agents: Vec<AgentZeno> = (0..rec.n)
        .map(|i| {
            let times = rec.agent_events(i);
            let min_gap = times.windows(2).map(|w| w[1] - w[0]).reduce(f64::min);
            let p = &rec.params[i];
            let mut lambda: f64 = g.neighbors(i).map(|(_, w)| w.lambda_max_abs()).sum();
            if rec.target.is_some() {
                lambda += g.leader_edges_of(i).map(|e| e.weight.lambda_max_abs()).sum::<f64>();
            }
            let analytic_bound = (lambda > 0.0 && m0 > 0.0 && p.gain > 0.0).then(|| {
                (p.psi0 / (p.theta * p.gain)).sqrt() * (-0.5 * p.psi_floor_rate() * rec.t_end).exp()
                    / (2.0 * m0 * lambda)
            });
            AgentZeno {
                event_count: times.len(),
                min_gap,
                analytic_bound,
            }
        })
        .collect();
    let min_gap = agents.iter().filter_map(|a| a.min_gap).reduce(f64::min);
    ZenoReport {
        total_events: rec.events.len(),
        agents,
        min_gap,
        max_state_norm: m0,
    }
}
