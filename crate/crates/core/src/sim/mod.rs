//! Hybrid simulation of the saturated event-triggered protocols.
//!
//! Between broadcasts every agent integrates its state under a fixed
//! broadcast set. A step is first taken in full; if some agent's trigger
//! excess turns positive the step is bisected down to `refine_tol`, the
//! agents at or above zero broadcast, and any neighbour pushed over the
//! threshold by the resulting control jump broadcasts at the same instant.

mod metrics;
mod record;

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{saturated_power, Protocol, SaturationLevel, TriggerParams};
use crate::matgraph::{find_gauge, leader_gauge, Gauge, GraphError, MatrixWeightedNetwork};

pub use metrics::{
    bipartite_disagreement, gauged_average, leader_tracking_error, predict_consensus_value, zeno_report,
    AgentZeno, ConsensusPrediction, PredictionAnchor, ZenoReport,
};
pub use record::{Event, SimulationRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    EventLeaderless,
    EventLeaderFollower,
    ContinuousLeaderless,
    ContinuousLeaderFollower,
}

impl Mode {
    pub fn protocol(self) -> Protocol {
        match self {
            Mode::EventLeaderless | Mode::ContinuousLeaderless => Protocol::Leaderless,
            Mode::EventLeaderFollower | Mode::ContinuousLeaderFollower => Protocol::LeaderFollower,
        }
    }

    pub fn is_event_triggered(self) -> bool {
        matches!(self, Mode::EventLeaderless | Mode::EventLeaderFollower)
    }

    /// Same protocol with continuous communication.
    pub fn continuous(self) -> Mode {
        match self.protocol() {
            Protocol::Leaderless => Mode::ContinuousLeaderless,
            Protocol::LeaderFollower => Mode::ContinuousLeaderFollower,
        }
    }

    /// Same protocol with event-triggered communication.
    pub fn event_triggered(self) -> Mode {
        match self.protocol() {
            Protocol::Leaderless => Mode::EventLeaderless,
            Protocol::LeaderFollower => Mode::EventLeaderFollower,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::EventLeaderless => "event_leaderless",
            Mode::EventLeaderFollower => "event_leader_follower",
            Mode::ContinuousLeaderless => "continuous_leaderless",
            Mode::ContinuousLeaderFollower => "continuous_leader_follower",
        }
    }

    pub fn from_name(s: &str) -> Option<Mode> {
        [
            Mode::EventLeaderless,
            Mode::EventLeaderFollower,
            Mode::ContinuousLeaderless,
            Mode::ContinuousLeaderFollower,
        ]
        .into_iter()
        .find(|m| m.name() == s)
    }
}

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_SAMPLE_DT: f64 = 1e-2;
pub const DEFAULT_REFINE_TOL: f64 = 1e-6;
pub const DEFAULT_MAX_EVENTS_PER_SECOND: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub mode: Mode,
    pub sat: SaturationLevel,
    pub t_end: f64,
    pub dt: f64,
    pub sample_dt: f64,
    pub refine_tol: f64,
    pub max_events_per_second: usize,
}

impl SimConfig {
    pub fn new(mode: Mode, sat: SaturationLevel, t_end: f64) -> Self {
        Self {
            mode,
            sat,
            t_end,
            dt: DEFAULT_DT,
            sample_dt: DEFAULT_SAMPLE_DT,
            refine_tol: DEFAULT_REFINE_TOL,
            max_events_per_second: DEFAULT_MAX_EVENTS_PER_SECOND,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |what: &str, v: f64| Err(SimError::InvalidConfig(format!("{what} = {v}")));
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return bad("t_end must be finite and non-negative; got t_end", self.t_end);
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be positive; got dt", self.dt);
        }
        if !(self.sample_dt > 0.0 && self.sample_dt.is_finite()) {
            return bad("sample_dt must be positive; got sample_dt", self.sample_dt);
        }
        if !(self.refine_tol > 0.0 && self.refine_tol < self.dt) {
            return bad("refine_tol must lie in (0, dt); got refine_tol", self.refine_tol);
        }
        if self.max_events_per_second == 0 {
            return Err(SimError::InvalidConfig("max_events_per_second must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("Zeno guard tripped: agent {} broadcast {count} times in the second before t = {t}", .agent + 1)]
    ZenoGuardTripped { agent: usize, t: f64, count: usize },
    #[error("invalid simulation setup: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Per-agent simulation state.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentRuntime {
    pub x: DVector<f64>,
    /// Last broadcast state `x̂_i`.
    pub xhat: DVector<f64>,
    pub psi: f64,
    pub last_event_time: f64,
    pub event_count: usize,
}

impl AgentRuntime {
    /// Measurement error `e_i = x̂_i - x_i`.
    pub fn error(&self) -> DVector<f64> {
        &self.xhat - &self.x
    }
}

/// Snapshot of all agents plus the controls computed from their broadcasts.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: f64,
    pub agents: Vec<AgentRuntime>,
    /// `û_i` (or `q̂_i`) from the current broadcast set.
    pub uhat: Vec<DVector<f64>>,
    /// `û_iᵀ sat_Δ(û_i)`.
    pub power: Vec<f64>,
}

impl SimState {
    pub fn stacked_x(&self) -> DVector<f64> {
        stack(self.agents.iter().map(|a| &a.x))
    }

    pub fn stacked_xhat(&self) -> DVector<f64> {
        stack(self.agents.iter().map(|a| &a.xhat))
    }

    pub fn psi(&self) -> DVector<f64> {
        DVector::from_iterator(self.agents.len(), self.agents.iter().map(|a| a.psi))
    }
}

fn stack<'a>(parts: impl Iterator<Item = &'a DVector<f64>>) -> DVector<f64> {
    let v: Vec<f64> = parts.flat_map(|p| p.iter().copied()).collect();
    DVector::from_vec(v)
}

/// Result of trying to advance one step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepOutcome {
    /// No trigger fired; state at the end of the step.
    Clear { state: SimState, saturated: bool },
    /// The earliest crossing, refined by bisection. `state` is at the
    /// crossing time and `agents` have non-negative excess there.
    Event {
        state: SimState,
        agents: Vec<usize>,
        saturated: bool,
    },
}

/// Simulation driver for one network and parameter set.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    g: &'a MatrixWeightedNetwork,
    params: &'a [TriggerParams],
    cfg: SimConfig,
    gauge: Gauge,
    lyapunov_matrix: DMatrix<f64>,
    offset: Option<DVector<f64>>,
}

impl<'a> Simulator<'a> {
    pub fn new(g: &'a MatrixWeightedNetwork, params: &'a [TriggerParams], cfg: SimConfig) -> Result<Self, SimError> {
        cfg.validate()?;
        if params.len() != g.n() {
            return Err(SimError::InvalidConfig(format!(
                "{} parameter sets for {} agents",
                params.len(),
                g.n()
            )));
        }
        let (gauge, lyapunov_matrix, offset) = match cfg.mode.protocol() {
            Protocol::Leaderless => (find_gauge(g)?, g.laplacian(), None),
            Protocol::LeaderFollower => {
                let w0 = g
                    .common_input()
                    .ok_or_else(|| SimError::InvalidConfig("leader-follower mode needs inputs".into()))?;
                let gauge = leader_gauge(g)?;
                let offset = gauge.consensus_vector(w0);
                (gauge, g.leader_laplacian(), Some(offset))
            }
        };
        Ok(Self {
            g,
            params,
            cfg,
            gauge,
            lyapunov_matrix,
            offset,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn gauge(&self) -> &Gauge {
        &self.gauge
    }

    fn protocol(&self) -> Protocol {
        self.cfg.mode.protocol()
    }

    /// State at `t = 0` with every agent broadcasting its true state.
    pub fn initial_state(&self, x0: &[DVector<f64>]) -> Result<SimState, SimError> {
        let (n, d) = (self.g.n(), self.g.d());
        if x0.len() != n || x0.iter().any(|x| x.len() != d) {
            return Err(SimError::InvalidConfig(format!("initial state must be {n} vectors of length {d}")));
        }
        let agents = x0
            .iter()
            .zip(self.params)
            .map(|(x, p)| AgentRuntime {
                x: x.clone(),
                xhat: x.clone(),
                psi: p.psi0,
                last_event_time: 0.0,
                event_count: 0,
            })
            .collect();
        let mut state = SimState {
            t: 0.0,
            agents,
            uhat: vec![DVector::zeros(d); n],
            power: vec![0.0; n],
        };
        self.refresh_controls(&mut state, 0..n);
        Ok(state)
    }

    fn refresh_controls(&self, state: &mut SimState, agents: impl IntoIterator<Item = usize>) {
        let xhat = state.stacked_xhat();
        for i in agents {
            let u = self.protocol().control(i, &xhat, self.g);
            state.power[i] = saturated_power(&u, self.cfg.sat);
            state.uhat[i] = u;
        }
    }

    /// Per-agent trigger excess in the current state.
    pub fn excesses(&self, state: &SimState) -> Vec<f64> {
        state
            .agents
            .iter()
            .zip(self.params)
            .zip(&state.power)
            .map(|((a, p), &power)| {
                let e2 = (&a.xhat - &a.x).norm_squared();
                p.theta * (p.gain * e2 - p.rho * power) - a.psi
            })
            .collect()
    }

    /// Applied controls `sat_Δ(û_i)`, stacked.
    pub fn applied_controls(&self, state: &SimState) -> DVector<f64> {
        if self.cfg.mode.is_event_triggered() {
            stack(state.uhat.iter()).map(|v| self.cfg.sat.clamp(v))
        } else {
            self.continuous_control(&state.stacked_x()).map(|v| self.cfg.sat.clamp(v))
        }
    }

    fn continuous_control(&self, x: &DVector<f64>) -> DVector<f64> {
        let parts: Vec<DVector<f64>> = (0..self.g.n()).map(|i| self.protocol().control(i, x, self.g)).collect();
        stack(parts.iter())
    }

    fn saturated(&self, applied: &DVector<f64>) -> bool {
        applied.iter().any(|&v| self.cfg.sat.is_active(v))
    }

    /// Right-hand side on the packed vector `[x (n·d); ψ (n)]`.
    fn rhs(&self, state: &SimState, y: &DVector<f64>, saturated: &mut bool) -> DVector<f64> {
        let (n, d) = (self.g.n(), self.g.d());
        let mut dy = DVector::zeros(n * d + n);
        let x = y.rows(0, n * d).into_owned();
        if self.cfg.mode.is_event_triggered() {
            for (i, (a, p)) in state.agents.iter().zip(self.params).enumerate() {
                let applied = state.uhat[i].map(|v| self.cfg.sat.clamp(v));
                *saturated |= self.saturated(&applied);
                dy.rows_mut(i * d, d).copy_from(&applied);
                let e2 = (&a.xhat - x.rows(i * d, d)).norm_squared();
                let psi = y[n * d + i];
                dy[n * d + i] = -p.beta * psi + p.delta * (p.rho * state.power[i] - p.gain * e2);
            }
        } else {
            let applied = self.continuous_control(&x).map(|v| self.cfg.sat.clamp(v));
            *saturated |= self.saturated(&applied);
            dy.rows_mut(0, n * d).copy_from(&applied);
        }
        dy
    }

    /// Advance `state` by `h` with one classical fourth-order Runge-Kutta
    /// step, holding the broadcast set fixed. Also reports whether any
    /// stage saw a saturated control component.
    pub fn integrate_interval(&self, state: &SimState, h: f64) -> Result<(SimState, bool), SimError> {
        let (n, d) = (self.g.n(), self.g.d());
        let mut y = DVector::zeros(n * d + n);
        y.rows_mut(0, n * d).copy_from(&state.stacked_x());
        y.rows_mut(n * d, n).copy_from(&state.psi());

        let mut saturated = false;
        let k1 = self.rhs(state, &y, &mut saturated);
        let k2 = self.rhs(state, &(&y + &k1 * (h / 2.0)), &mut saturated);
        let k3 = self.rhs(state, &(&y + &k2 * (h / 2.0)), &mut saturated);
        let k4 = self.rhs(state, &(&y + &k3 * h), &mut saturated);
        let next = &y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);

        let t = state.t + h;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(SimError::NonFiniteState { t });
        }
        let mut out = state.clone();
        out.t = t;
        for (i, a) in out.agents.iter_mut().enumerate() {
            a.x.copy_from(&next.rows(i * d, d));
            if self.cfg.mode.is_event_triggered() {
                a.psi = next[n * d + i];
            }
        }
        Ok((out, saturated))
    }

    /// Try a step of length `h`; if some trigger crosses zero inside it,
    /// locate the earliest crossing by bisection to within `refine_tol`.
    pub fn detect_event(&self, state: &SimState, h: f64) -> Result<StepOutcome, SimError> {
        let (end, saturated) = self.integrate_interval(state, h)?;
        if !self.cfg.mode.is_event_triggered() || self.excesses(&end).iter().all(|&e| e <= 0.0) {
            return Ok(StepOutcome::Clear { state: end, saturated });
        }
        let (mut lo, mut hi) = (0.0, h);
        let mut hit = (end, saturated);
        while hi - lo > self.cfg.refine_tol {
            let mid = 0.5 * (lo + hi);
            let probe = self.integrate_interval(state, mid)?;
            if self.excesses(&probe.0).iter().any(|&e| e > 0.0) {
                hi = mid;
                hit = probe;
            } else {
                lo = mid;
            }
        }
        let (state, saturated) = hit;
        let agents = self
            .excesses(&state)
            .iter()
            .enumerate()
            .filter(|(_, &e)| e >= 0.0)
            .map(|(i, _)| i)
            .collect();
        Ok(StepOutcome::Event {
            state,
            agents,
            saturated,
        })
    }

    /// Broadcast the current state of each listed agent at `state.t`, then
    /// recompute the controls of the broadcasters and their neighbours.
    pub fn apply_events(&self, state: &mut SimState, agents: &[usize]) {
        let t = state.t;
        let mut touched = vec![false; self.g.n()];
        for &i in agents {
            let a = &mut state.agents[i];
            a.xhat.copy_from(&a.x);
            a.event_count += 1;
            a.last_event_time = t;
            touched[i] = true;
            for (j, _) in self.g.neighbors(i) {
                touched[j] = true;
            }
        }
        let affected: Vec<usize> = (0..self.g.n()).filter(|&i| touched[i]).collect();
        self.refresh_controls(state, affected);
    }

    fn lyapunov(&self, state: &SimState) -> f64 {
        let mut xi = state.stacked_x();
        if let Some(off) = &self.offset {
            xi -= off;
        }
        let quad = xi.dot(&(&self.lyapunov_matrix * &xi));
        if self.cfg.mode.is_event_triggered() {
            quad + state.agents.iter().map(|a| a.psi).sum::<f64>()
        } else {
            quad
        }
    }

    fn sample_times(&self) -> Vec<f64> {
        let (t_end, dt) = (self.cfg.t_end, self.cfg.sample_dt);
        let count = (t_end / dt + 1e-9).floor() as usize;
        let mut times: Vec<f64> = (0..=count).map(|k| k as f64 * dt).collect();
        if let Some(last) = times.last_mut() {
            if (t_end - *last).abs() <= 1e-9 * dt {
                *last = t_end;
            } else {
                times.push(t_end);
            }
        }
        times
    }

    /// Simulate from `x0` over `[0, t_end]`.
    pub fn run(&self, x0: &[DVector<f64>]) -> Result<SimulationRecord, SimError> {
        let n = self.g.n();
        let event_mode = self.cfg.mode.is_event_triggered();
        let mut state = self.initial_state(x0)?;
        let mut rec = SimulationRecord {
            mode: self.cfg.mode,
            n,
            d: self.g.d(),
            delta_sat: self.cfg.sat.value(),
            t_end: self.cfg.t_end,
            refine_tol: self.cfg.refine_tol,
            times: Vec::new(),
            states: Vec::new(),
            controls: Vec::new(),
            psi: Vec::new(),
            excess: Vec::new(),
            lyapunov: Vec::new(),
            saturation_active: Vec::new(),
            events: Vec::new(),
            event_counts: vec![0; n],
            t_sf: None,
            params: self.params.to_vec(),
            gauge: self.gauge.clone(),
            target: match self.protocol() {
                Protocol::LeaderFollower => self.g.common_input().cloned(),
                Protocol::Leaderless => None,
            },
        };
        if self.cfg.t_end <= 0.0 {
            return Ok(rec);
        }

        let mut windows: Vec<VecDeque<f64>> = vec![VecDeque::new(); n];
        if event_mode {
            let all: Vec<usize> = (0..n).collect();
            self.broadcast(&mut state, &all, &mut rec, &mut windows)?;
        }

        for target in self.sample_times() {
            let mut saturated = rec.times.is_empty() && self.saturated(&self.applied_controls(&state));
            while state.t < target {
                let h = self.cfg.dt.min(target - state.t);
                match self.detect_event(&state, h)? {
                    StepOutcome::Clear { state: next, saturated: s } => {
                        saturated |= s;
                        state = next;
                        if target - state.t <= 1e-12 * target.max(1.0) {
                            state.t = target;
                        }
                    }
                    StepOutcome::Event {
                        state: next,
                        agents,
                        saturated: s,
                    } => {
                        saturated |= s;
                        state = next;
                        self.broadcast(&mut state, &agents, &mut rec, &mut windows)?;
                        self.cascade(&mut state, &mut rec, &mut windows)?;
                    }
                }
            }
            let applied = self.applied_controls(&state);
            saturated |= self.saturated(&applied);
            rec.times.push(target);
            rec.states.push(state.stacked_x());
            rec.controls.push(applied);
            if event_mode {
                rec.psi.push(state.psi());
                rec.excess.push(DVector::from_vec(self.excesses(&state)));
            }
            rec.lyapunov.push(self.lyapunov(&state));
            rec.saturation_active.push(saturated);
            if saturated {
                rec.t_sf = Some(target);
            }
        }
        rec.event_counts = state.agents.iter().map(|a| a.event_count).collect();
        Ok(rec)
    }

    /// Agents pushed over the threshold by a neighbour's broadcast fire at
    /// the same instant. A broadcaster's own excess is `-θρûᵀsat(û) - ψ < 0`,
    /// so each agent fires at most once per cascade.
    fn cascade(&self, state: &mut SimState, rec: &mut SimulationRecord, windows: &mut [VecDeque<f64>]) -> Result<(), SimError> {
        loop {
            let fire: Vec<usize> = self
                .excesses(state)
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0.0)
                .map(|(i, _)| i)
                .collect();
            if fire.is_empty() {
                return Ok(());
            }
            self.broadcast(state, &fire, rec, windows)?;
        }
    }

    fn broadcast(
        &self,
        state: &mut SimState,
        agents: &[usize],
        rec: &mut SimulationRecord,
        windows: &mut [VecDeque<f64>],
    ) -> Result<(), SimError> {
        let t = state.t;
        self.apply_events(state, agents);
        for &agent in agents {
            rec.events.push(Event { agent, time: t });
            let w = &mut windows[agent];
            w.push_back(t);
            while w.front().is_some_and(|&s| s < t - 1.0) {
                w.pop_front();
            }
            if w.len() > self.cfg.max_events_per_second {
                return Err(SimError::ZenoGuardTripped {
                    agent,
                    t,
                    count: w.len(),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::compute_varpi;
    use crate::matgraph::WeightMatrix;
    use crate::testdata;

    fn params_for(g: &MatrixWeightedNetwork, protocol: Protocol, theta: f64) -> Vec<TriggerParams> {
        (0..g.n())
            .map(|i| TriggerParams {
                rho: 0.9,
                delta: 1.0,
                beta: 1.0,
                theta,
                psi0: 0.5,
                gain: protocol.gain(g, i),
            })
            .collect()
    }

    fn sat(v: f64) -> SaturationLevel {
        SaturationLevel::new(v).unwrap()
    }

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    #[test]
    fn pure_psi_decay_matches_exponential() {
        let g = MatrixWeightedNetwork::new(1, 2);
        let params = vec![TriggerParams {
            rho: 0.5,
            delta: 1.0,
            beta: 2.0,
            theta: 1.0,
            psi0: 0.8,
            gain: 0.0,
        }];
        let cfg = SimConfig::new(Mode::EventLeaderless, sat(1.0), 1.0);
        let sim = Simulator::new(&g, &params, cfg).unwrap();
        let s0 = sim.initial_state(&[v(&[0.3, -0.4])]).unwrap();
        let h = 0.01;
        let (s1, _) = sim.integrate_interval(&s0, h).unwrap();
        let exact = 0.8 * (-2.0 * h).exp();
        // one RK4 step: local error about 0.8 (2h)^5 / 120
        assert!((s1.agents[0].psi - exact).abs() < 1e-10);
        assert_eq!(s1.agents[0].x, v(&[0.3, -0.4]));
    }

    #[test]
    fn consensus_state_is_an_equilibrium() {
        let g1 = testdata::g1();
        let params = params_for(&g1, Protocol::Leaderless, 0.5);
        for mode in [Mode::EventLeaderless, Mode::ContinuousLeaderless] {
            let cfg = SimConfig::new(mode, sat(0.5), 1.0);
            let sim = Simulator::new(&g1, &params, cfg).unwrap();
            let xr = sim.gauge().consensus_vector(&v(&[0.3, -0.6, 0.9]));
            let x0: Vec<_> = (0..5).map(|i| xr.rows(i * 3, 3).into_owned()).collect();
            let s0 = sim.initial_state(&x0).unwrap();
            let (s1, _) = sim.integrate_interval(&s0, 0.01).unwrap();
            assert!((s1.stacked_x() - xr).amax() < 1e-12);
        }
    }

    #[test]
    fn single_agent_tracking_matches_closed_form() {
        // x' = -(x - c) with B = I and no saturation: x(t) = c + (x0 - c) e^{-t}.
        let mut g = MatrixWeightedNetwork::new(1, 2);
        let c = v(&[0.7, -0.2]);
        g.set_inputs(vec![c.clone()]).unwrap();
        g.add_leader_edge(0, 0, WeightMatrix::scalar(1.0, 2).unwrap()).unwrap();
        let params = params_for(&g, Protocol::LeaderFollower, 1.0);
        let cfg = SimConfig::new(Mode::ContinuousLeaderFollower, sat(1e6), 1.0);
        let sim = Simulator::new(&g, &params, cfg).unwrap();
        let x0 = v(&[-1.0, 2.0]);
        let s0 = sim.initial_state(std::slice::from_ref(&x0)).unwrap();
        let h = 0.01;
        let (s1, _) = sim.integrate_interval(&s0, h).unwrap();
        let exact = &c + (&x0 - &c) * (-h).exp();
        assert!((&s1.agents[0].x - exact).amax() < 1e-8);
    }

    #[test]
    fn no_event_at_consensus() {
        let g1 = testdata::g1();
        let params = params_for(&g1, Protocol::Leaderless, 0.5);
        let sim = Simulator::new(&g1, &params, SimConfig::new(Mode::EventLeaderless, sat(0.5), 1.0)).unwrap();
        let xr = sim.gauge().consensus_vector(&v(&[0.1, 0.2, 0.3]));
        let x0: Vec<_> = (0..5).map(|i| xr.rows(i * 3, 3).into_owned()).collect();
        let s0 = sim.initial_state(&x0).unwrap();
        assert!(matches!(sim.detect_event(&s0, 1e-3).unwrap(), StepOutcome::Clear { .. }));
    }

    #[test]
    fn bisection_finds_linear_crossing() {
        // One agent, constant control u = 0.5 (unsaturated), delta = 0 so ψ
        // decays as ψ0 e^{-βt}; with β tiny ψ is nearly constant and the
        // excess θ(g‖u‖²t² - ρ‖u‖²) - ψ crosses zero at a known time.
        let mut g = MatrixWeightedNetwork::new(1, 1);
        g.set_inputs(vec![v(&[0.5])]).unwrap();
        g.add_leader_edge(0, 0, WeightMatrix::scalar(1.0, 1).unwrap()).unwrap();
        let p = TriggerParams {
            rho: 0.0,
            delta: 0.0,
            beta: 1e-12,
            theta: 1.0,
            psi0: 1e-4,
            gain: 100.0,
        };
        let params = vec![p];
        let mut cfg = SimConfig::new(Mode::EventLeaderFollower, sat(10.0), 1.0);
        cfg.refine_tol = 1e-9;
        let sim = Simulator::new(&g, &params, cfg).unwrap();
        let s0 = sim.initial_state(&[v(&[0.0])]).unwrap();
        // e(t) = -0.5 t, excess = 100 * 0.25 t² - 1e-4 = 0 at t = 2e-3.
        let outcome = sim.detect_event(&s0, 5e-3).unwrap();
        let StepOutcome::Event { state, agents, .. } = outcome else {
            panic!("expected an event");
        };
        assert_eq!(agents, vec![0]);
        assert!((state.t - 2e-3).abs() <= 1e-9, "{}", state.t);
    }

    #[test]
    fn simultaneous_crossings_fire_together() {
        let mut g = MatrixWeightedNetwork::new(2, 1);
        g.set_inputs(vec![v(&[0.5])]).unwrap();
        g.add_leader_edge(0, 0, WeightMatrix::scalar(1.0, 1).unwrap()).unwrap();
        g.add_leader_edge(1, 0, WeightMatrix::scalar(1.0, 1).unwrap()).unwrap();
        let p = TriggerParams {
            rho: 0.0,
            delta: 0.0,
            beta: 1e-12,
            theta: 1.0,
            psi0: 1e-4,
            gain: 100.0,
        };
        let params = vec![p, p];
        let sim = Simulator::new(&g, &params, SimConfig::new(Mode::EventLeaderFollower, sat(10.0), 1.0)).unwrap();
        let s0 = sim.initial_state(&[v(&[0.0]), v(&[0.0])]).unwrap();
        let StepOutcome::Event { agents, .. } = sim.detect_event(&s0, 5e-3).unwrap() else {
            panic!("expected an event");
        };
        assert_eq!(agents, vec![0, 1]);
    }

    #[test]
    fn apply_events_is_local() {
        // path 0 - 1 - 2 - 3: a broadcast by 0 changes û_0, û_1 only.
        let mut g = MatrixWeightedNetwork::new(4, 1);
        for i in 0..3 {
            g.add_edge(i, i + 1, WeightMatrix::scalar(1.0, 1).unwrap()).unwrap();
        }
        let params = params_for(&g, Protocol::Leaderless, 0.5);
        let sim = Simulator::new(&g, &params, SimConfig::new(Mode::EventLeaderless, sat(10.0), 1.0)).unwrap();
        let mut s = sim.initial_state(&[v(&[1.0]), v(&[0.0]), v(&[2.0]), v(&[-1.0])]).unwrap();
        let before = s.uhat.clone();
        s.agents[0].x = v(&[3.0]);
        s.agents[3].x = v(&[5.0]);
        s.t = 0.25;
        sim.apply_events(&mut s, &[0]);
        assert_eq!(s.agents[0].xhat, v(&[3.0]));
        assert_eq!(s.agents[0].event_count, 1);
        assert_eq!(s.agents[0].last_event_time, 0.25);
        assert_eq!(s.agents[3].xhat, v(&[-1.0]));
        assert_ne!(s.uhat[0], before[0]);
        assert_ne!(s.uhat[1], before[1]);
        assert_eq!(s.uhat[2], before[2]);
        assert_eq!(s.uhat[3], before[3]);

        // broadcasting an unchanged state only bumps counters
        let snapshot = s.clone();
        sim.apply_events(&mut s, &[2]);
        assert_eq!(s.uhat, snapshot.uhat);
        assert_eq!(s.agents[2].event_count, 1);

        // a simultaneous pair resets both errors
        sim.apply_events(&mut s, &[0, 3]);
        assert_eq!(s.agents[3].error().norm(), 0.0);
        assert_eq!(s.agents[0].error().norm(), 0.0);
        let xhat = s.stacked_xhat();
        for i in 0..4 {
            assert_eq!(s.uhat[i], crate::control::control_leaderless(i, &xhat, &g));
        }
    }

    #[test]
    fn zero_initial_conditions_stay_put() {
        let g1 = testdata::g1();
        let params = params_for(&g1, Protocol::Leaderless, 0.5);
        let sim = Simulator::new(&g1, &params, SimConfig::new(Mode::EventLeaderless, sat(0.5), 2.0)).unwrap();
        let rec = sim.run(&vec![DVector::zeros(3); 5]).unwrap();
        assert!(rec.states.iter().all(|x| x.amax() == 0.0));
        assert_eq!(rec.total_events(), 5);
        assert!(rec.events.iter().all(|e| e.time == 0.0));
        assert!(rec.t_sf.is_none());
    }

    #[test]
    fn zeno_guard_trips_when_limit_is_tiny() {
        let g1 = testdata::g1();
        let params = params_for(&g1, Protocol::Leaderless, 0.5);
        let mut cfg = SimConfig::new(Mode::EventLeaderless, sat(0.5), 2.0);
        cfg.max_events_per_second = 3;
        let sim = Simulator::new(&g1, &params, cfg).unwrap();
        let x0: Vec<_> = (0..5).map(|i| v(&[0.5 - 0.2 * i as f64, 0.3, -0.4])).collect();
        assert!(matches!(sim.run(&x0), Err(SimError::ZenoGuardTripped { .. })));
    }

    #[test]
    fn empty_horizon_gives_empty_record() {
        let g1 = testdata::g1();
        let params = params_for(&g1, Protocol::Leaderless, 0.5);
        let sim = Simulator::new(&g1, &params, SimConfig::new(Mode::EventLeaderless, sat(0.5), 0.0)).unwrap();
        let rec = sim.run(&vec![DVector::zeros(3); 5]).unwrap();
        assert!(rec.is_empty());
        assert!(rec.events.is_empty());
    }

    #[test]
    fn sample_grid_covers_horizon() {
        let g = MatrixWeightedNetwork::new(1, 1);
        let params = vec![TriggerParams {
            rho: 0.0,
            delta: 1.0,
            beta: 1.0,
            theta: 1.0,
            psi0: 1.0,
            gain: compute_varpi(&g, 0),
        }];
        let mut cfg = SimConfig::new(Mode::EventLeaderless, sat(1.0), 0.025);
        cfg.sample_dt = 0.01;
        let sim = Simulator::new(&g, &params, cfg).unwrap();
        assert_eq!(sim.sample_times(), vec![0.0, 0.01, 0.02, 0.025]);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let g1 = testdata::g1();
        let params = params_for(&g1, Protocol::Leaderless, 0.5);
        let mut cfg = SimConfig::new(Mode::EventLeaderless, sat(0.5), 1.0);
        cfg.refine_tol = 0.1;
        assert!(matches!(Simulator::new(&g1, &params, cfg), Err(SimError::InvalidConfig(_))));
        let cfg = SimConfig::new(Mode::EventLeaderFollower, sat(0.5), 1.0);
        assert!(matches!(Simulator::new(&g1, &params, cfg), Err(SimError::InvalidConfig(_))));
    }
}
