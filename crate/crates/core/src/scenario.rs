//! Scenario files.
//!
//! A scenario is TOML with four sections. Node and input indices are
//! one-based; matrices are flat row-major lists of `d * d` numbers.
//!
//! ```toml
//! [network]
//! n = 2
//! d = 1
//! weight_tol = 1e-6        # optional
//! [[network.edge]]
//! i = 1
//! j = 2
//! matrix = [-1.0]
//!
//! [leaders]                # optional
//! input = [[0.5]]
//! [[leaders.leader_edge]]
//! node = 1
//! input = 1
//! matrix = [1.0]
//!
//! [params]                 # each value: a number or one number per agent
//! rho = 0.9
//! delta = 1.0
//! beta = 1.0
//! theta = 0.5
//! psi0 = 0.5
//!
//! [sim]
//! mode = "event_leaderless"
//! delta_sat = 0.5
//! t_end = 6.0
//! dt = 1e-3
//! sample_dt = 1e-2
//! refine_tol = 1e-6
//! seed = 1
//! [sim.init]
//! kind = "uniform"         # or "explicit" with `states = [[...], ...]`
//! low = -1.0
//! high = 1.0
//! ```

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::control::{validate_params, Protocol, SaturationLevel, TriggerParams};
use crate::matgraph::{
    check_assumption1, check_assumption2, find_gauge, leader_gauge, Gauge, MatrixWeightedNetwork,
    DEFAULT_NULLSPACE_TOL, DEFAULT_WEIGHT_TOL,
};
use crate::sim::{Mode, SimConfig, SimError, SimulationRecord, Simulator};

/// Scenarios shipped with the crate, addressable by name.
pub const BUNDLED: &[(&str, &str)] = &[
    ("g1_leaderless", include_str!("../scenarios/g1_leaderless.toml")),
    ("g1_leader_follower", include_str!("../scenarios/g1_leader_follower.toml")),
];

const FILE_SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scenario not found: {0}")]
    NotFound(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Validation(String),
}

fn invalid<T>(msg: impl Into<String>) -> Result<T, ScenarioError> {
    Err(ScenarioError::Validation(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeSpec {
    pub i: usize,
    pub j: usize,
    pub matrix: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub n: usize,
    pub d: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight_tol: Option<f64>,
    #[serde(default, rename = "edge")]
    pub edges: Vec<EdgeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeaderEdgeSpec {
    pub node: usize,
    pub input: usize,
    pub matrix: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeadersSpec {
    #[serde(rename = "input")]
    pub inputs: Vec<Vec<f64>>,
    #[serde(default, rename = "leader_edge")]
    pub leader_edges: Vec<LeaderEdgeSpec>,
}

/// A parameter shared by all agents or given per agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerAgent {
    Shared(f64),
    Each(Vec<f64>),
}

impl PerAgent {
    fn resolve(&self, name: &str, n: usize) -> Result<Vec<f64>, ScenarioError> {
        match self {
            PerAgent::Shared(v) => Ok(vec![*v; n]),
            PerAgent::Each(vs) if vs.len() == n => Ok(vs.clone()),
            PerAgent::Each(vs) => invalid(format!("params.{name}: expected {n} values, got {}", vs.len())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSpec {
    pub rho: PerAgent,
    pub delta: PerAgent,
    pub beta: PerAgent,
    pub theta: PerAgent,
    pub psi0: PerAgent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Uniform,
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSpec {
    pub kind: InitKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub low: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub high: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub states: Option<Vec<Vec<f64>>>,
}

impl Default for InitSpec {
    fn default() -> Self {
        Self {
            kind: InitKind::Uniform,
            low: Some(-1.0),
            high: Some(1.0),
            states: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSpec {
    pub mode: Mode,
    pub delta_sat: f64,
    pub t_end: f64,
    pub dt: f64,
    pub sample_dt: f64,
    pub refine_tol: f64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_events_per_second: Option<usize>,
    #[serde(default)]
    pub init: InitSpec,
}

/// The literal contents of a scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub network: NetworkSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leaders: Option<LeadersSpec>,
    pub params: ParamsSpec,
    pub sim: SimSpec,
}

/// A parsed and fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    spec: ScenarioSpec,
    network: MatrixWeightedNetwork,
    gauge: Gauge,
    params: Vec<TriggerParams>,
    config: SimConfig,
}

fn square(values: &[f64], d: usize, what: &str) -> Result<DMatrix<f64>, ScenarioError> {
    if values.len() != d * d {
        return invalid(format!("{what}: expected {} entries, got {}", d * d, values.len()));
    }
    let m = DMatrix::from_row_slice(d, d, values);
    let scale = m.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let asym = (&m - m.transpose()).amax();
    if asym > FILE_SYMMETRY_TOL * scale {
        return invalid(format!("{what}: matrix is not symmetric (max |M - M^T| = {asym:e})"));
    }
    Ok((&m + m.transpose()) * 0.5)
}

fn node_index(k: usize, n: usize, what: &str) -> Result<usize, ScenarioError> {
    if k == 0 || k > n {
        return invalid(format!("{what}: node {k} outside 1..={n}"));
    }
    Ok(k - 1)
}

fn build_network(spec: &ScenarioSpec) -> Result<MatrixWeightedNetwork, ScenarioError> {
    let ns = &spec.network;
    if ns.n == 0 || ns.d == 0 {
        return invalid("network: n and d must be positive");
    }
    let tol = ns.weight_tol.unwrap_or(DEFAULT_WEIGHT_TOL);
    let mut g = MatrixWeightedNetwork::with_tol(ns.n, ns.d, tol);
    for (k, e) in ns.edges.iter().enumerate() {
        let what = format!("network.edge[{}] ({}, {})", k + 1, e.i, e.j);
        let i = node_index(e.i, ns.n, &what)?;
        let j = node_index(e.j, ns.n, &what)?;
        let m = square(&e.matrix, ns.d, &what)?;
        g.add_edge_matrix(i, j, m)
            .map_err(|err| ScenarioError::Validation(format!("{what}: {err}")))?;
    }
    if let Some(ls) = &spec.leaders {
        let inputs = ls.inputs.iter().map(|w| DVector::from_row_slice(w)).collect();
        g.set_inputs(inputs)
            .map_err(|err| ScenarioError::Validation(format!("leaders.inputs: {err}")))?;
        for (k, e) in ls.leader_edges.iter().enumerate() {
            let what = format!("leaders.leader_edge[{}] (node {}, input {})", k + 1, e.node, e.input);
            let node = node_index(e.node, ns.n, &what)?;
            if e.input == 0 || e.input > ls.inputs.len() {
                return invalid(format!("{what}: input {} outside 1..={}", e.input, ls.inputs.len()));
            }
            let m = square(&e.matrix, ns.d, &what)?;
            g.add_leader_edge_matrix(node, e.input - 1, m)
                .map_err(|err| ScenarioError::Validation(format!("{what}: {err}")))?;
        }
    }
    Ok(g)
}

impl Scenario {
    /// Validate a parsed specification: weights, balance, the null-space and
    /// leader conditions required by the mode, trigger parameters, numerics.
    pub fn from_spec(spec: ScenarioSpec) -> Result<Self, ScenarioError> {
        let network = build_network(&spec)?;
        let mode = spec.sim.mode;
        let protocol = mode.protocol();
        let n = network.n();

        let balance_gauge =
            find_gauge(&network).map_err(|e| ScenarioError::Validation(e.to_string()))?;
        if !check_assumption1(&network, &balance_gauge, DEFAULT_NULLSPACE_TOL) {
            return invalid("network fails the null-space condition: null(D* L D*) differs from range(D* (1_n ⊗ I_d))");
        }
        let gauge = match protocol {
            Protocol::Leaderless => balance_gauge,
            Protocol::LeaderFollower => {
                let Some(ls) = &spec.leaders else {
                    return invalid(format!("mode {} requires a [leaders] section", mode.name()));
                };
                if ls.inputs.is_empty() || ls.leader_edges.is_empty() {
                    return invalid(format!("mode {} requires inputs and leader edges", mode.name()));
                }
                let gauge = leader_gauge(&network).map_err(|e| {
                    ScenarioError::Validation(format!("input-augmented network: {e}"))
                })?;
                if !check_assumption2(&network) {
                    return invalid("leader condition fails: sum of |B_il| is not positive definite");
                }
                gauge
            }
        };

        let ps = &spec.params;
        let (rho, delta, beta, theta, psi0) = (
            ps.rho.resolve("rho", n)?,
            ps.delta.resolve("delta", n)?,
            ps.beta.resolve("beta", n)?,
            ps.theta.resolve("theta", n)?,
            ps.psi0.resolve("psi0", n)?,
        );
        let params: Vec<TriggerParams> = (0..n)
            .map(|i| TriggerParams {
                rho: rho[i],
                delta: delta[i],
                beta: beta[i],
                theta: theta[i],
                psi0: psi0[i],
                gain: protocol.gain(&network, i),
            })
            .collect();
        validate_params(&params, &network, protocol).map_err(|e| ScenarioError::Validation(e.to_string()))?;

        let ss = &spec.sim;
        let sat = SaturationLevel::new(ss.delta_sat).map_err(|e| ScenarioError::Validation(format!("sim.delta_sat: {e}")))?;
        let config = SimConfig {
            mode,
            sat,
            t_end: ss.t_end,
            dt: ss.dt,
            sample_dt: ss.sample_dt,
            refine_tol: ss.refine_tol,
            max_events_per_second: ss.max_events_per_second.unwrap_or(crate::sim::DEFAULT_MAX_EVENTS_PER_SECOND),
        };
        config.validate().map_err(|e| ScenarioError::Validation(e.to_string()))?;
        validate_init(&ss.init, n, network.d())?;

        Ok(Self {
            spec,
            network,
            gauge,
            params,
            config,
        })
    }

    pub fn spec(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn network(&self) -> &MatrixWeightedNetwork {
        &self.network
    }

    /// Gauge used by the mode: the balance gauge for leaderless modes, the
    /// input-oriented gauge for leader-follower modes.
    pub fn gauge(&self) -> &Gauge {
        &self.gauge
    }

    pub fn params(&self) -> &[TriggerParams] {
        &self.params
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn mode(&self) -> Mode {
        self.config.mode
    }

    pub fn seed(&self) -> u64 {
        self.spec.sim.seed
    }

    pub fn to_text(&self) -> String {
        toml::to_string(&self.spec).expect("scenario specs always serialise")
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        let mut out = self.clone();
        out.spec.sim.seed = seed;
        out
    }

    pub fn with_mode(&self, mode: Mode) -> Result<Self, ScenarioError> {
        let mut spec = self.spec.clone();
        spec.sim.mode = mode;
        Self::from_spec(spec)
    }

    pub fn with_t_end(&self, t_end: f64) -> Result<Self, ScenarioError> {
        let mut spec = self.spec.clone();
        spec.sim.t_end = t_end;
        Self::from_spec(spec)
    }

    /// Initial agent states: explicit, or drawn uniformly with the seed.
    pub fn initial_states(&self) -> Vec<DVector<f64>> {
        let (n, d) = (self.network.n(), self.network.d());
        let init = &self.spec.sim.init;
        match init.kind {
            InitKind::Explicit => init
                .states
                .as_ref()
                .map(|s| s.iter().map(|x| DVector::from_row_slice(x)).collect())
                .unwrap_or_default(),
            InitKind::Uniform => {
                let (low, high) = (init.low.unwrap_or(-1.0), init.high.unwrap_or(1.0));
                let mut rng = ChaCha8Rng::seed_from_u64(self.spec.sim.seed);
                (0..n)
                    .map(|_| DVector::from_iterator(d, (0..d).map(|_| rng.random_range(low..high))))
                    .collect()
            }
        }
    }

    pub fn simulator(&self) -> Result<Simulator<'_>, SimError> {
        Simulator::new(&self.network, &self.params, self.config)
    }

    pub fn run(&self) -> Result<SimulationRecord, SimError> {
        self.simulator()?.run(&self.initial_states())
    }
}

fn validate_init(init: &InitSpec, n: usize, d: usize) -> Result<(), ScenarioError> {
    match init.kind {
        InitKind::Uniform => {
            if init.states.is_some() {
                return invalid("sim.init: `states` is only allowed with kind = \"explicit\"");
            }
            let (low, high) = (init.low.unwrap_or(-1.0), init.high.unwrap_or(1.0));
            if !(low < high && low.is_finite() && high.is_finite()) {
                return invalid(format!("sim.init: need finite low < high, got [{low}, {high}]"));
            }
        }
        InitKind::Explicit => {
            if init.low.is_some() || init.high.is_some() {
                return invalid("sim.init: `low`/`high` are only allowed with kind = \"uniform\"");
            }
            let Some(states) = &init.states else {
                return invalid("sim.init: kind = \"explicit\" requires `states`");
            };
            if states.len() != n || states.iter().any(|s| s.len() != d) {
                return invalid(format!("sim.init.states: expected {n} vectors of length {d}"));
            }
            if states.iter().flatten().any(|v| !v.is_finite()) {
                return invalid("sim.init.states: non-finite entry");
            }
        }
    }
    Ok(())
}

/// Strictly parse and validate scenario text.
pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let spec: ScenarioSpec = toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
    Scenario::from_spec(spec)
}

/// Text of a bundled scenario, accepting an optional `.toml` suffix.
pub fn bundled(name: &str) -> Option<&'static str> {
    let stem = name.strip_suffix(".toml").unwrap_or(name);
    BUNDLED.iter().find(|(n, _)| *n == stem).map(|(_, text)| *text)
}

/// Load a scenario from a file path, falling back to the bundled names.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario, ScenarioError> {
    let path = Path::new(name_or_path);
    if path.exists() {
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: name_or_path.to_string(),
            source,
        })?;
        return parse_scenario(&text);
    }
    match bundled(name_or_path) {
        Some(text) => parse_scenario(text),
        None => Err(ScenarioError::NotFound(format!(
            "{name_or_path} (no such file, and not a bundled scenario name)"
        ))),
    }
}
