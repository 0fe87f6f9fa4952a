//! Saturation, distributed control laws, trigger functions and gains.

use std::fmt;

use nalgebra::DVector;
use thiserror::Error;

use crate::matgraph::MatrixWeightedNetwork;

/// A control component within this distance of `±Δ` counts as saturated.
pub const SATURATION_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("saturation level must be positive, got {0}")]
pub struct InvalidSaturation(pub f64);

/// Actuator saturation level `Δ > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SaturationLevel(f64);

impl SaturationLevel {
    pub fn new(delta: f64) -> Result<Self, InvalidSaturation> {
        if delta > 0.0 && !delta.is_nan() {
            Ok(Self(delta))
        } else {
            Err(InvalidSaturation(delta))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn clamp(self, h: f64) -> f64 {
        h.clamp(-self.0, self.0)
    }

    /// Whether a saturated component sits at `±Δ`.
    pub fn is_active(self, v: f64) -> bool {
        v.abs() >= self.0 - SATURATION_EPS
    }
}

/// Componentwise `sgn(h) min(|h|, Δ)`.
pub fn saturate(h: &DVector<f64>, sat: SaturationLevel) -> DVector<f64> {
    h.map(|v| sat.clamp(v))
}

/// `hᵀ sat_Δ(h)`, non-negative for every `h`.
pub fn saturated_power(h: &DVector<f64>, sat: SaturationLevel) -> f64 {
    h.iter().map(|&v| v * sat.clamp(v)).sum()
}

/// `-Σ_j |A_ij| (x̂_i - sgn(A_ij) x̂_j)` for agent `i`, reading the stacked
/// broadcast states `xhat`.
pub fn control_leaderless(i: usize, xhat: &DVector<f64>, g: &MatrixWeightedNetwork) -> DVector<f64> {
    let d = g.d();
    let xi = xhat.rows(i * d, d);
    let mut u = DVector::zeros(d);
    for (j, w) in g.neighbors(i) {
        let diff = xi - xhat.rows(j * d, d) * w.sign();
        u -= w.abs_weight() * diff;
    }
    u
}

/// Leaderless law plus the input coupling `-Σ_l |B_il| (x̂_i - sgn(B_il) w_l)`.
pub fn control_leader_follower(i: usize, xhat: &DVector<f64>, g: &MatrixWeightedNetwork) -> DVector<f64> {
    let d = g.d();
    let mut q = control_leaderless(i, xhat, g);
    let xi = xhat.rows(i * d, d);
    for e in g.leader_edges_of(i) {
        let diff = xi - &g.inputs()[e.input] * e.weight.sign();
        q -= e.weight.abs_weight() * diff;
    }
    q
}

/// Which protocol a gain or control law refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    Leaderless,
    LeaderFollower,
}

impl Protocol {
    pub fn control(self, i: usize, xhat: &DVector<f64>, g: &MatrixWeightedNetwork) -> DVector<f64> {
        match self {
            Protocol::Leaderless => control_leaderless(i, xhat, g),
            Protocol::LeaderFollower => control_leader_follower(i, xhat, g),
        }
    }

    pub fn gain(self, g: &MatrixWeightedNetwork, i: usize) -> f64 {
        match self {
            Protocol::Leaderless => compute_varpi(g, i),
            Protocol::LeaderFollower => compute_omega(g, i),
        }
    }

    pub fn gain_symbol(self) -> &'static str {
        match self {
            Protocol::Leaderless => "varpi",
            Protocol::LeaderFollower => "omega",
        }
    }
}

fn neighbor_lambdas(g: &MatrixWeightedNetwork, i: usize) -> (f64, f64) {
    g.neighbors(i).fold((0.0, 0.0), |(sum, sq), (_, w)| {
        let lam = w.lambda_max_abs();
        (sum + lam, sq + lam * lam)
    })
}

/// Leaderless trigger gain
/// `n (Σ_j λ_d(|A_ij|))² + n Σ_j λ_d(|A_ij|)²`, with `n` the agent count.
pub fn compute_varpi(g: &MatrixWeightedNetwork, i: usize) -> f64 {
    let n = g.n() as f64;
    let (sum, sq) = neighbor_lambdas(g, i);
    n * sum * sum + n * sq
}

/// Leader-follower trigger gain
/// `n (Σ_j λ_d(|A_ij|) + Σ_l λ_d(|B_il|))² + n Σ_j λ_d(|A_ij|)²`.
///
/// The input weights enter only the squared sum; agents without input edges
/// get the leaderless gain.
pub fn compute_omega(g: &MatrixWeightedNetwork, i: usize) -> f64 {
    let n = g.n() as f64;
    let (sum, sq) = neighbor_lambdas(g, i);
    let inputs: f64 = g.leader_edges_of(i).map(|e| e.weight.lambda_max_abs()).sum();
    let total = sum + inputs;
    n * total * total + n * sq
}

/// Per-agent dynamic trigger parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerParams {
    /// `ρ_i ∈ [0, 1)`
    pub rho: f64,
    /// `δ_i ∈ [0, 1]`
    pub delta: f64,
    /// `β_i > 0`
    pub beta: f64,
    /// `θ_i > (1 - δ_i) / β_i`
    pub theta: f64,
    /// `ψ_i(0) > 0`
    pub psi0: f64,
    /// `ϖ_i` (leaderless) or `ω_i` (leader-follower)
    pub gain: f64,
}

impl TriggerParams {
    /// Decay rate of the guaranteed lower bound `ψ_i(0) e^{-(β_i + δ_i/θ_i) t}`.
    pub fn psi_floor_rate(&self) -> f64 {
        self.beta + self.delta / self.theta
    }
}

/// `θ_i (gain ‖e_i‖² - ρ_i ûᵀ sat_Δ(û)) - ψ_i`. Agent `i` broadcasts once
/// this becomes strictly positive.
pub fn trigger_excess(
    e: &DVector<f64>,
    u: &DVector<f64>,
    psi: f64,
    p: &TriggerParams,
    sat: SaturationLevel,
) -> f64 {
    p.theta * (p.gain * e.norm_squared() - p.rho * saturated_power(u, sat)) - psi
}

/// `dψ_i/dt = -β_i ψ_i + δ_i (ρ_i ûᵀ sat_Δ(û) - gain ‖e_i‖²)`.
pub fn psi_rate(e: &DVector<f64>, u: &DVector<f64>, psi: f64, p: &TriggerParams, sat: SaturationLevel) -> f64 {
    -p.beta * psi + p.delta * (p.rho * saturated_power(u, sat) - p.gain * e.norm_squared())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamViolation {
    pub agent: usize,
    pub message: String,
}

impl fmt::Display for ParamViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "agent {}: {}", self.agent + 1, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub struct ParamViolations(pub Vec<ParamViolation>);

impl fmt::Display for ParamViolations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "trigger parameter violations: ")?;
        for (k, v) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

const GAIN_REL_TOL: f64 = 1e-9;

/// Check every trigger-parameter constraint, and that each gain equals the
/// formula for `protocol` on `g`.
pub fn validate_params(params: &[TriggerParams], g: &MatrixWeightedNetwork, protocol: Protocol) -> Result<(), ParamViolations> {
    let mut out = Vec::new();
    if params.len() != g.n() {
        out.push(ParamViolation {
            agent: 0,
            message: format!("expected {} parameter sets, got {}", g.n(), params.len()),
        });
        return Err(ParamViolations(out));
    }
    for (agent, p) in params.iter().enumerate() {
        let mut fail = |message: String| out.push(ParamViolation { agent, message });
        if !(0.0..1.0).contains(&p.rho) {
            fail(format!("rho = {} must lie in [0, 1)", p.rho));
        }
        if !(0.0..=1.0).contains(&p.delta) {
            fail(format!("delta = {} must lie in [0, 1]", p.delta));
        }
        if !(p.beta > 0.0 && p.beta.is_finite()) {
            fail(format!("beta = {} must be positive", p.beta));
        }
        if !(p.psi0 > 0.0 && p.psi0.is_finite()) {
            fail(format!("psi0 = {} must be positive", p.psi0));
        }
        if p.beta > 0.0 && !(p.theta > (1.0 - p.delta) / p.beta && p.theta.is_finite()) {
            fail(format!(
                "theta = {} must exceed (1 - delta) / beta = {}",
                p.theta,
                (1.0 - p.delta) / p.beta
            ));
        }
        let expected = protocol.gain(g, agent);
        if p.gain.is_nan() || p.gain < 0.0 || (p.gain - expected).abs() > GAIN_REL_TOL * expected.abs().max(1.0) {
            fail(format!(
                "{} = {} does not match the network value {}",
                protocol.gain_symbol(),
                p.gain,
                expected
            ));
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(ParamViolations(out))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgraph::{find_gauge, WeightMatrix};
    use crate::testdata;
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn sat(d: f64) -> SaturationLevel {
        SaturationLevel::new(d).unwrap()
    }

    #[test]
    fn saturate_examples() {
        assert_eq!(saturate(&v(&[0.3, -0.9, 0.5]), sat(0.5)), v(&[0.3, -0.5, 0.5]));
        assert_eq!(saturate(&DVector::zeros(4), sat(2.0)), DVector::zeros(4));
        let h = v(&[2.0, -0.1]);
        let s = saturate(&h, sat(0.5));
        assert!((s.dot(&s) - 0.26).abs() < 1e-15);
        assert!((h.dot(&s) - 1.01).abs() < 1e-15);
        assert!(SaturationLevel::new(0.0).is_err());
        assert!(SaturationLevel::new(f64::NAN).is_err());
    }

    #[test]
    fn leaderless_control_examples() {
        let g1 = testdata::g1();
        let mut tri = MatrixWeightedNetwork::new(3, 3);
        tri.add_edge_matrix(0, 1, testdata::a12()).unwrap();
        tri.add_edge_matrix(1, 2, testdata::a15()).unwrap();
        let same = DVector::from_iterator(9, [0.3, -0.2, 0.7].iter().copied().cycle().take(9));
        for i in 0..3 {
            assert!(control_leaderless(i, &same, &tri).norm() < 1e-14);
        }

        let gauge = find_gauge(&g1).unwrap();
        let xr = gauge.consensus_vector(&v(&[0.4, -1.1, 0.25]));
        for i in 0..5 {
            assert!(control_leaderless(i, &xr, &g1).norm() < 1e-12);
        }

        let mut two = MatrixWeightedNetwork::new(2, 2);
        two.add_edge_matrix(0, 1, DMatrix::identity(2, 2)).unwrap();
        let u = control_leaderless(0, &v(&[1.0, 0.0, 0.0, 0.0]), &two);
        assert_eq!(u, v(&[-1.0, 0.0]));
    }

    #[test]
    fn leader_follower_control_examples() {
        let lf = testdata::g1_leader_follower();
        let x = DVector::from_iterator(15, (0..15).map(|k| (k as f64 * 0.37).sin()));
        for i in [1, 2, 3] {
            assert_eq!(control_leader_follower(i, &x, &lf), control_leaderless(i, &x, &lf));
        }

        let gauge = crate::matgraph::leader_gauge(&lf).unwrap();
        let xeq = gauge.consensus_vector(&testdata::w0());
        for i in 0..5 {
            assert!(control_leader_follower(i, &xeq, &lf).norm() < 1e-12);
        }

        let q5 = control_leader_follower(4, &DVector::zeros(15), &lf);
        let expected = testdata::a12() * testdata::w0();
        assert!((q5 - expected).norm() < 1e-14);
    }

    #[test]
    fn published_varpi_values() {
        let g1 = testdata::g1();
        for (i, want) in [(0, 6620.0), (1, 10212.0), (2, 6355.0), (3, 3880.0), (4, 7144.0)] {
            let got = compute_varpi(&g1, i);
            assert!((got - want).abs() / want < 0.01, "agent {i}: {got}");
        }
        let lonely = MatrixWeightedNetwork::new(1, 3);
        assert_eq!(compute_varpi(&lonely, 0), 0.0);
    }

    #[test]
    fn published_omega_values() {
        let lf = testdata::g1_leader_follower();
        for (i, want) in [(0, 10004.0), (1, 10212.0), (2, 6355.0), (3, 3880.0), (4, 13027.0)] {
            let got = compute_omega(&lf, i);
            assert!((got - want).abs() / want < 0.01, "agent {i}: {got}");
        }
        assert_eq!(compute_omega(&lf, 2), compute_varpi(&lf, 2));
    }

    #[test]
    fn scalar_weights_reduce_to_absolute_coefficients() {
        let coeffs = [(0, 1, 2.5), (1, 2, -0.75), (0, 2, 4.0), (2, 3, -1.25)];
        let mut g = MatrixWeightedNetwork::new(4, 3);
        for &(i, j, a) in &coeffs {
            g.add_edge(i, j, WeightMatrix::scalar(a, 3).unwrap()).unwrap();
        }
        for i in 0..4 {
            let abs: Vec<f64> = coeffs
                .iter()
                .filter(|c| c.0 == i || c.1 == i)
                .map(|c| f64::abs(c.2))
                .collect();
            let sum: f64 = abs.iter().sum();
            let sq: f64 = abs.iter().map(|a| a * a).sum();
            assert_eq!(compute_varpi(&g, i), 4.0 * sum * sum + 4.0 * sq);
        }
    }

    fn reference_params() -> TriggerParams {
        TriggerParams {
            rho: 0.9,
            delta: 1.0,
            beta: 1.0,
            theta: 0.5,
            psi0: 0.5,
            gain: 6620.0,
        }
    }

    #[test]
    fn trigger_excess_examples() {
        let p = reference_params();
        let u = v(&[0.2, -0.1, 0.05]);
        assert!(trigger_excess(&DVector::zeros(3), &u, 0.3, &p, sat(0.5)) < 0.0);

        let e = v(&[0.01, 0.02, 0.0]);
        let psi = p.theta * p.gain * e.norm_squared();
        assert_eq!(trigger_excess(&e, &DVector::zeros(3), psi, &p, sat(0.5)), 0.0);

        let got = trigger_excess(&v(&[0.01, 0.0, 0.0]), &v(&[0.2, 0.0, 0.0]), 0.4, &p, sat(0.5));
        assert!((got - -0.087).abs() < 1e-12, "{got}");
    }

    #[test]
    fn psi_rate_examples() {
        let p = reference_params();
        let z = DVector::zeros(3);
        assert_eq!(psi_rate(&z, &z, 0.7, &p, sat(0.5)), -0.7);
        let lazy = TriggerParams { delta: 0.0, ..p };
        assert_eq!(psi_rate(&v(&[1.0, 2.0, 3.0]), &v(&[0.4, 0.0, 0.0]), 0.7, &lazy, sat(0.5)), -0.7);
        let got = psi_rate(&v(&[0.01, 0.0, 0.0]), &v(&[0.2, 0.0, 0.0]), 0.4, &p, sat(0.5));
        // -0.4 + (0.9 * 0.04 - 6620 * 1e-4)
        assert!((got - -1.026).abs() < 1e-12, "{got}");
    }

    #[test]
    fn validate_params_examples() {
        let g1 = testdata::g1();
        let good: Vec<_> = (0..5)
            .map(|i| TriggerParams {
                gain: compute_varpi(&g1, i),
                ..reference_params()
            })
            .collect();
        assert!(validate_params(&good, &g1, Protocol::Leaderless).is_ok());

        let mut bad = good.clone();
        bad[2] = TriggerParams {
            theta: 0.0,
            delta: 0.0,
            beta: 1.0,
            ..bad[2]
        };
        let err = validate_params(&bad, &g1, Protocol::Leaderless).unwrap_err();
        assert_eq!(err.0.len(), 1);
        assert_eq!(err.0[0].agent, 2);
        assert!(err.0[0].message.contains("theta"));

        let mut rho = good.clone();
        rho[0].rho = 1.0;
        let err = validate_params(&rho, &g1, Protocol::Leaderless).unwrap_err();
        assert!(err.0[0].message.contains("rho"));

        let mut gain = good;
        gain[4].gain *= 1.001;
        assert!(validate_params(&gain, &g1, Protocol::Leaderless).is_err());
    }
}
