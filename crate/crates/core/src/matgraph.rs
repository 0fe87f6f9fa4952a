//! Matrix-weighted signed networks.
//!
//! Edges carry symmetric `d x d` weights that are positive or negative
//! (semi-)definite. The sign of a weight decides whether the two endpoints
//! are pulled together or apart, and a network is structurally balanced when
//! a two-colouring of the nodes agrees with every edge sign. Node indices in
//! this API are zero-based; error messages print them one-based.

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use thiserror::Error;

/// Default classification tolerance, relative to the spectral radius.
pub const DEFAULT_WEIGHT_TOL: f64 = 1e-6;

/// Default tolerance for the null-space test of [`check_assumption1`].
pub const DEFAULT_NULLSPACE_TOL: f64 = 1e-8;

const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Definiteness {
    PosDef,
    PosSemiDef,
    NegDef,
    NegSemiDef,
    Zero,
}

impl Definiteness {
    /// Sign of the weight: `+1` for positive classes, `-1` for negative ones,
    /// `0` for the zero matrix.
    pub fn sign(self) -> f64 {
        match self {
            Definiteness::PosDef | Definiteness::PosSemiDef => 1.0,
            Definiteness::NegDef | Definiteness::NegSemiDef => -1.0,
            Definiteness::Zero => 0.0,
        }
    }

    pub fn is_definite(self) -> bool {
        matches!(self, Definiteness::PosDef | Definiteness::NegDef)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Definiteness::PosDef => "> 0",
            Definiteness::PosSemiDef => ">= 0",
            Definiteness::NegDef => "< 0",
            Definiteness::NegSemiDef => "<= 0",
            Definiteness::Zero => "= 0",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GraphError {
    #[error("weight matrix is indefinite (eigenvalues span [{min:.6e}, {max:.6e}])")]
    IndefiniteWeight { min: f64, max: f64 },
    #[error("weight matrix is not symmetric (max |M - M^T| = {0:.3e})")]
    NotSymmetric(f64),
    #[error("weight matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("expected a {expected}x{expected} weight, got {rows}x{cols}")]
    DimensionMismatch {
        expected: usize,
        rows: usize,
        cols: usize,
    },
    #[error("classification tolerance must be a finite non-negative number, got {0}")]
    BadTolerance(f64),
    #[error("weight matrix has non-finite entries")]
    NonFinite,
    #[error("node {} out of range for a network with {n} nodes", .node + 1)]
    NodeOutOfRange { node: usize, n: usize },
    #[error("self-loop on node {}", .0 + 1)]
    SelfLoop(usize),
    #[error("duplicate edge ({}, {})", .0 + 1, .1 + 1)]
    DuplicateEdge(usize, usize),
    #[error("duplicate leader edge (node {}, input {})", .0 + 1, .1 + 1)]
    DuplicateLeaderEdge(usize, usize),
    #[error("input {} out of range ({m} inputs declared)", .index + 1)]
    InputOutOfRange { index: usize, m: usize },
    #[error("input {} has length {len}, expected {d}", .index + 1)]
    InputDimension { index: usize, len: usize, d: usize },
    #[error("leader inputs are not homogeneous: input {} differs from input 1", .0 + 1)]
    HeterogeneousInputs(usize),
    #[error("structurally imbalanced: edge ({}, {}) closes a sign-inconsistent cycle", .i + 1, .j + 1)]
    StructurallyImbalanced { i: usize, j: usize },
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn check_symmetric(m: &DMatrix<f64>) -> Result<(), GraphError> {
    if !m.is_square() {
        return Err(GraphError::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(GraphError::NonFinite);
    }
    let asym = max_abs(&(m - m.transpose()));
    if asym > SYMMETRY_TOL * max_abs(m) {
        return Err(GraphError::NotSymmetric(asym));
    }
    Ok(())
}

/// Eigenvalues of a symmetric matrix in ascending order.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Classify a symmetric matrix by the signs of its eigenvalues.
///
/// The threshold separating "zero" eigenvalues from signed ones is
/// `tol * max(1, spectral radius)`, so `tol` acts relatively for large
/// weights and absolutely for tiny ones.
pub fn classify_definiteness(m: &DMatrix<f64>, tol: f64) -> Result<Definiteness, GraphError> {
    if !(tol.is_finite() && tol >= 0.0) {
        return Err(GraphError::BadTolerance(tol));
    }
    check_symmetric(m)?;
    if m.nrows() == 0 {
        return Ok(Definiteness::Zero);
    }
    let ev = sorted_eigenvalues(m);
    let (min, max) = (ev[0], ev[ev.len() - 1]);
    let thr = tol * min.abs().max(max.abs()).max(1.0);
    let class = if min.abs() <= thr && max.abs() <= thr {
        Definiteness::Zero
    } else if min > thr {
        Definiteness::PosDef
    } else if max < -thr {
        Definiteness::NegDef
    } else if min >= -thr {
        Definiteness::PosSemiDef
    } else if max <= thr {
        Definiteness::NegSemiDef
    } else {
        return Err(GraphError::IndefiniteWeight { min, max });
    };
    Ok(class)
}

/// A symmetric edge weight together with its definiteness class.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    entries: DMatrix<f64>,
    definiteness: Definiteness,
    tol: f64,
}

impl WeightMatrix {
    pub fn new(entries: DMatrix<f64>, tol: f64) -> Result<Self, GraphError> {
        let definiteness = classify_definiteness(&entries, tol)?;
        Ok(Self {
            entries,
            definiteness,
            tol,
        })
    }

    /// `a * I_d`, the scalar-weighted special case.
    pub fn scalar(a: f64, d: usize) -> Result<Self, GraphError> {
        Self::new(DMatrix::identity(d, d) * a, DEFAULT_WEIGHT_TOL)
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn definiteness(&self) -> Definiteness {
        self.definiteness
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn sign(&self) -> f64 {
        self.definiteness.sign()
    }

    /// `|W|`: the weight itself for positive classes, its negation for
    /// negative ones, zero for the zero class.
    pub fn abs_weight(&self) -> DMatrix<f64> {
        match self.definiteness {
            Definiteness::Zero => DMatrix::zeros(self.dim(), self.dim()),
            c => &self.entries * c.sign(),
        }
    }

    /// Largest eigenvalue of `|W|`.
    pub fn lambda_max_abs(&self) -> f64 {
        if self.dim() == 0 {
            return 0.0;
        }
        let ev = sorted_eigenvalues(&self.abs_weight());
        ev[ev.len() - 1].max(0.0)
    }

    /// Spectral radius of the signed entries. Equals [`Self::lambda_max_abs`]
    /// up to round-off; kept as an independent route for cross-checks.
    pub fn spectral_radius(&self) -> f64 {
        sorted_eigenvalues(&self.entries)
            .iter()
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    /// Lower endpoint; always `i < j`.
    pub i: usize,
    pub j: usize,
    pub weight: WeightMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderEdge {
    pub node: usize,
    pub input: usize,
    pub weight: WeightMatrix,
}

/// Undirected matrix-weighted network with optional exogenous inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixWeightedNetwork {
    n: usize,
    d: usize,
    tol: f64,
    edges: Vec<Edge>,
    index: BTreeMap<(usize, usize), usize>,
    adjacency: Vec<Vec<(usize, usize)>>,
    leader_edges: Vec<LeaderEdge>,
    inputs: Vec<DVector<f64>>,
}

impl MatrixWeightedNetwork {
    pub fn new(n: usize, d: usize) -> Self {
        Self::with_tol(n, d, DEFAULT_WEIGHT_TOL)
    }

    /// Network whose matrix-valued edges are classified with `tol`.
    pub fn with_tol(n: usize, d: usize, tol: f64) -> Self {
        Self {
            n,
            d,
            tol,
            edges: Vec::new(),
            index: BTreeMap::new(),
            adjacency: vec![Vec::new(); n],
            leader_edges: Vec::new(),
            inputs: Vec::new(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    fn check_node(&self, node: usize) -> Result<(), GraphError> {
        if node >= self.n {
            return Err(GraphError::NodeOutOfRange { node, n: self.n });
        }
        Ok(())
    }

    fn check_dim(&self, w: &WeightMatrix) -> Result<(), GraphError> {
        let (rows, cols) = w.entries.shape();
        if rows != self.d || cols != self.d {
            return Err(GraphError::DimensionMismatch {
                expected: self.d,
                rows,
                cols,
            });
        }
        Ok(())
    }

    /// Add the undirected edge `{i, j}`. Zero-class weights are not stored;
    /// the return value tells whether the edge was kept.
    pub fn add_edge(&mut self, i: usize, j: usize, weight: WeightMatrix) -> Result<bool, GraphError> {
        self.check_node(i)?;
        self.check_node(j)?;
        if i == j {
            return Err(GraphError::SelfLoop(i));
        }
        self.check_dim(&weight)?;
        let (i, j) = (i.min(j), i.max(j));
        if self.index.contains_key(&(i, j)) {
            return Err(GraphError::DuplicateEdge(i, j));
        }
        if weight.definiteness == Definiteness::Zero {
            return Ok(false);
        }
        let k = self.edges.len();
        self.index.insert((i, j), k);
        self.adjacency[i].push((j, k));
        self.adjacency[j].push((i, k));
        self.edges.push(Edge { i, j, weight });
        Ok(true)
    }

    /// Classify `entries` with the network tolerance and add the edge.
    pub fn add_edge_matrix(&mut self, i: usize, j: usize, entries: DMatrix<f64>) -> Result<bool, GraphError> {
        let w = WeightMatrix::new(entries, self.tol)?;
        self.add_edge(i, j, w)
    }

    /// Declare the exogenous inputs. They must all be equal.
    pub fn set_inputs(&mut self, inputs: Vec<DVector<f64>>) -> Result<(), GraphError> {
        for (index, w) in inputs.iter().enumerate() {
            if w.len() != self.d {
                return Err(GraphError::InputDimension {
                    index,
                    len: w.len(),
                    d: self.d,
                });
            }
            if w != &inputs[0] {
                return Err(GraphError::HeterogeneousInputs(index));
            }
        }
        if let Some(e) = self.leader_edges.iter().find(|e| e.input >= inputs.len()) {
            return Err(GraphError::InputOutOfRange {
                index: e.input,
                m: inputs.len(),
            });
        }
        self.inputs = inputs;
        Ok(())
    }

    /// Connect input `input` to `node`. Zero-class weights are dropped.
    pub fn add_leader_edge(&mut self, node: usize, input: usize, weight: WeightMatrix) -> Result<bool, GraphError> {
        self.check_node(node)?;
        if input >= self.inputs.len() {
            return Err(GraphError::InputOutOfRange {
                index: input,
                m: self.inputs.len(),
            });
        }
        self.check_dim(&weight)?;
        if self.leader_edges.iter().any(|e| e.node == node && e.input == input) {
            return Err(GraphError::DuplicateLeaderEdge(node, input));
        }
        if weight.definiteness == Definiteness::Zero {
            return Ok(false);
        }
        self.leader_edges.push(LeaderEdge { node, input, weight });
        Ok(true)
    }

    pub fn add_leader_edge_matrix(&mut self, node: usize, input: usize, entries: DMatrix<f64>) -> Result<bool, GraphError> {
        let w = WeightMatrix::new(entries, self.tol)?;
        self.add_leader_edge(node, input, w)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<&WeightMatrix> {
        self.index
            .get(&(i.min(j), i.max(j)))
            .map(|&k| &self.edges[k].weight)
    }

    /// Neighbours of `i` with the corresponding edge weights.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, &WeightMatrix)> + '_ {
        self.adjacency[i]
            .iter()
            .map(move |&(j, k)| (j, &self.edges[k].weight))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn leader_edges(&self) -> &[LeaderEdge] {
        &self.leader_edges
    }

    /// Leader edges attached to `node`.
    pub fn leader_edges_of(&self, node: usize) -> impl Iterator<Item = &LeaderEdge> + '_ {
        self.leader_edges.iter().filter(move |e| e.node == node)
    }

    pub fn inputs(&self) -> &[DVector<f64>] {
        &self.inputs
    }

    pub fn has_leaders(&self) -> bool {
        !self.leader_edges.is_empty()
    }

    /// The shared input value `w0`, if inputs are declared.
    pub fn common_input(&self) -> Option<&DVector<f64>> {
        self.inputs.first()
    }

    /// Block-diagonal degree matrix with blocks `sum_j |A_ij|`.
    pub fn degree_matrix(&self) -> DMatrix<f64> {
        let d = self.d;
        let mut out = DMatrix::zeros(self.n * d, self.n * d);
        for e in &self.edges {
            let a = e.weight.abs_weight();
            for node in [e.i, e.j] {
                let mut blk = out.view_mut((node * d, node * d), (d, d));
                blk += &a;
            }
        }
        out
    }

    /// Signed block adjacency matrix `A = [A_ij]`.
    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let d = self.d;
        let mut out = DMatrix::zeros(self.n * d, self.n * d);
        for e in &self.edges {
            out.view_mut((e.i * d, e.j * d), (d, d)).copy_from(e.weight.entries());
            out.view_mut((e.j * d, e.i * d), (d, d)).copy_from(e.weight.entries());
        }
        out
    }

    /// Matrix-valued Laplacian `L = D - A`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        self.degree_matrix() - self.adjacency_matrix()
    }

    /// Block diagonal of `sum_l |B_il|`.
    pub fn input_degree_matrix(&self) -> DMatrix<f64> {
        let d = self.d;
        let mut out = DMatrix::zeros(self.n * d, self.n * d);
        for e in &self.leader_edges {
            let mut blk = out.view_mut((e.node * d, e.node * d), (d, d));
            blk += e.weight.abs_weight();
        }
        out
    }

    /// `L_B = L + blkdiag(sum_l |B_il|)`.
    pub fn leader_laplacian(&self) -> DMatrix<f64> {
        self.laplacian() + self.input_degree_matrix()
    }

    /// Stacked input injection `B w`, block `i` equal to `sum_l B_il w_l`.
    pub fn input_injection(&self) -> DVector<f64> {
        let d = self.d;
        let mut out = DVector::zeros(self.n * d);
        for e in &self.leader_edges {
            let mut blk = out.rows_mut(e.node * d, d);
            blk += e.weight.entries() * &self.inputs[e.input];
        }
        out
    }
}

/// Per-node signs `sigma_i` realising a structural-balance bipartition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gauge {
    signs: Vec<i8>,
}

impl Gauge {
    /// Build a gauge from explicit signs. Any non-negative entry counts as `+1`.
    pub fn from_signs(signs: impl IntoIterator<Item = i8>) -> Self {
        Self {
            signs: signs
                .into_iter()
                .map(|s| if s < 0 { -1 } else { 1 })
                .collect(),
        }
    }

    pub fn trivial(n: usize) -> Self {
        Self { signs: vec![1; n] }
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn sign(&self, i: usize) -> f64 {
        f64::from(self.signs[i])
    }

    pub fn flipped(&self) -> Self {
        Self {
            signs: self.signs.iter().map(|s| -s).collect(),
        }
    }

    /// `(V1, V2)`: nodes with sign `+1` and `-1`.
    pub fn partition(&self) -> (Vec<usize>, Vec<usize>) {
        let mut plus = Vec::new();
        let mut minus = Vec::new();
        for (i, &s) in self.signs.iter().enumerate() {
            if s > 0 {
                plus.push(i);
            } else {
                minus.push(i);
            }
        }
        (plus, minus)
    }

    /// `D* = blkdiag(sigma_i I_d)`.
    pub fn matrix(&self, d: usize) -> DMatrix<f64> {
        let diag = DVector::from_iterator(
            self.signs.len() * d,
            self.signs.iter().flat_map(|&s| std::iter::repeat_n(f64::from(s), d)),
        );
        DMatrix::from_diagonal(&diag)
    }

    /// `D* x` for a stacked vector with blocks of size `d`.
    pub fn apply(&self, x: &DVector<f64>, d: usize) -> DVector<f64> {
        let mut out = x.clone();
        for (i, &s) in self.signs.iter().enumerate() {
            if s < 0 {
                out.rows_mut(i * d, d).neg_mut();
            }
        }
        out
    }

    /// `D* (1_n ⊗ v)`.
    pub fn consensus_vector(&self, v: &DVector<f64>) -> DVector<f64> {
        let d = v.len();
        let mut out = DVector::zeros(self.signs.len() * d);
        for (i, &s) in self.signs.iter().enumerate() {
            out.rows_mut(i * d, d).copy_from(&(v * f64::from(s)));
        }
        out
    }

    /// Whether `sigma_i sigma_j = sgn(A_ij)` holds on every edge.
    pub fn certifies(&self, g: &MatrixWeightedNetwork) -> bool {
        self.signs.len() == g.n()
            && g.edges()
                .iter()
                .all(|e| self.sign(e.i) * self.sign(e.j) == e.weight.sign())
    }
}

/// Two-colour a signed graph given as `(u, v, sign)` triples over `n` nodes,
/// visiting components from `roots` first and then by lowest index.
fn two_colour(n: usize, edges: &[(usize, usize, f64)], roots: &[usize]) -> Result<Vec<i8>, GraphError> {
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(u, v, s) in edges {
        adj[u].push((v, s));
        adj[v].push((u, s));
    }
    let mut signs = vec![0_i8; n];
    let mut queue = VecDeque::new();
    for root in roots.iter().copied().chain(0..n) {
        if signs[root] != 0 {
            continue;
        }
        signs[root] = 1;
        queue.push_back(root);
        while let Some(u) = queue.pop_front() {
            for &(v, s) in &adj[u] {
                let want = if s > 0.0 { signs[u] } else { -signs[u] };
                if signs[v] == 0 {
                    signs[v] = want;
                    queue.push_back(v);
                } else if signs[v] != want {
                    return Err(GraphError::StructurallyImbalanced {
                        i: u.min(v),
                        j: u.max(v),
                    });
                }
            }
        }
    }
    Ok(signs)
}

/// Structural-balance gauge. Each connected component is rooted at its
/// lowest-index node with sign `+1`.
pub fn find_gauge(g: &MatrixWeightedNetwork) -> Result<Gauge, GraphError> {
    let edges: Vec<_> = g.edges().iter().map(|e| (e.i, e.j, e.weight.sign())).collect();
    two_colour(g.n(), &edges, &[]).map(|signs| Gauge { signs })
}

/// Gauge of the augmented graph in which the (homogeneous) inputs form one
/// extra node fixed at `+1`, so that leaders satisfy `sigma_i = sgn(B_il)`.
pub fn leader_gauge(g: &MatrixWeightedNetwork) -> Result<Gauge, GraphError> {
    let n = g.n();
    let mut edges: Vec<_> = g.edges().iter().map(|e| (e.i, e.j, e.weight.sign())).collect();
    edges.extend(g.leader_edges().iter().map(|e| (e.node, n, e.weight.sign())));
    let mut signs = two_colour(n + 1, &edges, &[n])?;
    signs.truncate(n);
    Ok(Gauge { signs })
}

/// Null-space test: `D* L D*` is PSD and its null space is exactly
/// `range(1_n ⊗ I_d)`.
///
/// Eigenvalues with magnitude at most `tol * max(1, λ_max)` count as zero.
/// The span comparison uses the residual of projecting the orthonormal
/// consensus basis onto the computed null space, which is the sine of the
/// largest principal angle (bounded via the Frobenius norm).
pub fn check_assumption1(g: &MatrixWeightedNetwork, gauge: &Gauge, tol: f64) -> bool {
    let (n, d) = (g.n(), g.d());
    if n == 0 || d == 0 || gauge.len() != n {
        return false;
    }
    let dstar = gauge.matrix(d);
    let m = &dstar * g.laplacian() * &dstar;
    let eig = SymmetricEigen::new(m);
    let scale = eig.eigenvalues.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    let thr = tol * scale;
    if eig.eigenvalues.iter().any(|&v| v < -thr) {
        return false;
    }
    let null_cols: Vec<usize> = (0..n * d).filter(|&k| eig.eigenvalues[k].abs() <= thr).collect();
    if null_cols.len() != d {
        return false;
    }
    let basis = eig.eigenvectors.select_columns(&null_cols);
    let mut consensus = DMatrix::zeros(n * d, d);
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    for i in 0..n {
        for k in 0..d {
            consensus[(i * d + k, k)] = inv_sqrt_n;
        }
    }
    let residual = &consensus - &basis * (basis.transpose() * &consensus);
    residual.norm() <= tol.max(f64::EPSILON * 1e3)
}

/// Leader assumption: the input-augmented graph is structurally balanced and
/// `sum_i sum_l |B_il|` is positive definite.
pub fn check_assumption2(g: &MatrixWeightedNetwork) -> bool {
    if !g.has_leaders() || g.inputs().is_empty() {
        return false;
    }
    if leader_gauge(g).is_err() {
        return false;
    }
    let d = g.d();
    let total = g
        .leader_edges()
        .iter()
        .fold(DMatrix::zeros(d, d), |acc, e| acc + e.weight.abs_weight());
    matches!(classify_definiteness(&total, g.tol()), Ok(Definiteness::PosDef))
}
