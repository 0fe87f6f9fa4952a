//! Five-node reference network used across unit tests.

use nalgebra::{DMatrix, DVector};

use crate::matgraph::MatrixWeightedNetwork;

/// Classification tolerance that absorbs two-decimal rounding of the
/// reference weights.
pub const ROUNDING_TOL: f64 = 1e-3;

fn m3(v: [f64; 9]) -> DMatrix<f64> {
    DMatrix::from_row_slice(3, 3, &v)
}

pub fn a12() -> DMatrix<f64> {
    m3([10.14, 1.64, -2.16, 1.64, 10.06, -1.58, -2.16, -1.58, 12.45])
}

pub fn a23() -> DMatrix<f64> {
    m3([-9.75, 1.87, 4.69, 1.87, -7.17, 0.72, 4.69, 0.72, -9.51])
}

pub fn a15() -> DMatrix<f64> {
    m3([12.42, -1.51, -1.07, -1.51, 11.52, -1.1, -1.07, -1.1, 14.4])
}

pub fn a25() -> DMatrix<f64> {
    m3([3.03, -2.21, 3.92, -2.21, 4.58, -1.63, 3.92, -1.63, 5.6])
}

pub fn a34() -> DMatrix<f64> {
    m3([7.36, 4.67, 5.13, 4.67, 10.89, -2.31, 5.13, -2.31, 9.92])
}

pub fn a45() -> DMatrix<f64> {
    m3([-4.88, -3.07, 0.46, -3.07, -2.82, -2.03, 0.46, -2.03, -6.13])
}

pub fn g1_matrices() -> Vec<DMatrix<f64>> {
    vec![a12(), a23(), a15(), a25(), a34(), a45()]
}

pub fn g1() -> MatrixWeightedNetwork {
    let mut g = MatrixWeightedNetwork::with_tol(5, 3, ROUNDING_TOL);
    for (i, j, m) in [
        (0, 1, a12()),
        (1, 2, a23()),
        (0, 4, a15()),
        (1, 4, a25()),
        (2, 3, a34()),
        (3, 4, a45()),
    ] {
        g.add_edge_matrix(i, j, m).unwrap();
    }
    g
}

pub fn w0() -> DVector<f64> {
    DVector::from_vec(vec![0.2, 0.4, 0.6])
}

pub fn g1_leader_follower() -> MatrixWeightedNetwork {
    let mut g = g1();
    g.set_inputs(vec![w0(), w0()]).unwrap();
    g.add_leader_edge_matrix(0, 0, a25()).unwrap();
    g.add_leader_edge_matrix(4, 1, a12()).unwrap();
    g
}
