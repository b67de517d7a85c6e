//! Gate vocabulary and their unitary matrices.

use super::MeasureBasis;
use nalgebra::DMatrix;
use num_complex::Complex64;

/// Supported gate kinds. Rotation gates carry their angle in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    X,
    Y,
    Z,
    H,
    S,
    Rx,
    Ry,
    Rz,
    Cnot,
    Swap,
    Cz,
}

impl Gate {
    pub fn arity(self) -> usize {
        match self {
            Gate::Cnot | Gate::Swap | Gate::Cz => 2,
            _ => 1,
        }
    }
}

/// A gate bound to target qubits. For `Cnot` the first target is the control.
#[derive(Debug, Clone, PartialEq)]
pub struct GateSpec {
    pub gate: Gate,
    pub targets: Vec<usize>,
    pub theta: f64,
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

impl GateSpec {
    pub fn new(gate: Gate, targets: &[usize]) -> Self {
        debug_assert_eq!(gate.arity(), targets.len());
        debug_assert!(!matches!(gate, Gate::Rx | Gate::Ry | Gate::Rz));
        Self {
            gate,
            targets: targets.to_vec(),
            theta: 0.0,
        }
    }

    pub fn rotation(gate: Gate, theta: f64, target: usize) -> Self {
        debug_assert!(matches!(gate, Gate::Rx | Gate::Ry | Gate::Rz));
        Self {
            gate,
            targets: vec![target],
            theta,
        }
    }

    /// Dense unitary of the gate in its local 2^k-dimensional space.
    /// Local bit order matches the target order (first target = high bit).
    pub fn matrix(&self) -> DMatrix<Complex64> {
        let t = self.theta;
        let (cos, sin) = ((t / 2.0).cos(), (t / 2.0).sin());
        match self.gate {
            Gate::X => DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
            Gate::Y => {
                DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
            }
            Gate::Z => {
                DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
            }
            Gate::H => {
                let s = std::f64::consts::FRAC_1_SQRT_2;
                DMatrix::from_row_slice(2, 2, &[c(s, 0.), c(s, 0.), c(s, 0.), c(-s, 0.)])
            }
            Gate::S => DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(0., 1.)]),
            Gate::Rx => DMatrix::from_row_slice(
                2,
                2,
                &[c(cos, 0.), c(0., -sin), c(0., -sin), c(cos, 0.)],
            ),
            Gate::Ry => DMatrix::from_row_slice(
                2,
                2,
                &[c(cos, 0.), c(-sin, 0.), c(sin, 0.), c(cos, 0.)],
            ),
            Gate::Rz => {
                let mut m = DMatrix::zeros(2, 2);
                m[(0, 0)] = Complex64::from_polar(1.0, -t / 2.0);
                m[(1, 1)] = Complex64::from_polar(1.0, t / 2.0);
                m
            }
            Gate::Cnot => {
                let mut m = DMatrix::zeros(4, 4);
                m[(0, 0)] = c(1., 0.);
                m[(1, 1)] = c(1., 0.);
                m[(2, 3)] = c(1., 0.);
                m[(3, 2)] = c(1., 0.);
                m
            }
            Gate::Swap => {
                let mut m = DMatrix::zeros(4, 4);
                m[(0, 0)] = c(1., 0.);
                m[(1, 2)] = c(1., 0.);
                m[(2, 1)] = c(1., 0.);
                m[(3, 3)] = c(1., 0.);
                m
            }
            Gate::Cz => {
                let mut m = DMatrix::identity(4, 4);
                m[(3, 3)] = c(-1., 0.);
                m
            }
        }
    }
}

/// Rank-1 projector onto the `outcome` eigenstate of the basis.
pub(super) fn basis_projector(basis: MeasureBasis, outcome: u8) -> DMatrix<Complex64> {
    let sign = if outcome == 0 { 1.0 } else { -1.0 };
    match basis {
        MeasureBasis::Z => {
            let mut m = DMatrix::zeros(2, 2);
            m[(outcome as usize, outcome as usize)] = c(1., 0.);
            m
        }
        // (I ± X)/2 and (I ± Y)/2
        MeasureBasis::X => DMatrix::from_row_slice(
            2,
            2,
            &[
                c(0.5, 0.),
                c(0.5 * sign, 0.),
                c(0.5 * sign, 0.),
                c(0.5, 0.),
            ],
        ),
        MeasureBasis::Y => DMatrix::from_row_slice(
            2,
            2,
            &[
                c(0.5, 0.),
                c(0., -0.5 * sign),
                c(0., 0.5 * sign),
                c(0.5, 0.),
            ],
        ),
    }
}
