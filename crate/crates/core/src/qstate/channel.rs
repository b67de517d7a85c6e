//! Single-qubit Kraus channels.
//!
//! Probability conventions (documented once, relied on everywhere):
//! - `Depolarizing(p)`: the state is replaced by I/2 with probability p.
//! - `Dephasing(p)`: a Z flip is applied with probability p, so off-diagonal
//!   elements scale by (1 − 2p); p = 1/2 is complete dephasing.
//! - `BitFlip(p)`: an X flip is applied with probability p.
//! - `AmplitudeDamping(p)`: |1⟩ relaxes to |0⟩ with probability p.

use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelKind {
    Depolarizing,
    Dephasing,
    AmplitudeDamping,
    BitFlip,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseChannel {
    pub kind: ChannelKind,
    pub probability: f64,
    pub target: usize,
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

impl NoiseChannel {
    pub fn new(kind: ChannelKind, probability: f64, target: usize) -> Self {
        Self {
            kind,
            probability,
            target,
        }
    }

    pub fn kraus_operators(&self) -> Vec<DMatrix<Complex64>> {
        let p = self.probability;
        let eye = DMatrix::from_row_slice(2, 2, &[c(1.), c(0.), c(0.), c(1.)]);
        let x = DMatrix::from_row_slice(2, 2, &[c(0.), c(1.), c(1.), c(0.)]);
        let y = DMatrix::from_row_slice(
            2,
            2,
            &[
                Complex64::new(0., 0.),
                Complex64::new(0., -1.),
                Complex64::new(0., 1.),
                Complex64::new(0., 0.),
            ],
        );
        let z = DMatrix::from_row_slice(2, 2, &[c(1.), c(0.), c(0.), c(-1.)]);
        match self.kind {
            ChannelKind::Depolarizing => vec![
                eye * c((1.0 - 3.0 * p / 4.0).sqrt()),
                x * c((p / 4.0).sqrt()),
                y * c((p / 4.0).sqrt()),
                z * c((p / 4.0).sqrt()),
            ],
            ChannelKind::Dephasing => vec![eye * c((1.0 - p).sqrt()), z * c(p.sqrt())],
            ChannelKind::BitFlip => vec![eye * c((1.0 - p).sqrt()), x * c(p.sqrt())],
            ChannelKind::AmplitudeDamping => {
                let k0 =
                    DMatrix::from_row_slice(2, 2, &[c(1.), c(0.), c(0.), c((1.0 - p).sqrt())]);
                let k1 = DMatrix::from_row_slice(2, 2, &[c(0.), c(p.sqrt()), c(0.), c(0.)]);
                vec![k0, k1]
            }
        }
    }
}
