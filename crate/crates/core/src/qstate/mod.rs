//! Dense density-matrix engine for small qubit registers.
//!
//! Every protocol circuit in this crate is validated against this module, so
//! it favours being obviously correct over being fast. States are capped at
//! [`MAX_QUBITS`] qubits; density matrices (rather than state vectors) are
//! used because heralded pairs and noise channels produce mixed states.
//!
//! Qubit ordering convention: qubit 0 is the *most significant* bit of the
//! computational basis label, so `new_basis_state(2, "10")` puts qubit 0 in
//! |1⟩ and qubit 1 in |0⟩.

mod channel;
mod gates;

pub use channel::{ChannelKind, NoiseChannel};
pub use gates::{Gate, GateSpec};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use thiserror::Error;

/// Largest register the dense representation supports.
pub const MAX_QUBITS: usize = 10;

/// Tolerance for exact-algebra invariants (Hermiticity, trace, Kraus sums).
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Tolerance for quantities that pass through eigen/sqrt routines.
pub const EIGEN_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum QstateError {
    #[error("qubit count {0} outside supported range 1..={MAX_QUBITS}")]
    Capacity(usize),
    #[error("bitstring length {got} does not match qubit count {want}")]
    BitstringLength { got: usize, want: usize },
    #[error("bitstring may only contain '0' and '1'")]
    BitstringSymbol,
    #[error("target qubit {qubit} out of range for {num_qubits}-qubit state")]
    InvalidTarget { qubit: usize, num_qubits: usize },
    #[error("gate targets must be distinct")]
    DuplicateTargets,
    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),
    #[error("dimension mismatch: {0}-qubit state vs {1}-qubit state")]
    DimensionMismatch(usize, usize),
    #[error("partial trace requires a nonempty subset of qubits to keep")]
    EmptyKeep,
    #[error("partial trace keep set contains duplicates or invalid qubits")]
    BadKeepSet,
}

/// Measurement basis for single-qubit readout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureBasis {
    Z,
    X,
    Y,
}

/// A dense positive operator over 1..=10 qubits with unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    num_qubits: usize,
    data: DMatrix<Complex64>,
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

impl DensityMatrix {
    /// Pure computational-basis state |bits⟩⟨bits|.
    pub fn new_basis_state(num_qubits: usize, bits: &str) -> Result<Self, QstateError> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(QstateError::Capacity(num_qubits));
        }
        if bits.len() != num_qubits {
            return Err(QstateError::BitstringLength {
                got: bits.len(),
                want: num_qubits,
            });
        }
        let mut index = 0usize;
        for ch in bits.chars() {
            index <<= 1;
            match ch {
                '0' => {}
                '1' => index |= 1,
                _ => return Err(QstateError::BitstringSymbol),
            }
        }
        let dim = 1 << num_qubits;
        let mut data = DMatrix::zeros(dim, dim);
        data[(index, index)] = c(1.0);
        Ok(Self { num_qubits, data })
    }

    /// Builds a state from a raw matrix; validates shape only.
    /// Physical invariants are the caller's responsibility (see `validate`).
    pub fn from_matrix(num_qubits: usize, data: DMatrix<Complex64>) -> Result<Self, QstateError> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(QstateError::Capacity(num_qubits));
        }
        let dim = 1 << num_qubits;
        if data.nrows() != dim || data.ncols() != dim {
            return Err(QstateError::DimensionMismatch(num_qubits, data.nrows()));
        }
        Ok(Self { num_qubits, data })
    }

    /// Pure state |psi⟩⟨psi| from an amplitude vector of length 2^n.
    pub fn from_pure(num_qubits: usize, amplitudes: &[Complex64]) -> Result<Self, QstateError> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(QstateError::Capacity(num_qubits));
        }
        let dim = 1 << num_qubits;
        if amplitudes.len() != dim {
            return Err(QstateError::DimensionMismatch(num_qubits, amplitudes.len()));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        let mut data = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            for j in 0..dim {
                data[(i, j)] = amplitudes[i] * amplitudes[j].conj() / norm;
            }
        }
        Ok(Self { num_qubits, data })
    }

    /// Maximally mixed state I / 2^n.
    pub fn maximally_mixed(num_qubits: usize) -> Result<Self, QstateError> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(QstateError::Capacity(num_qubits));
        }
        let dim = 1 << num_qubits;
        let data = DMatrix::from_diagonal_element(dim, dim, c(1.0 / dim as f64));
        Ok(Self { num_qubits, data })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn trace(&self) -> Complex64 {
        self.data.diagonal().sum()
    }

    /// Tensor product self ⊗ other (self's qubits become the leading indices).
    pub fn tensor(&self, other: &Self) -> Result<Self, QstateError> {
        let n = self.num_qubits + other.num_qubits;
        if n > MAX_QUBITS {
            return Err(QstateError::Capacity(n));
        }
        Ok(Self {
            num_qubits: n,
            data: self.data.kronecker(&other.data),
        })
    }

    /// Checks Hermiticity, unit trace and positive semidefiniteness.
    pub fn validate(&self) -> Result<(), String> {
        let dim = self.dim();
        for i in 0..dim {
            for j in 0..dim {
                let d = self.data[(i, j)] - self.data[(j, i)].conj();
                if d.norm() > ALGEBRA_TOL {
                    return Err(format!("not Hermitian: residual {:.3e} at ({i},{j})", d.norm()));
                }
            }
        }
        let tr = self.trace();
        if (tr.re - 1.0).abs() > ALGEBRA_TOL || tr.im.abs() > ALGEBRA_TOL {
            return Err(format!("trace {tr} differs from 1"));
        }
        let eigs = self.data.clone().symmetric_eigenvalues();
        let min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < -EIGEN_TOL {
            return Err(format!("negative eigenvalue {min:.3e}"));
        }
        Ok(())
    }

    fn check_targets(&self, targets: &[usize]) -> Result<(), QstateError> {
        for (i, &q) in targets.iter().enumerate() {
            if q >= self.num_qubits {
                return Err(QstateError::InvalidTarget {
                    qubit: q,
                    num_qubits: self.num_qubits,
                });
            }
            if targets[..i].contains(&q) {
                return Err(QstateError::DuplicateTargets);
            }
        }
        Ok(())
    }

    /// Bit mask selecting qubit `q` inside a basis index (qubit 0 = MSB).
    fn mask(&self, q: usize) -> usize {
        1 << (self.num_qubits - 1 - q)
    }

    /// In-place ρ → M ρ M† for a k-qubit operator M (k = targets.len() ≤ 2).
    /// M need not be unitary; projectors and Kraus operators use this too.
    fn conjugate_in_place(&mut self, m: &DMatrix<Complex64>, targets: &[usize]) {
        let dim = self.dim();
        let k = targets.len();
        let sub = 1 << k;
        debug_assert_eq!(m.nrows(), sub);
        let masks: Vec<usize> = targets.iter().map(|&q| self.mask(q)).collect();
        let group_mask: usize = masks.iter().sum();
        // offset(p) = index displacement of local pattern p (bit 0 of p = last target)
        let offsets: Vec<usize> = (0..sub)
            .map(|p| {
                (0..k)
                    .filter(|&t| (p >> (k - 1 - t)) & 1 == 1)
                    .map(|t| masks[t])
                    .sum()
            })
            .collect();

        let mut amps = vec![Complex64::default(); sub];
        // Left multiply rows by M.
        for col in 0..dim {
            for base in 0..dim {
                if base & group_mask != 0 {
                    continue;
                }
                for p in 0..sub {
                    amps[p] = self.data[(base + offsets[p], col)];
                }
                for p in 0..sub {
                    let mut acc = Complex64::default();
                    for q in 0..sub {
                        acc += m[(p, q)] * amps[q];
                    }
                    self.data[(base + offsets[p], col)] = acc;
                }
            }
        }
        // Right multiply columns by M†.
        for row in 0..dim {
            for base in 0..dim {
                if base & group_mask != 0 {
                    continue;
                }
                for p in 0..sub {
                    amps[p] = self.data[(row, base + offsets[p])];
                }
                for p in 0..sub {
                    let mut acc = Complex64::default();
                    for q in 0..sub {
                        acc += amps[q] * m[(p, q)].conj();
                    }
                    self.data[(row, base + offsets[p])] = acc;
                }
            }
        }
    }

    /// ρ' = U ρ U† for the given gate.
    pub fn apply_gate(&self, gate: &GateSpec) -> Result<Self, QstateError> {
        self.check_targets(&gate.targets)?;
        let m = gate.matrix();
        let mut out = self.clone();
        out.conjugate_in_place(&m, &gate.targets);
        Ok(out)
    }

    /// ρ' = Σ_i K_i ρ K_i† for a single-qubit noise channel.
    pub fn apply_channel(&self, channel: &NoiseChannel) -> Result<Self, QstateError> {
        self.check_targets(&[channel.target])?;
        if !(0.0..=1.0).contains(&channel.probability) {
            return Err(QstateError::InvalidProbability(channel.probability));
        }
        let mut acc = DMatrix::zeros(self.dim(), self.dim());
        for k in channel.kraus_operators() {
            let mut term = self.clone();
            term.conjugate_in_place(&k, &[channel.target]);
            acc += term.data;
        }
        Ok(Self {
            num_qubits: self.num_qubits,
            data: acc,
        })
    }

    /// Projects qubit `q` onto the `outcome` eigenspace of `basis`.
    ///
    /// Returns the Born probability and, when it is nonzero, the renormalized
    /// post-measurement state. Deterministic: enumeration oracles use this
    /// directly; `measure_qubit` samples an outcome and then calls it.
    pub fn project_qubit(
        &self,
        q: usize,
        basis: MeasureBasis,
        outcome: u8,
    ) -> Result<(f64, Option<Self>), QstateError> {
        self.check_targets(&[q])?;
        let proj = gates::basis_projector(basis, outcome);
        let mut post = self.clone();
        post.conjugate_in_place(&proj, &[q]);
        let p = post.trace().re;
        if p < 1e-15 {
            return Ok((p.max(0.0), None));
        }
        post.data /= c(p);
        Ok((p, Some(post)))
    }

    /// Samples a single-qubit measurement with Born statistics.
    ///
    /// Returns (outcome bit, post-measurement state, probability of the
    /// sampled outcome).
    pub fn measure_qubit<R: Rng + ?Sized>(
        &self,
        q: usize,
        basis: MeasureBasis,
        rng: &mut R,
    ) -> Result<(u8, Self, f64), QstateError> {
        let (p0, post0) = self.project_qubit(q, basis, 0)?;
        let draw: f64 = rng.gen();
        if draw < p0 {
            let post = post0.expect("outcome with positive probability has a post-state");
            Ok((0, post, p0))
        } else {
            let (p1, post1) = self.project_qubit(q, basis, 1)?;
            let post = post1.expect("outcome with positive probability has a post-state");
            Ok((1, post, p1))
        }
    }

    /// Reduced state over `keep` (original relative order preserved).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self, QstateError> {
        if keep.is_empty() {
            return Err(QstateError::EmptyKeep);
        }
        let mut sorted = keep.to_vec();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != keep.len() || *sorted.last().unwrap() >= self.num_qubits {
            return Err(QstateError::BadKeepSet);
        }
        let traced: Vec<usize> = (0..self.num_qubits).filter(|q| !sorted.contains(q)).collect();
        let new_n = sorted.len();
        let new_dim = 1 << new_n;
        let keep_masks: Vec<usize> = sorted.iter().map(|&q| self.mask(q)).collect();
        let traced_masks: Vec<usize> = traced.iter().map(|&q| self.mask(q)).collect();

        let expand = |bits: usize, masks: &[usize]| -> usize {
            let w = masks.len();
            masks
                .iter()
                .enumerate()
                .filter(|(pos, _)| (bits >> (w - 1 - pos)) & 1 == 1)
                .map(|(_, m)| m)
                .sum()
        };

        let mut data = DMatrix::zeros(new_dim, new_dim);
        for i in 0..new_dim {
            let bi = expand(i, &keep_masks);
            for j in 0..new_dim {
                let bj = expand(j, &keep_masks);
                let mut acc = Complex64::default();
                for t in 0..(1 << traced.len()) {
                    let bt = expand(t, &traced_masks);
                    acc += self.data[(bi + bt, bj + bt)];
                }
                data[(i, j)] = acc;
            }
        }
        Ok(Self {
            num_qubits: new_n,
            data,
        })
    }

    /// Uhlmann fidelity F(ρ,σ) = (tr √(√ρ σ √ρ))², evaluated through the
    /// equivalent trace norm ‖√ρ √σ‖₁ so it is symmetric to round-off.
    pub fn fidelity(&self, other: &Self) -> Result<f64, QstateError> {
        if self.num_qubits != other.num_qubits {
            return Err(QstateError::DimensionMismatch(
                self.num_qubits,
                other.num_qubits,
            ));
        }
        let m = matrix_sqrt(&self.data) * matrix_sqrt(&other.data);
        let root_sum: f64 = m.svd(false, false).singular_values.iter().sum();
        Ok((root_sum * root_sum).clamp(0.0, 1.0))
    }

    /// ⟨psi|ρ|psi⟩ against a pure reference state, cheaper than `fidelity`.
    pub fn overlap_with_pure(&self, amplitudes: &[Complex64]) -> Result<f64, QstateError> {
        if amplitudes.len() != self.dim() {
            return Err(QstateError::DimensionMismatch(self.num_qubits, 0));
        }
        let mut acc = Complex64::default();
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                acc += amplitudes[i].conj() * self.data[(i, j)] * amplitudes[j];
            }
        }
        Ok(acc.re.clamp(0.0, 1.0))
    }

    /// Max-norm distance between two states of equal dimension.
    pub fn max_norm_diff(&self, other: &Self) -> f64 {
        let mut max = 0.0f64;
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                max = max.max((self.data[(i, j)] - other.data[(i, j)]).norm());
            }
        }
        max
    }
}

/// Hermitian PSD matrix square root via eigendecomposition. Eigenvalues
/// within round-off of zero are flushed to zero so they cannot inject
/// √ε-sized noise into downstream trace norms.
fn matrix_sqrt(m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let eig = m.clone().symmetric_eigen();
    let dim = m.nrows();
    let lmax = eig
        .eigenvalues
        .iter()
        .cloned()
        .fold(0.0f64, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut diag = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        let l = eig.eigenvalues[i];
        diag[(i, i)] = if l > lmax * 1e-13 { c(l.sqrt()) } else { c(0.0) };
    }
    &eig.eigenvectors * diag * eig.eigenvectors.adjoint()
}
