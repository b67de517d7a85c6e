//! Independent reference implementations used by the test suites.
//!
//! Everything here recomputes a quantity that the library also provides in
//! closed form, but through a different route: explicit density-matrix
//! circuits, Monte Carlo sampling of the underlying physical model, or brute
//! enumeration. None of these functions call the closed-form paths they are
//! used to check.

use crate::entanglement::{BellCoeffs, PAULI_I, PAULI_X, PAULI_Y, PAULI_Z};
use crate::photonics::EmitterParams;
use crate::qstate::{DensityMatrix, Gate, GateSpec, MeasureBasis};
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::{FRAC_1_SQRT_2, TAU};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Amplitudes of the four Bell states, ordered by the error Pauli on the
/// second qubit relative to Φ+: I → Φ+, X → Ψ+, Y → Ψ−, Z → Φ−.
pub fn bell_state_amplitudes(error: usize) -> [Complex64; 4] {
    let s = FRAC_1_SQRT_2;
    match error {
        PAULI_I => [c(s, 0.), c(0., 0.), c(0., 0.), c(s, 0.)],
        PAULI_X => [c(0., 0.), c(s, 0.), c(s, 0.), c(0., 0.)],
        PAULI_Y => [c(0., 0.), c(s, 0.), c(-s, 0.), c(0., 0.)],
        PAULI_Z => [c(s, 0.), c(0., 0.), c(0., 0.), c(-s, 0.)],
        _ => unreachable!(),
    }
}

/// Two-qubit Bell-diagonal density matrix with the given coefficients.
pub fn bell_diagonal_state(coeffs: &BellCoeffs) -> DensityMatrix {
    let mut data = DMatrix::zeros(4, 4);
    for e in 0..4 {
        let amps = bell_state_amplitudes(e);
        for i in 0..4 {
            for j in 0..4 {
                data[(i, j)] += c(coeffs.0[e], 0.0) * amps[i] * amps[j].conj();
            }
        }
    }
    DensityMatrix::from_matrix(2, data).unwrap()
}

/// Projects a two-qubit state onto the Bell basis.
///
/// Returns the four diagonal weights in error-Pauli order plus the largest
/// off-Bell-diagonal magnitude, which is zero exactly when the state is
/// Bell-diagonal.
pub fn bell_projection(rho: &DensityMatrix) -> ([f64; 4], f64) {
    assert_eq!(rho.num_qubits(), 2);
    let m = rho.matrix();
    let mut weights = [0.0; 4];
    let mut off_diag = 0.0f64;
    for (a, weight) in weights.iter_mut().enumerate() {
        let va = bell_state_amplitudes(a);
        for b in 0..4 {
            let vb = bell_state_amplitudes(b);
            let mut elem = Complex64::default();
            for i in 0..4 {
                for j in 0..4 {
                    elem += va[i].conj() * m[(i, j)] * vb[j];
                }
            }
            if a == b {
                *weight = elem.re;
            } else {
                off_diag = off_diag.max(elem.norm());
            }
        }
    }
    (weights, off_diag)
}

fn pauli_matrix(p: usize) -> DMatrix<Complex64> {
    match p {
        PAULI_I => DMatrix::identity(2, 2),
        PAULI_X => DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)]),
        PAULI_Y => DMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)]),
        PAULI_Z => DMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)]),
        _ => unreachable!(),
    }
}

/// Runs the physical one-pair CNOT teleportation circuit on a two-qubit data
/// state: local CNOTs onto the pair halves, Z- and X-basis electron
/// measurements with both outcomes enumerated, and conditioned corrections.
///
/// Qubit layout during the run: 0 = control data, 1 = target data,
/// 2 = pair half at the control node, 3 = pair half at the target node.
pub fn teleported_cnot_channel_on(data: &DensityMatrix, pair: &BellCoeffs) -> DensityMatrix {
    assert_eq!(data.num_qubits(), 2);
    let full = data.tensor(&bell_diagonal_state(pair)).unwrap();
    let full = full.apply_gate(&GateSpec::new(Gate::Cnot, &[0, 2])).unwrap();

    let dim = 1 << 2;
    let mut acc = DMatrix::zeros(dim, dim);
    for x in 0..2u8 {
        let (px, after_x) = full.project_qubit(2, MeasureBasis::Z, x).unwrap();
        let Some(mut branch) = after_x else { continue };
        if x == 1 {
            branch = branch.apply_gate(&GateSpec::new(Gate::X, &[3])).unwrap();
        }
        branch = branch.apply_gate(&GateSpec::new(Gate::Cnot, &[3, 1])).unwrap();
        for z in 0..2u8 {
            let (pz, after_z) = branch.project_qubit(3, MeasureBasis::X, z).unwrap();
            let Some(mut leaf) = after_z else { continue };
            if z == 1 {
                leaf = leaf.apply_gate(&GateSpec::new(Gate::Z, &[0])).unwrap();
            }
            let reduced = leaf.partial_trace(&[0, 1]).unwrap();
            acc += reduced.matrix() * c(px * pz, 0.0);
        }
    }
    DensityMatrix::from_matrix(2, acc).unwrap()
}

/// Process fidelity of the teleported CNOT against the ideal CNOT, computed
/// by exhaustive Pauli-transfer evaluation of the circuit channel over all
/// sixteen two-qubit Pauli inputs (each expanded into product eigenstates).
pub fn teleported_cnot_process_fidelity(pair: &BellCoeffs) -> f64 {
    // Eigen-decompositions of the single-qubit Paulis: (amplitudes, eigenvalue).
    let s = FRAC_1_SQRT_2;
    let eigensystem: [[([Complex64; 2], f64); 2]; 4] = [
        [([c(1., 0.), c(0., 0.)], 1.0), ([c(0., 0.), c(1., 0.)], 1.0)],
        [([c(s, 0.), c(s, 0.)], 1.0), ([c(s, 0.), c(-s, 0.)], -1.0)],
        [([c(s, 0.), c(0., s)], 1.0), ([c(s, 0.), c(0., -s)], -1.0)],
        [([c(1., 0.), c(0., 0.)], 1.0), ([c(0., 0.), c(1., 0.)], -1.0)],
    ];
    let cnot = GateSpec::new(Gate::Cnot, &[0, 1]).matrix();

    let mut total = 0.0;
    for pa in 0..4 {
        for pb in 0..4 {
            // Λ(P_a ⊗ P_b) assembled by linearity from product eigenstates.
            let mut lambda_out = DMatrix::<Complex64>::zeros(4, 4);
            for (va, la) in &eigensystem[pa] {
                for (vb, lb) in &eigensystem[pb] {
                    let amps = [
                        va[0] * vb[0],
                        va[0] * vb[1],
                        va[1] * vb[0],
                        va[1] * vb[1],
                    ];
                    let input = DensityMatrix::from_pure(2, &amps).unwrap();
                    let output = teleported_cnot_channel_on(&input, pair);
                    lambda_out += output.matrix() * c(la * lb, 0.0);
                }
            }
            let pk = pauli_matrix(pa).kronecker(&pauli_matrix(pb));
            let ideal = &cnot * pk * cnot.adjoint();
            let mut tr = Complex64::default();
            for i in 0..4 {
                for j in 0..4 {
                    tr += ideal[(i, j)] * lambda_out[(j, i)];
                }
            }
            total += tr.re / 4.0;
        }
    }
    total / 16.0
}

/// Average gate fidelity from the circuit-level process fidelity.
pub fn teleported_cnot_avg_fidelity(pair: &BellCoeffs) -> f64 {
    (4.0 * teleported_cnot_process_fidelity(pair) + 1.0) / 5.0
}

/// Entanglement swapping as an explicit Bell-state-measurement circuit on
/// four qubits, enumerating all outcomes and applying frame corrections.
///
/// Layout: 0 = A, 1 = B half of the A–B pair, 2 = B half of the B–C pair,
/// 3 = C. Returns the Bell-projection of the corrected A–C state.
pub fn swap_circuit_coeffs(ab: &BellCoeffs, bc: &BellCoeffs) -> BellCoeffs {
    let state = bell_diagonal_state(ab)
        .tensor(&bell_diagonal_state(bc))
        .unwrap();
    let state = state.apply_gate(&GateSpec::new(Gate::Cnot, &[1, 2])).unwrap();
    let state = state.apply_gate(&GateSpec::new(Gate::H, &[1])).unwrap();

    let mut out = [0.0f64; 4];
    for m1 in 0..2u8 {
        let (p1, b1) = state.project_qubit(1, MeasureBasis::Z, m1).unwrap();
        let Some(b1) = b1 else { continue };
        for m2 in 0..2u8 {
            let (p2, b2) = b1.project_qubit(2, MeasureBasis::Z, m2).unwrap();
            let Some(mut leaf) = b2 else { continue };
            if m2 == 1 {
                leaf = leaf.apply_gate(&GateSpec::new(Gate::X, &[3])).unwrap();
            }
            if m1 == 1 {
                leaf = leaf.apply_gate(&GateSpec::new(Gate::Z, &[3])).unwrap();
            }
            let reduced = leaf.partial_trace(&[0, 3]).unwrap();
            let (weights, off) = bell_projection(&reduced);
            assert!(off < 1e-10, "swap output not Bell-diagonal: {off}");
            for e in 0..4 {
                out[e] += p1 * p2 * weights[e];
            }
        }
    }
    BellCoeffs::new(out)
}

/// BBPSSW as an explicit circuit: bilateral CNOT, Z measurement of the
/// sacrificed pair on both sides, postselected on parity agreement.
///
/// Layout: 0 = A half kept, 1 = B half kept, 2 = A half sacrificed,
/// 3 = B half sacrificed. Returns (output coefficients, success probability).
pub fn bbpssw_circuit_coeffs(keep: &BellCoeffs, sacrifice: &BellCoeffs) -> (BellCoeffs, f64) {
    let state = bell_diagonal_state(keep)
        .tensor(&bell_diagonal_state(sacrifice))
        .unwrap();
    let state = state.apply_gate(&GateSpec::new(Gate::Cnot, &[0, 2])).unwrap();
    let state = state.apply_gate(&GateSpec::new(Gate::Cnot, &[1, 3])).unwrap();

    let mut success = 0.0;
    let mut acc = [0.0f64; 4];
    for outcome in 0..2u8 {
        let (pa, ba) = state.project_qubit(2, MeasureBasis::Z, outcome).unwrap();
        let Some(ba) = ba else { continue };
        let (pb, bb) = ba.project_qubit(3, MeasureBasis::Z, outcome).unwrap();
        let Some(leaf) = bb else { continue };
        let weight = pa * pb;
        success += weight;
        let reduced = leaf.partial_trace(&[0, 1]).unwrap();
        let (weights, off) = bell_projection(&reduced);
        assert!(off < 1e-10, "distilled output not Bell-diagonal: {off}");
        for e in 0..4 {
            acc[e] += weight * weights[e];
        }
    }
    if success <= 0.0 {
        return (BellCoeffs::new([0.25; 4]), 0.0);
    }
    for a in acc.iter_mut() {
        *a /= success;
    }
    (BellCoeffs::new(acc), success)
}

/// ρ → f ρ + (1 − f) I/D on the whole register. Commutes with every gate, so
/// a circuit of N noisy gates leaves exactly f^N of the ideal state.
pub fn global_depolarize(rho: &DensityMatrix, f: f64) -> DensityMatrix {
    let dim = rho.dim();
    let mut data = rho.matrix() * c(f, 0.0);
    for i in 0..dim {
        data[(i, i)] += c((1.0 - f) / dim as f64, 0.0);
    }
    DensityMatrix::from_matrix(rho.num_qubits(), data).unwrap()
}

fn trace_product(a: &DensityMatrix, b: &DensityMatrix) -> f64 {
    let (ma, mb) = (a.matrix(), b.matrix());
    let mut tr = Complex64::default();
    for i in 0..a.dim() {
        for j in 0..a.dim() {
            tr += ma[(i, j)] * mb[(j, i)];
        }
    }
    tr.re
}

/// Simulates the full swap-there-and-back network for a CNOT between the two
/// ends of a line of `distance + 1` qubits, with a global depolarizing factor
/// `gate_fidelity` after every physical CNOT.
///
/// Returns the product of per-gate factors recovered from the output state,
/// i.e. gate_fidelity^(number of CNOTs actually executed) — an independent
/// count of the gates the routing really needs.
pub fn noisy_swap_chain_fidelity(distance: usize, gate_fidelity: f64) -> f64 {
    assert!(distance >= 1);
    let n = distance + 1;
    // A generic product input so every qubit matters.
    let mut ideal = DensityMatrix::new_basis_state(n, &"0".repeat(n)).unwrap();
    for q in 0..n {
        ideal = ideal
            .apply_gate(&GateSpec::rotation(Gate::Ry, 0.4 + 0.3 * q as f64, q))
            .unwrap();
    }
    let mut noisy = ideal.clone();

    let cnot = |ideal: &mut DensityMatrix, noisy: &mut DensityMatrix, a: usize, b: usize| {
        let g = GateSpec::new(Gate::Cnot, &[a, b]);
        *ideal = ideal.apply_gate(&g).unwrap();
        *noisy = global_depolarize(&noisy.apply_gate(&g).unwrap(), gate_fidelity);
    };
    let swap = |ideal: &mut DensityMatrix, noisy: &mut DensityMatrix, a: usize, b: usize| {
        cnot(ideal, noisy, a, b);
        cnot(ideal, noisy, b, a);
        cnot(ideal, noisy, a, b);
    };

    for q in 0..distance.saturating_sub(1) {
        swap(&mut ideal, &mut noisy, q, q + 1);
    }
    cnot(&mut ideal, &mut noisy, distance - 1, distance);
    for q in (0..distance.saturating_sub(1)).rev() {
        swap(&mut ideal, &mut noisy, q, q + 1);
    }

    // Output of the ideal circuit is pure, so tr(ρ_noisy ρ_ideal) is the
    // state fidelity; invert the global-depolarizing mixing to recover f^N.
    let dim = ideal.dim() as f64;
    let f = trace_product(&noisy, &ideal);
    (f - 1.0 / dim) / (1.0 - 1.0 / dim)
}

/// Monte Carlo estimate of the two-photon coincidence visibility at
/// detection-time difference `dt_ns`, sampling emission times from the
/// exponential wavepackets and phases from the diffusion processes.
///
/// Estimator: conditioned on clicks `dt` apart, the same/different-detector
/// probabilities are proportional to S ± 2 Re(cross), with S the direct
/// intensity terms and `cross` the phase-carrying interference term; the
/// visibility is their normalized difference. Emission times enter both the
/// conditional density of the earlier click and the intensity ratio for
/// unequal lifetimes; phases perform a random walk with variance 2γt.
pub fn hom_visibility_monte_carlo<R: Rng + ?Sized>(
    dt_ns: f64,
    a: &EmitterParams,
    b: &EmitterParams,
    samples: u64,
    rng: &mut R,
) -> f64 {
    let (ta, tb) = (a.lifetime_ns(), b.lifetime_ns());
    let gamma_sum_per_ns = (a.dephasing_rate_mhz + b.dephasing_rate_mhz) * 1e-3;
    let delta_omega = TAU * (a.detuning_mhz - b.detuning_mhz) * 1e-3;
    let phase_std = (2.0 * gamma_sum_per_ns * dt_ns.abs()).sqrt();
    let noise = Normal::new(0.0, 1.0).unwrap();

    // With t1 = t2 + dt the conditional density of t2 is Exp with the summed
    // decay rates.
    let rate = 1.0 / ta + 1.0 / tb;
    let mut num = 0.0;
    let mut den = 0.0;
    for _ in 0..samples {
        let u: f64 = rng.gen();
        let t2 = -(1.0 - u).ln() / rate;
        let t1 = t2 + dt_ns;
        let phase = delta_omega * dt_ns
            + if phase_std > 0.0 {
                phase_std * noise.sample(rng)
            } else {
                0.0
            };
        // Intensity ratio Ia(t2) Ib(t1) / (Ia(t1) Ib(t2)); 1 for equal τ.
        let ratio = ((t1 - t2) / ta - (t1 - t2) / tb).exp();
        num += 2.0 * ratio.sqrt() * phase.cos();
        den += 1.0 + ratio;
    }
    num / den
}

/// Monte Carlo construction of the heralded two-spin state: the click pattern
/// projects the spins onto (|01⟩ + e^{iφ}|10⟩)/√2 with φ set by detuning and
/// the sampled phase diffusion. Returns the fidelity to Ψ+.
pub fn conditioned_pair_fidelity_mc<R: Rng + ?Sized>(
    dt_ns: f64,
    a: &EmitterParams,
    b: &EmitterParams,
    samples: u64,
    rng: &mut R,
) -> f64 {
    let gamma_sum_per_ns = (a.dephasing_rate_mhz + b.dephasing_rate_mhz) * 1e-3;
    let delta_omega = TAU * (a.detuning_mhz - b.detuning_mhz) * 1e-3;
    let phase_std = (2.0 * gamma_sum_per_ns * dt_ns.abs()).sqrt();
    let noise = Normal::new(0.0, 1.0).unwrap();

    let mut acc = DMatrix::<Complex64>::zeros(4, 4);
    let s = FRAC_1_SQRT_2;
    for _ in 0..samples {
        let phi = delta_omega * dt_ns
            + if phase_std > 0.0 {
                phase_std * noise.sample(rng)
            } else {
                0.0
            };
        let amps = [
            c(0., 0.),
            c(s, 0.),
            Complex64::from_polar(s, phi),
            c(0., 0.),
        ];
        for i in 0..4 {
            for j in 0..4 {
                acc[(i, j)] += amps[i] * amps[j].conj();
            }
        }
    }
    acc /= c(samples as f64, 0.0);
    let rho = DensityMatrix::from_matrix(2, acc).unwrap();
    rho.overlap_with_pure(&bell_state_amplitudes(PAULI_X)).unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bell_states_project_onto_themselves() {
        for e in 0..4 {
            let mut coeffs = [0.0; 4];
            coeffs[e] = 1.0;
            let rho = bell_diagonal_state(&BellCoeffs::new(coeffs));
            let (weights, off) = bell_projection(&rho);
            assert!((weights[e] - 1.0).abs() < 1e-12);
            assert!(off < 1e-12);
        }
    }

    #[test]
    fn bell_diagonal_round_trip() {
        let coeffs = BellCoeffs::new([0.55, 0.2, 0.05, 0.2]);
        let rho = bell_diagonal_state(&coeffs);
        assert!(rho.validate().is_ok());
        let (weights, off) = bell_projection(&rho);
        for (w, c) in weights.iter().zip(&coeffs.0) {
            assert!((w - c).abs() < 1e-12);
        }
        assert!(off < 1e-12);
    }

    #[test]
    fn perfect_pair_teleports_ideal_cnot() {
        let fidelity = teleported_cnot_avg_fidelity(&BellCoeffs::perfect());
        assert!((fidelity - 1.0).abs() < 1e-10);
    }

    #[test]
    fn depolarizing_commutes_check() {
        let rho = DensityMatrix::new_basis_state(2, "01").unwrap();
        let g = GateSpec::new(Gate::Cnot, &[0, 1]);
        let a = global_depolarize(&rho.apply_gate(&g).unwrap(), 0.9);
        let b = global_depolarize(&rho, 0.9).apply_gate(&g).unwrap();
        assert!(a.max_norm_diff(&b) < 1e-12);
    }
}
