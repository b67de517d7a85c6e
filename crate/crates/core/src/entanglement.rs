//! Bell-pair bookkeeping and consumption.
//!
//! Shared pairs are summarized by four Bell-basis coefficients (pI, pX, pY,
//! pZ): the probability that the pair differs from the target Bell state by
//! the given Pauli error on a fixed half. All protocol operations here stay
//! inside that Bell-diagonal family, which keeps the hot paths closed-form;
//! the circuit-level reference implementations in [`crate::oracle`] check
//! every formula against the density-matrix engine.
//!
//! The [`PairLedger`] enforces consumption discipline: a pair that has been
//! swapped, distilled, or consumed by a teleported gate can never be used
//! again.

use crate::qstate::ALGEBRA_TOL;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum EntanglementError {
    #[error("pair {0:?} was already consumed")]
    AlreadyConsumed(PairId),
    #[error("pairs do not share exactly one node")]
    NoSharedNode,
    #[error("pairs do not connect the same pair of nodes")]
    EndpointMismatch,
    #[error("tiered distillation of {levels} levels needs {need} pairs, got {got}")]
    InsufficientPairs { levels: u32, need: usize, got: usize },
    #[error("teleported gate qubits must differ from the consumed pair's slots")]
    SlotCollision,
    #[error("teleported gate endpoints must sit on the pair's two nodes")]
    WrongNodes,
    #[error("elapsed time must be non-negative, got {0}")]
    NegativeElapsed(f64),
    #[error("invalid Bell coefficients: {0}")]
    BadCoefficients(String),
}

/// The four Bell states, used to record which state an attempt heralded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BellState {
    PhiPlus,
    PsiPlus,
    PsiMinus,
    PhiMinus,
}

/// Pauli error labels indexing Bell-diagonal coefficients.
pub const PAULI_I: usize = 0;
pub const PAULI_X: usize = 1;
pub const PAULI_Y: usize = 2;
pub const PAULI_Z: usize = 3;

/// (x, z) symplectic representation of each Pauli label.
const PAULI_BITS: [(u8, u8); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

fn pauli_from_bits(x: u8, z: u8) -> usize {
    match (x, z) {
        (0, 0) => PAULI_I,
        (1, 0) => PAULI_X,
        (1, 1) => PAULI_Y,
        (0, 1) => PAULI_Z,
        _ => unreachable!(),
    }
}

/// Bell-diagonal coefficients (pI, pX, pY, pZ) relative to the target state.
/// The pair fidelity is pI.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellCoeffs(pub [f64; 4]);

impl BellCoeffs {
    pub fn new(coeffs: [f64; 4]) -> Self {
        let c = Self(coeffs);
        debug_assert!(c.validate().is_ok(), "{:?}", c.validate());
        c
    }

    pub fn perfect() -> Self {
        Self([1.0, 0.0, 0.0, 0.0])
    }

    /// Werner state of fidelity `f`: the three error weights are equal.
    pub fn werner(f: f64) -> Self {
        let e = (1.0 - f) / 3.0;
        Self::new([f, e, e, e])
    }

    pub fn fidelity(&self) -> f64 {
        self.0[PAULI_I]
    }

    pub fn validate(&self) -> Result<(), EntanglementError> {
        let sum: f64 = self.0.iter().sum();
        if (sum - 1.0).abs() > ALGEBRA_TOL {
            return Err(EntanglementError::BadCoefficients(format!(
                "sum {sum} differs from 1"
            )));
        }
        if self.0.iter().any(|&p| p < -ALGEBRA_TOL) {
            return Err(EntanglementError::BadCoefficients(format!(
                "negative coefficient in {:?}",
                self.0
            )));
        }
        Ok(())
    }

    /// Mix toward the maximally mixed Bell-diagonal state with weight `p`.
    pub fn mix_depolarizing(&self, p: f64) -> Self {
        let mut out = [0.0; 4];
        for (i, o) in out.iter_mut().enumerate() {
            *o = (1.0 - p) * self.0[i] + p * 0.25;
        }
        Self::new(out)
    }

    /// Effect of a Z flip with probability `q` on one half of the pair:
    /// error labels compose with Z (I↔Z, X↔Y).
    pub fn dephase_one_half(&self, q: f64) -> Self {
        let [pi, px, py, pz] = self.0;
        Self::new([
            (1.0 - q) * pi + q * pz,
            (1.0 - q) * px + q * py,
            (1.0 - q) * py + q * px,
            (1.0 - q) * pz + q * pi,
        ])
    }
}

/// Coefficient vector of the pair produced by entanglement swapping:
/// the group convolution of the two error vectors under Pauli composition.
pub fn swap_coeffs(p: &BellCoeffs, q: &BellCoeffs) -> BellCoeffs {
    let mut out = [0.0; 4];
    for (&pi, &(xi, zi)) in p.0.iter().zip(&PAULI_BITS) {
        for (&qj, &(xj, zj)) in q.0.iter().zip(&PAULI_BITS) {
            out[pauli_from_bits(xi ^ xj, zi ^ zj)] += pi * qj;
        }
    }
    BellCoeffs::new(out)
}

/// Closed-form BBPSSW recurrence: bilateral CNOT, Z measurement of the
/// sacrificed pair, keep on parity agreement.
///
/// Returns the renormalized output coefficients and the success probability.
pub fn bbpssw_coeffs(p: &BellCoeffs, q: &BellCoeffs) -> (BellCoeffs, f64) {
    let [pi, px, py, pz] = p.0;
    let [qi, qx, qy, qz] = q.0;
    let raw = [
        pi * qi + pz * qz,
        px * qx + py * qy,
        px * qy + py * qx,
        pi * qz + pz * qi,
    ];
    let success: f64 = raw.iter().sum();
    if success <= 0.0 {
        return (BellCoeffs::new([0.25; 4]), 0.0);
    }
    let out = [
        raw[0] / success,
        raw[1] / success,
        raw[2] / success,
        raw[3] / success,
    ];
    (BellCoeffs::new(out), success)
}

/// DEJMPS pre-rotation: both parties apply ±π/2 X rotations, exchanging the
/// Y and Z error slots so the parity check sees the dominant phase errors.
pub fn dejmps_rotation(p: &BellCoeffs) -> BellCoeffs {
    let [pi, px, py, pz] = p.0;
    BellCoeffs::new([pi, px, pz, py])
}

/// Average gate fidelity of a CNOT teleported through a Bell-diagonal pair.
///
/// The induced channel is the ideal CNOT followed by a Pauli error drawn
/// from the pair coefficients (see [`TeleportedCnotChannel`]); its process
/// fidelity is the identity weight pI, hence F_avg = (4 pI + 1) / 5.
pub fn teleported_cnot_fidelity(p: &BellCoeffs) -> f64 {
    (4.0 * p.fidelity() + 1.0) / 5.0
}

/// Pauli error branches induced on (control, target) by a teleported CNOT
/// consuming a pair with the given coefficients:
///
/// - pair error I → no error,
/// - pair error X → X on the target,
/// - pair error Z → Z on the control,
/// - pair error Y → Z on the control and X on the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TeleportedCnotChannel {
    pub p_identity: f64,
    pub p_x_target: f64,
    pub p_z_control: f64,
    pub p_zx_both: f64,
}

impl TeleportedCnotChannel {
    pub fn from_coeffs(p: &BellCoeffs) -> Self {
        Self {
            p_identity: p.0[PAULI_I],
            p_x_target: p.0[PAULI_X],
            p_z_control: p.0[PAULI_Z],
            p_zx_both: p.0[PAULI_Y],
        }
    }
}

/// Outcome report for a consumed teleported gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateFidelityReport {
    pub avg_gate_fidelity: f64,
    pub process_diagnostic: Option<TeleportedCnotChannel>,
}

/// Applies the teleported-CNOT induced channel to an actual register state:
/// the ideal CNOT followed by the Pauli error mixture of the consumed pair.
pub fn apply_teleported_cnot(
    state: &crate::qstate::DensityMatrix,
    control: usize,
    target: usize,
    coeffs: &BellCoeffs,
) -> Result<crate::qstate::DensityMatrix, crate::qstate::QstateError> {
    use crate::qstate::{DensityMatrix, Gate, GateSpec};
    use num_complex::Complex64;

    let after = state.apply_gate(&GateSpec::new(Gate::Cnot, &[control, target]))?;
    let ch = TeleportedCnotChannel::from_coeffs(coeffs);
    let x_t = after.apply_gate(&GateSpec::new(Gate::X, &[target]))?;
    let z_c = after.apply_gate(&GateSpec::new(Gate::Z, &[control]))?;
    let zx = x_t.apply_gate(&GateSpec::new(Gate::Z, &[control]))?;
    let acc = after.matrix() * Complex64::new(ch.p_identity, 0.0)
        + x_t.matrix() * Complex64::new(ch.p_x_target, 0.0)
        + z_c.matrix() * Complex64::new(ch.p_z_control, 0.0)
        + zx.matrix() * Complex64::new(ch.p_zx_both, 0.0);
    DensityMatrix::from_matrix(state.num_qubits(), acc)
}

pub type NodeId = u32;

/// A qubit slot within one register: the optical interface or a memory spin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Electron,
    Nuclear(u8),
}

/// Address of one physical spin: node, register within the node, slot within
/// the register.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Endpoint {
    pub node: NodeId,
    pub register: u16,
    pub slot: Slot,
}

impl Endpoint {
    pub fn electron(node: NodeId) -> Self {
        Self {
            node,
            register: 0,
            slot: Slot::Electron,
        }
    }

    pub fn nuclear(node: NodeId, index: u8) -> Self {
        Self {
            node,
            register: 0,
            slot: Slot::Nuclear(index),
        }
    }

    pub fn at(node: NodeId, register: u16, slot: Slot) -> Self {
        Self {
            node,
            register,
            slot,
        }
    }
}

/// One T-centre-style register: an optical electron interface plus up to
/// three nuclear memory spins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinRegister {
    pub node_id: NodeId,
    pub register_index: u16,
    pub nuclear_slots: u8,
    pub t2_electron_ms: f64,
    pub t2_nuclear_s: f64,
    /// Nuclear phase-error probability per entanglement attempt on this
    /// register's optical interface.
    pub per_attempt_dephasing: f64,
}

impl Default for SpinRegister {
    /// Measured bulk coherence times: 2.1 ms electron, 1.1 s hydrogen.
    fn default() -> Self {
        Self {
            node_id: 0,
            register_index: 0,
            nuclear_slots: 3,
            t2_electron_ms: 2.1,
            t2_nuclear_s: 1.1,
            per_attempt_dephasing: 0.0,
        }
    }
}

impl SpinRegister {
    pub fn for_node(node_id: NodeId) -> Self {
        Self {
            node_id,
            ..Self::default()
        }
    }

    pub fn at(node_id: NodeId, register_index: u16) -> Self {
        Self {
            node_id,
            register_index,
            ..Self::default()
        }
    }

    pub fn t2_ns(&self, slot: Slot) -> f64 {
        match slot {
            Slot::Electron => self.t2_electron_ms * 1e6,
            Slot::Nuclear(_) => self.t2_nuclear_s * 1e9,
        }
    }
}

/// Accumulated phase-error probability after `attempts` entanglement
/// attempts with per-attempt error ε: 1 − (1 − ε)^attempts.
pub fn attempt_dephasing_probability(epsilon: f64, attempts: u64) -> f64 {
    1.0 - (1.0 - epsilon).powi(attempts.min(i32::MAX as u64) as i32)
}

/// Phase-error probability equivalent to exp(−t/T2) coherence decay.
pub fn elapsed_dephasing_probability(elapsed_ns: f64, t2_ns: f64) -> f64 {
    if t2_ns.is_infinite() || elapsed_ns <= 0.0 {
        return 0.0;
    }
    (1.0 - (-elapsed_ns / t2_ns).exp()) / 2.0
}

/// Composition of two independent Z-flip probabilities.
fn compose_flips(a: f64, b: f64) -> f64 {
    a + b - 2.0 * a * b
}

/// A shared two-spin entangled resource tracked by the ledger.
#[derive(Debug, Clone, PartialEq)]
pub struct BellDiagonalPair {
    pub coeffs: BellCoeffs,
    pub endpoints: [Endpoint; 2],
    pub created_at_ns: f64,
    pub consumed: bool,
    /// Simulation time up to which each half's T2 decay has been applied;
    /// schedulers age halves lazily at every use point.
    pub half_aged_until_ns: [f64; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PairId(usize);

/// Single-writer ledger of every pair in a simulation.
#[derive(Debug, Default)]
pub struct PairLedger {
    pairs: Vec<BellDiagonalPair>,
}

impl PairLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(
        &mut self,
        coeffs: BellCoeffs,
        endpoints: [Endpoint; 2],
        created_at_ns: f64,
    ) -> PairId {
        debug_assert!(coeffs.validate().is_ok());
        // TODO: compact consumed records if very long QKD sessions (one pair
        // per round) ever make the ledger a memory concern.
        self.pairs.push(BellDiagonalPair {
            coeffs,
            endpoints,
            created_at_ns,
            consumed: false,
            half_aged_until_ns: [created_at_ns; 2],
        });
        PairId(self.pairs.len() - 1)
    }

    pub fn get(&self, id: PairId) -> &BellDiagonalPair {
        &self.pairs[id.0]
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (PairId, &BellDiagonalPair)> {
        self.pairs.iter().enumerate().map(|(i, p)| (PairId(i), p))
    }

    fn check_live(&self, id: PairId) -> Result<(), EntanglementError> {
        if self.pairs[id.0].consumed {
            return Err(EntanglementError::AlreadyConsumed(id));
        }
        Ok(())
    }

    fn consume(&mut self, id: PairId) -> Result<BellDiagonalPair, EntanglementError> {
        self.check_live(id)?;
        self.pairs[id.0].consumed = true;
        Ok(self.pairs[id.0].clone())
    }

    /// Consumes a pair without producing anything, e.g. when a protocol
    /// resets and throws its stored resources away.
    pub fn discard(&mut self, id: PairId) -> Result<(), EntanglementError> {
        self.consume(id).map(|_| ())
    }

    /// Applies a Z-flip with probability `q` to one endpoint's half.
    pub fn dephase_endpoint(&mut self, id: PairId, q: f64) -> Result<(), EntanglementError> {
        self.check_live(id)?;
        let pair = &mut self.pairs[id.0];
        pair.coeffs = pair.coeffs.dephase_one_half(q);
        Ok(())
    }

    /// Per-attempt nuclear dephasing only: every live pair with a half in a
    /// nuclear slot of this register picks up ε-per-attempt phase errors.
    pub fn decay_attempts(&mut self, reg: &SpinRegister, attempts: u64) {
        let q = attempt_dephasing_probability(reg.per_attempt_dephasing, attempts);
        if q <= 0.0 {
            return;
        }
        for pair in self.pairs.iter_mut().filter(|p| !p.consumed) {
            for ep in pair.endpoints {
                if ep.node == reg.node_id
                    && ep.register == reg.register_index
                    && matches!(ep.slot, Slot::Nuclear(_))
                {
                    pair.coeffs = pair.coeffs.dephase_one_half(q);
                }
            }
        }
    }

    /// Lazy T2 aging: dephases one half for the time elapsed since it was
    /// last aged and advances its age marker to `now_ns`.
    pub fn age_half_to(
        &mut self,
        id: PairId,
        half: usize,
        now_ns: f64,
        t2_ns: f64,
    ) -> Result<(), EntanglementError> {
        self.check_live(id)?;
        let pair = &mut self.pairs[id.0];
        let elapsed = now_ns - pair.half_aged_until_ns[half];
        if elapsed <= 0.0 {
            return Ok(());
        }
        let q = elapsed_dephasing_probability(elapsed, t2_ns);
        if q > 0.0 {
            pair.coeffs = pair.coeffs.dephase_one_half(q);
        }
        pair.half_aged_until_ns[half] = now_ns;
        Ok(())
    }

    /// Memory decay at one register: every live pair with a half stored
    /// there suffers per-attempt nuclear dephasing (when held in a nuclear
    /// slot) plus T2 decay for the elapsed wall-clock time.
    pub fn apply_memory_decay(
        &mut self,
        reg: &SpinRegister,
        attempts: u64,
        elapsed_ns: f64,
    ) -> Result<(), EntanglementError> {
        if elapsed_ns < 0.0 {
            return Err(EntanglementError::NegativeElapsed(elapsed_ns));
        }
        for pair in self.pairs.iter_mut().filter(|p| !p.consumed) {
            for ep in pair.endpoints {
                if ep.node != reg.node_id || ep.register != reg.register_index {
                    continue;
                }
                let mut q = elapsed_dephasing_probability(elapsed_ns, reg.t2_ns(ep.slot));
                if matches!(ep.slot, Slot::Nuclear(_)) {
                    q = compose_flips(
                        q,
                        attempt_dephasing_probability(reg.per_attempt_dephasing, attempts),
                    );
                }
                if q > 0.0 {
                    pair.coeffs = pair.coeffs.dephase_one_half(q);
                }
            }
        }
        Ok(())
    }

    /// Entanglement swapping: a Bell-state measurement at the shared node
    /// converts an A–B and a B–C pair into an A–C pair. Consumes both inputs.
    pub fn swap_entanglement(
        &mut self,
        ab: PairId,
        bc: PairId,
        now_ns: f64,
    ) -> Result<PairId, EntanglementError> {
        self.check_live(ab)?;
        self.check_live(bc)?;
        let (left, right) = (self.get(ab).clone(), self.get(bc).clone());
        let shared: Vec<NodeId> = left
            .endpoints
            .iter()
            .map(|e| e.node)
            .filter(|n| right.endpoints.iter().any(|e| e.node == *n))
            .collect();
        if shared.len() != 1 {
            return Err(EntanglementError::NoSharedNode);
        }
        let hub = shared[0];
        let keep_left = *left
            .endpoints
            .iter()
            .find(|e| e.node != hub)
            .ok_or(EntanglementError::NoSharedNode)?;
        let keep_right = *right
            .endpoints
            .iter()
            .find(|e| e.node != hub)
            .ok_or(EntanglementError::NoSharedNode)?;
        self.consume(ab)?;
        self.consume(bc)?;
        let coeffs = swap_coeffs(&left.coeffs, &right.coeffs);
        Ok(self.register(coeffs, [keep_left, keep_right], now_ns))
    }

    /// BBPSSW distillation of two pairs spanning the same nodes.
    ///
    /// Consumes both inputs; returns the surviving pair when the sampled
    /// parity check agrees. `dejmps` applies the basis pre-rotation first.
    pub fn distill_bbpssw<R: Rng + ?Sized>(
        &mut self,
        keep: PairId,
        sacrifice: PairId,
        dejmps: bool,
        now_ns: f64,
        rng: &mut R,
    ) -> Result<Option<PairId>, EntanglementError> {
        self.check_live(keep)?;
        self.check_live(sacrifice)?;
        let a = self.get(keep).clone();
        let b = self.get(sacrifice).clone();
        let nodes_a: Vec<NodeId> = a.endpoints.iter().map(|e| e.node).collect();
        if !b.endpoints.iter().all(|e| nodes_a.contains(&e.node)) || a.endpoints[0].node == a.endpoints[1].node
        {
            return Err(EntanglementError::EndpointMismatch);
        }
        self.consume(keep)?;
        self.consume(sacrifice)?;
        let (pa, pb) = if dejmps {
            (dejmps_rotation(&a.coeffs), dejmps_rotation(&b.coeffs))
        } else {
            (a.coeffs, b.coeffs)
        };
        let (out, success_prob) = bbpssw_coeffs(&pa, &pb);
        if rng.gen::<f64>() >= success_prob {
            return Ok(None);
        }
        let out = if dejmps { dejmps_rotation(&out) } else { out };
        Ok(Some(self.register(out, a.endpoints, now_ns)))
    }

    /// Pairwise distillation tournament over `levels` rounds.
    ///
    /// Greedy with no retries: any failed round consumes its inputs and
    /// aborts the tournament. With `levels == 0` the first pair is returned
    /// untouched.
    pub fn tiered_distill<R: Rng + ?Sized>(
        &mut self,
        pairs: &[PairId],
        levels: u32,
        dejmps: bool,
        now_ns: f64,
        rng: &mut R,
    ) -> Result<Option<PairId>, EntanglementError> {
        let need = 1usize << levels;
        if pairs.len() < need {
            return Err(EntanglementError::InsufficientPairs {
                levels,
                need,
                got: pairs.len(),
            });
        }
        let mut survivors: Vec<PairId> = pairs[..need].to_vec();
        for _ in 0..levels {
            let mut next = Vec::with_capacity(survivors.len() / 2);
            for (i, two) in survivors.chunks(2).enumerate() {
                match self.distill_bbpssw(two[0], two[1], dejmps, now_ns, rng)? {
                    Some(winner) => next.push(winner),
                    None => {
                        // Abort: consume the pairs still waiting this round
                        // and the intermediate winners, so the failed
                        // tournament leaves nothing reusable behind.
                        for waiting in survivors.iter().skip((i + 1) * 2) {
                            let _ = self.consume(*waiting);
                        }
                        for winner in next {
                            let _ = self.consume(winner);
                        }
                        return Ok(None);
                    }
                }
            }
            survivors = next;
        }
        Ok(Some(survivors[0]))
    }

    /// Consumes a pair in a teleported CNOT between two memory qubits and
    /// reports the closed-form gate quality.
    ///
    /// The physical circuit — local CNOTs between each electron half and its
    /// nuclear qubit, X- and Z-basis electron measurements, conditioned Pauli
    /// corrections — is implemented in [`crate::oracle::teleported_cnot_channel_on`]
    /// and validated against this closed form by the test suites.
    pub fn teleported_cnot(
        &mut self,
        pair: PairId,
        control: Endpoint,
        target: Endpoint,
    ) -> Result<GateFidelityReport, EntanglementError> {
        self.check_live(pair)?;
        let record = self.get(pair).clone();
        let nodes: Vec<NodeId> = record.endpoints.iter().map(|e| e.node).collect();
        if !nodes.contains(&control.node) || !nodes.contains(&target.node) {
            return Err(EntanglementError::WrongNodes);
        }
        if record.endpoints.contains(&control) || record.endpoints.contains(&target) {
            return Err(EntanglementError::SlotCollision);
        }
        self.consume(pair)?;
        Ok(GateFidelityReport {
            avg_gate_fidelity: teleported_cnot_fidelity(&record.coeffs),
            process_diagnostic: Some(TeleportedCnotChannel::from_coeffs(&record.coeffs)),
        })
    }
}
