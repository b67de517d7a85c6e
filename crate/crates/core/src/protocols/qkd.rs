//! Memory-assisted measurement-device-independent QKD.
//!
//! Clients encode random bits onto photonic time-bin qubits and send them to
//! a hub, where each state is loaded onto a spin memory by a heralded
//! teleportation step. Once both clients' states sit in memory, a Bell-state
//! measurement between the two spins announces only the parity of the bits,
//! which is enough to distill a key and reveals nothing to the untrusted
//! hub. The two-hub variant replaces the local BSM with a teleported CNOT
//! consuming a hub-to-hub Bell pair.

use super::ProtocolError;
use crate::entanglement::{apply_teleported_cnot, Endpoint, PairLedger, SpinRegister};
use crate::network::{
    run_link_until_success, LinkModel, LinkTiming, NetworkError, Topology,
};
use crate::qstate::{ChannelKind, DensityMatrix, Gate, GateSpec, MeasureBasis, NoiseChannel};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QkdBasis {
    /// Early/late time bins.
    Z,
    /// Superposition bins.
    X,
}

/// A client-encoded photonic qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeBinQubit {
    pub basis: QkdBasis,
    pub bit: u8,
    pub mean_photon_number: f64,
    pub arrival_window_ns: f64,
}

/// Photon-number statistics of the client source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SourceModel {
    /// Ideal single-photon source: exactly one photon per pulse.
    SinglePhoton,
    /// Weak coherent pulse with Poissonian photon number; multiphoton pulses
    /// produce false heralds that load a useless mixed state.
    WeakCoherent { mean_photon_number: f64 },
}

/// One client→hub loading channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LoadingConfig {
    pub source: SourceModel,
    /// Client-photon survival probability through fibre and switches.
    pub channel_transmission: f64,
    /// Independent X-flip probability on the loaded qubit.
    pub channel_bitflip_prob: f64,
    /// Independent Z-flip probability on the loaded qubit.
    pub channel_dephasing_prob: f64,
    /// Probability the hub's spin-entangled photon reaches the loading BSM.
    pub spin_photon_efficiency: f64,
    pub pulse_period_ns: f64,
    /// Reloads attempted before the round is abandoned.
    pub reload_attempts: u32,
}

impl Default for LoadingConfig {
    fn default() -> Self {
        Self {
            source: SourceModel::WeakCoherent {
                mean_photon_number: 0.5,
            },
            channel_transmission: 1.0,
            channel_bitflip_prob: 0.0,
            channel_dephasing_prob: 0.0,
            spin_photon_efficiency: 1.0,
            pulse_period_ns: 1000.0,
            reload_attempts: 10,
        }
    }
}

impl LoadingConfig {
    pub fn validate(&self) -> Result<(), ProtocolError> {
        let check = |name: &str, v: f64| {
            if !(0.0..=1.0).contains(&v) {
                return Err(ProtocolError::InvalidParameter(format!(
                    "{name} = {v} outside [0, 1]"
                )));
            }
            Ok(())
        };
        check("channel_transmission", self.channel_transmission)?;
        check("channel_bitflip_prob", self.channel_bitflip_prob)?;
        check("channel_dephasing_prob", self.channel_dephasing_prob)?;
        check("spin_photon_efficiency", self.spin_photon_efficiency)?;
        if let SourceModel::WeakCoherent { mean_photon_number } = self.source {
            if !mean_photon_number.is_finite() || mean_photon_number <= 0.0 {
                return Err(ProtocolError::InvalidParameter(format!(
                    "mean_photon_number = {mean_photon_number} must be positive"
                )));
            }
        }
        if self.reload_attempts == 0 {
            return Err(ProtocolError::InvalidParameter(
                "reload_attempts must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// A client state sitting in hub memory after a successful herald.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedQubit {
    pub state: DensityMatrix,
    /// (x, z) teleportation frame announced by the loading BSM; the state is
    /// returned with the correction already applied.
    pub pauli_frame: (u8, u8),
    /// A multiphoton pulse produced this herald: the memory holds noise.
    pub multiphoton: bool,
    pub slot: u8,
}

fn pure_client_state(basis: QkdBasis, bit: u8) -> DensityMatrix {
    let zero = DensityMatrix::new_basis_state(1, if bit == 0 { "0" } else { "1" }).unwrap();
    match basis {
        QkdBasis::Z => zero,
        QkdBasis::X => zero.apply_gate(&GateSpec::new(Gate::H, &[0])).unwrap(),
    }
}

/// One heralded attempt to load a time-bin qubit into a hub memory slot.
///
/// The client photon interferes with the hub's spin-entangled photon; a BSM
/// click pattern heralds the teleportation of the photonic state onto the
/// spin. Returns `Ok(None)` when the attempt simply failed (loss, no herald).
pub fn load_timebin<R: Rng + ?Sized>(
    q: &TimeBinQubit,
    cfg: &LoadingConfig,
    free_slot: Option<u8>,
    rng: &mut R,
) -> Result<Option<LoadedQubit>, ProtocolError> {
    cfg.validate()?;
    let slot = free_slot.ok_or(ProtocolError::NoFreeSlot)?;

    let photons = match cfg.source {
        SourceModel::SinglePhoton => 1u8,
        SourceModel::WeakCoherent { mean_photon_number } => {
            let u: f64 = rng.gen();
            let p0 = (-mean_photon_number).exp();
            if u < p0 {
                0
            } else if u < p0 * (1.0 + mean_photon_number) {
                1
            } else {
                2
            }
        }
    };
    let mut arrived = 0u8;
    for _ in 0..photons {
        if rng.gen::<f64>() < cfg.channel_transmission {
            arrived += 1;
        }
    }
    if arrived == 0 {
        return Ok(None);
    }
    if rng.gen::<f64>() >= cfg.spin_photon_efficiency {
        return Ok(None);
    }
    // Linear-optics BSM resolves two of the four Bell states.
    if rng.gen::<f64>() >= 0.5 {
        return Ok(None);
    }
    let pauli_frame = (u8::from(rng.gen::<bool>()), u8::from(rng.gen::<bool>()));

    let multiphoton = arrived >= 2;
    let mut state = if multiphoton {
        DensityMatrix::maximally_mixed(1).unwrap()
    } else {
        pure_client_state(q.basis, q.bit)
    };
    if cfg.channel_bitflip_prob > 0.0 {
        state = state
            .apply_channel(&NoiseChannel::new(
                ChannelKind::BitFlip,
                cfg.channel_bitflip_prob,
                0,
            ))
            .unwrap();
    }
    if cfg.channel_dephasing_prob > 0.0 {
        state = state
            .apply_channel(&NoiseChannel::new(
                ChannelKind::Dephasing,
                cfg.channel_dephasing_prob,
                0,
            ))
            .unwrap();
    }
    Ok(Some(LoadedQubit {
        state,
        pauli_frame,
        multiphoton,
        slot,
    }))
}

/// Outcome of one QKD session.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QkdSessionResult {
    pub sifted_bits: u64,
    pub errors: u64,
    pub qber: f64,
    pub secret_fraction: f64,
    pub raw_rate_hz: f64,
    pub abandoned_rounds: u64,
}

/// Binary entropy h2(q) in bits.
pub fn binary_entropy(q: f64) -> f64 {
    if q <= 0.0 || q >= 1.0 {
        return 0.0;
    }
    -q * q.log2() - (1.0 - q) * (1.0 - q).log2()
}

/// Asymptotic symmetric MDI-QKD secret fraction: max(0, 1 − 2 h2(Q)).
pub fn secret_fraction(qber: f64) -> f64 {
    (1.0 - 2.0 * binary_entropy(qber)).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct HubSessionConfig {
    pub loading_a: LoadingConfig,
    pub loading_b: LoadingConfig,
    pub bsm_duration_ns: f64,
}

impl Default for HubSessionConfig {
    fn default() -> Self {
        Self {
            loading_a: LoadingConfig::default(),
            loading_b: LoadingConfig::default(),
            bsm_duration_ns: 100.0,
        }
    }
}

struct RoundDraw {
    basis: QkdBasis,
    bit: u8,
}

fn draw_round<R: Rng + ?Sized>(rng: &mut R) -> RoundDraw {
    RoundDraw {
        basis: if rng.gen::<bool>() { QkdBasis::Z } else { QkdBasis::X },
        bit: u8::from(rng.gen::<bool>()),
    }
}

/// Loads one client with the configured retry budget; returns the loaded
/// qubit and the time spent, or `None` with time spent on abandonment.
fn load_with_retries<R: Rng + ?Sized>(
    draw: &RoundDraw,
    cfg: &LoadingConfig,
    slot: u8,
    rng: &mut R,
) -> (Option<LoadedQubit>, f64) {
    let q = TimeBinQubit {
        basis: draw.basis,
        bit: draw.bit,
        mean_photon_number: match cfg.source {
            SourceModel::SinglePhoton => 1.0,
            SourceModel::WeakCoherent { mean_photon_number } => mean_photon_number,
        },
        arrival_window_ns: cfg.pulse_period_ns,
    };
    let mut elapsed = 0.0;
    for _ in 0..cfg.reload_attempts {
        elapsed += cfg.pulse_period_ns;
        match load_timebin(&q, cfg, Some(slot), rng) {
            Ok(Some(loaded)) => return (Some(loaded), elapsed),
            Ok(None) => continue,
            Err(_) => break,
        }
    }
    (None, elapsed)
}

struct SiftAccumulator {
    sifted: u64,
    errors: u64,
    abandoned: u64,
    elapsed_ns: f64,
}

impl SiftAccumulator {
    fn new() -> Self {
        Self {
            sifted: 0,
            errors: 0,
            abandoned: 0,
            elapsed_ns: 0.0,
        }
    }

    fn result(&self, _rounds: u64) -> QkdSessionResult {
        let qber = if self.sifted == 0 {
            0.0
        } else {
            self.errors as f64 / self.sifted as f64
        };
        QkdSessionResult {
            sifted_bits: self.sifted,
            errors: self.errors,
            qber,
            secret_fraction: if self.sifted == 0 {
                0.0
            } else {
                secret_fraction(qber)
            },
            raw_rate_hz: if self.elapsed_ns > 0.0 {
                self.sifted as f64 / (self.elapsed_ns * 1e-9)
            } else {
                0.0
            },
            abandoned_rounds: self.abandoned,
        }
    }
}

/// Measures the Bell-state-measurement bits of a loaded two-spin state:
/// (phase bit, parity bit).
fn bsm_outcomes<R: Rng + ?Sized>(joint: &DensityMatrix, rng: &mut R) -> (u8, u8) {
    let after = joint
        .apply_gate(&GateSpec::new(Gate::H, &[0]))
        .unwrap();
    let (phase, post, _) = after.measure_qubit(0, MeasureBasis::Z, rng).unwrap();
    let (parity, _, _) = post.measure_qubit(1, MeasureBasis::Z, rng).unwrap();
    (phase, parity)
}

fn sift_round(
    acc: &mut SiftAccumulator,
    draw_a: &RoundDraw,
    draw_b: &RoundDraw,
    phase: u8,
    parity: u8,
) {
    if draw_a.basis != draw_b.basis {
        return;
    }
    acc.sifted += 1;
    let expected = draw_a.bit ^ draw_b.bit;
    let announced = match draw_a.basis {
        QkdBasis::Z => parity,
        QkdBasis::X => phase,
    };
    if announced != expected {
        acc.errors += 1;
    }
}

/// MA-MDI QKD with both clients connected to the same hub.
pub fn mdi_qkd_single_hub<R: Rng + ?Sized>(
    cfg: &HubSessionConfig,
    rounds: u64,
    rng: &mut R,
) -> Result<QkdSessionResult, ProtocolError> {
    cfg.loading_a.validate()?;
    cfg.loading_b.validate()?;
    let mut acc = SiftAccumulator::new();
    for _ in 0..rounds {
        let draw_a = draw_round(rng);
        let draw_b = draw_round(rng);
        let (loaded_a, dt_a) = load_with_retries(&draw_a, &cfg.loading_a, 0, rng);
        acc.elapsed_ns += dt_a;
        let Some(a) = loaded_a else {
            acc.abandoned += 1;
            continue;
        };
        let (loaded_b, dt_b) = load_with_retries(&draw_b, &cfg.loading_b, 1, rng);
        acc.elapsed_ns += dt_b;
        let Some(b) = loaded_b else {
            acc.abandoned += 1;
            continue;
        };
        let joint = a.state.tensor(&b.state).unwrap();
        // Local BSM: CNOT then the H + Z readouts inside bsm_outcomes.
        let joint = joint.apply_gate(&GateSpec::new(Gate::Cnot, &[0, 1])).unwrap();
        let (phase, parity) = bsm_outcomes(&joint, rng);
        acc.elapsed_ns += cfg.bsm_duration_ns;
        sift_round(&mut acc, &draw_a, &draw_b, phase, parity);
    }
    Ok(acc.result(rounds))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoHubSessionConfig {
    pub loading_a: LoadingConfig,
    pub loading_b: LoadingConfig,
    pub bsm_duration_ns: f64,
    pub topology: Topology,
    /// Link joining the two hubs, entanglement over which feeds the
    /// teleported CNOT of every round's nonlocal BSM.
    pub inter_hub_link: u32,
    pub link_model: LinkModel,
    pub link_timing: LinkTiming,
}

/// MA-MDI QKD with the clients on different hubs: the BSM is nonlocal,
/// consuming one hub-to-hub Bell pair per round through a teleported CNOT.
pub fn mdi_qkd_two_hub<R: Rng + ?Sized>(
    cfg: &TwoHubSessionConfig,
    rounds: u64,
    rng: &mut R,
) -> Result<QkdSessionResult, ProtocolError> {
    cfg.loading_a.validate()?;
    cfg.loading_b.validate()?;
    let link = *cfg
        .topology
        .link(cfg.inter_hub_link)
        .ok_or_else(|| ProtocolError::InvalidParameter("unknown inter-hub link".into()))?;
    let [hub_a, hub_b] = link.endpoints;
    let reg_a = SpinRegister::for_node(hub_a);
    let reg_b = SpinRegister::for_node(hub_b);
    let mut ledger = PairLedger::new();

    let mut acc = SiftAccumulator::new();
    for _ in 0..rounds {
        let draw_a = draw_round(rng);
        let draw_b = draw_round(rng);
        let (loaded_a, dt_a) = load_with_retries(&draw_a, &cfg.loading_a, 0, rng);
        acc.elapsed_ns += dt_a;
        let Some(a) = loaded_a else {
            acc.abandoned += 1;
            continue;
        };
        let (loaded_b, dt_b) = load_with_retries(&draw_b, &cfg.loading_b, 0, rng);
        acc.elapsed_ns += dt_b;
        let Some(b) = loaded_b else {
            acc.abandoned += 1;
            continue;
        };
        // Entanglement for this round's nonlocal BSM.
        let outcome = match run_link_until_success(
            &cfg.topology,
            &link,
            &cfg.link_model,
            &cfg.link_timing,
            [&reg_a, &reg_b],
            [Endpoint::electron(hub_a), Endpoint::electron(hub_b)],
            &mut ledger,
            acc.elapsed_ns,
            rng,
        ) {
            Ok(o) => o,
            Err(NetworkError::LinkTimeout { .. }) | Err(NetworkError::DeadLink(_)) => {
                acc.abandoned += 1;
                continue;
            }
            Err(e) => {
                return Err(ProtocolError::InvalidParameter(format!(
                    "inter-hub link failed: {e}"
                )))
            }
        };
        acc.elapsed_ns += outcome.elapsed_ns;
        let coeffs = ledger.get(outcome.pair).coeffs;
        ledger
            .teleported_cnot(
                outcome.pair,
                Endpoint::nuclear(hub_a, 0),
                Endpoint::nuclear(hub_b, 0),
            )
            .expect("fresh pair spans the hub nodes");

        let joint = a.state.tensor(&b.state).unwrap();
        let joint = apply_teleported_cnot(&joint, 0, 1, &coeffs).unwrap();
        let (phase, parity) = bsm_outcomes(&joint, rng);
        acc.elapsed_ns += cfg.bsm_duration_ns;
        sift_round(&mut acc, &draw_a, &draw_b, phase, parity);
    }
    Ok(acc.result(rounds))
}
