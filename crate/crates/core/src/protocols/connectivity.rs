//! Connectivity-dependent logical-gate cost analyses.

use super::ProtocolError;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntraModuleConnectivity {
    AllToAll,
    Planar,
}

/// Cost of a transversal CNOT between two code blocks in separate modules.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConnectivityReport {
    pub depth: u64,
    pub total_gates: u64,
    pub est_fidelity: f64,
    pub interconnects_used: u32,
}

impl ConnectivityReport {
    /// Aligned text table for terminal output.
    pub fn render_table(&self, label: &str) -> String {
        let rows = [
            ("depth", format!("{}", self.depth)),
            ("total gates", format!("{}", self.total_gates)),
            ("est. fidelity", format!("{:.6}", self.est_fidelity)),
            ("interconnects", format!("{}", self.interconnects_used)),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        let mut out = format!("{label}\n");
        for (k, v) in rows {
            out.push_str(&format!("  {k:<width$}  {v}\n"));
        }
        out
    }
}

impl fmt::Display for ConnectivityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "depth {} gates {} fidelity {:.6} interconnects {}",
            self.depth, self.total_gates, self.est_fidelity, self.interconnects_used
        )
    }
}

/// Depth and gate cost of a transversal CNOT: `n` pairwise physical CNOTs
/// scheduled over `c` inter-module interconnects.
///
/// With all-to-all routing inside the module the depth is ⌈n/c⌉ — one
/// timestep when every qubit has its own interconnect. Planar routing adds
/// swap rerouting to reach the interconnect ports, scheduled greedily on a
/// line layout with ports at one end (qubit i waits for round ⌊i/c⌋ and
/// travels c·⌊i/c⌋ sites each way, 3 CNOTs per SWAP).
pub fn transversal_depth(
    n: u32,
    c: u32,
    intra: IntraModuleConnectivity,
    gate_fidelity: f64,
) -> Result<ConnectivityReport, ProtocolError> {
    if n == 0 || c == 0 {
        return Err(ProtocolError::InvalidParameter(
            "transversal_depth needs n ≥ 1 and c ≥ 1".into(),
        ));
    }
    if !(0.0..=1.0).contains(&gate_fidelity) {
        return Err(ProtocolError::InvalidParameter(format!(
            "gate_fidelity {gate_fidelity} outside [0, 1]"
        )));
    }
    let rounds = (n as u64).div_ceil(c as u64);
    let (depth, total_gates) = match intra {
        IntraModuleConnectivity::AllToAll => (rounds, n as u64),
        IntraModuleConnectivity::Planar => {
            let mut depth = 0u64;
            let mut gates = 0u64;
            for r in 0..rounds {
                let travel = c as u64 * r;
                depth += 6 * travel + 1;
                let in_round = (n as u64 - r * c as u64).min(c as u64);
                gates += in_round * (6 * travel + 1);
            }
            (depth, gates)
        }
    };
    Ok(ConnectivityReport {
        depth,
        total_gates,
        est_fidelity: gate_fidelity.powi(total_gates.min(i32::MAX as u64) as i32),
        interconnects_used: n.min(c),
    })
}

/// CNOTs needed for a gate between qubits `distance` apart on a line:
/// swap there and back (3 CNOTs per SWAP) plus the gate itself.
pub fn swap_chain_gate_count(distance: u32) -> u64 {
    if distance == 0 {
        return 0;
    }
    6 * (distance as u64 - 1) + 1
}

/// Estimated fidelity of a long-range CNOT on a planar line:
/// gate_fidelity raised to the required gate count.
pub fn swap_chain_fidelity(distance: u32, gate_fidelity: f64) -> f64 {
    gate_fidelity.powi(swap_chain_gate_count(distance).min(i32::MAX as u64) as i32)
}

/// Physical-per-logical overhead comparison between a surface-code estimate
/// and a QLDPC (n, k) family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverheadReport {
    pub surface_phys_per_logical: f64,
    pub qldpc_phys_per_logical: f64,
    pub ratio: f64,
}

pub fn overhead_compare(
    surface_phys_per_logical: u32,
    qldpc_n: u32,
    qldpc_k: u32,
) -> Result<OverheadReport, ProtocolError> {
    if surface_phys_per_logical == 0 || qldpc_n == 0 || qldpc_k == 0 {
        return Err(ProtocolError::InvalidParameter(
            "overhead_compare needs positive integers".into(),
        ));
    }
    let surface = surface_phys_per_logical as f64;
    let qldpc = qldpc_n as f64 / qldpc_k as f64;
    Ok(OverheadReport {
        surface_phys_per_logical: surface,
        qldpc_phys_per_logical: qldpc,
        ratio: surface / qldpc,
    })
}
