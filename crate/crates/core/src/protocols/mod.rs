//! Application layer: MA-MDI QKD sessions and connectivity analyses.

mod connectivity;
mod qkd;

pub use connectivity::{
    overhead_compare, swap_chain_fidelity, swap_chain_gate_count, transversal_depth,
    ConnectivityReport, IntraModuleConnectivity, OverheadReport,
};
pub use qkd::{
    binary_entropy, load_timebin, mdi_qkd_single_hub, mdi_qkd_two_hub, secret_fraction,
    HubSessionConfig, LoadedQubit, LoadingConfig, QkdBasis, QkdSessionResult, SourceModel,
    TimeBinQubit, TwoHubSessionConfig,
};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("hub register has no free memory slot")]
    NoFreeSlot,
}
