//! Network topology, link budgets, and repeater protocols.

mod event;
mod repeater;

pub use event::EventQueue;
pub use repeater::{
    gen1_repeater, gen2_repeater, logical_error_binomial, multiplexed_link,
    run_link_until_success, CodeParams, DistillPlacement, Gen1Config, Gen2Config, LinkModel,
    LinkOutcome, LinkTiming, MultiplexOutcome, RepeaterResult, SimEventKind,
};

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum NetworkError {
    #[error("link {link_id} timed out after {attempts} attempts")]
    LinkTimeout { link_id: u32, attempts: u64 },
    #[error("link {0} has zero success probability")]
    DeadLink(u32),
    #[error("distillation stalled on link range {0:?} after {1} regenerations")]
    DistillStall(std::ops::Range<usize>, u32),
    #[error("chain must contain 2^k links for nested swapping, got {0}")]
    ChainNotPowerOfTwo(usize),
    #[error("node {node} hosts {got} registers but the code needs {need}")]
    InsufficientRegisters { node: u32, need: u32, got: u32 },
    #[error("unsupported code parameters [[{n},{k},{d}]]")]
    UnsupportedCode { n: u32, k: u32, d: u32 },
    #[error("invalid topology: {0}")]
    BadTopology(String),
    #[error("chain links are not a connected path: {0}")]
    BrokenChain(String),
    #[error("multiplexing needs at least one channel")]
    NoChannels,
}

/// One network node: a chip hosting some number of spin registers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyNode {
    pub node_id: u32,
    pub registers: u32,
    pub cryostat_id: u32,
}

/// An optical link between two nodes, possibly through switch layers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Link {
    pub link_id: u32,
    pub endpoints: [u32; 2],
    pub fibre_km: f64,
    pub switch_layers: u32,
    pub detector_efficiency: f64,
}

/// Loss and propagation constants shared by the whole topology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyConstants {
    pub fibre_atten_db_per_km: f64,
    pub switch_loss_db: f64,
    pub speed_of_light_fibre_km_per_ms: f64,
}

impl Default for TopologyConstants {
    fn default() -> Self {
        Self {
            fibre_atten_db_per_km: 0.2,
            switch_loss_db: 1.5,
            speed_of_light_fibre_km_per_ms: 200.0,
        }
    }
}

/// Graph of nodes, fibre links and switch layers the event engine runs on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub nodes: Vec<TopologyNode>,
    pub links: Vec<Link>,
    #[serde(default)]
    pub constants: TopologyConstants,
}

impl Topology {
    /// A chain of `n_links + 1` nodes joined by identical links.
    pub fn linear_chain(n_links: u32, fibre_km: f64, registers_per_node: u32) -> Self {
        let nodes = (0..=n_links)
            .map(|i| TopologyNode {
                node_id: i,
                registers: registers_per_node,
                cryostat_id: i,
            })
            .collect();
        let links = (0..n_links)
            .map(|i| Link {
                link_id: i,
                endpoints: [i, i + 1],
                fibre_km,
                switch_layers: 0,
                detector_efficiency: 1.0,
            })
            .collect();
        Self {
            nodes,
            links,
            constants: TopologyConstants::default(),
        }
    }

    pub fn node(&self, node_id: u32) -> Option<&TopologyNode> {
        self.nodes.iter().find(|n| n.node_id == node_id)
    }

    pub fn link(&self, link_id: u32) -> Option<&Link> {
        self.links.iter().find(|l| l.link_id == link_id)
    }

    /// Structural validation: ids unique, losses non-negative, graph connected.
    pub fn validate(&self) -> Result<(), NetworkError> {
        let err = |m: String| Err(NetworkError::BadTopology(m));
        if self.nodes.is_empty() {
            return err("no nodes".into());
        }
        let mut ids = HashSet::new();
        for n in &self.nodes {
            if !ids.insert(n.node_id) {
                return err(format!("duplicate node_id {}", n.node_id));
            }
        }
        let mut link_ids = HashSet::new();
        for l in &self.links {
            if !link_ids.insert(l.link_id) {
                return err(format!("duplicate link_id {}", l.link_id));
            }
            for e in l.endpoints {
                if !ids.contains(&e) {
                    return err(format!("link {} references unknown node {e}", l.link_id));
                }
            }
            if l.fibre_km < 0.0 {
                return err(format!("link {} has negative fibre length", l.link_id));
            }
            if !(0.0..=1.0).contains(&l.detector_efficiency) {
                return err(format!("link {} detector efficiency out of range", l.link_id));
            }
        }
        if self.constants.fibre_atten_db_per_km < 0.0
            || self.constants.switch_loss_db < 0.0
            || self.constants.speed_of_light_fibre_km_per_ms <= 0.0
        {
            return err("constants must be non-negative (light speed positive)".into());
        }
        // Connectivity over the undirected link graph.
        let mut seen = HashSet::new();
        let mut stack = vec![self.nodes[0].node_id];
        while let Some(n) = stack.pop() {
            if !seen.insert(n) {
                continue;
            }
            for l in &self.links {
                if l.endpoints.contains(&n) {
                    for e in l.endpoints {
                        if !seen.contains(&e) {
                            stack.push(e);
                        }
                    }
                }
            }
        }
        if seen.len() != self.nodes.len() {
            return err(format!(
                "graph is disconnected: reached {} of {} nodes",
                seen.len(),
                self.nodes.len()
            ));
        }
        Ok(())
    }

    /// One-way photon time of flight over a link, ns.
    pub fn time_of_flight_ns(&self, link: &Link) -> f64 {
        link.fibre_km / self.constants.speed_of_light_fibre_km_per_ms * 1e6
    }
}

/// End-to-end transmission of a link: fibre attenuation, switch-layer loss,
/// and detector efficiency.
pub fn link_efficiency(link: &Link, constants: &TopologyConstants) -> f64 {
    let loss_db = link.fibre_km * constants.fibre_atten_db_per_km
        + link.switch_layers as f64 * constants.switch_loss_db;
    10f64.powf(-loss_db / 10.0) * link.detector_efficiency
}
