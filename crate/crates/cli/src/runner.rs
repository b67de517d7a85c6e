//! Experiment execution: seeded trials, sweeps, and the CSV sink.
//!
//! Re-running any experiment with the same config and seed produces a
//! byte-identical CSV: per-trial seeds are a pure function of (master seed,
//! sweep index, trial index), results aggregate in a fixed order, and floats
//! are formatted with Rust's shortest round-trip formatter.

use crate::config::{ExperimentConfig, ExperimentKind};
use rand::SeedableRng;
use spinnet_core::entanglement::PairLedger;
use spinnet_core::network::{
    gen1_repeater, gen2_repeater, Gen1Config, Gen2Config, NetworkError, Topology,
};
use spinnet_core::photonics::rate_fidelity_curve;
use spinnet_core::protocols::{
    mdi_qkd_single_hub, mdi_qkd_two_hub, overhead_compare, swap_chain_fidelity,
    swap_chain_gate_count, transversal_depth, HubSessionConfig, TwoHubSessionConfig,
};
use spinnet_core::SimRng;
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] crate::config::ConfigError),
    #[error("simulation error: {0}")]
    Simulation(String),
    #[error("I/O error writing {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// One aggregated measurement destined for the CSV sink.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub metric: String,
    pub value: f64,
    pub stderr: f64,
    pub trials: u64,
    pub seed: u64,
    pub status: String,
}

pub const CSV_HEADER: &str = "experiment,sweep_param,sweep_value,metric,value,stderr,trials,seed,status";

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "".to_string()
    } else {
        format!("{v}")
    }
}

impl ResultRow {
    fn csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.experiment,
            self.sweep_param,
            fmt_f64(self.sweep_value),
            self.metric,
            fmt_f64(self.value),
            fmt_f64(self.stderr),
            self.trials,
            self.seed,
            self.status
        )
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Pure derivation of a per-trial seed from (master, sweep index, trial
/// index): three chained splitmix64 finalizer steps.
pub fn derive_seed(master: u64, sweep_index: u64, trial_index: u64) -> u64 {
    let mut s = master;
    let a = splitmix64(&mut s);
    let mut s = a ^ sweep_index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let b = splitmix64(&mut s);
    let mut s = b ^ trial_index.wrapping_mul(0x8CB9_2BA7_2F3D_8DD7);
    splitmix64(&mut s)
}

/// Per-trial scalar metrics keyed by name, in a fixed order.
type TrialMetrics = Vec<(&'static str, f64)>;

struct SweepAggregate {
    names: Vec<&'static str>,
    sums: Vec<f64>,
    sumsqs: Vec<f64>,
    ok_trials: u64,
    timeouts: u64,
}

impl SweepAggregate {
    fn new() -> Self {
        Self {
            names: Vec::new(),
            sums: Vec::new(),
            sumsqs: Vec::new(),
            ok_trials: 0,
            timeouts: 0,
        }
    }

    fn add(&mut self, metrics: TrialMetrics) {
        if self.names.is_empty() {
            self.names = metrics.iter().map(|(n, _)| *n).collect();
            self.sums = vec![0.0; metrics.len()];
            self.sumsqs = vec![0.0; metrics.len()];
        }
        for (i, (_, v)) in metrics.iter().enumerate() {
            self.sums[i] += v;
            self.sumsqs[i] += v * v;
        }
        self.ok_trials += 1;
    }

    fn status(&self, requested: u64) -> String {
        if self.ok_trials == requested {
            "ok".to_string()
        } else if self.ok_trials == 0 {
            "timeout".to_string()
        } else {
            format!("partial({}/{})", self.ok_trials, requested)
        }
    }

    fn rows(
        &self,
        cfg: &ExperimentConfig,
        sweep_param: &str,
        sweep_value: f64,
        requested: u64,
    ) -> Vec<ResultRow> {
        let status = self.status(requested);
        if self.ok_trials == 0 {
            return vec![ResultRow {
                experiment: cfg.experiment.name().to_string(),
                sweep_param: sweep_param.to_string(),
                sweep_value,
                metric: "none".to_string(),
                value: f64::NAN,
                stderr: f64::NAN,
                trials: 0,
                seed: cfg.seed,
                status,
            }];
        }
        let n = self.ok_trials as f64;
        self.names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let mean = self.sums[i] / n;
                let var = (self.sumsqs[i] / n - mean * mean).max(0.0);
                let stderr = if self.ok_trials > 1 {
                    (var / (n - 1.0)).sqrt()
                } else {
                    0.0
                };
                ResultRow {
                    experiment: cfg.experiment.name().to_string(),
                    sweep_param: sweep_param.to_string(),
                    sweep_value,
                    metric: name.to_string(),
                    value: mean,
                    stderr,
                    trials: self.ok_trials,
                    seed: cfg.seed,
                    status: status.clone(),
                }
            })
            .collect()
    }
}

fn chain_topology(links: u32, fibre_km: f64, registers: u32) -> Topology {
    Topology::linear_chain(links, fibre_km, registers)
}

fn run_gen1_trial(cfg: &ExperimentConfig, seed: u64) -> Result<Option<TrialMetrics>, RunError> {
    let p = &cfg.gen1;
    let model = cfg.resolve_link_model(&p.link, "gen1.link")?;
    let (topo, chain): (Topology, Vec<u32>) = match &cfg.topology {
        Some(t) => (t.clone(), t.links.iter().map(|l| l.link_id).collect()),
        None => {
            let t = chain_topology(p.links, p.fibre_km, p.registers_per_node);
            let chain = (0..p.links).collect();
            (t, chain)
        }
    };
    let mut g1 = Gen1Config::new(model);
    g1.timing = cfg.timing;
    g1.distill_rounds = p.distill_rounds;
    g1.placement = p.placement;
    g1.dejmps = p.dejmps;
    g1.swap_duration_ns = p.swap_duration_ns;
    g1.register_template.t2_electron_ms = p.t2_electron_ms;
    g1.register_template.t2_nuclear_s = p.t2_nuclear_s;
    g1.register_template.per_attempt_dephasing = p.per_attempt_dephasing;

    let mut ledger = PairLedger::new();
    let mut rng = SimRng::seed_from_u64(seed);
    match gen1_repeater(&topo, &chain, &g1, &mut ledger, &mut rng) {
        Ok(res) => Ok(Some(vec![
            ("end_to_end_fidelity", res.end_to_end_fidelity),
            ("wall_time_ns", res.wall_time_ns),
            ("attempts_total", res.attempts_total as f64),
            ("pairs_distilled", res.pairs_distilled as f64),
        ])),
        Err(NetworkError::LinkTimeout { .. }) | Err(NetworkError::DistillStall(..)) => Ok(None),
        Err(e) => Err(RunError::Simulation(e.to_string())),
    }
}

fn run_gen2_trial(cfg: &ExperimentConfig, seed: u64) -> Result<Option<TrialMetrics>, RunError> {
    let p = &cfg.gen2;
    let model = cfg.resolve_link_model(&p.link, "gen2.link")?;
    let (topo, chain): (Topology, Vec<u32>) = match &cfg.topology {
        Some(t) => (t.clone(), t.links.iter().map(|l| l.link_id).collect()),
        None => {
            let t = chain_topology(p.links, p.fibre_km, p.registers_per_node);
            let chain = (0..p.links).collect();
            (t, chain)
        }
    };
    let g2 = Gen2Config {
        model,
        timing: cfg.timing,
        code: p.code,
    };
    let mut rng = SimRng::seed_from_u64(seed);
    match gen2_repeater(&topo, &chain, &g2, &mut rng) {
        Ok((res, detail)) => {
            let hops = detail.hop_wall_times_ns.len() as f64;
            Ok(Some(vec![
                ("end_to_end_fidelity", res.end_to_end_fidelity),
                ("wall_time_ns", res.wall_time_ns),
                ("attempts_total", res.attempts_total as f64),
                (
                    "hop_wall_time_ns",
                    detail.hop_wall_times_ns.iter().sum::<f64>() / hops,
                ),
                (
                    "hop_logical_error",
                    detail.hop_logical_errors.iter().sum::<f64>() / hops,
                ),
            ]))
        }
        Err(NetworkError::LinkTimeout { .. }) => Ok(None),
        Err(e) => Err(RunError::Simulation(e.to_string())),
    }
}

fn qkd_metrics(res: spinnet_core::protocols::QkdSessionResult) -> TrialMetrics {
    vec![
        ("qber", res.qber),
        ("secret_fraction", res.secret_fraction),
        ("sifted_bits", res.sifted_bits as f64),
        ("raw_rate_hz", res.raw_rate_hz),
        ("abandoned_rounds", res.abandoned_rounds as f64),
    ]
}

fn run_qkd_single_trial(cfg: &ExperimentConfig, seed: u64) -> Result<Option<TrialMetrics>, RunError> {
    let loading = cfg.qkd.loading();
    let session = HubSessionConfig {
        loading_a: loading,
        loading_b: loading,
        bsm_duration_ns: cfg.qkd.bsm_duration_ns,
    };
    let mut rng = SimRng::seed_from_u64(seed);
    let res = mdi_qkd_single_hub(&session, cfg.qkd.rounds, &mut rng)
        .map_err(|e| RunError::Simulation(e.to_string()))?;
    Ok(Some(qkd_metrics(res)))
}

fn run_qkd_two_hub_trial(
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<Option<TrialMetrics>, RunError> {
    let loading = cfg.qkd.loading();
    let model = cfg.resolve_link_model(&cfg.qkd.link, "qkd.link")?;
    let session = TwoHubSessionConfig {
        loading_a: loading,
        loading_b: loading,
        bsm_duration_ns: cfg.qkd.bsm_duration_ns,
        topology: Topology::linear_chain(1, cfg.qkd.inter_hub_fibre_km, 7),
        inter_hub_link: 0,
        link_model: model,
        link_timing: cfg.timing,
    };
    let mut rng = SimRng::seed_from_u64(seed);
    let res = mdi_qkd_two_hub(&session, cfg.qkd.rounds, &mut rng)
        .map_err(|e| RunError::Simulation(e.to_string()))?;
    Ok(Some(qkd_metrics(res)))
}

fn run_bell_pair_curve(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, RunError> {
    let p = &cfg.bell_pair_curve;
    let a = cfg.resolve_emitter(&p.emitter_a, "bell_pair_curve.emitter_a")?;
    let b = cfg.resolve_emitter(&p.emitter_b, "bell_pair_curve.emitter_b")?;
    let mut rng = SimRng::seed_from_u64(derive_seed(cfg.seed, 0, 0));
    let points = rate_fidelity_curve(
        &a,
        &b,
        p.window_ns,
        p.depolarizing_floor,
        &p.thresholds_ns,
        cfg.trials,
        &mut rng,
    )
    .map_err(|e| RunError::Simulation(e.to_string()))?;
    let mut rows = Vec::new();
    for point in points {
        let rate_se = (point.rate * (1.0 - point.rate) / cfg.trials as f64).sqrt();
        rows.push(ResultRow {
            experiment: cfg.experiment.name().to_string(),
            sweep_param: "dt_max_ns".into(),
            sweep_value: point.dt_max_ns,
            metric: "rate".into(),
            value: point.rate,
            stderr: rate_se,
            trials: cfg.trials,
            seed: cfg.seed,
            status: "ok".into(),
        });
        rows.push(ResultRow {
            experiment: cfg.experiment.name().to_string(),
            sweep_param: "dt_max_ns".into(),
            sweep_value: point.dt_max_ns,
            metric: "mean_fidelity".into(),
            value: point.mean_fidelity.unwrap_or(f64::NAN),
            stderr: 0.0,
            trials: cfg.trials,
            seed: cfg.seed,
            status: if point.mean_fidelity.is_some() {
                "ok".into()
            } else {
                "no_heralds".into()
            },
        });
    }
    Ok(rows)
}

fn run_connectivity(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, RunError> {
    let p = &cfg.connectivity;
    let report = transversal_depth(p.block_size, p.interconnects, p.intra_module, p.gate_fidelity)
        .map_err(|e| RunError::Simulation(e.to_string()))?;
    // The aligned table goes to stdout alongside the CSV rows.
    print!(
        "{}",
        report.render_table(&format!(
            "transversal CNOT: n = {}, interconnects = {}",
            p.block_size, p.interconnects
        ))
    );
    let chain_f = swap_chain_fidelity(p.swap_chain_distance, p.gate_fidelity);
    let row = |metric: &str, value: f64| ResultRow {
        experiment: cfg.experiment.name().to_string(),
        sweep_param: "none".into(),
        sweep_value: 0.0,
        metric: metric.to_string(),
        value,
        stderr: 0.0,
        trials: 1,
        seed: cfg.seed,
        status: "ok".into(),
    };
    Ok(vec![
        row("depth", report.depth as f64),
        row("total_gates", report.total_gates as f64),
        row("est_fidelity", report.est_fidelity),
        row("interconnects_used", report.interconnects_used as f64),
        row("swap_chain_gates", swap_chain_gate_count(p.swap_chain_distance) as f64),
        row("swap_chain_fidelity", chain_f),
    ])
}

fn run_overhead(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, RunError> {
    let p = &cfg.overhead;
    let report = overhead_compare(p.surface_phys_per_logical, p.qldpc_n, p.qldpc_k)
        .map_err(|e| RunError::Simulation(e.to_string()))?;
    let row = |metric: &str, value: f64| ResultRow {
        experiment: cfg.experiment.name().to_string(),
        sweep_param: "none".into(),
        sweep_value: 0.0,
        metric: metric.to_string(),
        value,
        stderr: 0.0,
        trials: 1,
        seed: cfg.seed,
        status: "ok".into(),
    };
    Ok(vec![
        row("surface_phys_per_logical", report.surface_phys_per_logical),
        row("qldpc_phys_per_logical", report.qldpc_phys_per_logical),
        row("overhead_ratio", report.ratio),
    ])
}

/// Executes the configured experiment and returns its result rows.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, RunError> {
    cfg.validate()?;
    match cfg.experiment {
        ExperimentKind::BellPairCurve => run_bell_pair_curve(cfg),
        ExperimentKind::Connectivity => run_connectivity(cfg),
        ExperimentKind::Overhead => run_overhead(cfg),
        ExperimentKind::RepeaterGen1
        | ExperimentKind::RepeaterGen2
        | ExperimentKind::QkdSingleHub
        | ExperimentKind::QkdTwoHub => run_trial_sweep(cfg),
    }
}

fn run_trial_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, RunError> {
    let sweep_points: Vec<(String, Option<f64>)> = match &cfg.sweep {
        Some(s) => s
            .values
            .iter()
            .map(|v| (s.parameter.clone(), Some(*v)))
            .collect(),
        None => vec![("none".to_string(), None)],
    };
    let mut rows = Vec::new();
    for (sweep_index, (param, value)) in sweep_points.iter().enumerate() {
        let mut point_cfg = cfg.clone();
        if let Some(v) = value {
            point_cfg.apply_sweep_value(param, *v)?;
        }
        let mut agg = SweepAggregate::new();
        for trial in 0..cfg.trials {
            let seed = derive_seed(cfg.seed, sweep_index as u64, trial);
            let metrics = match cfg.experiment {
                ExperimentKind::RepeaterGen1 => run_gen1_trial(&point_cfg, seed)?,
                ExperimentKind::RepeaterGen2 => run_gen2_trial(&point_cfg, seed)?,
                ExperimentKind::QkdSingleHub => run_qkd_single_trial(&point_cfg, seed)?,
                ExperimentKind::QkdTwoHub => run_qkd_two_hub_trial(&point_cfg, seed)?,
                _ => unreachable!("non-trial experiments handled elsewhere"),
            };
            match metrics {
                Some(m) => agg.add(m),
                None => agg.timeouts += 1,
            }
        }
        rows.extend(agg.rows(cfg, param, value.unwrap_or(0.0), cfg.trials));
    }
    Ok(rows)
}

/// Writes rows as CSV with the fixed header.
pub fn write_csv(path: &str, rows: &[ResultRow]) -> Result<(), RunError> {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    let mut file = std::fs::File::create(path).map_err(|source| RunError::Io {
        path: path.to_string(),
        source,
    })?;
    file.write_all(out.as_bytes()).map_err(|source| RunError::Io {
        path: path.to_string(),
        source,
    })
}
