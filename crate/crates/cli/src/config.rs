//! Experiment configuration: strict TOML with documented defaults.
//!
//! Unknown keys anywhere in the document fail the parse, so a typo'd sweep
//! parameter can never silently run with defaults. Range violations are
//! reported with the full field path.

use serde::{Deserialize, Serialize};
use spinnet_core::network::{
    CodeParams, DistillPlacement, LinkModel, LinkTiming, Topology,
};
use spinnet_core::photonics::{EmitterParams, HeraldConfig};
use spinnet_core::protocols::{IntraModuleConnectivity, LoadingConfig, SourceModel};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config syntax error: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    BellPairCurve,
    RepeaterGen1,
    RepeaterGen2,
    QkdSingleHub,
    QkdTwoHub,
    Connectivity,
    Overhead,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::BellPairCurve => "bell_pair_curve",
            ExperimentKind::RepeaterGen1 => "repeater_gen1",
            ExperimentKind::RepeaterGen2 => "repeater_gen2",
            ExperimentKind::QkdSingleHub => "qkd_single_hub",
            ExperimentKind::QkdTwoHub => "qkd_two_hub",
            ExperimentKind::Connectivity => "connectivity",
            ExperimentKind::Overhead => "overhead",
        }
    }
}

/// Link-pair source named in config, resolved against the emitter table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LinkModelConfig {
    Werner { fidelity: f64, success_prob: f64 },
    Photonic { emitter_a: String, emitter_b: String },
}

impl Default for LinkModelConfig {
    fn default() -> Self {
        LinkModelConfig::Werner {
            fidelity: 0.95,
            success_prob: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BellPairCurveParams {
    pub emitter_a: String,
    pub emitter_b: String,
    /// Accepted |dt| thresholds; this is the experiment's native sweep.
    pub thresholds_ns: Vec<f64>,
    pub window_ns: f64,
    pub depolarizing_floor: f64,
}

impl Default for BellPairCurveParams {
    fn default() -> Self {
        Self {
            emitter_a: "default".into(),
            emitter_b: "default".into(),
            thresholds_ns: vec![5.0, 10.0, 20.0, 40.0, 80.0, 160.0, 320.0, 640.0, 1280.0, 2000.0],
            window_ns: 2000.0,
            depolarizing_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Gen1Params {
    pub links: u32,
    pub fibre_km: f64,
    pub registers_per_node: u32,
    pub link: LinkModelConfig,
    pub distill_rounds: u32,
    pub placement: DistillPlacement,
    pub dejmps: bool,
    pub swap_duration_ns: f64,
    pub t2_electron_ms: f64,
    pub t2_nuclear_s: f64,
    pub per_attempt_dephasing: f64,
}

impl Default for Gen1Params {
    fn default() -> Self {
        Self {
            links: 2,
            fibre_km: 0.0,
            registers_per_node: 7,
            link: LinkModelConfig::default(),
            distill_rounds: 0,
            placement: DistillPlacement::AfterSwap,
            dejmps: false,
            swap_duration_ns: 0.0,
            t2_electron_ms: f64::INFINITY,
            t2_nuclear_s: f64::INFINITY,
            per_attempt_dephasing: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Gen2Params {
    pub links: u32,
    pub fibre_km: f64,
    pub registers_per_node: u32,
    pub link: LinkModelConfig,
    pub code: CodeParams,
}

impl Default for Gen2Params {
    fn default() -> Self {
        Self {
            links: 2,
            fibre_km: 0.0,
            registers_per_node: 7,
            link: LinkModelConfig::default(),
            code: CodeParams::STEANE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QkdParams {
    pub rounds: u64,
    /// "single_photon" or a positive mean photon number for a weak
    /// coherent source.
    pub mean_photon_number: f64,
    pub single_photon_source: bool,
    pub channel_transmission: f64,
    pub channel_bitflip_prob: f64,
    pub channel_dephasing_prob: f64,
    pub spin_photon_efficiency: f64,
    pub pulse_period_ns: f64,
    pub reload_attempts: u32,
    pub bsm_duration_ns: f64,
    /// Two-hub only: inter-hub link.
    pub link: LinkModelConfig,
    pub inter_hub_fibre_km: f64,
}

impl Default for QkdParams {
    fn default() -> Self {
        Self {
            rounds: 10_000,
            mean_photon_number: 0.5,
            single_photon_source: false,
            channel_transmission: 1.0,
            channel_bitflip_prob: 0.0,
            channel_dephasing_prob: 0.0,
            spin_photon_efficiency: 1.0,
            pulse_period_ns: 1000.0,
            reload_attempts: 10,
            bsm_duration_ns: 100.0,
            link: LinkModelConfig::Werner {
                fidelity: 1.0,
                success_prob: 0.5,
            },
            inter_hub_fibre_km: 0.0,
        }
    }
}

impl QkdParams {
    pub fn loading(&self) -> LoadingConfig {
        LoadingConfig {
            source: if self.single_photon_source {
                SourceModel::SinglePhoton
            } else {
                SourceModel::WeakCoherent {
                    mean_photon_number: self.mean_photon_number,
                }
            },
            channel_transmission: self.channel_transmission,
            channel_bitflip_prob: self.channel_bitflip_prob,
            channel_dephasing_prob: self.channel_dephasing_prob,
            spin_photon_efficiency: self.spin_photon_efficiency,
            pulse_period_ns: self.pulse_period_ns,
            reload_attempts: self.reload_attempts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConnectivityParams {
    pub block_size: u32,
    pub interconnects: u32,
    pub intra_module: IntraModuleConnectivity,
    pub gate_fidelity: f64,
    pub swap_chain_distance: u32,
}

impl Default for ConnectivityParams {
    fn default() -> Self {
        Self {
            block_size: 7,
            interconnects: 7,
            intra_module: IntraModuleConnectivity::AllToAll,
            gate_fidelity: 0.99,
            swap_chain_distance: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OverheadParams {
    pub surface_phys_per_logical: u32,
    pub qldpc_n: u32,
    pub qldpc_k: u32,
}

impl Default for OverheadParams {
    fn default() -> Self {
        Self {
            surface_phys_per_logical: 3000,
            qldpc_n: 1000,
            qldpc_k: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub parameter: String,
    pub values: Vec<f64>,
}

/// Declarative description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_output")]
    pub output_path: String,
    #[serde(default = "default_emitters")]
    pub emitters: BTreeMap<String, EmitterParams>,
    #[serde(default)]
    pub herald: HeraldConfig,
    #[serde(default)]
    pub timing: LinkTiming,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
    /// Explicit topology override; repeater experiments otherwise build a
    /// linear chain from their own parameters.
    #[serde(default)]
    pub topology: Option<Topology>,
    #[serde(default)]
    pub bell_pair_curve: BellPairCurveParams,
    #[serde(default)]
    pub gen1: Gen1Params,
    #[serde(default)]
    pub gen2: Gen2Params,
    #[serde(default)]
    pub qkd: QkdParams,
    #[serde(default)]
    pub connectivity: ConnectivityParams,
    #[serde(default)]
    pub overhead: OverheadParams,
}

fn default_trials() -> u64 {
    1
}

fn default_output() -> String {
    "results.csv".into()
}

fn default_emitters() -> BTreeMap<String, EmitterParams> {
    let mut m = BTreeMap::new();
    m.insert("default".to_string(), EmitterParams::default());
    m
}

/// Parses and fully validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.trials == 0 {
            return Err(invalid("trials must be at least 1"));
        }
        for (name, em) in &self.emitters {
            em.validate()
                .map_err(|e| invalid(format!("emitters.{name}: {e}")))?;
        }
        self.herald
            .validate()
            .map_err(|e| invalid(format!("herald: {e}")))?;
        if let Some(topo) = &self.topology {
            topo.validate()
                .map_err(|e| invalid(format!("topology: {e}")))?;
        }
        self.validate_experiment()?;
        if let Some(sweep) = &self.sweep {
            if self.experiment == ExperimentKind::BellPairCurve {
                return Err(invalid(
                    "bell_pair_curve sweeps dt_max natively via bell_pair_curve.thresholds_ns; \
                     remove the [sweep] block",
                ));
            }
            if sweep.values.is_empty() {
                return Err(invalid("sweep.values must be nonempty"));
            }
            // Dry-run the path against a clone so typos fail at parse time.
            let mut probe = self.clone();
            probe.apply_sweep_value(&sweep.parameter, sweep.values[0])?;
        }
        Ok(())
    }

    fn validate_experiment(&self) -> Result<(), ConfigError> {
        let check01 = |path: &str, v: f64| {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("{path} = {v} outside [0, 1]")));
            }
            Ok(())
        };
        match self.experiment {
            ExperimentKind::BellPairCurve => {
                let p = &self.bell_pair_curve;
                self.resolve_emitter(&p.emitter_a, "bell_pair_curve.emitter_a")?;
                self.resolve_emitter(&p.emitter_b, "bell_pair_curve.emitter_b")?;
                if p.thresholds_ns.is_empty() {
                    return Err(invalid("bell_pair_curve.thresholds_ns must be nonempty"));
                }
                if p.thresholds_ns.windows(2).any(|w| w[0] > w[1]) {
                    return Err(invalid(
                        "bell_pair_curve.thresholds_ns must be sorted ascending",
                    ));
                }
                if p.thresholds_ns.iter().any(|&t| t <= 0.0 || t > p.window_ns) {
                    return Err(invalid(
                        "bell_pair_curve.thresholds_ns must lie in (0, window_ns]",
                    ));
                }
                check01("bell_pair_curve.depolarizing_floor", p.depolarizing_floor)?;
            }
            ExperimentKind::RepeaterGen1 => {
                if !self.gen1.links.is_power_of_two() {
                    return Err(invalid(format!(
                        "gen1.links = {} must be a power of two",
                        self.gen1.links
                    )));
                }
                self.resolve_link_model(&self.gen1.link, "gen1.link")?;
                check01(
                    "gen1.per_attempt_dephasing",
                    self.gen1.per_attempt_dephasing,
                )?;
            }
            ExperimentKind::RepeaterGen2 => {
                self.gen2
                    .code
                    .validate()
                    .map_err(|e| invalid(format!("gen2.code: {e}")))?;
                self.resolve_link_model(&self.gen2.link, "gen2.link")?;
            }
            ExperimentKind::QkdSingleHub | ExperimentKind::QkdTwoHub => {
                let q = &self.qkd;
                if q.rounds == 0 {
                    return Err(invalid("qkd.rounds must be at least 1"));
                }
                q.loading()
                    .validate()
                    .map_err(|e| invalid(format!("qkd: {e}")))?;
                if self.experiment == ExperimentKind::QkdTwoHub {
                    self.resolve_link_model(&q.link, "qkd.link")?;
                }
            }
            ExperimentKind::Connectivity => {
                let c = &self.connectivity;
                if c.block_size == 0 || c.interconnects == 0 {
                    return Err(invalid(
                        "connectivity.block_size and connectivity.interconnects must be ≥ 1",
                    ));
                }
                check01("connectivity.gate_fidelity", c.gate_fidelity)?;
            }
            ExperimentKind::Overhead => {
                let o = &self.overhead;
                if o.surface_phys_per_logical == 0 || o.qldpc_n == 0 || o.qldpc_k == 0 {
                    return Err(invalid("overhead parameters must be positive"));
                }
            }
        }
        Ok(())
    }

    pub fn resolve_emitter(
        &self,
        name: &str,
        path: &str,
    ) -> Result<EmitterParams, ConfigError> {
        self.emitters
            .get(name)
            .copied()
            .ok_or_else(|| invalid(format!("{path}: unknown emitter '{name}'")))
    }

    pub fn resolve_link_model(
        &self,
        link: &LinkModelConfig,
        path: &str,
    ) -> Result<LinkModel, ConfigError> {
        match link {
            LinkModelConfig::Werner {
                fidelity,
                success_prob,
            } => {
                if !(0.25..=1.0).contains(fidelity) {
                    return Err(invalid(format!(
                        "{path}.fidelity = {fidelity} outside [0.25, 1]"
                    )));
                }
                if !(0.0..=1.0).contains(success_prob) {
                    return Err(invalid(format!(
                        "{path}.success_prob = {success_prob} outside [0, 1]"
                    )));
                }
                Ok(LinkModel::Werner {
                    fidelity: *fidelity,
                    success_prob: *success_prob,
                })
            }
            LinkModelConfig::Photonic {
                emitter_a,
                emitter_b,
            } => Ok(LinkModel::Photonic {
                emitter_a: self.resolve_emitter(emitter_a, &format!("{path}.emitter_a"))?,
                emitter_b: self.resolve_emitter(emitter_b, &format!("{path}.emitter_b"))?,
                herald: self.herald,
            }),
        }
    }

    /// Writes a swept value into the named field. The supported paths are
    /// listed by `spinnet schema`.
    pub fn apply_sweep_value(&mut self, path: &str, value: f64) -> Result<(), ConfigError> {
        let parts: Vec<&str> = path.split('.').collect();
        let unknown = || invalid(format!("sweep parameter '{path}' is not a sweepable field"));
        match parts.as_slice() {
            ["emitters", name, field] => {
                let em = self
                    .emitters
                    .get_mut(*name)
                    .ok_or_else(|| invalid(format!("sweep: unknown emitter '{name}'")))?;
                match *field {
                    "bare_lifetime_ns" => em.bare_lifetime_ns = value,
                    "purcell_factor" => em.purcell_factor = value,
                    "dephasing_rate_mhz" => em.dephasing_rate_mhz = value,
                    "detuning_mhz" => em.detuning_mhz = value,
                    "efficiency" => em.efficiency = value,
                    "cyclicity" => em.cyclicity = value,
                    "spectral_diffusion_mhz" => em.spectral_diffusion_mhz = value,
                    _ => return Err(unknown()),
                }
                em.validate()
                    .map_err(|e| invalid(format!("sweep emitters.{name}: {e}")))?;
            }
            ["herald", field] => {
                match *field {
                    "dt_max_ns" => self.herald.dt_max_ns = value,
                    "window_ns" => self.herald.window_ns = value,
                    "dark_count_prob" => self.herald.dark_count_prob = value,
                    "depolarizing_floor" => self.herald.depolarizing_floor = value,
                    _ => return Err(unknown()),
                }
                self.herald
                    .validate()
                    .map_err(|e| invalid(format!("sweep herald: {e}")))?;
            }
            ["gen1", "fibre_km"] => self.gen1.fibre_km = value,
            ["gen1", "link", field] => apply_link_field(&mut self.gen1.link, field, value, path)?,
            ["gen2", "fibre_km"] => self.gen2.fibre_km = value,
            ["gen2", "link", field] => apply_link_field(&mut self.gen2.link, field, value, path)?,
            ["qkd", field] => match *field {
                "mean_photon_number" => self.qkd.mean_photon_number = value,
                "channel_transmission" => self.qkd.channel_transmission = value,
                "channel_bitflip_prob" => self.qkd.channel_bitflip_prob = value,
                "channel_dephasing_prob" => self.qkd.channel_dephasing_prob = value,
                "spin_photon_efficiency" => self.qkd.spin_photon_efficiency = value,
                "inter_hub_fibre_km" => self.qkd.inter_hub_fibre_km = value,
                _ => return Err(unknown()),
            },
            ["qkd", "link", field] => apply_link_field(&mut self.qkd.link, field, value, path)?,
            ["connectivity", "gate_fidelity"] => self.connectivity.gate_fidelity = value,
            _ => return Err(unknown()),
        }
        Ok(())
    }
}

fn apply_link_field(
    link: &mut LinkModelConfig,
    field: &str,
    value: f64,
    path: &str,
) -> Result<(), ConfigError> {
    match link {
        LinkModelConfig::Werner {
            fidelity,
            success_prob,
        } => {
            match field {
                "fidelity" => *fidelity = value,
                "success_prob" => *success_prob = value,
                _ => {
                    return Err(invalid(format!(
                        "sweep parameter '{path}' is not a sweepable field"
                    )))
                }
            }
            Ok(())
        }
        LinkModelConfig::Photonic { .. } => Err(invalid(format!(
            "sweep parameter '{path}' targets a Werner link but the model is photonic; \
             sweep the emitter fields instead"
        ))),
    }
}

/// Human-readable configuration reference printed by `spinnet schema`.
pub fn schema_reference() -> String {
    let defaults = ExperimentConfig {
        experiment: ExperimentKind::BellPairCurve,
        seed: 0,
        trials: default_trials(),
        output_path: default_output(),
        emitters: default_emitters(),
        herald: HeraldConfig::default(),
        timing: LinkTiming::default(),
        sweep: None,
        topology: None,
        bell_pair_curve: BellPairCurveParams::default(),
        gen1: Gen1Params::default(),
        gen2: Gen2Params::default(),
        qkd: QkdParams::default(),
        connectivity: ConnectivityParams::default(),
        overhead: OverheadParams::default(),
    };
    let toml = toml::to_string_pretty(&defaults).expect("defaults serialize");
    format!(
        "\
Configuration reference (TOML, strict: unknown keys are rejected)
==================================================================

experiment: one of bell_pair_curve, repeater_gen1, repeater_gen2,
            qkd_single_hub, qkd_two_hub, connectivity, overhead.

Key physical defaults
---------------------
  emitter bare lifetime        940 ns
  Purcell factor               20   (lifetime 47 ns after enhancement)
  dephasing rate               2/lifetime (total linewidth 5x the
                               lifetime limit)
  fibre attenuation            0.2 dB/km
  switch-layer loss            1.5 dB per layer
  fibre light speed            200 km/ms
  electron / nuclear T2        2.1 ms / 1.1 s (repeater experiments
                               default to no decay unless configured)
  operating temperature        1-2 K (documentation only; not a model
                               parameter)

Sweepable parameter paths ([sweep] block)
-----------------------------------------
  emitters.<name>.{{bare_lifetime_ns, purcell_factor, dephasing_rate_mhz,
                   detuning_mhz, efficiency, cyclicity,
                   spectral_diffusion_mhz}}
  herald.{{dt_max_ns, window_ns, dark_count_prob, depolarizing_floor}}
  gen1.fibre_km, gen1.link.{{fidelity, success_prob}}
  gen2.fibre_km, gen2.link.{{fidelity, success_prob}}
  qkd.{{mean_photon_number, channel_transmission, channel_bitflip_prob,
       channel_dephasing_prob, spin_photon_efficiency,
       inter_hub_fibre_km}}, qkd.link.{{fidelity, success_prob}}
  connectivity.gate_fidelity
(bell_pair_curve sweeps dt_max natively through its thresholds_ns list.)

Full default document
---------------------
{toml}"
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let cfg = parse_config("experiment = \"bell_pair_curve\"").unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.trials, 1);
        assert_eq!(cfg.output_path, "results.csv");
        assert!(cfg.emitters.contains_key("default"));
        assert!((cfg.emitters["default"].bare_lifetime_ns - 940.0).abs() < 1e-12);
        assert!((cfg.emitters["default"].purcell_factor - 20.0).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_field_is_named() {
        let text = r#"
experiment = "bell_pair_curve"
[emitters.alice]
efficiency = 1.5
"#;
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("emitters.alice"), "{err}");
        assert!(err.contains("efficiency"), "{err}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"
experiment = "bell_pair_curve"
not_a_real_key = 3
"#;
        assert!(matches!(
            parse_config(text).unwrap_err(),
            ConfigError::Syntax(_)
        ));
    }

    #[test]
    fn threshold_sweep_round_trips() {
        let text = r#"
experiment = "bell_pair_curve"
trials = 50000

[bell_pair_curve]
thresholds_ns = [1, 2, 4, 8, 16, 32, 64, 128, 256, 512]
window_ns = 1000.0
"#;
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.bell_pair_curve.thresholds_ns.len(), 10);
        let serialized = toml::to_string(&cfg).unwrap();
        let reparsed = parse_config(&serialized).unwrap();
        assert_eq!(cfg, reparsed);
    }

    #[test]
    fn sweep_path_dry_run_catches_typos() {
        let text = r#"
experiment = "repeater_gen1"
[sweep]
parameter = "gen1.link.fidelty"
values = [0.9]
"#;
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("not a sweepable field"), "{err}");
    }

    #[test]
    fn sweep_on_bell_pair_curve_is_rejected() {
        let text = r#"
experiment = "bell_pair_curve"
[sweep]
parameter = "herald.dt_max_ns"
values = [10.0]
"#;
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("natively"), "{err}");
    }

    #[test]
    fn gen1_requires_power_of_two_links() {
        let text = r#"
experiment = "repeater_gen1"
[gen1]
links = 3
"#;
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("power of two"), "{err}");
    }

    #[test]
    fn photonic_link_resolves_named_emitters() {
        let text = r#"
experiment = "repeater_gen1"
[emitters.alice]
detuning_mhz = 1.0
[gen1]
links = 2
[gen1.link]
kind = "photonic"
emitter_a = "alice"
emitter_b = "bob"
"#;
        let err = parse_config(text).unwrap_err().to_string();
        assert!(err.contains("unknown emitter 'bob'"), "{err}");
    }

    #[test]
    fn schema_mentions_paper_defaults() {
        let schema = schema_reference();
        assert!(schema.contains("940 ns"));
        assert!(schema.contains("0.2 dB/km"));
        assert!(schema.contains("1.5 dB"));
        assert!(schema.contains("1-2 K"));
    }
}
