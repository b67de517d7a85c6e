//! Photon emission, two-photon interference, and heralded entanglement
//! attempts.
//!
//! The interference model is exponential wavepackets with static detuning and
//! pure dephasing: interfering photons detected a time `dt` apart have
//! visibility
//!
//! ```text
//! V(dt) = (2 √(τa τb) / (τa + τb)) · exp(−(γa+γb)|dt|) · cos(2π Δν dt)
//! ```
//!
//! where τ are post-Purcell lifetimes, γ pure dephasing rates and Δν the
//! detuning difference. A heralded pair picks up a phase-flip-only error with
//! fidelity (1 + V)/2, so tightening the accepted |dt| trades generation rate
//! for pair fidelity.
//!
//! Unit conventions: times in ns; `dephasing_rate_mhz` is a coherence decay
//! rate in 1/µs (1 MHz ≙ 1e-3/ns); `detuning_mhz` is a frequency offset in
//! MHz, converted to angular frequency internally.

use crate::entanglement::{BellCoeffs, BellState};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;
use thiserror::Error;

/// 1 MHz expressed as a rate per nanosecond.
const MHZ_TO_PER_NS: f64 = 1e-3;

#[derive(Debug, Error, PartialEq)]
pub enum PhotonicsError {
    #[error("invalid emitter parameters: {0}")]
    InvalidEmitter(String),
    #[error("invalid herald configuration: {0}")]
    InvalidHerald(String),
    #[error("threshold list must be nonempty and sorted ascending")]
    BadThresholds,
}

/// Optical properties of one spin-photon interface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmitterParams {
    /// Excited-state lifetime before any cavity enhancement, ns.
    pub bare_lifetime_ns: f64,
    /// Purcell factor; divides the bare lifetime.
    pub purcell_factor: f64,
    /// Pure dephasing rate γ, MHz (coherence decays as exp(−γ t)).
    pub dephasing_rate_mhz: f64,
    /// Static frequency offset from the common reference, MHz.
    pub detuning_mhz: f64,
    /// End-to-end photon collection + detection probability per emission.
    pub efficiency: f64,
    /// Probability the spin state survives one optical cycle.
    pub cyclicity: f64,
    /// Std-dev of the per-attempt Gaussian detuning resample, MHz.
    pub spectral_diffusion_mhz: f64,
}

impl Default for EmitterParams {
    /// Projected system parameters: 940 ns bare lifetime, Purcell factor 20,
    /// and an instantaneous linewidth 5× the lifetime limit (γ = 2/τ).
    fn default() -> Self {
        let bare = 940.0;
        let purcell = 20.0;
        let tau = bare / purcell;
        Self {
            bare_lifetime_ns: bare,
            purcell_factor: purcell,
            dephasing_rate_mhz: 2.0 / tau / MHZ_TO_PER_NS,
            detuning_mhz: 0.0,
            efficiency: 1.0,
            cyclicity: 1.0,
            spectral_diffusion_mhz: 0.0,
        }
    }
}

impl EmitterParams {
    /// Lifetime after Purcell reduction, ns.
    pub fn lifetime_ns(&self) -> f64 {
        self.bare_lifetime_ns / self.purcell_factor
    }

    pub fn validate(&self) -> Result<(), PhotonicsError> {
        let err = |msg: String| Err(PhotonicsError::InvalidEmitter(msg));
        if !self.bare_lifetime_ns.is_finite() || self.bare_lifetime_ns <= 0.0 {
            return err(format!("bare_lifetime_ns = {}", self.bare_lifetime_ns));
        }
        if !self.purcell_factor.is_finite() || self.purcell_factor < 1.0 {
            return err(format!("purcell_factor = {}", self.purcell_factor));
        }
        if !self.dephasing_rate_mhz.is_finite() || self.dephasing_rate_mhz < 0.0 {
            return err(format!("dephasing_rate_mhz = {}", self.dephasing_rate_mhz));
        }
        if !self.detuning_mhz.is_finite() {
            return err(format!("detuning_mhz = {}", self.detuning_mhz));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return err(format!("efficiency = {}", self.efficiency));
        }
        if !(0.0..=1.0).contains(&self.cyclicity) || self.cyclicity == 0.0 {
            return err(format!("cyclicity = {}", self.cyclicity));
        }
        if !self.spectral_diffusion_mhz.is_finite() || self.spectral_diffusion_mhz < 0.0 {
            return err(format!(
                "spectral_diffusion_mhz = {}",
                self.spectral_diffusion_mhz
            ));
        }
        Ok(())
    }

    /// Copy with `efficiency` scaled by an external transmission factor.
    pub fn with_extra_loss(&self, transmission: f64) -> Self {
        Self {
            efficiency: self.efficiency * transmission,
            ..*self
        }
    }
}

/// Detection-window and herald-acceptance settings for one attempt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeraldConfig {
    /// Maximum accepted |detection-time difference|, ns.
    pub dt_max_ns: f64,
    /// Detection window per round, ns.
    pub window_ns: f64,
    /// Dark-count probability per detector per round.
    pub dark_count_prob: f64,
    /// Extra depolarizing mixed into every heralded pair.
    pub depolarizing_floor: f64,
}

impl Default for HeraldConfig {
    fn default() -> Self {
        Self {
            dt_max_ns: 100.0,
            window_ns: 2000.0,
            dark_count_prob: 0.0,
            depolarizing_floor: 0.0,
        }
    }
}

impl HeraldConfig {
    pub fn validate(&self) -> Result<(), PhotonicsError> {
        let err = |msg: String| Err(PhotonicsError::InvalidHerald(msg));
        if !self.dt_max_ns.is_finite() || self.dt_max_ns <= 0.0 {
            return err(format!("dt_max_ns = {}", self.dt_max_ns));
        }
        if !self.window_ns.is_finite() || self.window_ns <= 0.0 {
            return err(format!("window_ns = {}", self.window_ns));
        }
        if self.dt_max_ns > self.window_ns {
            return err(format!(
                "dt_max_ns {} exceeds window_ns {}",
                self.dt_max_ns, self.window_ns
            ));
        }
        if !(0.0..=1.0).contains(&self.dark_count_prob) {
            return err(format!("dark_count_prob = {}", self.dark_count_prob));
        }
        if !(0.0..=1.0).contains(&self.depolarizing_floor) {
            return err(format!("depolarizing_floor = {}", self.depolarizing_floor));
        }
        Ok(())
    }
}

/// A pair heralded by one successful attempt, before ledger registration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeraldedPair {
    pub coeffs: BellCoeffs,
    pub state: BellState,
}

/// Result of one two-round entanglement attempt.
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptOutcome {
    pub success: bool,
    /// Detection-time difference between the two rounds' clicks (set on success).
    pub dt_ns: Option<f64>,
    pub heralded_pair: Option<HeraldedPair>,
    /// Detector clicks registered in each round (dark counts included).
    pub clicks_per_round: [u8; 2],
}

/// Two-photon interference visibility at detection-time difference `dt_ns`.
pub fn hom_visibility(dt_ns: f64, a: &EmitterParams, b: &EmitterParams) -> f64 {
    visibility_with_detunings(dt_ns, a, b, a.detuning_mhz, b.detuning_mhz)
}

fn visibility_with_detunings(
    dt_ns: f64,
    a: &EmitterParams,
    b: &EmitterParams,
    det_a_mhz: f64,
    det_b_mhz: f64,
) -> f64 {
    let (ta, tb) = (a.lifetime_ns(), b.lifetime_ns());
    let overlap = 2.0 * (ta * tb).sqrt() / (ta + tb);
    let gamma_per_ns = (a.dephasing_rate_mhz + b.dephasing_rate_mhz) * MHZ_TO_PER_NS;
    let delta_omega = TAU * (det_a_mhz - det_b_mhz) * MHZ_TO_PER_NS;
    overlap * (-gamma_per_ns * dt_ns.abs()).exp() * (delta_omega * dt_ns).cos()
}

/// Fidelity of the pair heralded by clicks `dt_ns` apart: (1 + V)/2.
pub fn herald_fidelity(dt_ns: f64, a: &EmitterParams, b: &EmitterParams) -> f64 {
    ((1.0 + hom_visibility(dt_ns, a, b)) / 2.0).clamp(0.0, 1.0)
}

/// Bell-diagonal coefficients of a heralded pair: phase-flip-only error
/// (F, 0, 0, 1−F), optionally mixed with a depolarizing floor.
pub fn herald_coeffs(fidelity: f64, depolarizing_floor: f64) -> BellCoeffs {
    let f = fidelity.clamp(0.0, 1.0);
    let base = BellCoeffs::new([f, 0.0, 0.0, 1.0 - f]);
    base.mix_depolarizing(depolarizing_floor)
}

/// Success probability of one attempt in the loss-only limit
/// (loose threshold, window ≫ lifetimes): η_a η_b (c_a c_b)² / 2.
pub fn ideal_success_probability(a: &EmitterParams, b: &EmitterParams) -> f64 {
    0.5 * a.efficiency
        * b.efficiency
        * (a.cyclicity * a.cyclicity)
        * (b.cyclicity * b.cyclicity)
}

/// One click in one round.
#[derive(Debug, Clone, Copy)]
struct Click {
    detector: u8,
    time_ns: f64,
    dark: bool,
}

#[derive(Debug, Clone, Copy)]
struct RoundOutcome {
    /// Set when exactly one detector registered clicks.
    accepted: Option<Click>,
    clicks: u8,
}

/// Everything sampled during one attempt, before any dt threshold is applied.
/// `rate_fidelity_curve` reuses one stream of these across nested thresholds.
#[derive(Debug, Clone, Copy)]
pub struct RawAttempt {
    /// Set when both rounds had exactly one clicking detector.
    dt_ns: Option<f64>,
    same_detector: bool,
    /// A dark count or a same-round two-photon branch produced the herald.
    false_herald: bool,
    fidelity: f64,
    clicks_per_round: [u8; 2],
}

impl RawAttempt {
    /// Applies a dt threshold to the sampled click record.
    pub fn resolve(&self, dt_max_ns: f64, depolarizing_floor: f64) -> AttemptOutcome {
        match self.dt_ns {
            Some(dt) if dt.abs() <= dt_max_ns => {
                let coeffs = if self.false_herald {
                    BellCoeffs::new([0.25; 4])
                } else {
                    herald_coeffs(self.fidelity, depolarizing_floor)
                };
                let state = if self.same_detector {
                    BellState::PsiPlus
                } else {
                    BellState::PsiMinus
                };
                AttemptOutcome {
                    success: true,
                    dt_ns: Some(dt),
                    heralded_pair: Some(HeraldedPair { coeffs, state }),
                    clicks_per_round: self.clicks_per_round,
                }
            }
            _ => AttemptOutcome {
                success: false,
                dt_ns: None,
                heralded_pair: None,
                clicks_per_round: self.clicks_per_round,
            },
        }
    }

    pub fn heralded_within(&self, dt_max_ns: f64) -> bool {
        matches!(self.dt_ns, Some(dt) if dt.abs() <= dt_max_ns)
    }

    pub fn fidelity(&self) -> f64 {
        if self.false_herald {
            0.25
        } else {
            self.fidelity
        }
    }
}

/// Samples the click record of one two-round attempt.
///
/// Per attempt the two spins are prepared in superposition, giving four
/// equally likely emission branches; the spin flip between rounds
/// anticorrelates emission across rounds. Draw order is fixed so paired-seed
/// comparisons across parameter sets stay coupled: every pulsed-and-bright
/// emitter consumes the same four draws whether or not its photon survives.
pub fn sample_raw_attempt<R: Rng + ?Sized>(
    a: &EmitterParams,
    b: &EmitterParams,
    h: &HeraldConfig,
    rng: &mut R,
) -> RawAttempt {
    let mut det_a = a.detuning_mhz;
    let mut det_b = b.detuning_mhz;
    if a.spectral_diffusion_mhz > 0.0 {
        let n = Normal::new(a.detuning_mhz, a.spectral_diffusion_mhz).unwrap();
        det_a = n.sample(rng);
    }
    if b.spectral_diffusion_mhz > 0.0 {
        let n = Normal::new(b.detuning_mhz, b.spectral_diffusion_mhz).unwrap();
        det_b = n.sample(rng);
    }

    // Branch: bit 1 = emitter a bright in round 1, bit 0 = emitter b.
    let branch: u8 = rng.gen_range(0..4);
    let bright_round1 = [(branch >> 1) & 1 == 1, branch & 1 == 1];
    let wrong_branch = bright_round1[0] == bright_round1[1];

    let emitters = [a, b];
    let mut rounds = [None::<RoundOutcome>; 2];
    for (round, slot) in rounds.iter_mut().enumerate() {
        let mut clicks: Vec<Click> = Vec::with_capacity(2);
        for (idx, em) in emitters.iter().enumerate() {
            let bright = bright_round1[idx] == (round == 0);
            if !bright {
                continue;
            }
            let u_detect: f64 = rng.gen();
            let u_cycle: f64 = rng.gen();
            let u_time: f64 = rng.gen();
            let u_which: f64 = rng.gen();
            // The spin is pulsed in both rounds; both cycle survivals are
            // folded into this photon's budget.
            let survives = u_detect < em.efficiency && u_cycle < em.cyclicity * em.cyclicity;
            if !survives {
                continue;
            }
            let t = -em.lifetime_ns() * (1.0 - u_time).ln();
            if t > h.window_ns {
                continue;
            }
            clicks.push(Click {
                detector: (u_which < 0.5) as u8,
                time_ns: t,
                dark: false,
            });
        }
        if h.dark_count_prob > 0.0 {
            for detector in 0..2u8 {
                if rng.gen::<f64>() < h.dark_count_prob {
                    let t: f64 = rng.gen::<f64>() * h.window_ns;
                    clicks.push(Click {
                        detector,
                        time_ns: t,
                        dark: true,
                    });
                }
            }
        }
        let hit0 = clicks.iter().any(|c| c.detector == 0);
        let hit1 = clicks.iter().any(|c| c.detector == 1);
        let accepted = if hit0 != hit1 {
            // Non-number-resolving detectors: the round reports which
            // detector fired and its earliest click time.
            clicks
                .iter()
                .copied()
                .min_by(|x, y| x.time_ns.total_cmp(&y.time_ns))
        } else {
            None
        };
        *slot = Some(RoundOutcome {
            accepted,
            clicks: clicks.len() as u8,
        });
    }

    let r1 = rounds[0].unwrap();
    let r2 = rounds[1].unwrap();
    let clicks_per_round = [r1.clicks, r2.clicks];
    match (r1.accepted, r2.accepted) {
        (Some(c1), Some(c2)) => {
            let dt = c2.time_ns - c1.time_ns;
            let false_herald = wrong_branch || c1.dark || c2.dark;
            let vis = visibility_with_detunings(dt, a, b, det_a, det_b);
            RawAttempt {
                dt_ns: Some(dt),
                same_detector: c1.detector == c2.detector,
                false_herald,
                fidelity: ((1.0 + vis) / 2.0).clamp(0.0, 1.0),
                clicks_per_round,
            }
        }
        _ => RawAttempt {
            dt_ns: None,
            same_detector: false,
            false_herald: false,
            fidelity: 0.0,
            clicks_per_round,
        },
    }
}

/// One heralded entanglement attempt between two emitters.
///
/// Success requires exactly one clicking detector in each round and a
/// detection-time difference within `h.dt_max_ns`; failure is a normal
/// outcome, not an error.
pub fn barrett_kok_attempt<R: Rng + ?Sized>(
    a: &EmitterParams,
    b: &EmitterParams,
    h: &HeraldConfig,
    rng: &mut R,
) -> AttemptOutcome {
    let raw = sample_raw_attempt(a, b, h, rng);
    let out = raw.resolve(h.dt_max_ns, h.depolarizing_floor);
    if out.success {
        debug_assert_eq!(out.clicks_per_round, [1, 1]);
    }
    out
}

/// One point of the rate/fidelity tradeoff curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdPoint {
    pub dt_max_ns: f64,
    pub rate: f64,
    /// Mean heralded fidelity; `None` when no attempt was accepted.
    pub mean_fidelity: Option<f64>,
}

/// Sweeps the heralding threshold over a single shared stream of attempts.
///
/// Acceptance sets are nested across thresholds by construction, so the rate
/// column is exactly monotone non-decreasing in `dt_max`.
pub fn rate_fidelity_curve<R: Rng + ?Sized>(
    a: &EmitterParams,
    b: &EmitterParams,
    window_ns: f64,
    depolarizing_floor: f64,
    thresholds: &[f64],
    trials: u64,
    rng: &mut R,
) -> Result<Vec<ThresholdPoint>, PhotonicsError> {
    if thresholds.is_empty() || thresholds.windows(2).any(|w| w[0] > w[1]) {
        return Err(PhotonicsError::BadThresholds);
    }
    let h = HeraldConfig {
        dt_max_ns: window_ns,
        window_ns,
        dark_count_prob: 0.0,
        depolarizing_floor,
    };
    h.validate()?;
    let mut accepted = vec![0u64; thresholds.len()];
    let mut fid_sum = vec![0.0f64; thresholds.len()];
    for _ in 0..trials {
        let raw = sample_raw_attempt(a, b, &h, rng);
        if let Some(dt) = raw.dt_ns {
            let fid = herald_coeffs(raw.fidelity(), depolarizing_floor).fidelity();
            for (i, &thr) in thresholds.iter().enumerate() {
                if dt.abs() <= thr {
                    accepted[i] += 1;
                    fid_sum[i] += fid;
                }
            }
        }
    }
    Ok(thresholds
        .iter()
        .enumerate()
        .map(|(i, &thr)| ThresholdPoint {
            dt_max_ns: thr,
            rate: accepted[i] as f64 / trials as f64,
            mean_fidelity: (accepted[i] > 0).then(|| fid_sum[i] / accepted[i] as f64),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use crate::SimRng;

    fn quiet_emitter() -> EmitterParams {
        EmitterParams {
            dephasing_rate_mhz: 0.0,
            ..EmitterParams::default()
        }
    }

    #[test]
    fn visibility_is_one_at_zero_delay_for_equal_lifetimes() {
        let a = EmitterParams::default();
        let b = EmitterParams {
            detuning_mhz: 3.0,
            ..a
        };
        assert!((hom_visibility(0.0, &a, &b) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_photons_always_interfere_perfectly() {
        let a = quiet_emitter();
        for dt in [-500.0, -3.0, 0.0, 17.0, 1200.0] {
            assert!((hom_visibility(dt, &a, &a) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn visibility_closed_form_point() {
        // γa+γb = 1 MHz, Δν = 2 MHz, dt = 100 ns:
        // V = exp(-1e-3·100)·cos(2π·2e-3·100)
        let a = EmitterParams {
            dephasing_rate_mhz: 0.4,
            detuning_mhz: 1.0,
            ..EmitterParams::default()
        };
        let b = EmitterParams {
            dephasing_rate_mhz: 0.6,
            detuning_mhz: -1.0,
            ..EmitterParams::default()
        };
        let expect = (-0.1f64).exp() * (TAU * 0.2).cos();
        assert!((hom_visibility(100.0, &a, &b) - expect).abs() < 1e-12);
    }

    #[test]
    fn visibility_bounded_and_even() {
        let a = EmitterParams {
            dephasing_rate_mhz: 3.0,
            detuning_mhz: 5.0,
            ..EmitterParams::default()
        };
        let b = EmitterParams {
            dephasing_rate_mhz: 1.0,
            detuning_mhz: -2.0,
            ..EmitterParams::default()
        };
        for dt in [-950.0, -10.0, 0.0, 0.5, 333.0] {
            let v = hom_visibility(dt, &a, &b);
            assert!(v.abs() <= 1.0 + 1e-12);
            assert!((v - hom_visibility(-dt, &a, &b)).abs() < 1e-12);
        }
    }

    #[test]
    fn unequal_lifetimes_penalize_overlap() {
        let a = quiet_emitter();
        let b = EmitterParams {
            purcell_factor: 5.0,
            ..quiet_emitter()
        };
        let (ta, tb) = (a.lifetime_ns(), b.lifetime_ns());
        let expect = 2.0 * (ta * tb).sqrt() / (ta + tb);
        assert!((hom_visibility(0.0, &a, &b) - expect).abs() < 1e-12);
        assert!(expect < 1.0);
    }

    #[test]
    fn herald_fidelity_extremes() {
        let a = quiet_emitter();
        assert!((herald_fidelity(0.0, &a, &a) - 1.0).abs() < 1e-12);

        // cos term = −1 and no dephasing: heralds the orthogonal Bell state.
        let b = EmitterParams {
            detuning_mhz: 5.0,
            ..quiet_emitter()
        };
        let dt = 0.5 / (5.0 * MHZ_TO_PER_NS); // phase = π
        assert!(herald_fidelity(dt, &a, &b) < 1e-12);
    }

    #[test]
    fn success_probability_zero_without_photons() {
        let a = EmitterParams {
            efficiency: 0.0,
            ..EmitterParams::default()
        };
        let b = EmitterParams::default();
        let h = HeraldConfig::default();
        let mut rng = SimRng::seed_from_u64(5);
        for _ in 0..2000 {
            assert!(!barrett_kok_attempt(&a, &b, &h, &mut rng).success);
        }
    }

    /// Enumerates the two-round detection patterns at η = 1, cyclicity 1,
    /// ignoring window truncation: only the two anticorrelated branches
    /// produce one click per round, so the herald probability is 1/2.
    #[test]
    fn pattern_enumeration_gives_half() {
        let mut herald_mass = 0.0f64;
        for branch in 0..4u8 {
            let bright1 = [(branch >> 1) & 1 == 1, branch & 1 == 1];
            let round1 = bright1.iter().filter(|&&x| x).count();
            let round2 = 2 - round1;
            // With η = 1 every emitted photon is detected, so a round has
            // exactly one click iff exactly one emitter is bright.
            if round1 == 1 && round2 == 1 {
                herald_mass += 0.25;
            }
        }
        assert!((herald_mass - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unit_efficiency_heralds_half_the_time() {
        let a = quiet_emitter();
        let h = HeraldConfig {
            dt_max_ns: 100_000.0,
            window_ns: 100_000.0,
            ..HeraldConfig::default()
        };
        let mut rng = SimRng::seed_from_u64(11);
        let trials = 100_000u64;
        let mut hits = 0u64;
        for _ in 0..trials {
            let out = barrett_kok_attempt(&a, &a, &h, &mut rng);
            if out.success {
                hits += 1;
                assert_eq!(out.clicks_per_round, [1, 1]);
            }
        }
        let rate = hits as f64 / trials as f64;
        let sigma = (0.5 * 0.5 / trials as f64).sqrt();
        assert!(
            (rate - 0.5).abs() < 3.0 * sigma,
            "rate {rate} outside 3σ of 0.5"
        );
    }

    #[test]
    fn low_efficiency_rate_matches_eta_squared_over_two() {
        let a = EmitterParams {
            efficiency: 0.1,
            ..quiet_emitter()
        };
        let h = HeraldConfig {
            dt_max_ns: 100_000.0,
            window_ns: 100_000.0,
            ..HeraldConfig::default()
        };
        let mut rng = SimRng::seed_from_u64(23);
        let trials = 1_000_000u64;
        let mut hits = 0u64;
        for _ in 0..trials {
            if barrett_kok_attempt(&a, &a, &h, &mut rng).success {
                hits += 1;
            }
        }
        let p = ideal_success_probability(&a, &a);
        assert!((p - 0.005).abs() < 1e-15);
        let rate = hits as f64 / trials as f64;
        let sigma = (p * (1.0 - p) / trials as f64).sqrt();
        assert!((rate - p).abs() < 3.0 * sigma, "rate {rate} vs {p}");
    }

    #[test]
    fn cyclicity_strictly_reduces_success_with_paired_seeds() {
        let ideal = quiet_emitter();
        let lossy = EmitterParams {
            cyclicity: 0.9,
            ..quiet_emitter()
        };
        let h = HeraldConfig {
            dt_max_ns: 100_000.0,
            window_ns: 100_000.0,
            ..HeraldConfig::default()
        };
        let trials = 20_000;
        let run = |a: &EmitterParams, seed: u64| -> u64 {
            let mut rng = SimRng::seed_from_u64(seed);
            (0..trials)
                .filter(|_| barrett_kok_attempt(a, a, &h, &mut rng).success)
                .count() as u64
        };
        let full = run(&ideal, 31);
        let reduced = run(&lossy, 31);
        assert!(reduced < full, "cyclicity<1 must herald less: {reduced} vs {full}");
        // Coupled draws make the success set a subset, not just smaller.
        let mut rng_a = SimRng::seed_from_u64(31);
        let mut rng_b = SimRng::seed_from_u64(31);
        for _ in 0..trials {
            let s_full = barrett_kok_attempt(&ideal, &ideal, &h, &mut rng_a).success;
            let s_red = barrett_kok_attempt(&lossy, &lossy, &h, &mut rng_b).success;
            assert!(!s_red || s_full);
        }
    }

    #[test]
    fn curve_rate_is_monotone_and_perfect_emitters_stay_at_unit_fidelity() {
        let a = quiet_emitter();
        let thresholds = [5.0, 20.0, 80.0, 320.0, 2000.0];
        let mut rng = SimRng::seed_from_u64(41);
        let points = rate_fidelity_curve(&a, &a, 2000.0, 0.0, &thresholds, 20_000, &mut rng)
            .unwrap();
        for w in points.windows(2) {
            assert!(w[0].rate <= w[1].rate);
        }
        for p in &points {
            if let Some(f) = p.mean_fidelity {
                assert!((f - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn widening_thresholds_never_raise_mean_fidelity_for_mismatched_emitters() {
        let a = EmitterParams {
            detuning_mhz: 1.0,
            dephasing_rate_mhz: 1.0,
            ..EmitterParams::default()
        };
        let b = EmitterParams {
            detuning_mhz: -1.0,
            dephasing_rate_mhz: 1.0,
            ..EmitterParams::default()
        };
        let thresholds = [10.0, 40.0, 120.0, 400.0];
        let mut rng = SimRng::seed_from_u64(59);
        let points =
            rate_fidelity_curve(&a, &b, 2000.0, 0.0, &thresholds, 200_000, &mut rng).unwrap();
        for w in points.windows(2) {
            let (f0, f1) = (w[0].mean_fidelity.unwrap(), w[1].mean_fidelity.unwrap());
            // 3σ slack for the Monte Carlo estimate of the mean.
            assert!(f1 <= f0 + 0.01, "fidelity rose from {f0} to {f1}");
        }
    }

    #[test]
    fn single_threshold_at_window_matches_attempt_rate() {
        let a = EmitterParams {
            efficiency: 0.4,
            ..quiet_emitter()
        };
        let h = HeraldConfig {
            dt_max_ns: 2000.0,
            window_ns: 2000.0,
            ..HeraldConfig::default()
        };
        let trials = 30_000u64;
        let mut rng = SimRng::seed_from_u64(77);
        let curve = rate_fidelity_curve(&a, &a, 2000.0, 0.0, &[2000.0], trials, &mut rng).unwrap();
        let mut rng = SimRng::seed_from_u64(77);
        let direct = (0..trials)
            .filter(|_| barrett_kok_attempt(&a, &a, &h, &mut rng).success)
            .count() as f64
            / trials as f64;
        assert!((curve[0].rate - direct).abs() < 1e-12);
    }

    #[test]
    fn empty_threshold_list_rejected() {
        let a = EmitterParams::default();
        let mut rng = SimRng::seed_from_u64(1);
        assert_eq!(
            rate_fidelity_curve(&a, &a, 2000.0, 0.0, &[], 10, &mut rng).unwrap_err(),
            PhotonicsError::BadThresholds
        );
    }

    #[test]
    fn dark_counts_produce_false_heralds_with_low_fidelity() {
        let a = EmitterParams {
            efficiency: 0.0,
            ..quiet_emitter()
        };
        let h = HeraldConfig {
            dt_max_ns: 2000.0,
            window_ns: 2000.0,
            dark_count_prob: 0.3,
            depolarizing_floor: 0.0,
        };
        let mut rng = SimRng::seed_from_u64(97);
        let mut heralds = 0;
        for _ in 0..20_000 {
            let out = barrett_kok_attempt(&a, &a, &h, &mut rng);
            if out.success {
                heralds += 1;
                let pair = out.heralded_pair.unwrap();
                assert!((pair.coeffs.fidelity() - 0.25).abs() < 1e-12);
            }
        }
        assert!(heralds > 0, "dark counts should fake some heralds");
    }
}
