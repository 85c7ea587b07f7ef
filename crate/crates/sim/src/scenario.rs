//! JSON scenario configuration: a declarative description of one link
//! (transmitter, channel, ring, detector, sifting policy, calibration
//! constants) that the engine turns into a runnable pipeline.

use ringdps_core::channel::{FewModeModel, FiberKind, FiberSpan};
use ringdps_core::detector::SpadParams;
use ringdps_core::keyproc::SecurityPolicy;
use ringdps_core::ring::RingSpectralSpec;
use ringdps_core::signal::SymbolFrame;
use ringdps_core::transmitter::{IdealTxParams, VcselParams};
use ringdps_core::{Result, SimError};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_reps")]
    pub n_repetitions: u64,
    pub frame: FrameConfig,
    pub transmitter: TransmitterConfig,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub ring: RingConfig,
    pub detector: DetectorConfig,
    #[serde(default)]
    pub sift: SiftSettings,
    #[serde(default)]
    pub policy: PolicySettings,
    #[serde(default)]
    pub calibration: CalibrationConfig,
}

fn default_seed() -> u64 {
    1
}

fn default_reps() -> u64 {
    100_000
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| SimError::config(format!("scenario: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialization cannot fail")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    pub rate_baud: f64,
    pub n_symbols: usize,
    #[serde(default = "default_duty")]
    pub duty: f64,
    #[serde(default = "default_mu")]
    pub mu: f64,
}

fn default_duty() -> f64 {
    0.9
}

fn default_mu() -> f64 {
    0.1
}

impl FrameConfig {
    pub fn build(&self, diff_bits: Vec<bool>) -> Result<SymbolFrame> {
        SymbolFrame::new(self.rate_baud, self.duty, self.mu, diff_bits)
    }
}

/// Transmitter selection: the MZM pulse carver + phase modulator chain, or
/// the directly modulated chirp-encoded VCSEL.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TransmitterConfig {
    IdealMzmPm {
        /// Carver extinction in dB; omitted means an ideal carver.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        carver_extinction_db: Option<f64>,
        #[serde(default)]
        phase_error_sigma: f64,
    },
    Vcsel {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bias_ma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        threshold_ma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chirp_ghz_per_ma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eo_bw_hz: Option<f64>,
    },
}

impl TransmitterConfig {
    pub fn ideal_params(&self) -> Option<IdealTxParams> {
        match self {
            TransmitterConfig::IdealMzmPm { carver_extinction_db, phase_error_sigma } => {
                Some(IdealTxParams {
                    carver_extinction_db: carver_extinction_db.unwrap_or(f64::INFINITY),
                    phase_error_sigma: *phase_error_sigma,
                })
            }
            TransmitterConfig::Vcsel { .. } => None,
        }
    }

    pub fn vcsel_params(&self) -> Option<VcselParams> {
        match self {
            TransmitterConfig::IdealMzmPm { .. } => None,
            TransmitterConfig::Vcsel { bias_ma, threshold_ma, chirp_ghz_per_ma, eo_bw_hz } => {
                let mut p = VcselParams::preset();
                if let Some(v) = bias_ma {
                    p.bias_ma = *v;
                }
                if let Some(v) = threshold_ma {
                    p.threshold_ma = *v;
                }
                if let Some(v) = chirp_ghz_per_ma {
                    p.chirp_ghz_per_ma = *v;
                }
                if let Some(v) = eo_bw_hz {
                    p.eo_bw_hz = *v;
                }
                Some(p)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    /// Budget-emulating VOA, dB.
    #[serde(default)]
    pub budget_db: f64,
    #[serde(default)]
    pub spans: Vec<SpanConfig>,
    #[serde(default)]
    pub few_mode: FewModeConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpanConfig {
    pub kind: FiberKindConfig,
    pub length_m: f64,
    #[serde(default = "default_alpha")]
    pub alpha_db_per_km: f64,
}

fn default_alpha() -> f64 {
    2.0
}

impl SpanConfig {
    pub fn to_span(&self) -> FiberSpan {
        FiberSpan {
            kind: self.kind.into(),
            length_m: self.length_m,
            alpha_db_per_km: self.alpha_db_per_km,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FiberKindConfig {
    Hi780,
    Smf28,
}

impl From<FiberKindConfig> for FiberKind {
    fn from(k: FiberKindConfig) -> Self {
        match k {
            FiberKindConfig::Hi780 => FiberKind::Hi780,
            FiberKindConfig::Smf28 => FiberKind::Smf28,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FewModeConfig {
    pub strip_loss_db: f64,
    pub h_per_m: f64,
    pub bg_cap: f64,
}

impl Default for FewModeConfig {
    fn default() -> Self {
        let m = FewModeModel::default();
        FewModeConfig { strip_loss_db: m.strip_loss_db, h_per_m: m.h_per_m, bg_cap: m.bg_cap }
    }
}

impl FewModeConfig {
    pub fn to_model(&self) -> FewModeModel {
        FewModeModel {
            strip_loss_db: self.strip_loss_db,
            h_per_m: self.h_per_m,
            bg_cap: self.bg_cap,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RingConfig {
    pub fsr_ghz: f64,
    pub fwhm_ghz: f64,
    pub extinction_db: f64,
    pub il_db: f64,
    #[serde(default)]
    pub detune_hz: f64,
}

impl Default for RingConfig {
    fn default() -> Self {
        let s = RingSpectralSpec::measured();
        RingConfig {
            fsr_ghz: s.fsr_hz / 1e9,
            fwhm_ghz: s.fwhm_hz / 1e9,
            extinction_db: s.extinction_db,
            il_db: s.il_db,
            detune_hz: 0.0,
        }
    }
}

impl RingConfig {
    pub fn spectral_spec(&self) -> RingSpectralSpec {
        RingSpectralSpec {
            fsr_hz: self.fsr_ghz * 1e9,
            fwhm_hz: self.fwhm_ghz * 1e9,
            extinction_db: self.extinction_db,
            il_db: self.il_db,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    /// One of `spad-g`, `spad-r`, `ingaas`; omitted requires explicit fields.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficiency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dark_cps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dead_time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jitter_sigma_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resolution_s: Option<f64>,
}

impl DetectorConfig {
    pub fn preset(name: &str) -> Self {
        DetectorConfig {
            preset: Some(name.to_string()),
            efficiency: None,
            dark_cps: None,
            dead_time_s: None,
            jitter_sigma_s: None,
            resolution_s: None,
        }
    }

    pub fn to_params(&self) -> Result<SpadParams> {
        let mut p = match self.preset.as_deref() {
            Some("spad-g") => SpadParams::spad_g(),
            Some("spad-r") => SpadParams::spad_r(),
            Some("ingaas") => SpadParams::ingaas(),
            Some(other) => {
                return Err(SimError::config(format!(
                    "unknown detector preset '{other}' (expected spad-g, spad-r, or ingaas)"
                )))
            }
            None => {
                match (self.efficiency, self.dark_cps, self.dead_time_s) {
                    (Some(eff), Some(dark), Some(dead)) => SpadParams {
                        efficiency: eff,
                        dark_cps: dark,
                        dead_time_s: dead,
                        jitter_sigma_s: 100e-12,
                        resolution_s: 1e-12,
                    },
                    _ => {
                        return Err(SimError::config(
                            "detector needs a preset or explicit efficiency, dark_cps, \
                             and dead_time_s",
                        ))
                    }
                }
            }
        };
        if let Some(v) = self.efficiency {
            p.efficiency = v;
        }
        if let Some(v) = self.dark_cps {
            p.dark_cps = v;
        }
        if let Some(v) = self.dead_time_s {
            p.dead_time_s = v;
        }
        if let Some(v) = self.jitter_sigma_s {
            p.jitter_sigma_s = v;
        }
        if let Some(v) = self.resolution_s {
            p.resolution_s = v;
        }
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiftSettings {
    pub window_fraction: f64,
}

impl Default for SiftSettings {
    fn default() -> Self {
        SiftSettings { window_fraction: 0.20 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySettings {
    pub qber_threshold: f64,
    pub aes_key_bits: f64,
    pub chunk_bytes: f64,
}

impl Default for PolicySettings {
    fn default() -> Self {
        let p = SecurityPolicy::default();
        PolicySettings {
            qber_threshold: p.qber_threshold,
            aes_key_bits: p.aes_key_bits,
            chunk_bytes: p.chunk_bytes,
        }
    }
}

impl PolicySettings {
    pub fn to_policy(&self) -> SecurityPolicy {
        SecurityPolicy {
            qber_threshold: self.qber_threshold,
            aes_key_bits: self.aes_key_bits,
            chunk_bytes: self.chunk_bytes,
        }
    }
}

/// The two scenario calibration constants: a residual lumped loss standing
/// in for unlisted coupling losses, and a uniform incoherent photon rate
/// proportional to the signal that models demodulation leakage.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    #[serde(default)]
    pub residual_loss_db: f64,
    #[serde(default)]
    pub leak_fraction: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_json() -> String {
        r#"{
            "frame": {"rate_baud": 5e8, "n_symbols": 64},
            "transmitter": {"type": "ideal-mzm-pm"},
            "detector": {"preset": "spad-r"}
        }"#
        .to_string()
    }

    #[test]
    fn minimal_scenario_parses_with_defaults() {
        let cfg = ScenarioConfig::from_json(&minimal_json()).unwrap();
        assert_eq!(cfg.seed, 1);
        assert_eq!(cfg.frame.duty, 0.9);
        assert_eq!(cfg.frame.mu, 0.1);
        assert_eq!(cfg.sift.window_fraction, 0.20);
        assert_eq!(cfg.policy.qber_threshold, 0.05);
        assert_eq!(cfg.calibration.leak_fraction, 0.0);
        let spad = cfg.detector.to_params().unwrap();
        assert_eq!(spad.efficiency, 0.42);
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = r#"{
            "frame": {"rate_baud": 5e8, "n_symbols": 64, "shape": "gauss"},
            "transmitter": {"type": "ideal-mzm-pm"},
            "detector": {"preset": "spad-r"}
        }"#;
        assert!(ScenarioConfig::from_json(bad).is_err());
    }

    #[test]
    fn unknown_preset_rejected() {
        let mut cfg = ScenarioConfig::from_json(&minimal_json()).unwrap();
        cfg.detector.preset = Some("pmt".into());
        assert!(cfg.detector.to_params().is_err());
    }

    #[test]
    fn explicit_detector_overrides_preset() {
        let mut cfg = ScenarioConfig::from_json(&minimal_json()).unwrap();
        cfg.detector.efficiency = Some(0.2);
        let p = cfg.detector.to_params().unwrap();
        assert_eq!(p.efficiency, 0.2);
        assert_eq!(p.dark_cps, 611.0);
    }

    #[test]
    fn round_trip_json() {
        let cfg = ScenarioConfig::from_json(&minimal_json()).unwrap();
        let back = ScenarioConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back.frame.rate_baud, cfg.frame.rate_baud);
        assert_eq!(back.to_json(), cfg.to_json());
    }

    #[test]
    fn vcsel_transmitter_params() {
        let json = r#"{
            "frame": {"rate_baud": 1e8, "n_symbols": 64},
            "transmitter": {"type": "vcsel", "eo_bw_hz": 5e8},
            "detector": {"preset": "spad-g"}
        }"#;
        let cfg = ScenarioConfig::from_json(json).unwrap();
        let p = cfg.transmitter.vcsel_params().unwrap();
        assert_eq!(p.eo_bw_hz, 5e8);
        assert_eq!(p.bias_ma, 3.0);
        assert!(cfg.transmitter.ideal_params().is_none());
    }
}
