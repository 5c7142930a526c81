//! Experiment configuration: a single JSON document with a fixed schema.
//! Unknown keys are rejected so a typo in an experiment definition fails
//! loudly instead of silently running the defaults.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::WindowKind;
use crate::channel::ChannelProfile;
use crate::error::{Result, SimError};
use crate::modem::{ConstellationScheme, CyclicPrefixSpec, SubcarrierPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Psd,
    PaprCcdf,
    BerSweep,
    CfoSweep,
    CpSweep,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Psd => "psd",
            ExperimentKind::PaprCcdf => "papr_ccdf",
            ExperimentKind::BerSweep => "ber_sweep",
            ExperimentKind::CfoSweep => "cfo_sweep",
            ExperimentKind::CpSweep => "cp_sweep",
        }
    }
}

/// Which exceedance statistic a PAPR experiment tabulates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CcdfStatistic {
    /// Per-symbol peak/mean power ratio.
    #[default]
    SymbolPapr,
    /// Per-sample instantaneous power over the symbol mean.
    SampleMagnitude,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub num_taps: usize,
    pub cutoff: f64,
}

/// The AWGN stage setting: a fixed SNR in dB, the literal string `"off"`,
/// or absent (`null`), which means "off" except in a BER sweep where the
/// swept Eb/N0 supplies the noise level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SnrSetting {
    Db(f64),
    #[serde(rename = "off")]
    Off(OffMarker),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OffMarker {
    #[serde(rename = "off")]
    Off,
}

impl SnrSetting {
    pub fn db(self) -> Option<f64> {
        match self {
            SnrSetting::Db(v) => Some(v),
            SnrSetting::Off(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ImpairmentSpec {
    /// Normalized CFO (fraction of the subcarrier spacing).
    pub epsilon: f64,
    /// Wiener phase-noise increment std, radians per sample.
    pub phase_noise_sigma: f64,
    /// AWGN level; see [`SnrSetting`].
    pub snr_db: Option<SnrSetting>,
    /// Multipath taps as `[re, im]` pairs; `null` means identity channel.
    pub taps: Option<Vec<[f64; 2]>>,
}

impl Default for ImpairmentSpec {
    fn default() -> Self {
        ImpairmentSpec {
            epsilon: 0.0,
            phase_noise_sigma: 0.0,
            snr_db: None,
            taps: None,
        }
    }
}

impl ImpairmentSpec {
    /// Fixed SNR if one was configured; `None` means off or auto.
    pub fn fixed_snr_db(&self) -> Option<f64> {
        self.snr_db.and_then(|s| s.db())
    }

    /// True when the config says `"off"` explicitly.
    pub fn noise_forced_off(&self) -> bool {
        matches!(self.snr_db, Some(SnrSetting::Off(_)))
    }

    pub fn profile(&self) -> Result<Option<ChannelProfile>> {
        match &self.taps {
            None => Ok(None),
            Some(taps) => {
                let taps: Vec<Complex64> =
                    taps.iter().map(|t| Complex64::new(t[0], t[1])).collect();
                ChannelProfile::new(taps)
                    .map(Some)
                    .map_err(|e| SimError::config("impairments.taps", e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WelchSpec {
    /// `0` means "use 4 * n_fft".
    pub segment_len: usize,
    pub overlap: f64,
    pub window: WindowKind,
}

impl Default for WelchSpec {
    fn default() -> Self {
        WelchSpec {
            segment_len: 0,
            overlap: 0.5,
            window: WindowKind::Hann,
        }
    }
}

impl WelchSpec {
    pub fn resolved_segment_len(&self, n_fft: usize) -> usize {
        if self.segment_len == 0 {
            4 * n_fft
        } else {
            self.segment_len
        }
    }
}

/// One experiment definition. Fields not used by the selected experiment
/// keep their defaults; the per-experiment `validate` pass checks everything
/// that will actually run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub experiment: ExperimentKind,
    pub n_fft: usize,
    #[serde(default)]
    pub null_dc: bool,
    #[serde(default)]
    pub guard_nulls_per_side: usize,
    /// First scheme drives single-scheme experiments; PAPR runs them all.
    pub schemes: Vec<ConstellationScheme>,
    #[serde(default)]
    pub cp_len: usize,
    #[serde(default)]
    pub rolloff_len: usize,
    #[serde(default)]
    pub tx_filter: Option<FilterSpec>,
    #[serde(default)]
    pub impairments: ImpairmentSpec,
    /// Sweep points: Eb/N0 in dB (ber_sweep), epsilon (cfo_sweep) or guard
    /// lengths (cp_sweep).
    #[serde(default)]
    pub sweep: Option<Vec<f64>>,
    /// CCDF thresholds in dB (papr_ccdf). Accepted in any order, sorted
    /// ascending internally.
    #[serde(default)]
    pub thresholds_db: Option<Vec<f64>>,
    #[serde(default)]
    pub ccdf_statistic: CcdfStatistic,
    #[serde(default)]
    pub welch: WelchSpec,
    /// Trials per sweep point (OFDM symbols, or symbols per CCDF curve).
    pub n_trials: usize,
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn scheme(&self) -> ConstellationScheme {
        self.schemes[0]
    }

    pub fn plan(&self) -> Result<SubcarrierPlan> {
        SubcarrierPlan::new(self.n_fft, self.null_dc, self.guard_nulls_per_side)
            .map_err(|e| SimError::config("guard_nulls_per_side", e.to_string()))
    }

    pub fn cp_spec(&self) -> Result<CyclicPrefixSpec> {
        CyclicPrefixSpec::new(self.n_fft, self.cp_len)
            .map_err(|e| SimError::config("cp_len", e.to_string()))
    }

    /// Full validation pass: every referenced invariant is checked before
    /// any computation starts, and errors name the offending key.
    pub fn validate(&self) -> Result<()> {
        if self.n_fft < 2 || !self.n_fft.is_multiple_of(2) {
            return Err(SimError::config(
                "n_fft",
                format!("must be even and >= 2, got {}", self.n_fft),
            ));
        }
        if self.schemes.is_empty() {
            return Err(SimError::config("schemes", "at least one scheme required"));
        }
        if self.n_trials == 0 {
            return Err(SimError::config("n_trials", "must be >= 1"));
        }
        self.plan()?;
        self.cp_spec()?;
        if self.rolloff_len > self.cp_len {
            return Err(SimError::config(
                "rolloff_len",
                format!(
                    "roll-off {} exceeds guard length {}",
                    self.rolloff_len, self.cp_len
                ),
            ));
        }
        if let Some(filter) = &self.tx_filter {
            if filter.num_taps % 2 == 0 || filter.num_taps == 0 {
                return Err(SimError::config("tx_filter.num_taps", "must be odd"));
            }
            if !(filter.cutoff > 0.0 && filter.cutoff <= 0.5) {
                return Err(SimError::config("tx_filter.cutoff", "must be in (0, 0.5]"));
            }
        }
        if self.impairments.phase_noise_sigma < 0.0 {
            return Err(SimError::config(
                "impairments.phase_noise_sigma",
                "must be >= 0",
            ));
        }
        self.impairments.profile()?;
        if let Some(profile) = self.impairments.profile()? {
            if profile.max_excess_delay_samples() >= self.n_fft {
                return Err(SimError::config(
                    "impairments.taps",
                    "excess delay must be shorter than n_fft",
                ));
            }
        }
        match self.experiment {
            ExperimentKind::Psd => {
                let seg = self.welch.resolved_segment_len(self.n_fft);
                if seg == 0 {
                    return Err(SimError::config("welch.segment_len", "must be >= 1"));
                }
                if !(0.0..1.0).contains(&self.welch.overlap) {
                    return Err(SimError::config("welch.overlap", "must be in [0, 1)"));
                }
                let stream_len = self.n_trials * (self.n_fft + self.cp_len);
                if stream_len < seg {
                    return Err(SimError::config(
                        "n_trials",
                        format!("stream of {stream_len} samples is shorter than one Welch segment ({seg})"),
                    ));
                }
            }
            ExperimentKind::PaprCcdf => match &self.thresholds_db {
                None => return Err(SimError::config("thresholds_db", "required for papr_ccdf")),
                Some(t) if t.is_empty() => {
                    return Err(SimError::config("thresholds_db", "must be non-empty"))
                }
                Some(t) if t.iter().any(|v| !v.is_finite()) => {
                    return Err(SimError::config("thresholds_db", "must be finite"))
                }
                _ => {}
            },
            ExperimentKind::BerSweep => {
                let sweep = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| SimError::config("sweep", "Eb/N0 points required"))?;
                if sweep.is_empty() {
                    return Err(SimError::config("sweep", "must be non-empty"));
                }
                if self.impairments.fixed_snr_db().is_some() {
                    return Err(SimError::config(
                        "impairments.snr_db",
                        "a fixed SNR conflicts with the Eb/N0 sweep; use \"off\" or omit it",
                    ));
                }
            }
            ExperimentKind::CfoSweep => {
                let sweep = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| SimError::config("sweep", "epsilon points required"))?;
                if sweep.is_empty() {
                    return Err(SimError::config("sweep", "must be non-empty"));
                }
                if sweep.iter().any(|e| e.abs() >= 0.5) {
                    return Err(SimError::config(
                        "sweep",
                        "|epsilon| must be < 0.5 for every point",
                    ));
                }
            }
            ExperimentKind::CpSweep => {
                let sweep = self
                    .sweep
                    .as_ref()
                    .ok_or_else(|| SimError::config("sweep", "guard lengths required"))?;
                if sweep.is_empty() {
                    return Err(SimError::config("sweep", "must be non-empty"));
                }
                for &g in sweep {
                    if g < 0.0 || g.fract() != 0.0 || g as usize >= self.n_fft {
                        return Err(SimError::config(
                            "sweep",
                            format!("guard length {g} must be an integer in [0, n_fft)"),
                        ));
                    }
                }
                if self.impairments.taps.is_none() {
                    return Err(SimError::config(
                        "impairments.taps",
                        "cp_sweep needs a multipath profile",
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Built-in scenarios. `fig1` and `fig2` are the classic transmit-spectrum
/// plots (all-active, and DC plus guard nulls), `fig5` the PAPR CCDF;
/// `ber_awgn`, `cfo` and `cp` are sensible sweep defaults.
pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let json = preset_json(name)
        .ok_or_else(|| SimError::config("preset", format!("unknown preset '{name}'")))?;
    ScenarioConfig::from_json(json)
}

pub fn preset_names() -> &'static [&'static str] {
    &["fig1", "fig2", "fig5", "ber_awgn", "cfo", "cp"]
}

pub fn preset_json(name: &str) -> Option<&'static str> {
    Some(match name {
        // 64 QPSK subcarriers, every bin active
        "fig1" => {
            r#"{
  "experiment": "psd",
  "n_fft": 64,
  "schemes": ["qpsk"],
  "welch": { "window": "rectangular" },
  "n_trials": 2000,
  "seed": 1
}"#
        }
        // DC null plus 11 guard nulls per side. Rectangular window: the
        // default 4N segment with 50% overlap is a whole number of symbols,
        // so every segment is symbol-aligned and nulled bins land exactly on
        // Dirichlet-kernel zeros. A tapered window breaks that alignment and
        // smears band-edge skirts onto the null bins.
        "fig2" => {
            r#"{
  "experiment": "psd",
  "n_fft": 64,
  "null_dc": true,
  "guard_nulls_per_side": 11,
  "schemes": ["qpsk"],
  "welch": { "window": "rectangular" },
  "n_trials": 2000,
  "seed": 1
}"#
        }
        // PAPR CCDF at 128 subcarriers across modulations
        "fig5" => {
            r#"{
  "experiment": "papr_ccdf",
  "n_fft": 128,
  "schemes": ["bpsk", "qpsk", "16qam"],
  "thresholds_db": [4.0, 4.25, 4.5, 4.75, 5.0, 5.25, 5.5, 5.75, 6.0, 6.25,
                    6.5, 6.75, 7.0, 7.25, 7.5, 7.75, 8.0, 8.25, 8.5, 8.75,
                    9.0, 9.25, 9.5, 9.75, 10.0, 10.25, 10.5, 10.75, 11.0,
                    11.25, 11.5, 11.75, 12.0, 12.5, 13.0],
  "n_trials": 100000,
  "seed": 1
}"#
        }
        "ber_awgn" => {
            r#"{
  "experiment": "ber_sweep",
  "n_fft": 64,
  "schemes": ["qpsk"],
  "sweep": [0.0, 2.0, 4.0, 6.0, 8.0],
  "n_trials": 8000,
  "seed": 1
}"#
        }
        "cfo" => {
            r#"{
  "experiment": "cfo_sweep",
  "n_fft": 64,
  "schemes": ["qpsk"],
  "impairments": { "snr_db": 15.0 },
  "sweep": [0.0, 0.02, 0.05, 0.1, 0.2],
  "n_trials": 1000,
  "seed": 1
}"#
        }
        "cp" => {
            r#"{
  "experiment": "cp_sweep",
  "n_fft": 64,
  "schemes": ["qpsk"],
  "impairments": { "taps": [[1.0, 0.0], [0.4, 0.3], [-0.2, 0.1], [0.1, -0.1]] },
  "sweep": [0.0, 1.0, 2.0, 3.0, 4.0, 8.0, 16.0],
  "n_trials": 200,
  "seed": 1
}"#
        }
        _ => return None,
    })
}
