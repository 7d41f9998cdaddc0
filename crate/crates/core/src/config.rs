//! Experiment configuration, read from TOML with SI units in the field names.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coincidence::Overlap;
use crate::detection::{PhaseDrift, RateModel};
use crate::error::{Error, Result};
use crate::optics::InterferometerSettings;
use crate::spectral::SpectralModel;
use crate::state::{TwoPhotonPathState, N_PATHS};

/// The shipped calibration bundle.
pub const CALIBRATED_CONFIG: &str = include_str!("../../../configs/calibrated.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Master seed for every stochastic scenario.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub state: StateConfig,
    #[serde(default)]
    pub spectral: SpectralModel,
    #[serde(default)]
    pub rates: RateModel,
    #[serde(default)]
    pub interferometer: InterferometerSettings,
    #[serde(default)]
    pub drift: PhaseDrift,
    #[serde(default)]
    pub fig2: Fig2Config,
    #[serde(default)]
    pub fig3: Fig3Config,
    #[serde(default)]
    pub matrix: MatrixConfig,
    #[serde(default)]
    pub snr: SnrConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct StateConfig {
    pub phases_rad: [f64; N_PATHS],
}

impl StateConfig {
    pub fn state(&self) -> TwoPhotonPathState {
        TwoPhotonPathState::from_phases(self.phases_rad)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig2Config {
    pub overlap: Overlap,
    /// Scans run over `[−half_range_m, half_range_m]`.
    pub half_range_m: f64,
    pub steps: usize,
}

impl Default for Fig2Config {
    fn default() -> Self {
        Fig2Config { overlap: Overlap::default(), half_range_m: 150e-6, steps: 201 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig3Config {
    pub overlap: Overlap,
    /// Per-photon throughput of the recombined interferometer.
    pub transmission: f64,
    pub acquisitions: usize,
    /// Δx₂ of the trace without BS₂ interference.
    pub delta_x2_m: f64,
}

impl Default for Fig3Config {
    fn default() -> Self {
        Fig3Config { overlap: Overlap::default(), transmission: 1.0, acquisitions: 100, delta_x2_m: 1.3e-3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatrixConfig {
    /// Fraction of the correlated rate leaking into each non-correlated cell.
    pub crosstalk: f64,
    /// Subtract the expected accidentals before forming visibilities.
    pub subtract_accidentals: bool,
}

impl Default for MatrixConfig {
    fn default() -> Self {
        MatrixConfig { crosstalk: 0.005, subtract_accidentals: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SnrConfig {
    pub n_pairs: Vec<u32>,
}

impl Default for SnrConfig {
    fn default() -> Self {
        SnrConfig { n_pairs: vec![1, 2, 4, 8, 16] }
    }
}

impl ExperimentConfig {
    /// The shipped calibration (`configs/calibrated.toml`).
    pub fn calibrated() -> Self {
        Self::from_toml_str(CALIBRATED_CONFIG).expect("shipped config parses")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and validates a config file, returning it with its raw bytes.
    pub fn load(path: &Path) -> Result<(Self, Vec<u8>)> {
        let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes).map_err(|_| Error::Config(format!("{} is not UTF-8", path.display())))?;
        let cfg = Self::from_toml_str(text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        Ok((cfg, bytes))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.state.phases_rad.iter().any(|p| !p.is_finite()) {
            return Err(Error::param("state.phases_rad", "phases must be finite"));
        }
        self.spectral.validate()?;
        self.rates.validate()?;
        let s = &self.interferometer;
        for (name, v) in [
            ("interferometer.delta_x1_m", s.delta_x1_m),
            ("interferometer.delta_x2_m", s.delta_x2_m),
            ("interferometer.delta_x3_m", s.delta_x3_m),
            ("interferometer.alpha1_rad", s.alpha1_rad),
            ("interferometer.alpha2_rad", s.alpha2_rad),
            ("interferometer.x2_external_coupling", s.x2_external_coupling),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        if (s.wavelength_m - self.spectral.center_wavelength_m).abs() > 1e-15 {
            return Err(Error::param(
                "interferometer.wavelength_m",
                "must equal spectral.center_wavelength_m (degenerate down-conversion)",
            ));
        }
        if !(s.max_delay_m > 0.0) {
            return Err(Error::param("interferometer.max_delay_m", "must be positive"));
        }
        if !(self.drift.step_sigma_rad >= 0.0 && self.drift.step_sigma_rad.is_finite()) {
            return Err(Error::param("drift.step_sigma_rad", "must be finite and non-negative"));
        }
        self.fig2.overlap.validate()?;
        if !(self.fig2.half_range_m > 0.0 && self.fig2.half_range_m <= s.max_delay_m) {
            return Err(Error::param("fig2.half_range_m", "scan range must be positive and within max_delay_m"));
        }
        if self.fig2.steps < 2 {
            return Err(Error::param("fig2.steps", "need at least 2 steps"));
        }
        self.fig3.overlap.validate()?;
        if !(self.fig3.transmission > 0.0 && self.fig3.transmission <= 1.0) {
            return Err(Error::param("fig3.transmission", "must lie in (0, 1]"));
        }
        if self.fig3.acquisitions < 4 {
            return Err(Error::param("fig3.acquisitions", "need at least 4 acquisitions"));
        }
        if !(self.fig3.delta_x2_m.is_finite() && self.fig3.delta_x2_m != 0.0) {
            return Err(Error::param("fig3.delta_x2_m", "must be finite and non-zero"));
        }
        if !(0.0..1.0).contains(&self.matrix.crosstalk) {
            return Err(Error::param("matrix.crosstalk", "must lie in [0, 1)"));
        }
        if self.snr.n_pairs.is_empty() || self.snr.n_pairs.contains(&0) {
            return Err(Error::param("snr.n_pairs", "must be a non-empty list of positive integers"));
        }
        Ok(())
    }

    /// The master seed, required by stochastic scenarios.
    pub fn require_seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| Error::param("seed", "stochastic scenarios need a seed"))
    }

    /// Rate model of the drift traces, including their extra transmission.
    pub fn fig3_rates(&self) -> RateModel {
        RateModel { transmission: self.rates.transmission * self.fig3.transmission, ..self.rates }
    }
}
