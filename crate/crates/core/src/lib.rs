//! Simulation of multi-path two-photon entanglement from type-I
//! down-conversion.
//!
//! Four correlated mode pairs carry the path state
//! `Σ_j e^{iφ_j}/2 |j⟩_A|j⟩_B`. Each photon crosses a chained interferometer
//! (two beam splitters in the first stage, one in the second); the crate
//! predicts coincidence probabilities exactly, simulates counting statistics
//! and reproduces visibility, witness and envelope-width measurements.
//!
//! ```
//! use ququad::prelude::*;
//!
//! let cfg = ExperimentConfig::calibrated();
//! let a = run_fig2(Fig2Variant::A, &cfg)?;
//! let b = run_fig2(Fig2Variant::B, &cfg)?;
//! assert!((b.fwhm_m / a.fwhm_m - 2.0).abs() < 0.02);
//! # Ok::<(), ququad::Error>(())
//! ```
//!
//! Layers, bottom up: [`state`], [`expansion`] and [`optics`] describe the
//! light; [`spectral`] and [`coincidence`] turn it into probabilities;
//! [`detection`] and [`analysis`] handle counts; [`scenarios`], [`config`]
//! and [`output`] wire everything into runs.

pub mod analysis;
pub mod coincidence;
pub mod config;
pub mod detection;
pub mod error;
pub mod expansion;
pub mod optics;
pub mod output;
pub mod scenarios;
pub mod spectral;
pub mod state;
pub mod validation;

pub use error::{Error, Result};

pub mod prelude {
    pub use crate::analysis::{
        fwhm, scan_fwhm, visibility_enhancement, visibility_fringe, visibility_fringe_fit, visibility_standard,
        witness_value, VisibilityReport,
    };
    pub use crate::coincidence::{
        coincidence_probability, quadrature_probability, scan, CoincidenceTable, Overlap, ScanResult, ScanSpec,
        ScanVariable,
    };
    pub use crate::config::ExperimentConfig;
    pub use crate::detection::{accidental_rate, expected_rates, simulate_counts, snr_scaling, RateModel};
    pub use crate::optics::{default_network, transfer_matrix, InterferometerSettings, OpticalElement, OpticalNetwork};
    pub use crate::scenarios::{run_fig2, run_fig3, run_snr_sweep, run_visibility_matrix, Fig2Variant, Fig3Trace};
    pub use crate::spectral::{coherence_length, envelope, SpectralModel};
    pub use crate::state::{make_state, ModeLabel, Photon, TwoPhotonPathState};
    pub use crate::Error;
}

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/state.md")]
    mod state {}
    #[doc = include_str!("../../../book/src/optics.md")]
    mod optics {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/coincidence.md")]
    mod coincidence {}
    #[doc = include_str!("../../../book/src/counting.md")]
    mod counting {}
    #[doc = include_str!("../../../book/src/analysis.md")]
    mod analysis {}
    #[doc = include_str!("../../../book/src/scenarios.md")]
    mod scenarios {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
