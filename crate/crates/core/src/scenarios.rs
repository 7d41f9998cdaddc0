//! Reproductions of the delay scans, drift traces, standard-basis
//! visibility matrix and rate scaling.
//!
//! RNG streams under the master seed: drift of oscillation trace `k` uses stream
//! `k + 1`; counts of its acquisition `i` use `(k + 1) << 32 | i`; the
//! visibility matrix cell `(i, j)` uses `16 << 32 | 4i + j`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    fit_fringe, scan_fwhm, visibility_enhancement, visibility_fringe, visibility_fringe_fit, visibility_standard,
    witness_report, FringeFit, VisibilityDefinition, VisibilityReport, WitnessReport,
};
use crate::coincidence::{coincidence_probability, scan, scan_point, CoincidenceTable, Overlap, ScanPoint, ScanResult, ScanSpec, ScanVariable};
use crate::config::ExperimentConfig;
use crate::detection::{expected_rates, simulate_counts_stream, snr_scaling, stream_rng, CountRecord, PairRates, SnrScaling};
use crate::error::{Error, Result};
use crate::optics::{default_network, Interferometer, InterferometerSettings};
use crate::spectral::pump_coherence_check;
use crate::state::{TwoPhotonPathState, N_PATHS};

const INTERNAL_PATHS: [usize; 2] = [2, 3];
const EXTERNAL_PATHS: [usize; 2] = [1, 4];
const ALL_PATHS: [usize; 4] = [1, 2, 3, 4];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fig2Variant {
    /// Internal pairs only, Δx₁ scanned.
    A,
    /// External pairs only, Δx₃ scanned.
    B,
    /// All pairs, hybrid scan.
    C,
}

impl Fig2Variant {
    pub const ALL: [Fig2Variant; 3] = [Fig2Variant::A, Fig2Variant::B, Fig2Variant::C];

    pub fn variable(self) -> ScanVariable {
        match self {
            Fig2Variant::A => ScanVariable::DeltaX1,
            Fig2Variant::B => ScanVariable::DeltaX3,
            Fig2Variant::C => ScanVariable::Hybrid,
        }
    }

    /// Source paths left unblocked.
    pub fn active_paths(self) -> &'static [usize] {
        match self {
            Fig2Variant::A => &INTERNAL_PATHS,
            Fig2Variant::B => &EXTERNAL_PATHS,
            Fig2Variant::C => &ALL_PATHS,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Fig2Variant::A => "a",
            Fig2Variant::B => "b",
            Fig2Variant::C => "c",
        }
    }
}

impl fmt::Display for Fig2Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Fig2Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Fig2Variant::A),
            "b" => Ok(Fig2Variant::B),
            "c" => Ok(Fig2Variant::C),
            other => Err(Error::param("variant", format!("expected a, b or c, got {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig2Result {
    pub variant: Fig2Variant,
    pub scan: ScanResult,
    pub fwhm_m: f64,
    /// Fringe visibility at zero delay.
    pub visibility: VisibilityReport,
    pub warnings: Vec<String>,
}

fn restricted_state(cfg: &ExperimentConfig, paths: &[usize]) -> Result<TwoPhotonPathState> {
    cfg.state.state().restricted(paths)
}

/// Envelope at zero scan delay for a delay-scan variant.
pub fn fig2_zero_point(variant: Fig2Variant, cfg: &ExperimentConfig) -> Result<ScanPoint> {
    let st = restricted_state(cfg, variant.active_paths())?;
    let s = variant.variable().apply(&cfg.interferometer, 0.0);
    scan_point(&st, &cfg.spectral, &cfg.fig2.overlap, &s, variant.variable().probe())
}

fn zero_visibility(p: &ScanPoint) -> VisibilityReport {
    VisibilityReport { value: p.visibility(), uncertainty: 0.0, definition: VisibilityDefinition::Fringe }
}

pub fn run_fig2(variant: Fig2Variant, cfg: &ExperimentConfig) -> Result<Fig2Result> {
    cfg.validate()?;
    let st = restricted_state(cfg, variant.active_paths())?;
    let spec = ScanSpec::symmetric(variant.variable(), cfg.fig2.half_range_m, cfg.fig2.steps);
    let result = scan(&st, &cfg.spectral, &cfg.fig2.overlap, &cfg.interferometer, &spec)?;
    let fwhm_m = scan_fwhm(&result)?;
    let visibility = zero_visibility(&fig2_zero_point(variant, cfg)?);
    let mut warnings = Vec::new();
    for d in [spec.start_m, spec.stop_m] {
        let pair = default_network(&variant.variable().apply(&cfg.interferometer, d))?;
        for w in pump_coherence_check(&pair.a, &pair.b, &cfg.spectral)? {
            let text = w.to_string();
            if !warnings.contains(&text) {
                warnings.push(text);
            }
        }
    }
    Ok(Fig2Result { variant, scan: result, fwhm_m, visibility, warnings })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Fig3Trace {
    /// Internal pairs only, drifting internal BS₁ phase.
    Internal,
    /// External pairs only, drifting external BS₁ phase.
    External,
    /// All pairs with Δx₂ beyond the coherence length.
    NoBs2,
    /// All pairs at zero delays, drifting BS₂ phase.
    Full,
}

impl Fig3Trace {
    pub const ALL: [Fig3Trace; 4] = [Fig3Trace::Internal, Fig3Trace::External, Fig3Trace::NoBs2, Fig3Trace::Full];

    pub fn index(self) -> u64 {
        match self {
            Fig3Trace::Internal => 0,
            Fig3Trace::External => 1,
            Fig3Trace::NoBs2 => 2,
            Fig3Trace::Full => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Fig3Trace::Internal => "internal",
            Fig3Trace::External => "external",
            Fig3Trace::NoBs2 => "no_bs2",
            Fig3Trace::Full => "full",
        }
    }

    pub fn active_paths(self) -> &'static [usize] {
        match self {
            Fig3Trace::Internal => &INTERNAL_PATHS,
            Fig3Trace::External => &EXTERNAL_PATHS,
            Fig3Trace::NoBs2 | Fig3Trace::Full => &ALL_PATHS,
        }
    }

    /// Where the drifting phase acts.
    pub fn drift_at(self) -> Interferometer {
        match self {
            Fig3Trace::Internal | Fig3Trace::NoBs2 => Interferometer::InternalBs1,
            Fig3Trace::External => Interferometer::ExternalBs1,
            Fig3Trace::Full => Interferometer::Bs2,
        }
    }

    pub fn settings(self, cfg: &ExperimentConfig) -> InterferometerSettings {
        let base = InterferometerSettings { delta_x1_m: 0.0, delta_x2_m: 0.0, delta_x3_m: 0.0, ..cfg.interferometer };
        match self {
            Fig3Trace::NoBs2 => InterferometerSettings { delta_x2_m: cfg.fig3.delta_x2_m, ..base },
            _ => base,
        }
    }

    /// Mode pairs feeding the trace; blocked pairs carry no light.
    pub fn n_pairs(self) -> u32 {
        self.active_paths().len() as u32
    }
}

/// Expected level of a drift trace over the drift phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceLevels {
    pub true_max_hz: f64,
    pub true_min_hz: f64,
    pub accidental_hz: f64,
}

impl TraceLevels {
    pub fn upper_hz(&self) -> f64 {
        self.true_max_hz + self.accidental_hz
    }

    pub fn lower_hz(&self) -> f64 {
        self.true_min_hz + self.accidental_hz
    }

    /// Visibility of the noiseless counter trace.
    pub fn visibility(&self) -> f64 {
        (self.upper_hz() - self.lower_hz()) / (self.upper_hz() + self.lower_hz())
    }
}

struct TraceModel {
    state: TwoPhotonPathState,
    settings: InterferometerSettings,
    detectors: (usize, usize),
}

impl TraceModel {
    fn new(trace: Fig3Trace, cfg: &ExperimentConfig) -> Result<Self> {
        let settings = trace.settings(cfg);
        Ok(TraceModel { state: restricted_state(cfg, trace.active_paths())?, detectors: settings.detector_slots(), settings })
    }

    fn table(&self, trace: Fig3Trace, cfg: &ExperimentConfig, phase: f64) -> Result<CoincidenceTable> {
        let pair = default_network(&self.settings)?.with_phase(&self.settings, trace.drift_at(), phase)?;
        coincidence_probability(&self.state, &pair.a, &pair.b, &cfg.spectral, &cfg.fig3.overlap)
    }

    fn rates(&self, trace: Fig3Trace, cfg: &ExperimentConfig, phase: f64) -> Result<PairRates> {
        let t = self.table(trace, cfg, phase)?;
        Ok(expected_rates(&t, &cfg.fig3_rates(), trace.n_pairs())?.pair(self.detectors.0, self.detectors.1))
    }
}

/// Noiseless extremes of a trace, from the probe decomposition.
pub fn fig3_levels(trace: Fig3Trace, cfg: &ExperimentConfig) -> Result<TraceLevels> {
    let m = TraceModel::new(trace, cfg)?;
    let p = scan_point(&m.state, &cfg.spectral, &cfg.fig3.overlap, &m.settings, trace.drift_at())?;
    let rm = cfg.fig3_rates();
    let r = m.rates(trace, cfg, 0.0)?;
    let k = f64::from(trace.n_pairs()) * rm.coincidence_scale();
    Ok(TraceLevels { true_max_hz: k * p.p_envelope_max, true_min_hz: k * p.p_envelope_min, accidental_hz: r.accidental_hz })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Acquisition {
    pub index: usize,
    pub phase_rad: f64,
    pub expected: PairRates,
    pub counts: CountRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3TraceResult {
    pub trace: Fig3Trace,
    pub acquisitions: Vec<Acquisition>,
    pub levels: TraceLevels,
    pub fit: FringeFit,
    pub raw_max: u64,
    pub raw_min: u64,
    pub visibility_fringe: VisibilityReport,
    pub visibility_fit: VisibilityReport,
}

impl Fig3TraceResult {
    pub fn counts(&self) -> Vec<f64> {
        self.acquisitions.iter().map(|a| a.counts.total_coinc() as f64).collect()
    }

    pub fn phases(&self) -> Vec<f64> {
        self.acquisitions.iter().map(|a| a.phase_rad).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fig3Result {
    pub seed: u64,
    pub traces: Vec<Fig3TraceResult>,
    /// Enhancement from the fitted upper envelopes of the full and no-BS₂ traces.
    pub enhancement: VisibilityReport,
    /// Same from the raw maxima.
    pub enhancement_raw: VisibilityReport,
}

impl Fig3Result {
    pub fn trace(&self, t: Fig3Trace) -> &Fig3TraceResult {
        &self.traces[t.index() as usize]
    }
}

/// Simulates one trace: one drift phase per acquisition, counts drawn from
/// the rates at that phase.
pub fn simulate_fig3_trace(trace: Fig3Trace, cfg: &ExperimentConfig, seed: u64) -> Result<Fig3TraceResult> {
    let model = TraceModel::new(trace, cfg)?;
    let n = cfg.fig3.acquisitions;
    let phases = cfg.drift.trace(n, &mut stream_rng(seed, trace.index() + 1))?;
    let rm = cfg.fig3_rates();
    let acquisitions = phases
        .par_iter()
        .enumerate()
        .map(|(i, &phase)| {
            let expected = model.rates(trace, cfg, phase)?;
            let counts = simulate_counts_stream(&expected, &rm, seed, (trace.index() + 1) << 32 | i as u64)?;
            Ok(Acquisition { index: i, phase_rad: phase, expected, counts })
        })
        .collect::<Result<Vec<_>>>()?;
    let counts: Vec<f64> = acquisitions.iter().map(|a| a.counts.total_coinc() as f64).collect();
    let raw_max = acquisitions.iter().map(|a| a.counts.total_coinc()).max().unwrap_or(0);
    let raw_min = acquisitions.iter().map(|a| a.counts.total_coinc()).min().unwrap_or(0);
    let fit = fit_fringe(&counts, &phases).or_else(|_| {
        // a phase that never moves leaves only the mean level
        let mean = counts.iter().sum::<f64>() / counts.len() as f64;
        Ok::<_, Error>(FringeFit { offset: mean, cos: 0.0, sin: 0.0, covariance: [[mean / counts.len() as f64, 0.0, 0.0], [0.0; 3], [0.0; 3]] })
    })?;
    let visibility_fit = visibility_fringe_fit(&counts, &phases)
        .unwrap_or(VisibilityReport { value: 0.0, uncertainty: 0.0, definition: VisibilityDefinition::FringeFit });
    Ok(Fig3TraceResult {
        trace,
        levels: fig3_levels(trace, cfg)?,
        visibility_fringe: visibility_fringe(&counts)?,
        visibility_fit,
        fit,
        raw_max,
        raw_min,
        acquisitions,
    })
}

pub fn run_fig3(cfg: &ExperimentConfig) -> Result<Fig3Result> {
    cfg.validate()?;
    let seed = cfg.require_seed()?;
    let traces = Fig3Trace::ALL
        .iter()
        .map(|&t| simulate_fig3_trace(t, cfg, seed))
        .collect::<Result<Vec<_>>>()?;
    let (nb, full) = (&traces[Fig3Trace::NoBs2.index() as usize], &traces[Fig3Trace::Full.index() as usize]);
    let mut enhancement = visibility_enhancement(full.fit.upper().max(0.0), nb.fit.upper().max(0.0))?;
    // uncertainty from the fitted envelopes rather than single-bin Poisson
    let (p, b) = (full.fit.upper(), nb.fit.upper());
    enhancement.uncertainty = ((full.fit.upper_uncertainty() / b).powi(2) + (p * nb.fit.upper_uncertainty() / (b * b)).powi(2)).sqrt();
    let enhancement_raw = visibility_enhancement(full.raw_max as f64, nb.raw_max as f64)?;
    Ok(Fig3Result { seed, traces, enhancement, enhancement_raw })
}

/// Correlated-mode visibility matrix and witness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixResult {
    pub seed: u64,
    pub counts: Vec<Vec<CountRecord>>,
    /// Coincidences after accidental subtraction, if enabled.
    pub corrected: Vec<Vec<f64>>,
    /// `V₀⁽ⁱʲ⁾` for `i < j` (0-based indices, 1-based in labels).
    pub visibilities: Vec<PairVisibility>,
    /// Mean pairwise visibility used as `V_zz`.
    pub v_zz: VisibilityReport,
    pub witnesses: Vec<NamedWitness>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairVisibility {
    pub i: usize,
    pub j: usize,
    pub visibility: VisibilityReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedWitness {
    /// Source of the superposition-basis visibility.
    pub v_xx_source: String,
    pub report: WitnessReport,
}

/// `P[i][j]` for four direct fibre pairs with crosstalk `ε`.
pub fn crosstalk_table(crosstalk: f64) -> CoincidenceTable {
    let norm = N_PATHS as f64 * (1.0 + (N_PATHS - 1) as f64 * crosstalk);
    let p = (0..N_PATHS)
        .map(|i| (0..N_PATHS).map(|j| if i == j { 1.0 / norm } else { crosstalk / norm }).collect())
        .collect();
    CoincidenceTable { p, overlap: Overlap::default() }
}

/// Standard-basis visibility matrix from simulated counts, witness against
/// the hybrid-scan and drift-trace superposition visibilities.
pub fn run_visibility_matrix(cfg: &ExperimentConfig) -> Result<MatrixResult> {
    let seed = cfg.require_seed()?;
    let fig3 = run_fig3(cfg)?;
    let v_fig2c = zero_visibility(&fig2_zero_point(Fig2Variant::C, cfg)?);
    let (counts, corrected, visibilities, v_zz) = standard_basis_visibilities(cfg, seed)?;
    let witnesses = vec![
        NamedWitness { v_xx_source: "hybrid scan visibility".into(), report: witness_report(&v_zz, &v_fig2c) },
        NamedWitness { v_xx_source: "drift trace enhancement".into(), report: witness_report(&v_zz, &fig3.enhancement) },
    ];
    Ok(MatrixResult { seed, counts, corrected, visibilities, v_zz, witnesses })
}

type StandardBasis = (Vec<Vec<CountRecord>>, Vec<Vec<f64>>, Vec<PairVisibility>, VisibilityReport);

/// Counts and pairwise visibilities with the configured crosstalk.
pub fn standard_basis_visibilities(cfg: &ExperimentConfig, seed: u64) -> Result<StandardBasis> {
    let table = crosstalk_table(cfg.matrix.crosstalk);
    let rates = expected_rates(&table, &cfg.rates, N_PATHS as u32)?;
    let t = cfg.rates.acquisition_s;
    let cells: Vec<(usize, usize)> = (0..N_PATHS).flat_map(|i| (0..N_PATHS).map(move |j| (i, j))).collect();
    let flat = cells
        .par_iter()
        .map(|&(i, j)| simulate_counts_stream(&rates.pair(i, j), &cfg.rates, seed, 16 << 32 | (4 * i + j) as u64))
        .collect::<Result<Vec<_>>>()?;
    let counts: Vec<Vec<CountRecord>> = flat.chunks(N_PATHS).map(|c| c.to_vec()).collect();
    let corrected: Vec<Vec<f64>> = (0..N_PATHS)
        .map(|i| {
            (0..N_PATHS)
                .map(|j| {
                    let c = counts[i][j].total_coinc() as f64;
                    if cfg.matrix.subtract_accidentals {
                        (c - rates.pair(i, j).accidental_hz * t).max(0.0)
                    } else {
                        c
                    }
                })
                .collect()
        })
        .collect();
    let mut visibilities = Vec::new();
    for i in 0..N_PATHS {
        for j in i + 1..N_PATHS {
            let v = visibility_standard(corrected[i][i], corrected[j][j], corrected[j][i], corrected[i][j])?;
            visibilities.push(PairVisibility { i, j, visibility: v });
        }
    }
    let n = visibilities.len() as f64;
    let v_zz = VisibilityReport {
        value: visibilities.iter().map(|v| v.visibility.value).sum::<f64>() / n,
        uncertainty: visibilities.iter().map(|v| v.visibility.uncertainty).sum::<f64>() / n,
        definition: VisibilityDefinition::StandardBasis,
    };
    Ok((counts, corrected, visibilities, v_zz))
}

pub fn run_snr_sweep(cfg: &ExperimentConfig, n_list: Option<&[u32]>) -> Result<SnrScaling> {
    snr_scaling(n_list.unwrap_or(&cfg.snr.n_pairs), &cfg.rates)
}

/// Measured values the free overlap and transmission parameters are tuned to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub fig2_internal: f64,
    pub fig2_external: f64,
    pub fig2_hybrid: f64,
    pub fig3_internal: f64,
    pub fig3_external: f64,
    /// Upper coincidence level per acquisition with no BS₂ interference.
    pub fig3_no_bs2_upper: f64,
    /// Upper coincidence level per acquisition with full interference.
    pub fig3_full_upper: f64,
}

impl CalibrationTargets {
    pub const MEASURED: CalibrationTargets = CalibrationTargets {
        fig2_internal: 0.73,
        fig2_external: 0.80,
        fig2_hybrid: 0.80,
        fig3_internal: 0.65,
        fig3_external: 0.67,
        fig3_no_bs2_upper: 660.0,
        fig3_full_upper: 1130.0,
    };
}

/// Root of an increasing function on `[lo, hi]` by bisection.
fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> Result<f64>) -> Result<f64> {
    if f(lo)? > 0.0 || f(hi)? < 0.0 {
        return Err(Error::param("calibration", format!("target not reachable on [{lo}, {hi}]")));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Largest cross overlap keeping the matrix positive semidefinite.
fn max_cross(o: &Overlap) -> f64 {
    let ok = |m: f64| Overlap { cross: m, ..*o }.validate().is_ok();
    if ok(1.0) {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Overlaps of the delay scans: internal and external from the isolated
/// scans, then the cross overlap from the hybrid scan.
pub fn calibrate_fig2(cfg: &ExperimentConfig, t: &CalibrationTargets) -> Result<Overlap> {
    let mut c = cfg.clone();
    c.fig2.overlap = Overlap { internal: 1.0, external: 1.0, cross: 0.0 };
    let vis = |c: &ExperimentConfig, v: Fig2Variant| fig2_zero_point(v, c).map(|p| p.visibility());
    c.fig2.overlap.internal = bisect(0.0, 1.0, |m| {
        let mut c = c.clone();
        c.fig2.overlap.internal = m;
        Ok(vis(&c, Fig2Variant::A)? - t.fig2_internal)
    })?;
    c.fig2.overlap.external = bisect(0.0, 1.0, |m| {
        let mut c = c.clone();
        c.fig2.overlap.external = m;
        Ok(vis(&c, Fig2Variant::B)? - t.fig2_external)
    })?;
    c.fig2.overlap.cross = bisect(0.0, max_cross(&c.fig2.overlap), |m| {
        let mut c = c.clone();
        c.fig2.overlap.cross = m;
        Ok(vis(&c, Fig2Variant::C)? - t.fig2_hybrid)
    })?;
    c.fig2.overlap.validate()?;
    Ok(c.fig2.overlap)
}

/// Overlaps and transmission of the drift traces, matched to the noiseless
/// trace levels (accidentals included). Returns `(overlap, transmission)`.
pub fn calibrate_fig3(cfg: &ExperimentConfig, t: &CalibrationTargets) -> Result<(Overlap, f64)> {
    let mut c = cfg.clone();
    c.fig3.overlap = Overlap { internal: t.fig3_internal, external: t.fig3_external, cross: 0.0 };
    let level = |c: &ExperimentConfig, tr: Fig3Trace| fig3_levels(tr, c);
    for _ in 0..50 {
        let before = (c.fig3.overlap, c.fig3.transmission);
        c.fig3.overlap.internal = bisect(0.0, 1.0, |m| {
            let mut c = c.clone();
            c.fig3.overlap.internal = m;
            Ok(level(&c, Fig3Trace::Internal)?.visibility() - t.fig3_internal)
        })?;
        c.fig3.overlap.external = bisect(0.0, 1.0, |m| {
            let mut c = c.clone();
            c.fig3.overlap.external = m;
            Ok(level(&c, Fig3Trace::External)?.visibility() - t.fig3_external)
        })?;
        c.fig3.transmission = bisect(1e-6, 1.0, |x| {
            let mut c = c.clone();
            c.fig3.transmission = x;
            Ok(level(&c, Fig3Trace::NoBs2)?.upper_hz() * c.rates.acquisition_s - t.fig3_no_bs2_upper)
        })?;
        c.fig3.overlap.cross = bisect(0.0, max_cross(&c.fig3.overlap), |m| {
            let mut c = c.clone();
            c.fig3.overlap.cross = m;
            Ok(level(&c, Fig3Trace::Full)?.upper_hz() * c.rates.acquisition_s - t.fig3_full_upper)
        })?;
        let after = (c.fig3.overlap, c.fig3.transmission);
        let moved = (after.0.internal - before.0.internal).abs()
            + (after.0.external - before.0.external).abs()
            + (after.0.cross - before.0.cross).abs()
            + (after.1 - before.1).abs();
        if moved < 1e-12 {
            c.fig3.overlap.validate()?;
            return Ok((c.fig3.overlap, c.fig3.transmission));
        }
    }
    Err(Error::param("calibration", "drift-trace calibration did not converge"))
}
