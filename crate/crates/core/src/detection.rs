//! Counting layer: rates from probabilities, Poisson counts, accidentals and
//! the acquisition-to-acquisition phase drift.

use std::f64::consts::TAU;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coincidence::CoincidenceTable;
use crate::error::{Error, Result};
use crate::state::Photon;

/// Largest Poisson mean accepted before counts stop being exact integers in f64.
pub const MAX_POISSON_MEAN: f64 = 4.0e15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RateModel {
    /// Pairs per second emitted into one correlated mode pair.
    pub pair_rate_hz: f64,
    pub coupling_efficiency: f64,
    pub detector_efficiency: f64,
    pub coincidence_window_s: f64,
    pub acquisition_s: f64,
    /// Per-photon throughput of the interferometer and fibres.
    pub transmission: f64,
    /// Dark counts per detector.
    pub dark_rate_hz: f64,
}

impl Default for RateModel {
    fn default() -> Self {
        RateModel {
            pair_rate_hz: 7.0e5,
            coupling_efficiency: 0.6,
            detector_efficiency: 1.0 / 6.0,
            coincidence_window_s: 7e-9,
            acquisition_s: 1.0,
            transmission: 1.0,
            dark_rate_hz: 0.0,
        }
    }
}

impl RateModel {
    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v <= 1.0 {
                Ok(())
            } else {
                Err(Error::param(name, format!("must lie in (0, 1], got {v}")))
            }
        };
        unit("coupling_efficiency", self.coupling_efficiency)?;
        unit("detector_efficiency", self.detector_efficiency)?;
        unit("transmission", self.transmission)?;
        if !(self.pair_rate_hz >= 0.0 && self.pair_rate_hz.is_finite()) {
            return Err(Error::param("pair_rate_hz", "must be finite and non-negative"));
        }
        if !(self.coincidence_window_s > 0.0 && self.coincidence_window_s.is_finite()) {
            return Err(Error::param("coincidence_window_s", "must be positive"));
        }
        if !(self.acquisition_s > 0.0 && self.acquisition_s.is_finite()) {
            return Err(Error::param("acquisition_s", "must be positive"));
        }
        if !(self.dark_rate_hz >= 0.0 && self.dark_rate_hz.is_finite()) {
            return Err(Error::param("dark_rate_hz", "must be finite and non-negative"));
        }
        Ok(())
    }

    /// Detected coincidences per second for one mode pair and unit probability.
    pub fn coincidence_scale(&self) -> f64 {
        let e = self.coupling_efficiency * self.detector_efficiency * self.transmission;
        self.pair_rate_hz * e * e
    }

    /// Detected singles per second for one mode pair and unit probability.
    pub fn singles_scale(&self) -> f64 {
        self.pair_rate_hz * self.coupling_efficiency * self.detector_efficiency * self.transmission
    }
}

/// Expected rates behind one detector pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairRates {
    pub singles_a_hz: f64,
    pub singles_b_hz: f64,
    pub true_coinc_hz: f64,
    pub accidental_hz: f64,
}

impl PairRates {
    pub fn total_coinc_hz(&self) -> f64 {
        self.true_coinc_hz + self.accidental_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectedRates {
    pub singles_a_hz: Vec<f64>,
    pub singles_b_hz: Vec<f64>,
    /// True coincidences per output pair `[a][b]`.
    pub coinc_hz: Vec<Vec<f64>>,
    pub coincidence_window_s: f64,
}

impl ExpectedRates {
    pub fn pair(&self, a: usize, b: usize) -> PairRates {
        let (sa, sb) = (self.singles_a_hz[a], self.singles_b_hz[b]);
        PairRates {
            singles_a_hz: sa,
            singles_b_hz: sb,
            true_coinc_hz: self.coinc_hz[a][b],
            accidental_hz: sa * sb * self.coincidence_window_s,
        }
    }
}

/// Rates when `n_pairs` mode pairs feed the network described by `p`.
pub fn expected_rates(p: &CoincidenceTable, rm: &RateModel, n_pairs: u32) -> Result<ExpectedRates> {
    if n_pairs == 0 {
        return Err(Error::param("n_pairs", "need at least one mode pair"));
    }
    rm.validate()?;
    let n = f64::from(n_pairs);
    let modes = p.n_modes();
    let singles = |photon| {
        (0..modes).map(|m| n * rm.singles_scale() * p.marginal(photon, m) + rm.dark_rate_hz).collect::<Vec<_>>()
    };
    Ok(ExpectedRates {
        singles_a_hz: singles(Photon::A),
        singles_b_hz: singles(Photon::B),
        coinc_hz: p.p.iter().map(|row| row.iter().map(|&v| n * rm.coincidence_scale() * v).collect()).collect(),
        coincidence_window_s: rm.coincidence_window_s,
    })
}

/// `S_A·S_B·τ_w`.
pub fn accidental_rate(singles_a_hz: f64, singles_b_hz: f64, window_s: f64) -> Result<f64> {
    for (name, v) in [("singles_a_hz", singles_a_hz), ("singles_b_hz", singles_b_hz), ("window_s", window_s)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::param(name, format!("must be finite and non-negative, got {v}")));
        }
    }
    Ok(singles_a_hz * singles_b_hz * window_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrRow {
    pub n_pairs: u32,
    pub true_hz: f64,
    pub accidental_hz: f64,
    /// True over accidental coincidences.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrScaling {
    pub rows: Vec<SnrRow>,
    /// Log-log slope of the true rate against `n`.
    pub true_slope: f64,
    /// Log-log slope of the accidental rate against `n`.
    pub accidental_slope: f64,
}

/// True and accidental coincidences when `n` mode pairs share one detector
/// pair, every pair contributing its full coincidence and singles rate.
pub fn snr_scaling(n_pairs: &[u32], rm: &RateModel) -> Result<SnrScaling> {
    if n_pairs.is_empty() {
        return Err(Error::param("n_pairs", "list is empty"));
    }
    if n_pairs.contains(&0) {
        return Err(Error::param("n_pairs", "every entry must be at least 1"));
    }
    rm.validate()?;
    let mut rows = Vec::with_capacity(n_pairs.len());
    for &n in n_pairs {
        let nf = f64::from(n);
        let t = nf * rm.coincidence_scale();
        let s = nf * rm.singles_scale() + rm.dark_rate_hz;
        let acc = accidental_rate(s, s, rm.coincidence_window_s)?;
        rows.push(SnrRow { n_pairs: n, true_hz: t, accidental_hz: acc, ratio: t / acc });
    }
    let x: Vec<f64> = rows.iter().map(|r| f64::from(r.n_pairs).ln()).collect();
    let slope = |ys: Vec<f64>| least_squares_slope(&x, &ys);
    Ok(SnrScaling {
        true_slope: slope(rows.iter().map(|r| r.true_hz.ln()).collect()),
        accidental_slope: slope(rows.iter().map(|r| r.accidental_hz.ln()).collect()),
        rows,
    })
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

/// Counts of one acquisition at one detector pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRecord {
    pub singles_a: u64,
    pub singles_b: u64,
    pub true_coinc: u64,
    pub accidental_coinc: u64,
    pub seed: u64,
    pub stream: u64,
}

impl CountRecord {
    /// What the coincidence counter shows.
    pub fn total_coinc(&self) -> u64 {
        self.true_coinc + self.accidental_coinc
    }
}

/// RNG for replicate `stream` of master seed `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// One Poisson draw with mean `lambda`; zero mean gives zero.
pub fn poisson(rng: &mut ChaCha8Rng, lambda: f64) -> Result<u64> {
    if !(lambda >= 0.0) || lambda > MAX_POISSON_MEAN {
        return Err(Error::CountOverflow { lambda });
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    let d = Poisson::new(lambda).map_err(|_| Error::CountOverflow { lambda })?;
    Ok(d.sample(rng) as u64)
}

pub fn simulate_counts(rates: &PairRates, rm: &RateModel, seed: u64) -> Result<CountRecord> {
    simulate_counts_stream(rates, rm, seed, 0)
}

/// Independent Poisson draws for singles, true and accidental coincidences.
pub fn simulate_counts_stream(rates: &PairRates, rm: &RateModel, seed: u64, stream: u64) -> Result<CountRecord> {
    let t = rm.acquisition_s;
    let mut rng = stream_rng(seed, stream);
    Ok(CountRecord {
        singles_a: poisson(&mut rng, rates.singles_a_hz * t)?,
        singles_b: poisson(&mut rng, rates.singles_b_hz * t)?,
        true_coinc: poisson(&mut rng, rates.true_coinc_hz * t)?,
        accidental_coinc: poisson(&mut rng, rates.accidental_hz * t)?,
        seed,
        stream,
    })
}

/// `n` replicates on streams `0..n`, independent of thread scheduling.
pub fn simulate_replicates(rates: &PairRates, rm: &RateModel, seed: u64, n: u64) -> Result<Vec<CountRecord>> {
    (0..n).into_par_iter().map(|i| simulate_counts_stream(rates, rm, seed, i)).collect()
}

/// Random-walk phase drift between acquisitions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhaseDrift {
    pub step_sigma_rad: f64,
    pub initial_phase_rad: f64,
}

impl Default for PhaseDrift {
    fn default() -> Self {
        PhaseDrift { step_sigma_rad: 0.35, initial_phase_rad: 0.0 }
    }
}

impl PhaseDrift {
    /// `θ_{i+1} = θ_i + N(0, σ²)`, wrapped to `[0, 2π)`.
    pub fn trace(&self, n_acq: usize, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
        let sigma = self.step_sigma_rad;
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::param("step_sigma_rad", format!("must be finite and non-negative, got {sigma}")));
        }
        let step = Normal::new(0.0, sigma).map_err(|e| Error::param("step_sigma_rad", e.to_string()))?;
        let mut theta = self.initial_phase_rad.rem_euclid(TAU);
        let mut out = Vec::with_capacity(n_acq);
        for i in 0..n_acq {
            if i > 0 && sigma > 0.0 {
                theta = (theta + step.sample(rng)).rem_euclid(TAU);
            }
            // rem_euclid can round up to exactly 2π
            if theta >= TAU {
                theta = 0.0;
            }
            out.push(theta);
        }
        Ok(out)
    }
}

/// Drift trace starting at phase 0.
pub fn phase_drift_trace(n_acq: usize, step_sigma_rad: f64, seed: u64) -> Result<Vec<f64>> {
    PhaseDrift { step_sigma_rad, initial_phase_rad: 0.0 }.trace(n_acq, &mut stream_rng(seed, 0))
}
