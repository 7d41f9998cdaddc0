//! Spectral model of the filtered down-converted photons.
//!
//! The filtered single-photon spectrum is taken Gaussian in angular
//! frequency with standard deviation `σ_ν`, derived from the wavelength
//! FWHM `Δλ`. Its normalized Fourier transform is the interference envelope
//! `g(Δt) = exp(−σ_ν²Δt²/2)`, which sets the width of every delay scan.
//!
//! The pump is a single-longitudinal-mode laser and is treated as
//! monochromatic; its finite coherence length only feeds
//! [`pump_coherence_check`].

use std::f64::consts::{LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optics::{delay_expansion_matrix, OpticalNetwork, SPEED_OF_LIGHT};
use crate::state::{input_slot, Photon, N_PATHS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralModel {
    pub center_wavelength_m: f64,
    pub bandwidth_m: f64,
    #[serde(default = "default_pump_coherence")]
    pub pump_coherence_length_m: f64,
}

fn default_pump_coherence() -> f64 {
    10.0
}

impl Default for SpectralModel {
    fn default() -> Self {
        SpectralModel { center_wavelength_m: 532e-9, bandwidth_m: 4.5e-9, pump_coherence_length_m: 10.0 }
    }
}

impl SpectralModel {
    pub fn new(center_wavelength_m: f64, bandwidth_m: f64, pump_coherence_length_m: f64) -> Result<Self> {
        let m = SpectralModel { center_wavelength_m, bandwidth_m, pump_coherence_length_m };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let (l0, dl) = (self.center_wavelength_m, self.bandwidth_m);
        if !(l0 > 0.0 && l0.is_finite()) {
            return Err(Error::param("center_wavelength_m", "must be positive"));
        }
        if !(dl > 0.0 && dl.is_finite()) {
            return Err(Error::param("bandwidth_m", "must be positive"));
        }
        if dl >= l0 / 10.0 {
            return Err(Error::param("bandwidth_m", "must be below a tenth of the centre wavelength"));
        }
        if !(self.pump_coherence_length_m > 0.0) {
            return Err(Error::param("pump_coherence_length_m", "must be positive"));
        }
        Ok(())
    }

    /// Standard deviation of the Gaussian spectral density in rad/s.
    pub fn sigma_nu(&self) -> f64 {
        let fwhm_omega = 2.0 * PI * SPEED_OF_LIGHT * self.bandwidth_m / (self.center_wavelength_m.powi(2));
        fwhm_omega / (2.0 * (2.0 * LN_2).sqrt())
    }

    /// Spectral density `S(ν)`, normalized over ν.
    pub fn density(&self, nu: f64) -> f64 {
        let s = self.sigma_nu();
        (-(nu * nu) / (2.0 * s * s)).exp() / (s * (2.0 * PI).sqrt())
    }

    /// FWHM of `g(δ/c)` as a function of the path delay δ, in metres.
    pub fn envelope_fwhm_m(&self) -> f64 {
        2.0 * (2.0 * LN_2).sqrt() * SPEED_OF_LIGHT / self.sigma_nu()
    }
}

/// `g(Δt) = exp(−σ_ν²Δt²/2)`: even, `g(0) = 1`.
pub fn envelope(model: &SpectralModel, dt: f64) -> f64 {
    let x = model.sigma_nu() * dt;
    (-0.5 * x * x).exp()
}

/// `l_c = λ₀²/Δλ`.
pub fn coherence_length(model: &SpectralModel) -> f64 {
    model.center_wavelength_m.powi(2) / model.bandwidth_m
}

/// `n`-point Gauss–Hermite rule for the spectral density: `(ν, weight)`
/// pairs, exact for polynomials of degree below `2n`, weights summing to 1.
pub fn quadrature_grid(model: &SpectralModel, n: usize) -> Result<Vec<(f64, f64)>> {
    if n < 8 {
        return Err(Error::param("n", format!("quadrature needs at least 8 nodes, got {n}")));
    }
    let s = model.sigma_nu();
    Ok(gauss_hermite_standard(n)?.into_iter().map(|(x, w)| (s * x, w)).collect())
}

/// Nodes and weights for the standard normal density (Golub–Welsch).
fn gauss_hermite_standard(n: usize) -> Result<Vec<(f64, f64)>> {
    // Jacobi matrix of the monic probabilists' Hermite recurrence:
    // zero diagonal, off-diagonal √k.
    let mut d = vec![0.0f64; n];
    let mut e: Vec<f64> = (1..n).map(|k| (k as f64).sqrt()).chain(std::iter::once(0.0)).collect();
    // first row of the eigenvector matrix
    let mut z = vec![0.0; n];
    z[0] = 1.0;

    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 100 {
                return Err(Error::param("n", "Gauss-Hermite eigenvalue iteration did not converge"));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m;
            let mut deflated = false;
            while i > l {
                i -= 1;
                let f = s * e[i];
                let b = c * e[i];
                r = f.hypot(g);
                e[i + 1] = r;
                if r == 0.0 {
                    d[i + 1] -= p;
                    e[m] = 0.0;
                    deflated = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[i + 1] - p;
                r = (d[i] - g) * s + 2.0 * c * b;
                p = s * r;
                d[i + 1] = g + p;
                g = c * r - b;
                let zf = z[i + 1];
                z[i + 1] = s * z[i] + c * zf;
                z[i] = c * z[i] - s * zf;
            }
            if deflated {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut out: Vec<(f64, f64)> = d.into_iter().zip(z.into_iter().map(|v| v * v)).collect();
    out.sort_by(|x, y| x.0.total_cmp(&y.0));
    Ok(out)
}

/// Two interfering source paths whose two-photon sum delays differ by more
/// than the pump coherence length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PumpCoherenceWarning {
    /// 1-based path indices, `j < k`.
    pub paths: (usize, usize),
    pub spread_m: f64,
    pub pump_coherence_length_m: f64,
}

impl std::fmt::Display for PumpCoherenceWarning {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "paths {} and {} differ by {} m in two-photon delay, beyond the pump coherence length {} m",
            self.paths.0, self.paths.1, self.spread_m, self.pump_coherence_length_m
        )
    }
}

/// Flags path pairs that meet at some detector pair with sum delays
/// `τ_A + τ_B` further apart than the pump coherence length.
pub fn pump_coherence_check(
    net_a: &OpticalNetwork,
    net_b: &OpticalNetwork,
    model: &SpectralModel,
) -> Result<Vec<PumpCoherenceWarning>> {
    let ea = delay_expansion_matrix(net_a, Photon::A)?;
    let eb = delay_expansion_matrix(net_b, Photon::B)?;
    let mut worst = [[0.0f64; N_PATHS]; N_PATHS];
    for a in 0..net_a.n_modes() {
        for b in 0..net_b.n_modes() {
            // sum delays (m) of every term reaching (a, b) from each path
            let per_path: Vec<Vec<f64>> = (1..=N_PATHS)
                .map(|j| {
                    let ta = ea.entry(a, input_slot(Photon::A, j).unwrap());
                    let tb = eb.entry(b, input_slot(Photon::B, j).unwrap());
                    let mut v = Vec::new();
                    for x in ta.terms() {
                        for y in tb.terms() {
                            v.push(SPEED_OF_LIGHT * (x.delay_s - y.delay_s));
                        }
                    }
                    v
                })
                .collect();
            for j in 0..N_PATHS {
                for k in j + 1..N_PATHS {
                    for sj in &per_path[j] {
                        for sk in &per_path[k] {
                            worst[j][k] = worst[j][k].max((sj - sk).abs());
                        }
                    }
                }
            }
        }
    }
    let lp = model.pump_coherence_length_m;
    let mut out = Vec::new();
    for j in 0..N_PATHS {
        for k in j + 1..N_PATHS {
            if worst[j][k] > lp {
                out.push(PumpCoherenceWarning { paths: (j + 1, k + 1), spread_m: worst[j][k], pump_coherence_length_m: lp });
            }
        }
    }
    Ok(out)
}
