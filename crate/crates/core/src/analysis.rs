//! Visibilities, the entanglement witness and envelope widths.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::coincidence::ScanResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VisibilityDefinition {
    /// Correlated against non-correlated mode pairs.
    StandardBasis,
    /// Extremes of a count trace.
    Fringe,
    /// Sinusoid fitted to a trace with known phases.
    FringeFit,
    /// Peak over the non-interfering level.
    Enhancement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisibilityReport {
    pub value: f64,
    /// First-order Poisson uncertainty.
    pub uncertainty: f64,
    pub definition: VisibilityDefinition,
}

/// `(a − b)/(a + b)` with Poisson errors on `a` and `b`.
fn contrast(a: f64, b: f64, definition: VisibilityDefinition) -> VisibilityReport {
    let s = a + b;
    VisibilityReport { value: (a - b) / s, uncertainty: (4.0 * a * b / (s * s * s)).sqrt(), definition }
}

fn check_counts(counts: &[f64]) -> Result<()> {
    if counts.iter().any(|c| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::param("counts", "counts must be finite and non-negative"));
    }
    Ok(())
}

/// `V₀⁽ⁱʲ⁾ = (C_ii + C_jj − C_ji − C_ij)/(C_ii + C_jj + C_ji + C_ij)`.
pub fn visibility_standard(c_ii: f64, c_jj: f64, c_ji: f64, c_ij: f64) -> Result<VisibilityReport> {
    check_counts(&[c_ii, c_jj, c_ji, c_ij])?;
    let (a, b) = (c_ii + c_jj, c_ji + c_ij);
    if a + b == 0.0 {
        return Err(Error::UndefinedVisibility("all four counts are zero"));
    }
    Ok(contrast(a, b, VisibilityDefinition::StandardBasis))
}

/// `(C_max − C_min)/(C_max + C_min)` over the trace.
pub fn visibility_fringe(trace: &[f64]) -> Result<VisibilityReport> {
    if trace.len() < 4 {
        return Err(Error::param("trace", format!("need at least 4 acquisitions, got {}", trace.len())));
    }
    check_counts(trace)?;
    let max = trace.iter().copied().fold(f64::MIN, f64::max);
    let min = trace.iter().copied().fold(f64::MAX, f64::min);
    if max == 0.0 {
        return Err(Error::UndefinedVisibility("trace is identically zero"));
    }
    Ok(contrast(max, min, VisibilityDefinition::Fringe))
}

/// Poisson-weighted least-squares fit of `C(θ) = c₀ + c₁cos θ + c₂sin θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub offset: f64,
    pub cos: f64,
    pub sin: f64,
    pub covariance: [[f64; 3]; 3],
}

impl FringeFit {
    pub fn amplitude(&self) -> f64 {
        self.cos.hypot(self.sin)
    }

    /// Fitted upper envelope `c₀ + √(c₁² + c₂²)`.
    pub fn upper(&self) -> f64 {
        self.offset + self.amplitude()
    }

    pub fn lower(&self) -> f64 {
        self.offset - self.amplitude()
    }

    fn cov(&self) -> Matrix3<f64> {
        Matrix3::from_fn(|i, j| self.covariance[i][j])
    }

    fn propagate(&self, g: Vector3<f64>) -> f64 {
        (g.transpose() * self.cov() * g)[0].max(0.0).sqrt()
    }

    /// Uncertainty of [`FringeFit::upper`].
    pub fn upper_uncertainty(&self) -> f64 {
        let a = self.amplitude();
        let g = if a > 0.0 { Vector3::new(1.0, self.cos / a, self.sin / a) } else { Vector3::new(1.0, 0.0, 0.0) };
        self.propagate(g)
    }
}

pub fn fit_fringe(trace: &[f64], phases: &[f64]) -> Result<FringeFit> {
    if trace.len() != phases.len() {
        return Err(Error::param("phases", "one phase per acquisition is needed"));
    }
    if trace.len() < 4 {
        return Err(Error::param("trace", format!("need at least 4 acquisitions, got {}", trace.len())));
    }
    check_counts(trace)?;
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (&c, &th) in trace.iter().zip(phases) {
        let x = Vector3::new(1.0, th.cos(), th.sin());
        let w = 1.0 / c.max(1.0);
        normal += w * x * x.transpose();
        rhs += w * c * x;
    }
    let eig = normal.symmetric_eigenvalues();
    if eig.min() <= 1e-10 * eig.max() {
        return Err(Error::UndefinedVisibility("phases do not cover enough of the fringe to fit"));
    }
    let cov = normal
        .try_inverse()
        .ok_or(Error::UndefinedVisibility("phases do not cover enough of the fringe to fit"))?;
    let p = cov * rhs;
    Ok(FringeFit { offset: p[0], cos: p[1], sin: p[2], covariance: std::array::from_fn(|i| std::array::from_fn(|j| cov[(i, j)])) })
}

/// Visibility `√(c₁² + c₂²)/c₀` of the fitted sinusoid.
pub fn visibility_fringe_fit(trace: &[f64], phases: &[f64]) -> Result<VisibilityReport> {
    let f = fit_fringe(trace, phases)?;
    if f.offset <= 0.0 {
        return Err(Error::UndefinedVisibility("fitted mean level is not positive"));
    }
    let amp = f.amplitude();
    let v = amp / f.offset;
    let g = if amp > 0.0 {
        Vector3::new(-v / f.offset, f.cos / (amp * f.offset), f.sin / (amp * f.offset))
    } else {
        Vector3::new(0.0, 0.0, 0.0)
    };
    Ok(VisibilityReport { value: v, uncertainty: f.propagate(g), definition: VisibilityDefinition::FringeFit })
}

/// `(C_peak − C_baseline)/C_baseline`.
pub fn visibility_enhancement(peak: f64, baseline: f64) -> Result<VisibilityReport> {
    check_counts(&[peak, baseline])?;
    if baseline == 0.0 {
        return Err(Error::UndefinedVisibility("baseline is zero"));
    }
    let var = peak / (baseline * baseline) + peak * peak / (baseline * baseline * baseline);
    Ok(VisibilityReport {
        value: (peak - baseline) / baseline,
        uncertainty: var.sqrt(),
        definition: VisibilityDefinition::Enhancement,
    })
}

/// `⟨W⟩ = 1 − V_zz − V_xx`; negative certifies entanglement.
///
/// Written as `1 − (V_zz + V_xx)` so the sign is exactly that of `1 − s`
/// for the rounded sum `s`.
pub fn witness_value(v_zz: f64, v_xx: f64) -> f64 {
    1.0 - (v_zz + v_xx)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    pub v_zz: f64,
    pub v_xx: f64,
    pub value: f64,
    pub uncertainty: f64,
    pub certified: bool,
}

pub fn witness_report(v_zz: &VisibilityReport, v_xx: &VisibilityReport) -> WitnessReport {
    let value = witness_value(v_zz.value, v_xx.value);
    WitnessReport {
        v_zz: v_zz.value,
        v_xx: v_xx.value,
        value,
        uncertainty: v_zz.uncertainty.hypot(v_xx.uncertainty),
        certified: value < 0.0,
    }
}

/// Full width at half maximum of `values − baseline`, the baseline being the
/// mean of the two end samples. Crossings are linearly interpolated.
pub fn fwhm(deltas: &[f64], values: &[f64]) -> Result<f64> {
    if deltas.len() != values.len() || deltas.len() < 3 {
        return Err(Error::param("scan", "need at least 3 samples with one value per delay"));
    }
    let base = 0.5 * (values[0] + values[values.len() - 1]);
    let y: Vec<f64> = values.iter().map(|v| v - base).collect();
    let (peak, ymax) = y.iter().copied().enumerate().fold((0, f64::MIN), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
    if !(ymax > 0.0) {
        return Err(Error::param("scan", "envelope has no maximum above its baseline"));
    }
    let half = 0.5 * ymax;
    let cross = |i: usize, j: usize| deltas[i] + (half - y[i]) * (deltas[j] - deltas[i]) / (y[j] - y[i]);
    let left = (1..=peak).rev().find(|&i| y[i - 1] < half).map(|i| cross(i - 1, i)).ok_or(Error::NoCrossing { side: "left" })?;
    let right = (peak..y.len() - 1).find(|&i| y[i + 1] < half).map(|i| cross(i, i + 1)).ok_or(Error::NoCrossing { side: "right" })?;
    Ok(right - left)
}

/// FWHM of a scan's fringe amplitude `|Z|(δ)`.
pub fn scan_fwhm(scan: &ScanResult) -> Result<f64> {
    fwhm(&scan.deltas(), &scan.fringe_amplitudes())
}
