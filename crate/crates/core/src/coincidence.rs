//! Coincidence probabilities for the path-entangled pair.
//!
//! Photon A leaves through output `a` and photon B through output `b` with
//! probability
//!
//! ```text
//! P[a][b] = Σ_{j,k} m_jk ⟨u_j(ν) u_k(ν)*⟩_S,   u_j = c_j T^A_{a,sA(j)}(ν) T^B_{b,sB(j)}(ν)
//! ```
//!
//! where `⟨·⟩_S` averages over the spectrum and `m_jk` is the mode overlap of
//! source paths `j` and `k` (`m_jj = 1`). The analytic engine expands every
//! `u_j` into delay terms `a_p e^{iνt_p}` and uses `⟨e^{iνΔt}⟩_S = g(Δt)`;
//! the quadrature engine evaluates the transfer matrices on a Gauss–Hermite
//! grid instead.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{DelayExpansion, DEFAULT_TERM_CAP};
use crate::optics::{
    default_network, delay_expansion_matrix, transfer_matrix, Interferometer, InterferometerSettings, OpticalNetwork,
    SPEED_OF_LIGHT,
};
use crate::spectral::{envelope, quadrature_grid, SpectralModel};
use crate::state::{input_slot, Photon, TwoPhotonPathState, N_PATHS};

/// Overlap of the interfering mode pairs.
///
/// `internal` couples paths 2 and 3, `external` couples 1 and 4, and `cross`
/// couples an internal path with an external one (the BS₂ interference).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overlap {
    pub internal: f64,
    pub external: f64,
    pub cross: f64,
}

impl Default for Overlap {
    fn default() -> Self {
        Overlap { internal: 1.0, external: 1.0, cross: 1.0 }
    }
}

impl Overlap {
    pub fn uniform(m: f64) -> Result<Self> {
        Overlap::per_arm(m, m, m)
    }

    pub fn per_arm(internal: f64, external: f64, cross: f64) -> Result<Self> {
        let o = Overlap { internal, external, cross };
        o.validate()?;
        Ok(o)
    }

    /// Each overlap must lie in [0, 1] and the matrix must be positive
    /// semidefinite, otherwise probabilities could go negative.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("overlap.internal", self.internal), ("overlap.external", self.external), ("overlap.cross", self.cross)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::param(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        let m = self.matrix();
        let eig = SymmetricEigen::new(Matrix4::from_fn(|i, j| m[i][j]));
        let min = eig.eigenvalues.min();
        if min < -1e-12 {
            return Err(Error::param(
                "overlap",
                format!("overlap matrix is not positive semidefinite (smallest eigenvalue {min})"),
            ));
        }
        Ok(())
    }

    /// Overlap of source paths `j`, `k` (1-based).
    pub fn pair(&self, j: usize, k: usize) -> f64 {
        let internal = |p: usize| p == 2 || p == 3;
        if j == k {
            1.0
        } else if internal(j) && internal(k) {
            self.internal
        } else if !internal(j) && !internal(k) {
            self.external
        } else {
            self.cross
        }
    }

    /// 0-based 4×4 overlap matrix.
    pub fn matrix(&self) -> [[f64; N_PATHS]; N_PATHS] {
        let mut m = [[0.0; N_PATHS]; N_PATHS];
        for (j, row) in m.iter_mut().enumerate() {
            for (k, v) in row.iter_mut().enumerate() {
                *v = self.pair(j + 1, k + 1);
            }
        }
        m
    }
}

/// `P[a][b]` over all output pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceTable {
    pub p: Vec<Vec<f64>>,
    pub overlap: Overlap,
}

impl CoincidenceTable {
    pub fn n_modes(&self) -> usize {
        self.p.len()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.p[a][b]
    }

    pub fn total(&self) -> f64 {
        self.p.iter().flatten().sum()
    }

    /// Probability that `photon` leaves through `mode`, whatever the other does.
    pub fn marginal(&self, photon: Photon, mode: usize) -> f64 {
        match photon {
            Photon::A => self.p[mode].iter().sum(),
            Photon::B => self.p.iter().map(|row| row[mode]).sum(),
        }
    }

    /// Largest absolute entry difference.
    pub fn max_abs_diff(&self, other: &CoincidenceTable) -> f64 {
        self.p
            .iter()
            .flatten()
            .zip(other.p.iter().flatten())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }
}

fn check_pair(state: &TwoPhotonPathState, net_a: &OpticalNetwork, net_b: &OpticalNetwork, overlap: &Overlap) -> Result<()> {
    let n2 = state.norm_sqr();
    if (n2 - 1.0).abs() > 1e-10 {
        return Err(Error::NotNormalized { norm_sq: n2 });
    }
    if net_a.n_modes() != net_b.n_modes() || net_a.n_modes() < N_PATHS {
        return Err(Error::param("network", "both photons need the same number of modes, at least 4"));
    }
    overlap.validate()
}

/// One delay term of a two-photon path amplitude, keeping the single-photon
/// delays apart.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTerm {
    /// 1-based source path.
    pub path: usize,
    /// Includes `c_j` and the carrier phase.
    pub coefficient: Complex64,
    /// Photon A's term time `τ_A/c`.
    pub time_a_s: f64,
    /// Photon B's term time `−τ_B/c`.
    pub time_b_s: f64,
}

impl PathTerm {
    /// Argument of the envelope, `t_A + t_B`.
    pub fn envelope_time_s(&self) -> f64 {
        self.time_a_s + self.time_b_s
    }

    /// Two-photon path length `τ_A + τ_B` in metres: the pump sees this one.
    pub fn sum_delay_m(&self) -> f64 {
        SPEED_OF_LIGHT * (self.time_a_s - self.time_b_s)
    }
}

/// All delay terms reaching outputs `(a, b)`, path by path.
pub fn path_terms(
    state: &TwoPhotonPathState,
    net_a: &OpticalNetwork,
    net_b: &OpticalNetwork,
    a: usize,
    b: usize,
) -> Result<Vec<PathTerm>> {
    let ea = delay_expansion_matrix(net_a, Photon::A)?;
    let eb = delay_expansion_matrix(net_b, Photon::B)?;
    let mut out = Vec::new();
    for j in 1..=N_PATHS {
        let c = state.amplitude(j);
        for x in ea.entry(a, input_slot(Photon::A, j)?).terms() {
            for y in eb.entry(b, input_slot(Photon::B, j)?).terms() {
                out.push(PathTerm {
                    path: j,
                    coefficient: c * x.coefficient * y.coefficient,
                    time_a_s: x.delay_s,
                    time_b_s: y.delay_s,
                });
            }
        }
    }
    Ok(out)
}

/// Analytic coincidence table.
pub fn coincidence_probability(
    state: &TwoPhotonPathState,
    net_a: &OpticalNetwork,
    net_b: &OpticalNetwork,
    model: &SpectralModel,
    overlap: &Overlap,
) -> Result<CoincidenceTable> {
    check_pair(state, net_a, net_b, overlap)?;
    let ea = delay_expansion_matrix(net_a, Photon::A)?;
    let eb = delay_expansion_matrix(net_b, Photon::B)?;
    let m = overlap.matrix();
    let n = net_a.n_modes();
    let mut p = vec![vec![0.0; n]; n];
    for (a, row) in p.iter_mut().enumerate() {
        for (b, cell) in row.iter_mut().enumerate() {
            let mut u: Vec<DelayExpansion> = Vec::with_capacity(N_PATHS);
            for j in 1..=N_PATHS {
                let ta = ea.entry(a, input_slot(Photon::A, j)?);
                let tb = eb.entry(b, input_slot(Photon::B, j)?);
                u.push(ta.product(tb, DEFAULT_TERM_CAP)?.scaled(state.amplitude(j)));
            }
            let mut acc = 0.0;
            for j in 0..N_PATHS {
                for k in 0..N_PATHS {
                    if m[j][k] == 0.0 {
                        continue;
                    }
                    let mut s = 0.0;
                    for x in u[j].terms() {
                        for y in u[k].terms() {
                            s += (x.coefficient * y.coefficient.conj()).re * envelope(model, x.delay_s - y.delay_s);
                        }
                    }
                    acc += m[j][k] * s;
                }
            }
            *cell = acc;
        }
    }
    Ok(CoincidenceTable { p, overlap: *overlap })
}

/// Coincidence table by direct spectral quadrature with `n` nodes.
pub fn quadrature_probability(
    state: &TwoPhotonPathState,
    net_a: &OpticalNetwork,
    net_b: &OpticalNetwork,
    model: &SpectralModel,
    overlap: &Overlap,
    n: usize,
) -> Result<CoincidenceTable> {
    if n < 64 {
        return Err(Error::param("n", format!("quadrature oracle needs at least 64 nodes, got {n}")));
    }
    check_pair(state, net_a, net_b, overlap)?;
    let grid = quadrature_grid(model, n)?;
    let m = overlap.matrix();
    let modes = net_a.n_modes();
    let slots_a: Vec<usize> = (1..=N_PATHS).map(|j| input_slot(Photon::A, j)).collect::<Result<_>>()?;
    let slots_b: Vec<usize> = (1..=N_PATHS).map(|j| input_slot(Photon::B, j)).collect::<Result<_>>()?;
    let mut p = vec![vec![0.0; modes]; modes];
    for &(nu, w) in &grid {
        let ta = transfer_matrix(net_a, Photon::A, nu)?;
        let tb = transfer_matrix(net_b, Photon::B, nu)?;
        for (a, row) in p.iter_mut().enumerate() {
            for (b, cell) in row.iter_mut().enumerate() {
                let mut u = [Complex64::new(0.0, 0.0); N_PATHS];
                for j in 0..N_PATHS {
                    u[j] = state.amplitudes()[j] * ta[(a, slots_a[j])] * tb[(b, slots_b[j])];
                }
                let mut s = 0.0;
                for j in 0..N_PATHS {
                    for k in 0..N_PATHS {
                        s += m[j][k] * (u[j] * u[k].conj()).re;
                    }
                }
                *cell += w * s;
            }
        }
    }
    Ok(CoincidenceTable { p, overlap: *overlap })
}

/// Delay varied by a scan.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanVariable {
    DeltaX1,
    DeltaX2,
    DeltaX3,
    /// `Δx₂ = δ`, `Δx₃ = 2δ`.
    Hybrid,
}

impl ScanVariable {
    pub const ALL: [ScanVariable; 4] = [ScanVariable::DeltaX1, ScanVariable::DeltaX2, ScanVariable::DeltaX3, ScanVariable::Hybrid];

    /// `base` with the scanned delay(s) set from `delta_m`.
    pub fn apply(self, base: &InterferometerSettings, delta_m: f64) -> InterferometerSettings {
        let mut s = *base;
        match self {
            ScanVariable::DeltaX1 => s.delta_x1_m = delta_m,
            ScanVariable::DeltaX2 => s.delta_x2_m = delta_m,
            ScanVariable::DeltaX3 => s.delta_x3_m = delta_m,
            ScanVariable::Hybrid => {
                s.delta_x2_m = delta_m;
                s.delta_x3_m = 2.0 * delta_m;
            }
        }
        s
    }

    /// Interferometer whose fringe this scan resolves.
    pub fn probe(self) -> Interferometer {
        match self {
            ScanVariable::DeltaX1 => Interferometer::InternalBs1,
            ScanVariable::DeltaX3 => Interferometer::ExternalBs1,
            ScanVariable::DeltaX2 | ScanVariable::Hybrid => Interferometer::Bs2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScanVariable::DeltaX1 => "delta_x1",
            ScanVariable::DeltaX2 => "delta_x2",
            ScanVariable::DeltaX3 => "delta_x3",
            ScanVariable::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for ScanVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScanVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delta_x1" | "dx1" | "x1" => Ok(ScanVariable::DeltaX1),
            "delta_x2" | "dx2" | "x2" => Ok(ScanVariable::DeltaX2),
            "delta_x3" | "dx3" | "x3" => Ok(ScanVariable::DeltaX3),
            "hybrid" => Ok(ScanVariable::Hybrid),
            other => Err(Error::param("scan_variable", format!("unknown scan variable {other:?}"))),
        }
    }
}

/// Everything a delay scan needs besides the state and overlap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanSpec {
    pub variable: ScanVariable,
    pub start_m: f64,
    pub stop_m: f64,
    pub steps: usize,
}

impl ScanSpec {
    pub fn symmetric(variable: ScanVariable, half_range_m: f64, steps: usize) -> Self {
        ScanSpec { variable, start_m: -half_range_m, stop_m: half_range_m, steps }
    }

    pub fn deltas(&self) -> Vec<f64> {
        let h = (self.stop_m - self.start_m) / (self.steps - 1) as f64;
        (0..self.steps).map(|i| self.start_m + i as f64 * h).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub delta_m: f64,
    pub p_raw: f64,
    pub p_envelope_max: f64,
    pub p_envelope_min: f64,
    /// Sum of the whole coincidence table at this point.
    pub total: f64,
}

impl ScanPoint {
    /// Fringe amplitude `|Z|`.
    pub fn fringe_amplitude(&self) -> f64 {
        0.5 * (self.p_envelope_max - self.p_envelope_min)
    }

    /// `(max − min)/(max + min)` of the fringe at this delay.
    pub fn visibility(&self) -> f64 {
        let s = self.p_envelope_max + self.p_envelope_min;
        if s > 0.0 {
            (self.p_envelope_max - self.p_envelope_min) / s
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub variable: ScanVariable,
    pub detectors: (usize, usize),
    pub points: Vec<ScanPoint>,
}

impl ScanResult {
    pub fn deltas(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta_m).collect()
    }

    pub fn fringe_amplitudes(&self) -> Vec<f64> {
        self.points.iter().map(ScanPoint::fringe_amplitude).collect()
    }
}

/// Coincidence probability at the detector pair, with its fringe envelope.
///
/// A probe phase θ on photon A next to the scanned delay enters the
/// probability as `X + Re(Z e^{iθ})`, so three evaluations fix `X` and `Z`
/// and the envelope is `X ± |Z|`.
pub fn scan_point(
    state: &TwoPhotonPathState,
    model: &SpectralModel,
    overlap: &Overlap,
    settings: &InterferometerSettings,
    probe: Interferometer,
) -> Result<ScanPoint> {
    let (a, b) = settings.detector_slots();
    let pair = default_network(settings)?;
    let at = |theta: f64| -> Result<CoincidenceTable> {
        let p = pair.with_phase(settings, probe, theta)?;
        coincidence_probability(state, &p.a, &p.b, model, overlap)
    };
    let raw = coincidence_probability(state, &pair.a, &pair.b, model, overlap)?;
    let p0 = raw.get(a, b);
    let p_pi = at(PI)?.get(a, b);
    let p_half = at(FRAC_PI_2)?.get(a, b);
    let x = 0.5 * (p0 + p_pi);
    let z = Complex64::new(0.5 * (p0 - p_pi), x - p_half).norm();
    Ok(ScanPoint { delta_m: 0.0, p_raw: p0, p_envelope_max: x + z, p_envelope_min: (x - z).max(0.0), total: raw.total() })
}

/// Delay scan on the chained interferometer; points are evaluated in
/// parallel and returned in scan order.
pub fn scan(
    state: &TwoPhotonPathState,
    model: &SpectralModel,
    overlap: &Overlap,
    base: &InterferometerSettings,
    spec: &ScanSpec,
) -> Result<ScanResult> {
    if spec.steps < 2 {
        return Err(Error::param("steps", format!("a scan needs at least 2 steps, got {}", spec.steps)));
    }
    if !(spec.start_m.is_finite() && spec.stop_m.is_finite()) || spec.start_m == spec.stop_m {
        return Err(Error::param("range", "scan range must be finite and non-empty"));
    }
    let probe = spec.variable.probe();
    let points = spec
        .deltas()
        .into_par_iter()
        .map(|d| {
            let s = spec.variable.apply(base, d);
            scan_point(state, model, overlap, &s, probe).map(|p| ScanPoint { delta_m: d, ..p })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScanResult { variable: spec.variable, detectors: base.detector_slots(), points })
}

/// Cross term between two source paths at one scan point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossTerm {
    pub paths: (usize, usize),
    /// Envelope argument `Δt = (t_A + t_B)_j − (t_A + t_B)_k`.
    pub envelope_time_s: f64,
    /// `(τ_A + τ_B)_j − (τ_A + τ_B)_k`, metres.
    pub sum_delay_m: f64,
}

/// Cross terms between paths `j` and `k` reaching the detectors of `settings`.
pub fn cross_terms(
    state: &TwoPhotonPathState,
    settings: &InterferometerSettings,
    j: usize,
    k: usize,
) -> Result<Vec<CrossTerm>> {
    let (a, b) = settings.detector_slots();
    let pair = default_network(settings)?;
    let terms = path_terms(state, &pair.a, &pair.b, a, b)?;
    let mut out = Vec::new();
    for x in terms.iter().filter(|t| t.path == j) {
        for y in terms.iter().filter(|t| t.path == k) {
            out.push(CrossTerm {
                paths: (j, k),
                envelope_time_s: x.envelope_time_s() - y.envelope_time_s(),
                sum_delay_m: x.sum_delay_m() - y.sum_delay_m(),
            });
        }
    }
    Ok(out)
}

/// Rate at which the carrier phase `ω₀·ΔS/c` of the `(j, k)` cross term
/// advances with the scanned delay, rad/m, from the expansion data at
/// `delta_m` and `delta_m + step_m`.
pub fn cross_term_carrier_frequency(
    state: &TwoPhotonPathState,
    base: &InterferometerSettings,
    variable: ScanVariable,
    (j, k): (usize, usize),
    delta_m: f64,
    step_m: f64,
) -> Result<f64> {
    let first = |d: f64| -> Result<CrossTerm> {
        cross_terms(state, &variable.apply(base, d), j, k)?
            .into_iter()
            .next()
            .ok_or_else(|| Error::param("paths", format!("paths {j} and {k} do not meet at the detectors")))
    };
    let s0 = first(delta_m)?.sum_delay_m;
    let s1 = first(delta_m + step_m)?.sum_delay_m;
    let omega0 = 2.0 * PI * SPEED_OF_LIGHT / base.wavelength_m;
    Ok(omega0 / SPEED_OF_LIGHT * (s1 - s0) / step_m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validation::random_network;
    use crate::optics::OpticalElement;
    use crate::spectral::coherence_length;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> SpectralModel {
        SpectralModel::default()
    }

    fn default_pair() -> crate::optics::NetworkPair {
        default_network(&InterferometerSettings::default()).unwrap()
    }

    #[test]
    fn zero_delay_table_is_normalized() {
        let pair = default_pair();
        let t = coincidence_probability(&TwoPhotonPathState::default(), &pair.a, &pair.b, &model(), &Overlap::default())
            .unwrap();
        assert!((t.total() - 1.0).abs() < 1e-12);
        assert!(t.p.iter().flatten().all(|&v| v >= -1e-15));
    }

    #[test]
    fn single_path_factorizes() {
        let one = Complex64::new(1.0, 0.0);
        let z = Complex64::new(0.0, 0.0);
        let state = TwoPhotonPathState::from_amplitudes([one, z, z, z]).unwrap();
        let s = InterferometerSettings::with_delays(1e-5, 2e-5, -3e-5);
        let pair = default_network(&s).unwrap();
        let t = coincidence_probability(&state, &pair.a, &pair.b, &model(), &Overlap::default()).unwrap();
        let ta = transfer_matrix(&pair.a, Photon::A, 0.0).unwrap();
        let tb = transfer_matrix(&pair.b, Photon::B, 0.0).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                let expect = ta[(a, input_slot(Photon::A, 1).unwrap())].norm_sqr()
                    * tb[(b, input_slot(Photon::B, 1).unwrap())].norm_sqr();
                assert!((t.get(a, b) - expect).abs() < 1e-14);
                assert!((t.get(a, b) - t.marginal(Photon::A, a) * t.marginal(Photon::B, b)).abs() < 1e-14);
            }
        }
    }

    fn random_state(rng: &mut impl Rng) -> TwoPhotonPathState {
        let amps = std::array::from_fn(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        TwoPhotonPathState::normalized(amps).unwrap()
    }

    #[test]
    fn analytic_matches_quadrature() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lc = coherence_length(&model());
        for _ in 0..20 {
            let a = random_network(&mut rng, 0.5 * lc);
            let b = random_network(&mut rng, 0.5 * lc);
            let st = random_state(&mut rng);
            let ov = Overlap::uniform(rng.random()).unwrap();
            let x = coincidence_probability(&st, &a, &b, &model(), &ov).unwrap();
            let y = quadrature_probability(&st, &a, &b, &model(), &ov, 512).unwrap();
            assert!(x.max_abs_diff(&y) < 1e-9, "{}", x.max_abs_diff(&y));
            assert!((x.total() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn quadrature_is_grid_independent_without_delays() {
        let pair = default_pair();
        let st = TwoPhotonPathState::from_phases([0.3, -1.0, 2.0, 0.1]);
        let ov = Overlap::per_arm(0.7, 0.8, 0.6).unwrap();
        let x = quadrature_probability(&st, &pair.a, &pair.b, &model(), &ov, 64).unwrap();
        let y = quadrature_probability(&st, &pair.a, &pair.b, &model(), &ov, 1024).unwrap();
        assert!(x.max_abs_diff(&y) < 1e-13);
        assert!(quadrature_probability(&st, &pair.a, &pair.b, &model(), &ov, 32).is_err());
    }

    #[test]
    fn overlap_validation() {
        assert!(Overlap::uniform(1.2).is_err());
        assert!(Overlap::uniform(-0.1).is_err());
        // strong internal and external coherence with none across is not PSD-compatible
        assert!(Overlap::per_arm(1.0, 1.0, 0.0).is_ok());
        assert!(Overlap::per_arm(0.0, 0.0, 1.0).is_err());
        assert!(Overlap::per_arm(0.73, 0.80, 0.706).is_ok());
        let o = Overlap::per_arm(0.1, 0.2, 0.3).unwrap();
        assert_eq!(o.pair(2, 3), 0.1);
        assert_eq!(o.pair(4, 1), 0.2);
        assert_eq!(o.pair(1, 3), 0.3);
        assert_eq!(o.pair(3, 3), 1.0);
    }

    #[test]
    fn rejects_unnormalized_state() {
        let pair = default_pair();
        let st = TwoPhotonPathState::unchecked([Complex64::new(1.0, 0.0); N_PATHS]);
        assert!(matches!(
            coincidence_probability(&st, &pair.a, &pair.b, &model(), &Overlap::default()),
            Err(Error::NotNormalized { .. })
        ));
    }

    #[test]
    fn decohered_limit_equals_incoherent_sum() {
        let lc = coherence_length(&model());
        let st = TwoPhotonPathState::default();
        let base = InterferometerSettings::default();
        let far = scan_point(&st, &model(), &Overlap::default(), &ScanVariable::DeltaX1.apply(&base, 10.0 * lc), Interferometer::InternalBs1)
            .unwrap();
        let none = scan_point(&st, &model(), &Overlap::per_arm(0.0, 1.0, 0.0).unwrap(), &base, Interferometer::InternalBs1)
            .unwrap();
        assert!((far.p_raw - none.p_raw).abs() < 1e-12, "{} {}", far.p_raw, none.p_raw);
        assert!(far.fringe_amplitude() < 1e-12);
    }

    #[test]
    fn probe_envelope_matches_dense_phase_sweep() {
        let st = TwoPhotonPathState::from_phases([0.2, 0.0, 1.1, -0.4]);
        let ov = Overlap::per_arm(0.7, 0.9, 0.6).unwrap();
        let s = InterferometerSettings::with_delays(3e-6, 4e-6, 8e-6);
        for which in [Interferometer::InternalBs1, Interferometer::ExternalBs1, Interferometer::Bs2] {
            let pt = scan_point(&st, &model(), &ov, &s, which).unwrap();
            let (a, b) = s.detector_slots();
            let pair = default_network(&s).unwrap();
            let (mut lo, mut hi) = (f64::MAX, f64::MIN);
            for i in 0..3600 {
                let th = 2.0 * PI * i as f64 / 3600.0;
                let q = pair.with_phase(&s, which, th).unwrap();
                let v = coincidence_probability(&st, &q.a, &q.b, &model(), &ov).unwrap().get(a, b);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            assert!((hi - pt.p_envelope_max).abs() < 1e-6 * hi, "{which:?}");
            assert!((lo - pt.p_envelope_min).abs() < 1e-6 * hi, "{which:?}");
        }
    }

    #[test]
    fn scan_is_ordered_and_normalized() {
        let lc = coherence_length(&model());
        let spec = ScanSpec::symmetric(ScanVariable::Hybrid, 3.0 * lc, 41);
        let r = scan(&TwoPhotonPathState::default(), &model(), &Overlap::default(), &InterferometerSettings::default(), &spec)
            .unwrap();
        assert_eq!(r.points.len(), 41);
        assert!(r.points.windows(2).all(|w| w[0].delta_m < w[1].delta_m));
        assert!(r.points.iter().all(|p| (p.total - 1.0).abs() < 1e-10));
        let bad = ScanSpec { steps: 1, ..spec };
        assert!(scan(&TwoPhotonPathState::default(), &model(), &Overlap::default(), &InterferometerSettings::default(), &bad).is_err());
    }

    #[test]
    fn visibility_decreases_away_from_zero() {
        let lc = coherence_length(&model());
        let ov = Overlap::per_arm(0.9, 0.8, 0.7).unwrap();
        let full = TwoPhotonPathState::default();
        let cases = [
            (ScanVariable::DeltaX1, full.restricted(&[2, 3]).unwrap()),
            (ScanVariable::DeltaX3, full.restricted(&[1, 4]).unwrap()),
            (ScanVariable::Hybrid, full),
        ];
        for (v, st) in cases {
            let spec = ScanSpec::symmetric(v, 4.0 * lc, 81);
            let r = scan(&st, &model(), &ov, &InterferometerSettings::default(), &spec).unwrap();
            let mid = 40;
            for i in mid..80 {
                assert!(r.points[i + 1].visibility() <= r.points[i].visibility() + 1e-12, "{v} at {i}");
                assert!(r.points[mid - (i - mid) - 1].visibility() <= r.points[mid - (i - mid)].visibility() + 1e-12);
            }
        }
    }

    #[test]
    fn self_stabilized_cross_term() {
        let st = TwoPhotonPathState::default();
        let base = InterferometerSettings::default();
        for d in [0.0, 1e-5, -7e-5, 3e-4] {
            let ct = cross_terms(&st, &ScanVariable::DeltaX1.apply(&base, d), 2, 3).unwrap();
            assert_eq!(ct.len(), 1);
            assert_eq!(ct[0].sum_delay_m, 0.0);
            assert!((ct[0].envelope_time_s.abs() - 2.0 * d.abs() / SPEED_OF_LIGHT).abs() < 1e-24);
        }
        let f1 = cross_term_carrier_frequency(&st, &base, ScanVariable::DeltaX1, (2, 3), 1e-5, 1e-6).unwrap();
        assert_eq!(f1, 0.0);
        let f3 = cross_term_carrier_frequency(&st, &base, ScanVariable::DeltaX3, (1, 4), 1e-5, 1e-6).unwrap();
        assert!((f3.abs() / (2.0 * PI / 532e-9) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn phase_shift_on_unused_mode_changes_nothing() {
        let pair = default_pair();
        let st = TwoPhotonPathState::from_phases([0.0, 1.0, 2.0, 3.0]);
        let extra = OpticalNetwork::new(4, vec![OpticalElement::PhaseShift { mode: 0, phase: 0.0 }]).unwrap();
        let a2 = pair.a.then(&extra).unwrap();
        let x = coincidence_probability(&st, &pair.a, &pair.b, &model(), &Overlap::default()).unwrap();
        let y = coincidence_probability(&st, &a2, &pair.b, &model(), &Overlap::default()).unwrap();
        assert!(x.max_abs_diff(&y) < 1e-15);
    }
}
