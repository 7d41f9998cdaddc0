//! Linear-optical networks acting on one photon's modes.
//!
//! A network is an ordered list of beam splitters, delays and phase shifts.
//! Its transfer matrix is available two ways: numerically at a given
//! detuning ([`transfer_matrix`]) and symbolically as a matrix of
//! [`DelayExpansion`]s ([`delay_expansion_matrix`]). The two are built by
//! independent code paths and are checked against each other in tests.
//!
//! Frequencies: a photon of the pair has angular frequency `ω₀ + ν` (A) or
//! `ω₀ − ν` (B), with `ω₀ = 2πc/λ₀`, so a delay `δ` multiplies a mode by
//! `exp(i(ω₀ ± ν)δ/c)`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::expansion::{DelayExpansion, DEFAULT_TERM_CAP};
use crate::state::Photon;

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Down-converted centre wavelength used when none is given.
pub const DEFAULT_WAVELENGTH_M: f64 = 532e-9;
/// Largest accepted |delay| unless overridden; catches unit slips.
pub const DEFAULT_MAX_DELAY_M: f64 = 1.0;

pub type ComplexMatrix = DMatrix<Complex64>;
pub type Block2 = [[Complex64; 2]; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OpticalElement {
    BeamSplitter {
        mode_x: usize,
        mode_y: usize,
        reflectivity: f64,
        #[serde(rename = "phase_rad", default)]
        phase: f64,
    },
    Delay {
        mode: usize,
        length_m: f64,
    },
    PhaseShift {
        mode: usize,
        #[serde(rename = "phase_rad")]
        phase: f64,
    },
}

impl OpticalElement {
    pub fn balanced_splitter(mode_x: usize, mode_y: usize, phase: f64) -> Self {
        OpticalElement::BeamSplitter { mode_x, mode_y, reflectivity: 0.5, phase }
    }

    fn modes(&self) -> Vec<usize> {
        match *self {
            OpticalElement::BeamSplitter { mode_x, mode_y, .. } => vec![mode_x, mode_y],
            OpticalElement::Delay { mode, .. } | OpticalElement::PhaseShift { mode, .. } => vec![mode],
        }
    }
}

/// `[[√(1−R), i e^{iα}√R], [i e^{−iα}√R, √(1−R)]]`, unitary for all `R ∈ [0,1]`.
pub fn beam_splitter_block(reflectivity: f64, phase: f64) -> Block2 {
    let t = Complex64::new((1.0 - reflectivity).sqrt(), 0.0);
    let r = reflectivity.sqrt();
    let i = Complex64::i();
    [
        [t, i * Complex64::from_polar(r, phase)],
        [i * Complex64::from_polar(r, -phase), t],
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticalNetwork {
    n_modes: usize,
    elements: Vec<OpticalElement>,
    wavelength_m: f64,
    max_delay_m: f64,
}

impl OpticalNetwork {
    pub fn new(n_modes: usize, elements: Vec<OpticalElement>) -> Result<Self> {
        Self::with_limits(n_modes, elements, DEFAULT_WAVELENGTH_M, DEFAULT_MAX_DELAY_M)
    }

    pub fn with_limits(
        n_modes: usize,
        elements: Vec<OpticalElement>,
        wavelength_m: f64,
        max_delay_m: f64,
    ) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::param("n_modes", "must be positive"));
        }
        if !(wavelength_m > 0.0 && wavelength_m.is_finite()) {
            return Err(Error::param("wavelength_m", "must be positive and finite"));
        }
        if !(max_delay_m > 0.0) {
            return Err(Error::param("max_delay_m", "must be positive"));
        }
        let net = OpticalNetwork { n_modes, elements, wavelength_m, max_delay_m };
        for el in &net.elements {
            net.check(el)?;
        }
        Ok(net)
    }

    fn check(&self, el: &OpticalElement) -> Result<()> {
        for m in el.modes() {
            if m >= self.n_modes {
                return Err(Error::IndexOutOfRange { index: m, valid: format!("0..{}", self.n_modes) });
            }
        }
        match *el {
            OpticalElement::BeamSplitter { mode_x, mode_y, reflectivity, phase } => {
                if mode_x == mode_y {
                    return Err(Error::param("beam_splitter", "mode_x and mode_y must differ"));
                }
                if !(0.0..=1.0).contains(&reflectivity) {
                    return Err(Error::param("reflectivity", format!("{reflectivity} not in [0, 1]")));
                }
                ensure_finite("beam splitter phase", phase)?;
            }
            OpticalElement::Delay { length_m, .. } => {
                ensure_finite("delay length", length_m)?;
                if length_m.abs() > self.max_delay_m {
                    return Err(Error::param(
                        "length_m",
                        format!("|{length_m}| m exceeds the {} m delay limit", self.max_delay_m),
                    ));
                }
            }
            OpticalElement::PhaseShift { phase, .. } => {
                ensure_finite("phase shift", phase)?;
            }
        }
        Ok(())
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn elements(&self) -> &[OpticalElement] {
        &self.elements
    }

    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_m
    }

    /// Carrier angular frequency ω₀ = 2πc/λ₀.
    pub fn carrier_omega(&self) -> f64 {
        2.0 * PI * SPEED_OF_LIGHT / self.wavelength_m
    }

    /// Copy with `el` inserted before position `index`.
    pub fn with_inserted(&self, index: usize, el: OpticalElement) -> Result<Self> {
        if index > self.elements.len() {
            return Err(Error::IndexOutOfRange { index, valid: format!("0..={}", self.elements.len()) });
        }
        self.check(&el)?;
        let mut out = self.clone();
        out.elements.insert(index, el);
        Ok(out)
    }

    /// `self` followed by `next`.
    pub fn then(&self, next: &OpticalNetwork) -> Result<Self> {
        if next.n_modes != self.n_modes {
            return Err(Error::param("n_modes", "networks of different size cannot be chained"));
        }
        let mut out = self.clone();
        out.elements.extend_from_slice(&next.elements);
        out.max_delay_m = self.max_delay_m.max(next.max_delay_m);
        Ok(out)
    }
}

fn delay_sign(photon: Photon) -> f64 {
    match photon {
        Photon::A => 1.0,
        Photon::B => -1.0,
    }
}

/// Numerical transfer matrix (output × input) at detuning `nu` (rad/s).
pub fn transfer_matrix(net: &OpticalNetwork, photon: Photon, nu: f64) -> Result<ComplexMatrix> {
    transfer_matrix_with(net, photon, nu, beam_splitter_block)
}

/// [`transfer_matrix`] with a caller-supplied beam-splitter convention.
pub fn transfer_matrix_with<F>(net: &OpticalNetwork, photon: Photon, nu: f64, block: F) -> Result<ComplexMatrix>
where
    F: Fn(f64, f64) -> Block2,
{
    ensure_finite("detuning", nu)?;
    let n = net.n_modes;
    let omega = net.carrier_omega() + delay_sign(photon) * nu;
    let mut total = ComplexMatrix::identity(n, n);
    for el in &net.elements {
        let mut m = ComplexMatrix::identity(n, n);
        match *el {
            OpticalElement::BeamSplitter { mode_x, mode_y, reflectivity, phase } => {
                let b = block(reflectivity, phase);
                m[(mode_x, mode_x)] = b[0][0];
                m[(mode_x, mode_y)] = b[0][1];
                m[(mode_y, mode_x)] = b[1][0];
                m[(mode_y, mode_y)] = b[1][1];
            }
            OpticalElement::Delay { mode, length_m } => {
                m[(mode, mode)] = Complex64::from_polar(1.0, omega * length_m / SPEED_OF_LIGHT);
            }
            OpticalElement::PhaseShift { mode, phase } => {
                m[(mode, mode)] = Complex64::from_polar(1.0, phase);
            }
        }
        total = m * total;
    }
    Ok(total)
}

/// Transfer matrix as symbolic expansions, indexed `[output][input]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionMatrix {
    entries: Vec<Vec<DelayExpansion>>,
}

impl ExpansionMatrix {
    pub fn entry(&self, output: usize, input: usize) -> &DelayExpansion {
        &self.entries[output][input]
    }

    pub fn n(&self) -> usize {
        self.entries.len()
    }

    pub fn eval(&self, nu: f64) -> ComplexMatrix {
        let n = self.n();
        ComplexMatrix::from_fn(n, n, |i, j| self.entries[i][j].eval(nu))
    }
}

pub fn delay_expansion_matrix(net: &OpticalNetwork, photon: Photon) -> Result<ExpansionMatrix> {
    delay_expansion_matrix_capped(net, photon, DEFAULT_TERM_CAP)
}

/// Symbolic transfer matrix; fails once any entry exceeds `cap` terms.
pub fn delay_expansion_matrix_capped(net: &OpticalNetwork, photon: Photon, cap: usize) -> Result<ExpansionMatrix> {
    let n = net.n_modes;
    let mut rows: Vec<Vec<DelayExpansion>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { DelayExpansion::one() } else { DelayExpansion::zero() }).collect())
        .collect();
    let sign = delay_sign(photon);
    let omega0 = net.carrier_omega();
    for el in &net.elements {
        match *el {
            OpticalElement::BeamSplitter { mode_x, mode_y, reflectivity, phase } => {
                let b = beam_splitter_block(reflectivity, phase);
                let (rx, ry) = (rows[mode_x].clone(), rows[mode_y].clone());
                for j in 0..n {
                    rows[mode_x][j] = rx[j].scaled(b[0][0]).add(&ry[j].scaled(b[0][1]), cap)?;
                    rows[mode_y][j] = rx[j].scaled(b[1][0]).add(&ry[j].scaled(b[1][1]), cap)?;
                }
            }
            OpticalElement::Delay { mode, length_m } => {
                let carrier = Complex64::from_polar(1.0, omega0 * length_m / SPEED_OF_LIGHT);
                let t = sign * length_m / SPEED_OF_LIGHT;
                for e in rows[mode].iter_mut() {
                    *e = e.shifted(carrier, t);
                }
            }
            OpticalElement::PhaseShift { mode, phase } => {
                let k = Complex64::from_polar(1.0, phase);
                for e in rows[mode].iter_mut() {
                    *e = e.scaled(k);
                }
            }
        }
    }
    Ok(ExpansionMatrix { entries: rows })
}

/// Which BS₁ output of a mode pair is sent on to BS₂.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Bs1Output {
    /// `(|ℓ⟩ + e^{iα}|r⟩)/√2` up to a global phase; leaves in the ℓ slot.
    #[default]
    Plus,
    /// `(|ℓ⟩ − e^{iα}|r⟩)/√2`; leaves in the r slot.
    Minus,
}

/// BS₂ output a detector sits on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Bs2Port {
    /// The output sharing a slot with BS₂'s internal input.
    #[default]
    Internal,
    /// The output sharing a slot with BS₂'s external input.
    External,
}

/// Interferometer whose relative phase a probe or drift phase acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interferometer {
    /// ℓ/r superposition of the internal modes on BS₁.
    InternalBs1,
    /// ℓ/r superposition of the external modes on BS₁.
    ExternalBs1,
    /// Internal versus external superposition on BS₂.
    Bs2,
}

// Slots of the 4-mode layout.
pub const SLOT_EL: usize = 0;
pub const SLOT_IL: usize = 1;
pub const SLOT_IR: usize = 2;
pub const SLOT_ER: usize = 3;

/// Element positions inside [`default_network`].
pub mod layout {
    pub const DELAY_X1: usize = 0;
    pub const DELAY_X3: usize = 1;
    pub const DELAY_X2_COUPLED: usize = 2;
    pub const BS1_INTERNAL: usize = 3;
    pub const BS1_EXTERNAL: usize = 4;
    pub const DELAY_X2: usize = 5;
    pub const BS2: usize = 6;
}

/// Delay and phase settings of the chained interferometer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InterferometerSettings {
    /// Two-mode delay on the I,r mode of both photons (m).
    pub delta_x1_m: f64,
    /// Delay on photon A's internal arm between BS₁ and BS₂ (m).
    pub delta_x2_m: f64,
    /// Delay on photon A's E,r mode ahead of BS₁ (m).
    pub delta_x3_m: f64,
    /// Extra phase α of the internal BS₁ pair.
    pub alpha1_rad: f64,
    /// Extra phase α of the external BS₁ pair.
    pub alpha2_rad: f64,
    /// The Δx₂ stage also lengthens photon A's E,ℓ input by this multiple of Δx₂.
    pub x2_external_coupling: f64,
    pub internal_output: Bs1Output,
    pub external_output: Bs1Output,
    pub detector_a: Bs2Port,
    pub detector_b: Bs2Port,
    pub wavelength_m: f64,
    pub max_delay_m: f64,
}

impl Default for InterferometerSettings {
    fn default() -> Self {
        InterferometerSettings {
            delta_x1_m: 0.0,
            delta_x2_m: 0.0,
            delta_x3_m: 0.0,
            alpha1_rad: 0.0,
            alpha2_rad: 0.0,
            x2_external_coupling: 2.0,
            internal_output: Bs1Output::Plus,
            external_output: Bs1Output::Plus,
            detector_a: Bs2Port::Internal,
            detector_b: Bs2Port::Internal,
            wavelength_m: DEFAULT_WAVELENGTH_M,
            max_delay_m: DEFAULT_MAX_DELAY_M,
        }
    }
}

impl InterferometerSettings {
    pub fn with_delays(delta_x1_m: f64, delta_x2_m: f64, delta_x3_m: f64) -> Self {
        InterferometerSettings { delta_x1_m, delta_x2_m, delta_x3_m, ..Default::default() }
    }

    pub fn internal_out_slot(&self) -> usize {
        match self.internal_output {
            Bs1Output::Plus => SLOT_IL,
            Bs1Output::Minus => SLOT_IR,
        }
    }

    pub fn external_out_slot(&self) -> usize {
        match self.external_output {
            Bs1Output::Plus => SLOT_EL,
            Bs1Output::Minus => SLOT_ER,
        }
    }

    fn port_slot(&self, port: Bs2Port) -> usize {
        match port {
            Bs2Port::Internal => self.internal_out_slot(),
            Bs2Port::External => self.external_out_slot(),
        }
    }

    /// Output slots `(a, b)` the two detectors look at.
    pub fn detector_slots(&self) -> (usize, usize) {
        (self.port_slot(self.detector_a), self.port_slot(self.detector_b))
    }

    /// Where a phase acting on `which` is inserted in photon A's network:
    /// `(element index, mode slot)`.
    pub fn phase_position(&self, which: Interferometer) -> (usize, usize) {
        match which {
            Interferometer::InternalBs1 => (layout::DELAY_X1 + 1, SLOT_IR),
            Interferometer::ExternalBs1 => (layout::DELAY_X3 + 1, SLOT_ER),
            Interferometer::Bs2 => (layout::DELAY_X2 + 1, self.internal_out_slot()),
        }
    }
}

/// Networks for photon A and photon B.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkPair {
    pub a: OpticalNetwork,
    pub b: OpticalNetwork,
}

impl NetworkPair {
    pub fn get(&self, photon: Photon) -> &OpticalNetwork {
        match photon {
            Photon::A => &self.a,
            Photon::B => &self.b,
        }
    }

    /// Adds a phase shift `phase` on photon A acting on `which`.
    pub fn with_phase(&self, settings: &InterferometerSettings, which: Interferometer, phase: f64) -> Result<Self> {
        let (index, mode) = settings.phase_position(which);
        Ok(NetworkPair { a: self.a.with_inserted(index, OpticalElement::PhaseShift { mode, phase })?, b: self.b.clone() })
    }
}

/// Builds the chained interferometer on slots `[E,ℓ  I,ℓ  I,r  E,r]`.
///
/// Both photons get the same element list (see [`layout`]). Δx₁ delays the
/// I,r mode of both photons; Δx₂ and Δx₃ act on photon A only, photon B
/// carrying the same elements with zero length.
pub fn default_network(s: &InterferometerSettings) -> Result<NetworkPair> {
    let build = |photon: Photon| -> Result<OpticalNetwork> {
        let a_only = |len: f64| if photon == Photon::A { len } else { 0.0 };
        let int_out = s.internal_out_slot();
        let ext_out = s.external_out_slot();
        let elements = vec![
            OpticalElement::Delay { mode: SLOT_IR, length_m: s.delta_x1_m },
            OpticalElement::Delay { mode: SLOT_ER, length_m: a_only(s.delta_x3_m) },
            OpticalElement::Delay { mode: SLOT_EL, length_m: a_only(s.x2_external_coupling * s.delta_x2_m) },
            OpticalElement::balanced_splitter(SLOT_IL, SLOT_IR, s.alpha1_rad),
            OpticalElement::balanced_splitter(SLOT_EL, SLOT_ER, s.alpha2_rad),
            OpticalElement::Delay { mode: int_out, length_m: a_only(s.delta_x2_m) },
            OpticalElement::balanced_splitter(int_out, ext_out, 0.0),
        ];
        OpticalNetwork::with_limits(4, elements, s.wavelength_m, s.max_delay_m)
    };
    Ok(NetworkPair { a: build(Photon::A)?, b: build(Photon::B)? })
}
