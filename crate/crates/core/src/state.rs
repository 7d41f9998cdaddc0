//! Mode labels and the four-path entangled two-photon state.
//!
//! Each photon of a pair is emitted into one of four correlated k-modes.
//! The modes carry two binary coordinates, the ring (external `E` or
//! internal `I`) and the side (left `ℓ` or right `r`), so a photon's path
//! is a ququad equivalent to two qubits. Path indices are 1-based
//! everywhere in the public interface.
//!
//! Photon A's path `j` and photon B's path `j` are the two halves of the
//! same pair, diametrically opposite on the emission ring, which is why the
//! B side label table is the A side table with left and right swapped.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of correlated mode pairs carried by the state.
pub const N_PATHS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Photon {
    A,
    B,
}

impl Photon {
    pub fn other(self) -> Photon {
        match self {
            Photon::A => Photon::B,
            Photon::B => Photon::A,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ring {
    E,
    I,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn swap(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// A single emission mode: which photon, which ring, which side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModeLabel {
    pub photon: Photon,
    pub ring: Ring,
    pub side: Side,
}

// Slot order used by every 4-mode network: [E,ℓ  I,ℓ  I,r  E,r].
const SLOTS: [(Ring, Side); 4] = [
    (Ring::E, Side::Left),
    (Ring::I, Side::Left),
    (Ring::I, Side::Right),
    (Ring::E, Side::Right),
];

impl ModeLabel {
    pub fn new(photon: Photon, ring: Ring, side: Side) -> Self {
        ModeLabel { photon, ring, side }
    }

    /// Builds the label of path `index` (1..=4) on the given photon.
    pub fn from_index(photon: Photon, index: usize) -> Result<Self> {
        let (ring, side) = index_to_qubits(photon, index)?;
        Ok(ModeLabel { photon, ring, side })
    }

    /// 1-based path index of this mode.
    pub fn index(&self) -> usize {
        qubits_to_index(self.photon, self.ring, self.side)
    }

    /// 0-based position of this mode in a 4-mode network, ordered
    /// `[E,ℓ  I,ℓ  I,r  E,r]` for both photons.
    pub fn slot(&self) -> usize {
        SLOTS
            .iter()
            .position(|&(r, s)| r == self.ring && s == self.side)
            .expect("every (ring, side) pair has a slot")
    }

    pub fn from_slot(photon: Photon, slot: usize) -> Result<Self> {
        let &(ring, side) = SLOTS.get(slot).ok_or_else(|| Error::IndexOutOfRange {
            index: slot,
            valid: "0..4".into(),
        })?;
        Ok(ModeLabel { photon, ring, side })
    }
}

/// Returns the mode on the other photon that is emitted together with `m`.
pub fn correlated_partner(m: ModeLabel) -> ModeLabel {
    let photon = m.photon.other();
    let (ring, side) = index_to_qubits(photon, m.index()).expect("index() is always 1..=4");
    ModeLabel { photon, ring, side }
}

/// Network slot (0-based) that path `index` (1-based) of `photon` enters.
pub fn input_slot(photon: Photon, index: usize) -> Result<usize> {
    Ok(ModeLabel::from_index(photon, index)?.slot())
}

/// Maps a 1-based path index to its (ring, side) coordinates.
pub fn index_to_qubits(photon: Photon, index: usize) -> Result<(Ring, Side)> {
    if !(1..=N_PATHS).contains(&index) {
        return Err(Error::IndexOutOfRange { index, valid: "1..=4".into() });
    }
    let (ring, side) = SLOTS[index - 1];
    Ok(match photon {
        Photon::A => (ring, side),
        Photon::B => (ring, side.swap()),
    })
}

/// Inverse of [`index_to_qubits`].
pub fn qubits_to_index(photon: Photon, ring: Ring, side: Side) -> usize {
    let side = match photon {
        Photon::A => side,
        Photon::B => side.swap(),
    };
    SLOTS.iter().position(|&s| s == (ring, side)).unwrap() + 1
}

/// Number of k-modes each photon needs to carry `n_qubits` path qubits.
pub fn modes_required(n_qubits: u32) -> Result<u64> {
    if n_qubits == 0 {
        return Err(Error::param("n_qubits", "must be at least 1"));
    }
    1u64.checked_shl(n_qubits)
        .filter(|_| n_qubits < 64)
        .ok_or_else(|| Error::param("n_qubits", format!("2^{n_qubits} overflows u64")))
}

impl fmt::Display for ModeLabel {
    /// Serialized form, e.g. `A:E,l` or `B:I,r`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let p = match self.photon {
            Photon::A => 'A',
            Photon::B => 'B',
        };
        let r = match self.ring {
            Ring::E => 'E',
            Ring::I => 'I',
        };
        let s = match self.side {
            Side::Left => 'l',
            Side::Right => 'r',
        };
        write!(f, "{p}:{r},{s}")
    }
}

impl FromStr for ModeLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::param("mode label", format!("`{s}` is not of the form A:E,l"));
        let b = s.as_bytes();
        if b.len() != 5 || b[1] != b':' || b[3] != b',' {
            return Err(bad());
        }
        let photon = match b[0] {
            b'A' => Photon::A,
            b'B' => Photon::B,
            _ => return Err(bad()),
        };
        let ring = match b[2] {
            b'E' => Ring::E,
            b'I' => Ring::I,
            _ => return Err(bad()),
        };
        let side = match b[4] {
            b'l' => Side::Left,
            b'r' => Side::Right,
            _ => return Err(bad()),
        };
        Ok(ModeLabel { photon, ring, side })
    }
}

impl Serialize for ModeLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ModeLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Amplitudes `c_j` of the state `Σ_j c_j |j⟩_A |j⟩_B`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoPhotonPathState {
    amplitudes: [Complex64; N_PATHS],
}

const NORM_TOL: f64 = 1e-12;

impl TwoPhotonPathState {
    /// Maximally entangled state with `c_j = e^{iφ_j}/2`.
    pub fn from_phases(phases: [f64; N_PATHS]) -> Self {
        TwoPhotonPathState { amplitudes: phases.map(|p| Complex64::from_polar(0.5, p)) }
    }

    #[cfg(test)]
    pub(crate) fn unchecked(amplitudes: [Complex64; N_PATHS]) -> Self {
        TwoPhotonPathState { amplitudes }
    }

    /// Takes amplitudes as given; they must already be normalized.
    pub fn from_amplitudes(amplitudes: [Complex64; N_PATHS]) -> Result<Self> {
        let norm_sq: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if !norm_sq.is_finite() || (norm_sq - 1.0).abs() > NORM_TOL {
            return Err(Error::NotNormalized { norm_sq });
        }
        Ok(TwoPhotonPathState { amplitudes })
    }

    /// Rescales arbitrary (non-zero) amplitudes to unit norm.
    pub fn normalized(amplitudes: [Complex64; N_PATHS]) -> Result<Self> {
        let norm_sq: f64 = amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if !(norm_sq > 0.0 && norm_sq.is_finite()) {
            return Err(Error::NotNormalized { norm_sq });
        }
        let k = norm_sq.sqrt().recip();
        Ok(TwoPhotonPathState { amplitudes: amplitudes.map(|c| c * k) })
    }

    /// Keeps only the listed (1-based) paths and renormalizes, as when the
    /// fibres of the other mode pairs are blocked.
    pub fn restricted(&self, active: &[usize]) -> Result<Self> {
        let mut amps = [Complex64::new(0.0, 0.0); N_PATHS];
        for &j in active {
            if !(1..=N_PATHS).contains(&j) {
                return Err(Error::IndexOutOfRange { index: j, valid: "1..=4".into() });
            }
            amps[j - 1] = self.amplitudes[j - 1];
        }
        Self::normalized(amps)
    }

    pub fn amplitudes(&self) -> &[Complex64; N_PATHS] {
        &self.amplitudes
    }

    /// Amplitude of 1-based path `j`.
    pub fn amplitude(&self, j: usize) -> Complex64 {
        self.amplitudes[j - 1]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// Shorthand for [`TwoPhotonPathState::from_phases`].
pub fn make_state(phases: [f64; N_PATHS]) -> TwoPhotonPathState {
    TwoPhotonPathState::from_phases(phases)
}

impl Default for TwoPhotonPathState {
    fn default() -> Self {
        Self::from_phases([0.0; N_PATHS])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn all_modes() -> Vec<ModeLabel> {
        let mut v = Vec::new();
        for photon in [Photon::A, Photon::B] {
            for j in 1..=4 {
                v.push(ModeLabel::from_index(photon, j).unwrap());
            }
        }
        v
    }

    #[test]
    fn label_tables() {
        use Ring::*;
        use Side::*;
        let a: Vec<_> = (1..=4).map(|j| index_to_qubits(Photon::A, j).unwrap()).collect();
        assert_eq!(a, vec![(E, Left), (I, Left), (I, Right), (E, Right)]);
        let b: Vec<_> = (1..=4).map(|j| index_to_qubits(Photon::B, j).unwrap()).collect();
        assert_eq!(b, vec![(E, Right), (I, Right), (I, Left), (E, Left)]);
    }

    #[test]
    fn partners() {
        let m = ModeLabel::new(Photon::A, Ring::E, Side::Left);
        assert_eq!(correlated_partner(m), ModeLabel::new(Photon::B, Ring::E, Side::Right));
        let m = ModeLabel::new(Photon::A, Ring::I, Side::Right);
        assert_eq!(correlated_partner(m), ModeLabel::new(Photon::B, Ring::I, Side::Left));
        for m in all_modes() {
            assert_eq!(correlated_partner(correlated_partner(m)), m);
            assert_eq!(correlated_partner(m).index(), m.index());
            assert_ne!(correlated_partner(m).photon, m.photon);
        }
    }

    #[test]
    fn sides_swap_between_photons() {
        for j in 1..=4 {
            let (ra, sa) = index_to_qubits(Photon::A, j).unwrap();
            let (rb, sb) = index_to_qubits(Photon::B, j).unwrap();
            assert_eq!(ra, rb);
            assert_eq!(sa, sb.swap());
        }
    }

    #[test]
    fn qubit_round_trip() {
        assert_eq!(index_to_qubits(Photon::A, 2).unwrap(), (Ring::I, Side::Left));
        assert_eq!(index_to_qubits(Photon::B, 4).unwrap(), (Ring::E, Side::Left));
        for photon in [Photon::A, Photon::B] {
            for j in 1..=4 {
                let (r, s) = index_to_qubits(photon, j).unwrap();
                assert_eq!(qubits_to_index(photon, r, s), j);
            }
        }
        assert!(index_to_qubits(Photon::A, 0).is_err());
        assert!(index_to_qubits(Photon::B, 5).is_err());
    }

    #[test]
    fn label_strings() {
        for m in all_modes() {
            let s = m.to_string();
            assert_eq!(s.parse::<ModeLabel>().unwrap(), m);
        }
        assert_eq!(ModeLabel::new(Photon::A, Ring::E, Side::Left).to_string(), "A:E,l");
        assert_eq!(ModeLabel::new(Photon::B, Ring::I, Side::Right).to_string(), "B:I,r");
        assert!("A:E,L".parse::<ModeLabel>().is_err());
        assert!("C:E,l".parse::<ModeLabel>().is_err());
        let json = serde_json::to_string(&ModeLabel::new(Photon::B, Ring::E, Side::Left)).unwrap();
        assert_eq!(json, "\"B:E,l\"");
    }

    #[test]
    fn slots_follow_ring_and_side() {
        // B's path 1 is its E,r mode, which sits in the last slot.
        assert_eq!(input_slot(Photon::A, 1).unwrap(), 0);
        assert_eq!(input_slot(Photon::B, 1).unwrap(), 3);
        assert_eq!(input_slot(Photon::B, 2).unwrap(), 2);
        for photon in [Photon::A, Photon::B] {
            for slot in 0..4 {
                assert_eq!(ModeLabel::from_slot(photon, slot).unwrap().slot(), slot);
            }
        }
    }

    #[test]
    fn modes_for_qubits() {
        assert_eq!(modes_required(1).unwrap(), 2);
        assert_eq!(modes_required(2).unwrap(), 4);
        assert_eq!(modes_required(3).unwrap(), 8);
        assert!(modes_required(0).is_err());
        assert!(modes_required(64).is_err());
        assert_eq!(modes_required(63).unwrap(), 1 << 63);
    }

    #[test]
    fn state_examples() {
        let s = make_state([0.0; 4]);
        for c in s.amplitudes() {
            assert!((c - Complex64::new(0.5, 0.0)).norm() < 1e-15);
        }
        let s = make_state([0.0, PI, 0.0, PI]);
        let expect = [0.5, -0.5, 0.5, -0.5];
        for (c, e) in s.amplitudes().iter().zip(expect) {
            assert!((c - Complex64::new(e, 0.0)).norm() < 1e-15);
        }
        assert!(TwoPhotonPathState::from_amplitudes([Complex64::new(1.0, 0.0); 4]).is_err());
        let r = s.restricted(&[2, 3]).unwrap();
        assert!((r.norm_sqr() - 1.0).abs() < 1e-15);
        assert_eq!(r.amplitude(1), Complex64::new(0.0, 0.0));
    }

    proptest! {
        #[test]
        fn state_is_normalized(p in prop::array::uniform4(-10.0f64..10.0)) {
            let s = make_state(p);
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
            for c in s.amplitudes() {
                prop_assert!((c.norm() - 0.5).abs() < 1e-12);
            }
        }
    }
}
