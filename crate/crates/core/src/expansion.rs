//! Symbolic frequency-domain amplitudes.
//!
//! A [`DelayExpansion`] stands for the function `ν ↦ Σ_p a_p e^{iν t_p}` of
//! the detuning `ν`. Lossless networks built from beam splitters, phase
//! shifts and delays have transfer-matrix entries of exactly this form, and
//! spectral averages of products of such entries reduce to sums over term
//! pairs, which is what makes the analytic coincidence engine exact.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Terms whose delays differ by less than this are merged (seconds).
pub const MERGE_TOLERANCE_S: f64 = 1e-18;
/// Terms with `|a|` at or below this are dropped.
pub const PRUNE_TOLERANCE: f64 = 1e-15;
/// Default maximum number of terms per expansion.
pub const DEFAULT_TERM_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayTerm {
    /// Complex coefficient, carrier phase included.
    pub coefficient: Complex64,
    /// Delay coefficient in seconds; the term oscillates as `e^{iν t}`.
    pub delay_s: f64,
}

/// Sorted, merged list of `(a, t)` terms.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayExpansion {
    terms: Vec<DelayTerm>,
}

impl DelayExpansion {
    pub fn zero() -> Self {
        DelayExpansion { terms: Vec::new() }
    }

    /// The frequency-independent constant `a`.
    pub fn constant(a: Complex64) -> Self {
        Self::from_terms(vec![DelayTerm { coefficient: a, delay_s: 0.0 }])
    }

    pub fn one() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    /// Builds an expansion from raw terms, merging and pruning them.
    pub fn from_terms(mut terms: Vec<DelayTerm>) -> Self {
        terms.sort_by(|x, y| x.delay_s.total_cmp(&y.delay_s));
        let mut merged: Vec<DelayTerm> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if (t.delay_s - last.delay_s).abs() < MERGE_TOLERANCE_S => {
                    last.coefficient += t.coefficient;
                }
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coefficient.norm() > PRUNE_TOLERANCE);
        DelayExpansion { terms: merged }
    }

    pub fn terms(&self) -> &[DelayTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Evaluates the expansion at detuning `nu` (rad/s).
    pub fn eval(&self, nu: f64) -> Complex64 {
        self.terms
            .iter()
            .map(|t| t.coefficient * Complex64::from_polar(1.0, nu * t.delay_s))
            .sum()
    }

    pub fn scaled(&self, k: Complex64) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|t| DelayTerm { coefficient: t.coefficient * k, delay_s: t.delay_s })
                .collect(),
        )
    }

    /// Multiplies by `a·e^{iν t}`.
    pub fn shifted(&self, a: Complex64, delay_s: f64) -> Self {
        Self::from_terms(
            self.terms
                .iter()
                .map(|t| DelayTerm { coefficient: t.coefficient * a, delay_s: t.delay_s + delay_s })
                .collect(),
        )
    }

    pub fn add(&self, other: &DelayExpansion, cap: usize) -> Result<Self> {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        Self::capped(Self::from_terms(terms), cap)
    }

    /// Product of two expansions; at most `len(self)·len(other)` terms.
    pub fn product(&self, other: &DelayExpansion, cap: usize) -> Result<Self> {
        let mut terms = Vec::with_capacity(self.len() * other.len());
        for x in &self.terms {
            for y in &other.terms {
                terms.push(DelayTerm {
                    coefficient: x.coefficient * y.coefficient,
                    delay_s: x.delay_s + y.delay_s,
                });
            }
        }
        Self::capped(Self::from_terms(terms), cap)
    }

    fn capped(e: Self, cap: usize) -> Result<Self> {
        if e.len() > cap {
            Err(Error::TermCapExceeded { cap })
        } else {
            Ok(e)
        }
    }
}
