//! Index convention for the two-photon Hilbert space.
//!
//! Each photon carries three qubits: polarization (H=0, V=1), frequency
//! (ω1=0, ω2=1) and spatial rail (rail-1=0, rail-2=1). The joint basis index
//! is
//!
//! ```text
//! i = 32·pol_A + 16·pol_B + 8·freq_A + 4·freq_B + 2·rail_A + rail_B
//! ```
//!
//! Rail-1 is mode a1 (c1 after the frequency router) for Alice and b1 (d1)
//! for Bob.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimension of the joint two-photon space.
pub const DIM: usize = 64;

pub(crate) const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Party {
    Alice,
    Bob,
}

/// Degree of freedom carried by both photons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dof {
    Pol,
    Freq,
    Rail,
}

impl Dof {
    pub const ALL: [Dof; 3] = [Dof::Pol, Dof::Freq, Dof::Rail];
}

/// One of the six binary coordinates of the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coordinate {
    PolA,
    PolB,
    FreqA,
    FreqB,
    RailA,
    RailB,
}

impl Coordinate {
    pub const ALL: [Coordinate; 6] = [
        Coordinate::PolA,
        Coordinate::PolB,
        Coordinate::FreqA,
        Coordinate::FreqB,
        Coordinate::RailA,
        Coordinate::RailB,
    ];

    pub fn new(dof: Dof, party: Party) -> Self {
        match (dof, party) {
            (Dof::Pol, Party::Alice) => Coordinate::PolA,
            (Dof::Pol, Party::Bob) => Coordinate::PolB,
            (Dof::Freq, Party::Alice) => Coordinate::FreqA,
            (Dof::Freq, Party::Bob) => Coordinate::FreqB,
            (Dof::Rail, Party::Alice) => Coordinate::RailA,
            (Dof::Rail, Party::Bob) => Coordinate::RailB,
        }
    }

    /// Bit position inside the basis index.
    pub fn shift(self) -> usize {
        match self {
            Coordinate::PolA => 5,
            Coordinate::PolB => 4,
            Coordinate::FreqA => 3,
            Coordinate::FreqB => 2,
            Coordinate::RailA => 1,
            Coordinate::RailB => 0,
        }
    }

    pub fn mask(self) -> usize {
        1 << self.shift()
    }

    pub fn dof(self) -> Dof {
        match self {
            Coordinate::PolA | Coordinate::PolB => Dof::Pol,
            Coordinate::FreqA | Coordinate::FreqB => Dof::Freq,
            Coordinate::RailA | Coordinate::RailB => Dof::Rail,
        }
    }

    pub fn party(self) -> Party {
        match self {
            Coordinate::PolA | Coordinate::FreqA | Coordinate::RailA => Party::Alice,
            _ => Party::Bob,
        }
    }

    /// Value of this coordinate in basis index `index`.
    #[inline]
    pub fn bit(self, index: usize) -> u8 {
        ((index >> self.shift()) & 1) as u8
    }
}

/// Six binary coordinates naming one product basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct BasisLabel {
    pub pol_a: u8,
    pub pol_b: u8,
    pub freq_a: u8,
    pub freq_b: u8,
    pub rail_a: u8,
    pub rail_b: u8,
}

impl BasisLabel {
    pub fn new(pol: (u8, u8), freq: (u8, u8), rail: (u8, u8)) -> Self {
        Self {
            pol_a: pol.0,
            pol_b: pol.1,
            freq_a: freq.0,
            freq_b: freq.1,
            rail_a: rail.0,
            rail_b: rail.1,
        }
    }

    pub fn index(&self) -> usize {
        debug_assert!(
            [self.pol_a, self.pol_b, self.freq_a, self.freq_b, self.rail_a, self.rail_b]
                .iter()
                .all(|&b| b <= 1)
        );
        32 * self.pol_a as usize
            + 16 * self.pol_b as usize
            + 8 * self.freq_a as usize
            + 4 * self.freq_b as usize
            + 2 * self.rail_a as usize
            + self.rail_b as usize
    }

    pub fn from_index(index: usize) -> Result<Self> {
        if index >= DIM {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range 0..{DIM}"
            )));
        }
        Ok(Self {
            pol_a: Coordinate::PolA.bit(index),
            pol_b: Coordinate::PolB.bit(index),
            freq_a: Coordinate::FreqA.bit(index),
            freq_b: Coordinate::FreqB.bit(index),
            rail_a: Coordinate::RailA.bit(index),
            rail_b: Coordinate::RailB.bit(index),
        })
    }

    pub fn get(&self, coordinate: Coordinate) -> u8 {
        Coordinate::bit(coordinate, self.index())
    }
}

impl fmt::Display for BasisLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pol = |b| if b == 0 { 'H' } else { 'V' };
        write!(
            f,
            "|{}{}, w{}w{}, r{}r{}>",
            pol(self.pol_a),
            pol(self.pol_b),
            self.freq_a + 1,
            self.freq_b + 1,
            self.rail_a + 1,
            self.rail_b + 1
        )
    }
}

/// The four polarization Bell states.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BellLabel {
    #[serde(rename = "phi+")]
    PhiPlus,
    #[serde(rename = "phi-")]
    PhiMinus,
    #[serde(rename = "psi+")]
    PsiPlus,
    #[serde(rename = "psi-")]
    PsiMinus,
}

impl BellLabel {
    pub const ALL: [BellLabel; 4] = [
        BellLabel::PhiPlus,
        BellLabel::PhiMinus,
        BellLabel::PsiPlus,
        BellLabel::PsiMinus,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BellLabel::PhiPlus => "phi+",
            BellLabel::PhiMinus => "phi-",
            BellLabel::PsiPlus => "psi+",
            BellLabel::PsiMinus => "psi-",
        }
    }

    /// Amplitudes over the polarization pair basis {HH, HV, VH, VV}.
    pub fn amplitudes(self) -> [Complex64; 4] {
        let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        match self {
            BellLabel::PhiPlus => [s, ZERO, ZERO, s],
            BellLabel::PhiMinus => [s, ZERO, ZERO, -s],
            BellLabel::PsiPlus => [ZERO, s, s, ZERO],
            BellLabel::PsiMinus => [ZERO, s, -s, ZERO],
        }
    }

    pub fn vector(self) -> DVector<Complex64> {
        DVector::from_row_slice(&self.amplitudes())
    }
}

impl fmt::Display for BellLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BellLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BellLabel::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown Bell label {s:?}")))
    }
}

/// Tensor product of per-degree-of-freedom pair states into the joint basis.
///
/// Each argument holds amplitudes over (Alice bit, Bob bit) pairs in the order
/// 00, 01, 10, 11.
pub fn product_vector(
    pol: &[Complex64; 4],
    freq: &[Complex64; 4],
    rail: &[Complex64; 4],
) -> DVector<Complex64> {
    DVector::from_fn(DIM, |i, _| {
        let p = (i >> 4) & 3;
        let f = (i >> 2) & 3;
        let r = i & 3;
        pol[p] * freq[f] * rail[r]
    })
}

/// Pair state with a single nonzero amplitude on `(alice, bob)`.
pub fn pair_ket(alice: u8, bob: u8) -> [Complex64; 4] {
    let mut v = [ZERO; 4];
    v[2 * alice as usize + bob as usize] = ONE;
    v
}

/// `(|01⟩ + e^{iφ}|10⟩)/√2`, the frequency-anticorrelated carrier.
pub fn anticorrelated_pair(phase: f64) -> [Complex64; 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [
        ZERO,
        Complex64::new(s, 0.0),
        Complex64::from_polar(s, phase),
        ZERO,
    ]
}

/// `(|00⟩ + e^{iφ}|11⟩)/√2`, the rail-correlated carrier.
pub fn correlated_pair(phase: f64) -> [Complex64; 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    [
        Complex64::new(s, 0.0),
        ZERO,
        ZERO,
        Complex64::from_polar(s, phase),
    ]
}
