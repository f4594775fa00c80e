//! The 24-element single-qubit Clifford group.
//!
//! Elements are indexed by a fixed decomposition table over the generator
//! pulses `{I, ±X90, X180, ±Y90, Y180}`. Group multiplication is done on
//! the 3x3 signed-permutation matrices by which each element rotates the
//! Bloch sphere, so the index-level tables are exact.
//!
//! Order convention: gate sequences are listed left to right in time.
//! `a.then(b)` means "apply `a`, then `b`", whose unitary is `U_b U_a`.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qchannel::{pauli_x, pauli_y, pauli_z, Unitary2};

use std::f64::consts::{FRAC_PI_2, PI};

pub const GROUP_ORDER: usize = 24;

/// Physical pulses from which every Clifford is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
pub enum GeneratorPulse {
    #[serde(rename = "I")]
    I,
    #[serde(rename = "X90")]
    X90,
    #[serde(rename = "-X90")]
    Xm90,
    #[serde(rename = "X180")]
    X180,
    #[serde(rename = "Y90")]
    Y90,
    #[serde(rename = "-Y90")]
    Ym90,
    #[serde(rename = "Y180")]
    Y180,
}

/// Drive axis of a pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseAxis {
    None,
    X,
    Y,
}

impl GeneratorPulse {
    pub const ALL: [GeneratorPulse; 7] = [
        GeneratorPulse::I,
        GeneratorPulse::X90,
        GeneratorPulse::Xm90,
        GeneratorPulse::X180,
        GeneratorPulse::Y90,
        GeneratorPulse::Ym90,
        GeneratorPulse::Y180,
    ];

    /// Signed rotation angle in radians.
    pub fn angle(self) -> f64 {
        use GeneratorPulse::*;
        match self {
            I => 0.0,
            X90 | Y90 => FRAC_PI_2,
            Xm90 | Ym90 => -FRAC_PI_2,
            X180 | Y180 => PI,
        }
    }

    pub fn axis(self) -> PulseAxis {
        use GeneratorPulse::*;
        match self {
            I => PulseAxis::None,
            X90 | Xm90 | X180 => PulseAxis::X,
            Y90 | Ym90 | Y180 => PulseAxis::Y,
        }
    }

    /// Drive phase: 0 for X pulses, pi/2 for Y pulses.
    pub fn phase(self) -> f64 {
        match self.axis() {
            PulseAxis::Y => FRAC_PI_2,
            _ => 0.0,
        }
    }

    pub fn ideal_unitary(self) -> Unitary2 {
        let axis = match self.axis() {
            PulseAxis::None => return Unitary2::identity(),
            PulseAxis::X => [1.0, 0.0, 0.0],
            PulseAxis::Y => [0.0, 1.0, 0.0],
        };
        Unitary2::rotation_unchecked(axis, self.angle())
    }

    pub fn clifford(self) -> CliffordElement {
        let table = tables();
        CliffordElement {
            index: table.pulse_index[self as usize],
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        use GeneratorPulse::*;
        match self {
            I => "I",
            X90 => "X90",
            Xm90 => "-X90",
            X180 => "X180",
            Y90 => "Y90",
            Ym90 => "-Y90",
            Y180 => "Y180",
        }
    }
}

impl fmt::Display for GeneratorPulse {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GeneratorPulse {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        use GeneratorPulse::*;
        Ok(match s.trim() {
            "I" | "Id" => I,
            "X90" | "X/2" => X90,
            "-X90" | "Xm90" | "-X/2" => Xm90,
            "X180" | "X" => X180,
            "Y90" | "Y/2" => Y90,
            "-Y90" | "Ym90" | "-Y/2" => Ym90,
            "Y180" | "Y" => Y180,
            other => return Err(Error::invalid(format!("unknown pulse '{other}'"))),
        })
    }
}

use GeneratorPulse as P;

/// Time-ordered pulse decomposition of each element; the row number is the
/// element index.
const DECOMPOSITIONS: [&[GeneratorPulse]; GROUP_ORDER] = [
    // Paulis
    &[P::I],
    &[P::X180],
    &[P::Y180],
    &[P::Y180, P::X180],
    // 2pi/3 rotations
    &[P::X90, P::Y90],
    &[P::X90, P::Ym90],
    &[P::Xm90, P::Y90],
    &[P::Xm90, P::Ym90],
    &[P::Y90, P::X90],
    &[P::Y90, P::Xm90],
    &[P::Ym90, P::X90],
    &[P::Ym90, P::Xm90],
    // pi/2 rotations
    &[P::X90],
    &[P::Xm90],
    &[P::Y90],
    &[P::Ym90],
    &[P::Xm90, P::Y90, P::X90],
    &[P::Xm90, P::Ym90, P::X90],
    // Hadamard-like
    &[P::X180, P::Y90],
    &[P::X180, P::Ym90],
    &[P::Y180, P::X90],
    &[P::Y180, P::Xm90],
    &[P::X90, P::Y90, P::X90],
    &[P::Xm90, P::Y90, P::Xm90],
];

type Rot = [[i8; 3]; 3];

struct Tables {
    unitaries: [Unitary2; GROUP_ORDER],
    rotations: [Rot; GROUP_ORDER],
    /// `compose[a][b]` is the index of `a` followed by `b`.
    compose: [[u8; GROUP_ORDER]; GROUP_ORDER],
    inverse: [u8; GROUP_ORDER],
    pulse_index: [u8; 7],
}

fn bloch_rotation(u: &Unitary2) -> Rot {
    let paulis = [pauli_x(), pauli_y(), pauli_z()];
    let m = u.matrix();
    let mut r = [[0i8; 3]; 3];
    for (i, si) in paulis.iter().enumerate() {
        for (j, sj) in paulis.iter().enumerate() {
            let v = (si * m * sj * m.adjoint()).trace().re / 2.0;
            r[i][j] = v.round() as i8;
        }
    }
    r
}

fn rot_mul(a: &Rot, b: &Rot) -> Rot {
    let mut out = [[0i8; 3]; 3];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn tables() -> &'static Tables {
    static TABLES: OnceLock<Tables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let unitaries: [Unitary2; GROUP_ORDER] = std::array::from_fn(|k| {
            DECOMPOSITIONS[k]
                .iter()
                .fold(Unitary2::identity(), |acc, p| p.ideal_unitary().mul(&acc))
        });
        let rotations: [Rot; GROUP_ORDER] = std::array::from_fn(|k| bloch_rotation(&unitaries[k]));
        let lookup = |r: &Rot| -> u8 {
            rotations
                .iter()
                .position(|x| x == r)
                .expect("Clifford table is closed under multiplication") as u8
        };
        let mut compose = [[0u8; GROUP_ORDER]; GROUP_ORDER];
        for a in 0..GROUP_ORDER {
            for b in 0..GROUP_ORDER {
                compose[a][b] = lookup(&rot_mul(&rotations[b], &rotations[a]));
            }
        }
        let inverse = std::array::from_fn(|a| {
            (0..GROUP_ORDER)
                .find(|&b| compose[a][b] == 0)
                .expect("every element has an inverse") as u8
        });
        let pulse_index = std::array::from_fn(|p| {
            let u = GeneratorPulse::ALL[p].ideal_unitary();
            lookup(&bloch_rotation(&u))
        });
        Tables {
            unitaries,
            rotations,
            compose,
            inverse,
            pulse_index,
        }
    })
}

/// One of the 24 single-qubit Clifford gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema), schemars(transparent))]
pub struct CliffordElement {
    index: u8,
}

impl TryFrom<u8> for CliffordElement {
    type Error = Error;

    fn try_from(index: u8) -> Result<Self> {
        CliffordElement::from_index(index as usize)
    }
}

impl From<CliffordElement> for u8 {
    fn from(c: CliffordElement) -> u8 {
        c.index
    }
}

impl CliffordElement {
    pub const IDENTITY: CliffordElement = CliffordElement { index: 0 };

    pub fn from_index(index: usize) -> Result<Self> {
        if index >= GROUP_ORDER {
            return Err(Error::invalid(format!("Clifford index {index} out of range")));
        }
        Ok(Self { index: index as u8 })
    }

    pub fn index(self) -> usize {
        self.index as usize
    }

    /// Canonical unitary: the product of the decomposition's pulses, which
    /// has unit determinant.
    pub fn unitary(self) -> Unitary2 {
        tables().unitaries[self.index()]
    }

    /// Action on the Bloch sphere as a signed permutation matrix.
    pub fn bloch_rotation(self) -> [[i8; 3]; 3] {
        tables().rotations[self.index()]
    }

    /// `self` followed by `next`.
    pub fn then(self, next: CliffordElement) -> CliffordElement {
        CliffordElement {
            index: tables().compose[self.index()][next.index()],
        }
    }

    pub fn inverse(self) -> CliffordElement {
        CliffordElement {
            index: tables().inverse[self.index()],
        }
    }

    pub fn decompose(self) -> &'static [GeneratorPulse] {
        DECOMPOSITIONS[self.index()]
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Self {
            index: rng.random_range(0..GROUP_ORDER as u8),
        }
    }
}

impl fmt::Display for CliffordElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.index)
    }
}

/// All 24 elements in index order.
pub fn enumerate() -> Vec<CliffordElement> {
    (0..GROUP_ORDER as u8).map(|index| CliffordElement { index }).collect()
}

/// `a` followed by `b`.
pub fn compose(a: CliffordElement, b: CliffordElement) -> CliffordElement {
    a.then(b)
}

pub fn inverse(a: CliffordElement) -> CliffordElement {
    a.inverse()
}

/// Time-ordered product of a sequence.
pub fn compose_sequence(seq: &[CliffordElement]) -> CliffordElement {
    seq.iter().fold(CliffordElement::IDENTITY, |acc, &c| acc.then(c))
}

/// The element that, appended to `seq`, makes the whole sequence the
/// identity.
pub fn recovery_gate(seq: &[CliffordElement]) -> CliffordElement {
    compose_sequence(seq).inverse()
}

pub fn decompose(a: CliffordElement) -> &'static [GeneratorPulse] {
    a.decompose()
}

/// Mean number of generator pulses per Clifford under the decomposition
/// table (the idle element counts as one pulse). Used to convert error per
/// Clifford into error per generator.
pub fn avg_generators_per_clifford() -> f64 {
    let total: usize = DECOMPOSITIONS.iter().map(|d| d.len()).sum();
    total as f64 / GROUP_ORDER as f64
}

/// Unitary of a time-ordered pulse list.
pub fn pulses_unitary(pulses: &[GeneratorPulse]) -> Unitary2 {
    pulses
        .iter()
        .fold(Unitary2::identity(), |acc, p| p.ideal_unitary().mul(&acc))
}
