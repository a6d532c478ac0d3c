//! Dense statevector engine.
//!
//! Register order fixes bit significance: the first qubit of a register is the
//! most significant bit of the amplitude index. Every outcome table in this
//! crate is written against that convention.

mod density;
mod gate;
mod matrix;
mod state;

use serde::{Deserialize, Serialize};
use std::fmt;

pub use density::DensityMatrix;
pub use gate::Gate;
pub use matrix::Matrix;
pub use state::{MeasurementBranch, StateVector};

pub use num_complex::Complex64 as C64;

/// Hard cap on register size.
pub const MAX_QUBITS: usize = 14;
/// Branches with Born weight below this are dropped.
pub const PRUNE_THRESHOLD: f64 = 1e-14;
/// Tolerance for norm, unitarity and trace identities.
pub const LINALG_TOLERANCE: f64 = 1e-12;

pub(crate) const fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::Alice => Party::Bob,
            Party::Bob => Party::Alice,
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Party::Alice => f.write_str("alice"),
            Party::Bob => f.write_str("bob"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Role {
    System,
    EbitHalf,
}

/// Stable identity of a qubit. Ids are never reused within a state's lineage,
/// so a handle to a measured-and-discarded qubit stays invalid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QubitId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct QubitRef {
    pub id: QubitId,
    pub party: Party,
    pub role: Role,
    /// The opposite half of the ebit, for `Role::EbitHalf`.
    pub partner: Option<QubitId>,
}

impl QubitRef {
    pub fn system(id: u32, party: Party) -> Self {
        QubitRef {
            id: QubitId(id),
            party,
            role: Role::System,
            partner: None,
        }
    }

    /// Short display label: upper case for system qubits, lower case for
    /// ebit halves, e.g. `A0`, `B1`, `a4`.
    pub fn label(&self) -> String {
        let letter = match (self.party, self.role) {
            (Party::Alice, Role::System) => 'A',
            (Party::Bob, Role::System) => 'B',
            (Party::Alice, Role::EbitHalf) => 'a',
            (Party::Bob, Role::EbitHalf) => 'b',
        };
        format!("{letter}{}", self.id.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PauliAxis {
    X,
    Y,
    Z,
}

impl PauliAxis {
    pub const ALL: [PauliAxis; 3] = [PauliAxis::X, PauliAxis::Y, PauliAxis::Z];

    pub fn matrix(self) -> Matrix {
        let (o, l, i) = (c(0.0, 0.0), c(1.0, 0.0), c(0.0, 1.0));
        match self {
            PauliAxis::X => Matrix::from_rows(&[[o, l], [l, o]]),
            PauliAxis::Y => Matrix::from_rows(&[[o, -i], [i, o]]),
            PauliAxis::Z => Matrix::from_rows(&[[l, o], [o, -l]]),
        }
    }

    /// Eigenvector of the Pauli operator for outcome `+1` or `-1`.
    pub fn eigenvector(self, outcome: i8) -> [C64; 2] {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let sign = f64::from(outcome.signum());
        match self {
            PauliAxis::Z if outcome > 0 => [c(1.0, 0.0), c(0.0, 0.0)],
            PauliAxis::Z => [c(0.0, 0.0), c(1.0, 0.0)],
            PauliAxis::X => [c(h, 0.0), c(sign * h, 0.0)],
            PauliAxis::Y => [c(h, 0.0), c(0.0, sign * h)],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PauliAxis::X => "x",
            PauliAxis::Y => "y",
            PauliAxis::Z => "z",
        }
    }
}

/// `exp(i·angle·σ_axis) = cos(angle)·I + i·sin(angle)·σ_axis`.
pub fn spin_rotation(axis: PauliAxis, angle: f64) -> Matrix {
    let (s, co) = angle.sin_cos();
    Matrix::identity(2)
        .scale(c(co, 0.0))
        .add(&axis.matrix().scale(c(0.0, s)))
}

/// Maps an outcome `±1` to the bit it names (`+1 → 0`, `-1 → 1`).
pub fn outcome_bit(value: i8) -> u8 {
    u8::from(value < 0)
}
