use super::{c, spin_rotation, Matrix, PauliAxis, QubitId, C64, LINALG_TOLERANCE};
use crate::error::{bail, Result};

/// A unitary acting on an ordered list of target qubits. The first target is
/// the most significant bit of the gate matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Gate {
    matrix: Matrix,
    targets: Vec<QubitId>,
}

impl Gate {
    pub fn new(matrix: Matrix, targets: Vec<QubitId>) -> Result<Self> {
        if targets.is_empty() {
            bail!(Structural, "gate needs at least one target");
        }
        if matrix.dim() != 1 << targets.len() {
            bail!(
                Structural,
                "gate matrix is {0}x{0} but has {1} targets",
                matrix.dim(),
                targets.len()
            );
        }
        for (i, t) in targets.iter().enumerate() {
            if targets[..i].contains(t) {
                bail!(Structural, "duplicate gate target {:?}", t);
            }
        }
        let defect = matrix.unitarity_defect();
        if !(defect <= LINALG_TOLERANCE) {
            bail!(Validation, "gate matrix is not unitary (|UU†-I| = {defect:e})");
        }
        Ok(Gate { matrix, targets })
    }

    pub fn single(matrix: Matrix, target: QubitId) -> Result<Self> {
        Gate::new(matrix, vec![target])
    }

    pub fn pauli(axis: PauliAxis, target: QubitId) -> Self {
        Gate::single(axis.matrix(), target).expect("Pauli matrices are unitary")
    }

    /// `exp(i·angle·σ_axis)` on one qubit.
    pub fn rotation(axis: PauliAxis, angle: f64, target: QubitId) -> Result<Self> {
        if !angle.is_finite() {
            bail!(Validation, "rotation angle must be finite, got {angle}");
        }
        Gate::single(spin_rotation(axis, angle), target)
    }

    pub fn hadamard(target: QubitId) -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = Matrix::from_rows(&[[c(h, 0.0), c(h, 0.0)], [c(h, 0.0), c(-h, 0.0)]]);
        Gate::single(m, target).expect("Hadamard is unitary")
    }

    /// `diag(1, e^{iφ})`.
    pub fn phase(phi: f64, target: QubitId) -> Result<Self> {
        let m = Matrix::from_rows(&[
            [c(1.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), C64::from_polar(1.0, phi)],
        ]);
        Gate::single(m, target)
    }

    /// `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ u` on `(control, target)`.
    pub fn controlled(control: QubitId, target: QubitId, u: &Matrix) -> Result<Self> {
        Gate::select(control, target, &Matrix::identity(u.dim()), u)
    }

    /// `|0⟩⟨0| ⊗ u0 + |1⟩⟨1| ⊗ u1` on `(control, target)`.
    pub fn select(control: QubitId, target: QubitId, u0: &Matrix, u1: &Matrix) -> Result<Self> {
        if u0.dim() != 2 || u1.dim() != 2 {
            bail!(Structural, "select expects single-qubit blocks");
        }
        let mut m = Matrix::zeros(4);
        for i in 0..2 {
            for j in 0..2 {
                m.set(i, j, u0.get(i, j));
                m.set(2 + i, 2 + j, u1.get(i, j));
            }
        }
        Gate::new(m, vec![control, target])
    }

    pub fn cnot(control: QubitId, target: QubitId) -> Self {
        Gate::controlled(control, target, &PauliAxis::X.matrix()).expect("CNOT is unitary")
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn targets(&self) -> &[QubitId] {
        &self.targets
    }

    pub fn adjoint(&self) -> Gate {
        Gate {
            matrix: self.matrix.adjoint(),
            targets: self.targets.clone(),
        }
    }
}
