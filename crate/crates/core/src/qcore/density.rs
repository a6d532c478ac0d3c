use super::{c, Matrix, C64};
use nalgebra::DMatrix;

/// Reduced (mixed) state over a subset of qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    rho: Matrix,
}

impl DensityMatrix {
    pub(crate) fn from_matrix(rho: Matrix) -> Self {
        DensityMatrix { rho }
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.rho
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.rho.max_abs_diff(&self.rho.adjoint())
    }

    /// Eigenvalues in ascending order (the matrix is Hermitianized first).
    pub fn eigenvalues(&self) -> Vec<f64> {
        let n = self.dim();
        let herm = self.rho.add(&self.rho.adjoint()).scale(c(0.5, 0.0));
        let m = DMatrix::from_fn(n, n, |i, j| herm.get(i, j));
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    /// Operator-norm distance to `I/d`.
    pub fn distance_from_maximally_mixed(&self) -> f64 {
        let n = self.dim();
        let diff = self.rho.sub(&Matrix::identity(n).scale(c(1.0 / n as f64, 0.0)));
        let m = DMatrix::from_fn(n, n, |i, j| diff.get(i, j));
        m.symmetric_eigenvalues()
            .iter()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    /// Von Neumann entropy in bits.
    pub fn entropy_bits(&self) -> f64 {
        self.eigenvalues()
            .into_iter()
            .filter(|&p| p > 1e-15)
            .map(|p| -p * p.log2())
            .sum()
    }

    /// Weighted sum `Σ wᵢ ρᵢ`; all terms must have the same dimension.
    pub fn mixture<'a>(terms: impl IntoIterator<Item = (f64, &'a DensityMatrix)>) -> Option<DensityMatrix> {
        let mut acc: Option<Matrix> = None;
        for (w, d) in terms {
            let scaled = d.rho.scale(c(w, 0.0));
            acc = Some(match acc {
                None => scaled,
                Some(a) if a.dim() == scaled.dim() => a.add(&scaled),
                Some(_) => return None,
            });
        }
        acc.map(DensityMatrix::from_matrix)
    }
}
