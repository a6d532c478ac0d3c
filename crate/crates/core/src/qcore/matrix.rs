use super::{c, C64};
use std::fmt;

/// Small dense complex matrix, row-major.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<C64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![c(0.0, 0.0); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = c(1.0, 0.0);
        }
        m
    }

    /// Returns `None` unless `data.len()` is a perfect square.
    pub fn from_vec(data: Vec<C64>) -> Option<Self> {
        let dim = (data.len() as f64).sqrt().round() as usize;
        (dim * dim == data.len()).then_some(Matrix { dim, data })
    }

    pub fn from_rows<const N: usize>(rows: &[[C64; N]; N]) -> Self {
        Matrix {
            dim: N,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn mul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == c(0.0, 0.0) {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        Matrix {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        self.add(&rhs.scale(c(-1.0, 0.0)))
    }

    pub fn scale(&self, k: C64) -> Matrix {
        Matrix {
            dim: self.dim,
            data: self.data.iter().map(|a| a * k).collect(),
        }
    }

    pub fn adjoint(&self) -> Matrix {
        let n = self.dim;
        let mut out = Matrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    /// Kronecker product `self ⊗ rhs`; `self` occupies the more significant bits.
    pub fn kron(&self, rhs: &Matrix) -> Matrix {
        let (n, m) = (self.dim, rhs.dim);
        let mut out = Matrix::zeros(n * m);
        for i in 0..n {
            for j in 0..n {
                let a = self.data[i * n + j];
                for k in 0..m {
                    for l in 0..m {
                        out.data[(i * m + k) * n * m + j * m + l] = a * rhs.data[k * m + l];
                    }
                }
            }
        }
        out
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// Largest entrywise modulus of `self - rhs`.
    pub fn max_abs_diff(&self, rhs: &Matrix) -> f64 {
        assert_eq!(self.dim, rhs.dim, "matrix dimension mismatch");
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.mul(&self.adjoint()).max_abs_diff(&Matrix::identity(self.dim))
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim, "vector dimension mismatch");
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.data[i * self.dim + j] * v[j]).sum())
            .collect()
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.dim, self.dim)?;
        for i in 0..self.dim {
            let row: Vec<String> = (0..self.dim)
                .map(|j| {
                    let z = self.get(i, j);
                    format!("{:+.4}{:+.4}i", z.re, z.im)
                })
                .collect();
            writeln!(f, "  {}", row.join(", "))?;
        }
        write!(f, "]")
    }
}
