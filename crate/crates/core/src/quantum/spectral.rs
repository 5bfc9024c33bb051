//! Hermitian eigendecomposition, backed by `nalgebra`.

use super::matrix::{Matrix, C64};
use nalgebra::DMatrix;
use super::{DensityMatrix, QuantumError, STATE_TOL};

/// Default eigenvalue threshold for deciding membership in a support.
pub const SUPPORT_TOL: f64 = 1e-9;

/// Eigenvalues in descending order, eigenvectors as matching columns.
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

impl Spectrum {
    /// Σ |vᵢ⟩⟨vᵢ| over eigenpairs selected by `keep`.
    pub fn projector_where(&self, keep: impl Fn(f64) -> bool) -> Matrix {
        let dim = self.vectors.dim();
        let mut p = Matrix::zeros(dim);
        for (i, &lambda) in self.values.iter().enumerate() {
            if keep(lambda) {
                let v = self.vectors.column(i);
                p = &p + &Matrix::outer(&v, &v);
            }
        }
        p
    }

    /// V Λ V†
    pub fn reconstruct(&self) -> Matrix {
        let lambda = Matrix::from_real_diagonal(&self.values);
        &(&self.vectors * &lambda) * &self.vectors.adjoint()
    }
}

pub fn hermitian_spectrum(a: &Matrix) -> Result<Spectrum, QuantumError> {
    let defect = a.hermiticity_defect();
    if defect > STATE_TOL {
        return Err(QuantumError::NotHermitian(defect));
    }
    // Symmetrize so rounding noise below STATE_TOL cannot leak into the solver.
    let h = (a.as_nalgebra() + a.as_nalgebra().adjoint()) * C64::new(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum {
        values: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
        vectors: Matrix::from_nalgebra(vectors),
    })
}

/// Σ |λᵢ|
pub fn trace_norm(a: &Matrix) -> Result<f64, QuantumError> {
    Ok(hermitian_spectrum(a)?.values.iter().map(|l| l.abs()).sum())
}

/// Orthogonal projector onto the eigenvectors of `rho` with eigenvalue above `tol`.
pub fn support_projector(rho: &DensityMatrix, tol: f64) -> Matrix {
    hermitian_spectrum(rho.matrix())
        .expect("density matrices are Hermitian")
        .projector_where(|l| l > tol)
}

#[cfg(test)]
pub(crate) fn is_identity(m: &Matrix, tol: f64) -> bool {
    m.max_abs_diff(&Matrix::identity(m.dim())) <= tol
}
