//! Small complex Hermitian linear algebra.
//!
//! Everything downstream (fidelity, concurrence, physicality checks, MLE
//! projections) reduces to eigendecompositions of 2×2 and 4×4 Hermitian
//! matrices, so the contracts here are deliberately strict: inputs are
//! checked for Hermiticity and the decomposition is verified against a
//! reconstruction bound.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::tol;

pub type CMatrix = DMatrix<C64>;

/// Largest entry-wise deviation between `m` and its adjoint.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let adj = m.adjoint();
    (m - adj).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn is_hermitian(m: &CMatrix, tolerance: f64) -> bool {
    m.is_square() && hermiticity_error(m) <= tolerance
}

/// Eigenvalues (descending) and matching orthonormal eigenvectors of a
/// Hermitian matrix.
#[derive(Debug, Clone)]
pub struct Eigensystem {
    /// Real eigenvalues sorted in decreasing order.
    pub values: Vec<f64>,
    /// Eigenvectors as columns, ordered to match `values`.
    pub vectors: CMatrix,
}

impl Eigensystem {
    /// Rebuild VΛV† — used to verify the decomposition.
    pub fn reconstruct(&self) -> CMatrix {
        let lambda = CMatrix::from_diagonal(
            &nalgebra::DVector::from_iterator(
                self.values.len(),
                self.values.iter().map(|&v| C64::new(v, 0.0)),
            ),
        );
        &self.vectors * lambda * self.vectors.adjoint()
    }
}

/// Eigendecomposition of a complex Hermitian matrix.
///
/// Rejects non-Hermitian input, then symmetrizes to scrub roundoff before
/// decomposing. The result is checked against `tol::RECONSTRUCTION`.
pub fn hermitian_eigensystem(m: &CMatrix) -> Result<Eigensystem> {
    if !m.is_square() {
        return Err(Error::InvalidDimension(format!(
            "eigensystem requires a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let herm_err = hermiticity_error(m);
    if herm_err > tol::HERMITICITY {
        return Err(Error::ContractViolation(format!(
            "matrix is not Hermitian: max |m - m†| = {herm_err:.3e}"
        )));
    }

    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let eig = sym.symmetric_eigen();

    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).unwrap());

    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }

    let sys = Eigensystem { values, vectors };
    let recon_err = (sys.reconstruct() - m).norm();
    if recon_err > tol::RECONSTRUCTION {
        return Err(Error::ContractViolation(format!(
            "eigendecomposition reconstruction error {recon_err:.3e} exceeds {:.1e}",
            tol::RECONSTRUCTION
        )));
    }
    Ok(sys)
}

/// Principal square root of a positive semidefinite Hermitian matrix.
///
/// Eigenvalues in [-tol::PSD_EIGEN, 0) are clamped to zero; anything more
/// negative is a genuine PSD violation and is rejected.
pub fn psd_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let sys = hermitian_eigensystem(m)?;
    let min = sys.values.last().copied().unwrap_or(0.0);
    if min < -tol::PSD_EIGEN {
        return Err(Error::NotPsd(min));
    }
    let n = m.nrows();
    let mut root = CMatrix::zeros(n, n);
    for (k, &lambda) in sys.values.iter().enumerate() {
        let s = lambda.max(0.0).sqrt();
        let v = sys.vectors.column(k);
        root += (&v * v.adjoint()) * C64::new(s, 0.0);
    }
    Ok(root)
}

/// Hermitian part (m + m†)/2.
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Real part of the trace.
pub fn trace_re(m: &CMatrix) -> f64 {
    (0..m.nrows()).map(|i| m[(i, i)].re).sum()
}

/// Re tr(a·b), the Hilbert-Schmidt inner product for Hermitian operators.
pub fn inner_re(a: &CMatrix, b: &CMatrix) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn eigensystem_of_maximally_mixed_qubit() {
        let m = CMatrix::from_diagonal_element(2, 2, c(0.5, 0.0));
        let sys = hermitian_eigensystem(&m).unwrap();
        assert_abs_diff_eq!(sys.values[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(sys.values[1], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn eigensystem_of_pauli_z() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(1.0, 0.0);
        m[(1, 1)] = c(-1.0, 0.0);
        let sys = hermitian_eigensystem(&m).unwrap();
        assert_abs_diff_eq!(sys.values[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sys.values[1], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn eigensystem_of_werner_state() {
        // Eigenvalues of ρ_W(p) are (1+3p)/4 once and (1-p)/4 three times.
        let p = 0.416;
        let mut m = CMatrix::zeros(4, 4);
        m[(0, 0)] = c((1.0 + p) / 4.0, 0.0);
        m[(3, 3)] = c((1.0 + p) / 4.0, 0.0);
        m[(1, 1)] = c((1.0 - p) / 4.0, 0.0);
        m[(2, 2)] = c((1.0 - p) / 4.0, 0.0);
        m[(0, 3)] = c(p / 2.0, 0.0);
        m[(3, 0)] = c(p / 2.0, 0.0);
        let sys = hermitian_eigensystem(&m).unwrap();
        assert_abs_diff_eq!(sys.values[0], 0.562, epsilon = 1e-12);
        for k in 1..4 {
            assert_abs_diff_eq!(sys.values[k], 0.146, epsilon = 1e-12);
        }
    }

    #[test]
    fn eigensystem_rejects_non_hermitian() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = c(1.0, 0.0);
        assert!(matches!(
            hermitian_eigensystem(&m),
            Err(Error::ContractViolation(_))
        ));
    }

    #[test]
    fn eigensystem_reconstructs_complex_hermitian() {
        let mut m = CMatrix::zeros(4, 4);
        for i in 0..4 {
            m[(i, i)] = c(0.1 * (i as f64 + 1.0), 0.0);
        }
        m[(0, 2)] = c(0.05, 0.11);
        m[(2, 0)] = c(0.05, -0.11);
        m[(1, 3)] = c(-0.07, 0.02);
        m[(3, 1)] = c(-0.07, -0.02);
        let sys = hermitian_eigensystem(&m).unwrap();
        assert!((sys.reconstruct() - &m).norm() < 1e-12);
        // descending order
        for w in sys.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        // orthonormal columns
        let gram = sys.vectors.adjoint() * &sys.vectors;
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[(i, j)].re, expect, epsilon = 1e-12);
                assert_abs_diff_eq!(gram[(i, j)].im, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn psd_sqrt_of_maximally_mixed_two_qubit() {
        let m = CMatrix::from_diagonal_element(4, 4, c(0.25, 0.0));
        let root = psd_sqrt(&m).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(root[(i, i)].re, 0.5, epsilon = 1e-12);
        }
    }

    #[test]
    fn psd_sqrt_of_projector_is_projector() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(1.0, 0.0);
        let root = psd_sqrt(&m).unwrap();
        assert!((&root - &m).norm() < 1e-12);
    }

    #[test]
    fn psd_sqrt_of_diagonal() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(0.25, 0.0);
        m[(1, 1)] = c(0.75, 0.0);
        let root = psd_sqrt(&m).unwrap();
        assert_abs_diff_eq!(root[(0, 0)].re, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(root[(1, 1)].re, 0.75f64.sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(root[(1, 1)].re, 0.8660254037844386, epsilon = 1e-10);
    }

    #[test]
    fn psd_sqrt_squares_back() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(0.6, 0.0);
        m[(1, 1)] = c(0.4, 0.0);
        m[(0, 1)] = c(0.1, 0.2);
        m[(1, 0)] = c(0.1, -0.2);
        let root = psd_sqrt(&m).unwrap();
        assert!((&root * &root - &m).norm() < tol::RECONSTRUCTION);
    }

    #[test]
    fn psd_sqrt_rejects_negative_eigenvalue() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(1.5, 0.0);
        m[(1, 1)] = c(-0.5, 0.0);
        assert!(matches!(psd_sqrt(&m), Err(Error::NotPsd(_))));
    }

    #[test]
    fn psd_sqrt_clamps_tiny_negative_eigenvalue() {
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = c(1.0, 0.0);
        m[(1, 1)] = c(-1e-12, 0.0);
        let root = psd_sqrt(&m).unwrap();
        assert_abs_diff_eq!(root[(1, 1)].re, 0.0, epsilon = 1e-12);
    }
}
