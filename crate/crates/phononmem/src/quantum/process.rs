//! Process matrices: qubit channels expressed over the Pauli basis.
//!
//! A channel acts as ρ → Σ_{m,n} χ_{m,n} σ_m ρ σ_n with the fixed ordering
//! {𝟙, X, Y, Z}. Physicality means χ is Hermitian, positive semidefinite
//! (complete positivity) and satisfies Σ_{m,n} χ_{m,n} σ_n σ_m = 𝟙
//! (trace preservation).

use num_complex::Complex64 as C64;

use super::linalg::{self, CMatrix};
use super::{hermitian_eigensystem, pauli, paulis, DensityMatrix, Qubit};
use crate::error::{Error, Result};
use crate::tol;

/// A 4×4 Hermitian χ matrix over the Pauli operator basis.
#[derive(Debug, Clone)]
pub struct ProcessMatrix {
    mat: CMatrix,
}

impl ProcessMatrix {
    /// Validate and wrap: Hermitian within 1e-10, PSD within 1e-9, and
    /// trace-preserving within 1e-8.
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != 4 || mat.ncols() != 4 {
            return Err(Error::InvalidDimension(format!(
                "process matrix must be 4x4, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let herm = linalg::hermiticity_error(&mat);
        if herm > tol::HERMITICITY {
            return Err(Error::ContractViolation(format!(
                "process matrix not Hermitian: max |m - m†| = {herm:.3e}"
            )));
        }
        let sys = hermitian_eigensystem(&mat)?;
        let min = sys.values.last().copied().unwrap_or(0.0);
        if min < -tol::PSD_EIGEN {
            return Err(Error::NotPsd(min));
        }
        let residual = tp_residual(&mat);
        if residual > tol::TP_RESIDUAL {
            return Err(Error::ContractViolation(format!(
                "process matrix not trace preserving: residual {residual:.3e}"
            )));
        }
        Ok(Self { mat })
    }

    /// The identity channel, χ = diag(1, 0, 0, 0).
    pub fn identity() -> Self {
        Self::from_diagonal([1.0, 0.0, 0.0, 0.0]).unwrap()
    }

    /// A channel diagonal in the Pauli basis.
    pub fn from_diagonal(diag: [f64; 4]) -> Result<Self> {
        let mut m = CMatrix::zeros(4, 4);
        for (k, &v) in diag.iter().enumerate() {
            m[(k, k)] = C64::new(v, 0.0);
        }
        Self::new(m)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn entry(&self, m: usize, n: usize) -> C64 {
        self.mat[(m, n)]
    }

    /// ‖Σ χ_mn σ_n σ_m − 𝟙‖, the trace-preservation residual.
    pub fn tp_residual(&self) -> f64 {
        tp_residual(&self.mat)
    }
}

/// Trace-preservation residual of an arbitrary 4×4 matrix in χ form.
pub fn tp_residual(chi: &CMatrix) -> f64 {
    let sigma = paulis();
    let mut acc = CMatrix::zeros(2, 2);
    for m in 0..4 {
        for n in 0..4 {
            acc += (&sigma[n] * &sigma[m]) * chi[(m, n)];
        }
    }
    acc[(0, 0)] -= C64::new(1.0, 0.0);
    acc[(1, 1)] -= C64::new(1.0, 0.0);
    acc.norm()
}

/// Apply a channel to a qubit state: ρ → Σ χ_mn σ_m ρ σ_n.
pub fn apply_chi(chi: &ProcessMatrix, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dim() != 2 {
        return Err(Error::InvalidDimension(format!(
            "apply_chi takes a qubit state, got dim {}",
            rho.dim()
        )));
    }
    let sigma = paulis();
    let mut out = CMatrix::zeros(2, 2);
    for m in 0..4 {
        for n in 0..4 {
            let c = chi.entry(m, n);
            if c.norm() == 0.0 {
                continue;
            }
            out += (&sigma[m] * rho.matrix() * &sigma[n]) * c;
        }
    }
    DensityMatrix::new(out)
}

/// Apply a channel to one qubit of a two-qubit state, identity on the other.
pub fn apply_one_sided(
    chi: &ProcessMatrix,
    rho: &DensityMatrix,
    side: Qubit,
) -> Result<DensityMatrix> {
    if rho.dim() != 4 {
        return Err(Error::InvalidDimension(format!(
            "apply_one_sided takes a two-qubit state, got dim {}",
            rho.dim()
        )));
    }
    let eye = pauli(0);
    let lifted: Vec<CMatrix> = (0..4)
        .map(|k| match side {
            Qubit::Signal => pauli(k).kronecker(&eye),
            Qubit::Herald => eye.kronecker(&pauli(k)),
        })
        .collect();
    let mut out = CMatrix::zeros(4, 4);
    for m in 0..4 {
        for n in 0..4 {
            let c = chi.entry(m, n);
            if c.norm() == 0.0 {
                continue;
            }
            out += (&lifted[m] * rho.matrix() * &lifted[n]) * c;
        }
    }
    DensityMatrix::new(out)
}
