//! Core quantum objects: pure states, density matrices, process matrices,
//! and the small-dimension linear algebra they are built on.
//!
//! Only qubit (dim 2) and two-qubit (dim 4) objects are supported; the
//! memory stores one polarization qubit and the entangled demonstrations
//! need exactly one partner qubit. The Pauli operator ordering is fixed as
//! {𝟙, X, Y, Z} throughout the crate.

pub mod linalg;
pub mod process;
pub mod random;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tol;

pub use linalg::{hermitian_eigensystem, psd_sqrt, CMatrix, Eigensystem};
pub use process::{apply_chi, apply_one_sided, ProcessMatrix};

/// Which qubit of a signal–herald pair an operation addresses.
///
/// The signal qubit is the first tensor factor everywhere in this crate:
/// a two-qubit basis state |ab⟩ means signal in |a⟩, herald in |b⟩.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Qubit {
    Signal,
    Herald,
}

/// The Pauli matrix with the crate-wide index convention 0=𝟙, 1=X, 2=Y, 3=Z.
pub fn pauli(index: usize) -> CMatrix {
    let z = C64::new(0.0, 0.0);
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let entries = match index {
        0 => [one, z, z, one],
        1 => [z, one, one, z],
        2 => [z, -i, i, z],
        3 => [one, z, z, -one],
        _ => panic!("Pauli index must be 0..=3, got {index}"),
    };
    // nalgebra fills column-major; Pauli matrices are symmetric up to the
    // Y sign handled above, so list entries row-major and transpose.
    CMatrix::from_row_slice(2, 2, &entries)
}

/// All four Pauli matrices in the fixed ordering {𝟙, X, Y, Z}.
pub fn paulis() -> [CMatrix; 4] {
    [pauli(0), pauli(1), pauli(2), pauli(3)]
}

/// A normalized pure state of one or two qubits.
#[derive(Debug, Clone)]
pub struct PureState {
    amplitudes: DVector<C64>,
}

impl PureState {
    /// Build from amplitudes, rejecting vectors that are not unit norm.
    pub fn new(amplitudes: Vec<C64>) -> Result<Self> {
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if (norm - 1.0).abs() > tol::PURE_NORM {
            return Err(Error::ContractViolation(format!(
                "pure state norm {norm} differs from 1 by more than {:.1e}",
                tol::PURE_NORM
            )));
        }
        Ok(Self { amplitudes: v })
    }

    /// Build from arbitrary non-zero amplitudes, normalizing them.
    pub fn normalized(amplitudes: Vec<C64>) -> Result<Self> {
        let v = DVector::from_vec(amplitudes);
        let norm = v.norm();
        if norm == 0.0 {
            return Err(Error::Domain("cannot normalize the zero vector".into()));
        }
        Ok(Self {
            amplitudes: v / C64::new(norm, 0.0),
        })
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    /// |0⟩, the horizontal-polarization basis state.
    pub fn zero() -> Self {
        Self::new(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap()
    }

    /// |1⟩, the vertical-polarization basis state.
    pub fn one() -> Self {
        Self::new(vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)]).unwrap()
    }

    /// |+⟩ = (|0⟩ + |1⟩)/√2.
    pub fn plus() -> Self {
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::new(vec![a, a]).unwrap()
    }

    /// |−⟩ = (|0⟩ − |1⟩)/√2.
    pub fn minus() -> Self {
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        Self::new(vec![a, -a]).unwrap()
    }

    /// |+y⟩ = (|0⟩ + i|1⟩)/√2.
    pub fn plus_y() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(vec![C64::new(a, 0.0), C64::new(0.0, a)]).unwrap()
    }

    /// |−y⟩ = (|0⟩ − i|1⟩)/√2.
    pub fn minus_y() -> Self {
        let a = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(vec![C64::new(a, 0.0), C64::new(0.0, -a)]).unwrap()
    }

    /// |Φ⁺⟩ = (|00⟩ + |11⟩)/√2, signal ⊗ herald.
    pub fn phi_plus() -> Self {
        let a = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let z = C64::new(0.0, 0.0);
        Self::new(vec![a, z, z, a]).unwrap()
    }

    /// Tensor product |self⟩ ⊗ |other⟩.
    pub fn tensor(&self, other: &PureState) -> PureState {
        let n = self.dim() * other.dim();
        let mut amps = Vec::with_capacity(n);
        for a in self.amplitudes.iter() {
            for b in other.amplitudes.iter() {
                amps.push(a * b);
            }
        }
        PureState {
            amplitudes: DVector::from_vec(amps),
        }
    }

    /// The rank-1 projector |ψ⟩⟨ψ| as a plain matrix.
    pub fn projector(&self) -> CMatrix {
        let v = &self.amplitudes;
        let mut m = CMatrix::zeros(self.dim(), self.dim());
        for i in 0..self.dim() {
            for j in 0..self.dim() {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        m
    }

    /// |ψ⟩⟨ψ| as a validated density matrix.
    pub fn density(&self) -> DensityMatrix {
        DensityMatrix::new(self.projector()).expect("projector of a unit vector is a valid state")
    }
}

/// A trace-one positive-semidefinite Hermitian matrix describing a qubit
/// (dim 2) or qubit-pair (dim 4) state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr", into = "MatrixRepr")]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    /// Validate and wrap a matrix: Hermitian, trace one, PSD, dim 2 or 4.
    pub fn new(mat: CMatrix) -> Result<Self> {
        let n = mat.nrows();
        if !mat.is_square() || (n != 2 && n != 4) {
            return Err(Error::InvalidDimension(format!(
                "density matrix must be 2x2 or 4x4, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let herm = linalg::hermiticity_error(&mat);
        if herm > tol::HERMITICITY {
            return Err(Error::ContractViolation(format!(
                "density matrix not Hermitian: max |m - m†| = {herm:.3e}"
            )));
        }
        let tr = linalg::trace_re(&mat);
        if (tr - 1.0).abs() > tol::TRACE {
            return Err(Error::ContractViolation(format!(
                "density matrix trace {tr} differs from 1 beyond {:.1e}",
                tol::TRACE
            )));
        }
        let sys = hermitian_eigensystem(&mat)?;
        let min = sys.values.last().copied().unwrap_or(0.0);
        if min < -tol::PSD_EIGEN {
            return Err(Error::NotPsd(min));
        }
        Ok(Self { mat })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn entry(&self, i: usize, j: usize) -> C64 {
        self.mat[(i, j)]
    }

    /// 𝟙/d, the maximally mixed state.
    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim != 2 && dim != 4 {
            return Err(Error::InvalidDimension(format!(
                "maximally mixed state supports dim 2 or 4, got {dim}"
            )));
        }
        Ok(Self {
            mat: CMatrix::from_diagonal_element(dim, dim, C64::new(1.0 / dim as f64, 0.0)),
        })
    }

    /// Purity tr(ρ²).
    pub fn purity(&self) -> f64 {
        linalg::inner_re(&self.mat, &self.mat)
    }

    /// tr(Π ρ) for a Hermitian operator Π, as a real number.
    pub fn expectation(&self, op: &CMatrix) -> f64 {
        linalg::inner_re(op, &self.mat)
    }
}

/// Flat serialization of a complex matrix as parallel real/imag tables.
#[derive(Serialize, Deserialize)]
struct MatrixRepr {
    dim: usize,
    re: Vec<Vec<f64>>,
    im: Vec<Vec<f64>>,
}

impl From<DensityMatrix> for MatrixRepr {
    fn from(d: DensityMatrix) -> Self {
        let n = d.dim();
        let re = (0..n)
            .map(|i| (0..n).map(|j| d.mat[(i, j)].re).collect())
            .collect();
        let im = (0..n)
            .map(|i| (0..n).map(|j| d.mat[(i, j)].im).collect())
            .collect();
        MatrixRepr { dim: n, re, im }
    }
}

impl TryFrom<MatrixRepr> for DensityMatrix {
    type Error = Error;

    fn try_from(r: MatrixRepr) -> Result<Self> {
        let n = r.dim;
        if r.re.len() != n || r.im.len() != n || r.re.iter().chain(r.im.iter()).any(|row| row.len() != n) {
            return Err(Error::InvalidDimension(
                "matrix tables do not match declared dimension".into(),
            ));
        }
        let mat = CMatrix::from_fn(n, n, |i, j| C64::new(r.re[i][j], r.im[i][j]));
        DensityMatrix::new(mat)
    }
}

/// Kronecker product of two qubit states: ρ_a ⊗ ρ_b.
pub fn tensor_product(a: &DensityMatrix, b: &DensityMatrix) -> Result<DensityMatrix> {
    if a.dim() != 2 || b.dim() != 2 {
        return Err(Error::InvalidDimension(format!(
            "tensor_product takes two qubit states, got dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    DensityMatrix::new(a.mat.kronecker(&b.mat))
}

/// Trace out one qubit of a two-qubit state, keeping `keep`.
pub fn partial_trace(rho: &DensityMatrix, keep: Qubit) -> Result<DensityMatrix> {
    if rho.dim() != 4 {
        return Err(Error::InvalidDimension(format!(
            "partial_trace requires a 4-dim state, got {}",
            rho.dim()
        )));
    }
    let m = rho.matrix();
    let mut out = CMatrix::zeros(2, 2);
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..2 {
                // composite index (s, h) -> 2s + h
                let (row, col) = match keep {
                    Qubit::Signal => (2 * i + k, 2 * j + k),
                    Qubit::Herald => (2 * k + i, 2 * k + j),
                };
                acc += m[(row, col)];
            }
            out[(i, j)] = acc;
        }
    }
    DensityMatrix::new(out)
}
