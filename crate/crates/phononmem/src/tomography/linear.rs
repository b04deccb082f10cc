//! Linear (least-squares) inversion of Born-rule probabilities.
//!
//! The analytic counterpart to the likelihood reconstructions: exact on
//! noiseless data, possibly unphysical on noisy data. Serves as the
//! independent oracle the MLE results are validated against.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use std::collections::BTreeMap;

use super::{CoincidenceRecord, PauliAxis};
use crate::error::{Error, Result};
use crate::quantum::linalg::CMatrix;
use crate::quantum::{pauli, PureState};

/// Orthonormal Hermitian operator basis under ⟨A,B⟩ = tr(AB):
/// σ_a/√2 for qubits, (σ_a ⊗ σ_b)/2 for qubit pairs. The identity-like
/// element comes first.
pub(crate) fn hermitian_basis(dim: usize) -> Vec<CMatrix> {
    match dim {
        2 => (0..4)
            .map(|a| pauli(a) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0))
            .collect(),
        4 => {
            let mut basis = Vec::with_capacity(16);
            for a in 0..4 {
                for b in 0..4 {
                    basis.push(pauli(a).kronecker(&pauli(b)) * C64::new(0.5, 0.0));
                }
            }
            basis
        }
        _ => panic!("supported dims are 2 and 4"),
    }
}

fn axis_key(axis: PauliAxis) -> u8 {
    match axis {
        PauliAxis::Z => 0,
        PauliAxis::X => 1,
        PauliAxis::Y => 2,
    }
}

/// A record reduced to its projector and its within-group probability.
pub(crate) struct ProbabilityRecord {
    pub projector: CMatrix,
    pub probability: f64,
}

/// Normalize counts into probabilities within complete projective groups.
///
/// A group is one measurement basis at one storage time: {H,V}, {D,A} or
/// {R,L} on each analyzed arm. Incomplete or empty groups make the design
/// singular and are rejected.
pub(crate) fn group_probabilities(
    records: &[CoincidenceRecord],
) -> Result<Vec<ProbabilityRecord>> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no records to invert".into()));
    }
    let dim = records[0].setting.dim();
    if records.iter().any(|r| r.setting.dim() != dim) {
        return Err(Error::InvalidDimension(
            "records mix single-qubit and two-qubit settings".into(),
        ));
    }

    type GroupKey = (u64, u8, u8);
    let mut groups: BTreeMap<GroupKey, Vec<usize>> = BTreeMap::new();
    for (idx, r) in records.iter().enumerate() {
        r.setting.validate()?;
        let key = (
            r.setting.storage_time_ps.to_bits(),
            axis_key(r.setting.signal.axis()),
            r.setting.herald.map_or(3, |h| axis_key(h.axis())),
        );
        groups.entry(key).or_default().push(idx);
    }

    let group_size = if dim == 2 { 2 } else { 4 };
    let mut out = Vec::with_capacity(records.len());
    for (key, members) in &groups {
        if members.len() != group_size {
            return Err(Error::SingularDesign(format!(
                "measurement group {key:?} has {} settings, expected {group_size}",
                members.len()
            )));
        }
        let total: u64 = members.iter().map(|&i| records[i].counts).sum();
        if total == 0 {
            return Err(Error::SingularDesign(format!(
                "measurement group {key:?} has zero total counts"
            )));
        }
        for &i in members {
            out.push(ProbabilityRecord {
                projector: records[i].setting.projector(),
                probability: records[i].counts as f64 / total as f64,
            });
        }
    }
    Ok(out)
}

fn solve_least_squares(design: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>> {
    let ncols = design.ncols();
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-10 * max_sv.max(1.0))
        .count();
    if rank < ncols {
        return Err(Error::SingularDesign(format!(
            "design rank {rank} is below the {ncols} unknowns; settings do not span the operator space"
        )));
    }
    svd.solve(&rhs, 1e-12)
        .map_err(|e| Error::SingularDesign(e.to_string()))
}

/// Least-squares state estimate from coincidence records.
///
/// Returns a Hermitian unit-trace matrix that may have negative
/// eigenvalues; exact on noiseless expected counts.
pub fn linear_inversion_state(records: &[CoincidenceRecord]) -> Result<CMatrix> {
    let probs = group_probabilities(records)?;
    let dim = records[0].setting.dim();
    let basis = hermitian_basis(dim);
    // drop the identity element: its coefficient is fixed by tr(ρ) = 1
    let traceless = &basis[1..];

    let n = probs.len();
    let mut design = DMatrix::zeros(n, traceless.len());
    let mut rhs = DVector::zeros(n);
    for (k, pr) in probs.iter().enumerate() {
        for (alpha, b) in traceless.iter().enumerate() {
            design[(k, alpha)] = crate::quantum::linalg::inner_re(&pr.projector, b);
        }
        rhs[k] = pr.probability - 1.0 / dim as f64;
    }
    let x = solve_least_squares(design, rhs)?;

    let mut rho = CMatrix::from_diagonal_element(dim, dim, C64::new(1.0 / dim as f64, 0.0));
    for (alpha, b) in traceless.iter().enumerate() {
        rho += b * C64::new(x[alpha], 0.0);
    }
    Ok(rho)
}

/// tr(Π σ_m ψ σ_n) for all (m, n): the linear map from χ entries to the
/// Born probability of projector Π after input ψ.
pub(crate) fn chi_coefficients(input: &PureState, projector: &CMatrix) -> CMatrix {
    let sigma = crate::quantum::paulis();
    let psi = input.projector();
    CMatrix::from_fn(4, 4, |m, n| {
        let op = projector * &sigma[m] * &psi * &sigma[n];
        let mut tr = C64::new(0.0, 0.0);
        for i in 0..2 {
            tr += op[(i, i)];
        }
        tr
    })
}

/// Least-squares process estimate from per-input coincidence records.
///
/// `records_per_input[i]` holds the output measurements for `inputs[i]`.
/// Returns a Hermitian χ matrix that may be unphysical.
pub fn linear_inversion_process(
    inputs: &[PureState],
    records_per_input: &[Vec<CoincidenceRecord>],
) -> Result<CMatrix> {
    if inputs.len() != records_per_input.len() {
        return Err(Error::InvalidDimension(format!(
            "{} inputs but {} record sets",
            inputs.len(),
            records_per_input.len()
        )));
    }
    let basis = hermitian_basis(4);
    let mut design_rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs_rows: Vec<f64> = Vec::new();

    for (input, records) in inputs.iter().zip(records_per_input) {
        if input.dim() != 2 {
            return Err(Error::InvalidDimension(
                "process tomography inputs must be qubit states".into(),
            ));
        }
        let probs = group_probabilities(records)?;
        for pr in &probs {
            let coeff = chi_coefficients(input, &pr.projector);
            let row: Vec<f64> = basis
                .iter()
                .map(|e| {
                    let mut acc = C64::new(0.0, 0.0);
                    for m in 0..4 {
                        for n in 0..4 {
                            acc += e[(m, n)] * coeff[(m, n)];
                        }
                    }
                    acc.re
                })
                .collect();
            design_rows.push(row);
            rhs_rows.push(pr.probability);
        }
    }

    let n = design_rows.len();
    if n < 16 {
        return Err(Error::InsufficientData(format!(
            "process inversion needs at least 16 probabilities, got {n}"
        )));
    }
    let design = DMatrix::from_fn(n, 16, |i, j| design_rows[i][j]);
    let rhs = DVector::from_vec(rhs_rows);
    let y = solve_least_squares(design, rhs)?;

    let mut chi = CMatrix::zeros(4, 4);
    for (beta, e) in basis.iter().enumerate() {
        chi += e * C64::new(y[beta], 0.0);
    }
    Ok(chi)
}
