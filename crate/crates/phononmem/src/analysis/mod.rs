//! Quantum-information metrics shared by the simulation and ingestion
//! paths: state fidelity, process/average fidelity, and concurrence.
//!
//! Fidelity uses the squared (Jozsa) convention, F = (tr √(√ρ σ √ρ))²,
//! so that F = ⟨ψ|ρ|ψ⟩ against a pure target. This is the convention under
//! which the Werner identity F(ρ_W(p), |Φ⁺⟩) = (1 + 3p)/4 holds.

pub mod fit;



use crate::error::{Error, Result};
use crate::quantum::linalg::{self, CMatrix};
use crate::quantum::{hermitian_eigensystem, pauli, psd_sqrt, DensityMatrix, ProcessMatrix};


pub use fit::{fit_exponential, DecayFit, DecayPoint};

/// √λ with eigenvalues below a relative floor zeroed. Rank-deficient
/// operators carry spurious eigenvalues of order 1e-16 whose square roots
/// (1e-8 each) would otherwise dominate trace-of-square-root sums.
fn sqrt_eigenvalues(values: &[f64]) -> Vec<f64> {
    let max = values.iter().cloned().fold(0.0, f64::max);
    let cut = 1e-12 * max.max(1e-300);
    values
        .iter()
        .map(|&v| if v > cut { v.sqrt() } else { 0.0 })
        .collect()
}

/// Fidelity F(ρ, σ) = (tr √(√ρ σ √ρ))², symmetric, in [0, 1].
pub fn state_fidelity(rho: &DensityMatrix, sigma: &DensityMatrix) -> Result<f64> {
    if rho.dim() != sigma.dim() {
        return Err(Error::InvalidDimension(format!(
            "fidelity needs equal dims, got {} and {}",
            rho.dim(),
            sigma.dim()
        )));
    }
    let root = psd_sqrt(rho.matrix())?;
    let inner = &root * sigma.matrix() * &root;
    let sys = hermitian_eigensystem(&linalg::hermitian_part(&inner))?;
    let trace_root: f64 = sqrt_eigenvalues(&sys.values).iter().sum();
    Ok((trace_root * trace_root).clamp(0.0, 1.0))
}

/// Process fidelity of χ with a rank-1 (unitary) ideal process.
///
/// For a rank-1 ideal this reduces to tr(χ_ideal χ); against the identity
/// memory it is simply χ₀₀.
pub fn process_fidelity(chi: &ProcessMatrix, ideal: &ProcessMatrix) -> Result<f64> {
    let sys = hermitian_eigensystem(ideal.matrix())?;
    let rank1 = sys.values[0] > 1.0 - 1e-6 && sys.values[1..].iter().all(|&v| v.abs() < 1e-6);
    if !rank1 {
        return Err(Error::ContractViolation(
            "process fidelity supports only rank-1 (unitary) ideal processes".into(),
        ));
    }
    Ok(linalg::inner_re(ideal.matrix(), chi.matrix()).clamp(0.0, 1.0))
}

/// Average input-output state fidelity of a qubit channel,
/// F_avg = (2 F_proc + 1)/3 with F_proc taken against the identity.
pub fn average_fidelity(chi: &ProcessMatrix) -> Result<f64> {
    let f_proc = process_fidelity(chi, &ProcessMatrix::identity())?;
    Ok((2.0 * f_proc + 1.0) / 3.0)
}

/// Classical (measure-and-resend) bound on the average fidelity of a
/// qubit memory.
pub const CLASSICAL_AVG_FIDELITY: f64 = 2.0 / 3.0;

/// Wootters concurrence of a two-qubit state.
///
/// C(ρ) = max{0, λ₁ − λ₂ − λ₃ − λ₄} where λᵢ are the decreasing
/// eigenvalues of √(√ρ ρ̃ √ρ) and ρ̃ = (σ_y⊗σ_y) ρ* (σ_y⊗σ_y). The
/// conjugation is taken in the computational basis fixed by the crate's
/// Pauli ordering.
pub fn concurrence(rho: &DensityMatrix) -> Result<f64> {
    if rho.dim() != 4 {
        return Err(Error::InvalidDimension(format!(
            "concurrence is defined for two-qubit states, got dim {}",
            rho.dim()
        )));
    }
    let yy = pauli(2).kronecker(&pauli(2));
    let conj = CMatrix::from_fn(4, 4, |i, j| rho.entry(i, j).conj());
    let spin_flipped = &yy * conj * &yy;

    let root = psd_sqrt(rho.matrix())?;
    let inner = &root * spin_flipped * &root;
    let sys = hermitian_eigensystem(&linalg::hermitian_part(&inner))?;
    let lambdas = sqrt_eigenvalues(&sys.values);
    // already sorted descending
    let c = lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3];
    Ok(c.max(0.0).min(1.0))
}

/// Closed-form concurrence of a Werner state: max{0, (3p − 1)/2}.
pub fn werner_concurrence(p: f64) -> f64 {
    ((3.0 * p - 1.0) / 2.0).max(0.0)
}

/// Closed-form fidelity of a Werner state with |Φ⁺⟩: (1 + 3p)/4.
pub fn werner_fidelity(p: f64) -> f64 {
    (1.0 + 3.0 * p) / 4.0
}

/// Trace distance ½‖ρ − σ‖₁, used by the oracle-equivalence tests.
pub fn trace_distance(a: &CMatrix, b: &CMatrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::InvalidDimension(
            "trace distance needs equal shapes".into(),
        ));
    }
    let diff = linalg::hermitian_part(&(a - b));
    let sys = hermitian_eigensystem(&diff)?;
    Ok(0.5 * sys.values.iter().map(|v| v.abs()).sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::{storage_channel, werner_state};
    use crate::quantum::random::{random_density_matrix, random_pure_state, random_unitary};
    use crate::quantum::PureState;
    use approx::assert_abs_diff_eq;
    use num_complex::Complex64;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fidelity_with_itself_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for dim in [2, 4] {
            for _ in 0..10 {
                let rho = random_density_matrix(dim, &mut rng);
                assert_abs_diff_eq!(state_fidelity(&rho, &rho).unwrap(), 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn fidelity_of_orthogonal_states_is_zero() {
        let zero = PureState::zero().density();
        let one = PureState::one().density();
        assert_abs_diff_eq!(state_fidelity(&zero, &one).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn fidelity_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        for _ in 0..10 {
            let a = random_density_matrix(2, &mut rng);
            let b = random_density_matrix(2, &mut rng);
            let fab = state_fidelity(&a, &b).unwrap();
            let fba = state_fidelity(&b, &a).unwrap();
            assert_abs_diff_eq!(fab, fba, epsilon = 1e-10);
        }
    }

    #[test]
    fn fidelity_on_pure_states_is_squared_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let psi = random_pure_state(2, &mut rng);
            let phi = random_pure_state(2, &mut rng);
            let overlap: Complex64 = psi
                .amplitudes()
                .iter()
                .zip(phi.amplitudes().iter())
                .map(|(a, b)| a.conj() * b)
                .sum();
            let expect = overlap.norm_sqr();
            let f = state_fidelity(&psi.density(), &phi.density()).unwrap();
            assert_abs_diff_eq!(f, expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn werner_fidelity_identity() {
        let bell = PureState::phi_plus().density();
        for k in 0..=20 {
            let p = k as f64 / 20.0;
            let f = state_fidelity(&werner_state(p).unwrap(), &bell).unwrap();
            assert_abs_diff_eq!(f, werner_fidelity(p), epsilon = 1e-9);
        }
        let f = state_fidelity(&werner_state(0.416).unwrap(), &bell).unwrap();
        assert_abs_diff_eq!(f, 0.562, epsilon = 1e-9);
    }

    #[test]
    fn process_fidelity_identity_cases() {
        let id = ProcessMatrix::identity();
        assert_abs_diff_eq!(process_fidelity(&id, &id).unwrap(), 1.0, epsilon = 1e-12);

        let depol = storage_channel(0.0).unwrap();
        assert_abs_diff_eq!(process_fidelity(&depol, &id).unwrap(), 0.25, epsilon = 1e-12);

        for p in [0.1, 0.5961, 0.9] {
            let chi = storage_channel(p).unwrap();
            assert_abs_diff_eq!(
                process_fidelity(&chi, &id).unwrap(),
                (1.0 + 3.0 * p) / 4.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn process_fidelity_rejects_mixed_ideal() {
        let depol = storage_channel(0.3).unwrap();
        assert!(process_fidelity(&ProcessMatrix::identity(), &depol).is_err());
    }

    #[test]
    fn average_fidelity_relation() {
        // the measured pair: F_proc = 0.677 corresponds to F_avg ≈ 0.785
        assert_abs_diff_eq!((2.0 * 0.677 + 1.0) / 3.0, 0.7847, epsilon = 1e-4);

        let id = ProcessMatrix::identity();
        assert_abs_diff_eq!(average_fidelity(&id).unwrap(), 1.0, epsilon = 1e-12);

        // p = 1/3 sits exactly on the classical bound
        let chi = storage_channel(1.0 / 3.0).unwrap();
        assert_abs_diff_eq!(
            average_fidelity(&chi).unwrap(),
            CLASSICAL_AVG_FIDELITY,
            epsilon = 1e-12
        );
    }

    #[test]
    fn average_fidelity_equals_half_one_plus_p() {
        for k in 0..=10 {
            let p = k as f64 / 10.0;
            let chi = storage_channel(p).unwrap();
            assert_abs_diff_eq!(
                average_fidelity(&chi).unwrap(),
                (1.0 + p) / 2.0,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn concurrence_of_bell_state_is_one() {
        let bell = PureState::phi_plus().density();
        assert_abs_diff_eq!(concurrence(&bell).unwrap(), 1.0, epsilon = 1e-9);
    }

    #[test]
    fn concurrence_of_mixed_and_product_states_is_zero() {
        let mixed = DensityMatrix::maximally_mixed(4).unwrap();
        assert_abs_diff_eq!(concurrence(&mixed).unwrap(), 0.0, epsilon = 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for _ in 0..10 {
            let a = random_density_matrix(2, &mut rng);
            let b = random_density_matrix(2, &mut rng);
            let prod = crate::quantum::tensor_product(&a, &b).unwrap();
            assert_abs_diff_eq!(concurrence(&prod).unwrap(), 0.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn concurrence_of_werner_states_matches_closed_form() {
        for k in 0..=20 {
            let p = k as f64 / 20.0;
            let c = concurrence(&werner_state(p).unwrap()).unwrap();
            assert_abs_diff_eq!(c, werner_concurrence(p), epsilon = 1e-9);
        }
        // the full Wootters computation at p = 0.8 gives 0.7
        let c = concurrence(&werner_state(0.8).unwrap()).unwrap();
        assert_abs_diff_eq!(c, 0.7, epsilon = 1e-9);
        // ... and the vanishing point at p = 1/3
        let c = concurrence(&werner_state(1.0 / 3.0).unwrap()).unwrap();
        assert_abs_diff_eq!(c, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn concurrence_invariant_under_local_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(25);
        for _ in 0..10 {
            let rho = random_density_matrix(4, &mut rng);
            let u = random_unitary(2, &mut rng);
            let v = random_unitary(2, &mut rng);
            let uv = u.kronecker(&v);
            let rotated =
                DensityMatrix::new(&uv * rho.matrix() * uv.adjoint()).expect("unitary preserves physicality");
            let c0 = concurrence(&rho).unwrap();
            let c1 = concurrence(&rotated).unwrap();
            assert_abs_diff_eq!(c0, c1, epsilon = 1e-9);
        }
    }

    #[test]
    fn trace_distance_basics() {
        let zero = PureState::zero().density();
        let one = PureState::one().density();
        assert_abs_diff_eq!(
            trace_distance(zero.matrix(), one.matrix()).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            trace_distance(zero.matrix(), zero.matrix()).unwrap(),
            0.0,
            epsilon = 1e-15
        );
    }
}
