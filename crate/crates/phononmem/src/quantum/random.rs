//! Random quantum objects for property tests and demonstrations.

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::linalg::CMatrix;
use super::{DensityMatrix, PureState};

fn gaussian_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    C64::new(re, im)
}

/// Full-rank random density matrix via G·G†/tr(G·G†) with complex
/// Gaussian G. Guaranteed Hermitian, PSD and trace one by construction.
pub fn random_density_matrix<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    assert!(dim == 2 || dim == 4, "supported dims are 2 and 4");
    let g = CMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng));
    let gg = &g * g.adjoint();
    let tr: f64 = (0..dim).map(|i| gg[(i, i)].re).sum();
    DensityMatrix::new(gg / C64::new(tr, 0.0)).expect("G·G†/tr is a valid state")
}

/// Haar-ish random pure state from a normalized complex Gaussian vector.
pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> PureState {
    loop {
        let v: Vec<C64> = (0..dim).map(|_| gaussian_complex(rng)).collect();
        if DVector::from_vec(v.clone()).norm() > 1e-6 {
            return PureState::normalized(v).unwrap();
        }
    }
}

/// Random unitary from the QR decomposition of a complex Ginibre matrix,
/// with the phase convention fixed so the distribution is Haar.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> CMatrix {
    let g = CMatrix::from_fn(dim, dim, |_, _| gaussian_complex(rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    // normalize column phases by the sign of R's diagonal
    for k in 0..dim {
        let d = r[(k, k)];
        if d.norm() > 0.0 {
            let phase = d / C64::new(d.norm(), 0.0);
            for i in 0..dim {
                q[(i, k)] *= phase.conj();
            }
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_density_matrix_is_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in [2, 4] {
            for _ in 0..20 {
                let rho = random_density_matrix(dim, &mut rng);
                assert_eq!(rho.dim(), dim);
            }
        }
    }

    #[test]
    fn random_unitary_is_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for dim in [2, 4] {
            let u = random_unitary(dim, &mut rng);
            let gram = u.adjoint() * &u;
            let eye = CMatrix::from_diagonal_element(dim, dim, C64::new(1.0, 0.0));
            assert!((gram - eye).norm() < 1e-12);
        }
    }
}
