//! Central tolerance table.
//!
//! Every numerical contract in the crate checks against one of these
//! constants; tests assert against the same values, so there is a single
//! source of truth for what "equal" means at each layer.

/// Maximum entry-wise deviation |m - m†| for a matrix to count as Hermitian.
pub const HERMITICITY: f64 = 1e-10;

/// Maximum |tr(ρ) - 1| for a density matrix.
pub const TRACE: f64 = 1e-10;

/// Most negative eigenvalue tolerated before an operator is rejected as
/// not positive semidefinite. Maximum-likelihood reconstructions sit right
/// on the PSD boundary, so exact non-negativity is too strict.
pub const PSD_EIGEN: f64 = 1e-9;

/// Maximum norm of Σ χ_mn σ_n σ_m - 𝟙 for a process matrix to count as
/// trace preserving.
pub const TP_RESIDUAL: f64 = 1e-8;

/// Maximum ‖m - VΛV†‖ accepted from the eigendecomposition, and maximum
/// ‖s·s - m‖ accepted from the PSD square root.
pub const RECONSTRUCTION: f64 = 1e-9;

/// Maximum |‖ψ‖ - 1| for a pure state.
pub const PURE_NORM: f64 = 1e-12;

/// Entry-wise tolerance for algebraic identities that must hold exactly
/// (e.g. the depolarizing channel applied two equivalent ways).
pub const EXACT_EQUIV: f64 = 1e-12;

/// Gradient-norm threshold below which the likelihood optimizers stop.
pub const GRAD_NORM: f64 = 1e-8;

/// Log-likelihood improvement below which the optimizers stop.
pub const LIKELIHOOD_DELTA: f64 = 1e-12;

/// Bisection width for lifetime/bound crossing cross-checks, in ps.
pub const CROSSING_PS: f64 = 1e-9;
