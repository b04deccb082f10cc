//! Maximum-likelihood state and process reconstruction.
//!
//! Both reconstructions maximize the Poisson counting likelihood
//! L = Σ_k [n_k ln λ_k − λ_k] with λ_k = s·t_k·q_k + t_k·a, where q_k is
//! the Born probability of setting k, s an overall rate scale (optimized
//! as ln s alongside the physical parameters) and a an optional known
//! accidental floor. A Gaussian approximation would be invalid at the
//! few-Hz rates this instrument produces.
//!
//! States are parameterized as ρ = A A†/tr(A A†) with lower-triangular A,
//! so every iterate is physical by construction. Processes are optimized
//! directly in χ space, where the likelihood is concave and the CPTP set
//! is convex: each gradient step is followed by a Dykstra projection onto
//! {χ ⪰ 0} ∩ {trace preserving}. Backtracking line searches keep the
//! likelihood non-decreasing in both cases; a derivative-free Nelder-Mead
//! fallback handles the (rare) case where the gradient ascent stalls
//! before meeting its tolerances.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::linear::{self, chi_coefficients, hermitian_basis};
use super::{BestIterate, CoincidenceRecord, TomographyResult};
use crate::error::{Error, Result};
use crate::quantum::linalg::{self, CMatrix};
use crate::quantum::{hermitian_eigensystem, paulis, DensityMatrix, ProcessMatrix, PureState};
use crate::tol;

/// Knobs for the likelihood optimizers. The defaults implement the
/// documented convergence contract; tests only override the caps.
#[derive(Debug, Clone)]
pub struct MleOptions {
    pub max_iterations: usize,
    /// Stop when the gradient norm falls below this.
    pub gradient_tolerance: f64,
    /// Stop when an accepted step improves the log-likelihood by less.
    pub likelihood_tolerance: f64,
    /// Known accidental-coincidence rate entering every λ_k, Hz.
    pub accidental_hz: f64,
    /// Try Nelder-Mead before reporting a convergence failure.
    pub simplex_fallback: bool,
}

impl Default for MleOptions {
    fn default() -> Self {
        MleOptions {
            max_iterations: 20_000,
            gradient_tolerance: tol::GRAD_NORM,
            likelihood_tolerance: tol::LIKELIHOOD_DELTA,
            accidental_hz: 0.0,
            simplex_fallback: true,
        }
    }
}

// ---------------------------------------------------------------------------
// shared Poisson likelihood pieces
// ---------------------------------------------------------------------------

struct CountRow {
    counts: f64,
    integration_s: f64,
}

fn poisson_term(counts: f64, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return if counts > 0.0 { f64::NEG_INFINITY } else { 0.0 };
    }
    counts * lambda.ln() - lambda
}

/// Σ n ln λ − λ with λ_k = s t_k q_k + t_k a.
fn log_likelihood(rows: &[CountRow], born: &[f64], scale: f64, accidental: f64) -> f64 {
    rows.iter()
        .zip(born)
        .map(|(r, &q)| {
            let lambda = r.integration_s * (scale * q.max(0.0) + accidental);
            poisson_term(r.counts, lambda)
        })
        .sum()
}

/// w_k = (n_k/λ_k − 1) s t_k and the ln-scale gradient Σ w_k q_k.
fn likelihood_weights(
    rows: &[CountRow],
    born: &[f64],
    scale: f64,
    accidental: f64,
) -> (Vec<f64>, f64) {
    let mut weights = Vec::with_capacity(rows.len());
    let mut scale_grad = 0.0;
    for (r, &q) in rows.iter().zip(born) {
        let q = q.max(0.0);
        let lambda = (r.integration_s * (scale * q + accidental)).max(1e-300);
        let w = (r.counts / lambda - 1.0) * scale * r.integration_s;
        weights.push(w);
        scale_grad += w * q;
    }
    (weights, scale_grad)
}

/// ln s₀ with s₀ = Σn / Σ(t q).
fn initial_log_scale(rows: &[CountRow], born: &[f64]) -> f64 {
    let total: f64 = rows.iter().map(|r| r.counts).sum();
    let exposure: f64 = rows
        .iter()
        .zip(born)
        .map(|(r, &q)| r.integration_s * q.max(0.0))
        .sum();
    if total > 0.0 && exposure > 0.0 {
        (total / exposure).ln()
    } else {
        0.0
    }
}

// ---------------------------------------------------------------------------
// generic gradient ascent with backtracking
// ---------------------------------------------------------------------------

struct AscentOutcome {
    theta: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

/// Gradient ascent with a backtracking (Armijo) line search. Accepted
/// steps never decrease the objective; that is asserted every iteration.
fn gradient_ascent<E>(eval: E, theta0: Vec<f64>, opts: &MleOptions) -> AscentOutcome
where
    E: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let mut theta = theta0;
    let (mut value, mut grad) = eval(&theta);
    let mut step = 1.0 / (1.0 + grad.iter().map(|g| g * g).sum::<f64>().sqrt());
    let mut history = vec![value];
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iterations {
        iterations = iter + 1;
        let gnorm2: f64 = grad.iter().map(|g| g * g).sum();
        if gnorm2.sqrt() < opts.gradient_tolerance {
            converged = true;
            break;
        }

        let mut alpha = step * 2.0;
        let mut accepted = None;
        for _ in 0..60 {
            let candidate: Vec<f64> = theta
                .iter()
                .zip(&grad)
                .map(|(t, g)| t + alpha * g)
                .collect();
            let (cand_value, cand_grad) = eval(&candidate);
            if cand_value.is_finite() && cand_value >= value + 1e-4 * alpha * gnorm2 {
                accepted = Some((candidate, cand_value, cand_grad, alpha));
                break;
            }
            alpha *= 0.5;
        }

        let Some((new_theta, new_value, new_grad, used_alpha)) = accepted else {
            // no float-representable improvement along the gradient:
            // stationary at working precision
            converged = true;
            break;
        };
        assert!(
            new_value >= value,
            "log-likelihood decreased within an accepted step: {new_value} < {value}"
        );
        let improvement = new_value - value;
        theta = new_theta;
        value = new_value;
        grad = new_grad;
        step = used_alpha;
        history.push(value);
        if improvement < opts.likelihood_tolerance {
            converged = true;
            break;
        }
    }
    AscentOutcome {
        theta,
        value,
        iterations,
        converged,
        history,
    }
}

// ---------------------------------------------------------------------------
// state tomography
// ---------------------------------------------------------------------------

struct StateProblem {
    projectors: Vec<CMatrix>,
    rows: Vec<CountRow>,
    accidental_hz: f64,
    dim: usize,
}

impl StateProblem {
    fn from_records(records: &[CoincidenceRecord], dim: usize, accidental_hz: f64) -> Result<Self> {
        if dim != 2 && dim != 4 {
            return Err(Error::InvalidDimension(format!(
                "state tomography supports dims 2 and 4, got {dim}"
            )));
        }
        if records.len() < dim * dim {
            return Err(Error::InsufficientData(format!(
                "state tomography in dim {dim} needs at least {} settings, got {}",
                dim * dim,
                records.len()
            )));
        }
        for r in records {
            r.setting.validate()?;
            if r.setting.dim() != dim {
                return Err(Error::InvalidDimension(format!(
                    "record dim {} does not match requested dim {dim}",
                    r.setting.dim()
                )));
            }
        }
        Ok(StateProblem {
            projectors: records.iter().map(|r| r.setting.projector()).collect(),
            rows: records
                .iter()
                .map(|r| CountRow {
                    counts: r.counts as f64,
                    integration_s: r.setting.integration_s,
                })
                .collect(),
            accidental_hz,
        dim,
        })
    }

    /// Informational completeness: the projectors must span Herm(d).
    fn check_design_rank(&self) -> Result<()> {
        let basis = hermitian_basis(self.dim);
        let design = DMatrix::from_fn(self.projectors.len(), basis.len(), |k, alpha| {
            linalg::inner_re(&self.projectors[k], &basis[alpha])
        });
        let svd = design.svd(false, false);
        let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
        let rank = svd
            .singular_values
            .iter()
            .filter(|&&s| s > 1e-10 * max_sv.max(1.0))
            .count();
        if rank < basis.len() {
            return Err(Error::SingularDesign(format!(
                "settings span only {rank} of {} operator dimensions",
                basis.len()
            )));
        }
        Ok(())
    }

    fn born(&self, rho: &CMatrix) -> Vec<f64> {
        self.projectors
            .iter()
            .map(|p| linalg::inner_re(p, rho))
            .collect()
    }

    fn objective(&self, theta: &[f64]) -> f64 {
        let n = factor_param_count(self.dim);
        let rho = rho_from_factor(&unpack_factor(&theta[..n], self.dim));
        let born = self.born(&rho);
        log_likelihood(&self.rows, &born, theta[n].exp(), self.accidental_hz)
    }

    /// Objective and gradient in the packed (A, ln s) layout.
    fn eval(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let nf = factor_param_count(self.dim);
        let factor = unpack_factor(&theta[..nf], self.dim);
        let log_scale = theta[nf];

        let gram = &factor * factor.adjoint();
        let norm = linalg::trace_re(&gram).max(1e-300);
        let rho = &gram / C64::new(norm, 0.0);
        let born = self.born(&rho);
        let scale = log_scale.exp();
        let value = log_likelihood(&self.rows, &born, scale, self.accidental_hz);
        let (weights, scale_grad) =
            likelihood_weights(&self.rows, &born, scale, self.accidental_hz);

        // ∇_{A*} L = (G − c·𝟙) A / N with G = Σ w_k Π_k, c = Σ w_k q_k
        let mut g = CMatrix::zeros(self.dim, self.dim);
        let mut c = 0.0;
        for ((w, proj), q) in weights.iter().zip(&self.projectors).zip(&born) {
            g += proj * C64::new(*w, 0.0);
            c += w * q.max(0.0);
        }
        for i in 0..self.dim {
            g[(i, i)] -= C64::new(c, 0.0);
        }
        let grad_factor = (&g * &factor) / C64::new(norm, 0.0);

        let mut grad = pack_gradient(&grad_factor, self.dim);
        grad.push(scale_grad);
        (value, grad)
    }
}

fn rho_from_factor(factor: &CMatrix) -> CMatrix {
    let gram = factor * factor.adjoint();
    let norm = linalg::trace_re(&gram).max(1e-300);
    gram / C64::new(norm, 0.0)
}

/// Lower-triangular parameter layout: d real diagonal entries, then
/// (re, im) pairs for each sub-diagonal entry, row by row.
fn factor_param_count(dim: usize) -> usize {
    dim + dim * (dim - 1)
}

fn unpack_factor(theta: &[f64], dim: usize) -> CMatrix {
    let mut a = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        a[(i, i)] = C64::new(theta[i], 0.0);
    }
    let mut k = dim;
    for i in 1..dim {
        for j in 0..i {
            a[(i, j)] = C64::new(theta[k], theta[k + 1]);
            k += 2;
        }
    }
    a
}

fn pack_factor(a: &CMatrix, dim: usize) -> Vec<f64> {
    let mut theta = Vec::with_capacity(factor_param_count(dim));
    for i in 0..dim {
        theta.push(a[(i, i)].re);
    }
    for i in 1..dim {
        for j in 0..i {
            theta.push(a[(i, j)].re);
            theta.push(a[(i, j)].im);
        }
    }
    theta
}

/// Map the Wirtinger gradient ∇_{A*} onto the real layout: a real entry
/// gets 2·Re, a complex entry (2·Re, 2·Im).
fn pack_gradient(grad: &CMatrix, dim: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(factor_param_count(dim));
    for i in 0..dim {
        g.push(2.0 * grad[(i, i)].re);
    }
    for i in 1..dim {
        for j in 0..i {
            g.push(2.0 * grad[(i, j)].re);
            g.push(2.0 * grad[(i, j)].im);
        }
    }
    g
}

/// Physical full-rank starting point from a (possibly unphysical)
/// Hermitian estimate: clamp eigenvalues to a floor, renormalize, factor.
fn physical_factor(estimate: &CMatrix) -> Result<CMatrix> {
    let sys = hermitian_eigensystem(&linalg::hermitian_part(estimate))?;
    let dim = estimate.nrows();
    let floor = 1e-6;
    let clamped: Vec<f64> = sys.values.iter().map(|&v| v.max(floor)).collect();
    let total: f64 = clamped.iter().sum();
    let mut m = CMatrix::zeros(dim, dim);
    for (k, &v) in clamped.iter().enumerate() {
        let col = sys.vectors.column(k);
        m += (&col * col.adjoint()) * C64::new(v / total, 0.0);
    }
    let chol = nalgebra::Cholesky::new(m)
        .ok_or_else(|| Error::ContractViolation("clamped estimate is not factorizable".into()))?;
    Ok(chol.l())
}

/// Maximum-likelihood state reconstruction from coincidence records.
///
/// Needs an informationally complete setting set (≥ d² projectors spanning
/// the operator space). All-zero counts return the maximally mixed state
/// with a warning instead of failing.
pub fn mle_state_tomography(
    records: &[CoincidenceRecord],
    dim: usize,
    opts: &MleOptions,
) -> Result<TomographyResult<DensityMatrix>> {
    let problem = StateProblem::from_records(records, dim, opts.accidental_hz)?;
    problem.check_design_rank()?;

    let total: u64 = records.iter().map(|r| r.counts).sum();
    if total == 0 {
        return Ok(TomographyResult {
            estimate: DensityMatrix::maximally_mixed(dim)?,
            log_likelihood: 0.0,
            iterations: 0,
            warnings: vec!["all counts are zero; returning the maximally mixed state".into()],
            uncertainty: None,
        });
    }

    let init_estimate = match linear::linear_inversion_state(records) {
        Ok(m) => m,
        Err(_) => DensityMatrix::maximally_mixed(dim)?.matrix().clone(),
    };
    let factor0 = physical_factor(&init_estimate)?;
    let born0 = problem.born(&rho_from_factor(&factor0));
    let mut theta0 = pack_factor(&factor0, dim);
    theta0.push(initial_log_scale(&problem.rows, &born0));

    let mut outcome = gradient_ascent(|theta| problem.eval(theta), theta0, opts);
    debug_assert!(outcome.history.windows(2).all(|w| w[1] >= w[0]));

    if !outcome.converged && opts.simplex_fallback {
        let refined = nelder_mead(|theta| -problem.objective(theta), &outcome.theta, 0.01, 4_000);
        if -refined.value >= outcome.value {
            outcome.value = -refined.value;
            outcome.theta = refined.argmin;
            outcome.converged = refined.converged;
        }
    }

    let nf = factor_param_count(dim);
    let estimate = DensityMatrix::new(rho_from_factor(&unpack_factor(&outcome.theta[..nf], dim)))?;
    if !outcome.converged {
        return Err(Error::ConvergenceFailure {
            iterations: outcome.iterations,
            log_likelihood: outcome.value,
            best: Box::new(BestIterate::State(estimate)),
        });
    }
    Ok(TomographyResult {
        estimate,
        log_likelihood: outcome.value,
        iterations: outcome.iterations,
        warnings: Vec::new(),
        uncertainty: None,
    })
}

// ---------------------------------------------------------------------------
// process tomography
// ---------------------------------------------------------------------------

/// Hilbert-Schmidt projection machinery for the CPTP set.
pub(crate) struct CptpProjector {
    basis: Vec<CMatrix>,
    /// 4×16 matrix of the trace-preservation map in orthonormal coords.
    phi: DMatrix<f64>,
    /// φᵀ(φφᵀ)⁻¹, applied to the constraint residual.
    correction: DMatrix<f64>,
    target: DVector<f64>,
}

impl CptpProjector {
    pub(crate) fn new() -> Self {
        let basis = hermitian_basis(4);
        let sigma = paulis();
        let qubit_basis: Vec<CMatrix> = (0..4)
            .map(|c| sigma[c].clone() * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0))
            .collect();

        let mut phi = DMatrix::zeros(4, 16);
        for (alpha, e) in basis.iter().enumerate() {
            // Φ(E) = Σ_mn E_mn σ_n σ_m
            let mut mapped = CMatrix::zeros(2, 2);
            for m in 0..4 {
                for n in 0..4 {
                    mapped += (&sigma[n] * &sigma[m]) * e[(m, n)];
                }
            }
            for (c, f) in qubit_basis.iter().enumerate() {
                phi[(c, alpha)] = linalg::inner_re(f, &mapped);
            }
        }
        let gram = &phi * phi.transpose();
        let correction = phi.transpose()
            * gram
                .try_inverse()
                .expect("trace-preservation map has full row rank");
        let mut target = DVector::zeros(4);
        target[0] = std::f64::consts::SQRT_2; // ⟨σ₀/√2, 𝟙⟩
        CptpProjector {
            basis,
            phi,
            correction,
            target,
        }
    }

    fn coords(&self, chi: &CMatrix) -> DVector<f64> {
        DVector::from_iterator(16, self.basis.iter().map(|e| linalg::inner_re(e, chi)))
    }

    fn from_coords(&self, x: &DVector<f64>) -> CMatrix {
        let mut chi = CMatrix::zeros(4, 4);
        for (alpha, e) in self.basis.iter().enumerate() {
            chi += e * C64::new(x[alpha], 0.0);
        }
        chi
    }

    /// Orthogonal projection onto the trace-preserving affine subspace.
    pub(crate) fn project_tp(&self, chi: &CMatrix) -> CMatrix {
        let x = self.coords(chi);
        let residual = &self.phi * &x - &self.target;
        self.from_coords(&(x - &self.correction * residual))
    }

    fn project_psd(chi: &CMatrix) -> CMatrix {
        let sys = hermitian_eigensystem(&linalg::hermitian_part(chi))
            .expect("hermitian part is decomposable");
        let mut out = CMatrix::zeros(4, 4);
        for (k, &v) in sys.values.iter().enumerate() {
            if v > 0.0 {
                let col = sys.vectors.column(k);
                out += (&col * col.adjoint()) * C64::new(v, 0.0);
            }
        }
        out
    }

    /// Dykstra alternation onto {PSD} ∩ {TP}. The final step is the affine
    /// projection, so the trace-preservation residual of the result is at
    /// float precision; the PSD floor is driven below 1e-11.
    pub(crate) fn project(&self, chi: &CMatrix) -> CMatrix {
        let mut x = linalg::hermitian_part(chi);
        let mut correction = CMatrix::zeros(4, 4);
        for _ in 0..2_000 {
            let cone_input = &x + &correction;
            let cone_point = Self::project_psd(&cone_input);
            correction = cone_input - &cone_point;
            let next = self.project_tp(&cone_point);
            let delta = (&next - &x).norm();
            x = next;
            if delta < 1e-14 {
                let min_eig = hermitian_eigensystem(&x)
                    .map(|s| s.values.last().copied().unwrap_or(0.0))
                    .unwrap_or(f64::NEG_INFINITY);
                if min_eig > -1e-11 {
                    break;
                }
            }
        }
        x
    }
}

struct ProcessProblem {
    coefficients: Vec<CMatrix>,
    rows: Vec<CountRow>,
    accidental_hz: f64,
}

impl ProcessProblem {
    fn from_records(
        inputs: &[PureState],
        records_per_input: &[Vec<CoincidenceRecord>],
        accidental_hz: f64,
    ) -> Result<Self> {
        if inputs.len() != records_per_input.len() {
            return Err(Error::InvalidDimension(format!(
                "{} inputs but {} record sets",
                inputs.len(),
                records_per_input.len()
            )));
        }
        if inputs.is_empty() {
            return Err(Error::InsufficientData("no process inputs".into()));
        }
        let mut coefficients = Vec::new();
        let mut rows = Vec::new();
        for (input, records) in inputs.iter().zip(records_per_input) {
            if input.dim() != 2 {
                return Err(Error::InvalidDimension(
                    "process tomography inputs must be qubit states".into(),
                ));
            }
            for r in records {
                r.setting.validate()?;
                if r.setting.dim() != 2 {
                    return Err(Error::InvalidDimension(
                        "process tomography outputs must be single-qubit settings".into(),
                    ));
                }
                coefficients.push(chi_coefficients(input, &r.setting.projector()));
                rows.push(CountRow {
                    counts: r.counts as f64,
                    integration_s: r.setting.integration_s,
                });
            }
        }
        if rows.len() < 16 {
            return Err(Error::InsufficientData(format!(
                "process tomography needs at least 16 settings, got {}",
                rows.len()
            )));
        }
        Ok(ProcessProblem {
            coefficients,
            rows,
            accidental_hz,
        })
    }

    fn born(&self, chi: &CMatrix) -> Vec<f64> {
        self.coefficients
            .iter()
            .map(|coeff| {
                let mut acc = C64::new(0.0, 0.0);
                for m in 0..4 {
                    for n in 0..4 {
                        acc += chi[(m, n)] * coeff[(m, n)];
                    }
                }
                acc.re
            })
            .collect()
    }

    fn objective(&self, chi: &CMatrix, log_scale: f64) -> f64 {
        let born = self.born(chi);
        log_likelihood(&self.rows, &born, log_scale.exp(), self.accidental_hz)
    }

    /// Likelihood with its Hermitian χ-gradient and ln-scale gradient.
    fn gradient(&self, chi: &CMatrix, log_scale: f64) -> (f64, CMatrix, f64) {
        let born = self.born(chi);
        let scale = log_scale.exp();
        let value = log_likelihood(&self.rows, &born, scale, self.accidental_hz);
        let (weights, scale_grad) =
            likelihood_weights(&self.rows, &born, scale, self.accidental_hz);
        let mut accum = CMatrix::zeros(4, 4);
        for (w, coeff) in weights.iter().zip(&self.coefficients) {
            accum += coeff * C64::new(*w, 0.0);
        }
        // the HS gradient of tr-pairing data terms is the conjugate of the
        // accumulated coefficient matrix
        let grad = linalg::hermitian_part(&CMatrix::from_fn(4, 4, |m, n| accum[(m, n)].conj()));
        (value, grad, scale_grad)
    }
}

/// Maximum-likelihood process reconstruction.
///
/// `inputs` are the prepared states (the six-state over-complete set in
/// the experiments) and `records_per_input[i]` the output measurements for
/// input i. The estimate is CPTP by construction: positivity from the PSD
/// projection, trace preservation from the affine projection with residual
/// at float precision.
pub fn mle_process_tomography(
    inputs: &[PureState],
    records_per_input: &[Vec<CoincidenceRecord>],
    opts: &MleOptions,
) -> Result<TomographyResult<ProcessMatrix>> {
    let problem = ProcessProblem::from_records(inputs, records_per_input, opts.accidental_hz)?;
    let projector = CptpProjector::new();

    let total: u64 = records_per_input
        .iter()
        .flat_map(|records| records.iter().map(|r| r.counts))
        .sum();
    if total == 0 {
        return Ok(TomographyResult {
            estimate: crate::memory::storage_channel(0.0)?,
            log_likelihood: 0.0,
            iterations: 0,
            warnings: vec![
                "all counts are zero; returning the fully depolarizing channel".into(),
            ],
            uncertainty: None,
        });
    }

    let mut chi = match linear::linear_inversion_process(inputs, records_per_input) {
        Ok(raw) => projector.project(&raw),
        Err(_) => crate::memory::storage_channel(0.5)?.matrix().clone(),
    };
    let born0 = problem.born(&chi);
    let mut log_scale = initial_log_scale(&problem.rows, &born0);

    let (mut value, mut grad_chi, mut grad_scale) = problem.gradient(&chi, log_scale);
    let mut step = 1.0 / (1.0 + grad_chi.norm() + grad_scale.abs());
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..opts.max_iterations {
        iterations = iter + 1;
        let gnorm = (grad_chi.norm_squared() + grad_scale * grad_scale).sqrt();
        if gnorm < opts.gradient_tolerance {
            converged = true;
            break;
        }

        let mut alpha = step * 2.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand_chi = projector.project(&(&chi + &grad_chi * C64::new(alpha, 0.0)));
            let cand_scale = log_scale + alpha * grad_scale;
            let cand_value = problem.objective(&cand_chi, cand_scale);
            // Armijo condition on the realized (projected) displacement
            let displacement = linalg::inner_re(&grad_chi, &(&cand_chi - &chi))
                + grad_scale * (cand_scale - log_scale);
            if cand_value.is_finite()
                && displacement > 0.0
                && cand_value >= value + 1e-4 * displacement
            {
                accepted = Some((cand_chi, cand_scale, cand_value, alpha));
                break;
            }
            alpha *= 0.5;
        }

        let Some((new_chi, new_scale, new_value, used_alpha)) = accepted else {
            converged = true; // stationary at working precision
            break;
        };
        assert!(
            new_value >= value,
            "log-likelihood decreased within an accepted step: {new_value} < {value}"
        );
        let improvement = new_value - value;
        chi = new_chi;
        log_scale = new_scale;
        step = used_alpha;
        let (v, gc, gs) = problem.gradient(&chi, log_scale);
        value = v;
        grad_chi = gc;
        grad_scale = gs;
        if improvement < opts.likelihood_tolerance {
            converged = true;
            break;
        }
    }

    if !converged && opts.simplex_fallback {
        let mut x0: Vec<f64> = projector.coords(&chi).iter().cloned().collect();
        x0.push(log_scale);
        let refined = nelder_mead(
            |theta| {
                let x = DVector::from_iterator(16, theta[..16].iter().cloned());
                let candidate = projector.project(&projector.from_coords(&x));
                -problem.objective(&candidate, theta[16])
            },
            &x0,
            0.01,
            4_000,
        );
        if -refined.value >= value {
            let x = DVector::from_iterator(16, refined.argmin[..16].iter().cloned());
            chi = projector.project(&projector.from_coords(&x));
            value = -refined.value;
            converged = refined.converged;
        }
    }

    let estimate = ProcessMatrix::new(projector.project(&chi))?;
    if !converged {
        return Err(Error::ConvergenceFailure {
            iterations,
            log_likelihood: value,
            best: Box::new(BestIterate::Process(estimate)),
        });
    }
    Ok(TomographyResult {
        estimate,
        log_likelihood: value,
        iterations,
        warnings: Vec::new(),
        uncertainty: None,
    })
}

// ---------------------------------------------------------------------------
// derivative-free fallback
// ---------------------------------------------------------------------------

struct SimplexOutcome {
    argmin: Vec<f64>,
    value: f64,
    converged: bool,
}

/// Plain Nelder-Mead minimization.
fn nelder_mead<F>(f: F, x0: &[f64], spread: f64, max_iter: usize) -> SimplexOutcome
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if v[i].abs() > 1e-12 {
            spread * v[i].abs()
        } else {
            spread
        };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    let mut converged = false;
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap());
        let best = order[0];
        let worst = order[n];
        let second_worst = order[n - 1];

        if (values[worst] - values[best]).abs()
            < 1e-12 * (values[best].abs() + values[worst].abs() + 1e-12)
        {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|d| order[..n].iter().map(|&i| simplex[i][d]).sum::<f64>() / n as f64)
            .collect();

        let reflect: Vec<f64> = (0..n)
            .map(|d| centroid[d] + (centroid[d] - simplex[worst][d]))
            .collect();
        let f_reflect = f(&reflect);

        if f_reflect < values[best] {
            let expand: Vec<f64> = (0..n)
                .map(|d| centroid[d] + 2.0 * (centroid[d] - simplex[worst][d]))
                .collect();
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                values[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                values[worst] = f_reflect;
            }
        } else if f_reflect < values[second_worst] {
            simplex[worst] = reflect;
            values[worst] = f_reflect;
        } else {
            let contract: Vec<f64> = (0..n)
                .map(|d| centroid[d] + 0.5 * (simplex[worst][d] - centroid[d]))
                .collect();
            let f_contract = f(&contract);
            if f_contract < values[worst] {
                simplex[worst] = contract;
                values[worst] = f_contract;
            } else {
                let anchor = simplex[best].clone();
                for &i in &order[1..] {
                    let shrunk: Vec<f64> = (0..n)
                        .map(|d| anchor[d] + 0.5 * (simplex[i][d] - anchor[d]))
                        .collect();
                    values[i] = f(&shrunk);
                    simplex[i] = shrunk;
                }
            }
        }
    }
    let mut best_idx = 0;
    for i in 1..=n {
        if values[i] < values[best_idx] {
            best_idx = i;
        }
    }
    SimplexOutcome {
        argmin: simplex[best_idx].clone(),
        value: values[best_idx],
        converged,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::storage_channel;
    use crate::quantum::random::random_density_matrix;
    use crate::tomography::{
        expected_counts, CountSampler, MeasurementSetting, Polarization, RateModel,
    };
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn six_inputs() -> Vec<PureState> {
        Polarization::ALL.iter().map(|p| p.state()).collect()
    }

    fn noiseless_state_records(rho: &DensityMatrix, scale_hz: f64) -> Vec<CoincidenceRecord> {
        let rates = RateModel::new(scale_hz);
        let mut out = Vec::new();
        if rho.dim() == 2 {
            for pol in Polarization::ALL {
                let s = MeasurementSetting::single(pol, 0.0, 1.0);
                let n = expected_counts(rho, &s, &rates).unwrap().round() as u64;
                out.push(CoincidenceRecord::new(s, n));
            }
        } else {
            for sig in Polarization::ALL {
                for her in Polarization::ALL {
                    let s = MeasurementSetting::pair(sig, her, 0.0, 1.0);
                    let n = expected_counts(rho, &s, &rates).unwrap().round() as u64;
                    out.push(CoincidenceRecord::new(s, n));
                }
            }
        }
        out
    }

    #[test]
    fn state_gradient_matches_finite_differences() {
        let rho_true = crate::memory::werner_state(0.4).unwrap();
        let records = noiseless_state_records(&rho_true, 5_000.0);
        let problem = StateProblem::from_records(&records, 4, 0.0).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let start = random_density_matrix(4, &mut rng);
        let factor = physical_factor(start.matrix()).unwrap();
        let mut theta = pack_factor(&factor, 4);
        theta.push(7.3);

        let (_, grad) = problem.eval(&theta);
        let h = 1e-6;
        for k in 0..theta.len() {
            let mut plus = theta.clone();
            plus[k] += h;
            let mut minus = theta.clone();
            minus[k] -= h;
            let fd = (problem.objective(&plus) - problem.objective(&minus)) / (2.0 * h);
            assert!(
                (fd - grad[k]).abs() < 1e-3 * (1.0 + fd.abs()),
                "param {k}: fd {fd} vs analytic {}",
                grad[k]
            );
        }
    }

    #[test]
    fn process_gradient_matches_finite_differences() {
        let chi_true = storage_channel(0.5).unwrap();
        let records: Vec<Vec<CoincidenceRecord>> = six_inputs()
            .iter()
            .map(|input| {
                let out = crate::quantum::apply_chi(&chi_true, &input.density()).unwrap();
                noiseless_state_records(&out, 2_000.0)
            })
            .collect();
        let problem = ProcessProblem::from_records(&six_inputs(), &records, 0.0).unwrap();

        let chi = storage_channel(0.7).unwrap().matrix().clone();
        let log_scale = 7.0;
        let (_, grad_chi, grad_s) = problem.gradient(&chi, log_scale);

        let h = 1e-6;
        for e in hermitian_basis(4).iter() {
            let plus = &chi + e * C64::new(h, 0.0);
            let minus = &chi - e * C64::new(h, 0.0);
            let fd = (problem.objective(&plus, log_scale) - problem.objective(&minus, log_scale))
                / (2.0 * h);
            let analytic = linalg::inner_re(&grad_chi, e);
            assert!(
                (fd - analytic).abs() < 1e-3 * (1.0 + fd.abs()),
                "fd {fd} vs analytic {analytic}"
            );
        }
        let fd_s = (problem.objective(&chi, log_scale + h)
            - problem.objective(&chi, log_scale - h))
            / (2.0 * h);
        assert!((fd_s - grad_s).abs() < 1e-3 * (1.0 + fd_s.abs()));
    }

    #[test]
    fn cptp_projection_fixes_tp_and_psd() {
        let projector = CptpProjector::new();
        // start from something badly non-physical
        let mut chi = CMatrix::zeros(4, 4);
        chi[(0, 0)] = C64::new(1.4, 0.0);
        chi[(1, 1)] = C64::new(-0.3, 0.0);
        chi[(0, 3)] = C64::new(0.2, 0.1);
        chi[(3, 0)] = C64::new(0.2, -0.1);
        let projected = projector.project(&chi);
        assert!(crate::quantum::process::tp_residual(&projected) < 1e-10);
        let sys = hermitian_eigensystem(&projected).unwrap();
        assert!(*sys.values.last().unwrap() > -1e-10);
        // a CPTP point is a fixed point
        let chi_ok = storage_channel(0.3).unwrap().matrix().clone();
        let refixed = projector.project(&chi_ok);
        assert!((&refixed - &chi_ok).norm() < 1e-12);
    }

    #[test]
    fn state_mle_noiseless_single_qubit() {
        let truth = PureState::zero().density();
        let records = noiseless_state_records(&truth, 1e7);
        let result = mle_state_tomography(&records, 2, &MleOptions::default()).unwrap();
        let d = crate::analysis::trace_distance(result.estimate.matrix(), truth.matrix()).unwrap();
        assert!(d < 1e-6, "trace distance {d}");
    }

    #[test]
    fn state_mle_matches_linear_inversion_on_noiseless_data() {
        let truth = crate::memory::werner_state(0.416).unwrap();
        let records = noiseless_state_records(&truth, 1e9);
        let mle = mle_state_tomography(&records, 4, &MleOptions::default()).unwrap();
        let li = linear::linear_inversion_state(&records).unwrap();
        let d = crate::analysis::trace_distance(mle.estimate.matrix(), &li).unwrap();
        assert!(d < 1e-6, "trace distance {d}");
    }

    #[test]
    fn state_mle_high_count_bell_fidelity() {
        let truth = PureState::phi_plus().density();
        let records = noiseless_state_records(&truth, 1e6);
        let mut sampler = CountSampler::from_seed(31);
        let noisy: Vec<CoincidenceRecord> = records
            .iter()
            .map(|r| CoincidenceRecord::new(r.setting, sampler.sample(r.counts as f64).unwrap()))
            .collect();
        let result = mle_state_tomography(&noisy, 4, &MleOptions::default()).unwrap();
        let f = crate::analysis::state_fidelity(&result.estimate, &truth).unwrap();
        assert!(f > 0.999, "fidelity {f}");
    }

    #[test]
    fn state_mle_zero_counts_returns_mixed() {
        let records: Vec<CoincidenceRecord> = Polarization::ALL
            .iter()
            .map(|&p| CoincidenceRecord::new(MeasurementSetting::single(p, 0.0, 1.0), 0))
            .collect();
        let result = mle_state_tomography(&records, 2, &MleOptions::default()).unwrap();
        assert!(!result.warnings.is_empty());
        let mixed = DensityMatrix::maximally_mixed(2).unwrap();
        assert!((result.estimate.matrix() - mixed.matrix()).norm() < 1e-12);
    }

    #[test]
    fn state_mle_rejects_rank_deficient_design() {
        // only the Z basis, repeated: spans 2 of 4 operator dimensions
        let mut records = Vec::new();
        for _ in 0..2 {
            for pol in [Polarization::H, Polarization::V] {
                records.push(CoincidenceRecord::new(
                    MeasurementSetting::single(pol, 0.0, 1.0),
                    50,
                ));
            }
        }
        assert!(matches!(
            mle_state_tomography(&records, 2, &MleOptions::default()),
            Err(Error::SingularDesign(_))
        ));
    }

    #[test]
    fn process_mle_noiseless_identity() {
        let chi = ProcessMatrix::identity();
        let records: Vec<Vec<CoincidenceRecord>> = six_inputs()
            .iter()
            .map(|input| noiseless_state_records(&input.density(), 1e7))
            .collect();
        let result =
            mle_process_tomography(&six_inputs(), &records, &MleOptions::default()).unwrap();
        let d = crate::analysis::trace_distance(result.estimate.matrix(), chi.matrix()).unwrap();
        assert!(d < 1e-6, "trace distance {d}");
    }

    #[test]
    fn process_mle_reconstructs_storage_channel() {
        let chi_true = storage_channel(0.5961).unwrap();
        let records: Vec<Vec<CoincidenceRecord>> = six_inputs()
            .iter()
            .map(|input| {
                let out = crate::quantum::apply_chi(&chi_true, &input.density()).unwrap();
                noiseless_state_records(&out, 1e6)
            })
            .collect();
        let result =
            mle_process_tomography(&six_inputs(), &records, &MleOptions::default()).unwrap();
        for k in 0..4 {
            let expect = if k == 0 { 0.697 } else { 0.101 };
            assert_abs_diff_eq!(result.estimate.entry(k, k).re, expect, epsilon = 1e-3);
        }
    }

    #[test]
    fn nelder_mead_minimizes_quadratic() {
        let f = |x: &[f64]| (x[0] - 1.5).powi(2) + 3.0 * (x[1] + 0.5).powi(2) + 2.0;
        let outcome = nelder_mead(f, &[0.0, 0.0], 0.5, 2_000);
        assert!(outcome.converged);
        assert_abs_diff_eq!(outcome.argmin[0], 1.5, epsilon = 1e-5);
        assert_abs_diff_eq!(outcome.argmin[1], -0.5, epsilon = 1e-5);
        assert_abs_diff_eq!(outcome.value, 2.0, epsilon = 1e-9);
    }

    #[test]
    fn simplex_fallback_rescues_capped_ascent() {
        // strangle the gradient path with a tiny iteration cap; either the
        // simplex rescues the fit or the failure carries a usable iterate
        let truth = PureState::plus().density();
        let records = noiseless_state_records(&truth, 1e5);
        let opts = MleOptions {
            max_iterations: 1,
            simplex_fallback: true,
            ..MleOptions::default()
        };
        match mle_state_tomography(&records, 2, &opts) {
            Ok(result) => {
                let f = crate::analysis::state_fidelity(&result.estimate, &truth).unwrap();
                assert!(f > 0.99, "fidelity {f}");
            }
            Err(Error::ConvergenceFailure { best, .. }) => match *best {
                BestIterate::State(rho) => {
                    let f = crate::analysis::state_fidelity(&rho, &truth).unwrap();
                    assert!(f > 0.9, "fidelity {f}");
                }
                _ => panic!("state failure must carry a state"),
            },
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn likelihood_history_is_monotone() {
        let truth = crate::memory::werner_state(0.5).unwrap();
        let records = noiseless_state_records(&truth, 3_000.0);
        let mut sampler = CountSampler::from_seed(17);
        let noisy: Vec<CoincidenceRecord> = records
            .iter()
            .map(|r| CoincidenceRecord::new(r.setting, sampler.sample(r.counts as f64).unwrap()))
            .collect();

        let problem = StateProblem::from_records(&noisy, 4, 0.0).unwrap();
        let init = linear::linear_inversion_state(&noisy).unwrap();
        let factor0 = physical_factor(&init).unwrap();
        let born0 = problem.born(&rho_from_factor(&factor0));
        let mut theta0 = pack_factor(&factor0, 4);
        theta0.push(initial_log_scale(&problem.rows, &born0));

        let outcome = gradient_ascent(|theta| problem.eval(theta), theta0, &MleOptions::default());
        assert!(outcome.converged);
        assert!(outcome.history.len() > 1);
        for w in outcome.history.windows(2) {
            assert!(w[1] >= w[0], "log-likelihood decreased: {} -> {}", w[0], w[1]);
        }
    }
}
