//! Weighted nonlinear least squares for the retrieval-rate decay.
//!
//! The retrieval rate follows a + b e^{−τ/τ_m}. The fit is Gauss-Newton
//! with Levenberg damping, multi-started over a logarithmic τ_m grid so the
//! result does not depend on initialization. Weights default to
//! inverse-variance Poisson weights w = 1/max(y, 1).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One rate sample entering the decay fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayPoint {
    pub tau_ps: f64,
    pub rate_hz: f64,
    pub weight: f64,
}

impl DecayPoint {
    /// Poisson counting weight 1/max(y, 1).
    pub fn poisson_weighted(tau_ps: f64, rate_hz: f64) -> Self {
        DecayPoint {
            tau_ps,
            rate_hz,
            weight: 1.0 / rate_hz.max(1.0),
        }
    }
}

/// Result of fitting a + b e^{−τ/τ_m}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    /// Constant floor, Hz.
    pub a: f64,
    /// Decay amplitude, Hz.
    pub b: f64,
    /// Lifetime, ps.
    pub tau_m_ps: f64,
    /// √(Σ w r²) at the optimum.
    pub residual_norm: f64,
    /// Covariance of (a, b, τ_m) from (JᵀWJ)⁻¹.
    pub covariance: [[f64; 3]; 3],
    /// False when the amplitude is consistent with zero and τ_m is
    /// therefore meaningless.
    pub tau_m_identifiable: bool,
}

/// Multi-start grid for τ_m: 20 logarithmic points over [0.1, 100] ps.
fn tau_m_grid() -> Vec<f64> {
    let (lo, hi, n) = (0.1f64, 100.0f64, 20);
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Weighted linear solve for (a, b) at fixed τ_m.
fn linear_ab(points: &[DecayPoint], tau_m: f64) -> (f64, f64) {
    let (mut s_w, mut s_we, mut s_wee, mut s_wy, mut s_wye) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for p in points {
        let e = (-p.tau_ps / tau_m).exp();
        s_w += p.weight;
        s_we += p.weight * e;
        s_wee += p.weight * e * e;
        s_wy += p.weight * p.rate_hz;
        s_wye += p.weight * p.rate_hz * e;
    }
    let det = s_w * s_wee - s_we * s_we;
    if det.abs() < 1e-300 {
        return (s_wy / s_w.max(1e-300), 0.0);
    }
    let a = (s_wy * s_wee - s_wye * s_we) / det;
    let b = (s_wye * s_w - s_wy * s_we) / det;
    (a, b)
}

struct LmOutcome {
    theta: Vec<f64>,
    ssr: f64,
    converged: bool,
}

/// Levenberg-Marquardt on weighted residuals. `eval` returns (r, J) with
/// r_k = √w_k (y_k − model_k) and J = ∂r/∂θ. `accept` rejects parameter
/// vectors outside the model domain (e.g. τ_m ≤ 0).
fn levenberg_marquardt<E, A>(eval: E, accept: A, theta0: &[f64], max_iter: usize) -> LmOutcome
where
    E: Fn(&[f64]) -> (DVector<f64>, DMatrix<f64>),
    A: Fn(&[f64]) -> bool,
{
    let mut theta = theta0.to_vec();
    let (mut r, mut jac) = eval(&theta);
    let mut ssr = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;

    for _ in 0..max_iter {
        let jt = jac.transpose();
        let mut normal = &jt * &jac;
        let grad = &jt * &r;
        for i in 0..normal.nrows() {
            normal[(i, i)] *= 1.0 + lambda;
            // keep the damped system solvable when a column of J vanishes
            if normal[(i, i)] == 0.0 {
                normal[(i, i)] = lambda.max(1e-12);
            }
        }
        let Some(delta) = normal.lu().solve(&grad) else {
            lambda = (lambda * 10.0).min(1e12);
            continue;
        };
        let candidate: Vec<f64> = theta.iter().zip(delta.iter()).map(|(t, d)| t - d).collect();
        if !accept(&candidate) {
            lambda = (lambda * 10.0).min(1e12);
            if lambda >= 1e12 {
                break;
            }
            continue;
        }
        let (r_new, j_new) = eval(&candidate);
        let ssr_new = r_new.norm_squared();
        if ssr_new <= ssr {
            let improvement = ssr - ssr_new;
            theta = candidate;
            r = r_new;
            jac = j_new;
            ssr = ssr_new;
            lambda = (lambda * 0.3).max(1e-12);
            if improvement < 1e-14 * ssr.max(1.0) && delta.norm() < 1e-10 {
                converged = true;
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 {
                converged = true; // damped to a standstill: local optimum
                break;
            }
        }
    }
    LmOutcome { theta, ssr, converged }
}

fn decay_residuals(points: &[DecayPoint], theta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let (a, b, tau_m) = (theta[0], theta[1], theta[2]);
    let n = points.len();
    let mut r = DVector::zeros(n);
    let mut j = DMatrix::zeros(n, 3);
    for (k, p) in points.iter().enumerate() {
        let sw = p.weight.sqrt();
        let e = (-p.tau_ps / tau_m).exp();
        r[k] = sw * (p.rate_hz - a - b * e);
        j[(k, 0)] = -sw;
        j[(k, 1)] = -sw * e;
        j[(k, 2)] = -sw * b * e * p.tau_ps / (tau_m * tau_m);
    }
    (r, j)
}

/// Fit a + b e^{−τ/τ_m} to weighted rate data.
///
/// Needs at least 3 points. Each grid start is refined with LM and the
/// lowest-residual solution wins; the covariance comes from (JᵀWJ)⁻¹ at
/// the optimum.
pub fn fit_exponential(points: &[DecayPoint]) -> Result<DecayFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "decay fit needs at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| p.weight <= 0.0 || !p.weight.is_finite()) {
        return Err(Error::Domain("weights must be positive and finite".into()));
    }

    let accept = |theta: &[f64]| theta[2] > 1e-6 && theta[2] < 1e6;
    let mut best: Option<LmOutcome> = None;
    for tau_m in tau_m_grid() {
        let (a, b) = linear_ab(points, tau_m);
        let outcome = levenberg_marquardt(
            |theta| decay_residuals(points, theta),
            accept,
            &[a, b, tau_m],
            200,
        );
        if best.as_ref().map_or(true, |c| outcome.ssr < c.ssr) {
            best = Some(outcome);
        }
    }
    let best = best.expect("grid is non-empty");
    if !best.converged && best.ssr.is_nan() {
        return Err(Error::ConvergenceFailure {
            iterations: 200,
            log_likelihood: -best.ssr,
            best: Box::new(crate::tomography::BestIterate::None),
        });
    }

    let theta = best.theta;
    let (_, jac) = decay_residuals(points, &theta);
    let normal = jac.transpose() * &jac;
    let covariance = match normal.try_inverse() {
        Some(inv) => {
            let mut c = [[0.0; 3]; 3];
            for i in 0..3 {
                for j in 0..3 {
                    c[i][j] = inv[(i, j)];
                }
            }
            c
        }
        None => [[f64::INFINITY; 3]; 3],
    };

    let scale = points.iter().map(|p| p.rate_hz.abs()).fold(0.0, f64::max);
    let sigma_tau = covariance[2][2].abs().sqrt();
    let tau_m_identifiable = theta[1].abs() > 1e-8 * scale.max(1.0)
        && sigma_tau.is_finite()
        && sigma_tau < 10.0 * theta[2].abs();

    Ok(DecayFit {
        a: theta[0],
        b: theta[1],
        tau_m_ps: theta[2],
        residual_norm: best.ssr.sqrt(),
        covariance,
        tau_m_identifiable,
    })
}

/// How the memory rates (S₀, N_c, N₀, τ_m) were extracted from data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RateFitMode {
    /// Noise curve fitted first, then the signal curve; rates extracted
    /// from the two independent fits.
    Sequential,
    /// One simultaneous fit of both curves sharing τ_m.
    Joint,
}

/// Memory rates extracted from signal-present and noise-only rate curves.
///
/// Detected models: signal curve = N_c/2 + (S₀ + N₀/2) e^{−τ/τ_m},
/// noise curve = N_c/2 + (N₀/2) e^{−τ/τ_m}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemoryRateFit {
    pub s0_hz: f64,
    pub nc_hz: f64,
    pub n0_hz: f64,
    pub tau_m_ps: f64,
    pub mode: RateFitMode,
    pub residual_norm: f64,
}

/// Extract (S₀, N_c, N₀, τ_m) from a signal curve and a noise curve.
pub fn fit_memory_rates(
    signal: &[DecayPoint],
    noise: &[DecayPoint],
    mode: RateFitMode,
) -> Result<MemoryRateFit> {
    match mode {
        RateFitMode::Sequential => {
            let noise_fit = fit_exponential(noise)?;
            let signal_fit = fit_exponential(signal)?;
            let n0 = 2.0 * noise_fit.b;
            Ok(MemoryRateFit {
                s0_hz: signal_fit.b - n0 / 2.0,
                nc_hz: 2.0 * noise_fit.a,
                n0_hz: n0,
                tau_m_ps: signal_fit.tau_m_ps,
                mode,
                residual_norm: (signal_fit.residual_norm.powi(2)
                    + noise_fit.residual_norm.powi(2))
                .sqrt(),
            })
        }
        RateFitMode::Joint => {
            if signal.len() + noise.len() < 5 {
                return Err(Error::InsufficientData(
                    "joint rate fit needs at least 5 points across both curves".into(),
                ));
            }
            // θ = (S0, Nc, N0, τ_m)
            let eval = |theta: &[f64]| {
                let (s0, nc, n0, tau_m) = (theta[0], theta[1], theta[2], theta[3]);
                let n = signal.len() + noise.len();
                let mut r = DVector::zeros(n);
                let mut j = DMatrix::zeros(n, 4);
                for (k, p) in signal.iter().chain(noise.iter()).enumerate() {
                    let is_signal = k < signal.len();
                    let sw = p.weight.sqrt();
                    let e = (-p.tau_ps / tau_m).exp();
                    let amp = if is_signal { s0 + n0 / 2.0 } else { n0 / 2.0 };
                    r[k] = sw * (p.rate_hz - nc / 2.0 - amp * e);
                    j[(k, 0)] = if is_signal { -sw * e } else { 0.0 };
                    j[(k, 1)] = -sw / 2.0;
                    j[(k, 2)] = -sw * e / 2.0;
                    j[(k, 3)] = -sw * amp * e * p.tau_ps / (tau_m * tau_m);
                }
                (r, j)
            };
            let accept = |theta: &[f64]| theta[3] > 1e-6 && theta[3] < 1e6;

            let mut best: Option<LmOutcome> = None;
            for tau_m in tau_m_grid() {
                let (a_n, b_n) = linear_ab(noise, tau_m);
                let (_a_s, b_s) = linear_ab(signal, tau_m);
                let init = [b_s - b_n, 2.0 * a_n, 2.0 * b_n, tau_m];
                let outcome = levenberg_marquardt(eval, accept, &init, 200);
                if best.as_ref().map_or(true, |c| outcome.ssr < c.ssr) {
                    best = Some(outcome);
                }
            }
            let best = best.expect("grid is non-empty");
            Ok(MemoryRateFit {
                s0_hz: best.theta[0],
                nc_hz: best.theta[1],
                n0_hz: best.theta[2],
                tau_m_ps: best.theta[3],
                mode,
                residual_norm: best.ssr.sqrt(),
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn synthetic(a: f64, b: f64, tau_m: f64, taus: &[f64]) -> Vec<DecayPoint> {
        taus.iter()
            .map(|&t| DecayPoint::poisson_weighted(t, a + b * (-t / tau_m).exp()))
            .collect()
    }

    fn default_grid() -> Vec<f64> {
        (0..=16).map(|k| 0.5 * k as f64).collect()
    }

    #[test]
    fn noiseless_round_trip_recovers_parameters() {
        let points = synthetic(2.1, 6.43, 3.5, &default_grid());
        let fit = fit_exponential(&points).unwrap();
        assert_abs_diff_eq!(fit.a, 2.1, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.b, 6.43, epsilon = 1e-6);
        assert_abs_diff_eq!(fit.tau_m_ps, 3.5, epsilon = 1e-6);
        assert!(fit.tau_m_identifiable);
        assert!(fit.residual_norm < 1e-8);
    }

    #[test]
    fn recovery_is_initialization_independent() {
        // steep and shallow lifetimes both land on the generating values
        for tau_m in [0.4, 2.0, 30.0] {
            let points = synthetic(1.0, 5.0, tau_m, &default_grid());
            let fit = fit_exponential(&points).unwrap();
            assert_abs_diff_eq!(fit.tau_m_ps, tau_m, epsilon = 1e-5 * tau_m);
        }
    }

    #[test]
    fn constant_data_flags_lifetime_unidentifiable() {
        let points: Vec<DecayPoint> = default_grid()
            .iter()
            .map(|&t| DecayPoint::poisson_weighted(t, 4.2))
            .collect();
        let fit = fit_exponential(&points).unwrap();
        assert!(fit.b.abs() < 1e-6);
        assert!(!fit.tau_m_identifiable);
    }

    #[test]
    fn too_few_points_is_an_error() {
        let points = synthetic(1.0, 2.0, 3.0, &[0.0, 1.0]);
        assert!(matches!(
            fit_exponential(&points),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn bad_weights_are_rejected() {
        let mut points = synthetic(1.0, 2.0, 3.0, &default_grid());
        points[0].weight = 0.0;
        assert!(matches!(fit_exponential(&points), Err(Error::Domain(_))));
    }

    #[test]
    fn joint_fit_recovers_memory_rates() {
        let params = crate::memory::MemoryParams::qubit_storage();
        let signal: Vec<DecayPoint> = default_grid()
            .iter()
            .map(|&t| {
                DecayPoint::poisson_weighted(
                    t,
                    crate::memory::detected_rate(&params, t, true).unwrap(),
                )
            })
            .collect();
        let noise: Vec<DecayPoint> = default_grid()
            .iter()
            .map(|&t| {
                DecayPoint::poisson_weighted(
                    t,
                    crate::memory::detected_rate(&params, t, false).unwrap(),
                )
            })
            .collect();
        for mode in [RateFitMode::Sequential, RateFitMode::Joint] {
            let fit = fit_memory_rates(&signal, &noise, mode).unwrap();
            assert_abs_diff_eq!(fit.s0_hz, 6.2, epsilon = 1e-5);
            assert_abs_diff_eq!(fit.nc_hz, 3.737, epsilon = 1e-5);
            assert_abs_diff_eq!(fit.n0_hz, 0.464, epsilon = 1e-5);
            assert_abs_diff_eq!(fit.tau_m_ps, 3.5, epsilon = 1e-5);
        }
    }
}
