//! Continuous sliding-mode fault-tolerant tracking law.
//!
//! The law works entirely on estimated quantities: `ŝ` from the observer
//! output, feedforward from the inertia model `Ĵ`, and a robust term whose
//! magnitude `a1(‖q̂_e‖ + γ) + a0` covers the lumped uncertainty. The
//! resulting virtual torque is distributed over the actuators with the
//! fault-weighted pseudo-inverse and then saturated.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actuation::{saturate, ActuationError, ActuatorBank};
use crate::bounds::UncertaintyBudget;
use crate::dynamics::{error_coordinates, psi_terms, DesiredState, InertiaMatrix, TrackingError};
use crate::estimation::ObserverOutput;
use crate::so3::{Mat3, UnitQuaternion, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GainError {
    #[error("sliding gain k must be positive, got {0}")]
    NonPositiveK(f64),
    #[error("boundary layer width must be positive, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("margin gamma must be positive, got {0}")]
    NonPositiveGamma(f64),
    #[error("feedback gain matrix is not symmetric positive definite")]
    FeedbackNotSpd,
}

/// `k` is the sliding gain in `s = ω_e + k q_e`; `k_matrix` the feedback
/// gain on `ŝ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerGains {
    pub k: f64,
    pub k_matrix: Mat3,
    pub epsilon: f64,
    pub gamma: f64,
}

impl ControllerGains {
    pub fn new(k: f64, k_matrix: Mat3, epsilon: f64, gamma: f64) -> Result<Self, GainError> {
        let g = Self {
            k,
            k_matrix,
            epsilon,
            gamma,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GainError> {
        if !(self.k > 0.0) {
            return Err(GainError::NonPositiveK(self.k));
        }
        if !(self.epsilon > 0.0) {
            return Err(GainError::NonPositiveEpsilon(self.epsilon));
        }
        if !(self.gamma > 0.0) {
            return Err(GainError::NonPositiveGamma(self.gamma));
        }
        if !self.k_matrix.is_finite()
            || !self.k_matrix.is_symmetric(1e-12)
            || self.k_matrix.symmetric_eigenvalues()[0] <= 0.0
        {
            return Err(GainError::FeedbackNotSpd);
        }
        Ok(())
    }

    /// `(λ_min(K), λ_max(K))`
    pub fn feedback_eigen_bounds(&self) -> (f64, f64) {
        let ev = self.k_matrix.symmetric_eigenvalues();
        (ev[0], ev[2])
    }
}

/// Model inertia and disturbance estimate available to the controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelEstimates {
    pub j_hat: InertiaMatrix,
    pub tau_d_hat: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobustCoefficients {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

/// Upper-bound coefficients of the lumped uncertainty.
///
/// ```text
/// a3 = ½k(ρ0‖Ĵ‖ + ρ_J)
/// a2 = ½k²ρ_J
/// a1 = k²ρ0‖Ĵ‖ + k a3 + 3kρ_v(ρ_J + 2ρ_q‖Ĵ‖)
/// a0 = ½k²ρ0²‖Ĵ‖ + ½k(ρ_w + 2ρ_qρ_v)‖Ĵ‖ + 3kρ_vρ0‖Ĵ‖ + 4ρ_qρ_v²‖Ĵ‖
///      + 2ρ_qρ_a‖Ĵ‖ + ρ_Jρ_v² + ρ_Jρ_a + ρ_d
/// ```
pub fn robust_coefficients(budget: &UncertaintyBudget, k: f64) -> RobustCoefficients {
    let b = budget;
    let nj = b.j_hat_norm;
    let r0 = b.rho_0();
    let a3 = 0.5 * k * (r0 * nj + b.rho_j);
    let a2 = 0.5 * k * k * b.rho_j;
    let a1 = k * k * r0 * nj + k * a3 + 3.0 * k * b.rho_v * (b.rho_j + 2.0 * b.rho_q * nj);
    let a0 = 0.5 * k * k * r0 * r0 * nj
        + 0.5 * k * (b.rho_w + 2.0 * b.rho_q * b.rho_v) * nj
        + 3.0 * k * b.rho_v * r0 * nj
        + 4.0 * b.rho_q * b.rho_v * b.rho_v * nj
        + 2.0 * b.rho_q * b.rho_a * nj
        + b.rho_j * b.rho_v * b.rho_v
        + b.rho_j * b.rho_a
        + b.rho_d;
    RobustCoefficients { a0, a1, a2, a3 }
}

/// Error coordinates built from the observer output instead of the truth.
pub fn estimated_errors(obs: &ObserverOutput, desired: &DesiredState, k: f64) -> TrackingError {
    error_coordinates(&obs.q_hat, obs.omega_hat, desired, k)
}

/// `(ψ̂, ψ̂_d)`: the feedforward terms evaluated with `Ĵ` and hatted errors.
pub fn feedforward_terms(
    est: &ModelEstimates,
    hat_err: &TrackingError,
    desired: &DesiredState,
    k: f64,
) -> (Vec3, Vec3) {
    psi_terms(est.j_hat.matrix(), hat_err, desired, k)
}

/// Boundary-layer robust term.
///
/// With `m = a1(‖q̂_e‖ + γ) + a0`, returns `-m ŝ/‖ŝ‖` outside the layer
/// `‖ŝ‖ ≥ ε` and `-m ŝ/ε` inside.
pub fn robust_term(
    s_hat: Vec3,
    q_hat_e: &UnitQuaternion,
    coeffs: &RobustCoefficients,
    gamma: f64,
    epsilon: f64,
) -> Vec3 {
    let magnitude = coeffs.a1 * (q_hat_e.vector().norm() + gamma) + coeffs.a0;
    let n = s_hat.norm();
    let scale = if n >= epsilon { n } else { epsilon };
    s_hat * (-magnitude / scale)
}

/// `u = -K ŝ + u_s + ψ̂_d - ψ̂ - τ̂_d`
pub fn virtual_control(
    s_hat: Vec3,
    k_matrix: &Mat3,
    u_s: Vec3,
    psi_hat: Vec3,
    psi_hat_d: Vec3,
    tau_d_hat: Vec3,
) -> Vec3 {
    -(*k_matrix * s_hat) + u_s + psi_hat_d - psi_hat - tau_d_hat
}

/// Outcome of the stability conditions on the gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub lambda_min_k: f64,
    pub lambda_max_k: f64,
    /// `a3 + ρ_E(k‖Ĵ‖/2 + λ_max(K))`
    pub threshold: f64,
    /// `λ_min(K) - threshold`
    pub feedback_margin: f64,
    /// `ρ_w + 2ρ_qρ_v + kρ0`
    pub rho_s: f64,
    /// `ε - ρ_s`
    pub boundary_margin: f64,
    pub feedback_ok: bool,
    pub boundary_ok: bool,
}

impl GainReport {
    pub fn passed(&self) -> bool {
        self.feedback_ok && self.boundary_ok
    }
}

pub fn check_gain_conditions(
    gains: &ControllerGains,
    coeffs: &RobustCoefficients,
    budget: &UncertaintyBudget,
) -> GainReport {
    let (lambda_min_k, lambda_max_k) = gains.feedback_eigen_bounds();
    let threshold = coeffs.a3 + budget.rho_e * (0.5 * gains.k * budget.j_hat_norm + lambda_max_k);
    let rho_s = budget.rho_s(gains.k);
    GainReport {
        lambda_min_k,
        lambda_max_k,
        threshold,
        feedback_margin: lambda_min_k - threshold,
        rho_s,
        boundary_margin: gains.epsilon - rho_s,
        feedback_ok: lambda_min_k > threshold,
        boundary_ok: gains.epsilon > rho_s,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControlDiagnostics {
    pub s_hat: Vec3,
    pub q_hat_e: UnitQuaternion,
    pub u_s: Vec3,
    /// `‖ŝ‖ < ε`
    pub inside_boundary: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlOutput {
    /// Saturated per-actuator commands.
    pub tau_u: Vec<f64>,
    pub u: Vec3,
    pub diagnostics: ControlDiagnostics,
}

/// Everything the law needs that stays fixed over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Controller {
    pub gains: ControllerGains,
    pub estimates: ModelEstimates,
    pub coeffs: RobustCoefficients,
    pub bank: ActuatorBank,
}

impl Controller {
    /// One evaluation of the full pipeline given the current health estimate.
    pub fn step(
        &self,
        obs: &ObserverOutput,
        desired: &DesiredState,
        e_hat: &[f64],
    ) -> Result<ControlOutput, ActuationError> {
        control_step(
            obs,
            desired,
            &self.gains,
            &self.estimates,
            &self.coeffs,
            &self.bank,
            e_hat,
        )
    }
}

pub fn control_step(
    obs: &ObserverOutput,
    desired: &DesiredState,
    gains: &ControllerGains,
    est: &ModelEstimates,
    coeffs: &RobustCoefficients,
    bank: &ActuatorBank,
    e_hat: &[f64],
) -> Result<ControlOutput, ActuationError> {
    let hat = estimated_errors(obs, desired, gains.k);
    let (psi_hat, psi_hat_d) = feedforward_terms(est, &hat, desired, gains.k);
    let u_s = robust_term(hat.s, &hat.qe, coeffs, gains.gamma, gains.epsilon);
    let u = virtual_control(
        hat.s,
        &gains.k_matrix,
        u_s,
        psi_hat,
        psi_hat_d,
        est.tau_d_hat,
    );
    let raw = bank.allocate(e_hat, u)?;
    Ok(ControlOutput {
        tau_u: saturate(&raw, bank.tau_max()),
        u,
        diagnostics: ControlDiagnostics {
            s_hat: hat.s,
            q_hat_e: hat.qe,
            u_s,
            inside_boundary: hat.s.norm() < gains.epsilon,
        },
    })
}

/// Lumped uncertainty excluding actuator faults,
/// `τ_r = ψ - ψ̂ + ψ̂_d - ψ_d + τ_d - τ̂_d`. Needs the truth, so it is an
/// offline diagnostic only.
pub fn lumped_uncertainty(
    j: &InertiaMatrix,
    est: &ModelEstimates,
    err: &TrackingError,
    hat_err: &TrackingError,
    desired: &DesiredState,
    k: f64,
    tau_d: Vec3,
) -> Vec3 {
    let (psi, psi_d) = psi_terms(j.matrix(), err, desired, k);
    let (psi_hat, psi_hat_d) = feedforward_terms(est, hat_err, desired, k);
    psi - psi_hat + psi_hat_d - psi_d + tau_d - est.tau_d_hat
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::tracking_errors;
    use crate::so3::error_matrices;
    use approx::assert_abs_diff_eq;

    fn reference_budget(rho_e: f64) -> UncertaintyBudget {
        UncertaintyBudget {
            rho_q: 2.15e-5,
            rho_w: 1.56e-5,
            rho_j: 0.5,
            rho_d: 3e-6,
            rho_d_hat: 3e-6,
            lambda_l: 6.0,
            lambda_r: 8.5,
            rho_v: 0.0022,
            rho_a: 2.2e-6,
            rho_e,
            j_hat_norm: 8.0,
        }
    }

    fn reference_gains(kk: f64) -> ControllerGains {
        ControllerGains::new(0.2, Mat3::identity() * kk, 0.01, 0.01).unwrap()
    }

    fn sample_desired() -> DesiredState {
        DesiredState {
            qd: UnitQuaternion::from_axis_angle(Vec3::new(0.2, 1.0, -0.4), 0.9),
            omega_d: Vec3::new(0.002, 0.001, -0.0015),
            omega_d_dot: Vec3::new(1e-6, -2e-6, 5e-7),
        }
    }

    #[test]
    fn gains_validation() {
        assert!(ControllerGains::new(0.0, Mat3::identity(), 0.01, 0.01).is_err());
        assert!(ControllerGains::new(0.2, Mat3::identity(), 0.0, 0.01).is_err());
        assert!(ControllerGains::new(0.2, Mat3::identity(), 0.01, -1.0).is_err());
        assert_eq!(
            ControllerGains::new(0.2, Mat3::diag(1.0, -1.0, 1.0), 0.01, 0.01),
            Err(GainError::FeedbackNotSpd)
        );
    }

    #[test]
    fn coefficients_direct_evaluation() {
        let c = robust_coefficients(&reference_budget(0.08), 0.2);
        // a3 = 0.1·(2.15e-5·8 + 0.5); a2 = 0.02·0.5
        assert_abs_diff_eq!(c.a3, 0.1 * (2.15e-5 * 8.0 + 0.5), epsilon = 1e-9);
        assert_abs_diff_eq!(c.a3, 0.05002, epsilon = 1e-5);
        assert_abs_diff_eq!(c.a2, 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(c.a1, 0.010670774080, epsilon = 1e-12);
        assert_abs_diff_eq!(c.a0, 1.930688068e-5, epsilon = 1e-14);
    }

    #[test]
    fn zero_budget_zero_coefficients() {
        let b = UncertaintyBudget {
            lambda_l: 1.0,
            lambda_r: 1.0,
            j_hat_norm: 8.0,
            ..UncertaintyBudget::ZERO
        };
        assert_eq!(robust_coefficients(&b, 0.2), RobustCoefficients::default());
    }

    #[test]
    fn perfect_estimates_match_truth() {
        let d = sample_desired();
        let state = crate::dynamics::SpacecraftState {
            q: UnitQuaternion::from_axis_angle(Vec3::new(1.0, 0.0, 1.0), 0.4),
            omega: Vec3::new(0.01, -0.02, 0.005),
        };
        let obs = ObserverOutput {
            q_hat: state.q,
            omega_hat: state.omega,
        };
        assert_eq!(
            estimated_errors(&obs, &d, 0.2),
            tracking_errors(&state, &d, 0.2)
        );
    }

    #[test]
    fn sliding_estimate_decomposition() {
        // ŝ - s = ω̃ + (I - Rᵀ(q̃))ω̄_d + k E(q̃) q_e
        let d = sample_desired();
        let k = 0.2;
        let q = UnitQuaternion::from_axis_angle(Vec3::new(-0.3, 0.8, 0.1), 1.2);
        let omega = Vec3::new(0.004, -0.01, 0.02);
        let qt = UnitQuaternion::from_axis_angle(Vec3::new(0.5, 0.5, -1.0), 0.05);
        let wt = Vec3::new(1e-3, -2e-3, 5e-4);
        let obs = ObserverOutput {
            q_hat: q * qt.inverse(),
            omega_hat: omega + wt,
        };
        let err = error_coordinates(&q, omega, &d, k);
        let hat = estimated_errors(&obs, &d, k);
        let em = error_matrices(&qt);
        let e_qe = em.apply_e(&err.qe);
        let e_s =
            wt + (Mat3::identity() - qt.rotation_matrix().transpose()) * err.omega_bar_d + e_qe * k;
        let diff = hat.s - err.s - e_s;
        assert!(diff.norm() < 1e-10, "{diff}");
    }

    #[test]
    fn sliding_estimate_attitude_only() {
        let d = DesiredState::default();
        let k = 0.2;
        let q = UnitQuaternion::from_axis_angle(Vec3::new(1.0, 2.0, 3.0), 0.7);
        let qt = UnitQuaternion::from_axis_angle(Vec3::new(0.0, 1.0, 0.0), 0.1);
        let obs = ObserverOutput {
            q_hat: q * qt.inverse(),
            omega_hat: Vec3::ZERO,
        };
        let err = error_coordinates(&q, Vec3::ZERO, &d, k);
        let hat = estimated_errors(&obs, &d, k);
        let e_qe = error_matrices(&qt).apply_e(&err.qe);
        assert!((hat.s - err.s - e_qe * k).norm() < 1e-14);
    }

    #[test]
    fn feedforward_cases() {
        let j = InertiaMatrix::diag(8.0, 7.0, 6.0).unwrap();
        let est = ModelEstimates {
            j_hat: j,
            tau_d_hat: Vec3::ZERO,
        };
        let d = DesiredState {
            qd: UnitQuaternion::IDENTITY,
            omega_d: Vec3::new(0.002, 0.0, 0.0),
            omega_d_dot: Vec3::ZERO,
        };
        let hat = error_coordinates(&UnitQuaternion::IDENTITY, d.omega_d, &d, 0.2);
        let (psi, psi_d) = feedforward_terms(&est, &hat, &d, 0.2);
        assert_eq!(psi, Vec3::ZERO);
        // principal-axis spin: ω × Ĵω = 0
        assert_eq!(psi_d, Vec3::ZERO);

        let s = crate::dynamics::SpacecraftState {
            q: UnitQuaternion::from_axis_angle(Vec3::new(1.0, 1.0, 0.0), 0.3),
            omega: Vec3::new(0.01, 0.0, -0.01),
        };
        let d = sample_desired();
        let err = tracking_errors(&s, &d, 0.2);
        assert_eq!(
            feedforward_terms(&est, &err, &d, 0.2),
            psi_terms(j.matrix(), &err, &d, 0.2)
        );
    }

    #[test]
    fn robust_term_branches() {
        let c = RobustCoefficients {
            a0: 2e-5,
            a1: 0.011,
            a2: 0.0,
            a3: 0.0,
        };
        let qe = UnitQuaternion::from_axis_angle(Vec3::unit(2), 0.1);
        let m = 0.011 * ((0.05_f64).sin() + 0.01) + 2e-5;
        assert_eq!(robust_term(Vec3::ZERO, &qe, &c, 0.01, 0.01), Vec3::ZERO);
        for scale in [0.01, 0.5, 30.0] {
            let s = Vec3::new(1.0, -2.0, 2.0) * (scale / 3.0);
            assert_abs_diff_eq!(
                robust_term(s, &qe, &c, 0.01, 0.01).norm(),
                m,
                epsilon = 1e-15
            );
        }
        let inside = Vec3::new(0.0, 0.003, 0.004);
        let us = robust_term(inside, &qe, &c, 0.01, 0.01);
        assert_abs_diff_eq!(us.norm(), m * 0.5, epsilon = 1e-15);
    }

    #[test]
    fn virtual_control_sum() {
        let s = Vec3::new(0.1, -0.2, 0.3);
        let km = Mat3::from_rows(
            Vec3::new(0.7, 0.1, 0.0),
            Vec3::new(0.1, 0.5, 0.0),
            Vec3::new(0.0, 0.0, 0.9),
        );
        let us = Vec3::new(1.0, 2.0, 3.0);
        let p = Vec3::new(-0.5, 0.25, 0.125);
        let pd = Vec3::new(4.0, 5.0, 6.0);
        let td = Vec3::new(0.01, 0.02, 0.03);
        let u = virtual_control(s, &km, us, p, pd, td);
        for i in 0..3 {
            let ks: f64 = (0..3).map(|j| km[(i, j)] * s[j]).sum();
            assert_abs_diff_eq!(u[i], -ks + us[i] + pd[i] - p[i] - td[i], epsilon = 1e-15);
        }
        assert_eq!(
            virtual_control(
                Vec3::ZERO,
                &km,
                Vec3::ZERO,
                Vec3::ZERO,
                Vec3::ZERO,
                Vec3::ZERO
            ),
            Vec3::ZERO
        );
    }

    #[test]
    fn gain_condition_examples() {
        let b = reference_budget(0.08);
        let c = robust_coefficients(&b, 0.2);
        let r = check_gain_conditions(&reference_gains(0.7), &c, &b);
        assert!(r.passed());
        // 0.0500172 + 0.08·(0.8 + 0.7)
        assert_abs_diff_eq!(r.threshold, 0.1700172, epsilon = 1e-6);
        assert_abs_diff_eq!(r.rho_s, 1.99946e-5, epsilon = 1e-9);

        let r = check_gain_conditions(&reference_gains(0.1), &c, &b);
        assert!(!r.feedback_ok);
        // 0.05002 + 0.08·(0.8 + 0.1)
        assert_abs_diff_eq!(r.threshold, 0.12202, epsilon = 1e-5);

        let b0 = reference_budget(0.0);
        let r = check_gain_conditions(&reference_gains(0.7), &c, &b0);
        assert!(r.passed());
        assert_abs_diff_eq!(r.feedback_margin, 0.7 - c.a3, epsilon = 1e-15);
    }

    #[test]
    fn equilibrium_is_pure_feedforward() {
        let j = InertiaMatrix::diag(8.0, 7.0, 6.0).unwrap();
        let est = ModelEstimates {
            j_hat: j,
            tau_d_hat: Vec3::ZERO,
        };
        let d = DesiredState {
            qd: UnitQuaternion::from_axis_angle(Vec3::new(1.0, -1.0, 0.5), 0.4),
            omega_d: Vec3::new(0.002, 0.001, 0.0015),
            omega_d_dot: Vec3::new(1e-6, 0.0, -1e-6),
        };
        let obs = ObserverOutput {
            q_hat: d.qd,
            omega_hat: d.omega_d,
        };
        let gains = reference_gains(0.7);
        let bank = ActuatorBank::four_pair_skewed(1.0);
        let out = control_step(
            &obs,
            &d,
            &gains,
            &est,
            &RobustCoefficients::default(),
            &bank,
            &[1.0; 4],
        )
        .unwrap();
        let psi_d = d.omega_d.cross(&(*j.matrix() * d.omega_d)) + *j.matrix() * d.omega_d_dot;
        assert!((out.u - psi_d).norm() < 1e-15);
        assert!((bank.effective_torque(&[1.0; 4], &out.tau_u) - psi_d).norm() < 1e-15);
        assert!(out.diagnostics.inside_boundary);
    }

    #[test]
    fn dead_pair_never_commanded() {
        let est = ModelEstimates {
            j_hat: InertiaMatrix::diag(8.0, 7.0, 6.0).unwrap(),
            tau_d_hat: Vec3::ZERO,
        };
        let bank = ActuatorBank::four_pair_skewed(0.02);
        let coeffs = robust_coefficients(&reference_budget(0.08), 0.2);
        let d = sample_desired();
        for i in 0..50 {
            let a = i as f64 * 0.37;
            let obs = ObserverOutput {
                q_hat: UnitQuaternion::from_axis_angle(Vec3::new(a.cos(), a.sin(), 0.3), a),
                omega_hat: Vec3::new(0.01 * a.sin(), -0.01, 0.02 * a.cos()),
            };
            let out = control_step(
                &obs,
                &d,
                &reference_gains(0.7),
                &est,
                &coeffs,
                &bank,
                &[1.0, 1.0, 0.0, 0.7],
            )
            .unwrap();
            assert_eq!(out.tau_u[2], 0.0);
            assert!(out.tau_u.iter().all(|t| t.abs() <= 0.02));
        }
    }

    #[test]
    fn lumped_uncertainty_vanishes_with_exact_model() {
        let j = InertiaMatrix::diag(8.0, 7.0, 6.0).unwrap();
        let est = ModelEstimates {
            j_hat: j,
            tau_d_hat: Vec3::new(1e-6, 0.0, 0.0),
        };
        let d = sample_desired();
        let err = error_coordinates(
            &UnitQuaternion::IDENTITY,
            Vec3::new(0.01, 0.0, 0.0),
            &d,
            0.2,
        );
        let r = lumped_uncertainty(&j, &est, &err, &err, &d, 0.2, Vec3::new(1e-6, 0.0, 0.0));
        assert_eq!(r, Vec3::ZERO);
    }
}
