//! Rigid-body attitude kinematics and dynamics, tracking-error coordinates,
//! the sliding variable and its error dynamics, and fixed-step RK4.
//!
//! With `q_e = q_d⁻¹ ⊗ q`, `ω̄_d = R(q_e) ω_d`, `ω_e = ω - ω̄_d` and
//! `s = ω_e + k q_e,v`, the sliding variable obeys
//!
//! ```text
//! J ṡ = Ξ(J, ω_e, ω̄_d) s + ½k [q_e,v× J + J q_e,v×] s + ψ - ψ_d + τ_c + τ_d
//! ```
//!
//! where `Ξ`, `ψ` and `ψ_d` are given by [`xi_matrix`] and [`psi_terms`].

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::VecProfile;
use crate::so3::{quaternion_rate, skew, Mat3, UnitQuaternion, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("inertia matrix is singular")]
    SingularInertia,
    #[error("inertia matrix is not symmetric")]
    NotSymmetric,
    #[error("inertia matrix is not positive definite (min eigenvalue {0:e})")]
    NotPositiveDefinite(f64),
    #[error("non-finite state at t = {t} s")]
    NonFiniteState { t: f64 },
}

/// Symmetric positive-definite inertia matrix, kg·m².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Mat3", into = "Mat3")]
pub struct InertiaMatrix {
    j: Mat3,
    j_inv: Mat3,
}

impl InertiaMatrix {
    pub fn new(j: Mat3) -> Result<Self, DynamicsError> {
        if !j.is_finite() || !j.is_symmetric(1e-12) {
            return Err(DynamicsError::NotSymmetric);
        }
        let lmin = j.symmetric_eigenvalues()[0];
        if lmin <= 0.0 {
            return Err(DynamicsError::NotPositiveDefinite(lmin));
        }
        let j_inv = j.inverse(1e-12).ok_or(DynamicsError::SingularInertia)?;
        Ok(Self { j, j_inv })
    }

    pub fn diag(a: f64, b: f64, c: f64) -> Result<Self, DynamicsError> {
        Self::new(Mat3::diag(a, b, c))
    }

    #[inline]
    pub fn matrix(&self) -> &Mat3 {
        &self.j
    }

    #[inline]
    pub fn inverse(&self) -> &Mat3 {
        &self.j_inv
    }

    /// `(λ_min, λ_max)`
    pub fn eigen_bounds(&self) -> (f64, f64) {
        let ev = self.j.symmetric_eigenvalues();
        (ev[0], ev[2])
    }

    pub fn spectral_norm(&self) -> f64 {
        self.j.spectral_norm()
    }
}

impl TryFrom<Mat3> for InertiaMatrix {
    type Error = DynamicsError;
    fn try_from(m: Mat3) -> Result<Self, DynamicsError> {
        Self::new(m)
    }
}

impl From<InertiaMatrix> for Mat3 {
    fn from(j: InertiaMatrix) -> Mat3 {
        j.j
    }
}

/// Body attitude relative to inertial, and body-frame angular rate (rad/s).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SpacecraftState {
    pub q: UnitQuaternion,
    pub omega: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DesiredState {
    pub qd: UnitQuaternion,
    pub omega_d: Vec3,
    pub omega_d_dot: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackingError {
    pub qe: UnitQuaternion,
    pub omega_e: Vec3,
    pub omega_bar_d: Vec3,
    pub s: Vec3,
}

/// `q̇ = ½ [-qvᵀ; G(q)] ω`
pub fn attitude_kinematics(state: &SpacecraftState) -> [f64; 4] {
    state.q.derivative(state.omega)
}

/// `ω̇ = J⁻¹(-ω × Jω + τ_c + τ_d)`
pub fn euler_dynamics(j: &InertiaMatrix, omega: Vec3, tau_c: Vec3, tau_d: Vec3) -> Vec3 {
    let h = *j.matrix() * omega;
    *j.inverse() * (-omega.cross(&h) + tau_c + tau_d)
}

pub fn tracking_errors(state: &SpacecraftState, desired: &DesiredState, k: f64) -> TrackingError {
    error_coordinates(&state.q, state.omega, desired, k)
}

/// Error coordinates for any attitude/rate pair, true or estimated.
pub(crate) fn error_coordinates(
    q: &UnitQuaternion,
    omega: Vec3,
    desired: &DesiredState,
    k: f64,
) -> TrackingError {
    let qe = desired.qd.inverse() * *q;
    let omega_bar_d = qe.rotation_matrix() * desired.omega_d;
    let omega_e = omega - omega_bar_d;
    TrackingError {
        qe,
        omega_e,
        omega_bar_d,
        s: omega_e + qe.vector() * k,
    }
}

/// `Ξ(J, ω_e, ω̄_d) = (J(ω_e + ω̄_d))× - ω̄_d× J - J ω̄_d×`
pub fn xi_matrix(j: &Mat3, omega_e: Vec3, omega_bar_d: Vec3) -> Mat3 {
    let wd = skew(omega_bar_d);
    skew(*j * (omega_e + omega_bar_d)) - wd * *j - *j * wd
}

/// `ψ` and `ψ_d` of the sliding-variable dynamics, for an arbitrary
/// (true or model) inertia `j`.
///
/// ```text
/// ψ   = -½k² q_e,v× J q_e,v + ½k G(q_e) J ω_e - k Ξ(J, 0, ω̄_d) q_e,v
/// ψ_d = ω̄_d× J ω̄_d + J R(q_e) ω̇_d
/// ```
pub fn psi_terms(j: &Mat3, err: &TrackingError, desired: &DesiredState, k: f64) -> (Vec3, Vec3) {
    let qv = err.qe.vector();
    let psi = -(skew(qv) * (*j * qv)) * (0.5 * k * k)
        + err.qe.g_matrix() * (*j * err.omega_e) * (0.5 * k)
        - xi_matrix(j, Vec3::ZERO, err.omega_bar_d) * qv * k;
    let psi_d = err.omega_bar_d.cross(&(*j * err.omega_bar_d))
        + *j * (err.qe.rotation_matrix() * desired.omega_d_dot);
    (psi, psi_d)
}

/// `J ṡ` from the error dynamics.
pub fn j_s_dot(
    j: &InertiaMatrix,
    err: &TrackingError,
    desired: &DesiredState,
    k: f64,
    tau_c: Vec3,
    tau_d: Vec3,
) -> Vec3 {
    let jm = j.matrix();
    let qx = skew(err.qe.vector());
    let (psi, psi_d) = psi_terms(jm, err, desired, k);
    xi_matrix(jm, err.omega_e, err.omega_bar_d) * err.s
        + (qx * *jm + *jm * qx) * err.s * (0.5 * k)
        + psi
        - psi_d
        + tau_c
        + tau_d
}

/// `ṡ = J⁻¹ (J ṡ)`
pub fn s_dot_rhs(
    j: &InertiaMatrix,
    err: &TrackingError,
    desired: &DesiredState,
    k: f64,
    tau_c: Vec3,
    tau_d: Vec3,
) -> Vec3 {
    *j.inverse() * j_s_dot(j, err, desired, k, tau_c, tau_d)
}

#[inline]
fn axpy4(a: &[f64; 4], h: f64, b: &[f64; 4]) -> [f64; 4] {
    std::array::from_fn(|i| a[i] + h * b[i])
}

fn to_state(q: &[f64; 4], omega: Vec3, t: f64) -> Result<SpacecraftState, DynamicsError> {
    if !omega.is_finite() {
        return Err(DynamicsError::NonFiniteState { t });
    }
    let q = UnitQuaternion::from_array(*q).map_err(|_| DynamicsError::NonFiniteState { t })?;
    Ok(SpacecraftState { q, omega })
}

/// One classical RK4 step of the coupled kinematics and Euler dynamics.
///
/// `torque(t, state)` returns the total external torque (control plus
/// disturbance) at a stage. The quaternion is integrated as a raw 4-vector
/// and renormalized once at the end of the step.
pub fn rk4_step<F>(
    state: &SpacecraftState,
    t: f64,
    dt: f64,
    j: &InertiaMatrix,
    mut torque: F,
) -> Result<SpacecraftState, DynamicsError>
where
    F: FnMut(f64, &SpacecraftState) -> Vec3,
{
    debug_assert!(dt > 0.0);
    let mut deriv = |tt: f64, q: &[f64; 4], w: Vec3| -> Result<([f64; 4], Vec3), DynamicsError> {
        let st = to_state(q, w, tt)?;
        let tau = torque(tt, &st);
        Ok((
            quaternion_rate(*q, w),
            euler_dynamics(j, w, tau, Vec3::ZERO),
        ))
    };
    let q0 = state.q.to_array();
    let w0 = state.omega;
    let h = 0.5 * dt;
    let (kq1, kw1) = deriv(t, &q0, w0)?;
    let (kq2, kw2) = deriv(t + h, &axpy4(&q0, h, &kq1), w0 + kw1 * h)?;
    let (kq3, kw3) = deriv(t + h, &axpy4(&q0, h, &kq2), w0 + kw2 * h)?;
    let (kq4, kw4) = deriv(t + dt, &axpy4(&q0, dt, &kq3), w0 + kw3 * dt)?;
    let q1: [f64; 4] =
        std::array::from_fn(|i| q0[i] + dt / 6.0 * (kq1[i] + 2.0 * kq2[i] + 2.0 * kq3[i] + kq4[i]));
    let w1 = w0 + (kw1 + kw2 * 2.0 + kw3 * 2.0 + kw4) * (dt / 6.0);
    to_state(&q1, w1, t + dt)
}

/// RK4 step of the kinematics alone, `q̇ = ½ q ⊗ [0, ω(t)]`.
pub fn propagate_attitude<F>(q: &UnitQuaternion, t: f64, dt: f64, omega: F) -> UnitQuaternion
where
    F: Fn(f64) -> Vec3,
{
    let q0 = q.to_array();
    let h = 0.5 * dt;
    let k1 = quaternion_rate(q0, omega(t));
    let k2 = quaternion_rate(axpy4(&q0, h, &k1), omega(t + h));
    let k3 = quaternion_rate(axpy4(&q0, h, &k2), omega(t + h));
    let k4 = quaternion_rate(axpy4(&q0, dt, &k3), omega(t + dt));
    let q1: [f64; 4] =
        std::array::from_fn(|i| q0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    UnitQuaternion::from_array(q1).unwrap_or(*q)
}

/// Desired trajectory driven by a rate profile `ω_d(t)`; `q_d` follows from
/// the same kinematics as the body so the triple stays consistent.
#[derive(Debug, Clone)]
pub struct DesiredTrajectory {
    rates: VecProfile,
    qd: UnitQuaternion,
    t: f64,
}

impl DesiredTrajectory {
    pub fn new(qd0: UnitQuaternion, rates: VecProfile) -> Self {
        Self {
            rates,
            qd: qd0,
            t: 0.0,
        }
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn current(&self) -> DesiredState {
        DesiredState {
            qd: self.qd,
            omega_d: self.rates.eval(self.t),
            omega_d_dot: self.rates.derivative(self.t),
        }
    }

    pub fn advance(&mut self, dt: f64) {
        let rates = &self.rates;
        self.qd = propagate_attitude(&self.qd, self.t, dt, |t| rates.eval(t));
        self.t += dt;
    }
}
