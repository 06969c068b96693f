//! Sensor models, the observer contract and two reference observers.
//!
//! Any observer is acceptable to the controller as long as its errors
//! `q̂ = q ⊗ q̃⁻¹`, `ω̂ = ω + ω̃` are eventually bounded by `(ρ_q, ρ_w)`.
//! [`SyntheticObserver`] injects exactly controlled errors from the truth;
//! [`BiasObserver`] is a multiplicative complementary filter with gyro-bias
//! estimation driven by the simulated sensors.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal, UnitSphere};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{propagate_attitude, SpacecraftState};
use crate::so3::{UnitQuaternion, Vec3};
use crate::units::deg_to_rad;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("synthetic error amplitude {amplitude:e} exceeds budget {budget:e} ({which})")]
    BudgetViolation {
        which: &'static str,
        amplitude: f64,
        budget: f64,
    },
    #[error("attitude budget must lie in [0, 1), got {0}")]
    InvalidBudget(f64),
    #[error("tail window contains no samples")]
    EmptyTail,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorSample {
    pub qm: UnitQuaternion,
    pub omega_m: Vec3,
}

/// Gyro bias in rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GyroState {
    pub b: Vec3,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverOutput {
    pub q_hat: UnitQuaternion,
    pub omega_hat: Vec3,
}

/// Eventual bounds on the attitude and rate estimation errors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationBudget {
    pub rho_q: f64,
    pub rho_w: f64,
}

impl EstimationBudget {
    pub fn new(rho_q: f64, rho_w: f64) -> Result<Self, EstimationError> {
        if !(0.0..1.0).contains(&rho_q) || !(rho_w >= 0.0) {
            return Err(EstimationError::InvalidBudget(rho_q));
        }
        Ok(Self { rho_q, rho_w })
    }
}

/// Noise intensities. Attitude noise is a rotation of `N(0, σ²)` angle
/// about a uniformly random axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNoise {
    /// Standard deviation of the attitude-error angle, deg.
    pub attitude_sigma_deg: f64,
    /// Gyro white noise, rad/s.
    pub gyro_sigma: f64,
    /// Bias random-walk intensity, rad/s^(3/2).
    pub bias_walk_sigma: f64,
}

impl SensorNoise {
    pub const NONE: SensorNoise = SensorNoise {
        attitude_sigma_deg: 0.0,
        gyro_sigma: 0.0,
        bias_walk_sigma: 0.0,
    };
}

/// Draws one measurement and advances the bias random walk by `dt`.
///
/// `q_m = q ⊗ q̃_m⁻¹` with `q̃_m = [cos(θ/2), n sin(θ/2)]`,
/// `ω_m = ω + b + η_u`, and `b ← b + N(0, σ_v² dt)` per axis.
pub fn sensor_sample<R: Rng + ?Sized>(
    truth: &SpacecraftState,
    gyro: &GyroState,
    noise: &SensorNoise,
    rng: &mut R,
    dt: f64,
) -> (SensorSample, GyroState) {
    let theta = gaussian(rng, deg_to_rad(noise.attitude_sigma_deg));
    let axis: [f64; 3] = UnitSphere.sample(rng);
    let qt = UnitQuaternion::from_axis_angle(Vec3::from(axis), theta);
    let eta_u = Vec3::new(
        gaussian(rng, noise.gyro_sigma),
        gaussian(rng, noise.gyro_sigma),
        gaussian(rng, noise.gyro_sigma),
    );
    let walk = noise.bias_walk_sigma * dt.sqrt();
    let eta_v = Vec3::new(
        gaussian(rng, walk),
        gaussian(rng, walk),
        gaussian(rng, walk),
    );
    let sample = SensorSample {
        qm: truth.q * qt.inverse(),
        omega_m: truth.omega + gyro.b + eta_u,
    };
    (sample, GyroState { b: gyro.b + eta_v })
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> f64 {
    // Always draw so the stream position does not depend on which sigmas are zero.
    let z: f64 = StandardNormal.sample(rng);
    z * sigma
}

/// Attitude and rate estimation errors of an estimate against the truth,
/// with `q̃0 ≥ 0`.
pub fn estimation_errors(truth: &SpacecraftState, est: &ObserverOutput) -> (UnitQuaternion, Vec3) {
    let qt = (est.q_hat.inverse() * truth.q).canonical();
    (qt, est.omega_hat - truth.omega)
}

/// Observer contract: produce `(q̂, ω̂)` at time `t` and advance internal
/// state over the following `dt`.
pub trait StateObserver: Send {
    fn observe(
        &mut self,
        t: f64,
        truth: &SpacecraftState,
        sample: &SensorSample,
        dt: f64,
    ) -> Result<ObserverOutput, EstimationError>;
}

/// Smooth, deterministic estimation errors of constant magnitude.
///
/// `q̃_v(t) = q_amplitude · u(f t + φ)` and `ω̃(t) = w_amplitude · u(1.37 f t + φ + 1)`
/// where `u(a) = (cos a cos 0.618a, cos a sin 0.618a, sin a)` is a unit vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticErrorProfile {
    pub q_amplitude: f64,
    pub w_amplitude: f64,
    /// rad/s
    pub frequency: f64,
    #[serde(default)]
    pub phase: f64,
}

fn wandering_unit(a: f64) -> Vec3 {
    let b = 0.618 * a;
    Vec3::new(a.cos() * b.cos(), a.cos() * b.sin(), a.sin())
}

impl SyntheticErrorProfile {
    pub fn attitude_error(&self, t: f64) -> UnitQuaternion {
        let v = wandering_unit(self.frequency * t + self.phase) * self.q_amplitude;
        let q0 = (1.0 - v.norm_squared()).max(0.0).sqrt();
        UnitQuaternion::new(q0, v).unwrap_or(UnitQuaternion::IDENTITY)
    }

    pub fn rate_error(&self, t: f64) -> Vec3 {
        wandering_unit(1.37 * self.frequency * t + self.phase + 1.0) * self.w_amplitude
    }
}

/// `q̂ = q ⊗ q̃⁻¹`, `ω̂ = ω + ω̃` with `q̃`, `ω̃` from `profile`.
pub fn synthetic_observer(
    truth: &SpacecraftState,
    budget: &EstimationBudget,
    profile: &SyntheticErrorProfile,
    t: f64,
) -> Result<ObserverOutput, EstimationError> {
    if profile.q_amplitude > budget.rho_q {
        return Err(EstimationError::BudgetViolation {
            which: "attitude",
            amplitude: profile.q_amplitude,
            budget: budget.rho_q,
        });
    }
    if profile.w_amplitude > budget.rho_w {
        return Err(EstimationError::BudgetViolation {
            which: "rate",
            amplitude: profile.w_amplitude,
            budget: budget.rho_w,
        });
    }
    Ok(ObserverOutput {
        q_hat: truth.q * profile.attitude_error(t).inverse(),
        omega_hat: truth.omega + profile.rate_error(t),
    })
}

#[derive(Debug, Clone)]
pub struct SyntheticObserver {
    pub budget: EstimationBudget,
    pub profile: SyntheticErrorProfile,
}

impl StateObserver for SyntheticObserver {
    fn observe(
        &mut self,
        t: f64,
        truth: &SpacecraftState,
        _sample: &SensorSample,
        _dt: f64,
    ) -> Result<ObserverOutput, EstimationError> {
        synthetic_observer(truth, &self.budget, &self.profile, t)
    }
}

/// Internal state of the complementary observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiasObserverState {
    pub q_hat: UnitQuaternion,
    pub b_hat: Vec3,
}

/// One update of the complementary observer.
///
/// With `q̄ = q̂⁻¹ ⊗ q_m` and `σ = sign(q̄0)` (`sign(0) = +1`):
/// `q̂` is propagated over `dt` with `ω_c = ω_m - b̂ + k_o σ q̄_v` and
/// `b̂ ← b̂ - k_b σ q̄_v dt`. The returned output pairs the pre-update `q̂`
/// with `ω̂ = ω_m - b̂`.
pub fn bias_observer_step(
    prev: &BiasObserverState,
    sample: &SensorSample,
    k_o: f64,
    k_b: f64,
    dt: f64,
) -> (BiasObserverState, ObserverOutput) {
    let out = ObserverOutput {
        q_hat: prev.q_hat,
        omega_hat: sample.omega_m - prev.b_hat,
    };
    let qbar = prev.q_hat.inverse() * sample.qm;
    let sigma = if qbar.scalar() >= 0.0 { 1.0 } else { -1.0 };
    let innovation = qbar.vector() * sigma;
    let omega_c = out.omega_hat + innovation * k_o;
    let q_hat = propagate_attitude(&prev.q_hat, 0.0, dt, |_| omega_c);
    let b_hat = prev.b_hat - innovation * (k_b * dt);
    (BiasObserverState { q_hat, b_hat }, out)
}

#[derive(Debug, Clone)]
pub struct BiasObserver {
    pub k_o: f64,
    pub k_b: f64,
    state: Option<BiasObserverState>,
}

impl BiasObserver {
    /// The first sample initializes `q̂ = q_m`, `b̂ = 0`.
    pub fn new(k_o: f64, k_b: f64) -> Self {
        Self {
            k_o,
            k_b,
            state: None,
        }
    }

    pub fn state(&self) -> Option<&BiasObserverState> {
        self.state.as_ref()
    }
}

impl StateObserver for BiasObserver {
    fn observe(
        &mut self,
        _t: f64,
        _truth: &SpacecraftState,
        sample: &SensorSample,
        dt: f64,
    ) -> Result<ObserverOutput, EstimationError> {
        let prev = self.state.unwrap_or(BiasObserverState {
            q_hat: sample.qm,
            b_hat: Vec3::ZERO,
        });
        let (next, out) = bias_observer_step(&prev, sample, self.k_o, self.k_b, dt);
        self.state = Some(next);
        Ok(out)
    }
}

/// Norms of the estimation errors at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EstimationErrorSample {
    pub q_tilde_norm: f64,
    pub w_tilde_norm: f64,
}

/// Empirical `(ρ_q, ρ_w)`: maxima over the final `tail_fraction` of every trace.
pub fn measure_estimation_budget(
    traces: &[Vec<EstimationErrorSample>],
    tail_fraction: f64,
) -> Result<EstimationBudget, EstimationError> {
    let mut rho_q = 0.0_f64;
    let mut rho_w = 0.0_f64;
    let mut seen = false;
    for trace in traces {
        let start = tail_start(trace.len(), tail_fraction);
        for s in &trace[start..] {
            seen = true;
            rho_q = rho_q.max(s.q_tilde_norm);
            rho_w = rho_w.max(s.w_tilde_norm);
        }
    }
    if !seen {
        return Err(EstimationError::EmptyTail);
    }
    EstimationBudget::new(rho_q, rho_w)
}

/// Index of the first sample in the final `fraction` of `len` samples.
pub(crate) fn tail_start(len: usize, fraction: f64) -> usize {
    let n_tail = ((len as f64) * fraction.clamp(0.0, 1.0)).ceil() as usize;
    len - n_tail.min(len)
}
