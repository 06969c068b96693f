//! Fixed-step closed-loop simulation of one instance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, UnitSphere};
use serde::{Deserialize, Serialize};

use crate::controller::{Controller, ModelEstimates};
use crate::dynamics::{
    rk4_step, tracking_errors, DesiredTrajectory, DynamicsError, SpacecraftState,
};
use crate::estimation::{
    estimation_errors, sensor_sample, BiasObserver, GyroState, StateObserver,
    SyntheticErrorProfile, SyntheticObserver,
};
use crate::so3::{UnitQuaternion, Vec3};

use super::scenario::{InitialConditions, ObserverSpec, Scenario};
use super::HarnessError;

/// One recorded instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub t: f64,
    /// Tracking-error quaternion with non-negative scalar part.
    pub qe: UnitQuaternion,
    pub omega_e: Vec3,
    /// Principal angle of `qe`, rad.
    pub theta_e: f64,
    pub s_norm: f64,
    pub s_hat_norm: f64,
    pub u_s_norm: f64,
    pub inside_boundary: bool,
    /// Saturated commands, N·m.
    pub tau_u: Vec<f64>,
    pub q_tilde_norm: f64,
    pub w_tilde_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub scenario: String,
    pub seed: u64,
    pub samples: Vec<TraceSample>,
}

impl RunTrace {
    pub fn actuator_count(&self) -> usize {
        self.samples.first().map_or(0, |s| s.tau_u.len())
    }
}

fn initial_state<R: Rng>(scenario: &Scenario, rng: &mut R) -> SpacecraftState {
    let qd0 = scenario.trajectory.initial_attitude;
    match scenario.initial {
        InitialConditions::Random {
            max_rate,
            max_angle,
        } => {
            let omega = Vec3::new(
                rng.random_range(-max_rate..=max_rate),
                rng.random_range(-max_rate..=max_rate),
                rng.random_range(-max_rate..=max_rate),
            );
            let angle = rng.random_range(0.0..=max_angle);
            let axis: [f64; 3] = UnitSphere.sample(rng);
            SpacecraftState {
                q: qd0 * UnitQuaternion::from_axis_angle(Vec3::from(axis), angle),
                omega,
            }
        }
        InitialConditions::Fixed {
            attitude_error,
            rate,
        } => SpacecraftState {
            q: qd0 * attitude_error,
            omega: rate,
        },
    }
}

fn build_observer<R: Rng>(
    scenario: &Scenario,
    rng: &mut R,
) -> Result<Box<dyn StateObserver>, HarnessError> {
    Ok(match scenario.observer {
        ObserverSpec::Exact => Box::new(SyntheticObserver {
            budget: scenario.estimation_budget()?,
            profile: SyntheticErrorProfile {
                q_amplitude: 0.0,
                w_amplitude: 0.0,
                frequency: 0.0,
                phase: 0.0,
            },
        }),
        ObserverSpec::Synthetic {
            q_amplitude,
            w_amplitude,
            frequency,
            phase,
            random_phase,
        } => {
            let offset = if random_phase {
                rng.random_range(0.0..std::f64::consts::TAU)
            } else {
                0.0
            };
            Box::new(SyntheticObserver {
                budget: scenario.estimation_budget()?,
                profile: SyntheticErrorProfile {
                    q_amplitude,
                    w_amplitude,
                    frequency,
                    phase: phase + offset,
                },
            })
        }
        ObserverSpec::Bias { k_o, k_b } => Box::new(BiasObserver::new(k_o, k_b)),
    })
}

/// Runs one instance: truth → sensors → observer → controller → actuators
/// → dynamics at a fixed step, with the command held over each step.
pub fn run_scenario(scenario: &Scenario, seed: u64) -> Result<RunTrace, HarnessError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = initial_state(scenario, &mut rng);
    let mut observer = build_observer(scenario, &mut rng)?;
    let mut gyro = GyroState {
        b: scenario.sensors.initial_bias(),
    };
    let mut desired = DesiredTrajectory::new(
        scenario.trajectory.initial_attitude,
        scenario.trajectory.rates,
    );
    let mut controller = Controller {
        gains: scenario.gains,
        estimates: ModelEstimates {
            j_hat: scenario.model.j_hat,
            tau_d_hat: Vec3::ZERO,
        },
        coeffs: scenario.robust_coefficients(),
        bank: scenario.actuators.bank.clone(),
    };
    let health = &scenario.actuators.health;
    let bank = &scenario.actuators.bank;
    let dt = scenario.dt;
    let n = scenario.steps();
    let mut samples = Vec::with_capacity(n / scenario.decimation + 1);
    let mut e_hat = vec![0.0; bank.len()];
    let mut e = vec![0.0; bank.len()];

    for step in 0..=n {
        let t = step as f64 * dt;
        let d = desired.current();
        let (sample, next_gyro) =
            sensor_sample(&state, &gyro, &scenario.sensors.noise, &mut rng, dt);
        let obs = observer.observe(t, &state, &sample, dt)?;
        scenario.actuators.health_estimate.eval_into(t, &mut e_hat);
        controller.estimates.tau_d_hat = scenario.model.disturbance.eval(t);
        let out = controller.step(&obs, &d, &e_hat)?;

        if step % scenario.decimation == 0 || step == n {
            let err = tracking_errors(&state, &d, scenario.gains.k);
            let (qt, wt) = estimation_errors(&state, &obs);
            samples.push(TraceSample {
                t,
                qe: err.qe.canonical(),
                omega_e: err.omega_e,
                theta_e: err.qe.principal_angle(),
                s_norm: err.s.norm(),
                s_hat_norm: out.diagnostics.s_hat.norm(),
                u_s_norm: out.diagnostics.u_s.norm(),
                inside_boundary: out.diagnostics.inside_boundary,
                tau_u: out.tau_u.clone(),
                q_tilde_norm: qt.vector().norm(),
                w_tilde_norm: wt.norm(),
            });
        }
        if step == n {
            break;
        }

        let tau_u = out.tau_u;
        let disturbance = &scenario.disturbance;
        state = rk4_step(&state, t, dt, &scenario.inertia, |tt, _| {
            health.eval_into(tt, &mut e);
            bank.effective_torque(&e, &tau_u) + disturbance.eval(tt)
        })
        .map_err(|err| match err {
            DynamicsError::NonFiniteState { t } => HarnessError::NonFinite { step, t },
            other => HarnessError::Invalid(other.to_string()),
        })?;
        desired.advance(dt);
        gyro = next_gyro;
    }
    Ok(RunTrace {
        scenario: scenario.name.clone(),
        seed,
        samples,
    })
}
