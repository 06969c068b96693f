//! Scenario configuration, presets and validation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::actuation::{ActuatorBank, HealthProfile};
use crate::bounds::{BoundPredictor, UncertaintyBudget};
use crate::controller::{
    check_gain_conditions, robust_coefficients, ControllerGains, GainReport, RobustCoefficients,
};
use crate::dynamics::InertiaMatrix;
use crate::estimation::{EstimationBudget, SensorNoise};
use crate::profile::{grid, VecProfile};
use crate::so3::{UnitQuaternion, Vec3};
use crate::units::deg_per_hour_to_rad_per_sec;

use super::HarnessError;

const PRESETS: &[(&str, &str)] = &[
    (
        "paper-fault-free",
        include_str!("../../presets/paper-fault-free.toml"),
    ),
    (
        "paper-faulty",
        include_str!("../../presets/paper-faulty.toml"),
    ),
    (
        "paper-fault-free-observer",
        include_str!("../../presets/paper-fault-free-observer.toml"),
    ),
    ("nominal", include_str!("../../presets/nominal.toml")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub j_hat: InertiaMatrix,
    /// Disturbance estimate `τ̂_d(t)`, N·m.
    pub disturbance: VecProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub initial_attitude: UnitQuaternion,
    /// `ω_d(t)`, rad/s.
    pub rates: VecProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorSpec {
    #[serde(flatten)]
    pub bank: ActuatorBank,
    pub health: HealthProfile,
    pub health_estimate: HealthProfile,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    #[serde(flatten)]
    pub noise: SensorNoise,
    pub initial_bias_deg_per_hour: Vec3,
}

impl SensorSpec {
    pub fn initial_bias(&self) -> Vec3 {
        self.initial_bias_deg_per_hour
            .map(deg_per_hour_to_rad_per_sec)
    }
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ObserverSpec {
    /// `q̂ = q`, `ω̂ = ω`.
    Exact,
    /// Injected smooth errors of fixed amplitude. With `random_phase` the
    /// phase is drawn per instance.
    Synthetic {
        q_amplitude: f64,
        w_amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default = "yes")]
        random_phase: bool,
    },
    /// Complementary filter with bias estimation driven by the sensors.
    Bias { k_o: f64, k_b: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialConditions {
    /// Rates uniform in `[-max_rate, max_rate]` per axis (rad/s); attitude
    /// error angle uniform in `[0, max_angle]` (rad) about a uniform axis.
    Random { max_rate: f64, max_angle: f64 },
    /// Fixed tracking-error attitude and body rate.
    Fixed {
        attitude_error: UnitQuaternion,
        rate: Vec3,
    },
}

/// Optional replacements for the closed-form robust coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CoefficientOverride {
    pub a0: Option<f64>,
    pub a1: Option<f64>,
}

fn default_decimation() -> usize {
    1
}

fn default_tail() -> f64 {
    0.2
}

fn default_eta() -> f64 {
    crate::bounds::DEFAULT_ETA
}

/// A complete closed-loop experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// s
    pub duration: f64,
    /// s
    pub dt: f64,
    /// Record every n-th step.
    #[serde(default = "default_decimation")]
    pub decimation: usize,
    pub seed: u64,
    #[serde(default = "default_tail")]
    pub tail_fraction: f64,
    #[serde(default = "default_eta")]
    pub eta: f64,
    pub inertia: InertiaMatrix,
    /// True disturbance `τ_d(t)`, N·m.
    pub disturbance: VecProfile,
    pub model: ModelSpec,
    pub trajectory: TrajectorySpec,
    pub actuators: ActuatorSpec,
    pub sensors: SensorSpec,
    pub observer: ObserverSpec,
    pub initial: InitialConditions,
    pub gains: ControllerGains,
    pub budget: UncertaintyBudget,
    #[serde(default)]
    pub coefficients: CoefficientOverride,
}

impl Scenario {
    pub fn preset_names() -> impl Iterator<Item = &'static str> {
        PRESETS.iter().map(|(n, _)| *n)
    }

    pub fn preset(name: &str) -> Result<Self, HarnessError> {
        let (_, text) = PRESETS
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| HarnessError::UnknownPreset(name.to_string()))?;
        Self::from_toml_str(text)
    }

    pub fn paper_fault_free() -> Self {
        Self::preset("paper-fault-free").expect("embedded preset parses")
    }

    pub fn paper_faulty() -> Self {
        Self::preset("paper-faulty").expect("embedded preset parses")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml_string(&self) -> Result<String, HarnessError> {
        toml::to_string(self).map_err(|e| HarnessError::Invalid(e.to_string()))
    }

    /// Loads a file, or a preset when `spec` names one and no such file exists.
    pub fn load(spec: &str) -> Result<Self, HarnessError> {
        let path = Path::new(spec);
        let looks_like_file = path.extension().is_some() || path.components().count() > 1;
        if !path.exists() && !looks_like_file {
            return Self::preset(spec);
        }
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    /// The budget with `‖Ĵ‖` filled in from the model inertia.
    pub fn budget(&self) -> UncertaintyBudget {
        UncertaintyBudget {
            j_hat_norm: self.model.j_hat.spectral_norm(),
            ..self.budget
        }
    }

    /// Closed-form coefficients with any configured overrides applied.
    pub fn robust_coefficients(&self) -> RobustCoefficients {
        let mut c = robust_coefficients(&self.budget(), self.gains.k);
        if let Some(a0) = self.coefficients.a0 {
            c.a0 = a0;
        }
        if let Some(a1) = self.coefficients.a1 {
            c.a1 = a1;
        }
        c
    }

    pub fn gain_report(&self) -> GainReport {
        check_gain_conditions(&self.gains, &self.robust_coefficients(), &self.budget())
    }

    pub fn predictor(&self) -> Result<BoundPredictor, HarnessError> {
        Ok(BoundPredictor::new(
            &self.budget(),
            &self.gains,
            &self.robust_coefficients(),
        )?)
    }

    pub fn estimation_budget(&self) -> Result<EstimationBudget, HarnessError> {
        Ok(EstimationBudget::new(self.budget.rho_q, self.budget.rho_w)?)
    }

    /// Hard checks. Returns the list of soft findings (budget entries that
    /// do not dominate the quantity they bound, failed gain conditions).
    pub fn validate(&self) -> Result<Vec<String>, HarnessError> {
        let invalid = |m: String| Err(HarnessError::Invalid(m));
        if !(self.dt > 0.0) {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.duration >= 10.0 * self.dt) {
            return invalid(format!(
                "duration {} is shorter than 10 steps",
                self.duration
            ));
        }
        if self.decimation == 0 {
            return invalid("decimation must be at least 1".into());
        }
        if !(self.tail_fraction > 0.0 && self.tail_fraction <= 1.0) {
            return Err(HarnessError::InvalidTailFraction(self.tail_fraction));
        }
        self.gains
            .validate()
            .map_err(|e| HarnessError::Invalid(e.to_string()))?;
        let budget = self.budget();
        budget.validate()?;
        let m = self.actuators.bank.len();
        for (label, h) in [
            ("health", &self.actuators.health),
            ("health_estimate", &self.actuators.health_estimate),
        ] {
            if h.len() != m {
                return invalid(format!("{label} has {} entries, bank has {m}", h.len()));
            }
        }
        if let ObserverSpec::Synthetic {
            q_amplitude,
            w_amplitude,
            ..
        } = self.observer
        {
            let est = self.estimation_budget()?;
            if q_amplitude > est.rho_q || w_amplitude > est.rho_w {
                return invalid(format!(
                    "synthetic observer amplitudes ({q_amplitude:e}, {w_amplitude:e}) exceed the budget ({:e}, {:e})",
                    est.rho_q, est.rho_w
                ));
            }
        }

        let horizon = self.duration;
        let step = (horizon / 4000.0).max(self.dt);
        let times: Vec<f64> = grid(horizon, step).collect();
        for &t in &times {
            let e_hat = self.actuators.health_estimate.eval(t);
            self.actuators.bank.allocate(&e_hat, Vec3::unit(0))?;
        }

        let mut notes = Vec::new();
        let mut check = |name: &str, bound: f64, actual: f64| {
            if actual > bound * (1.0 + 1e-12) {
                notes.push(format!(
                    "{name} = {bound:e} is below the observed {actual:e}"
                ));
            }
        };
        let rho_e = self.actuators.bank.rho_e_estimate(
            &self.actuators.health,
            &self.actuators.health_estimate,
            &times,
        )?;
        check("rho_e", budget.rho_e, rho_e);
        let rates = &self.trajectory.rates;
        check("rho_v", budget.rho_v, rates.max_norm_on_grid(horizon, step));
        check(
            "rho_a",
            budget.rho_a,
            rates.max_derivative_norm_on_grid(horizon, step),
        );
        let j_err = (*self.inertia.matrix() - *self.model.j_hat.matrix()).spectral_norm();
        check("rho_j", budget.rho_j, j_err);
        let d_err = times
            .iter()
            .map(|&t| (self.disturbance.eval(t) - self.model.disturbance.eval(t)).norm())
            .fold(0.0, f64::max);
        check("rho_d", budget.rho_d, d_err);
        let d_hat = times
            .iter()
            .map(|&t| self.model.disturbance.eval(t).norm())
            .fold(0.0, f64::max);
        check("rho_d_hat", budget.rho_d_hat, d_hat);
        let (jl, jr) = self.inertia.eigen_bounds();
        if jl < budget.lambda_l || jr > budget.lambda_r {
            notes.push(format!(
                "inertia eigenvalues [{jl:.4}, {jr:.4}] fall outside [lambda_l, lambda_r] = [{}, {}]",
                budget.lambda_l, budget.lambda_r
            ));
        }
        let report = self.gain_report();
        if !report.feedback_ok {
            notes.push(format!(
                "feedback gain condition fails: lambda_min(K) = {} <= {:.6}",
                report.lambda_min_k, report.threshold
            ));
        }
        if !report.boundary_ok {
            notes.push(format!(
                "boundary layer condition fails: epsilon = {} <= rho_s = {:e}",
                self.gains.epsilon, report.rho_s
            ));
        }
        Ok(notes)
    }
}
