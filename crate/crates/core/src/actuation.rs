//! Thruster-pair bank with multiplicative health, fault-weighted torque
//! allocation and the fault-mismatch matrix `H`.
//!
//! Pair `i` produces `e_i(t) τ_u,i d_i`, so `τ_c = D E(t) τ_u`. The allocator
//!
//! ```text
//! τ_u = Ê² Dᵀ (D Ê³ Dᵀ)⁻¹ u
//! ```
//!
//! minimizes `τ_uᵀ Ê⁻¹ τ_u` subject to `D Ê τ_u = u`, so pairs believed to be
//! degraded are used less and pairs with `ê_i = 0` receive nothing.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::profile::TimeProfile;
use crate::so3::{Mat3, Vec3};

/// Relative singular-value threshold for the rank checks on `D Ê³ Dᵀ`.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ActuationError {
    #[error("weighted distribution matrix is rank deficient (σ_min/σ_max = {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("distribution matrix must be 3×m with m ≥ 3, got {0} columns")]
    TooFewActuators(usize),
    #[error("column {index} of the distribution matrix has norm {norm}, expected 1")]
    NonUnitColumn { index: usize, norm: f64 },
    #[error("health vector has {got} entries, bank has {expected} pairs")]
    LengthMismatch { expected: usize, got: usize },
    #[error("torque limit must be positive, got {0}")]
    BadTorqueLimit(f64),
}

/// Serialized form: `distribution` is the 3×m matrix `D` as three rows.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct BankConfig {
    distribution: [Vec<f64>; 3],
    tau_max: f64,
}

/// `m ≥ 3` thruster pairs with unit torque directions `d_i` and a common
/// per-pair torque limit (N·m).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BankConfig", into = "BankConfig")]
pub struct ActuatorBank {
    columns: Vec<Vec3>,
    tau_max: f64,
}

impl TryFrom<BankConfig> for ActuatorBank {
    type Error = ActuationError;
    fn try_from(c: BankConfig) -> Result<Self, ActuationError> {
        let m = c.distribution[0].len();
        if c.distribution.iter().any(|r| r.len() != m) {
            return Err(ActuationError::LengthMismatch {
                expected: m,
                got: c
                    .distribution
                    .iter()
                    .map(Vec::len)
                    .find(|&l| l != m)
                    .unwrap_or(m),
            });
        }
        let columns = (0..m)
            .map(|j| {
                Vec3::new(
                    c.distribution[0][j],
                    c.distribution[1][j],
                    c.distribution[2][j],
                )
            })
            .collect();
        ActuatorBank::new(columns, c.tau_max)
    }
}

impl From<ActuatorBank> for BankConfig {
    fn from(b: ActuatorBank) -> Self {
        BankConfig {
            distribution: std::array::from_fn(|i| b.columns.iter().map(|c| c[i]).collect()),
            tau_max: b.tau_max,
        }
    }
}

impl ActuatorBank {
    pub fn new(columns: Vec<Vec3>, tau_max: f64) -> Result<Self, ActuationError> {
        if columns.len() < 3 {
            return Err(ActuationError::TooFewActuators(columns.len()));
        }
        if !(tau_max > 0.0) {
            return Err(ActuationError::BadTorqueLimit(tau_max));
        }
        for (index, c) in columns.iter().enumerate() {
            let norm = c.norm();
            if (norm - 1.0).abs() > 1e-12 {
                return Err(ActuationError::NonUnitColumn { index, norm });
            }
        }
        let bank = Self { columns, tau_max };
        bank.weighted_gram(&vec![1.0; bank.len()], 1)?;
        Ok(bank)
    }

    /// Four pairs: one per body axis plus one skewed along `(1,1,1)/√3`.
    pub fn four_pair_skewed(tau_max: f64) -> Self {
        let r = 1.0 / 3.0_f64.sqrt();
        Self::new(
            vec![
                Vec3::unit(0),
                Vec3::unit(1),
                Vec3::unit(2),
                Vec3::new(r, r, r),
            ],
            tau_max,
        )
        .expect("valid bank")
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[Vec3] {
        &self.columns
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    fn check_len(&self, v: &[f64]) -> Result<(), ActuationError> {
        if v.len() != self.len() {
            return Err(ActuationError::LengthMismatch {
                expected: self.len(),
                got: v.len(),
            });
        }
        Ok(())
    }

    /// `Σ w_i^p d_i d_iᵀ`, rank-checked.
    fn weighted_gram(&self, w: &[f64], power: i32) -> Result<Mat3, ActuationError> {
        self.check_len(w)?;
        let g = self
            .columns
            .iter()
            .zip(w)
            .fold(Mat3::zeros(), |acc, (d, wi)| {
                acc + d.outer(d) * wi.powi(power)
            });
        let ev = g.symmetric_eigenvalues();
        let smax = ev[2].abs().max(ev[0].abs());
        let smin = ev.iter().fold(f64::INFINITY, |a, v| a.min(v.abs()));
        if smax == 0.0 || smin <= RANK_TOL * smax {
            return Err(ActuationError::RankDeficient {
                ratio: if smax == 0.0 { 0.0 } else { smin / smax },
            });
        }
        Ok(g)
    }

    /// `τ_c = D E τ_u` for health values `e` at the current time.
    pub fn effective_torque(&self, e: &[f64], tau_u: &[f64]) -> Vec3 {
        debug_assert_eq!(e.len(), self.len());
        debug_assert_eq!(tau_u.len(), self.len());
        self.columns
            .iter()
            .zip(e)
            .zip(tau_u)
            .fold(Vec3::ZERO, |acc, ((d, ei), ti)| acc + *d * (ei * ti))
    }

    /// `τ_u = Ê² Dᵀ (D Ê³ Dᵀ)⁻¹ u`
    pub fn allocate(&self, e_hat: &[f64], u: Vec3) -> Result<Vec<f64>, ActuationError> {
        let g = self.weighted_gram(e_hat, 3)?;
        let inv = g
            .inverse(1e-14)
            .ok_or(ActuationError::RankDeficient { ratio: 0.0 })?;
        let lambda = inv * u;
        Ok(self
            .columns
            .iter()
            .zip(e_hat)
            .map(|(d, ei)| ei * ei * d.dot(&lambda))
            .collect())
    }

    /// `H = D Ẽ Ê² Dᵀ (D Ê³ Dᵀ)⁻¹` with `Ẽ = E - Ê`.
    pub fn h_matrix(&self, e: &[f64], e_hat: &[f64]) -> Result<Mat3, ActuationError> {
        self.check_len(e)?;
        let g = self.weighted_gram(e_hat, 3)?;
        let inv = g
            .inverse(1e-14)
            .ok_or(ActuationError::RankDeficient { ratio: 0.0 })?;
        let num = self
            .columns
            .iter()
            .zip(e.iter().zip(e_hat))
            .fold(Mat3::zeros(), |acc, (d, (ei, hi))| {
                acc + d.outer(d) * ((ei - hi) * hi * hi)
            });
        Ok(num * inv)
    }

    /// `max_t ‖H(t)‖` over a time grid.
    pub fn rho_e_estimate(
        &self,
        health: &HealthProfile,
        estimate: &HealthProfile,
        t_grid: &[f64],
    ) -> Result<f64, ActuationError> {
        let mut worst = 0.0_f64;
        for &t in t_grid {
            let h = self.h_matrix(&health.eval(t), &estimate.eval(t))?;
            worst = worst.max(h.spectral_norm());
        }
        Ok(worst)
    }
}

/// Componentwise clamp to `[-tau_max, tau_max]`.
pub fn saturate(tau_u: &[f64], tau_max: f64) -> Vec<f64> {
    tau_u.iter().map(|t| t.clamp(-tau_max, tau_max)).collect()
}

/// Per-pair health indicators `e_i(t)`, clamped to `[0, 1]` on evaluation.
///
/// The same type carries both the true health `E(t)` and the diagnosed
/// estimate `Ê(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HealthProfile(pub Vec<TimeProfile>);

impl HealthProfile {
    pub fn healthy(m: usize) -> Self {
        HealthProfile(vec![TimeProfile::constant(1.0); m])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        self.0.iter().map(|p| p.eval(t).clamp(0.0, 1.0)).collect()
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        for (o, p) in out.iter_mut().zip(&self.0) {
            *o = p.eval(t).clamp(0.0, 1.0);
        }
    }
}
