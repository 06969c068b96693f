//! Ultimate-bound prediction by sequential Lyapunov analysis.
//!
//! Starting from the trivial bound `q̄0 = 1`, each pass feeds the current
//! attitude-error bound back into the uncertainty estimate and produces a
//! tighter sliding-variable bound `s̄i = sqrt(λ_r/λ_l) φ̄(q̄_{i-1}, 0) / κ`,
//! `q̄i = s̄i / k`. When the loop-1 limit places `ŝ` inside the boundary
//! layer, a second loop with the inside-layer rate `κ'` tightens it further.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{
    check_gain_conditions, robust_coefficients, ControllerGains, GainReport, RobustCoefficients,
};

/// Hard cap on iterations per loop.
pub const MAX_ITERATIONS: usize = 10_000;

pub const DEFAULT_ETA: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("invalid uncertainty budget: {0}")]
    InvalidBudget(String),
    #[error("convergence rate kappa = {kappa:e} is not positive")]
    GainConditionViolated { kappa: f64 },
    #[error("first iterate q1 = {q1} is not below 1; the sequence does not contract")]
    NotContractive { q1: f64 },
    #[error("loop 2 not activated: s_inf + rho_s = {value:e} is not below epsilon")]
    NotActivated { value: f64 },
    #[error("loop {which} did not converge within {MAX_ITERATIONS} iterations")]
    NotConverged { which: u8 },
    #[error("tolerance eta must be positive, got {0}")]
    InvalidEta(f64),
}

/// Constants bounding every uncertainty source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBudget {
    /// Attitude estimation error, `‖q̃_v‖ ≤ ρ_q`.
    pub rho_q: f64,
    /// Rate estimation error, rad/s.
    pub rho_w: f64,
    /// Inertia mismatch `‖J - Ĵ‖`.
    pub rho_j: f64,
    /// True disturbance magnitude, N·m.
    pub rho_d: f64,
    /// Disturbance estimate magnitude, N·m.
    pub rho_d_hat: f64,
    /// Lower and upper eigenvalue bounds of the true inertia.
    pub lambda_l: f64,
    pub lambda_r: f64,
    /// Desired rate and acceleration magnitudes.
    pub rho_v: f64,
    pub rho_a: f64,
    /// Fault-mismatch norm.
    pub rho_e: f64,
    /// Spectral norm of `Ĵ`. Filled from the model inertia when loaded
    /// as part of a scenario.
    #[serde(default)]
    pub j_hat_norm: f64,
}

impl UncertaintyBudget {
    pub const ZERO: UncertaintyBudget = UncertaintyBudget {
        rho_q: 0.0,
        rho_w: 0.0,
        rho_j: 0.0,
        rho_d: 0.0,
        rho_d_hat: 0.0,
        lambda_l: 0.0,
        lambda_r: 0.0,
        rho_v: 0.0,
        rho_a: 0.0,
        rho_e: 0.0,
        j_hat_norm: 0.0,
    };

    pub fn validate(&self) -> Result<(), BoundError> {
        let bad = |m: &str| Err(BoundError::InvalidBudget(m.to_string()));
        let nonneg = [
            self.rho_q,
            self.rho_w,
            self.rho_j,
            self.rho_d,
            self.rho_d_hat,
            self.rho_v,
            self.rho_a,
            self.rho_e,
            self.j_hat_norm,
        ];
        if nonneg.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return bad("all magnitudes must be finite and non-negative");
        }
        if self.rho_q >= 1.0 {
            return bad("rho_q must be below 1");
        }
        if self.rho_e >= 1.0 {
            return bad("rho_e must be below 1");
        }
        if !(self.lambda_l > 0.0 && self.lambda_l <= self.lambda_r && self.lambda_r.is_finite()) {
            return bad("need 0 < lambda_l <= lambda_r");
        }
        Ok(())
    }

    /// `ρ0 = sqrt(2(1 - sqrt(1 - ρ_q²)))`, the bound on `‖q̃ - [1,0,0,0]‖`.
    pub fn rho_0(&self) -> f64 {
        (2.0 * (1.0 - (1.0 - self.rho_q * self.rho_q).sqrt())).sqrt()
    }

    /// `ρ_s = ρ_w + 2ρ_qρ_v + kρ0`, the bound on `‖ŝ - s‖` at zero tracking error.
    pub fn rho_s(&self, k: f64) -> f64 {
        self.rho_w + 2.0 * self.rho_q * self.rho_v + k * self.rho_0()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCoefficients {
    pub rho_0: f64,
    pub rho_s: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    /// `λ_min(K) - a3 - ρ_E b3`
    pub kappa: f64,
    /// `κ + (a1γ + a0)/ε`
    pub kappa_prime: f64,
}

/// Coefficients of the fault-mismatch terms.
///
/// ```text
/// b3 = ½k‖Ĵ‖ + λ_max(K)
/// b2 = ½k²‖Ĵ‖
/// b1 = 2b2ρ0 + ½k²‖Ĵ‖ + 3kρ_v‖Ĵ‖ + a1
/// b0 = b2ρ0² + ½k(ρ_w + 2ρ_qρ_v)‖Ĵ‖ + 3kρ_vρ0‖Ĵ‖ + λ_max(K)ρ_s
///      + a1(ρ0 + γ) + a0 + (ρ_v² + ρ_a)‖Ĵ‖ + ρ̂_d
/// ```
pub fn b_coefficients(
    budget: &UncertaintyBudget,
    gains: &ControllerGains,
    robust: &RobustCoefficients,
) -> [f64; 4] {
    let b = budget;
    let k = gains.k;
    let nj = b.j_hat_norm;
    let r0 = b.rho_0();
    let lmax = gains.feedback_eigen_bounds().1;
    let b3 = 0.5 * k * nj + lmax;
    let b2 = 0.5 * k * k * nj;
    let b1 = 2.0 * b2 * r0 + 0.5 * k * k * nj + 3.0 * k * b.rho_v * nj + robust.a1;
    let b0 = b2 * r0 * r0
        + 0.5 * k * (b.rho_w + 2.0 * b.rho_q * b.rho_v) * nj
        + 3.0 * k * b.rho_v * r0 * nj
        + lmax * b.rho_s(k)
        + robust.a1 * (r0 + gains.gamma)
        + robust.a0
        + (b.rho_v * b.rho_v + b.rho_a) * nj
        + b.rho_d_hat;
    [b0, b1, b2, b3]
}

/// One recorded iterate `(s̄i, q̄i)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundIterate {
    pub s: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loop2Status {
    Converged,
    NotActivated,
    Disabled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTrace {
    pub eta: f64,
    pub loop1: Vec<BoundIterate>,
    pub loop2: Vec<BoundIterate>,
    pub loop2_status: Loop2Status,
    pub s_inf: f64,
    pub q_inf: f64,
    pub s_inf_prime: Option<f64>,
    pub q_inf_prime: Option<f64>,
    /// Final bound on `‖s‖`.
    pub s_final: f64,
    /// Final bound on `‖q_e,v‖`.
    pub q_final: f64,
    /// `2 s_final`, rad/s.
    pub omega_bound: f64,
    /// `2 asin(min(q_final, 1))`, rad.
    pub theta_bound: f64,
}

impl BoundTrace {
    pub fn total_iterations(&self) -> usize {
        self.loop1.len() + self.loop2.len()
    }
}

/// The scalar model behind the two loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPredictor {
    pub coeffs: BoundCoefficients,
    pub gains: ControllerGains,
    pub budget: UncertaintyBudget,
    lambda_max_k: f64,
    /// `sqrt(λ_r/λ_l)`
    spread: f64,
}

impl BoundPredictor {
    pub fn new(
        budget: &UncertaintyBudget,
        gains: &ControllerGains,
        robust: &RobustCoefficients,
    ) -> Result<Self, BoundError> {
        budget.validate()?;
        let (lmin, lmax) = gains.feedback_eigen_bounds();
        let [b0, b1, b2, b3] = b_coefficients(budget, gains, robust);
        let kappa = lmin - robust.a3 - budget.rho_e * b3;
        let kappa_prime = kappa + (robust.a1 * gains.gamma + robust.a0) / gains.epsilon;
        Ok(Self {
            coeffs: BoundCoefficients {
                rho_0: budget.rho_0(),
                rho_s: budget.rho_s(gains.k),
                a0: robust.a0,
                a1: robust.a1,
                a2: robust.a2,
                a3: robust.a3,
                b0,
                b1,
                b2,
                b3,
                kappa,
                kappa_prime,
            },
            gains: *gains,
            budget: *budget,
            lambda_max_k: lmax,
            spread: (budget.lambda_r / budget.lambda_l).sqrt(),
        })
    }

    /// Uses coefficients computed from the budget.
    pub fn from_budget(
        budget: &UncertaintyBudget,
        gains: &ControllerGains,
    ) -> Result<Self, BoundError> {
        Self::new(budget, gains, &robust_coefficients(budget, gains.k))
    }

    pub fn gain_report(&self) -> GainReport {
        let robust = RobustCoefficients {
            a0: self.coeffs.a0,
            a1: self.coeffs.a1,
            a2: self.coeffs.a2,
            a3: self.coeffs.a3,
        };
        check_gain_conditions(&self.gains, &robust, &self.budget)
    }

    /// Outside-layer bound function.
    ///
    /// ```text
    /// φ1(x, y) = (a2 + ρ_E b2)x² + [2ε⁻¹a1(ρ_s + y) + ρ_E b1]x
    ///          + 2ε⁻¹(ρ_s + y)[a1(γ + ρ0 + y) + a0] + ρ_E b0
    ///          + (2 + λ_max(K) + a1)y - (a1γ - a1ρ0 - λ_max(K)ρ_s)
    /// ```
    pub fn phi1(&self, x: f64, y: f64) -> f64 {
        let c = &self.coeffs;
        let (eps, gam, re, lmax) = (
            self.gains.epsilon,
            self.gains.gamma,
            self.budget.rho_e,
            self.lambda_max_k,
        );
        (c.a2 + re * c.b2) * x * x
            + (2.0 / eps * c.a1 * (c.rho_s + y) + re * c.b1) * x
            + 2.0 / eps * (c.rho_s + y) * (c.a1 * (gam + c.rho_0 + y) + c.a0)
            + re * c.b0
            + (2.0 + lmax + c.a1) * y
            - (c.a1 * gam - c.a1 * c.rho_0 - lmax * c.rho_s)
    }

    /// Inside-layer bound function.
    ///
    /// ```text
    /// φ2(x, y) = (a2 + ρ_E b2)x² + [ε⁻¹a1(ρ_s + y) + a1 + ρ_E b1]x
    ///          + ε⁻¹(ρ_s + y)[a1(γ + ρ0 + y) + a0] + a0 + ρ_E b0
    ///          + λ_max(K)(ρ_s + y) + 2y
    /// ```
    pub fn phi2(&self, x: f64, y: f64) -> f64 {
        let c = &self.coeffs;
        let (eps, gam, re, lmax) = (
            self.gains.epsilon,
            self.gains.gamma,
            self.budget.rho_e,
            self.lambda_max_k,
        );
        (c.a2 + re * c.b2) * x * x
            + (1.0 / eps * c.a1 * (c.rho_s + y) + c.a1 + re * c.b1) * x
            + 1.0 / eps * (c.rho_s + y) * (c.a1 * (gam + c.rho_0 + y) + c.a0)
            + c.a0
            + re * c.b0
            + lmax * (c.rho_s + y)
            + 2.0 * y
    }

    pub fn phi_bar(&self, x: f64, y: f64) -> f64 {
        self.phi1(x, y).max(self.phi2(x, y))
    }

    fn iterate(
        &self,
        start: f64,
        eta: f64,
        which: u8,
        step: impl Fn(f64) -> f64,
    ) -> Result<Vec<BoundIterate>, BoundError> {
        let k = self.gains.k;
        let mut q = start;
        let mut out = Vec::new();
        while out.len() < MAX_ITERATIONS {
            let s = step(q);
            let next = s / k;
            out.push(BoundIterate { s, q: next });
            if (next - q).abs() <= eta {
                return Ok(out);
            }
            q = next;
        }
        Err(BoundError::NotConverged { which })
    }
}

fn check_eta(eta: f64) -> Result<(), BoundError> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(BoundError::InvalidEta(eta))
    }
}

/// Loop 1 from `q̄0 = 1` with `φ̄` and `κ`.
pub fn loop1_iterate(p: &BoundPredictor, eta: f64) -> Result<Vec<BoundIterate>, BoundError> {
    check_eta(eta)?;
    let kappa = p.coeffs.kappa;
    if !(kappa > 0.0) {
        return Err(BoundError::GainConditionViolated { kappa });
    }
    let step = |q: f64| p.spread * p.phi_bar(q, 0.0) / kappa;
    let q1 = step(1.0) / p.gains.k;
    if q1 >= 1.0 {
        return Err(BoundError::NotContractive { q1 });
    }
    p.iterate(1.0, eta, 1, step)
}

/// Loop 2 from the loop-1 limit with `φ2` and `κ'`; requires
/// `s̄∞ + ρ_s < ε`.
pub fn loop2_iterate(
    p: &BoundPredictor,
    loop1_limit: BoundIterate,
    eta: f64,
) -> Result<Vec<BoundIterate>, BoundError> {
    check_eta(eta)?;
    let value = loop1_limit.s + p.coeffs.rho_s;
    if !(value < p.gains.epsilon) {
        return Err(BoundError::NotActivated { value });
    }
    let kp = p.coeffs.kappa_prime;
    p.iterate(loop1_limit.q, eta, 2, |q| p.spread * p.phi2(q, 0.0) / kp)
}

/// Runs loop 1 then, if enabled and activated, loop 2.
pub fn predict_with(
    p: &BoundPredictor,
    eta: f64,
    use_loop2: bool,
) -> Result<BoundTrace, BoundError> {
    let loop1 = loop1_iterate(p, eta)?;
    let limit = *loop1.last().expect("loop 1 records at least one iterate");
    let (loop2, status) = if !use_loop2 {
        (Vec::new(), Loop2Status::Disabled)
    } else {
        match loop2_iterate(p, limit, eta) {
            Ok(v) => (v, Loop2Status::Converged),
            Err(BoundError::NotActivated { .. }) => (Vec::new(), Loop2Status::NotActivated),
            Err(e) => return Err(e),
        }
    };
    let last2 = loop2.last().copied();
    let fin = last2.unwrap_or(limit);
    Ok(BoundTrace {
        eta,
        loop1,
        loop2,
        loop2_status: status,
        s_inf: limit.s,
        q_inf: limit.q,
        s_inf_prime: last2.map(|b| b.s),
        q_inf_prime: last2.map(|b| b.q),
        s_final: fin.s,
        q_final: fin.q,
        omega_bound: 2.0 * fin.s,
        theta_bound: 2.0 * fin.q.min(1.0).asin(),
    })
}

/// Full prediction with coefficients computed from the budget.
pub fn predict(
    budget: &UncertaintyBudget,
    gains: &ControllerGains,
    eta: f64,
) -> Result<BoundTrace, BoundError> {
    predict_with(&BoundPredictor::from_budget(budget, gains)?, eta, true)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub gains: ControllerGains,
    pub gain_ok: bool,
    pub kappa: f64,
    pub q_bound: Option<f64>,
    pub omega_bound: Option<f64>,
    pub theta_bound: Option<f64>,
    pub loop1_iterations: usize,
    pub loop2_iterations: usize,
    pub error: Option<String>,
}

/// Evaluates the prediction over a list of gain sets. Rows are sorted by
/// `q_bound`, failed rows last, ties keeping grid order.
pub fn gain_sweep(budget: &UncertaintyBudget, grid: &[ControllerGains], eta: f64) -> Vec<SweepRow> {
    let mut rows: Vec<SweepRow> = grid
        .par_iter()
        .map(|g| {
            let robust = robust_coefficients(budget, g.k);
            let gain_ok = check_gain_conditions(g, &robust, budget).passed();
            let predictor = BoundPredictor::new(budget, g, &robust);
            let kappa = predictor
                .as_ref()
                .map(|p| p.coeffs.kappa)
                .unwrap_or(f64::NAN);
            let result = predictor.and_then(|p| predict_with(&p, eta, true));
            match result {
                Ok(t) => SweepRow {
                    gains: *g,
                    gain_ok,
                    kappa,
                    q_bound: Some(t.q_final),
                    omega_bound: Some(t.omega_bound),
                    theta_bound: Some(t.theta_bound),
                    loop1_iterations: t.loop1.len(),
                    loop2_iterations: t.loop2.len(),
                    error: None,
                },
                Err(e) => SweepRow {
                    gains: *g,
                    gain_ok,
                    kappa,
                    q_bound: None,
                    omega_bound: None,
                    theta_bound: None,
                    loop1_iterations: 0,
                    loop2_iterations: 0,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    rows.sort_by(|a, b| match (a.q_bound, b.q_bound) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    rows
}
