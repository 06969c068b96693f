//! Monte Carlo campaigns, steady-state statistics and bound verification.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{predict_with, BoundTrace};
use crate::estimation::tail_start;

use super::scenario::Scenario;
use super::sim::{run_scenario, RunTrace};
use super::HarnessError;

/// Seed of instance `index` in a campaign seeded with `seed`.
pub fn instance_seed(seed: u64, index: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.next_u64()
}

/// Maxima over the tail of a run. Angles and rates are in rad and rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SteadyStateStats {
    pub theta_e_max: f64,
    pub omega_e_max: f64,
    pub q_e_max: f64,
    pub s_max: f64,
    pub q_tilde_max: f64,
    pub w_tilde_max: f64,
}

pub fn steady_state_stats(
    trace: &RunTrace,
    tail_fraction: f64,
) -> Result<SteadyStateStats, HarnessError> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(HarnessError::InvalidTailFraction(tail_fraction));
    }
    let start = tail_start(trace.samples.len(), tail_fraction);
    let tail = &trace.samples[start..];
    if tail.is_empty() {
        return Err(HarnessError::EmptyTail);
    }
    Ok(tail
        .iter()
        .fold(SteadyStateStats::default(), |a, s| SteadyStateStats {
            theta_e_max: a.theta_e_max.max(s.theta_e),
            omega_e_max: a.omega_e_max.max(s.omega_e.norm()),
            q_e_max: a.q_e_max.max(s.qe.vector().norm()),
            s_max: a.s_max.max(s.s_norm),
            q_tilde_max: a.q_tilde_max.max(s.q_tilde_norm),
            w_tilde_max: a.w_tilde_max.max(s.w_tilde_norm),
        }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub index: usize,
    pub seed: u64,
    pub stats: Option<SteadyStateStats>,
    /// Largest `‖s‖` over the whole run divided by its initial value.
    pub s_growth: Option<f64>,
    pub error: Option<String>,
}

/// Predicted bounds in rad and rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictedBounds {
    pub theta_e: f64,
    pub omega_e: f64,
    pub q_e: f64,
}

impl From<&BoundTrace> for PredictedBounds {
    fn from(t: &BoundTrace) -> Self {
        Self {
            theta_e: t.theta_bound,
            omega_e: t.omega_bound,
            q_e: t.q_final,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub scenario: String,
    pub seed: u64,
    pub tail_fraction: f64,
    pub instances: Vec<InstanceSummary>,
    /// Maxima over all successful instances.
    pub max: SteadyStateStats,
    pub failed: usize,
}

/// Runs `n` independent instances in parallel; results are in index order
/// regardless of scheduling.
pub fn run_campaign(scenario: &Scenario, n: usize) -> Result<CampaignSummary, HarnessError> {
    run_campaign_with(scenario, n, |_, _| Ok(()))
}

/// As [`run_campaign`], handing each finished trace to `sink` before it is
/// dropped.
pub fn run_campaign_with<F>(
    scenario: &Scenario,
    n: usize,
    sink: F,
) -> Result<CampaignSummary, HarnessError>
where
    F: Fn(usize, &RunTrace) -> Result<(), HarnessError> + Sync,
{
    if n == 0 {
        return Err(HarnessError::Invalid(
            "campaign needs at least one instance".into(),
        ));
    }
    scenario.validate()?;
    let tail = scenario.tail_fraction;
    let instances: Vec<InstanceSummary> = (0..n)
        .into_par_iter()
        .map(|index| {
            let seed = instance_seed(scenario.seed, index);
            let result = run_scenario(scenario, seed).and_then(|trace| {
                sink(index, &trace)?;
                let stats = steady_state_stats(&trace, tail)?;
                let s0 = trace.samples[0].s_norm;
                let smax = trace.samples.iter().map(|s| s.s_norm).fold(0.0, f64::max);
                Ok((stats, if s0 > 0.0 { smax / s0 } else { f64::INFINITY }))
            });
            match result {
                Ok((stats, growth)) => InstanceSummary {
                    index,
                    seed,
                    stats: Some(stats),
                    s_growth: Some(growth),
                    error: None,
                },
                Err(e) => InstanceSummary {
                    index,
                    seed,
                    stats: None,
                    s_growth: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let max = instances
        .iter()
        .filter_map(|i| i.stats)
        .fold(SteadyStateStats::default(), |a, s| SteadyStateStats {
            theta_e_max: a.theta_e_max.max(s.theta_e_max),
            omega_e_max: a.omega_e_max.max(s.omega_e_max),
            q_e_max: a.q_e_max.max(s.q_e_max),
            s_max: a.s_max.max(s.s_max),
            q_tilde_max: a.q_tilde_max.max(s.q_tilde_max),
            w_tilde_max: a.w_tilde_max.max(s.w_tilde_max),
        });
    let failed = instances.iter().filter(|i| i.error.is_some()).count();
    Ok(CampaignSummary {
        scenario: scenario.name.clone(),
        seed: scenario.seed,
        tail_fraction: tail,
        instances,
        max,
        failed,
    })
}

/// Predicted bound over observed tail maximum, per quantity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub theta_e: f64,
    pub omega_e: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub predicted: PredictedBounds,
    pub bound_trace: BoundTrace,
    pub campaign: CampaignSummary,
    pub margins: Margins,
}

/// Predicts the bounds, runs the campaign and checks that every instance's
/// tail maxima lie within them.
pub fn verify(scenario: &Scenario, n: usize, eta: f64) -> Result<VerifyReport, HarnessError> {
    let predictor = scenario.predictor()?;
    let bound_trace = predict_with(&predictor, eta, true)?;
    let predicted = PredictedBounds::from(&bound_trace);
    let campaign = run_campaign(scenario, n)?;
    for inst in &campaign.instances {
        let Some(stats) = inst.stats else {
            return Err(HarnessError::InstanceFailed {
                instance: inst.index,
                message: inst.error.clone().unwrap_or_default(),
            });
        };
        for (quantity, observed, bound) in [
            ("theta_e", stats.theta_e_max, predicted.theta_e),
            ("omega_e", stats.omega_e_max, predicted.omega_e),
        ] {
            if observed > bound {
                return Err(HarnessError::BoundViolated {
                    instance: inst.index,
                    quantity,
                    observed,
                    bound,
                });
            }
        }
    }
    let ratio = |b: f64, o: f64| if o > 0.0 { b / o } else { f64::INFINITY };
    let margins = Margins {
        theta_e: ratio(predicted.theta_e, campaign.max.theta_e_max),
        omega_e: ratio(predicted.omega_e, campaign.max.omega_e_max),
    };
    Ok(VerifyReport {
        predicted,
        bound_trace,
        campaign,
        margins,
    })
}
