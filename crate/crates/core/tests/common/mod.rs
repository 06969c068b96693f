#![allow(dead_code)]

use attitude_ftc::actuation::ActuatorBank;
use attitude_ftc::bounds::{predict, BoundTrace, UncertaintyBudget};
use attitude_ftc::controller::{robust_term, ControllerGains, RobustCoefficients};
use attitude_ftc::dynamics::{
    j_s_dot, propagate_attitude, rk4_step, tracking_errors, DesiredState, InertiaMatrix,
    SpacecraftState,
};
use attitude_ftc::profile::{TimeProfile, VecProfile};
use attitude_ftc::so3::{error_matrices, Mat3, UnitQuaternion, Vec3};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type PropResult = Result<(), TestCaseError>;

pub fn raw_product(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    [
        a[0] * b[0] - a[1] * b[1] - a[2] * b[2] - a[3] * b[3],
        a[0] * b[1] + a[1] * b[0] + a[2] * b[3] - a[3] * b[2],
        a[0] * b[2] - a[1] * b[3] + a[2] * b[0] + a[3] * b[1],
        a[0] * b[3] + a[1] * b[2] - a[2] * b[1] + a[3] * b[0],
    ]
}

pub fn norm4(a: [f64; 4]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

// ---------------------------------------------------------------- strategies

pub fn arb_quat() -> impl Strategy<Value = UnitQuaternion> {
    prop::array::uniform4(-1.0..1.0f64)
        .prop_filter("non-degenerate", |a| norm4(*a) > 0.1)
        .prop_map(|a| UnitQuaternion::from_array(a).unwrap())
}

pub fn arb_vec3(scale: f64) -> impl Strategy<Value = Vec3> {
    prop::array::uniform3(-scale..scale).prop_map(|[x, y, z]| Vec3::new(x, y, z))
}

/// Four-thruster bank with health estimates bounded away from zero.
pub fn arb_allocation() -> impl Strategy<Value = (Vec<f64>, Vec3)> {
    (prop::collection::vec(0.2..1.0f64, 4), arb_vec3(0.05))
}

/// Budgets and gains spread around the reference mission values.
pub fn arb_budget_gains() -> impl Strategy<Value = (UncertaintyBudget, ControllerGains)> {
    (
        prop::array::uniform8(0.3..3.0f64),
        0.0..0.1f64,
        0.1..0.3f64,
        0.5..2.0f64,
        0.005..0.05f64,
        0.005..0.05f64,
    )
        .prop_map(|(m, rho_e, k, kk, epsilon, gamma)| {
            let budget = UncertaintyBudget {
                rho_q: 2.15e-5 * m[0],
                rho_w: 1.56e-5 * m[1],
                rho_j: 0.5 * m[2],
                rho_d: 3e-6 * m[3],
                rho_d_hat: 3e-6 * m[4],
                lambda_l: 6.0,
                lambda_r: 8.5,
                rho_v: 0.0022 * m[5],
                rho_a: 2.2e-6 * m[6],
                rho_e: rho_e * m[7] / 3.0,
                j_hat_norm: 8.0,
            };
            let gains = ControllerGains::new(k, Mat3::identity() * kk, epsilon, gamma).unwrap();
            (budget, gains)
        })
}

pub const BUDGET_COMPONENTS: [&str; 8] = [
    "rho_q",
    "rho_w",
    "rho_j",
    "rho_d",
    "rho_d_hat",
    "rho_v",
    "rho_a",
    "rho_e",
];

pub fn enlarge(b: &UncertaintyBudget, component: usize, factor: f64) -> UncertaintyBudget {
    let mut e = *b;
    let f = match component {
        0 => &mut e.rho_q,
        1 => &mut e.rho_w,
        2 => &mut e.rho_j,
        3 => &mut e.rho_d,
        4 => &mut e.rho_d_hat,
        5 => &mut e.rho_v,
        6 => &mut e.rho_a,
        _ => &mut e.rho_e,
    };
    *f *= factor;
    e
}

// ------------------------------------------------------------------ properties

pub fn quaternion_closure(a: UnitQuaternion, b: UnitQuaternion, omega: Vec3) -> PropResult {
    let raw = raw_product(a.to_array(), b.to_array());
    prop_assert!((norm4(raw) - 1.0).abs() <= 1e-12);
    let p = (a * b).to_array();
    for i in 0..4 {
        prop_assert!((p[i] - raw[i]).abs() <= 1e-12);
    }
    prop_assert!((a.inverse().norm() - 1.0).abs() <= 1e-12);
    let j = InertiaMatrix::diag(8.0, 7.0, 6.0).unwrap();
    let mut st = SpacecraftState { q: a, omega };
    for i in 0..50 {
        st = rk4_step(&st, i as f64 * 0.1, 0.1, &j, |_, _| Vec3::ZERO).unwrap();
        prop_assert!((st.q.norm() - 1.0).abs() <= 1e-12);
    }
    Ok(())
}

pub fn error_matrix_norms(qt: UnitQuaternion) -> PropResult {
    let m = error_matrices(&qt);
    let expected = (2.0 * (1.0 - qt.scalar())).sqrt();
    prop_assert!(
        (m.m_norm() - expected).abs() <= 1e-10,
        "M {} vs {}",
        m.m_norm(),
        expected
    );
    prop_assert!(
        (m.e_norm() - expected).abs() <= 1e-10,
        "E {} vs {}",
        m.e_norm(),
        expected
    );
    Ok(())
}

pub fn rotation_deviation(qt: UnitQuaternion) -> PropResult {
    let d = Mat3::identity() - qt.rotation_matrix().transpose();
    let bound = 2.0 * qt.vector().norm();
    prop_assert!(d.spectral_norm() <= bound * (1.0 + 1e-12) + 1e-15);
    Ok(())
}

pub fn allocation_consistency(e_hat: &[f64], u: Vec3) -> PropResult {
    let bank = ActuatorBank::four_pair_skewed(f64::INFINITY);
    let tau = bank.allocate(e_hat, u).unwrap();
    let back = bank.effective_torque(e_hat, &tau);
    prop_assert!((back - u).norm() <= 1e-10);
    Ok(())
}

/// `τᵀ Ê⁻¹ τ` at the allocated command is no larger than at `alternatives`
/// random points of the same feasible set `{τ : D Ê τ = u}`.
pub fn allocation_cost_dominance(
    e_hat: &[f64],
    u: Vec3,
    seed: u64,
    alternatives: usize,
) -> PropResult {
    let bank = ActuatorBank::four_pair_skewed(f64::INFINITY);
    let tau = bank.allocate(e_hat, u).unwrap();
    let cost = |t: &[f64]| {
        t.iter()
            .zip(e_hat)
            .map(|(ti, ei)| ti * ti / ei)
            .sum::<f64>()
    };
    let base = cost(&tau);
    // Columns of A = D Ê; null-space directions via projection.
    let cols: Vec<Vec3> = bank
        .columns()
        .iter()
        .zip(e_hat)
        .map(|(d, e)| *d * *e)
        .collect();
    let gram = cols.iter().fold(Mat3::zeros(), |g, c| g + c.outer(c));
    let gram_inv = gram.inverse(1e-14).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..alternatives {
        let w: Vec<f64> = (0..4).map(|_| rng.random_range(-0.1..0.1)).collect();
        let aw = cols
            .iter()
            .zip(&w)
            .fold(Vec3::ZERO, |acc, (c, wi)| acc + *c * *wi);
        let lam = gram_inv * aw;
        let alt: Vec<f64> = tau
            .iter()
            .zip(&cols)
            .zip(&w)
            .map(|((t, c), wi)| t + wi - c.dot(&lam))
            .collect();
        let feas = cols
            .iter()
            .zip(&alt)
            .fold(Vec3::ZERO, |acc, (c, a)| acc + *c * *a);
        prop_assert!((feas - u).norm() <= 1e-10);
        prop_assert!(cost(&alt) >= base * (1.0 - 1e-12));
    }
    Ok(())
}

pub fn robust_term_continuity(
    direction: Vec3,
    q_hat_e: UnitQuaternion,
    coeffs: RobustCoefficients,
) -> PropResult {
    let Some(n) = direction.normalized() else {
        return Ok(());
    };
    let (gamma, epsilon) = (0.01, 0.01);
    let inside = robust_term(
        n * (epsilon * (1.0 - 1e-15)),
        &q_hat_e,
        &coeffs,
        gamma,
        epsilon,
    );
    let on = robust_term(n * epsilon, &q_hat_e, &coeffs, gamma, epsilon);
    let outside = robust_term(
        n * (epsilon * (1.0 + 1e-15)),
        &q_hat_e,
        &coeffs,
        gamma,
        epsilon,
    );
    prop_assert!((inside - on).norm() < 1e-14);
    prop_assert!((outside - on).norm() < 1e-14);
    prop_assert!((outside - inside).norm() < 1e-14);
    Ok(())
}

pub fn arb_robust_coefficients() -> impl Strategy<Value = RobustCoefficients> {
    (0.0..0.05f64, 0.0..1e-4f64).prop_map(|(a1, a0)| RobustCoefficients {
        a0,
        a1,
        a2: 0.0,
        a3: 0.0,
    })
}

fn strictly_decreasing(seq: &[f64]) -> bool {
    seq.windows(2).all(|w| w[1] < w[0])
}

pub fn bound_sequences_decrease(budget: &UncertaintyBudget, gains: &ControllerGains) -> PropResult {
    let Ok(t) = predict(budget, gains, 1e-6) else {
        return Err(TestCaseError::reject("prediction not applicable"));
    };
    let q1: Vec<f64> = std::iter::once(1.0)
        .chain(t.loop1.iter().map(|b| b.q))
        .collect();
    let s1: Vec<f64> = t.loop1.iter().map(|b| b.s).collect();
    prop_assert!(strictly_decreasing(&q1), "loop 1 q {:?}", q1);
    prop_assert!(strictly_decreasing(&s1), "loop 1 s {:?}", s1);
    if !t.loop2.is_empty() {
        let q2: Vec<f64> = std::iter::once(t.q_inf)
            .chain(t.loop2.iter().map(|b| b.q))
            .collect();
        let s2: Vec<f64> = std::iter::once(t.s_inf)
            .chain(t.loop2.iter().map(|b| b.s))
            .collect();
        prop_assert!(strictly_decreasing(&q2), "loop 2 q {:?}", q2);
        prop_assert!(strictly_decreasing(&s2), "loop 2 s {:?}", s2);
    }
    Ok(())
}

/// Enlarging one component never shrinks the final bounds. A prediction that
/// stops applying counts as an unbounded result.
pub fn budget_monotonicity(
    budget: &UncertaintyBudget,
    gains: &ControllerGains,
    component: usize,
    factor: f64,
) -> PropResult {
    let eta = 1e-10;
    let Ok(base) = predict(budget, gains, eta) else {
        return Err(TestCaseError::reject("prediction not applicable"));
    };
    let bigger = enlarge(budget, component, factor);
    let Ok(big) = predict(&bigger, gains, eta) else {
        return Ok(());
    };
    let tol = 10.0 * eta;
    let name = BUDGET_COMPONENTS[component];
    prop_assert!(
        big.q_final >= base.q_final - tol,
        "{name} x{factor}: q bound {} -> {}",
        base.q_final,
        big.q_final
    );
    prop_assert!(
        big.s_final >= base.s_final - tol * gains.k,
        "{name} x{factor}: s bound {} -> {}",
        base.s_final,
        big.s_final
    );
    Ok(())
}

pub fn final_bounds(t: &BoundTrace) -> (f64, f64) {
    (t.q_final, t.s_final)
}

// ------------------------------------------------------ finite-difference oracle

/// A random state, desired trajectory and torque history for the sliding-rate check.
pub struct FlowConfig {
    pub j: InertiaMatrix,
    pub state: SpacecraftState,
    pub qd: UnitQuaternion,
    pub rates: VecProfile,
    pub disturbance: VecProfile,
    pub tau_c: Vec3,
    pub k: f64,
    pub t0: f64,
}

fn random_profile(rng: &mut ChaCha8Rng, amp: f64) -> VecProfile {
    let mut comp = || {
        let a = rng.random_range(-amp..amp);
        let off = rng.random_range(-amp..amp);
        let f = rng.random_range(0.05..1.0);
        if rng.random_bool(0.5) {
            TimeProfile::sine(off, a, f)
        } else {
            TimeProfile::cosine(off, a, f)
        }
    };
    VecProfile([comp(), comp(), comp()])
}

fn random_quat(rng: &mut ChaCha8Rng) -> UnitQuaternion {
    loop {
        let a: [f64; 4] = std::array::from_fn(|_| rng.random_range(-1.0..1.0));
        if norm4(a) > 0.1 {
            return UnitQuaternion::from_array(a).unwrap();
        }
    }
}

fn random_vec(rng: &mut ChaCha8Rng, s: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-s..s),
        rng.random_range(-s..s),
        rng.random_range(-s..s),
    )
}

pub fn random_flow_config(rng: &mut ChaCha8Rng) -> FlowConfig {
    let off = random_vec(rng, 0.3);
    let j = InertiaMatrix::new(Mat3([
        [rng.random_range(5.0..15.0), off.x, off.y],
        [off.x, rng.random_range(5.0..15.0), off.z],
        [off.y, off.z, rng.random_range(5.0..15.0)],
    ]))
    .unwrap();
    FlowConfig {
        j,
        state: SpacecraftState {
            q: random_quat(rng),
            omega: random_vec(rng, 0.2),
        },
        qd: random_quat(rng),
        rates: random_profile(rng, 0.05),
        disturbance: random_profile(rng, 0.01),
        tau_c: random_vec(rng, 0.05),
        k: rng.random_range(0.05..1.0),
        t0: rng.random_range(0.0..100.0),
    }
}

/// Relative error between the analytic `J ṡ` and a five-point central
/// difference of `J s` along the integrated flow.
pub fn sliding_rate_fd_error(c: &FlowConfig, h: f64) -> f64 {
    sliding_rate_fd_error_with(c, h, c.tau_c)
}

/// As [`sliding_rate_fd_error`] with `model_tau_c` on the analytic side.
pub fn sliding_rate_fd_error_with(c: &FlowConfig, h: f64, model_tau_c: Vec3) -> f64 {
    let mut body = c.state;
    let mut qd = c.qd;
    let mut js = [Vec3::ZERO; 5];
    let mut analytic = Vec3::ZERO;
    for (i, slot) in js.iter_mut().enumerate() {
        let t = c.t0 + i as f64 * h;
        let desired = DesiredState {
            qd,
            omega_d: c.rates.eval(t),
            omega_d_dot: c.rates.derivative(t),
        };
        let err = tracking_errors(&body, &desired, c.k);
        *slot = *c.j.matrix() * err.s;
        if i == 2 {
            analytic = j_s_dot(
                &c.j,
                &err,
                &desired,
                c.k,
                model_tau_c,
                c.disturbance.eval(t),
            );
        }
        body = rk4_step(&body, t, h, &c.j, |tt, _| c.tau_c + c.disturbance.eval(tt)).unwrap();
        qd = propagate_attitude(&qd, t, h, |tt| c.rates.eval(tt));
    }
    let fd = (js[0] - js[1] * 8.0 + js[3] * 8.0 - js[4]) * (1.0 / (12.0 * h));
    (fd - analytic).norm() / analytic.norm()
}

/// Largest relative error over `n` random configurations.
pub fn sliding_rate_fd_max_error(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| sliding_rate_fd_error(&random_flow_config(&mut rng), 1e-3))
        .fold(0.0, f64::max)
}
