mod common;

use attitude_ftc::bounds::predict;
use attitude_ftc::controller::robust_term;
use attitude_ftc::dynamics::{tracking_errors, xi_matrix, DesiredState, SpacecraftState};
use attitude_ftc::harness::{run_scenario, Scenario};
use attitude_ftc::so3::Vec3;
use common::*;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn quaternion_norm_is_preserved(a in arb_quat(), b in arb_quat(), w in arb_vec3(0.5)) {
        quaternion_closure(a, b, w)?;
    }

    #[test]
    fn error_matrix_norms_match_closed_form(qt in arb_quat()) {
        error_matrix_norms(qt)?;
    }

    #[test]
    fn rotation_deviation_bounded_by_vector_part(qt in arb_quat()) {
        rotation_deviation(qt)?;
    }

    #[test]
    fn allocation_reproduces_virtual_control((e_hat, u) in arb_allocation()) {
        allocation_consistency(&e_hat, u)?;
    }

    #[test]
    fn allocation_minimizes_weighted_cost((e_hat, u) in arb_allocation(), seed in any::<u64>()) {
        allocation_cost_dominance(&e_hat, u, seed, 1000)?;
    }

    #[test]
    fn robust_term_continuous_across_layer(
        dir in arb_vec3(1.0),
        q in arb_quat(),
        c in arb_robust_coefficients(),
    ) {
        robust_term_continuity(dir, q, c)?;
    }

    #[test]
    fn robust_term_magnitude(
        s in arb_vec3(0.03),
        q in arb_quat(),
        c in arb_robust_coefficients(),
    ) {
        let (gamma, eps) = (0.01, 0.01);
        let m = c.a1 * (q.vector().norm() + gamma) + c.a0;
        let u = robust_term(s, &q, &c, gamma, eps).norm();
        prop_assert!(u <= m * (1.0 + 1e-12));
        if s.norm() >= eps {
            prop_assert!((u - m).abs() <= 1e-12 * m.max(1e-300));
        }
    }

    #[test]
    fn sliding_variable_annihilates_xi(
        q in arb_quat(),
        qd in arb_quat(),
        w in arb_vec3(0.3),
        wd in arb_vec3(0.3),
        k in 0.01..1.0f64,
    ) {
        let desired = DesiredState { qd, omega_d: wd, omega_d_dot: Vec3::ZERO };
        let err = tracking_errors(&SpacecraftState { q, omega: w }, &desired, k);
        let j = attitude_ftc::so3::Mat3([[8.0, 0.15, -0.27], [0.15, 6.75, -0.1], [-0.27, -0.1, 6.25]]);
        let v = err.s.dot(&(xi_matrix(&j, err.omega_e, err.omega_bar_d) * err.s));
        prop_assert!(v.abs() <= 1e-14);
    }

    #[test]
    fn tracking_error_recomposes(q in arb_quat(), qd in arb_quat(), wd in arb_vec3(0.3)) {
        let desired = DesiredState { qd, omega_d: wd, omega_d_dot: Vec3::ZERO };
        let err = tracking_errors(&SpacecraftState { q, omega: Vec3::ZERO }, &desired, 0.2);
        let back = (qd * err.qe).to_array();
        let q = q.to_array();
        for i in 0..4 {
            prop_assert!((back[i] - q[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn bound_sequences_strictly_decrease((budget, gains) in arb_budget_gains()) {
        bound_sequences_decrease(&budget, &gains)?;
    }

    #[test]
    fn bounds_monotone_in_budget(
        (budget, gains) in arb_budget_gains(),
        component in 0usize..8,
        factor in 1.01..3.0f64,
    ) {
        budget_monotonicity(&budget, &gains, component, factor)?;
    }

    #[test]
    fn loop2_never_loosens_loop1((budget, gains) in arb_budget_gains()) {
        let Ok(t) = predict(&budget, &gains, 1e-6) else {
            return Err(TestCaseError::reject("prediction not applicable"));
        };
        prop_assert!(t.q_final <= t.q_inf);
        prop_assert!(t.s_final <= t.s_inf);
    }

    #[test]
    fn fixed_point_residual((budget, gains) in arb_budget_gains(), eta_exp in 4.0..10.0f64) {
        let eta = 10f64.powf(-eta_exp);
        let Ok(t) = predict(&budget, &gains, eta) else {
            return Err(TestCaseError::reject("prediction not applicable"));
        };
        let seq: Vec<f64> = std::iter::once(1.0).chain(t.loop1.iter().map(|b| b.q)).collect();
        let n = seq.len();
        prop_assert!((seq[n - 1] - seq[n - 2]).abs() <= eta);
        if let Some(last) = t.loop2.len().checked_sub(1) {
            let prev = if last == 0 { t.q_inf } else { t.loop2[last - 1].q };
            prop_assert!((t.loop2[last].q - prev).abs() <= eta);
        }
    }
}

#[test]
fn prediction_is_deterministic() {
    let s = Scenario::paper_faulty();
    let a = predict(&s.budget(), &s.gains, 1e-6).unwrap();
    let b = predict(&s.budget(), &s.gains, 1e-6).unwrap();
    assert_eq!(a, b);
}

#[test]
fn simulation_is_deterministic() {
    let mut s = Scenario::paper_fault_free();
    s.duration = 5.0;
    let a = run_scenario(&s, 99).unwrap();
    let b = run_scenario(&s, 99).unwrap();
    assert_eq!(a.samples.len(), b.samples.len());
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert_eq!(x.qe, y.qe);
        assert_eq!(x.omega_e, y.omega_e);
        assert_eq!(x.tau_u, y.tau_u);
    }
    let c = run_scenario(&s, 100).unwrap();
    assert_ne!(a.samples[1].qe, c.samples[1].qe);
}
