mod common;

use common::{case_params, denominator_by_hand, polynomial_roots};
use islanddr_core::dynamics::{
    build_state_space, simulate_response, steady_state_deviation, transient_metrics, update_inertia,
    DynamicsError, FrequencyTrace, GridParams, InertiaPolicy,
};
use proptest::prelude::*;

fn any_params() -> impl Strategy<Value = GridParams> {
    (1.0..12.0, 0.2..3.0, 0.01..0.2, 0.05..0.6, 0.2..1.0, prop::bool::ANY, 10.0..1000.0).prop_map(
        |(h, d, r, tg, tt, fifty, s)| GridParams {
            h_inertia: h,
            d_damping: d,
            r_droop: r,
            tau_g: tg,
            tau_t: tt,
            f_nominal: if fifty { 50.0 } else { 60.0 },
            s_base: s,
        },
    )
}

#[test]
fn case_poles_match_root_finder() {
    let p = case_params();
    let model = build_state_space(p).unwrap();
    let den = denominator_by_hand(&p);
    for (a, b) in p.characteristic_polynomial().iter().zip(den) {
        assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
    }
    let roots = polynomial_roots(&den);
    assert!(roots.iter().all(|r| r.re < 0.0));
    // Eigenvalues of A are the roots: check the characteristic polynomial of A at each root.
    for r in &roots {
        let m = |i: usize, j: usize| num_complex::Complex64::new(model.a[i][j], 0.0) - if i == j { *r } else { 0.0.into() };
        let det = m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) - m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0))
            + m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
        assert!(det.norm() < 1e-9, "det(A - rI) = {det} at {r}");
    }
    assert!(model.is_hurwitz());
}

#[test]
fn weak_droop_gain_tends_to_inverse_damping() {
    let p = GridParams { r_droop: 1e9, ..case_params() };
    let g = build_state_space(p).unwrap().dc_gain();
    assert!((g - 1.25).abs() < 1e-6);
}

#[test]
fn zero_step_stays_at_rest() {
    let model = build_state_space(case_params()).unwrap();
    let trace = simulate_response(&model, 0.0, 1e-3, 5.0).unwrap();
    assert!(trace.samples.iter().all(|w| *w == 0.0));
    let m = transient_metrics(&trace, 0.05).unwrap();
    assert_eq!(m.max_deviation_hz, 0.0);
    assert_eq!(m.settling_time_s, 0.0);
}

#[test]
fn hand_evaluated_steady_states() {
    let p = case_params();
    assert!((steady_state_deviation(&p, 0.2).unwrap() + 0.00961538).abs() < 1e-8);
    assert!((steady_state_deviation(&p, 1.0).unwrap() * 60.0 + 2.88462).abs() < 1e-5);
}

#[test]
fn unit_step_peak_exceeds_steady_state() {
    let model = build_state_space(case_params()).unwrap();
    let trace = simulate_response(&model, 1.0, 1e-3, 30.0).unwrap();
    assert!(transient_metrics(&trace, 0.05).unwrap().max_deviation_hz >= 2.88462);
}

#[test]
fn coarse_step_is_rejected() {
    let model = build_state_space(case_params()).unwrap();
    assert!(matches!(simulate_response(&model, 0.1, 0.06, 10.0), Err(DynamicsError::StepTooLarge { .. })));
}

#[test]
fn nonpositive_field_is_named() {
    for (field, p) in [
        ("h_inertia", GridParams { h_inertia: 0.0, ..case_params() }),
        ("r_droop", GridParams { r_droop: -0.05, ..case_params() }),
        ("tau_t", GridParams { tau_t: 0.0, ..case_params() }),
    ] {
        match build_state_space(p) {
            Err(DynamicsError::InvalidParameter { field: f, .. }) => assert_eq!(f, field),
            other => panic!("expected invalid {field}, got {other:?}"),
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn routh_test_agrees_with_roots(p in any_params()) {
        let worst = polynomial_roots(&denominator_by_hand(&p)).iter().map(|r| r.re).fold(f64::MIN, f64::max);
        prop_assume!(worst.abs() > 1e-6);
        prop_assert_eq!(build_state_space(p).unwrap().is_hurwitz(), worst < 0.0);
    }

    #[test]
    fn dc_gain_matches_closed_form(p in any_params()) {
        let g = build_state_space(p).unwrap().dc_gain();
        let analytic = 1.0 / (p.d_damping + 1.0 / p.r_droop);
        prop_assert!(((g - analytic) / analytic).abs() <= 1e-12);
    }

    #[test]
    fn simulation_is_deterministic(dp in -1.0..1.0f64) {
        let model = build_state_space(case_params()).unwrap();
        let a = simulate_response(&model, dp, 1e-3, 3.0).unwrap();
        let b = simulate_response(&model, dp, 1e-3, 3.0).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn metrics_ignore_appended_settled_tail(dp in -1.0..1.0f64, extra in 1usize..5000) {
        let model = build_state_space(case_params()).unwrap();
        let trace = simulate_response(&model, dp, 1e-3, 30.0).unwrap();
        let before = transient_metrics(&trace, 0.05).unwrap();
        let mut samples = trace.samples.clone();
        let last = trace.terminal();
        samples.extend(std::iter::repeat(last).take(extra));
        let longer = FrequencyTrace::new(trace.dt, samples, trace.f_nominal).unwrap();
        let after = transient_metrics(&longer, 0.05).unwrap();
        prop_assert_eq!(before.max_deviation_hz, after.max_deviation_hz);
        prop_assert_eq!(before.settling_time_s, after.settling_time_s);
        prop_assert!(before.max_deviation_hz >= before.steady_state_deviation_hz.abs() - before.settling_band_hz);
    }

    #[test]
    fn settling_time_matches_scan(dp in 0.01..1.0f64, band in 0.001..0.5f64) {
        let model = build_state_space(case_params()).unwrap();
        let trace = simulate_response(&model, dp, 1e-3, 30.0).unwrap();
        let m = transient_metrics(&trace, band).unwrap();
        let ss = trace.terminal() * 60.0;
        // Forward scan: earliest index from which every later sample is in band.
        let hz: Vec<f64> = trace.samples.iter().map(|w| w * 60.0).collect();
        let first = (0..hz.len()).find(|&i| hz[i..].iter().all(|v| (v - ss).abs() <= band)).unwrap();
        prop_assert_eq!(m.settling_time_s, first as f64 * 1e-3);
    }

    #[test]
    fn constant_policy_keeps_h(e in 1.0..5000.0f64, online in 1.0..500.0f64, dp in 0.0..100.0f64, s in 10.0..1000.0f64) {
        let h = update_inertia(e, online, dp, InertiaPolicy::Constant, s).unwrap();
        prop_assert!((h - e / s).abs() <= 1e-12 * (e / s));
        let hp = update_inertia(e, online, dp, InertiaPolicy::ProportionalToCommittedCapacity, s).unwrap();
        prop_assert!(hp >= h);
    }
}
