//! End-to-end pipeline check on the bundled radical-user scenario: every
//! number below was computed independently ahead of time and frozen, so any
//! drift in the model, the solvers, or the controllers shows up here.

use approx::assert_abs_diff_eq;
use fjlab::analysis::{
    compare_controllers, equivalence_certificate, free_evolution_steady_state,
};
use fjlab::controllers::{
    closed_loop, mb_target, mf_equilibrium, mf_input, theta, ModelFree, TerminalMode,
};
use fjlab::harness::radical_user_scenario;
use fjlab::plant::extract_plant;
use fjlab::NumericSettings;

const X_FREE: [f64; 6] = [
    0.6742919673109901,
    0.6712646258372711,
    0.6847210268807326,
    0.6746572814030867,
    0.0,
    0.6700011309259168,
];

const X_MF_EQ: [f64; 6] = [
    0.24861878404185425,
    0.22416337532328917,
    0.2928705290795428,
    0.2762271818631756,
    0.0,
    0.2934846868607009,
];

const X_MB: [f64; 6] = [
    0.07609210132252138,
    0.04178065834419049,
    0.1328734809695063,
    0.11474220683787997,
    0.0,
    0.14088138546179657,
];

const U_MB: f64 = 0.03953877080257471;
const THETA_STAR: f64 = 0.02754173688785716;
const GAP: f64 = 1.164676313784285;
const ALPHA: f64 = -8.823110599811338;

const X_MF_AT_50: [f64; 6] = [
    0.2512160302919947,
    0.22660308472673307,
    0.29517514028186037,
    0.27891861809125185,
    0.0,
    0.29630054660870664,
];

const SS_COST_MF: f64 = 0.06422985378404553;
const SS_COST_MB: f64 = 0.0275871187078782;

#[test]
fn free_network_settles_at_frozen_opinions() {
    let scenario = radical_user_scenario();
    let net = scenario.network().unwrap();
    let free =
        free_evolution_steady_state(&net, scenario.rs_index, &NumericSettings::default()).unwrap();
    assert_eq!(free.len(), 6);
    for i in 0..6 {
        assert_abs_diff_eq!(free[i], X_FREE[i], epsilon = 1e-10);
    }
}

#[test]
fn averaging_controller_equilibrium_is_frozen() {
    let scenario = radical_user_scenario();
    let net = scenario.network().unwrap();
    let settings = NumericSettings::default();
    let plant = extract_plant(&net, scenario.rs_index, &settings).unwrap();
    let eq = mf_equilibrium(&plant, &settings).unwrap();
    for i in 0..6 {
        assert_abs_diff_eq!(eq[i], X_MF_EQ[i], epsilon = 1e-10);
    }
}

#[test]
fn planner_target_is_frozen() {
    let scenario = radical_user_scenario();
    let net = scenario.network().unwrap();
    let settings = NumericSettings::default();
    let plant = extract_plant(&net, scenario.rs_index, &settings).unwrap();
    let target = mb_target(&plant, &settings).unwrap();
    assert_abs_diff_eq!(target.u_star, U_MB, epsilon = 1e-10);
    assert_abs_diff_eq!(target.theta_star, THETA_STAR, epsilon = 1e-10);
    for i in 0..6 {
        assert_abs_diff_eq!(target.x_star[i], X_MB[i], epsilon = 1e-10);
    }
}

#[test]
fn certificate_gap_and_alpha_are_frozen() {
    let scenario = radical_user_scenario();
    let net = scenario.network().unwrap();
    let settings = NumericSettings::default();
    let plant = extract_plant(&net, scenario.rs_index, &settings).unwrap();
    let cert = equivalence_certificate(&plant, &settings).unwrap();
    assert_abs_diff_eq!(cert.gap, GAP, epsilon = 1e-9);
    assert_abs_diff_eq!(cert.alpha, ALPHA, epsilon = 1e-9);
    assert!(cert.woodbury_residual < 1e-10);
}

#[test]
fn averaging_run_hits_frozen_final_state() {
    let scenario = radical_user_scenario();
    let net = scenario.network().unwrap();
    let settings = NumericSettings::default();
    let plant = extract_plant(&net, scenario.rs_index, &settings).unwrap();
    let record = closed_loop(&plant, &mut ModelFree, 50).unwrap();
    let x50 = record.final_state();
    for i in 0..6 {
        assert_abs_diff_eq!(x50[i], X_MF_AT_50[i], epsilon = 1e-10);
    }
    assert_abs_diff_eq!(record.steady_state_cost(), SS_COST_MF, epsilon = 1e-10);
    // the recorded trailing input is the unapplied mean at the final state
    assert_abs_diff_eq!(*record.inputs.last().unwrap(), mf_input(x50), epsilon = 1e-15);
    assert_abs_diff_eq!(
        record.steady_state_cost(),
        theta(x50, mf_input(x50)),
        epsilon = 1e-15
    );
}

#[test]
fn head_to_head_comparison_matches_frozen_study() {
    let scenario = radical_user_scenario();
    let net = scenario.network().unwrap();
    let report = compare_controllers(
        &net,
        scenario.rs_index,
        50,
        50,
        TerminalMode::Exact,
        &NumericSettings::default(),
    )
    .unwrap();
    assert_abs_diff_eq!(report.cost_mf_ss, SS_COST_MF, epsilon = 1e-10);
    assert_abs_diff_eq!(report.cost_mb_ss, SS_COST_MB, epsilon = 1e-8);
    assert_abs_diff_eq!(report.improvement_ss_pct, 57.049, epsilon = 2e-3);
    assert_abs_diff_eq!(report.avg_shift_gap_pct, 24.924, epsilon = 2e-3);
    // the radical holder (user 4) never moves: opinion 0 everywhere, and its
    // zero free opinion keeps it out of the relative-shift averages
    assert_eq!(report.shift_mf.excluded, 1);
    assert!(report.shift_mf.per_user_pct[4].is_none());
    assert_abs_diff_eq!(report.x_mb[4], 0.0);
    // the planner pulls opinions further from the free network than
    // averaging does -- the cost of the extra engagement
    assert!(report.shift_mb.avg_pct > report.shift_mf.avg_pct);
    assert!(report.cost_mb_cum <= report.cost_mf_cum + 1e-9);
}
