use sttmpc::estimation::Schedule;
use sttmpc::simulator::*;
use sttmpc::tube_mpc::ExcitationBound;

const C3: f64 = 1.0284e-4;

fn fixture() -> (Scenario, PlantConfig, ControllerSetup) {
    let sc = Scenario::paper();
    let plant = sc.plant().unwrap();
    let setup = sc.setup().unwrap();
    (sc, plant, setup)
}

fn run_cfg(sc: &Scenario, steps: usize, delta: f64, seed: u64) -> RunConfig {
    RunConfig::new(steps, Schedule::new(delta, 0.5, 2.0, 0.3, C3, 0.01).unwrap(), seed, sc.x0())
}

#[test]
fn paper_run_is_feasible_and_safe() {
    let (sc, plant, setup) = fixture();
    let tr = run_closed_loop(&plant, &run_cfg(&sc, 100, 0.1, 0), &setup).unwrap();
    assert_eq!(tr.steps.len(), 100);
    let rep = tr.constraint_report(&setup.design.f, &setup.design.g);
    assert_eq!(rep.first_violation, None);
    assert!(tr.steps.iter().all(|s| s.feasible_current));
    assert!(tr.steps.iter().all(|s| s.tail_violation.is_none_or(|v| v <= TAIL_TOL)));
    assert_eq!(tr.fallbacks, 0);
    assert_eq!(tr.step(1).unwrap().volume_ratio, 1.0);
    assert!(tr.steps.windows(2).all(|w| w[1].volume <= w[0].volume));
    assert!(tr.step(100).unwrap().volume_ratio < 0.01);
    // Regulated to a neighbourhood of the origin.
    assert!(tr.step(100).unwrap().x.norm() < 0.2);
}

#[test]
fn estimation_is_frozen_before_t_star() {
    let (sc, plant, setup) = fixture();
    let tr = run_closed_loop(&plant, &run_cfg(&sc, 10, 1e-4, 2), &setup).unwrap();
    let ts = tr.t_star;
    assert_eq!(ts, 5);
    for s in &tr.steps[..ts - 1] {
        assert_eq!(s.volume_ratio, 1.0);
        assert_eq!(s.theta, setup.theta0);
        assert!(s.g_monitor.is_none());
    }
    assert!(tr.step(ts).unwrap().volume_ratio < 1.0);
}

#[test]
fn reruns_are_byte_identical_and_seeds_differ() {
    let (sc, plant, setup) = fixture();
    let a = run_closed_loop(&plant, &run_cfg(&sc, 30, 0.1, 4), &setup).unwrap().to_csv();
    let b = run_closed_loop(&plant, &run_cfg(&sc, 30, 0.1, 4), &setup).unwrap().to_csv();
    let c = run_closed_loop(&plant, &run_cfg(&sc, 30, 0.1, 5), &setup).unwrap().to_csv();
    assert_eq!(a, b);
    assert_ne!(a, c);
    assert_eq!(a.lines().count(), 31);
    let header = a.lines().next().unwrap();
    assert!(header.starts_with("t,x1,x2,u1,v01,zeta1,w1,w2,theta1,"));
}

#[test]
fn oracle_uses_true_parameters_without_excitation() {
    let (sc, plant, setup) = fixture();
    let tr = run_oracle(&plant, &run_cfg(&sc, 40, 0.1, 1), &setup).unwrap();
    let star = setup.par.theta_of(&plant.a_star, &plant.b_star);
    assert!(tr.steps.iter().all(|s| s.theta == star && s.zeta[0] == 0.0 && s.covered));
    assert_eq!(tr.fallbacks, 0);
    assert!(tr.steps.iter().all(|s| s.constraint_margin <= CONSTRAINT_TOL));
}

#[test]
fn feedback_only_baseline_applies_k() {
    let (sc, plant, setup) = fixture();
    let mut run = run_cfg(&sc, 20, 0.1, 1);
    run.mode = Mode::FeedbackOnly;
    let tr = run_closed_loop(&plant, &run, &setup).unwrap();
    for s in &tr.steps {
        assert_eq!(s.u, &setup.design.k * &s.x);
    }
    // K x0 = -3.426 is far outside |u| <= 0.5.
    let rep = tr.constraint_report(&setup.design.f, &setup.design.g);
    assert_eq!(rep.first_violation, Some(1));
}

#[test]
fn frozen_noise_bound_stays_constant() {
    let (sc, plant, setup) = fixture();
    let mut run = run_cfg(&sc, 15, 0.1, 3);
    run.freeze_wbar = true;
    let tr = run_closed_loop(&plant, &run, &setup).unwrap();
    let w0 = &tr.steps[0].w_bar;
    assert!(tr.steps.iter().all(|s| &s.w_bar == w0));
    // Otherwise the bound tracks the shrinking excitation and set.
    let tr = run_closed_loop(&plant, &run_cfg(&sc, 15, 0.1, 3), &setup).unwrap();
    assert_ne!(tr.step(15).unwrap().w_bar, tr.step(1).unwrap().w_bar);
}

#[test]
fn box_excitation_bound_reports_initial_infeasibility() {
    let (sc, plant, setup) = fixture();
    let mut run = run_cfg(&sc, 5, 0.1, 0);
    run.excitation = ExcitationBound::Box;
    assert!(matches!(run_closed_loop(&plant, &run, &setup), Err(SimError::InitialInfeasible { .. })));
}

#[test]
fn disturbances_stay_in_the_ball() {
    let (sc, plant, setup) = fixture();
    let tr = run_closed_loop(&plant, &run_cfg(&sc, 50, 0.1, 6), &setup).unwrap();
    assert!(tr.steps.iter().all(|s| s.w.norm() <= 3.0 * plant.sigma + 1e-15));
    assert!(tr.steps.iter().all(|s| s.zeta.norm() <= 3.0 * s.zeta_bar.amax().max(1.0) + 1e-15));
}

#[test]
fn calibration_requirement_matches_definition() {
    let sch = Schedule::new(0.1, 0.5, 2.0, 0.3, 1.0, 0.01).unwrap();
    // One error of 0.02 at t = 4: c3 = (0.01)^2 · 4^0.5 / ln(40).
    let c3 = required_c3(&[(2, 1.0), (4, 0.02)], &sch);
    assert!((c3 - 1e-4 * 2.0 / 40f64.ln()).abs() < 1e-15);
    let cal = Calibration::from_runs(vec![3.0, 1.0, 2.0, 4.0], 0.5, 2.0);
    assert_eq!(cal.c3, 4.0);
}

#[test]
fn invalid_configuration_is_rejected() {
    let (sc, plant, setup) = fixture();
    let mut run = run_cfg(&sc, 0, 0.1, 0);
    assert!(matches!(run_closed_loop(&plant, &run, &setup), Err(SimError::Config(_))));
    run.steps = 3;
    run.x0 = nalgebra::dvector![1.0];
    assert!(matches!(run_closed_loop(&plant, &run, &setup), Err(SimError::Config(_))));
}
