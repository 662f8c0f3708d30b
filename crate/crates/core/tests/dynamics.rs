mod common;

use std::f64::consts::PI;

#[test]
fn small_angle_period() {
    let expected = 2.0 * PI * (1.0f64 / 9.81).sqrt();
    let period = common::pendulum_period(0.05, 0.001, 12.0);
    assert!((period / expected - 1.0).abs() < 0.005, "{period} vs {expected}");
}

#[test]
fn larger_swings_are_slower() {
    let small = common::pendulum_period(0.05, 0.001, 12.0);
    let large = common::pendulum_period(1.0, 0.001, 12.0);
    // First-order amplitude correction: T = T0 (1 + q0^2 / 16).
    assert!(large > small);
    assert!((large / small - (1.0 + 1.0 / 16.0)).abs() < 0.01);
}

#[test]
fn rk4_converges_at_fourth_order() {
    let order = common::rk4_self_convergence_order();
    assert!(order >= 3.5, "observed order {order}");
}

#[test]
fn true_parameters_close_the_residual() {
    let (r, torque) = common::residual_closure();
    assert!(torque > 100.0 * r, "rms residual {r}, rms torque {torque}");
}
