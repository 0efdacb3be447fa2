//! Steady states found by Newton agree with what the time steppers settle to,
//! up to the splitting error of the steppers.

use roachlab::continuation::{newton_steady, relaxed_guess, SteadyProblem, System};
use roachlab::cross::step_cross;
use roachlab::grid::Grid;
use roachlab::model::ModelParams;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn relaxed_three_component_run_approaches_the_newton_state_at_first_order() {
    let pb = SteadyProblem::new(System::Growth, ModelParams::default(), Grid::line(64, 1.0).unwrap()).unwrap();
    let gaps: Vec<f64> = [1e-3, 5e-4]
        .iter()
        .map(|&dt| {
            let relaxed = relaxed_guess(&pb, 1.2, 0.3, 1, 100.0, dt).unwrap();
            let point = newton_steady(&pb, &relaxed, 1.2).unwrap();
            assert!(point.residual < 1e-10);
            max_diff(&relaxed, &point.state)
        })
        .collect();
    let ratio = gaps[0] / gaps[1];
    assert!(gaps[0] < 0.05 && (1.7..2.3).contains(&ratio), "gaps {gaps:?}");
}

#[test]
fn limit_steady_state_is_a_fixed_point_up_to_second_order_in_dt() {
    let pb = SteadyProblem::new(System::Limit, ModelParams::default(), Grid::line(64, 1.0).unwrap()).unwrap();
    let guess = relaxed_guess(&pb, 1.2, 0.3, 1, 50.0, 1e-3).unwrap();
    let point = newton_steady(&pb, &guess, 1.2).unwrap();
    let state = pb.to_cross_state(&point.state).unwrap();
    let p = pb.params_at(1.2);
    let moved: Vec<f64> = [1e-3, 1e-4]
        .iter()
        .map(|&dt| {
            max_diff(
                &pb.from_cross_state(&step_cross(&state, dt, &p).unwrap()).unwrap(),
                &point.state,
            )
        })
        .collect();
    let ratio = moved[0] / moved[1];
    assert!(moved[1] < 1e-8 && (80.0..120.0).contains(&ratio), "moved {moved:?}");
}
