use super::*;
use crate::grid::Grid;
use crate::model::ModelParams;

fn problem(system: System, n: usize) -> SteadyProblem {
    SteadyProblem::new(system, ModelParams::default(), Grid::line(n, 1.0).unwrap()).unwrap()
}

fn cos_perturbed(pb: &SteadyProblem, base: &[f64], amp: f64) -> Vec<f64> {
    let m = pb.components();
    let n = pb.cells();
    let mut x = base.to_vec();
    for i in 0..n {
        let c = (std::f64::consts::PI * (i as f64 + 0.5) / n as f64).cos();
        for k in 0..m {
            x[i * m + k] *= 1.0 + amp * c;
        }
    }
    x
}

#[test]
fn constant_state_needs_no_iterations() {
    let pb = problem(System::Conserved, 32);
    let x = pb.constant_state(0.5).unwrap();
    let p = newton_steady(&pb, &x, 0.5).unwrap();
    assert_eq!(p.newton_iterations, 0);
    assert!(p.residual <= 1e-10);
    assert_eq!(p.stability, Stability::Stable);
    assert_eq!(p.eigenvalues.iter().filter(|e| e.mass_neutral).count(), 1);
}

#[test]
fn nonconstant_profile_and_its_mirror() {
    let pb = problem(System::Conserved, 64);
    let x = cos_perturbed(&pb, &pb.constant_state(1.0).unwrap(), 0.3);
    let p = newton_steady(&pb, &x, 1.0).unwrap();
    assert!(p.residual <= 1e-10);
    let rho = pb.density(&p.state);
    let range = rho.iter().cloned().fold(f64::MIN, f64::max) - rho.iter().cloned().fold(f64::MAX, f64::min);
    assert!(range > 0.1, "range {range} iters {}", p.newton_iterations);
    assert!((pb.mean_density(&p.state) - 1.0).abs() < 1e-10);
    let q = reflect_point(&pb, &p).unwrap();
    assert!(q.newton_iterations <= 2);
}

#[test]
fn growth_constant_branch_pitchforks() {
    let pb = problem(System::Growth, 64);
    let start = newton_steady(&pb, &pb.constant_state(8.0).unwrap(), 8.0).unwrap();
    let ctrl = ContinuationControl {
        ds: 0.05,
        ds_max: 0.2,
        param_min: 5.5,
        param_max: 9.0,
        ..Default::default()
    };
    let br = continue_branch(&pb, &start, -1.0, &ctrl).unwrap();
    let pf: Vec<f64> = br.events_of(EventKind::Pitchfork).map(|e| e.parameter).collect();
    eprintln!(
        "{pf:?} {:?}",
        br.events.iter().map(|e| (e.kind, e.parameter)).collect::<Vec<_>>()
    );
    assert_eq!(br.stop, StopReason::ParameterBound);
    assert_eq!(br.events_of(EventKind::Hopf).count(), 0);
    assert_eq!(pf.len(), 2);
    assert!((pf[0] - 6.981).abs() < 0.02 && (pf[1] - 6.207).abs() < 0.02, "{pf:?}");
    for p in &br.points {
        assert!(p.residual <= 1e-10);
    }
}

#[test]
fn constant_state_eigenvalues_match_mode_matrices() {
    use crate::linstab::{mode_matrix_k2, Which};
    let pb = problem(System::Conserved, 128);
    let x = pb.constant_state(1.0).unwrap();
    let p = newton_steady(&pb, &x, 1.0).unwrap();
    let eigs = leading_eigs(&pb, &p, 6).unwrap();
    let mut oracle = Vec::new();
    for n in 0..=8 {
        let k2 = -pb.grid.mode_eigenvalue(n);
        let m = mode_matrix_k2(Which::Conserved, n, k2, 1.0, &pb.params).unwrap();
        oracle.extend(m.eigenvalues());
    }
    for e in eigs.iter().filter(|e| !e.mass_neutral) {
        let gap = oracle
            .iter()
            .map(|z| (z - e.value).norm())
            .fold(f64::INFINITY, f64::min);
        assert!(gap < 1e-8 * (1.0 + e.value.norm()), "{} off by {gap}", e.value);
    }
    let neutral: Vec<_> = eigs.iter().filter(|e| e.mass_neutral).collect();
    assert_eq!(neutral.len(), 1);
    assert!(neutral[0].value.norm() < 1e-8);
}

#[test]
fn pitchfork_switch_leaves_the_constant_branch() {
    let pb = problem(System::Growth, 64);
    let start = newton_steady(&pb, &pb.constant_state(6.5).unwrap(), 6.5).unwrap();
    let ctrl = ContinuationControl {
        ds: 0.05,
        ds_max: 0.2,
        param_min: 5.8,
        param_max: 9.0,
        ..Default::default()
    };
    let br = continue_branch(&pb, &start, -1.0, &ctrl).unwrap();
    let ev = br
        .events_of(EventKind::Pitchfork)
        .next()
        .expect("pitchfork near 6.2")
        .clone();
    assert!(ev.null_parity.unwrap() < -0.99, "mode-1 null vector is odd");
    let s = switch_branch(&pb, &ev, &ctrl).unwrap();
    assert!(s.residual <= 1e-10);
    let rho = pb.density(&s.state);
    let spread = rho.iter().cloned().fold(f64::MIN, f64::max) - rho.iter().cloned().fold(f64::MAX, f64::min);
    assert!(spread > 1e-4, "spread {spread}");
    // the switched state is antisymmetric about the midpoint to leading order
    let mean = rho.iter().sum::<f64>() / rho.len() as f64;
    assert!((rho[0] - mean) * (rho[rho.len() - 1] - mean) < 0.0);
}

#[test]
fn event_location_is_stable_under_step_halving() {
    let pb = problem(System::Growth, 64);
    let start = newton_steady(&pb, &pb.constant_state(7.5).unwrap(), 7.5).unwrap();
    let locate = |ds: f64| {
        let ctrl = ContinuationControl {
            ds,
            ds_max: ds,
            param_min: 6.5,
            param_max: 9.0,
            ..Default::default()
        };
        let br = continue_branch(&pb, &start, -1.0, &ctrl).unwrap();
        let first = br.events_of(EventKind::Pitchfork).next().unwrap().parameter;
        first
    };
    let (a, b) = (locate(0.1), locate(0.05));
    assert!((a - b).abs() <= 1e-3, "{a} vs {b}");
}

#[test]
fn accepted_points_resolve_to_themselves() {
    let pb = problem(System::Conserved, 48);
    let x = cos_perturbed(&pb, &pb.constant_state(1.0).unwrap(), 0.3);
    let p = newton_steady(&pb, &x, 1.0).unwrap();
    let ctrl = ContinuationControl {
        max_steps: 8,
        ..Default::default()
    };
    let br = continue_branch(&pb, &p, 1.0, &ctrl).unwrap();
    for q in &br.points {
        assert!(q.residual <= 1e-10);
        let again = newton_steady(&pb, &q.state, q.parameter).unwrap();
        let diff = again
            .state
            .iter()
            .zip(&q.state)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff <= 1e-9, "{diff}");
    }
}

#[test]
fn tiny_step_floor_reports_a_stuck_branch() {
    let pb = problem(System::Growth, 16);
    let start = newton_steady(&pb, &pb.constant_state(3.0).unwrap(), 3.0).unwrap();
    let ctrl = ContinuationControl {
        max_corrector: 1,
        tolerance: 1e-300,
        ds: 1e-6,
        ds_min: 1e-6,
        ds_max: 1e-6,
        ..Default::default()
    };
    match continue_branch(&pb, &start, 1.0, &ctrl) {
        Err(Error::StuckBranch { branch, .. }) => assert_eq!(branch.points.len(), 1),
        other => panic!("expected a stuck branch, got {other:?}"),
    }
}

#[test]
fn invalid_control_is_rejected() {
    let pb = problem(System::Growth, 16);
    let start = newton_steady(&pb, &pb.constant_state(3.0).unwrap(), 3.0).unwrap();
    let ctrl = ContinuationControl {
        ds: 1.0,
        ds_max: 0.1,
        ..Default::default()
    };
    assert!(matches!(
        continue_branch(&pb, &start, 1.0, &ctrl),
        Err(Error::InvalidParameter { .. })
    ));
}
