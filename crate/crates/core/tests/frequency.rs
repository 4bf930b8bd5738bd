mod common;

use common::argument_principle;
use msequiv::analysis::find_steady_states;
use msequiv::fixture::{msc_expected, msc_low_dim};
use msequiv::frequency::{loopbreak, nyquist_curve, winding_number, FrequencyError, NyquistOptions};
use msequiv::{Cplx, LoopbrokenSystem, LowDimModel, Matrix};

#[test]
fn winding_counts_unstable_eigenvalues_of_random_systems() {
    let run = argument_principle(2024, 200);
    eprintln!(
        "nyquist: {} systems, {} regenerated, unstable-count histogram {:?}",
        run.accepted, run.regenerated, run.histogram
    );
    assert!(run.failures.is_empty(), "{:?}", run.failures);
    assert!(run.histogram.iter().filter(|c| **c > 0).count() >= 3);
}

#[test]
fn fixture_windings() {
    let low = LowDimModel::new(msc_low_dim());
    let states = find_steady_states(&low, &Default::default());
    let counts: Vec<usize> = states.iter().map(|s| s.unstable_count).collect();
    assert_eq!(counts, msc_expected().unstable_counts);
    for s in &states {
        let sys = loopbreak(&low, &s.x).unwrap();
        let c = nyquist_curve(&sys, &NyquistOptions::default()).unwrap();
        assert_eq!(c.winding, -(s.unstable_count as i64));
    }
}

#[test]
fn closed_curves() {
    let circle: Vec<Cplx<f64>> = (0..64)
        .map(|k| Cplx::from_polar(1.0, std::f64::consts::TAU * k as f64 / 64.0))
        .collect();
    assert_eq!(winding_number(&circle), 1);
    let twice: Vec<Cplx<f64>> = (0..128)
        .map(|k| Cplx::from_polar(2.0, -2.0 * std::f64::consts::TAU * k as f64 / 128.0))
        .collect();
    assert_eq!(winding_number(&twice), -2);
    let shifted: Vec<Cplx<f64>> = circle.iter().map(|z| z + 3.0).collect();
    assert_eq!(winding_number(&shifted), 0);
}

#[test]
fn imaginary_axis_eigenvalue_is_reported() {
    // A' - D has eigenvalues +-i.
    let sys = LoopbrokenSystem::new(
        vec![1.0, 1.0],
        Matrix::from_rows(&[vec![1.0, -1.0], vec![1.0, 1.0]]),
    )
    .unwrap();
    let opts = NyquistOptions {
        omega_max: Some(100.0),
        ..Default::default()
    };
    match nyquist_curve(&sys, &opts) {
        Err(FrequencyError::ImaginaryAxis { omega, .. }) => assert!((omega.abs() - 1.0).abs() < 1e-3, "{omega}"),
        other => panic!("{other:?}"),
    }
    assert!(LoopbrokenSystem::new(vec![0.0], Matrix::from_rows(&[vec![1.0]])).is_err());
}
