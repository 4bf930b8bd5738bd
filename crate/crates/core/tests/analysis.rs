mod common;

use std::time::{Duration, Instant};

use common::{max_abs_diff, msc_gains, spectrum_distance};
use msequiv::analysis::{check_equivalence, find_steady_states, EquivalenceOptions, LiftSpec, SteadyStateOptions};
use msequiv::construction::assemble_high_dim;
use msequiv::fixture::{msc_expected, msc_low_dim, msc_sign_matrix, EPSILON, MASTERS, MODULE_DEGRADATION};
use msequiv::{check_modular_structure, GrnSystem, HighDimModel, LowDimModel, SteadyState};

fn high() -> HighDimModel {
    let low = LowDimModel::new(msc_low_dim());
    let s = msc_sign_matrix();
    let a = check_modular_structure(&s, MASTERS).unwrap();
    assemble_high_dim(&low, &s, &a, &MODULE_DEGRADATION, &[EPSILON; MASTERS]).unwrap()
}

/// Index of the computed state nearest to each tabulated one; all distinct.
fn pair_with_table<const N: usize>(states: &[SteadyState], table: &[[f64; N]; 5]) -> Vec<usize> {
    let idx: Vec<usize> = table
        .iter()
        .map(|row| {
            (0..states.len())
                .min_by(|&a, &b| max_abs_diff(&states[a].x, row).total_cmp(&max_abs_diff(&states[b].x, row)))
                .unwrap()
        })
        .collect();
    let mut sorted = idx.clone();
    sorted.sort();
    sorted.dedup();
    assert_eq!(sorted.len(), 5, "two table rows share a computed state");
    idx
}

fn check_states<const N: usize>(model: &dyn GrnSystem<f64>, table: &[[f64; N]; 5], spectra: &[[f64; N]; 5]) {
    let t = Instant::now();
    let states = find_steady_states(model, &SteadyStateOptions::default());
    assert!(t.elapsed() < Duration::from_secs(30));
    assert_eq!(states.len(), 5);
    let want = msc_expected();
    for (row, (&i, (x, ev))) in pair_with_table(&states, table).iter().zip(table.iter().zip(spectra)).enumerate() {
        let s = &states[i];
        assert!(max_abs_diff(&s.x, x) < 0.01, "state {}: {:?} vs {x:?}", row + 1, s.x);
        let d = spectrum_distance(&s.eigenvalues, ev);
        assert!(d < 0.02, "state {} spectrum {:?} vs {ev:?}", row + 1, s.eigenvalues);
        assert_eq!(s.unstable_count, want.unstable_counts[row]);
    }
}

#[test]
fn low_dim_states_and_spectra() {
    let g = msc_expected();
    check_states(&LowDimModel::new(msc_low_dim()), &g.low_states, &g.low_eigenvalues);
}

/// Tabulated high-dimensional spectra, and states against the closed-form
/// lift of the computed low-dimensional ones (the printed x6 row doubles the
/// already-rounded x1, so it is off by up to 0.01 on its own).
#[test]
fn high_dim_states_and_spectra() {
    let g = msc_expected();
    let low = find_steady_states(&LowDimModel::new(msc_low_dim()), &SteadyStateOptions::default());
    let states = find_steady_states(&high(), &SteadyStateOptions::default());
    assert_eq!(states.len(), 5);
    let [g41, g51, g61, g72, g82, g92] = msc_gains(&MODULE_DEGRADATION);
    for (row, &i) in pair_with_table(&states, &g.high_states).iter().enumerate() {
        let s = &states[i];
        let z = &low[pair_with_table(&low, &g.low_states)[row]].x;
        let lifted = [z[0], z[1], z[2], g41 * z[0], g51 * z[0], g61 * z[0], g72 * z[1], g82 * z[1], g92 * z[1]];
        assert!(max_abs_diff(&s.x, &lifted) < 1e-8, "state {}: {:?} vs {lifted:?}", row + 1, s.x);
        assert!(max_abs_diff(&s.x, &g.high_states[row]) < 0.011);
        let d = spectrum_distance(&s.eigenvalues, &g.high_eigenvalues[row]);
        assert!(d < 0.02, "state {} spectrum {:?}", row + 1, s.eigenvalues);
        assert_eq!(s.unstable_count, g.unstable_counts[row]);
    }
}

#[test]
fn search_is_deterministic() {
    let low = LowDimModel::new(msc_low_dim());
    let opts = SteadyStateOptions {
        n_starts: 300,
        seed: 17,
        ..Default::default()
    };
    let a: Vec<Vec<f64>> = find_steady_states(&low, &opts).into_iter().map(|s| s.x).collect();
    let b: Vec<Vec<f64>> = find_steady_states(&low, &opts).into_iter().map(|s| s.x).collect();
    assert_eq!(a, b);
}

#[test]
fn fixture_is_equivalent() {
    let low = LowDimModel::new(msc_low_dim());
    let h = high();
    let r = check_equivalence(&low, &h, &LiftSpec::of(&h), &EquivalenceOptions::default()).unwrap();
    assert!(r.sign_check.passed);
    assert_eq!(r.sign_check.samples, 1000);
    assert_eq!(r.pairs.len(), 5);
    for p in &r.pairs {
        assert!(p.lift_residual < 1e-8, "{p:?}");
        assert!(p.counts_match);
        let ny = p.nyquist.as_ref().expect("nyquist summary");
        assert_eq!(ny.low_winding, ny.high_winding);
    }
    let (l, hc) = r.unstable_counts();
    assert_eq!(l, hc);
    let mut counts = l.clone();
    counts.sort();
    assert_eq!(counts, vec![0, 0, 0, 1, 1]);
    let search = r.high_search.as_ref().unwrap();
    assert_eq!((search.found, search.matched), (5, 5));
    assert!(r.verdict);
}

#[test]
fn mismatched_lift_fails_the_verdict() {
    // The system uses K4 = K5 = 4, the lift still assumes K4 = K5 = 3, so
    // lifted states are not steady states of the system.
    let low = LowDimModel::new(msc_low_dim());
    let h = high();
    let other = h.with_module_degradation(&[4.0, 4.0, 1.0, 1.0, 1.0, 1.0]).unwrap();
    let opts = EquivalenceOptions {
        nyquist: false,
        ..Default::default()
    };
    let r = check_equivalence(&low, &other, &LiftSpec::of(&h), &opts).unwrap();
    assert!(r.sign_check.passed);
    assert!(r.pairs.iter().any(|p| !p.lift_ok));
    assert!(!r.failing_pairs.is_empty());
    assert!(!r.verdict);
}

#[test]
fn wrong_signs_fail_the_verdict() {
    let low = LowDimModel::new(msc_low_dim());
    let h = high();
    let mut lift = LiftSpec::of(&h);
    lift.sign_matrix.set(0, 8, 1);
    let opts = EquivalenceOptions {
        nyquist: false,
        search_high: false,
        sign_samples: 200,
        ..Default::default()
    };
    let r = check_equivalence(&low, &h, &lift, &opts).unwrap();
    assert!(!r.sign_check.passed);
    assert_eq!(r.sign_check.mismatches, 200);
    assert!(!r.verdict);
}
