mod common;

use common::{msc_gains, msc_high_rhs, random_point, rel_err, rng, MscParams, DEFAULT_PARAMS, MSC_K};
use msequiv::construction::{
    assemble_high_dim, steady_state_gain, transfer_gain, ConstructionError, GainTable,
};
use msequiv::fixture::{msc_low_dim, msc_sign_matrix, EPSILON, MASTERS};
use msequiv::{check_modular_structure, Cplx, GrnSystem, LowDimModel, Parametric};
use proptest::prelude::*;

fn build(k: &[f64; 6]) -> Result<msequiv::HighDimModel, ConstructionError> {
    let low = LowDimModel::new(msc_low_dim());
    let s = msc_sign_matrix();
    let a = check_modular_structure(&s, MASTERS).unwrap();
    assemble_high_dim(&low, &s, &a, k, &[EPSILON; MASTERS])
}

#[test]
fn assembled_model_equals_closed_form() {
    let high = build(&MSC_K).unwrap();
    let mut r = rng(24);
    for _ in 0..100 {
        let x = random_point(&mut r, 9, 0.0, 20.0);
        let got = high.rhs(&x).unwrap();
        let want = msc_high_rhs(&x, &MSC_K, &DEFAULT_PARAMS);
        for (g, w) in got.iter().zip(&want) {
            assert!(rel_err(*g, *w) < 1e-12 || (g - w).abs() < 1e-14, "{g} vs {w} at {x:?}");
        }
    }
}

#[test]
fn assembled_model_follows_parameters() {
    let mut high = build(&MSC_K).unwrap();
    let p = MscParams {
        m: 2.5,
        u_a: 0.3,
        u_o: 1.7,
        u_c: 0.4,
    };
    for (name, v) in [("m", p.m), ("uA", p.u_a), ("uO", p.u_o), ("uC", p.u_c)] {
        let i = high.parameter_index(name).unwrap();
        high.set_parameter(i, v);
    }
    let mut r = rng(7);
    for _ in 0..20 {
        let x = random_point(&mut r, 9, 0.0, 20.0);
        let got = high.rhs(&x).unwrap();
        let want = msc_high_rhs(&x, &MSC_K, &p);
        for (g, w) in got.iter().zip(&want) {
            assert!(rel_err(*g, *w) < 1e-12 || (g - w).abs() < 1e-14);
        }
    }
}

#[test]
fn fixture_gains() {
    let s = msc_sign_matrix();
    let a = check_modular_structure(&s, MASTERS).unwrap();
    let g = GainTable::compute(&s, &a, &MSC_K).unwrap();
    let expect = [(3, 1.0), (4, 1.0), (5, 2.0), (6, 1.0), (7, 1.0), (8, 1.0)];
    for (gene, v) in expect {
        assert!((g.lift_factor(gene) - v).abs() < 1e-12, "gamma for x{}", gene + 1);
    }
}

#[test]
fn infeasible_degradation_is_rejected() {
    // K4 = K5 = 1.5 makes K4 K5 - K4 - K5 negative.
    let err = build(&[1.5, 1.5, 1.0, 1.0, 1.0, 1.0]).unwrap_err();
    assert!(matches!(err, ConstructionError::NonPositiveGain { .. }), "{err}");
    assert!(err.to_string().contains("not positive"));
    assert!(matches!(
        build(&[2.0, 2.0, 1.0, 1.0, 1.0, 1.0]).unwrap_err(),
        ConstructionError::SingularModule { .. }
    ));
    assert!(matches!(
        build(&[3.0, -3.0, 1.0, 1.0, 1.0, 1.0]).unwrap_err(),
        ConstructionError::NonPositiveK { .. }
    ));
}

#[test]
fn lift_of_fixture_states_is_steady() {
    let high = build(&MSC_K).unwrap();
    let low = LowDimModel::new(msc_low_dim());
    let states = msequiv::analysis::find_steady_states(&low, &Default::default());
    assert_eq!(states.len(), 5);
    for s in &states {
        let x = high.lift(&s.x);
        let r = high.rhs(&x).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-8), "{r:?}");
        assert!((x[5] - 2.0 * x[0]).abs() < 1e-9);
    }
}

#[test]
fn exported_model_file_matches() {
    let high = build(&MSC_K).unwrap();
    let shipped = msequiv::load_model(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/msc_high.model")).unwrap();
    assert_eq!(shipped, high.to_model_spec().unwrap());
    let from_file = LowDimModel::new(shipped);
    let mut r = rng(3);
    for _ in 0..20 {
        let x = random_point(&mut r, 9, 0.0, 20.0);
        let a = from_file.rhs(&x).unwrap();
        let b = high.rhs(&x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!(rel_err(*u, *v) < 1e-12 || (u - v).abs() < 1e-14);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gains_match_closed_forms(
        k4 in 2.05f64..50.0,
        k5 in 2.05f64..50.0,
        k6 in 0.1f64..50.0,
        k7 in 0.1f64..50.0,
        k8 in 0.1f64..50.0,
        k9 in 0.1f64..50.0,
    ) {
        let k = [k4, k5, k6, k7, k8, k9];
        prop_assume!(k4 * k5 - k4 - k5 > 1e-3);
        let s = msc_sign_matrix();
        let a = check_modular_structure(&s, MASTERS).unwrap();
        let want = msc_gains(&k);
        let genes = [(0, 3), (0, 4), (0, 5), (1, 6), (1, 7), (1, 8)];
        for ((master, gene), w) in genes.iter().zip(want) {
            let g = steady_state_gain(&a, &s, &k, *master, *gene).unwrap();
            prop_assert!(rel_err(g, w) < 1e-10, "x{} gain {} vs {}", gene + 1, g, w);
            let dc = transfer_gain(&a, &s, &k, *master, *gene, Cplx::new(0.0, 0.0)).unwrap();
            prop_assert!((dc - Cplx::new(g, 0.0)).norm() < 1e-10 * g.abs().max(1.0));
        }
    }

    #[test]
    fn closed_form_holds_for_any_feasible_k(
        k4 in 2.2f64..20.0,
        k5 in 2.2f64..20.0,
        rest in prop::array::uniform4(0.2f64..20.0),
        seed in any::<u64>(),
    ) {
        let k = [k4, k5, rest[0], rest[1], rest[2], rest[3]];
        prop_assume!(k4 * k5 - k4 - k5 > 0.05);
        let high = build(&k).unwrap();
        let mut r = rng(seed);
        let x = random_point(&mut r, 9, 0.0, 20.0);
        let got = high.rhs(&x).unwrap();
        let want = msc_high_rhs(&x, &k, &DEFAULT_PARAMS);
        for (g, w) in got.iter().zip(&want) {
            prop_assert!(rel_err(*g, *w) < 1e-11 || (g - w).abs() < 1e-13, "{} vs {}", g, w);
        }
    }
}
