mod common;

use common::{msc_low_rhs, random_point, rel_err, rng, DEFAULT_PARAMS};
use msequiv::fixture::{msc_expected, msc_low_dim, msc_low_sign_matrix, msc_sign_matrix, MODULE_DEGRADATION};
use msequiv::structure::load_sign_matrix;
use msequiv::{load_model, GrnSystem, LowDimModel};

#[test]
fn low_model_matches_hand_written_system() {
    let m = LowDimModel::new(msc_low_dim());
    let mut r = rng(99);
    for _ in 0..100 {
        let z = random_point(&mut r, 3, 0.0, 20.0);
        let got = m.rhs(&z).unwrap();
        for (g, w) in got.iter().zip(msc_low_rhs(&z, &DEFAULT_PARAMS)) {
            assert!(rel_err(*g, w) < 1e-12 || (g - w).abs() < 1e-14);
        }
    }
    assert_eq!(m.sign_matrix().unwrap(), msc_low_sign_matrix());
}

#[test]
fn sign_matrix_entries() {
    let s = msc_sign_matrix();
    // 1-based (target, source) pairs from the network diagram.
    for (i, j, v) in [(9, 2, 1), (1, 9, -1), (4, 1, 1), (4, 5, 1), (2, 4, -1), (3, 8, -1), (6, 4, 1), (6, 5, 1)] {
        assert_eq!(s.get(i - 1, j - 1), v, "S({i}, {j})");
    }
    for j in 0..3 {
        assert_eq!(s.get(5, j), 0, "x6 has no master input");
    }
    assert_eq!(s.get(5, 5), 0);
}

#[test]
fn tabulated_states_are_near_steady() {
    let m = LowDimModel::new(msc_low_dim());
    for z in msc_expected().low_states {
        let r = m.rhs(&z).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-2), "{z:?}: {r:?}");
    }
    assert_eq!(MODULE_DEGRADATION, msc_expected().module_degradation);
}

#[test]
fn shipped_files_match() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/examples");
    assert_eq!(load_model(format!("{dir}/msc_low.model")).unwrap(), msc_low_dim());
    assert_eq!(load_sign_matrix(format!("{dir}/msc_SA.mat")).unwrap(), msc_sign_matrix());
}
