//! Mesenchymal stem cell differentiation models: a three-gene core of
//! adipogenic (z1), osteogenic (z2) and chondrogenic (z3) master genes, its
//! nine-gene extension, and reference values for both.

use crate::model_io::{ModelSpec, Parameter};
use crate::structure::SignMatrix;

const LOW_INTERACTIONS: [&str; 3] = [
    "(0.2*z1^2 + 0.5 + uA) / (10*m + 0.1*z1^2 + 0.5*z2^2 + 0.5*z3^2)",
    "(0.1*z2^2 + 1 + uO) / (m + 0.1*z2^2 + 0.5*z1^2 + 0.1*z3^2)",
    "(0.1*z3^2 + 1 + uC) / (m + 0.1*z3^2 + 0.5*z1^2 + 0.1*z2^2)",
];

/// Free parameters and their defaults: stem-cell maintenance `m` and the
/// three lineage stimuli.
pub const PARAMETERS: [(&str, f64); 4] = [("m", 1.0), ("uA", 0.0), ("uO", 0.0), ("uC", 0.0)];

/// Upper end of the state box searched for steady states.
pub const STATE_BOX_MAX: f64 = 20.0;

/// The three-gene model with unit-free concentrations and decay 0.1.
pub fn msc_low_dim() -> ModelSpec {
    ModelSpec::from_strings(
        &["z1", "z2", "z3"],
        &PARAMETERS,
        &LOW_INTERACTIONS,
        &[0.1, 0.1, 0.1],
        &[(0.0, STATE_BOX_MAX); 3],
    )
    .expect("fixture model is valid")
}

pub fn msc_parameters() -> Vec<Parameter> {
    PARAMETERS
        .iter()
        .map(|(n, d)| Parameter {
            name: n.to_string(),
            default: *d,
        })
        .collect()
}

/// Every master activates itself and represses the other two.
pub fn msc_low_sign_matrix() -> SignMatrix {
    SignMatrix::from_rows(&[[1, -1, -1], [-1, 1, -1], [-1, -1, 1]]).expect("valid")
}

/// Sign matrix of the nine-gene network. Rows are targets, columns sources;
/// genes 1-3 are the masters, 4-6 the adipogenic module, 7-9 the osteogenic
/// module. The chondrogenic master has no module.
pub fn msc_sign_matrix() -> SignMatrix {
    #[rustfmt::skip]
    let rows: [[i64; 9]; 9] = [
        //x1  x2  x3  x4  x5  x6  x7  x8  x9
        [  1,  0, -1,  0,  0,  0,  0,  0, -1], // x1: self-activation; x3 -| x1; x9 -| x1
        [ -1,  1, -1, -1,  0,  0,  0,  0,  0], // x2: x1 -| x2; self; x3 -| x2; x4 -| x2
        [  0,  0,  1, -1,  0,  0,  0, -1,  0], // x3: self; x4 -| x3; x8 -| x3
        [  1,  0,  0,  1,  1,  0,  0,  0,  0], // x4: x1 -> x4; self; x5 -> x4
        [  1,  0,  0,  1,  1,  0,  0,  0,  0], // x5: x1 -> x5; x4 -> x5; self
        [  0,  0,  0,  1,  1,  0,  0,  0,  0], // x6: x4 -> x6; x5 -> x6
        [  0,  1,  0,  0,  0,  0,  0,  0,  0], // x7: x2 -> x7
        [  0,  1,  0,  0,  0,  0,  0,  0,  0], // x8: x2 -> x8
        [  0,  1,  0,  0,  0,  0,  0,  0,  0], // x9: x2 -> x9
    ];
    SignMatrix::from_rows(&rows).expect("valid")
}

pub const MASTERS: usize = 3;

/// Module degradation rates K4..K9 used for the nine-gene model.
pub const MODULE_DEGRADATION: [f64; 6] = [3.0, 3.0, 1.0, 1.0, 1.0, 1.0];

pub const EPSILON: f64 = 1e-3;

/// Reference values, printed to two decimals in the source tables.
#[derive(Debug, Clone, PartialEq)]
pub struct GoldenData {
    /// Adipogenic, osteogenic, chondrogenic, then two saddles.
    pub low_states: [[f64; 3]; 5],
    /// Spectra per state, in the order tabulated (not sorted).
    pub low_eigenvalues: [[f64; 3]; 5],
    pub high_states: [[f64; 9]; 5],
    pub high_eigenvalues: [[f64; 9]; 5],
    pub unstable_counts: [usize; 5],
    pub u_o_critical: f64,
    pub m_critical: f64,
    pub parameters: [(&'static str, f64); 4],
    pub module_degradation: [f64; 6],
    pub epsilon: f64,
    pub initial_low: [f64; 3],
    pub initial_high: [f64; 9],
}

pub fn msc_expected() -> GoldenData {
    GoldenData {
        low_states: [
            [12.00, 0.14, 0.14],
            [0.08, 9.90, 1.01],
            [0.08, 1.01, 9.90],
            [7.67, 0.33, 0.33],
            [0.12, 5.67, 5.67],
        ],
        low_eigenvalues: [
            [-0.02, -0.10, -0.10],
            [-0.11, -0.10, -0.07],
            [-0.10, -0.11, -0.07],
            [0.02, -0.10, -0.10],
            [-0.10, -0.12, 0.05],
        ],
        high_states: [
            [12.00, 0.14, 0.14, 12.00, 12.00, 24.00, 0.14, 0.14, 0.14],
            [0.08, 9.90, 1.01, 0.08, 0.08, 0.17, 9.90, 9.90, 9.90],
            [0.08, 1.01, 9.90, 0.08, 0.08, 0.17, 1.01, 1.01, 1.01],
            [7.67, 0.33, 0.33, 7.67, 7.67, 15.35, 0.33, 0.33, 0.33],
            [0.12, 5.67, 5.67, 0.12, 0.12, 0.24, 5.67, 5.67, 5.67],
        ],
        high_eigenvalues: [
            [-0.02, -0.10, -0.10, -1.00, -1.00, -1.00, -1.00, -1.00, -3.00],
            [-0.11, -0.10, -0.07, -1.00, -1.00, -1.00, -1.00, -1.00, -3.00],
            [-0.10, -0.11, -0.07, -1.00, -1.00, -1.00, -1.00, -1.00, -3.00],
            [0.02, -0.10, -0.10, -1.00, -1.00, -1.00, -1.01, -1.00, -3.00],
            [-0.10, -0.13, 0.05, -1.00, -1.00, -1.00, -1.00, -1.00, -3.00],
        ],
        unstable_counts: [0, 0, 0, 1, 1],
        u_o_critical: 4.2,
        m_critical: 4.5,
        parameters: PARAMETERS,
        module_degradation: MODULE_DEGRADATION,
        epsilon: EPSILON,
        initial_low: [2.2, 5.0, 2.0],
        initial_high: [2.2, 5.0, 2.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0],
    }
}
