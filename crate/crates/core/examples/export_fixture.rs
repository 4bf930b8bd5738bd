//! Writes the MSC fixture as model files: `msc_low.model`, `msc_SA.mat` and
//! `msc_high.model` (K = 3,3,1,1,1,1, eps = 1e-3) into the given directory.

use std::path::PathBuf;

use msequiv::construction::assemble_high_dim;
use msequiv::fixture::{msc_low_dim, msc_sign_matrix, EPSILON, MASTERS, MODULE_DEGRADATION};
use msequiv::{check_modular_structure, save_model, LowDimModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let spec = msc_low_dim();
    save_model(&spec, dir.join("msc_low.model"))?;

    let s_high = msc_sign_matrix();
    std::fs::write(
        dir.join("msc_SA.mat"),
        format!("# MSC interaction signs, rows x1..x9 (receiving gene), columns x1..x9\n{s_high}"),
    )?;

    let assignment = check_modular_structure(&s_high, MASTERS)?;
    let high = assemble_high_dim(&LowDimModel::new(spec), &s_high, &assignment, &MODULE_DEGRADATION, &[EPSILON; MASTERS])?;
    save_model(&high.to_model_spec()?, dir.join("msc_high.model"))?;
    Ok(())
}
