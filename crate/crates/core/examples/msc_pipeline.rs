//! Builds the nine-gene MSC model from the three-gene core and checks that
//! both share their steady states and stability.

use msequiv::analysis::{check_equivalence, EquivalenceOptions, LiftSpec};
use msequiv::construction::assemble_high_dim;
use msequiv::fixture::{msc_low_dim, msc_sign_matrix, EPSILON, MASTERS, MODULE_DEGRADATION};
use msequiv::{check_modular_structure, LowDimModel};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let low = LowDimModel::new(msc_low_dim());
    let s_high = msc_sign_matrix();
    let assignment = check_modular_structure(&s_high, MASTERS)?;
    let high = assemble_high_dim(&low, &s_high, &assignment, &MODULE_DEGRADATION, &[EPSILON; MASTERS])?;

    let report = check_equivalence(&low, &high, &LiftSpec::of(&high), &EquivalenceOptions::default())?;
    for p in &report.pairs {
        let z: Vec<String> = p.z.iter().map(|v| format!("{v:.4}")).collect();
        let t = p.nyquist.as_ref().map(|n| n.tube);
        println!(
            "z = ({})  unstable {} / {}  windings {:?}  deviation {:.3e}  tube radius {:.3e}",
            z.join(", "),
            p.low_unstable,
            p.high_unstable,
            t.map(|t| (t.low_winding, t.high_winding)),
            t.map_or(f64::NAN, |t| t.max_deviation),
            t.map_or(f64::NAN, |t| t.epsilon),
        );
    }
    println!("equivalent: {}", report.verdict);
    Ok(())
}
