//! Follows every stable MSC state in `uO` and in `m` and prints the folds.

use msequiv::analysis::{find_steady_states, SteadyStateOptions};
use msequiv::continuation::{continue_branch, ContinuationOptions};
use msequiv::fixture::msc_low_dim;
use msequiv::{LowDimModel, Parametric};

fn main() {
    let base = LowDimModel::new(msc_low_dim());
    for (param, range) in [("uO", (0.0, 6.0)), ("m", (1.0, 6.0))] {
        let mut model = base.clone();
        let idx = model.parameter_index(param).unwrap();
        model.set_parameter(idx, range.0);
        let states = find_steady_states(&model, &SteadyStateOptions::default());
        for (i, s) in states.iter().enumerate().filter(|(_, s)| s.is_stable()) {
            match continue_branch(&model, param, range, &s.x, &ContinuationOptions::default()) {
                Ok(b) => {
                    let folds: Vec<String> = b
                        .folds
                        .iter()
                        .map(|f| format!("{:.4} ({}->{})", f.param, f.unstable_before, f.unstable_after))
                        .collect();
                    println!(
                        "{param} state {}: {} points, {:?}, folds [{}], events {}",
                        i + 1,
                        b.points.len(),
                        b.termination,
                        folds.join(", "),
                        b.events.len()
                    );
                }
                Err(e) => println!("{param} state {}: {e}", i + 1),
            }
        }
    }
}
