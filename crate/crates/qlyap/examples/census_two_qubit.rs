//! Stationary-state census of the ideal two-qubit model with a doubly
//! degenerate target spectrum: one sink, one source, and four centers with
//! two pairs of purely imaginary eigenvalues each.
//!
//! ```bash
//! cargo run --example census_two_qubit
//! ```

use qlyap::experiment::{ExperimentConfig, run_census};

fn main() -> qlyap::Result<()> {
    for preset in ["twoqubit-ideal", "qutrit-ideal"] {
        let cfg = ExperimentConfig::from_preset(preset)?;
        let report = run_census(&cfg)?;
        print!("{}", report.render());
        println!();
    }
    Ok(())
}
