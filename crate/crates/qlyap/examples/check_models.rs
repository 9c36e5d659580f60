//! Regularity/connectivity diagnostics for every built-in preset.
//!
//! ```bash
//! cargo run --example check_models
//! ```

use qlyap::experiment::{ExperimentConfig, preset_names, run_check};

fn main() -> qlyap::Result<()> {
    for name in preset_names() {
        let cfg = ExperimentConfig::from_preset(name)?;
        let report = run_check(&cfg)?;
        print!("{}", report.render());
        println!();
    }
    Ok(())
}
