//! Batch runs toward two stationary pure targets of the equispaced-drift
//! qutrit: the outer level converges from everywhere below the top distance
//! level, the middle level stalls on a center manifold.
//!
//! ```bash
//! cargo run --release --example simulate_qutrit
//! ```

use qlyap::experiment::{ExperimentConfig, run_simulate};
use qlyap::state::DensityMatrix;

fn main() -> qlyap::Result<()> {
    let base = ExperimentConfig::from_preset("example3-qutrit")?;
    for (label, diag) in [("outer level", [1.0, 0.0, 0.0]), ("middle level", [0.0, 1.0, 0.0])] {
        let mut cfg = base.with_target(DensityMatrix::from_diagonal(&diag)?)?;
        cfg.n_samples = 50;
        cfg.seed = 1;
        let (summary, _) = run_simulate(&cfg)?;
        println!(
            "target diag{diag:?} ({label}): {} converged, {} flatlined, {} undecided",
            summary.counts.converged, summary.counts.flatlined, summary.counts.undecided
        );
        if summary.counts.flatlined > 0 {
            let mut levels: Vec<f64> = summary
                .samples
                .iter()
                .filter(|s| s.final_v > 1e-3)
                .map(|s| s.final_v)
                .collect();
            levels.sort_by(|a, b| a.partial_cmp(b).unwrap());
            println!(
                "  flatline levels span {:.3e} .. {:.3e}",
                levels.first().unwrap(),
                levels.last().unwrap()
            );
        }
    }
    Ok(())
}
