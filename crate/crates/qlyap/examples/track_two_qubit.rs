//! Tracking non-stationary pure targets on the ideal two-qubit model.
//!
//! An unbalanced superposition tracks cleanly; the maximally entangled
//! target is exceptional (its invariant set reaches every distance level),
//! so most runs stop converging at a finite distance.
//!
//! ```bash
//! cargo run --release --example track_two_qubit
//! ```

use qlyap::algebra::C64;
use qlyap::experiment::{ExperimentConfig, run_track};
use qlyap::state::DensityMatrix;

fn main() -> qlyap::Result<()> {
    let base = ExperimentConfig::from_preset("twoqubit-ideal")?;
    let c = |re: f64| C64::new(re, 0.0);
    let targets = [
        ("unbalanced (1,0,0,2)/sqrt(5)", vec![c(1.0), c(0.0), c(0.0), c(2.0)]),
        ("maximally entangled (1,0,0,1)/sqrt(2)", vec![c(1.0), c(0.0), c(0.0), c(1.0)]),
    ];
    for (label, psi) in targets {
        let mut cfg = base.with_target(DensityMatrix::pure(&psi)?)?;
        cfg.n_samples = 20;
        cfg.seed = 11;
        let (summary, _) = run_track(&cfg)?;
        let e = summary.exceptionality.as_ref().expect("pure target");
        println!(
            "{label}: exceptional = {}, {} converged, {} flatlined, {} intermediate",
            e.exceptional,
            summary.counts.converged,
            summary.counts.flatlined,
            summary.n_intermediate.unwrap_or(0)
        );
    }
    Ok(())
}
