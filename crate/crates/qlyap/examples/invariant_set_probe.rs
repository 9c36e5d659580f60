//! Probing the invariant set of a non-ideal model: integrate a batch of
//! random initial states, classify the endpoints, and verify the structural
//! relations that members of the invariant set must satisfy.
//!
//! ```bash
//! cargo run --release --example invariant_set_probe
//! ```

use qlyap::dynamics::{ClassifierThresholds, IntegratorOptions};
use qlyap::experiment::ExperimentConfig;
use qlyap::stability::invariant_set_probe;
use qlyap::state::DensityMatrix;

fn main() -> qlyap::Result<()> {
    let cfg = ExperimentConfig::from_preset("example3-qutrit")?
        .with_target(DensityMatrix::from_diagonal(&[0.0, 1.0, 0.0])?)?;
    let opts = IntegratorOptions::default();
    let report =
        invariant_set_probe(&cfg.model, 20, 1, &opts, &ClassifierThresholds::default(), None)?;
    println!(
        "{} converged, {} flatlined, {} undecided",
        report.n_converged, report.n_flatlined, report.n_undecided
    );
    for s in report.samples.iter().filter(|s| s.relation_residuals.is_some()) {
        let r = s.relation_residuals.unwrap();
        let m = s.lasalle.unwrap();
        println!(
            "seed {:>3}: V = {:.3e}, commutator offdiag {:.2e}, relation residuals \
             {:.1e} {:.1e} {:.1e} {:.1e}",
            s.seed, s.final_v, m.max_offdiagonal, r[0], r[1], r[2], r[3]
        );
    }
    Ok(())
}
