//! Variational view of the distance landscape on an isospectral orbit:
//! Hessian signatures at the diagonal stationary states and at a point of a
//! critical manifold, where flat directions appear.
//!
//! ```bash
//! cargo run --example stationary_landscape
//! ```

use qlyap::algebra::{C64, CMatrix, GeneratorBasis};
use qlyap::dynamics::lyapunov_value;
use qlyap::experiment::ExperimentConfig;
use qlyap::stability::{enumerate_diagonal_stationary, hessian_signature};
use qlyap::state::DensityMatrix;

fn main() -> qlyap::Result<()> {
    let cfg = ExperimentConfig::from_preset("qutrit-ideal")?;
    let (model, _) = cfg.model.in_drift_eigenbasis()?;
    let basis = GeneratorBasis::new(3)?;
    println!("target diag(1/4, 1/4, 1/2); Hessian inertia (+/-/0) of V on the orbit:");
    for state in enumerate_diagonal_stationary(&model)? {
        let sig = hessian_signature(&state, model.target(), &basis)?;
        let diag: Vec<f64> = (0..3).map(|i| state.matrix()[(i, i)].re).collect();
        println!(
            "  {:?}  V0 = {:.4}  inertia ({}, {}, {})",
            diag,
            lyapunov_value(&state, model.target()),
            sig.n_plus,
            sig.n_minus,
            sig.n_zero
        );
    }

    // a non-diagonal point on the top critical manifold: same spectrum,
    // commutes with the target, two flat directions along the manifold
    let c = |re: f64| C64::new(re, 0.0);
    let mut m = CMatrix::zeros(3, 3);
    m[(0, 0)] = c(0.375);
    m[(1, 1)] = c(0.375);
    m[(0, 1)] = c(0.125);
    m[(1, 0)] = c(0.125);
    m[(2, 2)] = c(0.25);
    let point = DensityMatrix::new(m)?;
    let sig = hessian_signature(&point, model.target(), &basis)?;
    println!(
        "  block point on the critical manifold: V0 = {:.4}  inertia ({}, {}, {})",
        lyapunov_value(&point, model.target()),
        sig.n_plus,
        sig.n_minus,
        sig.n_zero
    );
    Ok(())
}
