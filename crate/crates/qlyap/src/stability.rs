//! Stationary-state analysis: linearization of the reduced flow, tangent
//! frames of the isospectral orbit, eigenvalue classification, enumeration of
//! diagonal stationary states, finite-difference Hessian signatures of the
//! distance function on the orbit, and a Monte Carlo probe of the invariant
//! set.

use nalgebra::SymmetricEigen;
use serde::Serialize;

use crate::algebra::{C64, CMatrix, GeneratorBasis, RMatrix, RVector, commutator};
use crate::dynamics::{
    ClassifierThresholds, ControlModel, IntegratorOptions, LasalleCheck, RunVerdict,
    classify_trajectory, integrate, lasalle_membership, lyapunov_value,
};
use crate::error::{Error, Result};
use crate::state::{
    CLUSTER_TOL, DensityMatrix, max_entry_norm, sample_isospectral, spectrum_signature,
};

/// Bloch-norm residual below which a point counts as stationary for the
/// closed-loop reduced flow.
pub const STATIONARY_RHS_TOL: f64 = 1e-8;

/// Singular values above this are tangent directions ...
const RANK_TOL: f64 = 1e-9;
/// ... and values inside (RANK_AMBIG_LO, RANK_AMBIG_HI) are refused.
const RANK_AMBIG_LO: f64 = 1e-10;
const RANK_AMBIG_HI: f64 = 1e-8;

/// Jacobian of the reduced closed-loop flow at `s0`:
/// `A0 + f(s0) A1 + (A1 s0)(s_d^T A1)`. At a stationary point the feedback
/// term vanishes and this is the rank-one update of the drift adjoint.
///
/// Errors unless the target is stationary and `s0` is a fixed point of the
/// reduced flow (residual below [`STATIONARY_RHS_TOL`]).
pub fn linearization(s0: &RVector, model: &ControlModel) -> Result<RMatrix> {
    let rhs = model.reduced_bloch_rhs(s0)?;
    let residual = rhs.amax();
    if residual > STATIONARY_RHS_TOL {
        return Err(Error::NotStationaryPoint(residual));
    }
    let a0 = model.drift_adjoint();
    let a1 = model.control_adjoint();
    let f0 = model.reduced_control(s0);
    let u = a1 * s0;
    let w = a1.transpose() * model.target_bloch();
    Ok(a0 + a1 * f0 + u * w.transpose())
}

/// Orthonormal frame of the isospectral orbit's tangent space at `rho0`,
/// returned as the columns of a `(n^2-1) x n_M` matrix of Bloch coordinates.
///
/// The tangent space is spanned by `{-i[mu_k, rho0]}`; its rank equals
/// `n^2 - sum n_l^2` for the state's spectrum. Rank is decided by singular
/// value: above 1e-9 is tangent, below 1e-10 is null, anything in between is
/// ambiguous and errors out.
pub fn tangent_frame(rho0: &DensityMatrix, basis: &GeneratorBasis) -> Result<RMatrix> {
    let m = basis.len();
    let mut t = RMatrix::zeros(m, m);
    for k in 0..m {
        let v = commutator(basis.generator(k), rho0.matrix())? * C64::new(0.0, -1.0);
        let col = basis.bloch_of_matrix(&v)?;
        t.set_column(k, &col);
    }
    let svd = t.svd(true, false);
    for &s in svd.singular_values.iter() {
        if s > RANK_AMBIG_LO && s < RANK_AMBIG_HI {
            return Err(Error::AmbiguousRank(s));
        }
    }
    let rank = svd.singular_values.iter().filter(|&&s| s > RANK_TOL).count();
    let u = svd.u.expect("requested");
    Ok(u.columns(0, rank).clone_owned())
}

/// Stability verdict of a stationary state of the reduced flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityVerdict {
    HyperbolicSink,
    HyperbolicSource,
    HyperbolicSaddle,
    CenterWithUnstable,
    Center,
    Degenerate,
}

impl std::fmt::Display for StabilityVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StabilityVerdict::HyperbolicSink => "hyperbolic_sink",
            StabilityVerdict::HyperbolicSource => "hyperbolic_source",
            StabilityVerdict::HyperbolicSaddle => "hyperbolic_saddle",
            StabilityVerdict::CenterWithUnstable => "center_with_unstable",
            StabilityVerdict::Center => "center",
            StabilityVerdict::Degenerate => "degenerate",
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StationaryClassification {
    #[serde(skip)]
    pub state: DensityMatrix,
    /// Distance level `V(state, target)`.
    pub lyapunov_level: f64,
    /// Dimension of the orbit tangent space at the state.
    pub tangent_dim: usize,
    pub n_stable: usize,
    pub n_unstable: usize,
    pub n_center: usize,
    /// Eigenvalues of the linearization restricted to the tangent space.
    pub eigenvalues: Vec<(f64, f64)>,
    pub verdict: StabilityVerdict,
    /// Threshold separating "zero real part" from hyperbolic directions.
    pub zero_eps: f64,
    /// How far the linearization maps tangent directions out of the tangent
    /// space; above 1e-6 the verdict is `Degenerate`.
    pub projection_residual: f64,
}

/// Restricts the linearization at `rho0` to the orbit tangent space and
/// counts eigenvalue real parts against `zero_eps` (default: 1e-7 times the
/// spectral norm of the full linearization).
///
/// `rho0` must be stationary for the closed loop: it commutes with the drift
/// and the feedback against the target vanishes.
pub fn classify_stationary(
    rho0: &DensityMatrix,
    model: &ControlModel,
    zero_eps: Option<f64>,
) -> Result<StationaryClassification> {
    let s0 = model.basis().bloch_of_matrix(rho0.matrix())?;
    let d = linearization(&s0, model)?;
    let frame = tangent_frame(rho0, model.basis())?;
    let tangent_dim = frame.ncols();
    let reduced = frame.transpose() * &d * &frame;
    let residual = (&d * &frame - &frame * &reduced).amax();
    let spectral_norm = d.clone().svd(false, false).singular_values[0];
    let eps = zero_eps.unwrap_or(1e-7 * spectral_norm);

    let eigs = reduced.complex_eigenvalues();
    let mut eigenvalues: Vec<(f64, f64)> = eigs.iter().map(|z| (z.re, z.im)).collect();
    eigenvalues.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n_stable = eigenvalues.iter().filter(|(re, _)| *re < -eps).count();
    let n_unstable = eigenvalues.iter().filter(|(re, _)| *re > eps).count();
    let n_center = tangent_dim - n_stable - n_unstable;

    let verdict = if residual > 1e-6 {
        StabilityVerdict::Degenerate
    } else if n_center == 0 {
        if n_stable == tangent_dim {
            StabilityVerdict::HyperbolicSink
        } else if n_unstable == tangent_dim {
            StabilityVerdict::HyperbolicSource
        } else {
            StabilityVerdict::HyperbolicSaddle
        }
    } else if n_unstable > 0 {
        StabilityVerdict::CenterWithUnstable
    } else {
        StabilityVerdict::Center
    };

    Ok(StationaryClassification {
        state: rho0.clone(),
        lyapunov_level: lyapunov_value(rho0, model.target()),
        tangent_dim,
        n_stable,
        n_unstable,
        n_center,
        eigenvalues,
        verdict,
        zero_eps: eps,
        projection_residual: residual,
    })
}

/// All distinct diagonal matrices carrying the target's spectrum. Each is
/// stationary for the closed loop (it commutes with the diagonal drift and
/// produces zero feedback against the diagonal target).
///
/// Requires a stationary target and the model in the drift eigenbasis.
pub fn enumerate_diagonal_stationary(model: &ControlModel) -> Result<Vec<DensityMatrix>> {
    if !model.target_stationary() {
        return Err(Error::NonStationaryTarget);
    }
    let h0 = model.drift().matrix();
    let n = model.dim();
    let offdiag = (0..n)
        .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
        .map(|(i, j)| h0[(i, j)].norm())
        .fold(0.0f64, f64::max);
    if offdiag > 1e-10 {
        return Err(Error::NotDriftEigenbasis(offdiag));
    }
    let sig = spectrum_signature(model.target(), CLUSTER_TOL)?;
    // permute value indices to dedupe repeated eigenvalues exactly
    let mut indices: Vec<usize> = sig
        .multiplicities
        .iter()
        .enumerate()
        .flat_map(|(v, &m)| std::iter::repeat(v).take(m))
        .collect();
    indices.sort_unstable();
    let mut out = Vec::new();
    loop {
        let diag: Vec<f64> = indices.iter().map(|&v| sig.distinct_values[v]).collect();
        let state = DensityMatrix::from_diagonal(&diag)?;
        debug_assert!(crate::state::stationarity_residual(model.drift(), &state) <= 1e-10);
        debug_assert!(model.control_field(&state, model.target()).abs() <= 1e-10);
        out.push(state);
        if !next_permutation(&mut indices) {
            break;
        }
    }
    Ok(out)
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = (0..v.len().saturating_sub(1)).rev().find(|&i| v[i] < v[i + 1]) else {
        return false;
    };
    let j = (i + 1..v.len()).rev().find(|&j| v[j] > v[i]).expect("i was increasable");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

/// Inertia of the distance function restricted to the orbit through `rho0`.
#[derive(Debug, Clone, Serialize)]
pub struct HessianSignature {
    pub n_plus: usize,
    pub n_minus: usize,
    pub n_zero: usize,
    pub eigenvalues: Vec<f64>,
}

/// Second-derivative signature of `V(., rho_d)` on the isospectral orbit at a
/// critical point `rho0`, by central finite differences (step 1e-4) of the
/// exactly evaluated distance along exponential curves
/// `exp(-i G t) rho0 exp(i G t)`.
///
/// The generators `G` realize the orthonormal tangent frame, so the inertia
/// is counted in an orthonormal chart (threshold 1e-6). Errors when
/// `[rho0, rho_d] != 0` or when the tangent gradient does not vanish.
pub fn hessian_signature(
    rho0: &DensityMatrix,
    rho_d: &DensityMatrix,
    basis: &GeneratorBasis,
) -> Result<HessianSignature> {
    let comm_residual = max_entry_norm(&commutator(rho0.matrix(), rho_d.matrix())?);
    if comm_residual > 1e-8 {
        return Err(Error::NonCommutingPair(comm_residual));
    }
    let frame = tangent_frame(rho0, basis)?;
    let m = frame.ncols();
    if m == 0 {
        return Ok(HessianSignature { n_plus: 0, n_minus: 0, n_zero: 0, eigenvalues: vec![] });
    }
    // gradient along tangent directions must vanish at a critical point
    let s0 = basis.bloch_of_matrix(rho0.matrix())?;
    let s_d = basis.bloch_of_matrix(rho_d.matrix())?;
    let grad = frame.transpose() * (&s0 - &s_d);
    if grad.amax() > 1e-8 {
        return Err(Error::NotCriticalPoint(grad.amax()));
    }

    let generators: Vec<CMatrix> = (0..m)
        .map(|i| tangent_generator(&frame.column(i).clone_owned(), rho0, basis))
        .collect::<Result<_>>()?;
    let h = 1e-4;
    let v_at = |g: &CMatrix, t: f64| -> f64 {
        let rho_t = conjugate_by_exponential(g, rho0.matrix(), t);
        0.5 * (&rho_t - rho_d.matrix()).iter().map(|z| z.norm_sqr()).sum::<f64>()
    };
    let v0 = lyapunov_value(rho0, rho_d);
    let mut hess = RMatrix::zeros(m, m);
    for a in 0..m {
        hess[(a, a)] = (v_at(&generators[a], h) - 2.0 * v0 + v_at(&generators[a], -h)) / (h * h);
        for b in (a + 1)..m {
            let gp = &generators[a] + &generators[b];
            let gm = &generators[a] - &generators[b];
            let value = (v_at(&gp, h) + v_at(&gp, -h) - v_at(&gm, h) - v_at(&gm, -h))
                / (4.0 * h * h);
            hess[(a, b)] = value;
            hess[(b, a)] = value;
        }
    }
    let mut eigenvalues: Vec<f64> =
        SymmetricEigen::new(hess).eigenvalues.iter().cloned().collect();
    eigenvalues.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let thresh = 1e-6;
    let n_plus = eigenvalues.iter().filter(|&&e| e > thresh).count();
    let n_minus = eigenvalues.iter().filter(|&&e| e < -thresh).count();
    let n_zero = m - n_plus - n_minus;
    Ok(HessianSignature { n_plus, n_minus, n_zero, eigenvalues })
}

/// Minimal-norm Hermitian `G` with `-i[G, rho0]` equal to the tangent vector
/// with Bloch coordinates `u`.
fn tangent_generator(
    u: &RVector,
    rho0: &DensityMatrix,
    basis: &GeneratorBasis,
) -> Result<CMatrix> {
    let n = rho0.dim();
    let target = basis.matrix_of_bloch(u)? - CMatrix::identity(n, n) * C64::new(1.0 / n as f64, 0.0);
    let se = SymmetricEigen::new(rho0.matrix().clone());
    let w = &se.eigenvectors;
    let in_eigenbasis = w.adjoint() * target * w;
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let gap = se.eigenvalues[j] - se.eigenvalues[i];
            if gap.abs() > 1e-9 {
                g[(i, j)] = C64::new(0.0, 1.0) * in_eigenbasis[(i, j)] / C64::new(gap, 0.0);
            }
        }
    }
    Ok(w * g * w.adjoint())
}

/// `exp(-i G t) m exp(i G t)` for Hermitian `G`.
fn conjugate_by_exponential(g: &CMatrix, m: &CMatrix, t: f64) -> CMatrix {
    let se = SymmetricEigen::new(g.clone());
    let n = g.nrows();
    let w = &se.eigenvectors;
    let phases = CMatrix::from_fn(n, n, |i, j| {
        if i == j {
            let phi = -se.eigenvalues[i] * t;
            C64::new(phi.cos(), phi.sin())
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let u = w * phases * w.adjoint();
    &u * m * u.adjoint()
}

/// Per-sample record of [`invariant_set_probe`].
#[derive(Debug, Clone, Serialize)]
pub struct ProbeSample {
    pub seed: u64,
    pub verdict: RunVerdict,
    pub final_v: f64,
    pub log_slope: f64,
    /// Invariant-set membership of the endpoint pair, for flatlined runs.
    pub lasalle: Option<LasalleCheck>,
    /// Residuals of the structural endpoint relations for the equispaced
    /// qutrit probe (see [`equispaced_qutrit_relation_residuals`]).
    pub relation_residuals: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub samples: Vec<ProbeSample>,
    pub n_converged: usize,
    pub n_flatlined: usize,
    pub n_undecided: usize,
    /// Loose tolerance used for the endpoint membership checks.
    pub membership_tol: f64,
}

/// Integrates `n_samples` Haar-random isospectral initial states, classifies
/// each endpoint, and verifies invariant-set membership (off-diagonal
/// commutator entries) at flatlined endpoints with tolerance `membership_tol`
/// (1e-3 unless overridden).
///
/// When the model is the equispaced-drift qutrit probing the middle-level
/// pure target `diag(0, 1, 0)`, the known structural relations of its
/// invariant set are evaluated at every flatlined endpoint as well.
pub fn invariant_set_probe(
    model: &ControlModel,
    n_samples: usize,
    seed: u64,
    opts: &IntegratorOptions,
    thresholds: &ClassifierThresholds,
    membership_tol: Option<f64>,
) -> Result<ProbeReport> {
    if !model.target_stationary() {
        return Err(Error::NonStationaryTarget);
    }
    let membership_tol = membership_tol.unwrap_or(1e-3);
    let check_relations = is_middle_level_qutrit_target(model);
    let mut samples = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let sample_seed = seed.wrapping_add(i as u64);
        let rho0 = sample_isospectral(model.target(), sample_seed);
        let traj = integrate(model, &rho0, opts)?;
        let verdict = classify_trajectory(&traj, thresholds);
        let endpoint = traj.states.last().expect("trajectory has samples");
        let (lasalle, relation_residuals) = if verdict.verdict == RunVerdict::Flatlined {
            let check = lasalle_membership(endpoint, model.target(), model, membership_tol);
            let rels = check_relations.then(|| equispaced_qutrit_relation_residuals(endpoint));
            (Some(check), rels)
        } else {
            (None, None)
        };
        samples.push(ProbeSample {
            seed: sample_seed,
            verdict: verdict.verdict,
            final_v: verdict.final_v,
            log_slope: verdict.log_slope,
            lasalle,
            relation_residuals,
        });
    }
    let count = |v: RunVerdict| samples.iter().filter(|s| s.verdict == v).count();
    Ok(ProbeReport {
        n_converged: count(RunVerdict::Converged),
        n_flatlined: count(RunVerdict::Flatlined),
        n_undecided: count(RunVerdict::Undecided),
        samples,
        membership_tol,
    })
}

fn is_middle_level_qutrit_target(model: &ControlModel) -> bool {
    if model.dim() != 3 {
        return false;
    }
    let expect = [0.0, 1.0, 0.0];
    let m = model.target().matrix();
    let mut dev: f64 = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { expect[i] } else { 0.0 };
            dev = dev.max((m[(i, j)] - C64::new(want, 0.0)).norm());
        }
    }
    dev <= 1e-9
}

/// Residuals of the invariant-set relations for a pure qutrit state `rho`
/// probed against the middle-level target `diag(0, 1, 0)` under an
/// equispaced drift with fully connected coupling:
/// `r11 = r33`, `r12 = r23`, `|r13| = r11`, and `|r12|^2 = r11 - 2 r11^2`.
///
/// The last relation is the squared form that purity forces on members with
/// a nonvanishing middle component.
pub fn equispaced_qutrit_relation_residuals(rho: &DensityMatrix) -> [f64; 4] {
    let m = rho.matrix();
    let r11 = m[(0, 0)].re;
    let r33 = m[(2, 2)].re;
    let r12 = m[(0, 1)];
    let r23 = m[(1, 2)];
    let r13 = m[(0, 2)];
    [
        (r11 - r33).abs(),
        (r12 - r23).norm(),
        (r13.norm() - r11).abs(),
        (r12.norm_sqr() - (r11 - 2.0 * r11 * r11)).abs(),
    ]
}
