//! Closed-loop dynamics: the feedback law, the distance function it
//! decreases, the extended autonomous system on the product of isospectral
//! orbits, the reduced real bilinear system for stationary targets, and a
//! verified adaptive integrator front end.
//!
//! The feedback is `f(rho, rho_d) = Tr([-iH1, rho] rho_d)`, chosen so that
//! `V(rho, rho_d) = Tr[(rho - rho_d)^2] / 2` satisfies `dV/dt = -f^2 <= 0`
//! along every closed-loop solution. In Bloch coordinates the same flow reads
//! `ds/dt = (A0 + f A1) s` with `f = s_d^T A1 s` and real antisymmetric
//! adjoint matrices `A0`, `A1`.

use nalgebra::DVector;
use serde::Serialize;

use crate::algebra::{C64, CMatrix, GeneratorBasis, RMatrix, RVector, commutator,
    trace_of_product};
use crate::error::{Error, Result};
use crate::integrate::{Dopri5Options, PostStep, Sample, dopri5};
use crate::state::{
    ConnectivityReport, DensityMatrix, Hamiltonian, RegularityReport, CONNECTIVITY_TOL,
    REGULARITY_TOL, hermitian_eigenvalues_ascending, hermiticity_residual,
    is_fully_connected, is_strongly_regular, max_entry_norm,
};

/// Max commutator entry below which a target counts as stationary.
pub const STATIONARITY_TOL: f64 = 1e-10;

/// Joint regularity/connectivity verdict for a Hamiltonian pair, evaluated
/// in the drift eigenbasis.
#[derive(Debug, Clone, Serialize)]
pub struct IdealityReport {
    pub regularity: RegularityReport,
    pub connectivity: ConnectivityReport,
}

impl IdealityReport {
    pub fn ideal(&self) -> bool {
        self.regularity.strongly_regular && self.connectivity.fully_connected
    }
}

/// Immutable bundle of a control problem: drift `H0`, control `H1`, initial
/// target state, the generator basis, and the derived real antisymmetric
/// adjoint matrices. Safe to share across threads.
#[derive(Debug, Clone)]
pub struct ControlModel {
    h0: Hamiltonian,
    h1: Hamiltonian,
    target: DensityMatrix,
    basis: GeneratorBasis,
    drift_adjoint: RMatrix,
    control_adjoint: RMatrix,
    target_bloch: RVector,
    target_stationary: bool,
    ideality: IdealityReport,
}

impl ControlModel {
    /// Builds the model, computing `A(k, j) = Tr(i H [mu_k, mu_j])` for both
    /// Hamiltonians. Errors on dimension mismatch.
    pub fn new(h0: Hamiltonian, h1: Hamiltonian, target: DensityMatrix) -> Result<Self> {
        let n = h0.dim();
        if h1.dim() != n || target.dim() != n {
            return Err(Error::DimensionMismatch(format!(
                "model pieces disagree: H0 {}x{0}, H1 {1}x{1}, target {2}x{2}",
                n,
                h1.dim(),
                target.dim()
            )));
        }
        let basis = GeneratorBasis::new(n)?;
        let drift_adjoint = adjoint_matrix(&h0, &basis);
        let control_adjoint = adjoint_matrix(&h1, &basis);
        let target_bloch = basis.bloch_of_matrix(target.matrix())?;
        let target_stationary =
            max_entry_norm(&commutator(h0.matrix(), target.matrix())?) <= STATIONARITY_TOL;
        let frame = h0.eigen_frame();
        let h1_in_frame = Hamiltonian::new(frame.to_eigenbasis(h1.matrix()))?;
        let ideality = IdealityReport {
            regularity: is_strongly_regular(&h0, REGULARITY_TOL),
            connectivity: is_fully_connected(&h1_in_frame, CONNECTIVITY_TOL),
        };
        Ok(Self {
            h0,
            h1,
            target,
            basis,
            drift_adjoint,
            control_adjoint,
            target_bloch,
            target_stationary,
            ideality,
        })
    }

    pub fn dim(&self) -> usize {
        self.h0.dim()
    }

    pub fn drift(&self) -> &Hamiltonian {
        &self.h0
    }

    pub fn control(&self) -> &Hamiltonian {
        &self.h1
    }

    pub fn target(&self) -> &DensityMatrix {
        &self.target
    }

    pub fn basis(&self) -> &GeneratorBasis {
        &self.basis
    }

    /// `A0`, the adjoint matrix of the drift.
    pub fn drift_adjoint(&self) -> &RMatrix {
        &self.drift_adjoint
    }

    /// `A1`, the adjoint matrix of the control.
    pub fn control_adjoint(&self) -> &RMatrix {
        &self.control_adjoint
    }

    /// Bloch coordinates of the initial target.
    pub fn target_bloch(&self) -> &RVector {
        &self.target_bloch
    }

    pub fn target_stationary(&self) -> bool {
        self.target_stationary
    }

    pub fn ideality(&self) -> &IdealityReport {
        &self.ideality
    }

    /// The same model expressed in the drift eigenbasis (ascending
    /// eigenvalues). Analysis of stationary structure assumes this frame.
    pub fn in_drift_eigenbasis(&self) -> Result<(Self, crate::state::EigenFrame)> {
        let frame = self.h0.eigen_frame();
        let h0 = Hamiltonian::new(frame.to_eigenbasis(self.h0.matrix()))?;
        let h1 = Hamiltonian::new(frame.to_eigenbasis(self.h1.matrix()))?;
        let target = DensityMatrix::new(frame.to_eigenbasis(self.target.matrix()))?;
        Ok((Self::new(h0, h1, target)?, frame))
    }

    /// Feedback value `Tr([-iH1, rho] rho_d)`.
    pub fn control_field(&self, rho: &DensityMatrix, rho_d: &DensityMatrix) -> f64 {
        control_field_raw(self.h1.matrix(), rho.matrix(), rho_d.matrix())
    }

    /// Right-hand side of the extended system:
    /// `(-i[H0 + f H1, rho], -i[H0, rho_d])`.
    pub fn extended_rhs(
        &self,
        rho: &DensityMatrix,
        rho_d: &DensityMatrix,
    ) -> (CMatrix, CMatrix) {
        let f = self.control_field(rho, rho_d);
        let h = self.h0.matrix() + self.h1.matrix() * C64::new(f, 0.0);
        let drho = minus_i_commutator(&h, rho.matrix());
        let drho_d = minus_i_commutator(self.h0.matrix(), rho_d.matrix());
        (drho, drho_d)
    }

    /// Right-hand side of the reduced Bloch system
    /// `(A0 + (s_d^T A1 s) A1) s`; defined only for stationary targets.
    pub fn reduced_bloch_rhs(&self, s: &RVector) -> Result<RVector> {
        if !self.target_stationary {
            return Err(Error::NonStationaryTarget);
        }
        let f = self.reduced_control(s);
        Ok(&self.drift_adjoint * s + (&self.control_adjoint * s) * f)
    }

    /// `f(s) = s_d^T A1 s`.
    pub fn reduced_control(&self, s: &RVector) -> f64 {
        self.target_bloch.dot(&(&self.control_adjoint * s))
    }
}

/// `Tr(i H [mu_k, mu_j])` over the basis, assembled with exact antisymmetry.
fn adjoint_matrix(h: &Hamiltonian, basis: &GeneratorBasis) -> RMatrix {
    let m = basis.len();
    let mut a = RMatrix::zeros(m, m);
    for k in 0..m {
        for j in (k + 1)..m {
            let c = commutator(basis.generator(k), basis.generator(j))
                .expect("basis generators share dimension");
            let v = (trace_of_product(h.matrix(), &c) * C64::new(0.0, 1.0)).re;
            a[(k, j)] = v;
            a[(j, k)] = -v;
        }
    }
    a
}

fn minus_i_commutator(h: &CMatrix, m: &CMatrix) -> CMatrix {
    (h * m - m * h) * C64::new(0.0, -1.0)
}

fn control_field_raw(h1: &CMatrix, rho: &CMatrix, rho_d: &CMatrix) -> f64 {
    // Tr([-iH1, rho] rho_d) = -i Tr(H1 [rho, rho_d])
    let c = rho * rho_d - rho_d * rho;
    (trace_of_product(h1, &c) * C64::new(0.0, -1.0)).re
}

/// Squared Hilbert-Schmidt distance halved: `Tr[(rho1 - rho2)^2] / 2`.
pub fn lyapunov_value(rho1: &DensityMatrix, rho2: &DensityMatrix) -> f64 {
    let d = rho1.matrix() - rho2.matrix();
    0.5 * d.iter().map(|z| z.norm_sqr()).sum::<f64>()
}

/// Options of [`integrate`]; integrator knobs plus the evolution mode.
#[derive(Debug, Clone, Serialize)]
pub struct IntegratorOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_final: f64,
    pub sample_count: usize,
    /// Integrate the reduced Bloch system instead of the matrix system
    /// (stationary targets only).
    pub reduced_mode: bool,
    /// Re-project the state onto the initial spectrum every this many
    /// accepted steps; 0 disables re-projection so that spectrum drift stays
    /// meaningful as an error indicator.
    pub reprojection_interval: usize,
    /// For non-stationary targets, evaluate the target trajectory by exact
    /// conjugation with the free propagator instead of integrating it.
    pub exact_rotation_target: bool,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-11,
            abs_tol: 1e-13,
            t_final: 300.0,
            sample_count: 601,
            reduced_mode: false,
            reprojection_interval: 0,
            exact_rotation_target: false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct IntegratorStats {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rhs_evals: usize,
    /// Largest deviation of sorted state eigenvalues from their t = 0 values.
    pub max_spectrum_drift_state: f64,
    pub max_spectrum_drift_target: f64,
    pub max_trace_drift: f64,
    pub max_hermiticity_drift: f64,
    /// Eigenvalue mismatch between the initial state and the target; the
    /// control assumes isospectral initial data, so a large value here means
    /// the asymptotic distance cannot reach zero.
    pub initial_spectrum_mismatch: f64,
}

/// Time series of one closed-loop run.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DensityMatrix>,
    pub targets: Vec<DensityMatrix>,
    /// Feedback value at each sample.
    pub controls: Vec<f64>,
    /// Distance `V` at each sample.
    pub lyapunov: Vec<f64>,
    /// `dV/dt` from the dense-output derivative at each sample.
    pub lyapunov_rate: Vec<f64>,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn final_lyapunov(&self) -> f64 {
        *self.lyapunov.last().expect("trajectory has samples")
    }

    /// Least-squares slope of `log10 V` over the trailing `frac` of samples.
    pub fn log_slope(&self, frac: f64) -> f64 {
        let n = self.times.len();
        let m = ((n as f64 * frac).ceil() as usize).clamp(2, n);
        let ts = &self.times[n - m..];
        let vs = &self.lyapunov[n - m..];
        let lo = ts[0];
        let mut sx = 0.0;
        let mut sy = 0.0;
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for (t, v) in ts.iter().zip(vs) {
            let x = t - lo;
            let y = v.max(1e-300).log10();
            sx += x;
            sy += y;
            sxx += x * x;
            sxy += x * y;
        }
        let k = m as f64;
        let denom = k * sxx - sx * sx;
        if denom.abs() < 1e-300 { 0.0 } else { (k * sxy - sx * sy) / denom }
    }
}

enum Layout {
    /// State matrix only; target held exactly constant.
    FixedTarget,
    /// State and target matrices integrated jointly.
    Joint,
    /// State matrix only; target conjugated by the exact free propagator.
    ExactRotation,
    /// Bloch coordinates of the state; stationary target.
    Reduced,
}

/// Integrates the closed loop from `rho0` to `opts.t_final`, sampling at
/// `opts.sample_count` uniform times.
///
/// Stationary targets are held exactly constant rather than integrated. An
/// initial state that is not isospectral with the target is accepted (the
/// mismatch is recorded in the stats, since the control design presumes
/// isospectral data).
pub fn integrate(
    model: &ControlModel,
    rho0: &DensityMatrix,
    opts: &IntegratorOptions,
) -> Result<Trajectory> {
    if rho0.dim() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state is {}x{0}, model is {1}x{1}",
            rho0.dim(),
            model.dim()
        )));
    }
    if opts.sample_count < 2 {
        return Err(Error::Integration("sample_count must be at least 2".into()));
    }
    let layout = if opts.reduced_mode {
        if !model.target_stationary() {
            return Err(Error::NonStationaryTarget);
        }
        Layout::Reduced
    } else if model.target_stationary() {
        Layout::FixedTarget
    } else if opts.exact_rotation_target {
        Layout::ExactRotation
    } else {
        Layout::Joint
    };

    let n = model.dim();
    let len = 2 * n * n;
    let target0 = model.target().clone();
    let spectrum0 = rho0.eigenvalues();
    let target_spectrum0 = target0.eigenvalues();
    let initial_spectrum_mismatch = spectrum0
        .iter()
        .zip(&target_spectrum0)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);

    let times: Vec<f64> = (0..opts.sample_count)
        .map(|i| opts.t_final * i as f64 / (opts.sample_count - 1) as f64)
        .collect();
    let ode_opts = Dopri5Options {
        rel_tol: opts.rel_tol,
        abs_tol: opts.abs_tol,
        ..Default::default()
    };

    // propagator pieces for the exact-rotation mode
    let frame = model.drift().eigen_frame();
    let rotate_target = |t: f64| -> CMatrix {
        let n = model.dim();
        let u = frame.unitary();
        let d = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                let phi = -frame.eigenvalues()[i] * t;
                C64::new(phi.cos(), phi.sin())
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let prop = u * d * u.adjoint();
        &prop * target0.matrix() * prop.adjoint()
    };

    let (samples, stats) = match layout {
        Layout::Reduced => {
            let s0 = model.basis().bloch_of_matrix(rho0.matrix())?;
            let rhs = |_t: f64, y: &DVector<f64>| {
                model.reduced_bloch_rhs(y).expect("stationary target checked above")
            };
            let mut reproject = reprojection_hook_bloch(model, &spectrum0);
            let hook = (opts.reprojection_interval > 0).then(|| PostStep {
                interval: opts.reprojection_interval,
                apply: &mut reproject,
            });
            dopri5(rhs, 0.0, s0, opts.t_final, &times, &ode_opts, hook)?
        }
        Layout::FixedTarget | Layout::ExactRotation => {
            let exact_rotation = matches!(layout, Layout::ExactRotation);
            let y0 = encode_one(rho0.matrix());
            let rhs = |t: f64, y: &DVector<f64>| {
                let rho = decode_one(y, n);
                let rho_d =
                    if exact_rotation { rotate_target(t) } else { target0.matrix().clone() };
                let f = control_field_raw(model.control().matrix(), &rho, &rho_d);
                let h = model.drift().matrix() + model.control().matrix() * C64::new(f, 0.0);
                encode_one(&minus_i_commutator(&h, &rho))
            };
            let mut reproject = reprojection_hook_matrix(n, &spectrum0, 0);
            let hook = (opts.reprojection_interval > 0).then(|| PostStep {
                interval: opts.reprojection_interval,
                apply: &mut reproject,
            });
            dopri5(rhs, 0.0, y0, opts.t_final, &times, &ode_opts, hook)?
        }
        Layout::Joint => {
            let mut y0 = DVector::zeros(2 * len);
            y0.rows_mut(0, len).copy_from(&encode_one(rho0.matrix()));
            y0.rows_mut(len, len).copy_from(&encode_one(target0.matrix()));
            let rhs = |_t: f64, y: &DVector<f64>| {
                let rho = decode_one(&y.rows(0, len).clone_owned(), n);
                let rho_d = decode_one(&y.rows(len, len).clone_owned(), n);
                let f = control_field_raw(model.control().matrix(), &rho, &rho_d);
                let h = model.drift().matrix() + model.control().matrix() * C64::new(f, 0.0);
                let mut dy = DVector::zeros(2 * len);
                dy.rows_mut(0, len).copy_from(&encode_one(&minus_i_commutator(&h, &rho)));
                dy.rows_mut(len, len)
                    .copy_from(&encode_one(&minus_i_commutator(model.drift().matrix(), &rho_d)));
                dy
            };
            // re-project both blocks against their own reference spectra
            let mut reproject_state = reprojection_hook_matrix(n, &spectrum0, 0);
            let mut reproject_target = reprojection_hook_matrix(n, &target_spectrum0, len);
            let mut both = move |y: &mut DVector<f64>| {
                reproject_state(y);
                reproject_target(y);
            };
            let hook = (opts.reprojection_interval > 0).then(|| PostStep {
                interval: opts.reprojection_interval,
                apply: &mut both,
            });
            dopri5(rhs, 0.0, y0, opts.t_final, &times, &ode_opts, hook)?
        }
    };

    // assemble the trajectory from the dense samples
    let mut traj = Trajectory {
        times: Vec::with_capacity(samples.len()),
        states: Vec::with_capacity(samples.len()),
        targets: Vec::with_capacity(samples.len()),
        controls: Vec::with_capacity(samples.len()),
        lyapunov: Vec::with_capacity(samples.len()),
        lyapunov_rate: Vec::with_capacity(samples.len()),
        stats: IntegratorStats {
            steps_accepted: stats.accepted,
            steps_rejected: stats.rejected,
            rhs_evals: stats.rhs_evals,
            initial_spectrum_mismatch,
            ..Default::default()
        },
    };
    for sample in &samples {
        let (rho, rho_d, dv) = decode_sample(model, &layout, sample, &target0, &rotate_target)?;
        let f = control_field_raw(model.control().matrix(), rho.matrix(), rho_d.matrix());
        let v = lyapunov_value(&rho, &rho_d);
        update_drift_stats(&mut traj.stats, &rho, &rho_d, &spectrum0, &target_spectrum0);
        traj.times.push(sample.t);
        traj.controls.push(f);
        traj.lyapunov.push(v);
        traj.lyapunov_rate.push(dv);
        traj.states.push(rho);
        traj.targets.push(rho_d);
    }
    Ok(traj)
}

fn decode_sample(
    model: &ControlModel,
    layout: &Layout,
    sample: &Sample,
    target0: &DensityMatrix,
    rotate_target: &impl Fn(f64) -> CMatrix,
) -> Result<(DensityMatrix, DensityMatrix, f64)> {
    let n = model.dim();
    let len = 2 * n * n;
    match layout {
        Layout::Reduced => {
            let rho = DensityMatrix::new_unchecked(model.basis().matrix_of_bloch(&sample.y)?);
            let s_d = model.target_bloch();
            let dv = (&sample.y - s_d).dot(&sample.dy);
            Ok((rho, target0.clone(), dv))
        }
        Layout::FixedTarget => {
            let rho = DensityMatrix::new_unchecked(decode_one(&sample.y, n));
            let yd = encode_one(target0.matrix());
            let dv = (&sample.y - yd).dot(&sample.dy);
            Ok((rho, target0.clone(), dv))
        }
        Layout::ExactRotation => {
            let rho = DensityMatrix::new_unchecked(decode_one(&sample.y, n));
            let rho_d_mat = rotate_target(sample.t);
            let d_rho_d = minus_i_commutator(model.drift().matrix(), &rho_d_mat);
            let dv = (&sample.y - encode_one(&rho_d_mat)).dot(&(sample.dy.clone()
                - encode_one(&d_rho_d)));
            Ok((rho, DensityMatrix::new_unchecked(rho_d_mat), dv))
        }
        Layout::Joint => {
            let y_s = sample.y.rows(0, len).clone_owned();
            let y_t = sample.y.rows(len, len).clone_owned();
            let dy_s = sample.dy.rows(0, len).clone_owned();
            let dy_t = sample.dy.rows(len, len).clone_owned();
            let dv = (&y_s - &y_t).dot(&(dy_s - dy_t));
            Ok((
                DensityMatrix::new_unchecked(decode_one(&y_s, n)),
                DensityMatrix::new_unchecked(decode_one(&y_t, n)),
                dv,
            ))
        }
    }
}

fn update_drift_stats(
    stats: &mut IntegratorStats,
    rho: &DensityMatrix,
    rho_d: &DensityMatrix,
    spectrum0: &[f64],
    target_spectrum0: &[f64],
) {
    let drift = |m: &CMatrix, reference: &[f64]| -> f64 {
        hermitian_eigenvalues_ascending(m)
            .iter()
            .zip(reference)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    };
    stats.max_spectrum_drift_state =
        stats.max_spectrum_drift_state.max(drift(rho.matrix(), spectrum0));
    stats.max_spectrum_drift_target =
        stats.max_spectrum_drift_target.max(drift(rho_d.matrix(), target_spectrum0));
    stats.max_trace_drift = stats
        .max_trace_drift
        .max((rho.matrix().trace() - C64::new(1.0, 0.0)).norm())
        .max((rho_d.matrix().trace() - C64::new(1.0, 0.0)).norm());
    stats.max_hermiticity_drift = stats
        .max_hermiticity_drift
        .max(hermiticity_residual(rho.matrix()))
        .max(hermiticity_residual(rho_d.matrix()));
}

/// Polar retraction onto the isospectral orbit: keep the eigenvectors of the
/// drifted matrix, restore the reference spectrum.
fn project_to_spectrum(m: &CMatrix, reference: &[f64]) -> CMatrix {
    let se = nalgebra::SymmetricEigen::new(m.clone());
    let n = reference.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let mut out = CMatrix::zeros(n, n);
    for (rank, &col) in order.iter().enumerate() {
        let v = se.eigenvectors.column(col);
        let w = C64::new(reference[rank], 0.0);
        for i in 0..n {
            for j in 0..n {
                out[(i, j)] += w * v[i] * v[j].conj();
            }
        }
    }
    out
}

fn reprojection_hook_matrix(
    n: usize,
    reference: &[f64],
    offset: usize,
) -> impl FnMut(&mut DVector<f64>) + '_ {
    move |y: &mut DVector<f64>| {
        let len = 2 * n * n;
        let block = y.rows(offset, len).clone_owned();
        let projected = project_to_spectrum(&decode_one(&block, n), reference);
        y.rows_mut(offset, len).copy_from(&encode_one(&projected));
    }
}

fn reprojection_hook_bloch<'a>(
    model: &'a ControlModel,
    reference: &'a [f64],
) -> impl FnMut(&mut DVector<f64>) + 'a {
    move |s: &mut DVector<f64>| {
        let m = model.basis().matrix_of_bloch(s).expect("length fixed by integrator");
        let projected = project_to_spectrum(&m, reference);
        *s = model
            .basis()
            .bloch_of_matrix(&projected)
            .expect("projection preserves Hermiticity");
    }
}

/// Column-major real/imaginary flattening of a complex matrix.
fn encode_one(m: &CMatrix) -> DVector<f64> {
    let n = m.nrows();
    let mut y = DVector::zeros(2 * n * n);
    for (idx, z) in m.iter().enumerate() {
        y[idx] = z.re;
        y[n * n + idx] = z.im;
    }
    y
}

fn decode_one(y: &DVector<f64>, n: usize) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        let idx = j * n + i;
        C64::new(y[idx], y[n * n + idx])
    })
}

/// Result of the invariant-set membership test.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LasalleCheck {
    /// True when every off-diagonal entry of `[rho1, rho2]` is below `tol`.
    pub member: bool,
    /// True when the model is ideal, in which case the diagonal-commutator
    /// condition characterizes the invariant set exactly; otherwise the test
    /// is only a necessary condition.
    pub conclusive: bool,
    pub max_offdiagonal: f64,
}

/// Tests `[rho1, rho2] = diag(c_1, ..., c_n)` entrywise at tolerance `tol`
/// (both states expressed in the drift eigenbasis).
pub fn lasalle_membership(
    rho1: &DensityMatrix,
    rho2: &DensityMatrix,
    model: &ControlModel,
    tol: f64,
) -> LasalleCheck {
    let c = commutator(rho1.matrix(), rho2.matrix()).expect("states share dimension");
    let n = c.nrows();
    let mut max_offdiagonal: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                max_offdiagonal = max_offdiagonal.max(c[(i, j)].norm());
            }
        }
    }
    LasalleCheck {
        member: max_offdiagonal <= tol,
        conclusive: model.ideality().ideal(),
        max_offdiagonal,
    }
}

/// End-state classification of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RunVerdict {
    Converged,
    Flatlined,
    Undecided,
}

impl std::fmt::Display for RunVerdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RunVerdict::Converged => "converged",
            RunVerdict::Flatlined => "flatlined",
            RunVerdict::Undecided => "undecided",
        })
    }
}

/// Thresholds of the convergence-vs-flatline classifier. Slopes are decades
/// of `V` per unit time over the trailing 20% of samples.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ClassifierThresholds {
    /// Converged requires slope below this (negative) value ...
    pub converged_slope: f64,
    /// ... and final `V` below this bound, ...
    pub converged_v: f64,
    /// ... except that a final `V` below this floor is converged regardless
    /// of slope (fully converged runs sit at the arithmetic floor where the
    /// fitted slope is pure noise).
    pub converged_floor: f64,
    /// Flatlined requires |slope| below this ...
    pub flatline_slope: f64,
    /// ... and final `V` above this bound.
    pub flatline_v: f64,
}

impl Default for ClassifierThresholds {
    fn default() -> Self {
        Self {
            converged_slope: -1e-3,
            converged_v: 1e-4,
            converged_floor: 1e-9,
            flatline_slope: 1e-5,
            flatline_v: 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrajectoryVerdict {
    pub verdict: RunVerdict,
    pub final_v: f64,
    pub log_slope: f64,
}

/// Applies the slope/level classifier to a finished trajectory.
pub fn classify_trajectory(
    traj: &Trajectory,
    thresholds: &ClassifierThresholds,
) -> TrajectoryVerdict {
    let final_v = traj.final_lyapunov();
    let log_slope = traj.log_slope(0.2);
    let verdict = if final_v < thresholds.converged_floor
        || (log_slope < thresholds.converged_slope && final_v < thresholds.converged_v)
    {
        RunVerdict::Converged
    } else if log_slope.abs() < thresholds.flatline_slope && final_v > thresholds.flatline_v {
        RunVerdict::Flatlined
    } else {
        RunVerdict::Undecided
    };
    TrajectoryVerdict { verdict, final_v, log_slope }
}
