//! Experiment front end: config-file ingestion, named model presets, the
//! `check`/`simulate`/`census`/`track` drivers, and CSV/JSON persistence.
//!
//! Config files are TOML with complex entries written as `[re, im]` pairs and
//! matrices as row-lists. Sample batches run concurrently up to a jobs limit;
//! all files are written by the aggregating thread in sample order, so output
//! bytes are a pure function of config plus seed.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algebra::{C64, CMatrix};
use crate::dynamics::{
    ClassifierThresholds, ControlModel, IntegratorOptions, RunVerdict, TrajectoryVerdict,
    classify_trajectory, integrate, lasalle_membership,
};
use crate::error::{Error, Result};
use crate::stability::{
    HessianSignature, StabilityVerdict, classify_stationary, enumerate_diagonal_stationary,
    equispaced_qutrit_relation_residuals, hessian_signature,
};
use crate::state::{
    CLUSTER_TOL, DensityMatrix, ExceptionalityReport, Hamiltonian, SpectrumSignature, StateClass,
    count_diagonal_stationary, flag_manifold_dim, is_pseudo_pure_exceptional, sample_isospectral,
    spectrum_signature,
};

/// Complex matrix literal: rows of `[re, im]` pairs.
pub type MatrixLiteral = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub preset: Option<String>,
    pub h0: Option<MatrixLiteral>,
    pub h1: Option<MatrixLiteral>,
    pub rho_d: Option<MatrixLiteral>,
    /// Pure-state vector defining a (pseudo-)pure target.
    pub target_state: Option<Vec<[f64; 2]>>,
    /// Weight of the pure component; 1 gives a pure target.
    pub target_weight: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IntegratorSection {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub t_final: f64,
    pub sample_count: usize,
    pub reduced_mode: bool,
    pub reprojection_interval: usize,
    pub exact_rotation_target: bool,
}

impl Default for IntegratorSection {
    fn default() -> Self {
        let d = IntegratorOptions::default();
        Self {
            rel_tol: d.rel_tol,
            abs_tol: d.abs_tol,
            t_final: d.t_final,
            sample_count: d.sample_count,
            reduced_mode: d.reduced_mode,
            reprojection_interval: d.reprojection_interval,
            exact_rotation_target: d.exact_rotation_target,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierSection {
    pub converged_slope: f64,
    pub converged_v: f64,
    pub converged_floor: f64,
    pub flatline_slope: f64,
    pub flatline_v: f64,
    pub min_converged_fraction: f64,
    pub min_flatline_fraction: f64,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let d = ClassifierThresholds::default();
        Self {
            converged_slope: d.converged_slope,
            converged_v: d.converged_v,
            converged_floor: d.converged_floor,
            flatline_slope: d.flatline_slope,
            flatline_v: d.flatline_v,
            min_converged_fraction: 0.9,
            min_flatline_fraction: 0.6,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub csv: bool,
    pub json: bool,
    /// gzip the trajectory CSV (writes `trajectories.csv.gz`).
    pub gzip: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: None, csv: true, json: true, gzip: false }
    }
}

/// On-disk config layout.
#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub model: ModelSection,
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub integrator: IntegratorSection,
    #[serde(default)]
    pub classifier: ClassifierSection,
    #[serde(default)]
    pub outputs: OutputSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Fully resolved experiment setup.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub label: String,
    pub model: ControlModel,
    pub n_samples: usize,
    pub seed: u64,
    pub integrator: IntegratorOptions,
    pub thresholds: ClassifierThresholds,
    pub min_converged_fraction: f64,
    pub min_flatline_fraction: f64,
    pub out_dir: Option<PathBuf>,
    pub write_csv: bool,
    pub write_json: bool,
    pub gzip: bool,
    pub jobs: usize,
}

impl ExperimentConfig {
    /// Resolves a parsed config file, with `preset_override` taking priority
    /// over the file's model section.
    pub fn resolve(file: &ConfigFile, preset_override: Option<&str>) -> Result<Self> {
        let preset_name = preset_override.or(file.model.preset.as_deref());
        let (label, h0, h1, default_target) = match preset_name {
            Some(name) => {
                let p = preset(name)?;
                (name.to_string(), p.0, p.1, Some(p.2))
            }
            None => {
                let h0 = matrix_from_literal(
                    file.model.h0.as_ref().ok_or_else(|| missing("model.h0"))?,
                    "model.h0",
                )?;
                let h1 = matrix_from_literal(
                    file.model.h1.as_ref().ok_or_else(|| missing("model.h1"))?,
                    "model.h1",
                )?;
                (
                    "custom".to_string(),
                    Hamiltonian::new(h0).map_err(|e| Error::Config(format!("model.h0: {e}")))?,
                    Hamiltonian::new(h1).map_err(|e| Error::Config(format!("model.h1: {e}")))?,
                    None,
                )
            }
        };
        let target = resolve_target(&file.model, default_target, h0.dim())?;
        let model = ControlModel::new(h0, h1, target)
            .map_err(|e| Error::Config(format!("model: {e}")))?;
        let ic = &file.integrator;
        let cc = &file.classifier;
        Ok(Self {
            label,
            model,
            n_samples: file.n_samples.unwrap_or(50),
            seed: file.seed.unwrap_or(0),
            integrator: IntegratorOptions {
                rel_tol: ic.rel_tol,
                abs_tol: ic.abs_tol,
                t_final: ic.t_final,
                sample_count: ic.sample_count,
                reduced_mode: ic.reduced_mode,
                reprojection_interval: ic.reprojection_interval,
                exact_rotation_target: ic.exact_rotation_target,
            },
            thresholds: ClassifierThresholds {
                converged_slope: cc.converged_slope,
                converged_v: cc.converged_v,
                converged_floor: cc.converged_floor,
                flatline_slope: cc.flatline_slope,
                flatline_v: cc.flatline_v,
            },
            min_converged_fraction: cc.min_converged_fraction,
            min_flatline_fraction: cc.min_flatline_fraction,
            out_dir: file.outputs.dir.clone(),
            write_csv: file.outputs.csv,
            write_json: file.outputs.json,
            gzip: file.outputs.gzip,
            jobs: 0,
        })
    }

    /// Shortcut: resolve a preset with everything else at defaults.
    pub fn from_preset(name: &str) -> Result<Self> {
        Self::resolve(&ConfigFile::default(), Some(name))
    }

    /// Replaces the target state, rebuilding the model.
    pub fn with_target(&self, target: DensityMatrix) -> Result<Self> {
        let model =
            ControlModel::new(self.model.drift().clone(), self.model.control().clone(), target)?;
        Ok(Self { model, ..self.clone() })
    }
}

fn missing(key: &str) -> Error {
    Error::Config(format!("missing required key `{key}`"))
}

fn matrix_from_literal(lit: &MatrixLiteral, key: &str) -> Result<CMatrix> {
    let n = lit.len();
    if n == 0 {
        return Err(Error::Config(format!("`{key}` is empty")));
    }
    for (i, row) in lit.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Config(format!(
                "`{key}` row {i} has {} entries, expected {n} (matrix must be square)",
                row.len()
            )));
        }
    }
    Ok(CMatrix::from_fn(n, n, |i, j| C64::new(lit[i][j][0], lit[i][j][1])))
}

fn resolve_target(
    section: &ModelSection,
    default_target: Option<DensityMatrix>,
    dim: usize,
) -> Result<DensityMatrix> {
    if let Some(lit) = &section.rho_d {
        let m = matrix_from_literal(lit, "model.rho_d")?;
        if m.nrows() != dim {
            return Err(Error::Config(format!(
                "model.rho_d is {}x{0}, Hamiltonians are {dim}x{dim}",
                m.nrows()
            )));
        }
        return DensityMatrix::new(m).map_err(|e| Error::Config(format!("model.rho_d: {e}")));
    }
    if let Some(vec) = &section.target_state {
        let psi: Vec<C64> = vec.iter().map(|&[re, im]| C64::new(re, im)).collect();
        if psi.len() != dim {
            return Err(Error::Config(format!(
                "model.target_state has length {}, expected {dim}",
                psi.len()
            )));
        }
        let w = section.target_weight.unwrap_or(1.0);
        return DensityMatrix::pseudo_pure(&psi, w)
            .map_err(|e| Error::Config(format!("model.target_state: {e}")));
    }
    default_target.ok_or_else(|| missing("model.rho_d (or model.target_state)"))
}

/// Resolves a named preset to `(H0, H1, default target)`.
///
/// `twoqubit-ideal` and `qutrit-ideal` are instances chosen for this
/// artifact (their regularity/connectivity is verified by `check`, not
/// assumed); the other two appear in the literature this tool reproduces.
pub fn preset(name: &str) -> Result<(Hamiltonian, Hamiltonian, DensityMatrix)> {
    let offdiag_ones = |n: usize| {
        Hamiltonian::new(CMatrix::from_fn(n, n, |i, j| {
            if i == j { C64::new(0.0, 0.0) } else { C64::new(1.0, 0.0) }
        }))
        .expect("Hermitian by construction")
    };
    match name {
        "example3-qutrit" => Ok((
            Hamiltonian::from_diagonal(&[-1.0, 0.0, 1.0])?,
            offdiag_ones(3),
            DensityMatrix::from_diagonal(&[1.0, 0.0, 0.0])?,
        )),
        "qutrit-ideal" => Ok((
            Hamiltonian::from_diagonal(&[0.0, 1.0, 2.5])?,
            offdiag_ones(3),
            DensityMatrix::from_diagonal(&[0.25, 0.25, 0.5])?,
        )),
        "twoqubit-ideal" => Ok((
            Hamiltonian::from_diagonal(&[0.0, 1.0, 2.5, 4.1])?,
            offdiag_ones(4),
            DensityMatrix::from_diagonal(&[0.35, 0.35, 0.15, 0.15])?,
        )),
        "twoqubit-ising" => {
            // 0.1 sigma_z (x) sigma_z with local x rotations of unequal strength
            let h0 = Hamiltonian::from_diagonal(&[0.1, -0.1, -0.1, 0.1])?;
            let mut m = CMatrix::zeros(4, 4);
            for (i, j, v) in [(0, 2, 1.0), (1, 3, 1.0), (0, 1, 0.9), (2, 3, 0.9)] {
                m[(i, j)] = C64::new(v, 0.0);
                m[(j, i)] = C64::new(v, 0.0);
            }
            Ok((h0, Hamiltonian::new(m)?, DensityMatrix::from_diagonal(&[0.35, 0.35, 0.15, 0.15])?))
        }
        other => Err(Error::Config(format!(
            "unknown preset `{other}` (available: example3-qutrit, qutrit-ideal, \
             twoqubit-ideal, twoqubit-ising)"
        ))),
    }
}

pub fn preset_names() -> [&'static str; 4] {
    ["example3-qutrit", "qutrit-ideal", "twoqubit-ideal", "twoqubit-ising"]
}

// ---------------------------------------------------------------------------
// check

#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub label: String,
    pub dim: usize,
    pub strongly_regular: bool,
    pub regularity_witness: Option<crate::state::RegularityViolation>,
    pub fully_connected: bool,
    pub connectivity_zeros: Vec<(usize, usize)>,
    pub ideal: bool,
    pub target_spectrum: SpectrumSignature,
    pub flag_manifold_dim: usize,
    pub stationary_count: Option<u64>,
    pub target_stationary: bool,
    /// Present when the target is pure or pseudo-pure.
    pub exceptionality: Option<ExceptionalityReport>,
}

/// Diagnostic pass over a model: regularity and connectivity in the drift
/// eigenbasis, target spectrum class, orbit dimension, stationary-state
/// count, and (for pseudo-pure targets) the exceptionality verdict.
pub fn run_check(config: &ExperimentConfig) -> Result<CheckReport> {
    let (model, _) = config.model.in_drift_eigenbasis()?;
    let ideality = model.ideality();
    let sig = spectrum_signature(model.target(), CLUSTER_TOL)?;
    let exceptionality = match sig.class {
        StateClass::Pure | StateClass::PseudoPure => {
            Some(is_pseudo_pure_exceptional(model.target(), 1e-8)?)
        }
        _ => None,
    };
    Ok(CheckReport {
        label: config.label.clone(),
        dim: model.dim(),
        strongly_regular: ideality.regularity.strongly_regular,
        regularity_witness: ideality.regularity.violation.clone(),
        fully_connected: ideality.connectivity.fully_connected,
        connectivity_zeros: ideality.connectivity.zero_entries.clone(),
        ideal: ideality.ideal(),
        flag_manifold_dim: flag_manifold_dim(&sig),
        stationary_count: count_diagonal_stationary(&sig).ok(),
        target_stationary: model.target_stationary(),
        exceptionality,
        target_spectrum: sig,
    })
}

impl CheckReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "model: {} (n = {})", self.label, self.dim);
        let _ = writeln!(
            s,
            "  strongly regular: {}{}",
            self.strongly_regular,
            match &self.regularity_witness {
                Some(w) => format!("  [witness: {w:?}]"),
                None => String::new(),
            }
        );
        let _ = writeln!(
            s,
            "  fully connected:  {}{}",
            self.fully_connected,
            if self.connectivity_zeros.is_empty() {
                String::new()
            } else {
                format!("  [zero couplings: {:?}]", self.connectivity_zeros)
            }
        );
        let _ = writeln!(s, "  ideal:            {}", self.ideal);
        let _ = writeln!(
            s,
            "  target: class {} | spectrum {:?} x {:?} | stationary {}",
            self.target_spectrum.class,
            self.target_spectrum.distinct_values,
            self.target_spectrum.multiplicities,
            self.target_stationary
        );
        let _ = writeln!(
            s,
            "  orbit dimension {} | diagonal stationary states {}",
            self.flag_manifold_dim,
            self.stationary_count.map_or_else(|| "overflow".into(), |c| c.to_string())
        );
        if let Some(e) = &self.exceptionality {
            let _ = writeln!(
                s,
                "  pseudo-pure exceptional: {} (w = {:.4}, u = {:.4}, V_max = {:.4}{})",
                e.exceptional,
                e.weights.0,
                e.weights.1,
                e.v_max,
                match e.pair {
                    Some((k, l)) => format!(", pair ({k}, {l})"),
                    None => String::new(),
                }
            );
        }
        s
    }
}

// ---------------------------------------------------------------------------
// batch simulation

#[derive(Debug, Clone, Serialize)]
pub struct SampleSummary {
    pub sample_id: usize,
    pub seed: u64,
    pub verdict: RunVerdict,
    pub final_v: f64,
    pub log_slope: f64,
    pub max_spectrum_drift: f64,
    /// Largest off-diagonal commutator entry of the endpoint pair.
    pub endpoint_commutator: f64,
    /// Residuals of the equispaced-qutrit endpoint relations, when that
    /// probe applies.
    pub relation_residuals: Option<[f64; 4]>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictCounts {
    pub converged: usize,
    pub flatlined: usize,
    pub undecided: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BatchSummary {
    pub command: String,
    pub label: String,
    pub n_samples: usize,
    pub seed: u64,
    pub t_final: f64,
    pub target_stationary: bool,
    pub thresholds: ClassifierThresholds,
    pub counts: VerdictCounts,
    pub samples: Vec<SampleSummary>,
    pub errors: Vec<(usize, String)>,
    /// Exceptionality verdict of the tracked target, for `track` runs.
    pub exceptionality: Option<ExceptionalityReport>,
    /// Samples whose final distance sits strictly inside
    /// `(0.01 v_max, 0.99 v_max)`, for `track` runs.
    pub n_intermediate: Option<usize>,
}

/// Long-format trajectory series of one batch, ready for CSV export.
pub struct BatchTrajectories {
    /// `(sample_id, times, lyapunov, controls)` per successful sample.
    pub series: Vec<(usize, Vec<f64>, Vec<f64>, Vec<f64>)>,
}

fn run_batch(
    config: &ExperimentConfig,
    command: &str,
    exceptionality: Option<ExceptionalityReport>,
) -> Result<(BatchSummary, BatchTrajectories)> {
    let model = &config.model;
    let check_relations = model.dim() == 3 && {
        let m = model.target().matrix();
        (0..3).all(|i| {
            (0..3).all(|j| {
                let want = if i == 1 && j == 1 { 1.0 } else { 0.0 };
                (m[(i, j)] - C64::new(want, 0.0)).norm() <= 1e-9
            })
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot build thread pool: {e}")))?;
    let results: Vec<(usize, std::result::Result<_, String>)> = pool.install(|| {
        (0..config.n_samples)
            .into_par_iter()
            .map(|i| {
                let sample_seed = config.seed.wrapping_add(i as u64);
                let rho0 = sample_isospectral(model.target(), sample_seed);
                let out = integrate(model, &rho0, &config.integrator)
                    .map(|traj| {
                        let verdict = classify_trajectory(&traj, &config.thresholds);
                        (traj, verdict)
                    })
                    .map_err(|e| e.to_string());
                (i, out)
            })
            .collect()
    });

    let mut samples = Vec::new();
    let mut errors = Vec::new();
    let mut series = Vec::new();
    let mut counts = VerdictCounts { converged: 0, flatlined: 0, undecided: 0, failed: 0 };
    let mut n_intermediate = 0usize;
    let v_max = exceptionality.as_ref().map(|e| e.v_max);
    for (i, out) in results {
        match out {
            Ok((traj, TrajectoryVerdict { verdict, final_v, log_slope })) => {
                match verdict {
                    RunVerdict::Converged => counts.converged += 1,
                    RunVerdict::Flatlined => counts.flatlined += 1,
                    RunVerdict::Undecided => counts.undecided += 1,
                }
                if let Some(vm) = v_max {
                    if final_v > 0.01 * vm && final_v < 0.99 * vm {
                        n_intermediate += 1;
                    }
                }
                let endpoint_commutator = lasalle_membership(
                    traj.states.last().expect("samples"),
                    traj.targets.last().expect("samples"),
                    model,
                    1e-3,
                )
                .max_offdiagonal;
                let relation_residuals = (check_relations
                    && verdict == RunVerdict::Flatlined)
                    .then(|| {
                        equispaced_qutrit_relation_residuals(traj.states.last().expect("samples"))
                    });
                samples.push(SampleSummary {
                    sample_id: i,
                    seed: config.seed.wrapping_add(i as u64),
                    verdict,
                    final_v,
                    log_slope,
                    max_spectrum_drift: traj
                        .stats
                        .max_spectrum_drift_state
                        .max(traj.stats.max_spectrum_drift_target),
                    endpoint_commutator,
                    relation_residuals,
                });
                series.push((i, traj.times, traj.lyapunov, traj.controls));
            }
            Err(message) => {
                counts.failed += 1;
                errors.push((i, message));
            }
        }
    }
    if counts.failed == config.n_samples && config.n_samples > 0 {
        return Err(Error::Integration(format!(
            "all {} samples failed; first error: {}",
            config.n_samples, errors[0].1
        )));
    }
    let summary = BatchSummary {
        command: command.to_string(),
        label: config.label.clone(),
        n_samples: config.n_samples,
        seed: config.seed,
        t_final: config.integrator.t_final,
        target_stationary: model.target_stationary(),
        thresholds: config.thresholds,
        counts,
        samples,
        errors,
        n_intermediate: exceptionality.as_ref().map(|_| n_intermediate),
        exceptionality,
    };
    Ok((summary, BatchTrajectories { series }))
}

/// Runs `n_samples` closed-loop trajectories from Haar-random isospectral
/// initial states and classifies each. Individual integrator failures are
/// recorded in the summary; only a fully failed batch is an error.
pub fn run_simulate(config: &ExperimentConfig) -> Result<(BatchSummary, BatchTrajectories)> {
    run_batch(config, "simulate", None)
}

/// Like [`run_simulate`], but first reports whether the (pseudo-)pure target
/// is exceptional. Non-pseudo-pure targets fall back to plain simulation
/// with a notice in the summary.
pub fn run_track(config: &ExperimentConfig) -> Result<(BatchSummary, BatchTrajectories)> {
    let (eigenbasis_model, _) = config.model.in_drift_eigenbasis()?;
    let exceptionality = match is_pseudo_pure_exceptional(eigenbasis_model.target(), 1e-8) {
        Ok(report) => Some(report),
        Err(Error::NotPseudoPure(_)) => None,
        Err(e) => return Err(e),
    };
    let (mut summary, trajectories) = run_batch(config, "track", exceptionality)?;
    if summary.exceptionality.is_none() {
        summary
            .errors
            .push((usize::MAX, "target is not pseudo-pure; ran plain simulation".into()));
    }
    Ok((summary, trajectories))
}

// ---------------------------------------------------------------------------
// census

#[derive(Debug, Clone, Serialize)]
pub struct CensusRow {
    pub diagonal: Vec<f64>,
    pub lyapunov_level: f64,
    pub tangent_dim: usize,
    pub n_stable: usize,
    pub n_unstable: usize,
    pub n_center: usize,
    pub verdict: StabilityVerdict,
    /// Tangent-restricted eigenvalues as `[re, im]` pairs.
    pub eigenvalues: Vec<[f64; 2]>,
    pub hessian: HessianSignature,
}

#[derive(Debug, Clone, Serialize)]
pub struct CensusReport {
    pub label: String,
    pub target_diagonal: Vec<f64>,
    pub flag_manifold_dim: usize,
    pub rows: Vec<CensusRow>,
}

/// Enumerates the diagonal stationary states of a stationary target and
/// classifies each, both dynamically (linearization eigenvalues) and
/// variationally (distance-function Hessian signature).
pub fn run_census(config: &ExperimentConfig) -> Result<CensusReport> {
    let (model, _) = config.model.in_drift_eigenbasis()?;
    if !model.target_stationary() {
        return Err(Error::NonStationaryTarget);
    }
    let sig = spectrum_signature(model.target(), CLUSTER_TOL)?;
    let states = enumerate_diagonal_stationary(&model)?;
    let mut rows = Vec::with_capacity(states.len());
    for state in &states {
        let cls = classify_stationary(state, &model, None)?;
        let hessian = hessian_signature(state, model.target(), model.basis())?;
        rows.push(CensusRow {
            diagonal: (0..state.dim()).map(|i| state.matrix()[(i, i)].re).collect(),
            lyapunov_level: cls.lyapunov_level,
            tangent_dim: cls.tangent_dim,
            n_stable: cls.n_stable,
            n_unstable: cls.n_unstable,
            n_center: cls.n_center,
            verdict: cls.verdict,
            eigenvalues: cls.eigenvalues.iter().map(|&(re, im)| [re, im]).collect(),
            hessian,
        });
    }
    rows.sort_by(|a, b| {
        a.lyapunov_level
            .partial_cmp(&b.lyapunov_level)
            .unwrap()
            .then_with(|| a.diagonal.partial_cmp(&b.diagonal).unwrap())
    });
    Ok(CensusReport {
        label: config.label.clone(),
        target_diagonal: (0..model.dim())
            .map(|i| model.target().matrix()[(i, i)].re)
            .collect(),
        flag_manifold_dim: flag_manifold_dim(&sig),
        rows,
    })
}

impl CensusReport {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "census: {} target {:?} (orbit dimension {})",
            self.label, self.target_diagonal, self.flag_manifold_dim
        );
        let _ = writeln!(
            s,
            "{:<28} {:>10}  {:>11}  {:>12}  verdict",
            "state", "V0", "n_s/n_u/n_c", "hessian +/-/0"
        );
        for row in &self.rows {
            let diag = row
                .diagonal
                .iter()
                .map(|d| format!("{d:.3}"))
                .collect::<Vec<_>>()
                .join(",");
            let _ = writeln!(
                s,
                "{:<28} {:>10.6}  {:>11}  {:>12}  {}",
                format!("({diag})"),
                row.lyapunov_level,
                format!("{}/{}/{}", row.n_stable, row.n_unstable, row.n_center),
                format!(
                    "{}/{}/{}",
                    row.hessian.n_plus, row.hessian.n_minus, row.hessian.n_zero
                ),
                row.verdict
            );
        }
        s
    }
}

// ---------------------------------------------------------------------------
// persistence

/// Writes the long-format trajectory CSV (`sample_id,t,V,f`). Floats use a
/// fixed scientific format so identical runs produce identical bytes.
pub fn write_trajectories_csv(path: &Path, batch: &BatchTrajectories) -> Result<()> {
    let mut out = String::from("sample_id,t,V,f\n");
    for (id, times, lyapunov, controls) in &batch.series {
        for ((t, v), f) in times.iter().zip(lyapunov).zip(controls) {
            let _ = writeln!(out, "{id},{t:.10e},{v:.10e},{f:.10e}");
        }
    }
    fs::write(path, out).map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

/// gzip variant of [`write_trajectories_csv`], with a fixed mtime so the
/// compressed bytes stay deterministic.
pub fn write_trajectories_csv_gz(path: &Path, batch: &BatchTrajectories) -> Result<()> {
    use std::io::Write as _;
    let mut out = String::from("sample_id,t,V,f\n");
    for (id, times, lyapunov, controls) in &batch.series {
        for ((t, v), f) in times.iter().zip(lyapunov).zip(controls) {
            let _ = writeln!(out, "{id},{t:.10e},{v:.10e},{f:.10e}");
        }
    }
    let file = fs::File::create(path)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))?;
    let mut encoder = flate2::GzBuilder::new()
        .mtime(0)
        .write(file, flate2::Compression::default());
    encoder
        .write_all(out.as_bytes())
        .and_then(|_| encoder.finish().map(|_| ()))
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serialization failed: {e}")))?;
    fs::write(path, text)
        .map_err(|e| Error::Config(format!("cannot write {}: {e}", path.display())))
}

/// Creates the output directory if needed and returns file paths for a
/// command's artifacts.
pub fn ensure_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", dir.display())))
}

/// Parses a comma-separated state vector such as `1,0,0,2` or `1,1i,-0.5+2i`.
pub fn parse_state_vector(text: &str) -> Result<Vec<C64>> {
    text.split(',')
        .map(|tok| {
            let t = tok.trim();
            if t.is_empty() {
                return Err(Error::Config(format!("empty component in state vector `{text}`")));
            }
            parse_complex(t)
                .ok_or_else(|| Error::Config(format!("cannot parse `{t}` as a complex number")))
        })
        .collect()
}

fn parse_complex(t: &str) -> Option<C64> {
    if let Ok(re) = t.parse::<f64>() {
        return Some(C64::new(re, 0.0));
    }
    let t = t.strip_suffix('i')?;
    // split into real and imaginary at the last +/- that is not an exponent sign
    let bytes = t.as_bytes();
    for pos in (1..bytes.len()).rev() {
        let ch = bytes[pos] as char;
        if (ch == '+' || ch == '-') && bytes[pos - 1] as char != 'e' && bytes[pos - 1] as char != 'E'
        {
            let re: f64 = t[..pos].parse().ok()?;
            let im_str = &t[pos..];
            let im: f64 = if im_str == "+" {
                1.0
            } else if im_str == "-" {
                -1.0
            } else {
                im_str.parse().ok()?
            };
            return Some(C64::new(re, im));
        }
    }
    // purely imaginary: "2i", "i", "-i"
    let im: f64 = match t {
        "" => 1.0,
        "-" => -1.0,
        other => other.parse().ok()?,
    };
    Some(C64::new(0.0, im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn presets_resolve_expected_matrices() {
        let (h0, h1, rho_d) = preset("example3-qutrit").unwrap();
        assert_eq!(h0.matrix()[(0, 0)].re, -1.0);
        assert_eq!(h0.matrix()[(2, 2)].re, 1.0);
        assert_eq!(h1.matrix()[(0, 1)].re, 1.0);
        assert_eq!(h1.matrix()[(1, 1)].re, 0.0);
        assert_eq!(rho_d.matrix()[(0, 0)].re, 1.0);

        let (h0, h1, _) = preset("twoqubit-ising").unwrap();
        // 0.1 sigma_z (x) sigma_z
        for (i, v) in [0.1, -0.1, -0.1, 0.1].iter().enumerate() {
            assert_abs_diff_eq!(h0.matrix()[(i, i)].re, v, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(h1.matrix()[(0, 2)].re, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(h1.matrix()[(0, 1)].re, 0.9, epsilon = 1e-15);
        assert_eq!(h1.matrix()[(0, 3)].re, 0.0);

        assert!(preset("no-such-preset").is_err());
    }

    #[test]
    fn config_parses_and_resolves() {
        let text = r#"
            n_samples = 10
            seed = 7

            [model]
            preset = "example3-qutrit"
            rho_d = [[[0,0],[0,0],[0,0]], [[0,0],[1,0],[0,0]], [[0,0],[0,0],[0,0]]]

            [integrator]
            t_final = 50.0
            sample_count = 101
        "#;
        let file = ConfigFile::parse(text).unwrap();
        let cfg = ExperimentConfig::resolve(&file, None).unwrap();
        assert_eq!(cfg.n_samples, 10);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.integrator.t_final, 50.0);
        assert_abs_diff_eq!(cfg.model.target().matrix()[(1, 1)].re, 1.0, epsilon = 1e-15);
        assert_eq!(cfg.label, "example3-qutrit");
    }

    #[test]
    fn config_rejects_unknown_and_malformed_keys() {
        let err = ConfigFile::parse("nonsense_key = 3").unwrap_err();
        assert!(err.to_string().contains("nonsense_key"), "{err}");

        let text = r#"
            [model]
            h0 = [[[0,0],[1,0]]]
            h1 = [[[0,0],[1,0]], [[1,0],[0,0]]]
            rho_d = [[[1,0],[0,0]], [[0,0],[0,0]]]
        "#;
        let file = ConfigFile::parse(text).unwrap();
        let err = ExperimentConfig::resolve(&file, None).unwrap_err();
        assert!(err.to_string().contains("model.h0"), "{err}");

        // non-Hermitian literal is named in the error
        let text = r#"
            [model]
            h0 = [[[0,0],[1,0]], [[0,5],[0,0]]]
            h1 = [[[0,0],[1,0]], [[1,0],[0,0]]]
            rho_d = [[[1,0],[0,0]], [[0,0],[0,0]]]
        "#;
        let file = ConfigFile::parse(text).unwrap();
        let err = ExperimentConfig::resolve(&file, None).unwrap_err();
        assert!(err.to_string().contains("model.h0"), "{err}");
    }

    #[test]
    fn check_reports_on_presets() {
        let cfg = ExperimentConfig::from_preset("example3-qutrit").unwrap();
        let report = run_check(&cfg).unwrap();
        assert!(!report.strongly_regular);
        assert!(report.fully_connected);
        assert!(!report.ideal);

        let cfg = ExperimentConfig::from_preset("twoqubit-ising").unwrap();
        let report = run_check(&cfg).unwrap();
        assert!(!report.strongly_regular);
        assert!(!report.fully_connected);

        let cfg = ExperimentConfig::from_preset("twoqubit-ideal").unwrap();
        let report = run_check(&cfg).unwrap();
        assert!(report.strongly_regular);
        assert!(report.fully_connected);
        assert!(report.ideal);
        assert_eq!(report.flag_manifold_dim, 8);
        assert_eq!(report.stationary_count, Some(6));

        let cfg = ExperimentConfig::from_preset("qutrit-ideal").unwrap();
        let report = run_check(&cfg).unwrap();
        assert!(report.ideal);
        assert_eq!(report.target_spectrum.class, StateClass::PseudoPure);
        assert_eq!(report.stationary_count, Some(3));
        assert!(report.exceptionality.is_some());
        assert!(!report.exceptionality.unwrap().exceptional);
    }

    #[test]
    fn state_vector_parsing() {
        let v = parse_state_vector("1,0,0,2").unwrap();
        assert_eq!(v[3], C64::new(2.0, 0.0));
        let v = parse_state_vector("1, 1i, -0.5+2i, 3-1i").unwrap();
        assert_eq!(v[1], C64::new(0.0, 1.0));
        assert_eq!(v[2], C64::new(-0.5, 2.0));
        assert_eq!(v[3], C64::new(3.0, -1.0));
        let v = parse_state_vector("1e-3, 2.5e2i").unwrap();
        assert_eq!(v[0], C64::new(1e-3, 0.0));
        assert_eq!(v[1], C64::new(0.0, 250.0));
        assert!(parse_state_vector("1,,2").is_err());
        assert!(parse_state_vector("abc").is_err());
    }

    #[test]
    fn small_batch_runs_and_counts() {
        let mut cfg = ExperimentConfig::from_preset("qutrit-ideal").unwrap();
        cfg.n_samples = 4;
        cfg.integrator.t_final = 60.0;
        cfg.integrator.sample_count = 121;
        cfg.integrator.reduced_mode = true;
        let (summary, batch) = run_simulate(&cfg).unwrap();
        assert_eq!(summary.samples.len(), 4);
        assert_eq!(
            summary.counts.converged
                + summary.counts.flatlined
                + summary.counts.undecided
                + summary.counts.failed,
            4
        );
        assert_eq!(batch.series.len(), 4);
        // V columns non-increasing
        for (_, _, vs, _) in &batch.series {
            for w in vs.windows(2) {
                assert!(w[1] <= w[0] + 1e-8);
            }
        }
    }

    #[test]
    fn census_runs_on_two_qubit_ideal() {
        let cfg = ExperimentConfig::from_preset("twoqubit-ideal").unwrap();
        let report = run_census(&cfg).unwrap();
        assert_eq!(report.rows.len(), 6);
        assert_eq!(report.rows[0].verdict, StabilityVerdict::HyperbolicSink);
        assert_eq!(report.rows[5].verdict, StabilityVerdict::HyperbolicSource);
        let rendered = report.render();
        assert!(rendered.contains("hyperbolic_sink"));
    }

    #[test]
    fn census_rejects_non_stationary_target() {
        let cfg = ExperimentConfig::from_preset("twoqubit-ideal").unwrap();
        let psi: Vec<C64> =
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(2.0, 0.0)];
        let cfg = cfg.with_target(DensityMatrix::pure(&psi).unwrap()).unwrap();
        assert!(matches!(run_census(&cfg), Err(Error::NonStationaryTarget)));
    }

    #[test]
    fn track_reports_exceptionality_and_falls_back() {
        let mut cfg = ExperimentConfig::from_preset("twoqubit-ideal").unwrap();
        cfg.n_samples = 2;
        cfg.integrator.t_final = 5.0;
        cfg.integrator.sample_count = 11;
        let bell: Vec<C64> =
            vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        let cfg_bell = cfg.with_target(DensityMatrix::pure(&bell).unwrap()).unwrap();
        let (summary, _) = run_track(&cfg_bell).unwrap();
        assert!(summary.exceptionality.as_ref().unwrap().exceptional);

        // mixed-degenerate target falls back with a notice
        let (summary, _) = run_track(&cfg).unwrap();
        assert!(summary.exceptionality.is_none());
        assert!(summary.errors.iter().any(|(_, m)| m.contains("not pseudo-pure")));
    }

    #[test]
    fn csv_bytes_are_deterministic() {
        let mut cfg = ExperimentConfig::from_preset("qutrit-ideal").unwrap();
        cfg.n_samples = 3;
        cfg.integrator.t_final = 10.0;
        cfg.integrator.sample_count = 21;
        cfg.integrator.reduced_mode = true;
        let dir = tempfile::tempdir().unwrap();
        let path_a = dir.path().join("a.csv");
        let path_b = dir.path().join("b.csv");
        let (_, batch) = run_simulate(&cfg).unwrap();
        write_trajectories_csv(&path_a, &batch).unwrap();
        cfg.jobs = 2;
        let (_, batch) = run_simulate(&cfg).unwrap();
        write_trajectories_csv(&path_b, &batch).unwrap();
        let a = fs::read(&path_a).unwrap();
        let b = fs::read(&path_b).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with(b"sample_id,t,V,f\n"));
    }
}
