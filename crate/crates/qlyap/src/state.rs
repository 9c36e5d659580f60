//! Density operators, Hamiltonians, spectrum classification, Hamiltonian
//! regularity/connectivity checks, isospectral Haar sampling, and the
//! detector for exceptional pseudo-pure states.

use nalgebra::SymmetricEigen;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::algebra::{
    self, C64, CMatrix, commutator, hermiticity_deviation, symmetrize, HERMITICITY_TOL,
};
use crate::error::{Error, Result};

/// Default tolerance for eigenvalue clustering.
pub const CLUSTER_TOL: f64 = 1e-8;
/// Default tolerance for transition-frequency distinctness.
pub const REGULARITY_TOL: f64 = 1e-8;
/// Default tolerance on coupling-matrix entries.
pub const CONNECTIVITY_TOL: f64 = 1e-10;

/// Unit-trace positive semidefinite Hermitian matrix.
///
/// Validated on construction: Hermitian within 1e-9 (max entry, then
/// symmetrized), trace within 1e-9 of one, smallest eigenvalue >= -1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::InvalidDensity(format!(
                "expected a square matrix, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let mat = symmetrize(&mat, HERMITICITY_TOL)?;
        let tr = mat.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > 1e-9 {
            return Err(Error::InvalidDensity(format!("trace is {tr} instead of 1")));
        }
        let min_eig = SymmetricEigen::new(mat.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min);
        if min_eig < -1e-9 {
            return Err(Error::InvalidDensity(format!(
                "smallest eigenvalue {min_eig:.3e} is negative"
            )));
        }
        Ok(Self { mat })
    }

    /// Skips validation; reserved for integrator output whose physicality is
    /// tracked through drift statistics instead.
    pub(crate) fn new_unchecked(mat: CMatrix) -> Self {
        Self { mat }
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        Self::new(m)
    }

    /// Projector onto a pure state; `psi` is normalized first.
    pub fn pure(psi: &[C64]) -> Result<Self> {
        Self::pseudo_pure(psi, 1.0)
    }

    /// `w P + u (I - P)` with `P` the projector onto `psi` and
    /// `u = (1 - w)/(n - 1)`; reduces to a pure state at `w = 1`.
    pub fn pseudo_pure(psi: &[C64], w: f64) -> Result<Self> {
        let n = psi.len();
        if n < 2 {
            return Err(Error::InvalidDensity("state vector needs length >= 2".into()));
        }
        let norm = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return Err(Error::InvalidDensity("state vector is zero".into()));
        }
        let u = (1.0 - w) / (n as f64 - 1.0);
        if !(0.0..=1.0).contains(&w) || u > w {
            return Err(Error::InvalidDensity(format!(
                "weight {w} outside [1/n, 1]"
            )));
        }
        let mut m = CMatrix::identity(n, n) * C64::new(u, 0.0);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] += C64::new(w - u, 0.0) * psi[i] * psi[j].conj() / (norm * norm);
            }
        }
        Self::new(m)
    }

    pub fn maximally_mixed(n: usize) -> Self {
        Self { mat: CMatrix::identity(n, n) * C64::new(1.0 / n as f64, 0.0) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut e: Vec<f64> = SymmetricEigen::new(self.mat.clone())
            .eigenvalues
            .iter()
            .cloned()
            .collect();
        e.sort_by(|a, b| a.partial_cmp(b).unwrap());
        e
    }

    /// Conjugation `U^dagger rho U`.
    pub fn conjugated(&self, u: &CMatrix) -> Result<Self> {
        Self::new(u.adjoint() * &self.mat * u)
    }
}

/// Hermitian generator of evolution. Validated Hermitian within 1e-9.
#[derive(Debug, Clone, PartialEq)]
pub struct Hamiltonian {
    mat: CMatrix,
}

impl Hamiltonian {
    pub fn new(mat: CMatrix) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::DimensionMismatch(format!(
                "Hamiltonian must be square, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        Ok(Self { mat: symmetrize(&mat, HERMITICITY_TOL)? })
    }

    pub fn from_diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(d, 0.0);
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// Eigenframe with columns ordered by ascending eigenvalue (stable for
    /// ties). Already-diagonal matrices are only permuted, never rotated.
    pub fn eigen_frame(&self) -> EigenFrame {
        EigenFrame::of(&self.mat)
    }
}

/// Unitary change of basis diagonalizing a Hermitian matrix, with the
/// eigenvalue order fixed (ascending, stable tie-break by original index).
#[derive(Debug, Clone)]
pub struct EigenFrame {
    unitary: CMatrix,
    eigenvalues: Vec<f64>,
}

impl EigenFrame {
    pub fn of(m: &CMatrix) -> Self {
        let n = m.nrows();
        let offdiag: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| m[(i, j)].norm())
            .fold(0.0, f64::max);
        let (vals, vecs): (Vec<f64>, CMatrix) = if offdiag <= 1e-12 {
            ((0..n).map(|i| m[(i, i)].re).collect(), CMatrix::identity(n, n))
        } else {
            let se = SymmetricEigen::new(m.clone());
            (se.eigenvalues.iter().cloned().collect(), se.eigenvectors)
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap().then(a.cmp(&b)));
        let mut unitary = CMatrix::zeros(n, n);
        let mut eigenvalues = Vec::with_capacity(n);
        for (new_col, &old_col) in order.iter().enumerate() {
            let mut col = vecs.column(old_col).clone_owned();
            // fix the gauge: largest-modulus component made real positive
            let mut pivot = 0;
            for i in 1..n {
                if col[i].norm() > col[pivot].norm() {
                    pivot = i;
                }
            }
            let phase = col[pivot] / C64::new(col[pivot].norm(), 0.0);
            col /= phase;
            unitary.set_column(new_col, &col);
            eigenvalues.push(vals[old_col]);
        }
        Self { unitary, eigenvalues }
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.unitary
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `U^dagger m U`: expresses `m` in this eigenbasis.
    pub fn to_eigenbasis(&self, m: &CMatrix) -> CMatrix {
        self.unitary.adjoint() * m * &self.unitary
    }
}

/// Coarse class of a spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateClass {
    Generic,
    Pure,
    PseudoPure,
    MixedDegenerate,
}

impl std::fmt::Display for StateClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            StateClass::Generic => "generic",
            StateClass::Pure => "pure",
            StateClass::PseudoPure => "pseudo-pure",
            StateClass::MixedDegenerate => "mixed-degenerate",
        };
        f.write_str(s)
    }
}

/// Clustered spectrum of a density matrix.
#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSignature {
    /// Distinct eigenvalues, strictly decreasing.
    pub distinct_values: Vec<f64>,
    /// Multiplicities, aligned with `distinct_values`; sums to `n`.
    pub multiplicities: Vec<usize>,
    pub class: StateClass,
}

impl SpectrumSignature {
    pub fn dim(&self) -> usize {
        self.multiplicities.iter().sum()
    }

    /// Eigenvalue list with repetitions, in decreasing order.
    pub fn full_spectrum(&self) -> Vec<f64> {
        self.distinct_values
            .iter()
            .zip(&self.multiplicities)
            .flat_map(|(&v, &m)| std::iter::repeat(v).take(m))
            .collect()
    }
}

/// Clusters the spectrum of `rho` and classifies it.
///
/// Eigenvalues closer than `cluster_tol` merge into one group; groups must be
/// separated by more than `10 * cluster_tol`. A consecutive gap inside the
/// band `(cluster_tol, 10 * cluster_tol]` is ambiguous and errors out rather
/// than misclassifying a near-degenerate spectrum.
///
/// A state with exactly two clusters of multiplicity `{1, n-1}` and values
/// near `{1, 0}` is `Pure`; all-singleton clusters are `Generic`; two
/// clusters `{1, n-1}` otherwise are `PseudoPure`; everything else is
/// `MixedDegenerate`. For `n = 2` a two-cluster mixed spectrum satisfies both
/// the generic and pseudo-pure shape; it is reported `Generic`.
pub fn spectrum_signature(rho: &DensityMatrix, cluster_tol: f64) -> Result<SpectrumSignature> {
    assert!(cluster_tol > 0.0, "cluster_tol must be positive");
    let eigs = rho.eigenvalues();
    let n = eigs.len();
    let mut clusters: Vec<(f64, usize)> = Vec::new(); // (sum, count)
    let mut start = 0;
    for i in 0..n {
        let gap = if i + 1 < n { eigs[i + 1] - eigs[i] } else { f64::INFINITY };
        if gap > cluster_tol && gap <= 10.0 * cluster_tol {
            return Err(Error::AmbiguousClustering { gap, tol: cluster_tol });
        }
        if gap > cluster_tol {
            let members = &eigs[start..=i];
            let spread = members[members.len() - 1] - members[0];
            if spread > cluster_tol {
                return Err(Error::AmbiguousClustering { gap: spread, tol: cluster_tol });
            }
            clusters.push((members.iter().sum(), members.len()));
            start = i + 1;
        }
    }
    // decreasing order
    clusters.reverse();
    let distinct_values: Vec<f64> = clusters.iter().map(|&(s, c)| s / c as f64).collect();
    let multiplicities: Vec<usize> = clusters.iter().map(|&(_, c)| c).collect();

    let two_level = distinct_values.len() == 2
        && ((multiplicities[0] == 1 && multiplicities[1] == n - 1)
            || (multiplicities[0] == n - 1 && multiplicities[1] == 1));
    let pure_values = distinct_values.len() == 2
        && (distinct_values[0] - 1.0).abs() <= cluster_tol
        && distinct_values[1].abs() <= cluster_tol;
    let class = if two_level && pure_values && multiplicities[0] == 1 {
        StateClass::Pure
    } else if multiplicities.iter().all(|&m| m == 1) {
        StateClass::Generic
    } else if two_level {
        StateClass::PseudoPure
    } else {
        StateClass::MixedDegenerate
    };
    Ok(SpectrumSignature { distinct_values, multiplicities, class })
}

/// Witness for a strong-regularity failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RegularityViolation {
    /// Two eigenvalues coincide, so a transition frequency vanishes.
    ZeroGap { pair: (usize, usize) },
    /// Two distinct level pairs share a transition frequency.
    EqualGaps { pair_a: (usize, usize), pair_b: (usize, usize), frequency: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct RegularityReport {
    pub strongly_regular: bool,
    pub violation: Option<RegularityViolation>,
    /// Transition frequencies `a_k - a_l` for `k < l`, ascending eigenvalues.
    pub frequencies: Vec<((usize, usize), f64)>,
}

/// Checks whether all transition frequencies of `h0` are nonzero and pairwise
/// distinct beyond `tol`. Frequencies are formed over ordered pairs `k < l`
/// of ascending eigenvalues; for a Hermitian drift this is equivalent to the
/// full condition over all `k != l` because the remaining frequencies are
/// exact negatives.
pub fn is_strongly_regular(h0: &Hamiltonian, tol: f64) -> RegularityReport {
    assert!(tol > 0.0, "tolerance must be positive");
    let eigs = h0.eigen_frame().eigenvalues().to_vec();
    let n = eigs.len();
    let mut frequencies = Vec::new();
    for k in 0..n {
        for l in (k + 1)..n {
            frequencies.push(((k, l), eigs[k] - eigs[l]));
        }
    }
    for (i, &(pair, w)) in frequencies.iter().enumerate() {
        if w.abs() <= tol {
            return RegularityReport {
                strongly_regular: false,
                violation: Some(RegularityViolation::ZeroGap { pair }),
                frequencies,
            };
        }
        for &(pair_b, w_b) in frequencies.iter().skip(i + 1) {
            if (w - w_b).abs() <= tol {
                return RegularityReport {
                    strongly_regular: false,
                    violation: Some(RegularityViolation::EqualGaps {
                        pair_a: pair,
                        pair_b,
                        frequency: w,
                    }),
                    frequencies,
                };
            }
        }
    }
    RegularityReport { strongly_regular: true, violation: None, frequencies }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConnectivityReport {
    pub fully_connected: bool,
    /// Off-diagonal index pairs whose coupling magnitude is below tolerance.
    pub zero_entries: Vec<(usize, usize)>,
}

/// Checks `|b_kl| > tol` for every off-diagonal entry of the coupling matrix.
/// The caller is expected to pass `h1` already expressed in the eigenbasis of
/// the accompanying drift (see [`EigenFrame::to_eigenbasis`]).
pub fn is_fully_connected(h1: &Hamiltonian, tol: f64) -> ConnectivityReport {
    assert!(tol > 0.0, "tolerance must be positive");
    let m = h1.matrix();
    let n = m.nrows();
    let mut zero_entries = Vec::new();
    for k in 0..n {
        for l in (k + 1)..n {
            if m[(k, l)].norm() <= tol {
                zero_entries.push((k, l));
            }
        }
    }
    ConnectivityReport { fully_connected: zero_entries.is_empty(), zero_entries }
}

/// Real dimension `n^2 - sum_l n_l^2` of the isospectral orbit.
pub fn flag_manifold_dim(sig: &SpectrumSignature) -> usize {
    let n = sig.dim();
    n * n - sig.multiplicities.iter().map(|&m| m * m).sum::<usize>()
}

/// Number of distinct diagonal arrangements of the spectrum,
/// `n! / (n_1! ... n_k!)`. Errors for `n > 20` where the count overflows.
pub fn count_diagonal_stationary(sig: &SpectrumSignature) -> Result<u64> {
    let n = sig.dim();
    if n > 20 {
        return Err(Error::CountOverflow(n));
    }
    let mut count: u128 = 1;
    let mut placed: u128 = 0;
    for &m in &sig.multiplicities {
        for i in 0..m as u128 {
            placed += 1;
            count = count * placed / (i + 1);
        }
    }
    Ok(count as u64)
}

/// Haar-random unitary from QR of a seeded complex Gaussian matrix with the
/// diagonal phases of `R` folded back into `Q`.
pub fn haar_unitary(n: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let inv_sqrt2 = 1.0 / 2f64.sqrt();
    let g = CMatrix::from_fn(n, n, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re * inv_sqrt2, im * inv_sqrt2)
    });
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / C64::new(d.norm(), 0.0) } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Haar-random state on the isospectral orbit of `rho`: `U rho U^dagger` with
/// `U` Haar-distributed. Deterministic per seed.
pub fn sample_isospectral(rho: &DensityMatrix, seed: u64) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u = haar_unitary(rho.dim(), &mut rng);
    DensityMatrix::new_unchecked(&u * rho.matrix() * u.adjoint())
}

/// Verdict of the exceptional pseudo-pure test.
#[derive(Debug, Clone, Serialize)]
pub struct ExceptionalityReport {
    pub exceptional: bool,
    /// The single coupled level pair, when exceptional.
    pub pair: Option<(usize, usize)>,
    /// Phase of the off-diagonal entry at that pair.
    pub phase: Option<f64>,
    /// Larger and smaller spectral value `(w, u)`.
    pub weights: (f64, f64),
    /// `(w - u)^2`, the largest distance attainable on the orbit pair; quoted
    /// for reference, not asserted against.
    pub v_max: f64,
}

/// Tests whether a pseudo-pure state (expressed in the drift eigenbasis) has
/// exactly one nonzero off-diagonal pair `(k, l)` with
/// `|r_kl| = (w - u)/2`, `r_kk = r_ll = (w + u)/2`, and all remaining
/// diagonal entries equal to `u`. Such targets admit invariant-set points at
/// every distance level, so tracking them can stall (see
/// [`crate::stability::invariant_set_probe`]).
///
/// Errors unless the spectrum class is `Pure` or `PseudoPure`.
pub fn is_pseudo_pure_exceptional(rho: &DensityMatrix, tol: f64) -> Result<ExceptionalityReport> {
    let sig = spectrum_signature(rho, CLUSTER_TOL)?;
    if !matches!(sig.class, StateClass::Pure | StateClass::PseudoPure) {
        return Err(Error::NotPseudoPure(sig.class.to_string()));
    }
    let n = rho.dim();
    // w: the multiplicity-1 value; u: the (n-1)-fold value
    let (w, u) = if sig.multiplicities[0] == 1 {
        (sig.distinct_values[0], sig.distinct_values[1])
    } else {
        (sig.distinct_values[1], sig.distinct_values[0])
    };
    let v_max = (w - u) * (w - u);
    let m = rho.matrix();
    let mut pairs = Vec::new();
    for k in 0..n {
        for l in (k + 1)..n {
            if m[(k, l)].norm() > tol {
                pairs.push((k, l));
            }
        }
    }
    let mut report = ExceptionalityReport {
        exceptional: false,
        pair: None,
        phase: None,
        weights: (w, u),
        v_max,
    };
    if pairs.len() != 1 {
        return Ok(report);
    }
    let (k, l) = pairs[0];
    let half_gap = 0.5 * (w - u);
    let half_sum = 0.5 * (w + u);
    let entry = m[(k, l)];
    let ok = (entry.norm() - half_gap).abs() <= tol
        && (m[(k, k)].re - half_sum).abs() <= tol
        && (m[(l, l)].re - half_sum).abs() <= tol
        && (0..n)
            .filter(|&i| i != k && i != l)
            .all(|i| (m[(i, i)].re - u).abs() <= tol);
    if ok {
        report.exceptional = true;
        report.pair = Some((k, l));
        report.phase = Some(entry.im.atan2(entry.re));
    }
    Ok(report)
}

/// Max-entry magnitude of `[h, rho]`; zero means `rho` is stationary under
/// the free evolution generated by `h`.
pub fn stationarity_residual(h: &Hamiltonian, rho: &DensityMatrix) -> f64 {
    let c = commutator(h.matrix(), rho.matrix()).expect("dimension checked by types");
    c.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Hermitian eigendecomposition helper shared across modules.
pub(crate) fn hermitian_eigenvalues_ascending(m: &CMatrix) -> Vec<f64> {
    let mut e: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().cloned().collect();
    e.sort_by(|a, b| a.partial_cmp(b).unwrap());
    e
}

pub(crate) fn max_entry_norm(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub(crate) fn hermiticity_residual(m: &CMatrix) -> f64 {
    hermiticity_deviation(m)
}

/// Bloch coordinates of a density matrix; thin wrapper kept next to the
/// other state operations for discoverability.
pub fn bloch_of_density(
    rho: &DensityMatrix,
    basis: &algebra::GeneratorBasis,
) -> Result<algebra::RVector> {
    basis.bloch_of_matrix(rho.matrix())
}

/// Inverse of [`bloch_of_density`]; positivity is the caller's concern.
pub fn density_of_bloch(
    s: &algebra::RVector,
    basis: &algebra::GeneratorBasis,
) -> Result<DensityMatrix> {
    Ok(DensityMatrix::new_unchecked(basis.matrix_of_bloch(s)?))
}
