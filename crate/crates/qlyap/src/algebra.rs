//! Orthonormal Hermitian generator basis for traceless matrices and the
//! coordinate maps between density matrices and real Bloch vectors.
//!
//! The basis for an `n`-level system has `n^2 - 1` Hermitian traceless
//! generators, orthonormal under the Hilbert-Schmidt inner product
//! `Tr(mu_j mu_k) = delta_jk`. A unit-trace Hermitian matrix then decomposes
//! as `rho = I/n + sum_k s_k mu_k` with real coordinates `s_k = Tr(mu_k rho)`;
//! `s` is the Bloch vector of `rho`. The map is a linear isometry up to the
//! fixed trace offset, so Hilbert-Schmidt distances of states equal Euclidean
//! distances of their Bloch vectors.

use nalgebra::{Complex, DMatrix, DVector};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;
pub type CMatrix = DMatrix<C64>;
pub type RVector = DVector<f64>;
pub type RMatrix = DMatrix<f64>;

/// Max-entry deviation from Hermiticity accepted on input matrices.
/// Smaller deviations are symmetrized away, larger ones are errors.
pub const HERMITICITY_TOL: f64 = 1e-9;

/// Label of one generator in the fixed basis ordering.
///
/// Ordering is: all symmetric off-diagonal generators (`k < l`,
/// lexicographic), then all antisymmetric off-diagonal generators (same
/// order), then the `n - 1` diagonal (Cartan) generators. Indices are
/// 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorLabel {
    /// `(e_kl + e_lk) / sqrt(2)`
    Sym { k: usize, l: usize },
    /// `(-i e_kl + i e_lk) / sqrt(2)`
    Antisym { k: usize, l: usize },
    /// `(sum_{s<=r} e_ss - (r+1) e_{r+1,r+1}) / sqrt((r+1)(r+2))`, `r = 0..n-2`
    Cartan { r: usize },
}

/// Orthonormal Hermitian traceless basis for `n x n` matrices.
///
/// Immutable after construction; all operations on it are pure, so a single
/// instance can be shared freely across threads.
#[derive(Debug, Clone)]
pub struct GeneratorBasis {
    dim: usize,
    generators: Vec<CMatrix>,
    labels: Vec<GeneratorLabel>,
}

impl GeneratorBasis {
    /// Builds the basis for an `n`-level system. Rejects `n < 2`.
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::DimensionMismatch(format!(
                "generator basis requires n >= 2, got {n}"
            )));
        }
        let mut generators = Vec::with_capacity(n * n - 1);
        let mut labels = Vec::with_capacity(n * n - 1);
        let inv_sqrt2 = 1.0 / 2f64.sqrt();
        for k in 0..n {
            for l in (k + 1)..n {
                let mut m = CMatrix::zeros(n, n);
                m[(k, l)] = C64::new(inv_sqrt2, 0.0);
                m[(l, k)] = C64::new(inv_sqrt2, 0.0);
                generators.push(m);
                labels.push(GeneratorLabel::Sym { k, l });
            }
        }
        for k in 0..n {
            for l in (k + 1)..n {
                let mut m = CMatrix::zeros(n, n);
                m[(k, l)] = C64::new(0.0, -inv_sqrt2);
                m[(l, k)] = C64::new(0.0, inv_sqrt2);
                generators.push(m);
                labels.push(GeneratorLabel::Antisym { k, l });
            }
        }
        for r in 0..(n - 1) {
            let norm = 1.0 / (((r + 1) * (r + 2)) as f64).sqrt();
            let mut m = CMatrix::zeros(n, n);
            for s in 0..=r {
                m[(s, s)] = C64::new(norm, 0.0);
            }
            m[(r + 1, r + 1)] = C64::new(-((r + 1) as f64) * norm, 0.0);
            generators.push(m);
            labels.push(GeneratorLabel::Cartan { r });
        }
        Ok(Self { dim: n, generators, labels })
    }

    /// Hilbert-space dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of generators, `n^2 - 1`.
    pub fn len(&self) -> usize {
        self.generators.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn generators(&self) -> &[CMatrix] {
        &self.generators
    }

    pub fn generator(&self, idx: usize) -> &CMatrix {
        &self.generators[idx]
    }

    pub fn label(&self, idx: usize) -> GeneratorLabel {
        self.labels[idx]
    }

    /// Flat index of a labeled generator, if the label is in range.
    pub fn index_of(&self, label: GeneratorLabel) -> Option<usize> {
        let n = self.dim;
        let pairs = n * (n - 1) / 2;
        let pair_offset = |k: usize, l: usize| -> Option<usize> {
            if k < l && l < n {
                // lexicographic position of (k, l) among k' < l'
                Some((0..k).map(|kk| n - 1 - kk).sum::<usize>() + (l - k - 1))
            } else {
                None
            }
        };
        match label {
            GeneratorLabel::Sym { k, l } => pair_offset(k, l),
            GeneratorLabel::Antisym { k, l } => pair_offset(k, l).map(|p| pairs + p),
            GeneratorLabel::Cartan { r } if r < n - 1 => Some(2 * pairs + r),
            GeneratorLabel::Cartan { .. } => None,
        }
    }

    /// True for indices in the off-diagonal (non-Cartan) blocks.
    pub fn is_offdiagonal(&self, idx: usize) -> bool {
        !matches!(self.labels[idx], GeneratorLabel::Cartan { .. })
    }

    /// Bloch coordinates `s_k = Tr(mu_k m)` of a Hermitian matrix.
    ///
    /// The trace coordinate is excluded, so `m` is recovered only up to its
    /// trace part. Imaginary residue below 1e-10 is discarded; inputs that
    /// fail the Hermiticity tolerance are rejected.
    pub fn bloch_of_matrix(&self, m: &CMatrix) -> Result<RVector> {
        self.check_dim(m)?;
        let m = symmetrize(m, HERMITICITY_TOL)?;
        let mut s = RVector::zeros(self.len());
        for (k, g) in self.generators.iter().enumerate() {
            let t = trace_of_product(g, &m);
            debug_assert!(t.im.abs() < 1e-10);
            s[k] = t.re;
        }
        Ok(s)
    }

    /// Reconstructs `I/n + sum_k s_k mu_k` from Bloch coordinates.
    ///
    /// The result is Hermitian with unit trace by construction. Positivity is
    /// not enforced: coordinates outside the state body yield a matrix with a
    /// negative eigenvalue, returned as-is.
    pub fn matrix_of_bloch(&self, s: &RVector) -> Result<CMatrix> {
        if s.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "Bloch vector length {} does not match basis size {}",
                s.len(),
                self.len()
            )));
        }
        let n = self.dim;
        let mut m = CMatrix::identity(n, n) * C64::new(1.0 / n as f64, 0.0);
        for (k, g) in self.generators.iter().enumerate() {
            let sk = C64::new(s[k], 0.0);
            m.zip_apply(g, |out, gi| *out += sk * gi);
        }
        Ok(m)
    }

    fn check_dim(&self, m: &CMatrix) -> Result<()> {
        if m.nrows() != self.dim || m.ncols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "expected {0}x{0} matrix, got {1}x{2}",
                self.dim,
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(())
    }
}

/// `AB - BA`. Errors on dimension mismatch.
pub fn commutator(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.nrows() != a.ncols() || b.nrows() != b.ncols() || a.nrows() != b.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "commutator requires equal square matrices, got {}x{} and {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(a * b - b * a)
}

/// `Tr(AB)` without forming the product.
pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut t = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            t += a[(i, j)] * b[(j, i)];
        }
    }
    t
}

/// Max-entry deviation of `m` from its Hermitian part.
pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm() * 0.5);
        }
    }
    dev
}

/// Returns `(m + m^dagger)/2` after checking the deviation against `tol`.
pub fn symmetrize(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    let dev = hermiticity_deviation(m);
    if dev > tol {
        return Err(Error::NotHermitian { max_dev: dev, tol });
    }
    Ok((m + m.adjoint()) * C64::new(0.5, 0.0))
}

/// Unnormalized skew-Hermitian generators and matrix units.
///
/// These are the raw generators the orthonormal basis is derived from (the
/// Hermitian generators above are `-i` times these, rescaled). They satisfy
/// `Tr(sym_pair(k,l) sym_pair(k',l')) = -2 delta_kk' delta_ll'`, the analogous
/// identity for `antisym_pair`, and mixed products are traceless. Kept for
/// cross-checks; the library computes in the Hermitian convention.
pub mod raw {
    use super::{C64, CMatrix};

    /// Matrix unit `e_rc`: 1 at `(r, c)`, 0 elsewhere.
    pub fn matrix_unit(n: usize, r: usize, c: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        m[(r, c)] = C64::new(1.0, 0.0);
        m
    }

    /// `i (e_kl + e_lk)`, `k < l`.
    pub fn sym_pair(n: usize, k: usize, l: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        m[(k, l)] = C64::new(0.0, 1.0);
        m[(l, k)] = C64::new(0.0, 1.0);
        m
    }

    /// `e_kl - e_lk`, `k < l`.
    pub fn antisym_pair(n: usize, k: usize, l: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        m[(k, l)] = C64::new(1.0, 0.0);
        m[(l, k)] = C64::new(-1.0, 0.0);
        m
    }

    /// `i (e_kk - e_{k+1,k+1})`, `k = 0..n-2`.
    pub fn cartan(n: usize, k: usize) -> CMatrix {
        let mut m = CMatrix::zeros(n, n);
        m[(k, k)] = C64::new(0.0, 1.0);
        m[(k + 1, k + 1)] = C64::new(0.0, -1.0);
        m
    }
}
