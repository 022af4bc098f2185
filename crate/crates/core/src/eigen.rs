//! Dense symmetric eigendecomposition used as ground truth.
//!
//! Nothing on the compressive path calls into this module. Calls made inside
//! [`eigen_free`] fail with [`Error::EigenForbidden`], and every decomposition
//! bumps a per-thread counter so tests can assert the path stays eigen-free.

use std::cell::Cell;
use std::cmp::Ordering;

use nalgebra::DMatrix;
use ndarray::{s, Array1, Array2, ArrayView2};

use crate::clustering::{kmeans, to_membership, KMeansParams};
use crate::error::{Error, Result};
use crate::graph::NormalizedLaplacian;
use crate::sbm::Membership;

/// Input must be symmetric to this absolute tolerance.
pub const SYMMETRY_TOLERANCE: f64 = 1e-10;

/// `|λ_k| − |λ_{k+1}|` below this marks the leading subspace as degenerate.
pub const DEGENERACY_GAP: f64 = 1e-6;

thread_local! {
    static FORBID_DEPTH: Cell<usize> = const { Cell::new(0) };
    static DECOMPOSITIONS: Cell<u64> = const { Cell::new(0) };
}

/// Runs `f` with eigendecompositions disabled on the current thread.
pub fn eigen_free<T>(f: impl FnOnce() -> T) -> T {
    struct Reset;
    impl Drop for Reset {
        fn drop(&mut self) {
            FORBID_DEPTH.with(|d| d.set(d.get() - 1));
        }
    }
    FORBID_DEPTH.with(|d| d.set(d.get() + 1));
    let _reset = Reset;
    f()
}

/// Number of decompositions performed on the current thread so far.
pub fn decomposition_count() -> u64 {
    DECOMPOSITIONS.with(|c| c.get())
}

fn enter_decomposition() -> Result<()> {
    if FORBID_DEPTH.with(|d| d.get()) > 0 {
        return Err(Error::EigenForbidden);
    }
    DECOMPOSITIONS.with(|c| c.set(c.get() + 1));
    Ok(())
}

/// Algorithm backing [`decompose_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EigenSolver {
    /// Householder tridiagonalisation followed by implicit symmetric QR.
    #[default]
    Tridiagonal,
    /// Cyclic Jacobi rotations.
    Jacobi,
}

/// Full spectrum sorted by decreasing `|λ|` (ties: larger signed value first,
/// then original index), with eigenvectors as the matching columns of `U`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    eigenvalues: Array1<f64>,
    eigenvectors: Array2<f64>,
}

impl EigenSystem {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &Array1<f64> {
        &self.eigenvalues
    }

    pub fn eigenvectors(&self) -> &Array2<f64> {
        &self.eigenvectors
    }

    /// `U h(Λ) Uᵀ M` for a spectral function `h`.
    pub fn apply_function(&self, h: impl Fn(f64) -> f64, m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if m.nrows() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "matrix has {} rows, spectrum has size {}",
                m.nrows(),
                self.n()
            )));
        }
        let u = &self.eigenvectors;
        let mut coeffs = u.t().dot(&m);
        for (mut row, &lambda) in coeffs.rows_mut().into_iter().zip(self.eigenvalues.iter()) {
            row *= h(lambda);
        }
        Ok(u.dot(&coeffs))
    }
}

/// Columns of `U` for the `k` largest `|λ|`.
#[derive(Debug, Clone)]
pub struct LeadingEigenvectors {
    pub x: Array2<f64>,
    /// Signed k-th eigenvalue in the `|λ|` ordering.
    pub lambda_k: f64,
    /// Signed (k+1)-th eigenvalue, when `k < n`.
    pub lambda_next: Option<f64>,
}

impl LeadingEigenvectors {
    pub fn k(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lambda_next.is_some_and(|next| self.lambda_k.abs() - next.abs() < DEGENERACY_GAP)
    }

    /// Orthogonal projector `X Xᵀ`.
    pub fn projector(&self) -> Array2<f64> {
        self.x.dot(&self.x.t())
    }
}

/// Decomposes the dense form of `L`.
pub fn decompose(l: &NormalizedLaplacian) -> Result<EigenSystem> {
    let n = l.n();
    if n > l.dense_limit() {
        return Err(Error::OverDenseLimit { n, limit: l.dense_limit() });
    }
    decompose_dense(l.to_dense()?.view(), l.dense_limit())
}

pub fn decompose_dense(matrix: ArrayView2<'_, f64>, dense_limit: usize) -> Result<EigenSystem> {
    decompose_with(matrix, dense_limit, EigenSolver::default())
}

pub fn decompose_with(matrix: ArrayView2<'_, f64>, dense_limit: usize, solver: EigenSolver) -> Result<EigenSystem> {
    let n = check_input(matrix, dense_limit)?;
    enter_decomposition()?;
    let (values, vectors) = match solver {
        EigenSolver::Tridiagonal => {
            let m = DMatrix::from_fn(n, n, |i, j| matrix[[i, j]]);
            let eig = m.symmetric_eigen();
            let vectors = Array2::from_shape_fn((n, n), |(i, j)| eig.eigenvectors[(i, j)]);
            (eig.eigenvalues.iter().copied().collect::<Vec<_>>(), vectors)
        }
        EigenSolver::Jacobi => jacobi(matrix),
    };
    let order = spectral_order(&values);
    let eigenvalues = Array1::from_iter(order.iter().map(|&i| values[i]));
    let mut eigenvectors = Array2::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.column_mut(dst).assign(&vectors.column(src));
    }
    Ok(EigenSystem { eigenvalues, eigenvectors })
}

/// Eigenvalues only, in the same order as [`EigenSystem`].
pub fn spectrum(l: &NormalizedLaplacian) -> Result<Vec<f64>> {
    let n = l.n();
    if n > l.dense_limit() {
        return Err(Error::OverDenseLimit { n, limit: l.dense_limit() });
    }
    spectrum_dense(l.to_dense()?.view(), l.dense_limit())
}

pub fn spectrum_dense(matrix: ArrayView2<'_, f64>, dense_limit: usize) -> Result<Vec<f64>> {
    let n = check_input(matrix, dense_limit)?;
    enter_decomposition()?;
    let m = DMatrix::from_fn(n, n, |i, j| matrix[[i, j]]);
    let values: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    Ok(spectral_order(&values).into_iter().map(|i| values[i]).collect())
}

fn check_input(matrix: ArrayView2<'_, f64>, dense_limit: usize) -> Result<usize> {
    let (n, m) = matrix.dim();
    if n != m {
        return Err(Error::DimensionMismatch(format!("matrix is {n}x{m}")));
    }
    if n > dense_limit {
        return Err(Error::OverDenseLimit { n, limit: dense_limit });
    }
    let mut asym = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            asym = asym.max((matrix[[i, j]] - matrix[[j, i]]).abs());
        }
    }
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric(asym));
    }
    Ok(n)
}

/// Index permutation sorting by decreasing `|λ|`, then decreasing `λ`, then index.
pub fn spectral_order(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let (x, y) = (values[a], values[b]);
        y.abs()
            .partial_cmp(&x.abs())
            .unwrap_or(Ordering::Equal)
            .then(y.partial_cmp(&x).unwrap_or(Ordering::Equal))
            .then(a.cmp(&b))
    });
    order
}

/// Cyclic Jacobi sweeps until the off-diagonal mass is negligible.
fn jacobi(matrix: ArrayView2<'_, f64>) -> (Vec<f64>, Array2<f64>) {
    let n = matrix.nrows();
    let mut a = matrix.to_owned();
    // Symmetrise exactly so rotations act on a truly symmetric matrix.
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (a[[i, j]] + a[[j, i]]);
            a[[i, j]] = avg;
            a[[j, i]] = avg;
        }
    }
    let mut v = Array2::<f64>::eye(n);
    let scale = a.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
    for _sweep in 0..100 {
        let off: f64 = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| a[[i, j]] * a[[i, j]]).sum();
        if off.sqrt() <= 1e-15 * scale {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[[p, q]];
                if apq.abs() <= f64::MIN_POSITIVE {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for kk in 0..n {
                    let akp = a[[kk, p]];
                    let akq = a[[kk, q]];
                    a[[kk, p]] = c * akp - sn * akq;
                    a[[kk, q]] = sn * akp + c * akq;
                }
                for kk in 0..n {
                    let apk = a[[p, kk]];
                    let aqk = a[[q, kk]];
                    a[[p, kk]] = c * apk - sn * aqk;
                    a[[q, kk]] = sn * apk + c * aqk;
                }
                for kk in 0..n {
                    let vkp = v[[kk, p]];
                    let vkq = v[[kk, q]];
                    v[[kk, p]] = c * vkp - sn * vkq;
                    v[[kk, q]] = sn * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[[i, i]]).collect(), v)
}

pub fn leading(eigsys: &EigenSystem, k: usize) -> Result<LeadingEigenvectors> {
    let n = eigsys.n();
    if k == 0 || k > n {
        return Err(Error::OutOfRange { count: k, max: n });
    }
    Ok(LeadingEigenvectors {
        x: eigsys.eigenvectors.slice(s![.., ..k]).to_owned(),
        lambda_k: eigsys.eigenvalues[k - 1],
        lambda_next: (k < n).then(|| eigsys.eigenvalues[k]),
    })
}

/// Ideal low-pass filtering `X Xᵀ R` of the columns of `r`.
pub fn ideal_filter_embed(eigsys: &EigenSystem, k: usize, r: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    let lead = leading(eigsys, k)?;
    if r.nrows() != eigsys.n() {
        return Err(Error::DimensionMismatch(format!(
            "signals have {} rows, spectrum has size {}",
            r.nrows(),
            eigsys.n()
        )));
    }
    Ok(lead.x.dot(&lead.x.t().dot(&r)))
}

/// Exact spectral clustering: k-means on the rows of the leading eigenvectors.
pub fn spectral_cluster_exact(
    l: &NormalizedLaplacian,
    k: usize,
    seed: u64,
    params: &KMeansParams,
) -> Result<Membership> {
    let eigsys = decompose(l)?;
    let lead = leading(&eigsys, k)?;
    let result = kmeans(lead.x.view(), k, seed, params)?;
    Ok(to_membership(&result))
}
