//! Misclustering measures, the Procrustes alignment standing in for the
//! orthonormal alignment between sample and population eigenvectors, and the
//! closed-form quantities of the four-parameter block model.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};
use pathfinding::kuhn_munkres::kuhn_munkres;
use pathfinding::matrix::Matrix;

use crate::eigen::spectrum_dense;
use crate::error::{Error, Result};
use crate::filter::FilterError;
use crate::graph::population_laplacian;
use crate::sbm::{Membership, SimplifiedSbm};

#[derive(Debug, Clone)]
pub struct ProcrustesAlignment {
    pub o: Array2<f64>,
    /// `‖X − 𝒳 O‖_F`
    pub residual: f64,
    /// Cross-product `𝒳ᵀX` was numerically rank deficient.
    pub degenerate: bool,
}

/// `O = argmin_{OᵀO = I} ‖X − 𝒳 O‖_F`, from the SVD `𝒳ᵀX = U Σ Vᵀ` as `O = U Vᵀ`.
pub fn procrustes(x: ArrayView2<'_, f64>, chi: ArrayView2<'_, f64>) -> Result<ProcrustesAlignment> {
    if x.dim() != chi.dim() {
        return Err(Error::DimensionMismatch(format!("X is {:?}, 𝒳 is {:?}", x.dim(), chi.dim())));
    }
    let (n, k) = x.dim();
    if k > n || k == 0 {
        return Err(Error::OutOfRange { count: k, max: n });
    }
    let cross = chi.t().dot(&x);
    let m = DMatrix::from_fn(k, k, |i, j| cross[[i, j]]);
    let svd = m.svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested Vᵀ");
    let o_mat = u * v_t;
    let o = Array2::from_shape_fn((k, k), |(i, j)| o_mat[(i, j)]);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let degenerate = smax == 0.0 || smin <= 1e-10 * smax;
    let residual = (&x - &chi.dot(&o)).iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok(ProcrustesAlignment { o, residual, degenerate })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MisclusterDefinition {
    /// Rows whose centroid is at least `(1−ε₁)/√(2P)` from the population row.
    Distance,
    /// Minimum Hamming distance over label permutations.
    Permutation,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisclusterReport {
    pub count: usize,
    pub rate: f64,
    pub definition: MisclusterDefinition,
    pub largest_block: Option<usize>,
    pub epsilon1: Option<f64>,
}

/// Distance threshold `(1−ε₁)/√(2P)` of the sufficient condition.
pub fn distance_threshold(largest_block: usize, epsilon1: f64) -> f64 {
    (1.0 - epsilon1) / (2.0 * largest_block as f64).sqrt()
}

/// Counts rows `i` with `‖c_i − 𝒳_R,i‖ ≥ (1−ε₁)/√(2P)`.
pub fn miscluster_distance(
    centroids: ArrayView2<'_, f64>,
    population: ArrayView2<'_, f64>,
    largest_block: usize,
    epsilon1: f64,
) -> Result<MisclusterReport> {
    if centroids.dim() != population.dim() {
        return Err(Error::DimensionMismatch(format!(
            "centroids {:?} vs population embedding {:?}",
            centroids.dim(),
            population.dim()
        )));
    }
    let threshold = distance_threshold(largest_block, epsilon1);
    let n = centroids.nrows();
    let count = centroids
        .rows()
        .into_iter()
        .zip(population.rows())
        .filter(|(c, x)| c.iter().zip(x.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= threshold)
        .count();
    Ok(MisclusterReport {
        count,
        rate: if n == 0 { 0.0 } else { count as f64 / n as f64 },
        definition: MisclusterDefinition::Distance,
        largest_block: Some(largest_block),
        epsilon1: Some(epsilon1),
    })
}

/// Minimum number of disagreements over all matchings of estimated labels to
/// true labels, via optimal assignment on the confusion matrix.
pub fn miscluster_permutation(est: &Membership, truth: &Membership) -> Result<MisclusterReport> {
    if est.n() != truth.n() {
        return Err(Error::DimensionMismatch(format!("{} estimated labels vs {} true labels", est.n(), truth.n())));
    }
    let size = est.k().max(truth.k());
    let mut confusion = vec![0i64; size * size];
    for (&a, &b) in est.labels().iter().zip(truth.labels()) {
        confusion[a * size + b] += 1;
    }
    let weights = Matrix::from_vec(size, size, confusion).expect("square confusion matrix");
    let (matched, _) = kuhn_munkres(&weights);
    let n = est.n();
    let count = n - matched as usize;
    Ok(MisclusterReport {
        count,
        rate: if n == 0 { 0.0 } else { count as f64 / n as f64 },
        definition: MisclusterDefinition::Permutation,
        largest_block: Some(truth.largest_block()),
        epsilon1: None,
    })
}

/// Closed-form terms of the four-parameter model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundTerms {
    /// `1 / (k r/q + 1)`
    pub lambda_bar: f64,
    /// `q/k + r`
    pub tau: f64,
    pub largest_block: usize,
    /// `|λ_k|` of the population Laplacian, when computed.
    pub oracle_lambda_k: Option<f64>,
}

pub fn simplified_quantities(model: &SimplifiedSbm) -> Result<BoundTerms> {
    if model.q <= 0.0 {
        return Err(Error::InvalidParameter(
            "q = 0 leaves the eigengap formula undefined; use the population eigendecomposition directly".into(),
        ));
    }
    let k = model.k as f64;
    Ok(BoundTerms {
        lambda_bar: 1.0 / (k * (model.r / model.q) + 1.0),
        tau: model.q / k + model.r,
        largest_block: model.s,
        oracle_lambda_k: None,
    })
}

/// [`simplified_quantities`] plus the dense population cross-check.
pub fn simplified_quantities_checked(model: &SimplifiedSbm, dense_limit: usize) -> Result<BoundTerms> {
    let mut terms = simplified_quantities(model)?;
    let population = model.model()?.population();
    let lap = population_laplacian(&population)?;
    let spectrum = spectrum_dense(lap.view(), dense_limit)?;
    terms.oracle_lambda_k = Some(spectrum[model.k - 1].abs());
    Ok(terms)
}

/// `k³ (ln n)² / n + n² e² / k`.
pub fn misclustering_bound(n: usize, k: usize, e: FilterError) -> f64 {
    let nf = n as f64;
    let kf = k as f64;
    kf.powi(3) * nf.ln().powi(2) / nf + nf * nf * e.e * e.e / kf
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub terms: BoundTerms,
    pub bound: f64,
    pub observed_rate: f64,
}

pub fn bound_report(model: &SimplifiedSbm, e: FilterError, observed_rate: f64) -> Result<BoundReport> {
    let terms = simplified_quantities(model)?;
    Ok(BoundReport { terms, bound: misclustering_bound(model.n(), model.k, e), observed_rate })
}

pub fn frobenius_sq(a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Inputs to the misclustering argument on one trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainCheck {
    /// `‖C − X̃_R‖²_F ≤ ‖𝒳_R − X̃_R‖²_F`
    pub kmeans_certificate: bool,
    /// `‖C − 𝒳_R‖²_F`
    pub lhs: f64,
    /// `4‖𝒳_R − X_R‖²_F + 4‖X_R − X̃_R‖²_F`
    pub rhs: f64,
}

impl ChainCheck {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs * (1.0 + 1e-12) + 1e-12
    }
}

/// Evaluates the triangle-inequality chain bounding `‖C − 𝒳_R‖²_F`.
pub fn error_chain(
    centroids: ArrayView2<'_, f64>,
    approx: ArrayView2<'_, f64>,
    exact: ArrayView2<'_, f64>,
    population: ArrayView2<'_, f64>,
) -> ChainCheck {
    let kmeans_cost = frobenius_sq(centroids, approx);
    let competitor = frobenius_sq(population, approx);
    ChainCheck {
        kmeans_certificate: kmeans_cost <= competitor * (1.0 + 1e-12),
        lhs: frobenius_sq(centroids, population),
        rhs: 4.0 * frobenius_sq(population, exact) + 4.0 * frobenius_sq(exact, approx),
    }
}

/// For every row meeting the distance condition, checks that its centroid is
/// strictly closer to its own population row than to every other-block row.
/// Returns the number of rows where the implication fails.
pub fn sufficient_condition_violations(
    centroids: ArrayView2<'_, f64>,
    population: ArrayView2<'_, f64>,
    truth: &Membership,
    epsilon1: f64,
) -> usize {
    let threshold = distance_threshold(truth.largest_block(), epsilon1);
    // One representative population row per block.
    let mut reps = vec![None; truth.k()];
    for (i, &g) in truth.labels().iter().enumerate() {
        reps[g].get_or_insert(i);
    }
    let dist = |a: ndarray::ArrayView1<'_, f64>, b: ndarray::ArrayView1<'_, f64>| -> f64 {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    };
    let mut violations = 0;
    for (i, &g) in truth.labels().iter().enumerate() {
        let c = centroids.row(i);
        let own = dist(c, population.row(i));
        if own >= threshold {
            continue;
        }
        let closer_elsewhere = reps
            .iter()
            .enumerate()
            .filter(|&(h, _)| h != g)
            .filter_map(|(_, r)| *r)
            .any(|j| dist(c, population.row(j)) <= own);
        if closer_elsewhere {
            violations += 1;
        }
    }
    violations
}
