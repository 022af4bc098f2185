//! Compressed spectral embeddings built from Gaussian random signals, the
//! Johnson–Lindenstrauss dimension rule and eigen-free estimation of `λ_k`.
//!
//! Signals are `n × d` with i.i.d. `N(0, 1/d)` entries, so `E[R Rᵀ] = I_n`
//! and the filtered energy `‖H R‖²_F` concentrates around `tr(H²)`. For the
//! ideal filter this is the number of modes passed, which is what the
//! dichotomic search on the cut-off compares against `k`.

use ndarray::{Array2, ArrayView2};

use crate::eigen::{ideal_filter_embed, EigenSystem, LeadingEigenvectors};
use crate::error::{Error, Result};
use crate::filter::{chebyshev_moments, design, filtered_energy, FilterError};
use crate::graph::NormalizedLaplacian;
use crate::rng;

/// Default number of halvings in the `λ_k` search (final width ≈ 1e-6).
pub const DEFAULT_BISECT_ITERS: usize = 20;

#[derive(Debug, Clone)]
pub struct RandomSignals {
    pub matrix: Array2<f64>,
    pub seed: u64,
}

impl RandomSignals {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn d(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.matrix.view()
    }
}

/// Draws `R` with `N(0, 1/d)` entries (Box–Muller on the signal stream of `seed`).
pub fn draw_signals(n: usize, d: usize, seed: u64) -> RandomSignals {
    let mut rng = rng::derive(seed, rng::streams::SIGNALS);
    let mut values = vec![0.0; n * d];
    rng::fill_standard_normal(&mut rng, &mut values);
    let scale = 1.0 / (d as f64).sqrt();
    values.iter_mut().for_each(|x| *x *= scale);
    RandomSignals { matrix: Array2::from_shape_vec((n, d), values).expect("n*d values"), seed }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JlParams {
    pub epsilon1: f64,
    pub beta: f64,
    pub d: usize,
}

/// `(4 + 2β) / (ε²/2 − ε³/3) · ln(n + k)`.
pub fn jl_bound(n: usize, k: usize, epsilon1: f64, beta: f64) -> f64 {
    // ε²/2 − ε³/3 written as ε²(3 − 2ε)/6 so integer cases round exactly.
    6.0 * (4.0 + 2.0 * beta) / (epsilon1 * epsilon1 * (3.0 - 2.0 * epsilon1)) * ((n + k) as f64).ln()
}

/// Smallest integer `d` strictly above [`jl_bound`].
pub fn choose_dimension(n: usize, k: usize, epsilon1: f64, beta: f64) -> Result<JlParams> {
    if !(epsilon1 > 0.0 && epsilon1 <= 1.0) {
        return Err(Error::InvalidParameter(format!("epsilon1 = {epsilon1} outside (0, 1]")));
    }
    if beta.is_nan() || beta <= 0.0 {
        return Err(Error::InvalidParameter(format!("beta = {beta} must be positive")));
    }
    let bound = jl_bound(n, k, epsilon1, beta);
    Ok(JlParams { epsilon1, beta, d: bound.floor() as usize + 1 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingKind {
    /// `X Xᵀ R`
    Exact,
    /// `h̃(L) R`
    Approximate,
    /// `𝒳 O Xᵀ R`
    Population,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterTag {
    Ideal,
    Order(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub filter: FilterTag,
    pub k: usize,
    pub d: usize,
}

#[derive(Debug, Clone)]
pub struct EmbeddingMatrix {
    pub rows: Array2<f64>,
    pub kind: EmbeddingKind,
    pub provenance: Provenance,
}

impl EmbeddingMatrix {
    pub fn new(rows: Array2<f64>, kind: EmbeddingKind, provenance: Provenance) -> Result<Self> {
        if rows.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("embedding has non-finite entries".into()));
        }
        Ok(Self { rows, kind, provenance })
    }

    pub fn squared_norm(&self) -> f64 {
        self.rows.iter().map(|x| x * x).sum()
    }
}

/// Ideal-filter embedding `X_R = X Xᵀ R`.
pub fn exact_embed(eigsys: &EigenSystem, k: usize, signals: &RandomSignals) -> Result<EmbeddingMatrix> {
    let rows = ideal_filter_embed(eigsys, k, signals.view())?;
    EmbeddingMatrix::new(
        rows,
        EmbeddingKind::Exact,
        Provenance { seed: signals.seed, filter: FilterTag::Ideal, k, d: signals.d() },
    )
}

/// Population embedding `𝒳_R = 𝒳 O Xᵀ R` for an alignment `O` (`k × k`).
pub fn population_embed(
    population: &LeadingEigenvectors,
    sample: &LeadingEigenvectors,
    alignment: ArrayView2<'_, f64>,
    signals: &RandomSignals,
) -> Result<EmbeddingMatrix> {
    let k = population.k();
    let n = population.x.nrows();
    if sample.k() != k || sample.x.nrows() != n || alignment.dim() != (k, k) || signals.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "population {n}x{k}, sample {}x{}, alignment {:?}, signals {}x{}",
            sample.x.nrows(),
            sample.k(),
            alignment.dim(),
            signals.n(),
            signals.d()
        )));
    }
    let projected = sample.x.t().dot(&signals.matrix);
    let rows = population.x.dot(&alignment.dot(&projected));
    EmbeddingMatrix::new(
        rows,
        EmbeddingKind::Population,
        Provenance { seed: signals.seed, filter: FilterTag::Ideal, k, d: signals.d() },
    )
}

/// One evaluation of the search: the cut tried and the filtered energy there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Probe {
    pub lambda: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LambdaEstimate {
    pub lambda_hat: f64,
    pub probes: Vec<Probe>,
}

/// Draws signals from `seed` and runs [`estimate_lambda_k_with`].
pub fn estimate_lambda_k(
    l: &NormalizedLaplacian,
    k: usize,
    p: usize,
    d: usize,
    seed: u64,
    iters: usize,
) -> Result<LambdaEstimate> {
    let signals = draw_signals(l.n(), d, seed);
    estimate_lambda_k_with(l, k, p, &signals, iters)
}

/// Dichotomic search for `|λ_k|` on `(0, 1]`.
///
/// Each probe designs the order-`p` filter at the midpoint `λ̂` and measures
/// `ν = ‖h̃_λ̂(L) R‖²_F`, an estimate of `#{i : |λ_i| ≥ λ̂}`. When the rounded
/// count is below `k` (`ν < k − ½`) the cut moves left, otherwise right. All
/// probes share `R`, and the energies come from one set of Chebyshev moments,
/// so the whole search costs `p` sparse sweeps.
pub fn estimate_lambda_k_with(
    l: &NormalizedLaplacian,
    k: usize,
    p: usize,
    signals: &RandomSignals,
    iters: usize,
) -> Result<LambdaEstimate> {
    let n = l.n();
    if k == 0 || k > n {
        return Err(Error::OutOfRange { count: k, max: n });
    }
    if iters == 0 {
        return Err(Error::InvalidParameter("bisection needs at least one iteration".into()));
    }
    if signals.n() != n {
        return Err(Error::DimensionMismatch(format!("signals have {} rows for n = {n}", signals.n())));
    }
    let moments = chebyshev_moments(l, signals.view(), p)?;
    let target = k as f64 - 0.5;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut probes = Vec::with_capacity(iters);
    for _ in 0..iters {
        let mid = 0.5 * (lo + hi);
        let filter = design(mid, p)?;
        let energy = filtered_energy(&filter.weights(), &moments);
        probes.push(Probe { lambda: mid, energy });
        // With k = n no cut above zero can be certified to keep every mode.
        if k == n || energy < target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    check_monotone(&probes)?;
    Ok(LambdaEstimate { lambda_hat: 0.5 * (lo + hi), probes })
}

/// The energy must not increase with the cut across the last three probes.
fn check_monotone(probes: &[Probe]) -> Result<()> {
    let start = probes.len().saturating_sub(3);
    let mut tail: Vec<Probe> = probes[start..].to_vec();
    tail.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
    for w in tail.windows(2) {
        let tol = 1e-9 * w[0].energy.abs().max(1.0);
        if w[1].energy > w[0].energy + tol {
            return Err(Error::NonConvergent);
        }
    }
    Ok(())
}

/// Interval for the filtered energy `‖X̃_R‖²_F` given the filter error `e`:
/// `[max(0, (1−ε₂)k − 2(1+ε₂)k e), (1+ε₂)(k + 2k e + n e²)]`.
pub fn norm_bounds(n: usize, k: usize, e: FilterError, epsilon2: f64) -> (f64, f64) {
    let k = k as f64;
    let n = n as f64;
    let e = e.e;
    let lower = ((1.0 - epsilon2) * k - 2.0 * (1.0 + epsilon2) * k * e).max(0.0);
    let upper = (1.0 + epsilon2) * (k + 2.0 * k * e + n * e * e);
    (lower, upper)
}

/// Whether `‖X̃_R‖²_F` falls inside [`norm_bounds`].
pub fn norm_bounds_check(embedding: &EmbeddingMatrix, k: usize, e: FilterError, epsilon2: f64) -> bool {
    let (lower, upper) = norm_bounds(embedding.rows.nrows(), k, e, epsilon2);
    let energy = embedding.squared_norm();
    lower <= energy && energy <= upper
}
