//! k-means on embedding rows: k-means++ seeding, Lloyd iterations and
//! best-of-restarts selection.

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;
use crate::sbm::Membership;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when the relative cost decrease falls below this.
    pub tol: f64,
}

impl Default for KMeansParams {
    fn default() -> Self {
        Self { restarts: 10, max_iter: 300, tol: 1e-10 }
    }
}

#[derive(Debug, Clone)]
pub struct KMeansResult {
    pub centroids: Array2<f64>,
    pub assignment: Vec<usize>,
    pub cost: f64,
    /// Cost after every Lloyd update of the winning restart.
    pub cost_history: Vec<f64>,
    pub restart: usize,
}

impl KMeansResult {
    pub fn k(&self) -> usize {
        self.centroids.nrows()
    }

    /// `C`: row `i` is the centroid of the cluster of row `i`.
    pub fn per_row_centroids(&self) -> Array2<f64> {
        let d = self.centroids.ncols();
        let mut c = Array2::zeros((self.assignment.len(), d));
        for (i, &g) in self.assignment.iter().enumerate() {
            c.row_mut(i).assign(&self.centroids.row(g));
        }
        c
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Best of `params.restarts` Lloyd runs, each seeded with k-means++ from its
/// own stream of `seed`. Ties on cost go to the earliest restart.
pub fn kmeans(points: ArrayView2<'_, f64>, k: usize, seed: u64, params: &KMeansParams) -> Result<KMeansResult> {
    let (n, d) = points.dim();
    if k == 0 || k > n {
        return Err(Error::OutOfRange { count: k, max: n });
    }
    if points.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter("k-means input has non-finite entries".into()));
    }
    let data: Vec<f64> = points.iter().copied().collect();
    let restarts = params.restarts.max(1);
    let runs: Vec<KMeansResult> = (0..restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = rng::derive(seed, rng::streams::kmeans_restart(restart as u64));
            lloyd(&data, n, d, k, &mut rng, params, restart)
        })
        .collect();
    let mut best: Option<KMeansResult> = None;
    for run in runs {
        if best.as_ref().is_none_or(|b| run.cost < b.cost) {
            best = Some(run);
        }
    }
    Ok(best.expect("at least one restart"))
}

fn kmeans_plus_plus<R: Rng + ?Sized>(data: &[f64], n: usize, d: usize, k: usize, rng: &mut R) -> Vec<f64> {
    let row = |i: usize| &data[i * d..(i + 1) * d];
    let mut centroids = Vec::with_capacity(k * d);
    let first = rng.random_range(0..n);
    centroids.extend_from_slice(row(first));
    let mut dist: Vec<f64> = (0..n).map(|i| sq_dist(row(i), row(first))).collect();
    for _ in 1..k {
        let total: f64 = dist.iter().sum();
        let chosen = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                acc += w;
                if acc > target {
                    pick = i;
                    break;
                }
            }
            pick
        } else {
            rng.random_range(0..n)
        };
        centroids.extend_from_slice(row(chosen));
        for (i, di) in dist.iter_mut().enumerate() {
            *di = di.min(sq_dist(row(i), row(chosen)));
        }
    }
    centroids
}

fn lloyd<R: Rng + ?Sized>(
    data: &[f64],
    n: usize,
    d: usize,
    k: usize,
    rng: &mut R,
    params: &KMeansParams,
    restart: usize,
) -> KMeansResult {
    let row = |i: usize| &data[i * d..(i + 1) * d];
    let mut centroids = kmeans_plus_plus(data, n, d, k, rng);
    let mut assignment = vec![0usize; n];
    let mut history = Vec::new();
    let mut cost = f64::INFINITY;
    for iter in 0..params.max_iter.max(1) {
        let mut changed = false;
        for (i, slot) in assignment.iter_mut().enumerate() {
            let x = row(i);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for g in 0..k {
                let dist = sq_dist(x, &centroids[g * d..(g + 1) * d]);
                if dist < best_d {
                    best_d = dist;
                    best = g;
                }
            }
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        reseed_empty(data, d, k, &mut assignment, &centroids);
        centroids = means(data, d, k, &assignment);
        let new_cost: f64 =
            (0..n).map(|i| sq_dist(row(i), &centroids[assignment[i] * d..(assignment[i] + 1) * d])).sum();
        history.push(new_cost);
        let converged = iter > 0 && (!changed || (cost - new_cost) <= params.tol * cost.max(f64::MIN_POSITIVE));
        cost = new_cost;
        if converged {
            break;
        }
    }
    KMeansResult {
        centroids: Array2::from_shape_vec((k, d), centroids).expect("k*d centroid values"),
        assignment,
        cost,
        cost_history: history,
        restart,
    }
}

/// Moves the point farthest from its centroid into each empty cluster.
fn reseed_empty(data: &[f64], d: usize, k: usize, assignment: &mut [usize], centroids: &[f64]) {
    loop {
        let mut sizes = vec![0usize; k];
        for &g in assignment.iter() {
            sizes[g] += 1;
        }
        let Some(empty) = sizes.iter().position(|&s| s == 0) else {
            return;
        };
        let mut far = None;
        let mut far_d = -1.0;
        for (i, &g) in assignment.iter().enumerate() {
            if sizes[g] < 2 {
                continue;
            }
            let dist = sq_dist(&data[i * d..(i + 1) * d], &centroids[g * d..(g + 1) * d]);
            if dist > far_d {
                far_d = dist;
                far = Some(i);
            }
        }
        match far {
            Some(i) => assignment[i] = empty,
            None => return,
        }
    }
}

fn means(data: &[f64], d: usize, k: usize, assignment: &[usize]) -> Vec<f64> {
    let mut sums = vec![0.0; k * d];
    let mut counts = vec![0usize; k];
    for (i, &g) in assignment.iter().enumerate() {
        counts[g] += 1;
        for (s, x) in sums[g * d..(g + 1) * d].iter_mut().zip(&data[i * d..(i + 1) * d]) {
            *s += x;
        }
    }
    for g in 0..k {
        if counts[g] > 0 {
            let inv = 1.0 / counts[g] as f64;
            sums[g * d..(g + 1) * d].iter_mut().for_each(|s| *s *= inv);
        }
    }
    sums
}

/// Largest restart count [`kmeans_certified`] escalates to.
pub const MAX_CERTIFIED_RESTARTS: usize = 80;

/// k-means whose cost is certified against a competitor configuration with at
/// most `k` distinct rows: restarts are doubled (up to
/// [`MAX_CERTIFIED_RESTARTS`]) until `cost ≤ ‖competitor − points‖²_F`.
/// Returns the result and whether the certificate holds.
pub fn kmeans_certified(
    points: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    params: &KMeansParams,
    competitor: ArrayView2<'_, f64>,
) -> Result<(KMeansResult, bool)> {
    if competitor.dim() != points.dim() {
        return Err(Error::DimensionMismatch(format!(
            "competitor {:?} vs points {:?}",
            competitor.dim(),
            points.dim()
        )));
    }
    let bound: f64 = points.iter().zip(competitor.iter()).map(|(a, b)| (a - b) * (a - b)).sum();
    let mut current = *params;
    loop {
        let result = kmeans(points, k, seed, &current)?;
        let ok = result.cost <= bound * (1.0 + 1e-12);
        if ok || current.restarts >= MAX_CERTIFIED_RESTARTS {
            return Ok((result, ok));
        }
        current.restarts = (current.restarts.max(1) * 2).min(MAX_CERTIFIED_RESTARTS);
    }
}

/// Estimated membership from a k-means result. Labels are compacted in order
/// of first appearance, so clusters that ended up empty are dropped.
pub fn to_membership(result: &KMeansResult) -> Membership {
    let mut relabel = vec![usize::MAX; result.k()];
    let mut next = 0;
    let labels: Vec<usize> = result
        .assignment
        .iter()
        .map(|&g| {
            if relabel[g] == usize::MAX {
                relabel[g] = next;
                next += 1;
            }
            relabel[g]
        })
        .collect();
    Membership::new(labels, next).expect("compacted labels cover every cluster")
}
