//! Stochastic block models: membership, block probabilities, the expected
//! adjacency `Z B Zᵀ` and Bernoulli sampling of symmetric graphs.

use nalgebra::DMatrix;
use ndarray::Array2;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::SparseGraph;
use crate::rng;

/// Relative singular-value threshold used for the full-rank check on `B`.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Assignment of every vertex to one of `k` non-empty blocks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Membership {
    assignments: Vec<usize>,
    k: usize,
}

impl Membership {
    /// Validates that every label is `< k` and every block is populated.
    pub fn new(assignments: Vec<usize>, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        let mut sizes = vec![0usize; k];
        for (i, &g) in assignments.iter().enumerate() {
            if g >= k {
                return Err(Error::InvalidParameter(format!("vertex {i} assigned to block {g} but k = {k}")));
            }
            sizes[g] += 1;
        }
        if let Some(g) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::EmptyBlock(g));
        }
        Ok(Self { assignments, k })
    }

    /// `k` consecutive blocks of `size` vertices each.
    pub fn equal_blocks(k: usize, size: usize) -> Result<Self> {
        Self::new((0..k * size).map(|i| i / size).collect(), k)
    }

    pub fn n(&self) -> usize {
        self.assignments.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn labels(&self) -> &[usize] {
        &self.assignments
    }

    pub fn block_of(&self, vertex: usize) -> usize {
        self.assignments[vertex]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0usize; self.k];
        for &g in &self.assignments {
            sizes[g] += 1;
        }
        sizes
    }

    /// Population of the largest block (`P`).
    pub fn largest_block(&self) -> usize {
        self.sizes().into_iter().max().unwrap_or(0)
    }

    /// The one-hot `n × k` membership matrix `Z`.
    pub fn one_hot(&self) -> Array2<f64> {
        let mut z = Array2::zeros((self.n(), self.k));
        for (i, &g) in self.assignments.iter().enumerate() {
            z[[i, g]] = 1.0;
        }
        z
    }
}

/// Symmetric, full-rank `k × k` matrix of edge probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMatrix {
    entries: Array2<f64>,
}

impl BlockMatrix {
    pub fn new(entries: Array2<f64>) -> Result<Self> {
        let (rows, cols) = entries.dim();
        if rows != cols || rows == 0 {
            return Err(Error::DimensionMismatch(format!(
                "block matrix must be square and non-empty, got {rows}x{cols}"
            )));
        }
        for g in 0..rows {
            for h in 0..rows {
                let b = entries[[g, h]];
                if !(0.0..=1.0).contains(&b) {
                    return Err(Error::InvalidParameter(format!("B[{g},{h}] = {b} is not a probability")));
                }
                if b != entries[[h, g]] {
                    return Err(Error::AsymmetricBlocks(g, h));
                }
            }
        }
        let dense = DMatrix::from_fn(rows, rows, |g, h| entries[[g, h]]);
        let sv = dense.singular_values();
        let max = sv.max();
        let min = sv.min();
        if max == 0.0 || min <= RANK_TOLERANCE * max {
            let ratio = if max == 0.0 { 0.0 } else { min / max };
            return Err(Error::RankDeficient(ratio));
        }
        Ok(Self { entries })
    }

    pub fn k(&self) -> usize {
        self.entries.nrows()
    }

    pub fn get(&self, g: usize, h: usize) -> f64 {
        self.entries[[g, h]]
    }

    pub fn entries(&self) -> &Array2<f64> {
        &self.entries
    }
}

/// The four-parameter model: `k` blocks of `s` vertices, within-block edge
/// probability `q + r` and cross-block probability `r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplifiedSbm {
    pub k: usize,
    pub s: usize,
    pub q: f64,
    pub r: f64,
}

impl SimplifiedSbm {
    pub fn new(k: usize, s: usize, q: f64, r: f64) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if s < 2 {
            return Err(Error::InvalidParameter("s must be at least 2".into()));
        }
        if !(0.0..=1.0).contains(&r) || !(0.0..=1.0).contains(&(q + r)) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!("need r in [0,1] and q + r in [0,1], got q = {q}, r = {r}")));
        }
        Ok(Self { k, s, q, r })
    }

    pub fn n(&self) -> usize {
        self.k * self.s
    }

    pub fn membership(&self) -> Membership {
        Membership::equal_blocks(self.k, self.s).expect("validated at construction")
    }

    pub fn blocks(&self) -> Result<BlockMatrix> {
        let k = self.k;
        let b = Array2::from_shape_fn((k, k), |(g, h)| if g == h { self.q + self.r } else { self.r });
        BlockMatrix::new(b)
    }

    pub fn model(&self) -> Result<SbmModel> {
        SbmModel::new(self.membership(), self.blocks()?)
    }
}

/// A general block model: membership `Z` plus block matrix `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmModel {
    pub membership: Membership,
    pub blocks: BlockMatrix,
}

impl SbmModel {
    pub fn new(membership: Membership, blocks: BlockMatrix) -> Result<Self> {
        if membership.k() != blocks.k() {
            return Err(Error::DimensionMismatch(format!(
                "membership has k = {} but block matrix is {}x{}",
                membership.k(),
                blocks.k(),
                blocks.k()
            )));
        }
        Ok(Self { membership, blocks })
    }

    pub fn n(&self) -> usize {
        self.membership.n()
    }

    pub fn edge_probability(&self, i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            self.blocks.get(self.membership.block_of(i), self.membership.block_of(j))
        }
    }

    pub fn population(&self) -> PopulationAdjacency {
        build_population(&self.membership, &self.blocks).expect("shapes validated at construction")
    }

    /// Samples without materialising the dense population matrix. Draws are
    /// consumed in the same order as [`sample_adjacency`], so both routes give
    /// identical graphs for the same seed.
    pub fn sample(&self, seed: u64) -> SparseGraph {
        self.sample_with(&mut rng::derive(seed, rng::streams::GRAPH))
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R) -> SparseGraph {
        sample_upper_triangle(self.n(), |i, j| self.edge_probability(i, j), rng)
    }

    /// Expected degree of every vertex (row sums of the population matrix).
    pub fn expected_degrees(&self) -> Vec<f64> {
        let sizes = self.membership.sizes();
        let k = self.blocks.k();
        (0..self.n())
            .map(|i| {
                let g = self.membership.block_of(i);
                let full: f64 = (0..k).map(|h| self.blocks.get(g, h) * sizes[h] as f64).sum();
                full - self.blocks.get(g, g)
            })
            .collect()
    }
}

/// Dense matrix of edge probabilities `Z B Zᵀ` with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationAdjacency {
    matrix: Array2<f64>,
}

impl PopulationAdjacency {
    /// Wraps an expected adjacency matrix: symmetric, entries in `[0, 1]`,
    /// zero diagonal.
    pub fn from_matrix(matrix: Array2<f64>) -> Result<Self> {
        let (r, c) = matrix.dim();
        if r != c {
            return Err(Error::DimensionMismatch(format!("population matrix is {r}x{c}")));
        }
        for i in 0..r {
            if matrix[[i, i]] != 0.0 {
                return Err(Error::InvalidParameter(format!("nonzero diagonal at {i}")));
            }
            for j in 0..r {
                let v = matrix[[i, j]];
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidParameter(format!("entry ({i}, {j}) = {v} outside [0, 1]")));
                }
                if v != matrix[[j, i]] {
                    return Err(Error::NotSymmetric((v - matrix[[j, i]]).abs()));
                }
            }
        }
        Ok(Self { matrix })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &Array2<f64> {
        &self.matrix
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.matrix.rows().into_iter().map(|row| row.sum()).collect()
    }
}

pub fn build_population(membership: &Membership, blocks: &BlockMatrix) -> Result<PopulationAdjacency> {
    if membership.k() != blocks.k() {
        return Err(Error::DimensionMismatch(format!(
            "membership has k = {} but block matrix has k = {}",
            membership.k(),
            blocks.k()
        )));
    }
    let n = membership.n();
    let labels = membership.labels();
    let matrix = Array2::from_shape_fn((n, n), |(i, j)| if i == j { 0.0 } else { blocks.get(labels[i], labels[j]) });
    Ok(PopulationAdjacency { matrix })
}

/// Independent Bernoulli draw for every pair `i < j`, mirrored below the
/// diagonal. Pairs are visited row by row, one uniform per pair.
pub fn sample_adjacency(population: &PopulationAdjacency, seed: u64) -> SparseGraph {
    sample_adjacency_with(population, &mut rng::derive(seed, rng::streams::GRAPH))
}

pub fn sample_adjacency_with<R: Rng + ?Sized>(population: &PopulationAdjacency, rng: &mut R) -> SparseGraph {
    let m = population.matrix();
    sample_upper_triangle(population.n(), |i, j| m[[i, j]], rng)
}

fn sample_upper_triangle<R, F>(n: usize, prob: F, rng: &mut R) -> SparseGraph
where
    R: Rng + ?Sized,
    F: Fn(usize, usize) -> f64,
{
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let u: f64 = rng.random();
            if u < prob(i, j) {
                edges.push((i, j));
            }
        }
    }
    SparseGraph::from_edges(n, &edges).expect("sampled pairs are in range and loop-free")
}
