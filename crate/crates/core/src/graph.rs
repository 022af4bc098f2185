//! Compressed sparse symmetric graphs and the normalized Laplacian
//! `L = D^{-1/2} W D^{-1/2}` as a linear operator.

use std::io::{BufRead, Write};

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::sbm::PopulationAdjacency;

/// Default size above which dense `n × n` matrices are refused.
pub const DEFAULT_DENSE_LIMIT: usize = 4096;

/// Symmetric 0/1 adjacency in CSR form (row offsets + sorted column indices).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseGraph {
    n: usize,
    offsets: Vec<usize>,
    neighbors: Vec<usize>,
}

impl SparseGraph {
    /// Builds the graph from undirected edges. Duplicates are merged; self
    /// loops and out-of-range endpoints are rejected.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in edges {
            if u >= n || v >= n {
                return Err(Error::InvalidParameter(format!("edge ({u}, {v}) out of range for n = {n}")));
            }
            if u == v {
                return Err(Error::InvalidParameter(format!("self loop at vertex {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut offsets = Vec::with_capacity(n + 1);
        let mut neighbors = Vec::new();
        offsets.push(0);
        for mut row in adjacency {
            row.sort_unstable();
            row.dedup();
            neighbors.extend_from_slice(&row);
            offsets.push(neighbors.len());
        }
        Ok(Self { n, offsets, neighbors })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.offsets[i + 1] - self.offsets[i]
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n).map(|i| self.degree(i)).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len() / 2
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.neighbors(u).binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in row order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| self.neighbors(u).iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    pub fn first_isolated(&self) -> Option<usize> {
        (0..self.n).find(|&i| self.degree(i) == 0)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut w = Array2::zeros((self.n, self.n));
        for i in 0..self.n {
            for &j in self.neighbors(i) {
                w[[i, j]] = 1.0;
            }
        }
        w
    }

    /// Realized sparsity: minimum degree over `n`. Fallback for graphs with
    /// no population matrix.
    pub fn realized_tau(&self) -> Result<SparsityStats> {
        if let Some(i) = self.first_isolated() {
            return Err(Error::IsolatedVertex(i));
        }
        let min = self.degrees().into_iter().min().unwrap_or(0);
        Ok(SparsityStats { tau: min as f64 / self.n as f64 })
    }
}

/// `L = D^{-1/2} W D^{-1/2}` backed by the sparse adjacency.
#[derive(Debug, Clone)]
pub struct NormalizedLaplacian {
    graph: SparseGraph,
    inv_sqrt_degrees: Vec<f64>,
    dense_limit: usize,
}

/// Builds the operator form of the normalized Laplacian with the default dense limit.
pub fn laplacian(graph: SparseGraph) -> Result<NormalizedLaplacian> {
    NormalizedLaplacian::new(graph, DEFAULT_DENSE_LIMIT)
}

impl NormalizedLaplacian {
    pub fn new(graph: SparseGraph, dense_limit: usize) -> Result<Self> {
        if let Some(i) = graph.first_isolated() {
            return Err(Error::IsolatedVertex(i));
        }
        let inv_sqrt_degrees = graph.degrees().into_iter().map(|d| 1.0 / (d as f64).sqrt()).collect();
        Ok(Self { graph, inv_sqrt_degrees, dense_limit })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn graph(&self) -> &SparseGraph {
        &self.graph
    }

    pub fn inv_sqrt_degrees(&self) -> &[f64] {
        &self.inv_sqrt_degrees
    }

    pub fn dense_limit(&self) -> usize {
        self.dense_limit
    }

    pub fn matvec(&self, y: &[f64]) -> Result<Vec<f64>> {
        let n = self.n();
        if y.len() != n {
            return Err(Error::DimensionMismatch(format!("vector of length {} for n = {n}", y.len())));
        }
        let s = &self.inv_sqrt_degrees;
        Ok((0..n)
            .map(|i| {
                let acc: f64 = self.graph.neighbors(i).iter().map(|&j| s[j] * y[j]).sum();
                s[i] * acc
            })
            .collect())
    }

    /// `out = L · input` for an `n × d` row-major panel. Rows are independent,
    /// so the result does not depend on thread scheduling.
    pub fn apply_panel(&self, input: &[f64], out: &mut [f64], d: usize) {
        let n = self.n();
        debug_assert_eq!(input.len(), n * d);
        debug_assert_eq!(out.len(), n * d);
        let s = &self.inv_sqrt_degrees;
        out.par_chunks_mut(d.max(1)).enumerate().for_each(|(i, row)| {
            row.iter_mut().for_each(|x| *x = 0.0);
            for &j in self.graph.neighbors(i) {
                let w = s[j];
                let src = &input[j * d..(j + 1) * d];
                for (o, &x) in row.iter_mut().zip(src) {
                    *o += w * x;
                }
            }
            let si = s[i];
            row.iter_mut().for_each(|x| *x *= si);
        });
    }

    /// `L · M` for an `n × d` matrix.
    pub fn apply(&self, m: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        let (rows, d) = m.dim();
        if rows != self.n() {
            return Err(Error::DimensionMismatch(format!("matrix has {rows} rows for n = {}", self.n())));
        }
        let input: Vec<f64> = m.iter().copied().collect();
        let mut out = vec![0.0; input.len()];
        self.apply_panel(&input, &mut out, d);
        Ok(Array2::from_shape_vec((rows, d), out).expect("shape preserved"))
    }

    /// Dense `L`; refused above the dense limit.
    pub fn to_dense(&self) -> Result<Array2<f64>> {
        let n = self.n();
        if n > self.dense_limit {
            return Err(Error::OverDenseLimit { n, limit: self.dense_limit });
        }
        let s = &self.inv_sqrt_degrees;
        let mut l = Array2::zeros((n, n));
        for i in 0..n {
            for &j in self.graph.neighbors(i) {
                l[[i, j]] = s[i] * s[j];
            }
        }
        Ok(l)
    }
}

/// Minimum expected degree divided by `n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityStats {
    pub tau: f64,
}

pub fn tau(population: &PopulationAdjacency) -> Result<SparsityStats> {
    let sums = population.row_sums();
    let mut min = f64::INFINITY;
    for (i, &s) in sums.iter().enumerate() {
        if s <= 0.0 {
            return Err(Error::ZeroExpectedDegree(i));
        }
        min = min.min(s);
    }
    Ok(SparsityStats { tau: min / population.n() as f64 })
}

/// Dense normalized Laplacian of a population matrix,
/// `𝒟^{-1/2} 𝒲 𝒟^{-1/2}`.
pub fn population_laplacian(population: &PopulationAdjacency) -> Result<Array2<f64>> {
    let sums = population.row_sums();
    if let Some(i) = sums.iter().position(|&s| s <= 0.0) {
        return Err(Error::ZeroExpectedDegree(i));
    }
    let s: Vec<f64> = sums.iter().map(|x| 1.0 / x.sqrt()).collect();
    let w = population.matrix();
    Ok(Array2::from_shape_fn(w.dim(), |(i, j)| s[i] * w[[i, j]] * s[j]))
}

/// Writes `# n=<n> k=<k>` followed by one `u v` line per edge (`u < v`).
pub fn write_edge_list<W: Write>(graph: &SparseGraph, k: usize, mut out: W) -> Result<()> {
    writeln!(out, "# n={} k={}", graph.n(), k)?;
    for (u, v) in graph.edges() {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}

/// Reads an edge list. Lines starting with `#` are skipped; `n` is one past
/// the largest vertex index seen.
pub fn read_edge_list<R: BufRead>(input: R) -> Result<SparseGraph> {
    let mut edges = Vec::new();
    let mut n = 0usize;
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.ok_or_else(|| Error::Parse { line: lineno + 1, msg: "expected two vertex ids".into() })?
                .parse::<usize>()
                .map_err(|e| Error::Parse { line: lineno + 1, msg: e.to_string() })
        };
        let u = parse(parts.next())?;
        let v = parse(parts.next())?;
        if parts.next().is_some() {
            return Err(Error::Parse { line: lineno + 1, msg: "trailing tokens".into() });
        }
        n = n.max(u + 1).max(v + 1);
        edges.push((u, v));
    }
    SparseGraph::from_edges(n, &edges)
}
