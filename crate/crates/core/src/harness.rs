//! Trial orchestration: one compressive or exact clustering run per seed,
//! and the sweeps over graph size and polynomial order, with CSV output.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::PathBuf;
use std::time::Instant;

use ndarray::Array2;
use rayon::prelude::*;

use crate::clustering::{kmeans, kmeans_certified, to_membership, KMeansParams};
use crate::eigen::{self, decompose, eigen_free, leading};
use crate::embed::{
    choose_dimension, draw_signals, estimate_lambda_k_with, exact_embed, population_embed, DEFAULT_BISECT_ITERS,
};
use crate::error::{Error, Result};
use crate::filter::{design, fast_filter, filter_error, grid_error, FilterError};
use crate::graph::{population_laplacian, read_edge_list, NormalizedLaplacian, DEFAULT_DENSE_LIMIT};
use crate::metrics::{miscluster_distance, miscluster_permutation, misclustering_bound, procrustes};
use crate::rng;
use crate::sbm::{Membership, SbmModel, SimplifiedSbm};

/// Resample attempts allowed when a sampled graph has an isolated vertex.
pub const MAX_RESAMPLES: usize = 5;

pub const CSV_HEADER: &str = "seed,n,k,q,r,p,d,lambda_hat,e,rate_perm,rate_dist,eq9_bound,wall_time_ms,resamples";

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSource {
    Simplified(SimplifiedSbm),
    /// Any block model (unequal blocks, general `B`).
    Block(SbmModel),
    EdgeList {
        path: PathBuf,
        k: usize,
        truth: Option<PathBuf>,
    },
}

impl ModelSource {
    pub fn k(&self) -> usize {
        match self {
            ModelSource::Simplified(m) => m.k,
            ModelSource::Block(m) => m.membership.k(),
            ModelSource::EdgeList { k, .. } => *k,
        }
    }

    /// The generating model, when the graph is sampled rather than loaded.
    pub fn planted_model(&self) -> Result<Option<SbmModel>> {
        Ok(match self {
            ModelSource::Simplified(m) => Some(m.model()?),
            ModelSource::Block(m) => Some(m.clone()),
            ModelSource::EdgeList { .. } => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Exact,
    Compressive,
}

/// How the number of random signals is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DimChoice {
    /// `max(4k, ⌈4 ln n⌉)`
    Default,
    Explicit(usize),
    /// Smallest `d` satisfying the Johnson–Lindenstrauss condition for `(ε₁, β)`.
    JohnsonLindenstrauss,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialConfig {
    pub model: ModelSource,
    pub algorithm: Algorithm,
    pub poly_order: usize,
    /// Fixed filter cut; skips the `λ_k` search when set.
    pub lambda_cut: Option<f64>,
    pub dim: DimChoice,
    pub epsilon1: f64,
    pub beta: f64,
    pub epsilon2: f64,
    pub seeds: Vec<u64>,
    pub kmeans: KMeansParams,
    pub bisect_iters: usize,
    pub dense_limit: usize,
    /// Adds the spectral filter error and the distance-based rate (dense oracle).
    pub with_oracle_metrics: bool,
    /// Fills `wall_time_ms`; off by default so reruns are byte-identical.
    pub record_timing: bool,
}

impl TrialConfig {
    pub fn new(model: ModelSource, algorithm: Algorithm) -> Self {
        Self {
            model,
            algorithm,
            poly_order: 125,
            lambda_cut: None,
            dim: DimChoice::Default,
            epsilon1: 0.5,
            beta: 1.0,
            epsilon2: 0.5,
            seeds: (0..10).collect(),
            kmeans: KMeansParams::default(),
            bisect_iters: DEFAULT_BISECT_ITERS,
            dense_limit: DEFAULT_DENSE_LIMIT,
            with_oracle_metrics: false,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.algorithm == Algorithm::Compressive && self.poly_order < 1 {
            return Err(Error::InvalidParameter("compressive clustering needs a polynomial order >= 1".into()));
        }
        let n = match &self.model {
            ModelSource::Simplified(m) => Some(m.n()),
            ModelSource::Block(m) => Some(m.n()),
            ModelSource::EdgeList { .. } => None,
        };
        if let Some(n) = n {
            if self.algorithm == Algorithm::Exact && n > self.dense_limit {
                return Err(Error::OverDenseLimit { n, limit: self.dense_limit });
            }
        }
        if !(self.epsilon1 > 0.0 && self.epsilon1 <= 1.0) {
            return Err(Error::InvalidParameter(format!("epsilon1 = {} outside (0, 1]", self.epsilon1)));
        }
        if let Some(cut) = self.lambda_cut {
            if !(cut > 0.0 && cut <= 1.0) {
                return Err(Error::InvalidParameter(format!("lambda cut {cut} outside (0, 1]")));
            }
        }
        Ok(())
    }

    pub fn embed_dim(&self, n: usize) -> Result<usize> {
        let k = self.model.k();
        match self.dim {
            DimChoice::Default => Ok(default_dim(n, k)),
            DimChoice::Explicit(d) if d >= 1 => Ok(d),
            DimChoice::Explicit(_) => Err(Error::InvalidParameter("embedding dimension must be >= 1".into())),
            DimChoice::JohnsonLindenstrauss => Ok(choose_dimension(n, k, self.epsilon1, self.beta)?.d),
        }
    }
}

pub fn default_dim(n: usize, k: usize) -> usize {
    (4 * k).max((4.0 * (n as f64).ln()).ceil() as usize)
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub n: usize,
    pub k: usize,
    pub q: Option<f64>,
    pub r: Option<f64>,
    pub p: Option<usize>,
    pub d: usize,
    pub lambda_hat: f64,
    pub e: Option<f64>,
    /// Whether `e` was measured on the spectrum (vs. the uniform grid).
    pub e_spectral: bool,
    pub rate_perm: Option<f64>,
    pub rate_dist: Option<f64>,
    pub bound: Option<f64>,
    pub wall_time_ms: Option<f64>,
    pub resamples: usize,
}

fn opt<T: std::fmt::Display>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

impl TrialRecord {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.seed,
            self.n,
            self.k,
            opt(&self.q),
            opt(&self.r),
            opt(&self.p),
            self.d,
            self.lambda_hat,
            opt(&self.e),
            opt(&self.rate_perm),
            opt(&self.rate_dist),
            opt(&self.bound),
            opt(&self.wall_time_ms),
            self.resamples
        )
    }
}

pub fn records_to_csv(records: &[TrialRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for rec in records {
        out.push_str(&rec.to_csv_row());
        out.push('\n');
    }
    out
}

/// Graph, Laplacian and planted partition for one trial.
struct TrialGraph {
    laplacian: NormalizedLaplacian,
    truth: Option<Membership>,
    model: Option<SbmModel>,
    resamples: usize,
}

fn load_graph(config: &TrialConfig, seed: u64) -> Result<TrialGraph> {
    if let Some(model) = config.model.planted_model()? {
        return sample_graph(config, seed, model);
    }
    let ModelSource::EdgeList { path, k, truth } = &config.model else {
        unreachable!("sampled sources have a planted model")
    };
    let graph = read_edge_list(BufReader::new(File::open(path)?))?;
    let truth = match truth {
        Some(p) => Some(read_membership(BufReader::new(File::open(p)?), *k)?),
        None => None,
    };
    if let Some(t) = &truth {
        if t.n() != graph.n() {
            return Err(Error::DimensionMismatch(format!(
                "membership file has {} vertices, graph has {}",
                t.n(),
                graph.n()
            )));
        }
    }
    Ok(TrialGraph { laplacian: NormalizedLaplacian::new(graph, config.dense_limit)?, truth, model: None, resamples: 0 })
}

/// Samples until no vertex is isolated, at most [`MAX_RESAMPLES`] extra times.
fn sample_graph(config: &TrialConfig, seed: u64, model: SbmModel) -> Result<TrialGraph> {
    let mut attempt = 0usize;
    loop {
        let mut stream = rng::derive(seed, rng::streams::graph_attempt(attempt as u64));
        match NormalizedLaplacian::new(model.sample_with(&mut stream), config.dense_limit) {
            Ok(laplacian) => {
                return Ok(TrialGraph {
                    laplacian,
                    truth: Some(model.membership.clone()),
                    model: Some(model),
                    resamples: attempt,
                })
            }
            Err(Error::IsolatedVertex(i)) if attempt >= MAX_RESAMPLES => return Err(Error::IsolatedVertex(i)),
            Err(Error::IsolatedVertex(_)) => attempt += 1,
            Err(e) => return Err(e),
        }
    }
}

/// Sampled (or loaded) Laplacian for `seed`, after any resampling.
pub fn trial_laplacian(config: &TrialConfig, seed: u64) -> Result<NormalizedLaplacian> {
    Ok(load_graph(config, seed)?.laplacian)
}

/// Reads one block label per line.
pub fn read_membership<R: std::io::BufRead>(input: R, k: usize) -> Result<Membership> {
    let mut labels = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        labels.push(t.parse::<usize>().map_err(|e| Error::Parse { line: lineno + 1, msg: e.to_string() })?);
    }
    Membership::new(labels, k)
}

pub fn write_membership<W: Write>(membership: &Membership, mut out: W) -> Result<()> {
    for &g in membership.labels() {
        writeln!(out, "{g}")?;
    }
    Ok(())
}

/// Output of one compressive run, including the embedding and membership.
#[derive(Debug, Clone)]
pub struct CompressiveOutcome {
    pub record: TrialRecord,
    pub membership: Membership,
    pub embedding: Array2<f64>,
}

/// Runs the eigen-free pipeline for one seed.
pub fn run_compressive(config: &TrialConfig, seed: u64) -> Result<TrialRecord> {
    Ok(run_compressive_detailed(config, seed, None)?.record)
}

/// [`run_compressive`] with an optional precomputed spectrum of the sampled
/// Laplacian; when supplied, `e` is measured on it.
pub fn run_compressive_detailed(
    config: &TrialConfig,
    seed: u64,
    spectrum: Option<&[f64]>,
) -> Result<CompressiveOutcome> {
    config.validate()?;
    let start = Instant::now();
    let tg = load_graph(config, seed)?;
    let l = &tg.laplacian;
    let n = l.n();
    let k = config.model.k();
    let p = config.poly_order;
    let d = config.embed_dim(n)?;

    let (lambda_hat, approx, membership) = eigen_free(|| -> Result<_> {
        let signals = draw_signals(n, d, seed);
        let lambda_hat = match config.lambda_cut {
            Some(cut) => cut,
            None => estimate_lambda_k_with(l, k, p, &signals, config.bisect_iters)?.lambda_hat,
        };
        let filter = design(lambda_hat.max(f64::MIN_POSITIVE), p)?;
        let approx = fast_filter(l, &filter, signals.view())?;
        let result = kmeans(approx.view(), k, seed, &config.kmeans)?;
        Ok((lambda_hat, approx, to_membership(&result)))
    })?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;

    let filter = design(lambda_hat.max(f64::MIN_POSITIVE), p)?;
    let rate_perm = match &tg.truth {
        Some(t) => Some(miscluster_permutation(&membership, t)?.rate),
        None => None,
    };

    let oracle_possible = n <= config.dense_limit;
    let owned_spectrum;
    let spectrum = match spectrum {
        Some(s) => Some(s),
        None if config.with_oracle_metrics && oracle_possible => {
            owned_spectrum = eigen::spectrum(l)?;
            Some(owned_spectrum.as_slice())
        }
        None => None,
    };
    let (e, e_spectral) = match spectrum {
        Some(s) => {
            let cut = s[k - 1].abs();
            (filter_error(&filter, s, cut)?, true)
        }
        None => (grid_error(&filter, lambda_hat), false),
    };

    let rate_dist = match (&tg.model, config.with_oracle_metrics && oracle_possible) {
        (Some(model), true) => Some(distance_rate(config, seed, l, model, &approx)?),
        _ => None,
    };

    let (q, r) = simplified_params(&config.model);
    Ok(CompressiveOutcome {
        record: TrialRecord {
            seed,
            n,
            k,
            q,
            r,
            p: Some(p),
            d,
            lambda_hat,
            e: Some(e.e),
            e_spectral,
            rate_perm,
            rate_dist,
            bound: Some(misclustering_bound(n, k, e)),
            wall_time_ms: config.record_timing.then_some(elapsed),
            resamples: tg.resamples,
        },
        membership,
        embedding: approx,
    })
}

fn simplified_params(model: &ModelSource) -> (Option<f64>, Option<f64>) {
    match model {
        ModelSource::Simplified(m) => (Some(m.q), Some(m.r)),
        ModelSource::Block(_) | ModelSource::EdgeList { .. } => (None, None),
    }
}

/// Distance-based misclustering rate of the compressive embedding against
/// the Procrustes-aligned population embedding.
fn distance_rate(
    config: &TrialConfig,
    seed: u64,
    l: &NormalizedLaplacian,
    model: &SbmModel,
    approx: &Array2<f64>,
) -> Result<f64> {
    let k = config.model.k();
    let n = l.n();
    let d = approx.ncols();
    let sample = leading(&decompose(l)?, k)?;
    let pop_lap = population_laplacian(&model.population())?;
    let population = leading(&eigen::decompose_dense(pop_lap.view(), config.dense_limit)?, k)?;
    let alignment = procrustes(sample.x.view(), population.x.view())?;
    let signals = draw_signals(n, d, seed);
    let pop_embed = population_embed(&population, &sample, alignment.o.view(), &signals)?;
    let (result, _certified) = kmeans_certified(approx.view(), k, seed, &config.kmeans, pop_embed.rows.view())?;
    let c = result.per_row_centroids();
    Ok(miscluster_distance(c.view(), pop_embed.rows.view(), model.membership.largest_block(), config.epsilon1)?.rate)
}

/// Exact spectral clustering for one seed.
pub fn run_exact(config: &TrialConfig, seed: u64) -> Result<TrialRecord> {
    config.validate()?;
    let start = Instant::now();
    let tg = load_graph(config, seed)?;
    let l = &tg.laplacian;
    let n = l.n();
    if n > config.dense_limit {
        return Err(Error::OverDenseLimit { n, limit: config.dense_limit });
    }
    let k = config.model.k();
    let eigsys = decompose(l)?;
    let lead = leading(&eigsys, k)?;
    let result = kmeans(lead.x.view(), k, seed, &config.kmeans)?;
    let membership = to_membership(&result);
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    let rate_perm = match &tg.truth {
        Some(t) => Some(miscluster_permutation(&membership, t)?.rate),
        None => None,
    };
    let rate_dist = match (&tg.model, config.with_oracle_metrics) {
        (Some(model), true) => {
            let d = config.embed_dim(n)?;
            let signals = draw_signals(n, d, seed);
            let exact = exact_embed(&eigsys, k, &signals)?;
            Some(distance_rate(config, seed, l, model, &exact.rows)?)
        }
        _ => None,
    };
    let (q, r) = simplified_params(&config.model);
    let zero = FilterError { e: 0.0 };
    Ok(TrialRecord {
        seed,
        n,
        k,
        q,
        r,
        p: None,
        d: k,
        lambda_hat: lead.lambda_k.abs(),
        e: Some(0.0),
        e_spectral: true,
        rate_perm,
        rate_dist,
        bound: Some(misclustering_bound(n, k, zero)),
        wall_time_ms: config.record_timing.then_some(elapsed),
        resamples: tg.resamples,
    })
}

/// Runs the configured algorithm for every seed, in seed order.
pub fn run_trials(config: &TrialConfig) -> Result<Vec<TrialRecord>> {
    config.validate()?;
    config
        .seeds
        .par_iter()
        .map(|&seed| match config.algorithm {
            Algorithm::Compressive => run_compressive(config, seed),
            Algorithm::Exact => run_exact(config, seed),
        })
        .collect()
}

fn with_size(base: &TrialConfig, n: usize) -> Result<TrialConfig> {
    let ModelSource::Simplified(m) = &base.model else {
        return Err(Error::InvalidParameter("sweeps need a four-parameter block model".into()));
    };
    if !n.is_multiple_of(m.k) {
        return Err(Error::InvalidParameter(format!("n = {n} is not a multiple of k = {}", m.k)));
    }
    let mut cfg = base.clone();
    cfg.model = ModelSource::Simplified(SimplifiedSbm::new(m.k, n / m.k, m.q, m.r)?);
    Ok(cfg)
}

/// Full factorial over `(n, p, seed)` of compressive runs, in that order.
pub fn sweep_n(base: &TrialConfig, n_list: &[usize], p_list: &[usize]) -> Result<Vec<TrialRecord>> {
    let mut jobs = Vec::new();
    for &n in n_list {
        let sized = with_size(base, n)?;
        for &p in p_list {
            let mut cfg = sized.clone();
            cfg.poly_order = p;
            cfg.algorithm = Algorithm::Compressive;
            cfg.validate()?;
            for &seed in &base.seeds {
                jobs.push((cfg.clone(), seed));
            }
        }
    }
    jobs.par_iter().map(|(cfg, seed)| run_compressive(cfg, *seed)).collect()
}

/// Per-order aggregate of [`sweep_poly`].
#[derive(Debug, Clone, PartialEq)]
pub struct PolySummary {
    pub p: usize,
    /// Mean filter error over seeds.
    pub e: f64,
    /// Mean squared filter error over seeds.
    pub e2: f64,
    pub mean_rate: f64,
}

pub const POLY_SUMMARY_HEADER: &str = "p,e,e2,mean_rate";

pub fn summary_to_csv(rows: &[PolySummary]) -> String {
    let mut out = String::from(POLY_SUMMARY_HEADER);
    out.push('\n');
    for row in rows {
        let _ = writeln!(out, "{},{},{},{}", row.p, row.e, row.e2, row.mean_rate);
    }
    out
}

/// Compressive runs for every order in `p_range` and every seed, with the
/// filter error measured on the sampled spectrum (computed once per seed)
/// when the graph fits under the dense limit.
pub fn sweep_poly(base: &TrialConfig, p_range: &[usize]) -> Result<(Vec<TrialRecord>, Vec<PolySummary>)> {
    let mut base = base.clone();
    base.algorithm = Algorithm::Compressive;
    base.validate()?;
    let spectra: Vec<Option<Vec<f64>>> = base
        .seeds
        .par_iter()
        .map(|&seed| -> Result<Option<Vec<f64>>> {
            let tg = load_graph(&base, seed)?;
            if tg.laplacian.n() <= base.dense_limit {
                Ok(Some(eigen::spectrum(&tg.laplacian)?))
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    let mut jobs = Vec::new();
    for &p in p_range {
        for (idx, &seed) in base.seeds.iter().enumerate() {
            jobs.push((p, idx, seed));
        }
    }
    let records: Vec<TrialRecord> = jobs
        .par_iter()
        .map(|&(p, idx, seed)| {
            let mut cfg = base.clone();
            cfg.poly_order = p;
            Ok(run_compressive_detailed(&cfg, seed, spectra[idx].as_deref())?.record)
        })
        .collect::<Result<_>>()?;
    let per_p = base.seeds.len().max(1);
    let summary = p_range
        .iter()
        .zip(records.chunks(per_p))
        .map(|(&p, recs)| {
            let m = recs.len() as f64;
            let es: Vec<f64> = recs.iter().map(|r| r.e.unwrap_or(f64::NAN)).collect();
            PolySummary {
                p,
                e: es.iter().sum::<f64>() / m,
                e2: es.iter().map(|e| e * e).sum::<f64>() / m,
                mean_rate: recs.iter().map(|r| r.rate_perm.unwrap_or(f64::NAN)).sum::<f64>() / m,
            }
        })
        .collect();
    Ok((records, summary))
}

/// Median of a slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let m = v.len();
    if m == 0 {
        return f64::NAN;
    }
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}

/// Pearson correlation.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}
