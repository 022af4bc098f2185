use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scgf::clustering::KMeansParams;
use scgf::eigen;
use scgf::embed::{choose_dimension, DEFAULT_BISECT_ITERS};
use scgf::filter::design;
use scgf::graph::{write_edge_list, DEFAULT_DENSE_LIMIT};
use scgf::harness::{
    records_to_csv, run_compressive_detailed, run_exact, summary_to_csv, sweep_n, sweep_poly, trial_laplacian,
    write_membership, Algorithm, DimChoice, ModelSource, TrialConfig, TrialRecord,
};
use scgf::sbm::SimplifiedSbm;
use scgf::{Error, Result};

#[derive(Parser)]
#[command(name = "scgf", version, about = "Spectral clustering of block-model graphs by polynomial graph filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a graph from the four-parameter block model and write its edge list.
    Generate {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the planted block of every vertex, one per line.
        #[arg(long)]
        membership_out: Option<PathBuf>,
    },
    /// Exact spectral clustering (dense eigendecomposition).
    ClusterExact(ClusterArgs),
    /// Eigen-free clustering by filtering random signals.
    ClusterCompressive(ClusterArgs),
    /// Misclustering rate over graph sizes and polynomial orders.
    SweepN {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 4)]
        k: usize,
        #[arg(long, default_value_t = 0.3)]
        q: f64,
        #[arg(long, default_value_t = 0.1)]
        r: f64,
        #[arg(long, value_delimiter = ',', default_value = "256,512,1024,2048")]
        n_list: Vec<usize>,
        #[arg(long, value_delimiter = ',', default_value = "5,25,125")]
        p_list: Vec<usize>,
    },
    /// Misclustering rate and filter error over a range of polynomial orders.
    SweepPoly {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value_t = 5)]
        p_min: usize,
        #[arg(long, default_value_t = 25)]
        p_max: usize,
        /// Where to write the per-order summary (p,e,e2,mean_rate).
        #[arg(long)]
        summary_out: Option<PathBuf>,
    },
    /// Eigenvalues of the normalized Laplacian of one graph, one per line.
    Spectrum {
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_DENSE_LIMIT)]
        dense_limit: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct ModelArgs {
    /// Number of blocks.
    #[arg(long, default_value_t = 4)]
    k: usize,
    /// Vertices per block.
    #[arg(long, default_value_t = 256)]
    s: usize,
    /// Extra within-block edge probability.
    #[arg(long, default_value_t = 0.3)]
    q: f64,
    /// Between-block edge probability.
    #[arg(long, default_value_t = 0.1)]
    r: f64,
}

impl ModelArgs {
    fn model(&self) -> Result<SimplifiedSbm> {
        SimplifiedSbm::new(self.k, self.s, self.q, self.r)
    }
}

#[derive(Args, Clone)]
struct SourceArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Read the graph from an edge list instead of sampling it.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Planted blocks for an edge-list graph, one label per line.
    #[arg(long, requires = "edges")]
    truth: Option<PathBuf>,
}

impl SourceArgs {
    fn source(&self) -> Result<ModelSource> {
        Ok(match &self.edges {
            Some(path) => ModelSource::EdgeList { path: path.clone(), k: self.model.k, truth: self.truth.clone() },
            None => ModelSource::Simplified(self.model.model()?),
        })
    }
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, default_value_t = 125)]
    poly_order: usize,
    /// Fixed filter cut in (0, 1]; skips the lambda_k search.
    #[arg(long)]
    lambda_cut: Option<f64>,
    /// Number of random signals; default max(4k, ceil(4 ln n)).
    #[arg(long, conflicts_with = "jl_dim")]
    embed_dim: Option<usize>,
    /// Use the Johnson-Lindenstrauss dimension for --epsilon1 and --beta.
    #[arg(long)]
    jl_dim: bool,
    #[arg(long, default_value_t = 0.5)]
    epsilon1: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
    #[arg(long, default_value_t = 0.5)]
    epsilon2: f64,
    #[arg(long, default_value_t = DEFAULT_BISECT_ITERS)]
    bisect_iters: usize,
    #[arg(long, default_value_t = 10)]
    kmeans_restarts: usize,
    #[arg(long, default_value_t = 300)]
    kmeans_max_iter: usize,
    /// Seed range `a..b` (half-open) or `a..=b`.
    #[arg(long, conflicts_with = "trials")]
    seeds: Option<String>,
    /// Shorthand for seeds 0..t.
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long, default_value_t = DEFAULT_DENSE_LIMIT)]
    dense_limit: usize,
    /// Add the spectral filter error and distance-based rate (dense).
    #[arg(long)]
    with_oracle_metrics: bool,
    /// Fill the wall_time_ms column.
    #[arg(long)]
    timing: bool,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[command(flatten)]
    run: RunArgs,
    /// Estimated membership of the first seed, one label per line.
    #[arg(long)]
    membership_out: Option<PathBuf>,
    /// Laplacian eigenvalues of the first seed's graph, one per line.
    #[arg(long)]
    dump_spectrum: Option<PathBuf>,
    /// Filter coefficients (ell,c,g) used for the first seed.
    #[arg(long)]
    dump_filter: Option<PathBuf>,
}

fn parse_seeds(range: &str) -> Result<Vec<u64>> {
    let bad = || Error::InvalidParameter(format!("seed range {range:?}: expected a..b or a..=b"));
    let (a, b, inclusive) = if let Some((a, b)) = range.split_once("..=") {
        (a, b, true)
    } else if let Some((a, b)) = range.split_once("..") {
        (a, b, false)
    } else {
        let s: u64 = range.trim().parse().map_err(|_| bad())?;
        return Ok(vec![s]);
    };
    let a: u64 = a.trim().parse().map_err(|_| bad())?;
    let b: u64 = b.trim().parse().map_err(|_| bad())?;
    let seeds: Vec<u64> = if inclusive { (a..=b).collect() } else { (a..b).collect() };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn build_config(source: ModelSource, algorithm: Algorithm, run: &RunArgs) -> Result<TrialConfig> {
    let mut cfg = TrialConfig::new(source, algorithm);
    cfg.poly_order = run.poly_order;
    cfg.lambda_cut = run.lambda_cut;
    cfg.dim = match (run.embed_dim, run.jl_dim) {
        (Some(d), _) => DimChoice::Explicit(d),
        (None, true) => DimChoice::JohnsonLindenstrauss,
        (None, false) => DimChoice::Default,
    };
    cfg.epsilon1 = run.epsilon1;
    cfg.beta = run.beta;
    cfg.epsilon2 = run.epsilon2;
    cfg.bisect_iters = run.bisect_iters;
    cfg.kmeans =
        KMeansParams { restarts: run.kmeans_restarts, max_iter: run.kmeans_max_iter, ..KMeansParams::default() };
    cfg.seeds = match (&run.seeds, run.trials) {
        (Some(s), _) => parse_seeds(s)?,
        (None, Some(t)) if t > 0 => (0..t).collect(),
        (None, Some(_)) => return Err(Error::InvalidParameter("--trials must be positive".into())),
        (None, None) => vec![0],
    };
    cfg.dense_limit = run.dense_limit;
    cfg.with_oracle_metrics = run.with_oracle_metrics;
    cfg.record_timing = run.timing;
    cfg.validate()?;
    Ok(cfg)
}

fn writer(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    let mut out = writer(path)?;
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn write_spectrum(path: Option<&Path>, values: &[f64]) -> Result<()> {
    let mut out = writer(path)?;
    for v in values {
        writeln!(out, "{v}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reference dimension from the Johnson-Lindenstrauss rule, on stderr.
fn note_jl(cfg: &TrialConfig, n: usize) {
    if let Ok(jl) = choose_dimension(n, cfg.model.k(), cfg.epsilon1, cfg.beta) {
        eprintln!(
            "# n={n} d={} jl_d={} (epsilon1={}, beta={})",
            cfg.embed_dim(n).unwrap_or(0),
            jl.d,
            jl.epsilon1,
            jl.beta
        );
    }
}

fn cluster(args: &ClusterArgs, algorithm: Algorithm) -> Result<()> {
    let cfg = build_config(args.source.source()?, algorithm, &args.run)?;
    let first = cfg.seeds[0];
    let mut records: Vec<TrialRecord> = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        match algorithm {
            Algorithm::Exact => records.push(run_exact(&cfg, seed)?),
            Algorithm::Compressive => {
                let outcome = run_compressive_detailed(&cfg, seed, None)?;
                if seed == first {
                    if let Some(path) = &args.membership_out {
                        write_membership(&outcome.membership, BufWriter::new(File::create(path)?))?;
                    }
                    if let Some(path) = &args.dump_filter {
                        let filter = design(outcome.record.lambda_hat, cfg.poly_order)?;
                        filter.write_coefficients_csv(BufWriter::new(File::create(path)?))?;
                    }
                }
                records.push(outcome.record);
            }
        }
    }
    if algorithm == Algorithm::Exact && (args.membership_out.is_some() || args.dump_filter.is_some()) {
        eprintln!("# --membership-out and --dump-filter apply to cluster-compressive only");
    }
    if let Some(path) = &args.dump_spectrum {
        let l = trial_laplacian(&cfg, first)?;
        write_spectrum(Some(path), &eigen::spectrum(&l)?)?;
    }
    if algorithm == Algorithm::Compressive {
        if let Some(rec) = records.first() {
            note_jl(&cfg, rec.n);
        }
    }
    emit(args.run.out.as_deref(), &records_to_csv(&records))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { model, seed, out, membership_out } => {
            // Same sampling and resampling as the clustering commands.
            let sbm = model.model()?;
            let cfg = TrialConfig::new(ModelSource::Simplified(sbm), Algorithm::Compressive);
            let l = trial_laplacian(&cfg, seed)?;
            let mut w = writer(out.as_deref())?;
            write_edge_list(l.graph(), sbm.k, &mut w)?;
            w.flush()?;
            if let Some(path) = membership_out {
                write_membership(&sbm.membership(), BufWriter::new(File::create(path)?))?;
            }
            Ok(())
        }
        Command::ClusterExact(args) => cluster(&args, Algorithm::Exact),
        Command::ClusterCompressive(args) => cluster(&args, Algorithm::Compressive),
        Command::SweepN { run, k, q, r, n_list, p_list } => {
            let first = *n_list.first().ok_or_else(|| Error::InvalidParameter("empty --n-list".into()))?;
            if first % k != 0 {
                return Err(Error::InvalidParameter(format!("n = {first} is not a multiple of k = {k}")));
            }
            let base = SimplifiedSbm::new(k, first / k, q, r)?;
            let cfg = build_config(ModelSource::Simplified(base), Algorithm::Compressive, &run)?;
            for &n in &n_list {
                note_jl(&cfg, n);
            }
            let records = sweep_n(&cfg, &n_list, &p_list)?;
            emit(run.out.as_deref(), &records_to_csv(&records))
        }
        Command::SweepPoly { run, model, p_min, p_max, summary_out } => {
            if p_min < 1 || p_max < p_min {
                return Err(Error::InvalidParameter(format!("bad order range {p_min}..={p_max}")));
            }
            let cfg = build_config(ModelSource::Simplified(model.model()?), Algorithm::Compressive, &run)?;
            let orders: Vec<usize> = (p_min..=p_max).collect();
            let (records, summary) = sweep_poly(&cfg, &orders)?;
            emit(run.out.as_deref(), &records_to_csv(&records))?;
            match summary_out {
                Some(path) => emit(Some(&path), &summary_to_csv(&summary)),
                None => {
                    eprint!("{}", summary_to_csv(&summary));
                    Ok(())
                }
            }
        }
        Command::Spectrum { source, seed, dense_limit, out } => {
            let mut cfg = TrialConfig::new(source.source()?, Algorithm::Exact);
            cfg.dense_limit = dense_limit;
            let l = trial_laplacian(&cfg, seed)?;
            write_spectrum(out.as_deref(), &eigen::spectrum(&l)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
