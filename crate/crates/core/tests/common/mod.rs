#![allow(dead_code)]

use ndarray::{Array2, ArrayView1};

use scgf::eigen::{decompose, decompose_dense, leading, LeadingEigenvectors};
use scgf::graph::{population_laplacian, NormalizedLaplacian, DEFAULT_DENSE_LIMIT};
use scgf::harness::{trial_laplacian, Algorithm, ModelSource, TrialConfig};
use scgf::sbm::{SbmModel, SimplifiedSbm};

/// Sampled Laplacian with the harness's resampling rule.
pub fn sample(model: &SbmModel, seed: u64) -> NormalizedLaplacian {
    let cfg = TrialConfig::new(ModelSource::Block(model.clone()), Algorithm::Compressive);
    trial_laplacian(&cfg, seed).unwrap()
}

pub fn simplified(k: usize, s: usize, q: f64, r: f64) -> SbmModel {
    SimplifiedSbm::new(k, s, q, r).unwrap().model().unwrap()
}

pub fn population_leading(model: &SbmModel) -> LeadingEigenvectors {
    let k = model.membership.k();
    let pop = population_laplacian(&model.population()).unwrap();
    leading(&decompose_dense(pop.view(), DEFAULT_DENSE_LIMIT).unwrap(), k).unwrap()
}

pub fn sample_leading(l: &NormalizedLaplacian, k: usize) -> LeadingEigenvectors {
    leading(&decompose(l).unwrap(), k).unwrap()
}

pub fn row_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn median(v: &[f64]) -> f64 {
    scgf::harness::median(v)
}
