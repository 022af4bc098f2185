mod common;

use ndarray::Array2;

use scgf::eigen::decompose;
use scgf::embed::{
    choose_dimension, draw_signals, exact_embed, norm_bounds, norm_bounds_check, population_embed, EmbeddingKind,
    EmbeddingMatrix, FilterTag, Provenance,
};
use scgf::filter::{design, fast_filter, filter_error, FilterError};
use scgf::metrics::{frobenius_sq, procrustes};
use scgf::sbm::{BlockMatrix, Membership, SbmModel};

use common::{median, population_leading, row_dist, sample, sample_leading, simplified};

fn unequal_model() -> SbmModel {
    let mut labels = vec![0; 50];
    labels.extend(vec![1; 80]);
    labels.extend(vec![2; 110]);
    let b = ndarray::array![[0.5, 0.05, 0.1], [0.05, 0.4, 0.08], [0.1, 0.08, 0.45]];
    SbmModel::new(Membership::new(labels, 3).unwrap(), BlockMatrix::new(b).unwrap()).unwrap()
}

fn population_embedding(model: &SbmModel, seed: u64, d: usize) -> (EmbeddingMatrix, EmbeddingMatrix) {
    let k = model.membership.k();
    let l = sample(model, seed);
    let sys = decompose(&l).unwrap();
    let lead = scgf::eigen::leading(&sys, k).unwrap();
    let pop = population_leading(model);
    let o = procrustes(lead.x.view(), pop.x.view()).unwrap().o;
    let signals = draw_signals(l.n(), d, seed);
    let chi_r = population_embed(&pop, &lead, o.view(), &signals).unwrap();
    let x_r = exact_embed(&sys, k, &signals).unwrap();
    (chi_r, x_r)
}

#[test]
fn population_embedding_is_block_constant() {
    for (model, seed) in [(simplified(4, 64, 0.3, 0.1), 1), (simplified(2, 100, 0.5, 0.2), 2), (unequal_model(), 3)] {
        let (chi_r, _) = population_embedding(&model, seed, 20);
        let labels = model.membership.labels();
        let mut rep = vec![None; model.membership.k()];
        for (i, &g) in labels.iter().enumerate() {
            let j = *rep[g].get_or_insert(i);
            assert!(row_dist(chi_r.rows.row(i), chi_r.rows.row(j)) < 1e-8, "row {i} vs {j}");
        }
    }
}

#[test]
fn compressed_population_rows_stay_separated() {
    let (eps1, beta) = (0.5, 1.0);
    let model = simplified(3, 40, 0.4, 0.1);
    let n = model.n();
    let d = choose_dimension(n, 3, eps1, beta).unwrap().d;
    let threshold = (1.0 - eps1) * (2.0 / model.membership.largest_block() as f64).sqrt();
    let mut good = 0;
    for seed in 0..100 {
        let (chi_r, _) = population_embedding(&model, seed, d);
        let reps = [0, 40, 80];
        let ok = (0..3)
            .all(|a| ((a + 1)..3).all(|b| row_dist(chi_r.rows.row(reps[a]), chi_r.rows.row(reps[b])) >= threshold));
        good += ok as usize;
    }
    let need = ((1.0 - (n as f64).powf(-beta)) * 100.0).ceil() as usize;
    assert!(good >= need, "{good}/100 trials separated, need {need}");
}

#[test]
fn random_projection_preserves_embedding_distances() {
    let (eps1, beta) = (0.5, 1.0);
    let model = simplified(2, 64, 0.4, 0.1);
    let n = model.n();
    let d = choose_dimension(n, 2, eps1, beta).unwrap().d;
    let trials = 20;
    let mut good = 0;
    for seed in 0..trials {
        let l = sample(&model, seed);
        let sys = decompose(&l).unwrap();
        let lead = scgf::eigen::leading(&sys, 2).unwrap();
        let projector: Array2<f64> = lead.x.dot(&lead.x.t());
        let x_r = exact_embed(&sys, 2, &draw_signals(n, d, seed)).unwrap();
        let mut all = true;
        for i in 0..n {
            for j in (i + 1)..n {
                let full = row_dist(projector.row(i), projector.row(j)).powi(2);
                if full < 1e-24 {
                    continue;
                }
                let compressed = row_dist(x_r.rows.row(i), x_r.rows.row(j)).powi(2);
                all &= (1.0 - eps1) * full <= compressed && compressed <= (1.0 + eps1) * full;
            }
        }
        good += all as usize;
    }
    let need = ((1.0 - (n as f64).powf(-beta)) * trials as f64).ceil() as usize;
    assert!(good >= need, "{good}/{trials} trials preserved every distance");
}

#[test]
fn sample_to_population_distance_shrinks_with_n() {
    let medians: Vec<f64> = [64, 128, 256]
        .iter()
        .map(|&s| {
            let model = simplified(4, s, 0.3, 0.1);
            let n = model.n();
            let d = choose_dimension(n, 4, 0.5, 1.0).unwrap().d;
            let pop = population_leading(&model);
            let dists: Vec<f64> = (0..10)
                .map(|seed| {
                    let l = sample(&model, seed);
                    let sys = decompose(&l).unwrap();
                    let lead = scgf::eigen::leading(&sys, 4).unwrap();
                    let o = procrustes(lead.x.view(), pop.x.view()).unwrap().o;
                    let signals = draw_signals(n, d, seed);
                    let chi_r = population_embed(&pop, &lead, o.view(), &signals).unwrap();
                    let x_r = exact_embed(&sys, 4, &signals).unwrap();
                    frobenius_sq(x_r.rows.view(), chi_r.rows.view())
                })
                .collect();
            median(&dists)
        })
        .collect();
    assert!(medians.windows(2).all(|w| w[1] <= w[0]), "{medians:?}");
}

#[test]
fn ideal_filter_energy_within_bounds() {
    let model = simplified(4, 64, 0.3, 0.1);
    let (lower, upper) = norm_bounds(256, 4, FilterError { e: 0.0 }, 0.5);
    assert_eq!((lower, upper), (2.0, 6.0));
    for seed in 0..50 {
        let l = sample(&model, seed);
        let sys = decompose(&l).unwrap();
        let x_r = exact_embed(&sys, 4, &draw_signals(l.n(), 50, seed)).unwrap();
        assert!(norm_bounds_check(&x_r, 4, FilterError { e: 0.0 }, 0.5), "seed {seed}: {}", x_r.squared_norm());
    }
}

#[test]
fn coarse_filter_energy_violations_are_rare() {
    let model = simplified(4, 128, 0.3, 0.1);
    let (n, d, eps2, trials) = (512usize, 50usize, 0.3f64, 50);
    let mut violations = 0;
    for seed in 0..trials {
        let l = sample(&model, seed);
        let lead = sample_leading(&l, 4);
        let spectrum = scgf::eigen::spectrum(&l).unwrap();
        let lk = lead.lambda_k.abs();
        let cut = 0.5 * (lk + lead.lambda_next.unwrap().abs());
        let filter = design(cut, 5).unwrap();
        let e = filter_error(&filter, &spectrum, lk).unwrap();
        let rows = fast_filter(&l, &filter, draw_signals(n, d, seed).view()).unwrap();
        let emb = EmbeddingMatrix::new(
            rows,
            EmbeddingKind::Approximate,
            Provenance { seed, filter: FilterTag::Order(5), k: 4, d },
        )
        .unwrap();
        violations += !norm_bounds_check(&emb, 4, e, eps2) as usize;
    }
    let bound = (-(n as f64) * d as f64 * (eps2 * eps2 - eps2.powi(3)) / 4.0).exp();
    assert!(violations as f64 / trials as f64 <= bound + 0.02, "{violations}/{trials}");
}
