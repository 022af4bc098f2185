use ndarray::Array2;

use scgf::eigen::decompose;
use scgf::embed::draw_signals;
use scgf::filter::{design, fast_filter, fast_filter_counted, filter_error, PolyFilter};
use scgf::graph::{laplacian, NormalizedLaplacian};
use scgf::sbm::SimplifiedSbm;

fn sbm_laplacian(k: usize, s: usize, q: f64, r: f64, seed: u64) -> NormalizedLaplacian {
    laplacian(SimplifiedSbm::new(k, s, q, r).unwrap().model().unwrap().sample(seed)).unwrap()
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// Monomial coefficients of `Σ w_ℓ T_ℓ(x)`.
fn chebyshev_to_monomial(weights: &[f64]) -> Vec<f64> {
    let p = weights.len() - 1;
    let mut out = vec![0.0; p + 1];
    let mut prev = vec![0.0; p + 1];
    let mut cur = vec![0.0; p + 1];
    prev[0] = 1.0;
    out[0] += weights[0];
    if p >= 1 {
        cur[1] = 1.0;
        out[1] += weights[1];
    }
    for w in &weights[2.min(p + 1)..] {
        let mut next = vec![0.0; p + 1];
        for j in 0..p {
            next[j + 1] += 2.0 * cur[j];
        }
        for j in 0..=p {
            next[j] -= prev[j];
        }
        for j in 0..=p {
            out[j] += w * next[j];
        }
        prev = cur;
        cur = next;
    }
    out
}

#[test]
fn chebyshev_form_equals_monomial_form_at_small_order() {
    let l = sbm_laplacian(3, 30, 0.4, 0.1, 2);
    let r = draw_signals(l.n(), 5, 2);
    for p in [1, 2, 4, 6] {
        let filter = design(0.5, p).unwrap();
        let alpha = chebyshev_to_monomial(&filter.weights());
        // Σ α_ℓ L^ℓ R by repeated products.
        let mut power = r.matrix.clone();
        let mut monomial = power.mapv(|x| alpha[0] * x);
        for a in &alpha[1..] {
            power = l.apply(power.view()).unwrap();
            monomial.scaled_add(*a, &power);
        }
        let fast = fast_filter(&l, &filter, r.view()).unwrap();
        assert!(max_abs(&(fast - monomial)) < 1e-10, "p = {p}");
    }
}

#[test]
fn identity_and_all_pass_polynomials() {
    let l = sbm_laplacian(2, 40, 0.4, 0.1, 5);
    let r = draw_signals(l.n(), 4, 5);
    let identity = PolyFilter::from_coefficients(vec![0.0, 1.0]).unwrap();
    let (out, sweeps) = fast_filter_counted(&l, &identity, r.view()).unwrap();
    assert_eq!(sweeps, 1);
    assert!(max_abs(&(out - l.apply(r.view()).unwrap())) < 1e-14);

    let all_pass = design(1e-300, 40).unwrap();
    let (out, sweeps) = fast_filter_counted(&l, &all_pass, r.view()).unwrap();
    assert_eq!(sweeps, 40);
    assert!(max_abs(&(out - &r.matrix)) < 1e-10);
}

#[test]
fn spectral_error_strictly_decreases_with_order() {
    let l = sbm_laplacian(4, 250, 0.3, 0.1, 11);
    let sys = decompose(&l).unwrap();
    let spectrum: Vec<f64> = sys.eigenvalues().to_vec();
    let lk = spectrum[3].abs();
    // Cut inside the eigengap, as the λ_k search produces; a cut exactly at
    // λ_k would sit on the jump and keep e near 1/2 for every order.
    let cut = 0.5 * (lk + spectrum[4].abs());
    let errors: Vec<f64> =
        [5, 25, 125].iter().map(|&p| filter_error(&design(cut, p).unwrap(), &spectrum, lk).unwrap().e).collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn signal_norm_concentration() {
    // (1/n)‖R‖²_F within 1 ± ε₂; failure bound exp(−n d (ε₂² − ε₂³)/4) is about 1e-88 here.
    let (n, d, eps) = (256, 50, 0.3);
    let mut within_wide = 0;
    let mut within_eps = 0;
    for seed in 0..200 {
        let r = draw_signals(n, d, seed);
        let avg = r.matrix.iter().map(|x| x * x).sum::<f64>() / n as f64;
        within_wide += (0.7..=1.3).contains(&avg) as usize;
        within_eps += ((1.0 - eps)..=(1.0 + eps)).contains(&avg) as usize;
    }
    assert!(within_wide >= 199);
    let bound = (-(n as f64) * d as f64 * (eps * eps - eps.powi(3)) / 4.0).exp();
    assert!(((200 - within_eps) as f64 / 200.0) <= bound + 1e-12);
}

#[test]
fn damped_filter_pass_and_stop_at_high_order() {
    let f = design(0.6, 125).unwrap();
    assert!((f.eval(0.9) - 1.0).abs() <= 0.05);
    assert!(f.eval(0.1).abs() <= 0.05);
    assert!((f.eval(-0.9) - 1.0).abs() <= 0.05);
}
