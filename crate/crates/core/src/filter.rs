//! Jackson-damped Chebyshev approximation of the ideal low-pass filter and
//! its application to signals through repeated sparse products with `L`.
//!
//! The ideal filter keeps every mode with `|λ| ≥ λ_cut`. Its Chebyshev
//! expansion on `[-1, 1]` is the sum of two interval indicators,
//! `[-1, -λ_cut]` and `[λ_cut, 1]`; for an interval `[a, b]`
//!
//! ```text
//! c_0 = (acos a − acos b) / π
//! c_ℓ = 2 (sin(ℓ acos a) − sin(ℓ acos b)) / (ℓ π)
//! ```
//!
//! and the truncated series is damped with the Jackson factors
//!
//! ```text
//! g_ℓ = [(p − ℓ + 1) cos(πℓ/(p+1)) + sin(πℓ/(p+1)) cot(π/(p+1))] / (p + 1)
//! ```
//!
//! which keeps the approximation inside `[0, 1]` without Gibbs overshoot.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::graph::NormalizedLaplacian;

/// Number of points used for grid-based error estimates.
pub const GRID_POINTS: usize = 2001;

#[derive(Debug, Clone, PartialEq)]
pub struct PolyFilter {
    order: usize,
    lambda_cut: Option<f64>,
    coeffs: Vec<f64>,
    damping: Vec<f64>,
}

/// Maximum absolute deviation between a polynomial filter and the ideal one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterError {
    pub e: f64,
}

pub fn jackson_damping(p: usize) -> Vec<f64> {
    let pp = (p + 1) as f64;
    let alpha = PI / pp;
    let cot = alpha.cos() / alpha.sin();
    (0..=p)
        .map(|ell| {
            let l = ell as f64;
            ((pp - l) * (alpha * l).cos() + (alpha * l).sin() * cot) / pp
        })
        .collect()
}

fn interval_coefficients(a: f64, b: f64, p: usize, out: &mut [f64]) {
    let ta = a.clamp(-1.0, 1.0).acos();
    let tb = b.clamp(-1.0, 1.0).acos();
    out[0] += (ta - tb) / PI;
    for (ell, c) in out.iter_mut().enumerate().take(p + 1).skip(1) {
        let l = ell as f64;
        *c += 2.0 * ((l * ta).sin() - (l * tb).sin()) / (l * PI);
    }
}

/// Designs the order-`p` filter passing `|λ| ≥ k_cut`.
pub fn design(k_cut: f64, p: usize) -> Result<PolyFilter> {
    if p < 1 {
        return Err(Error::InvalidParameter("polynomial order must be at least 1".into()));
    }
    if !(k_cut > 0.0 && k_cut <= 1.0) {
        return Err(Error::InvalidParameter(format!("lambda cut {k_cut} outside (0, 1]")));
    }
    let mut coeffs = vec![0.0; p + 1];
    interval_coefficients(-1.0, -k_cut, p, &mut coeffs);
    interval_coefficients(k_cut, 1.0, p, &mut coeffs);
    // The passband is symmetric, so odd terms cancel exactly.
    for c in coeffs.iter_mut().skip(1).step_by(2) {
        *c = 0.0;
    }
    Ok(PolyFilter { order: p, lambda_cut: Some(k_cut), coeffs, damping: jackson_damping(p) })
}

impl PolyFilter {
    /// Undamped filter with the given Chebyshev coefficients.
    pub fn from_coefficients(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::InvalidParameter("need at least two coefficients".into()));
        }
        let order = coeffs.len() - 1;
        Ok(Self { order, lambda_cut: None, damping: vec![1.0; order + 1], coeffs })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn lambda_cut(&self) -> Option<f64> {
        self.lambda_cut
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn damping(&self) -> &[f64] {
        &self.damping
    }

    /// Effective weights `c_ℓ g_ℓ`.
    pub fn weights(&self) -> Vec<f64> {
        self.coeffs.iter().zip(&self.damping).map(|(c, g)| c * g).collect()
    }

    /// `Σ c_ℓ g_ℓ T_ℓ(λ)`, with `λ` clamped to `[-1, 1]`.
    pub fn eval(&self, lambda: f64) -> f64 {
        let x = lambda.clamp(-1.0, 1.0);
        let w = self.weights();
        let mut prev = 1.0;
        let mut cur = x;
        let mut acc = w[0] + w[1] * x;
        for &wl in &w[2..] {
            let next = 2.0 * x * cur - prev;
            acc += wl * next;
            prev = cur;
            cur = next;
        }
        acc
    }

    /// Writes `ell,c,g` rows.
    pub fn write_coefficients_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "ell,c,g")?;
        for (ell, (c, g)) in self.coeffs.iter().zip(&self.damping).enumerate() {
            writeln!(out, "{ell},{c},{g}")?;
        }
        Ok(())
    }
}

/// Ideal filter value: 1 on `|λ| ≥ threshold`, 0 elsewhere.
pub fn ideal(lambda: f64, threshold: f64) -> f64 {
    if lambda.abs() >= threshold {
        1.0
    } else {
        0.0
    }
}

/// `max |h̃(λ) − h(λ)|` over the supplied eigenvalues, with the ideal `h`
/// cut at `k_cut_ideal`.
pub fn filter_error(filter: &PolyFilter, spectrum: &[f64], k_cut_ideal: f64) -> Result<FilterError> {
    if spectrum.is_empty() {
        return Err(Error::EmptySpectrum);
    }
    let e = spectrum.iter().map(|&l| (filter.eval(l) - ideal(l, k_cut_ideal)).abs()).fold(0.0f64, f64::max);
    Ok(FilterError { e })
}

/// Same as [`filter_error`] over a uniform grid on `[-1, 1]`; an upper bound
/// for any spectrum, used when no spectrum is available.
pub fn grid_error(filter: &PolyFilter, k_cut_ideal: f64) -> FilterError {
    let grid = uniform_grid(GRID_POINTS);
    filter_error(filter, &grid, k_cut_ideal).expect("grid is non-empty")
}

pub fn uniform_grid(points: usize) -> Vec<f64> {
    let step = 2.0 / (points - 1) as f64;
    (0..points).map(|i| -1.0 + step * i as f64).collect()
}

/// `Σ c_ℓ g_ℓ T_ℓ(L) R` by the three-term recurrence
/// `T_{ℓ+1}(L)R = 2L T_ℓ(L)R − T_{ℓ−1}(L)R`: `p` sparse sweeps over the `d`
/// columns, three `n × d` panels of state.
pub fn fast_filter(l: &NormalizedLaplacian, filter: &PolyFilter, r: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
    Ok(fast_filter_counted(l, filter, r)?.0)
}

/// [`fast_filter`] plus the number of sparse sweeps performed.
pub fn fast_filter_counted(
    l: &NormalizedLaplacian,
    filter: &PolyFilter,
    r: ArrayView2<'_, f64>,
) -> Result<(Array2<f64>, usize)> {
    let (n, d) = r.dim();
    if n != l.n() {
        return Err(Error::DimensionMismatch(format!("signals have {n} rows for n = {}", l.n())));
    }
    let w = filter.weights();
    let mut prev: Vec<f64> = r.iter().copied().collect();
    let mut out: Vec<f64> = prev.iter().map(|x| w[0] * x).collect();
    let mut cur = vec![0.0; n * d];
    l.apply_panel(&prev, &mut cur, d);
    let mut sweeps = 1;
    axpy(&mut out, w[1], &cur);
    let mut next = vec![0.0; n * d];
    for &wl in &w[2..] {
        l.apply_panel(&cur, &mut next, d);
        sweeps += 1;
        for (nx, pv) in next.iter_mut().zip(&prev) {
            *nx = 2.0 * *nx - pv;
        }
        axpy(&mut out, wl, &next);
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    Ok((Array2::from_shape_vec((n, d), out).expect("shape preserved"), sweeps))
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    if a != 0.0 {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += a * xi;
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Chebyshev moments `μ_j = tr(Rᵀ T_j(L) R)` for `j = 0..=2p`, from `p`
/// sparse sweeps using `T_a T_b = (T_{a+b} + T_{|a−b|}) / 2`.
pub fn chebyshev_moments(l: &NormalizedLaplacian, r: ArrayView2<'_, f64>, p: usize) -> Result<Vec<f64>> {
    let (n, d) = r.dim();
    if n != l.n() {
        return Err(Error::DimensionMismatch(format!("signals have {n} rows for n = {}", l.n())));
    }
    if p < 1 {
        return Err(Error::InvalidParameter("polynomial order must be at least 1".into()));
    }
    let mut mu = vec![0.0; 2 * p + 1];
    let mut prev: Vec<f64> = r.iter().copied().collect();
    let mut cur = vec![0.0; n * d];
    l.apply_panel(&prev, &mut cur, d);
    mu[0] = dot(&prev, &prev);
    mu[1] = dot(&cur, &prev);
    let mut next = vec![0.0; n * d];
    for ell in 1..p {
        // cur = T_ell R, prev = T_{ell-1} R
        mu[2 * ell] = 2.0 * dot(&cur, &cur) - mu[0];
        l.apply_panel(&cur, &mut next, d);
        for (nx, pv) in next.iter_mut().zip(&prev) {
            *nx = 2.0 * *nx - pv;
        }
        mu[2 * ell + 1] = 2.0 * dot(&next, &cur) - mu[1];
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
    }
    mu[2 * p] = 2.0 * dot(&cur, &cur) - mu[0];
    Ok(mu)
}

/// `‖Σ w_ℓ T_ℓ(L) R‖²_F` from the moments of [`chebyshev_moments`].
pub fn filtered_energy(weights: &[f64], moments: &[f64]) -> f64 {
    let p = weights.len() - 1;
    assert!(moments.len() > 2 * p, "need moments up to order 2p");
    let mut total = 0.0;
    for (a, &wa) in weights.iter().enumerate() {
        if wa == 0.0 {
            continue;
        }
        for (b, &wb) in weights.iter().enumerate() {
            if wb == 0.0 {
                continue;
            }
            total += wa * wb * 0.5 * (moments[a + b] + moments[a.abs_diff(b)]);
        }
    }
    total
}
