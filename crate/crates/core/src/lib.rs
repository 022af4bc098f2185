//! Spectral clustering of stochastic block model graphs through polynomial
//! graph filtering of random signals.
//!
//! The compressive pipeline never decomposes the Laplacian:
//!
//! 1. estimate `|λ_k|` by a dichotomic search on the filtered energy of
//!    Gaussian signals ([`embed::estimate_lambda_k`]);
//! 2. design a Jackson-damped Chebyshev low-pass filter at that cut
//!    ([`filter::design`]);
//! 3. draw `R ∈ ℝ^{n×d}` with `N(0, 1/d)` entries ([`embed::draw_signals`]);
//! 4. filter `R` with `p` sparse products ([`filter::fast_filter`]);
//! 5. run k-means on the rows ([`clustering::kmeans`]).
//!
//! [`eigen`] provides dense ground truth (exact spectral clustering, ideal
//! filtering, population eigenvectors) for testing and reporting, and
//! [`metrics`] measures misclustering against the planted partition.

pub mod clustering;
pub mod eigen;
pub mod embed;
pub mod error;
pub mod filter;
pub mod graph;
pub mod harness;
pub mod metrics;
pub mod rng;
pub mod sbm;

pub use error::{Error, Result};
