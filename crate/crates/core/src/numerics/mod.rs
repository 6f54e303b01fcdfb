//! Dense linear algebra and seeded randomness.

mod evd;
mod lstsq;
mod matrix;
mod rng;

pub use evd::{symmetric_evd, EvdResult};
pub use lstsq::{least_squares, residual_norm, ridge_solve, Cholesky, TIKHONOV_FALLBACK};
pub use matrix::{axpy, cosine_similarity, dot, euclidean_distance, l2_norm, squared_distance, DenseMatrix};
pub use rng::Rng;
