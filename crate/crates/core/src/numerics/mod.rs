//! Dense-matrix primitives shared by every other module.

mod fwht;
mod haar;
mod rng;
mod spectral;

pub use fwht::{fwht_in_place, fwht_rows};
pub use haar::{haar_orthonormal, haar_orthonormal_with};
pub use rng::{gaussian_matrix, RngStream, StreamRng};
pub use spectral::{top_k_spectrum, SpectralTopK};

/// Real dense matrix. Storage is nalgebra's column-major layout.
pub type DenseMatrix = nalgebra::DMatrix<f64>;

/// Squared Frobenius norm.
pub fn frobenius_sq(m: &DenseMatrix) -> f64 {
    m.iter().map(|x| x * x).sum()
}

/// Largest absolute entry of `a - b`.
pub fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
