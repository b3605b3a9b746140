use rand::Rng;

use crate::error::{ensure, Result};

use super::{gaussian_matrix, DenseMatrix, RngStream};

/// Draws an `r x n` matrix with orthonormal rows, uniformly distributed on
/// the Stiefel manifold.
pub fn haar_orthonormal(r: usize, n: usize, stream: &RngStream) -> Result<DenseMatrix> {
    haar_orthonormal_with(r, n, &mut stream.rng())
}

/// As [`haar_orthonormal`], drawing from a caller-owned generator.
///
/// QR-factorises an `n x r` iid Gaussian matrix and flips column `j` of the
/// orthogonal factor by the sign of `R_jj`. Without the flip the Householder
/// sign convention biases the distribution away from Haar.
pub fn haar_orthonormal_with<R: Rng + ?Sized>(r: usize, n: usize, rng: &mut R) -> Result<DenseMatrix> {
    ensure!(r >= 1, Dimension, "haar sketch needs r >= 1");
    ensure!(r <= n, Dimension, "haar sketch needs r <= n (r = {r}, n = {n})");
    let g = gaussian_matrix(n, r, rng);
    let (mut q, r_factor) = g.qr().unpack();
    for (j, d) in r_factor.diagonal().iter().enumerate() {
        if *d < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(q.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::max_abs_diff;

    #[test]
    fn one_by_one_is_a_sign() {
        let s = haar_orthonormal(1, 1, &RngStream::new(5, 0)).unwrap();
        assert_eq!(s.shape(), (1, 1));
        assert!((s[(0, 0)].abs() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rows_are_orthonormal() {
        let s = haar_orthonormal(3, 8, &RngStream::new(1, 2)).unwrap();
        let sst = &s * s.transpose();
        assert!(max_abs_diff(&sst, &DenseMatrix::identity(3, 3)) <= 1e-10);
    }

    #[test]
    fn rejects_wide_request() {
        assert!(matches!(
            haar_orthonormal(5, 4, &RngStream::new(0, 0)),
            Err(crate::Error::Dimension(_))
        ));
    }

    #[test]
    fn deterministic_per_stream() {
        let a = haar_orthonormal(4, 10, &RngStream::new(9, 1)).unwrap();
        let b = haar_orthonormal(4, 10, &RngStream::new(9, 1)).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    // Monte Carlo: ||S w||^2 has mean r/n for any fixed unit w.
    #[test]
    fn projected_norm_mean_is_r_over_n() {
        let (r, n, draws) = (50, 200, 500);
        let w = {
            let mut v = nalgebra::DVector::from_fn(n, |i, _| ((i * 7 % 13) as f64) - 6.0);
            v.normalize_mut();
            v
        };
        let vals: Vec<f64> = (0..draws)
            .map(|k| {
                let s = haar_orthonormal(r, n, &RngStream::new(42, k)).unwrap();
                (&s * &w).norm_squared()
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / draws as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
        let se = (var / draws as f64).sqrt();
        assert!((mean - 0.25).abs() <= 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn orthogonal_pair_has_zero_mean_cross_term() {
        let (r, n, draws) = (20, 60, 600);
        let mut a = nalgebra::DVector::zeros(n);
        let mut b = nalgebra::DVector::zeros(n);
        a[0] = 1.0;
        b[1] = 0.6;
        b[2] = 0.8;
        let vals: Vec<f64> = (0..draws)
            .map(|k| {
                let s = haar_orthonormal(r, n, &RngStream::new(8, k)).unwrap();
                (&s * &a).dot(&(&s * &b))
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / draws as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0);
        let se = (var / draws as f64).sqrt();
        assert!(mean.abs() <= 4.0 * se, "mean {mean}, se {se}");
    }
}
