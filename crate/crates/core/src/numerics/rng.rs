use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::DenseMatrix;

/// Generator handed out by [`RngStream::rng`].
pub type StreamRng = ChaCha8Rng;

/// A reproducible random stream identified by `(base_seed, stream_index)`.
///
/// Streams map onto ChaCha8 keyed by `base_seed` with the 64-bit ChaCha
/// stream id set to `stream_index`, so distinct indices under one seed never
/// share keystream blocks. Monte Carlo repetition `j` uses stream index `j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub base_seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(base_seed: u64, stream_index: u64) -> Self {
        Self {
            base_seed,
            stream_index,
        }
    }

    /// A fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Child stream for a named purpose (model draw, sketch draw, ...).
    ///
    /// The child keeps the stream index and re-keys the seed, so
    /// `s.derive(a)` and `s.derive(b)` are independent for `a != b`.
    pub fn derive(&self, label: u64) -> RngStream {
        RngStream {
            base_seed: splitmix64(self.base_seed ^ splitmix64(label ^ 0xA5A5_5A5A_C3C3_3C3C)),
            stream_index: self.stream_index,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `rows x cols` matrix of iid standard normals, filled column by column.
pub fn gaussian_matrix<R: rand::Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DenseMatrix {
    let data: Vec<f64> = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DenseMatrix::from_vec(rows, cols, data)
}

#[cfg(test)]
mod tests {
    use rand::Rng;

    use super::*;

    #[test]
    fn identical_streams_repeat() {
        let a: Vec<u64> = RngStream::new(7, 3).rng().random_iter().take(16).collect();
        let b: Vec<u64> = RngStream::new(7, 3).rng().random_iter().take(16).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn distinct_indices_differ() {
        let a: Vec<u64> = RngStream::new(7, 3).rng().random_iter().take(16).collect();
        let b: Vec<u64> = RngStream::new(7, 4).rng().random_iter().take(16).collect();
        assert_ne!(a, b);
        let c: Vec<u64> = RngStream::new(7, 3).derive(1).rng().random_iter().take(16).collect();
        assert_ne!(a, c);
    }

    #[test]
    fn streams_are_uncorrelated() {
        let n = 20_000;
        let mut r1 = RngStream::new(11, 0).rng();
        let mut r2 = RngStream::new(11, 1).rng();
        let xs: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r1)).collect();
        let ys: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r2)).collect();
        let corr: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        // sd of the empirical correlation is 1/sqrt(n)
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr = {corr}");
    }
}
