use crate::error::{ensure, Result};

use super::DenseMatrix;

/// In-place unnormalized Walsh–Hadamard transform, `x <- H x`.
///
/// Uses the recursion `H_n = [[H_{n/2}, H_{n/2}], [H_{n/2}, -H_{n/2}]]`.
/// Panics if the length is not a power of two.
pub fn fwht_in_place(data: &mut [f64]) {
    let len = data.len();
    assert!(len.is_power_of_two(), "fwht length {len} is not a power of two");
    let mut h = 1;
    while h < len {
        for block in data.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// Returns `H M` for the unnormalized Walsh–Hadamard matrix of size `rows`.
pub fn fwht_rows(m: &DenseMatrix) -> Result<DenseMatrix> {
    let rows = m.nrows();
    ensure!(
        rows.is_power_of_two(),
        Dimension,
        "fwht needs a power-of-two row count, got {rows}"
    );
    let mut out = m.clone();
    if rows > 0 {
        for col in out.as_mut_slice().chunks_exact_mut(rows) {
            fwht_in_place(col);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn explicit_hadamard(n: usize) -> DenseMatrix {
        // H_{ij} = (-1)^{popcount(i & j)}
        DenseMatrix::from_fn(n, n, |i, j| if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 })
    }

    #[test]
    fn first_column_of_h2() {
        let m = DenseMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let out = fwht_rows(&m).unwrap();
        assert_eq!(out.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn rejects_non_power_of_two() {
        let m = DenseMatrix::zeros(6, 2);
        assert!(matches!(fwht_rows(&m), Err(crate::Error::Dimension(_))));
    }

    #[test]
    fn matches_explicit_h8() {
        let col = [0.3, -1.2, 2.5, 0.0, 4.1, -0.7, 1.1, 0.9];
        let m = DenseMatrix::from_column_slice(8, 1, &col);
        let fast = fwht_rows(&m).unwrap();
        let slow = explicit_hadamard(8) * &m;
        assert!(crate::numerics::max_abs_diff(&fast, &slow) <= 1e-12);
    }

    #[test]
    fn constant_columns_hit_first_row() {
        let m = DenseMatrix::from_element(16, 3, 2.5);
        let out = fwht_rows(&m).unwrap();
        for j in 0..3 {
            assert_eq!(out[(0, j)], 16.0 * 2.5);
            let col_sum: f64 = out.column(j).iter().sum();
            // every row except the first sums a balanced +/- pattern
            assert!((col_sum - 16.0 * 2.5).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn involution(log_n in 0u32..7, cols in 1usize..4, seed in any::<u64>()) {
            let n = 1usize << log_n;
            let mut rng = crate::RngStream::new(seed, 0).rng();
            let m = crate::numerics::gaussian_matrix(n, cols, &mut rng);
            let twice = fwht_rows(&fwht_rows(&m).unwrap()).unwrap();
            let scaled = &m * n as f64;
            prop_assert!(crate::numerics::max_abs_diff(&twice, &scaled) <= 1e-12 * n as f64);
        }

        #[test]
        fn agrees_with_explicit(log_n in 0u32..6, seed in any::<u64>()) {
            let n = 1usize << log_n;
            let mut rng = crate::RngStream::new(seed, 1).rng();
            let m = crate::numerics::gaussian_matrix(n, 2, &mut rng);
            let fast = fwht_rows(&m).unwrap();
            let slow = explicit_hadamard(n) * &m;
            prop_assert!(crate::numerics::max_abs_diff(&fast, &slow) <= 1e-12 * n as f64);
        }
    }
}
