use nalgebra::DVector;

use crate::error::{ensure, Error, Result};

use super::DenseMatrix;

/// Leading part of the spectrum of `MᵀM` together with the matching
/// singular vectors of `M`.
///
/// `values[i]` is the i-th largest eigenvalue of `MᵀM` (the squared i-th
/// singular value). Column `i` of `right_vectors` (length `cols`) and of
/// `left_vectors` (length `rows`) are the matching unit singular vectors.
/// Signs are arbitrary.
#[derive(Debug, Clone)]
pub struct SpectralTopK {
    pub values: Vec<f64>,
    pub right_vectors: DenseMatrix,
    pub left_vectors: DenseMatrix,
}

/// Top-`k` eigenpairs of `MᵀM` through a dense symmetric eigendecomposition
/// of the smaller of the two Gram matrices.
///
/// Every returned pair satisfies `‖MᵀM v − λ v‖ ≤ tol · ‖MᵀM‖`.
pub fn top_k_spectrum(m: &DenseMatrix, k: usize, tol: f64) -> Result<SpectralTopK> {
    let (rows, cols) = m.shape();
    ensure!(
        k >= 1 && k <= rows.min(cols),
        Dimension,
        "k = {k} out of range for a {rows}x{cols} matrix"
    );
    ensure!(tol > 0.0, Usage, "tolerance must be positive");
    ensure!(m.iter().all(|x| x.is_finite()), Data, "matrix has non-finite entries");

    let right_side = cols <= rows;
    let gram = if right_side { m.tr_mul(m) } else { m * m.transpose() };
    let eig = gram.symmetric_eigen();

    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = &order[..k];

    let values: Vec<f64> = top.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let lambda_max = values[0];
    let primary = DenseMatrix::from_columns(&top.iter().map(|&i| eig.eigenvectors.column(i)).collect::<Vec<_>>());

    // other side: u = M v / sigma (or v = Mᵀ u / sigma)
    let mapped = if right_side { m * &primary } else { m.tr_mul(&primary) };
    let floor = lambda_max.sqrt() * f64::EPSILON * (rows.max(cols) as f64);
    let mut secondary = mapped;
    for (j, value) in values.iter().enumerate() {
        let sigma = value.sqrt();
        if sigma > floor {
            secondary.column_mut(j).unscale_mut(sigma);
        } else {
            secondary.column_mut(j).fill(0.0);
        }
    }
    orthonormalize_columns(&mut secondary);

    let (right_vectors, left_vectors) = if right_side {
        (primary, secondary)
    } else {
        (secondary, primary)
    };

    let scale = lambda_max.max(f64::MIN_POSITIVE);
    for (j, value) in values.iter().enumerate() {
        let v = right_vectors.column(j);
        let mv = m * v;
        let residual = (m.tr_mul(&mv) - v * *value).norm();
        if residual > tol * scale && lambda_max > 0.0 {
            return Err(Error::Numerical(format!(
                "eigenpair {j} residual {residual:.3e} exceeds {:.3e}",
                tol * scale
            )));
        }
    }

    Ok(SpectralTopK {
        values,
        right_vectors,
        left_vectors,
    })
}

/// Modified Gram–Schmidt, run twice; zero (or dependent) columns are
/// replaced by the first standard basis vector that completes the set.
fn orthonormalize_columns(q: &mut DenseMatrix) {
    let (n, k) = q.shape();
    for j in 0..k {
        for _pass in 0..2 {
            for i in 0..j {
                let proj = q.column(i).dot(&q.column(j));
                let qi = q.column(i).clone_owned();
                q.column_mut(j).axpy(-proj, &qi, 1.0);
            }
        }
        let norm = q.column(j).norm();
        if norm > 1e-8 {
            q.column_mut(j).unscale_mut(norm);
            continue;
        }
        for e in 0..n {
            let mut cand = DVector::<f64>::zeros(n);
            cand[e] = 1.0;
            for i in 0..j {
                let proj = q.column(i).dot(&cand);
                cand.axpy(-proj, &q.column(i), 1.0);
            }
            let cn = cand.norm();
            if cn > 0.5 {
                q.column_mut(j).copy_from(&(cand / cn));
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gaussian_matrix;
    use crate::RngStream;

    fn check_invariants(s: &SpectralTopK) {
        for w in s.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for vecs in [&s.right_vectors, &s.left_vectors] {
            for j in 0..vecs.ncols() {
                assert!((vecs.column(j).norm() - 1.0).abs() <= 1e-10);
                for i in 0..j {
                    assert!(vecs.column(i).dot(&vecs.column(j)).abs() <= 1e-8);
                }
            }
        }
    }

    #[test]
    fn diagonal_matrix() {
        let m = DenseMatrix::from_diagonal(&DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let s = top_k_spectrum(&m, 2, 1e-10).unwrap();
        assert!((s.values[0] - 9.0).abs() < 1e-12);
        assert!((s.values[1] - 4.0).abs() < 1e-12);
        assert!((s.right_vectors[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((s.right_vectors[(1, 1)].abs() - 1.0).abs() < 1e-12);
        check_invariants(&s);
    }

    #[test]
    fn identity() {
        let m = DenseMatrix::identity(4, 4);
        let s = top_k_spectrum(&m, 1, 1e-10).unwrap();
        assert!((s.values[0] - 1.0).abs() < 1e-12);
        check_invariants(&s);
    }

    // full dense eigensolver on MᵀM as the oracle
    #[test]
    fn random_8x5_all_values() {
        let mut rng = RngStream::new(3, 0).rng();
        let m = gaussian_matrix(8, 5, &mut rng);
        let s = top_k_spectrum(&m, 5, 1e-10).unwrap();
        let mut full: Vec<f64> = m.tr_mul(&m).symmetric_eigen().eigenvalues.iter().copied().collect();
        full.sort_by(|a, b| b.total_cmp(a));
        for (a, b) in s.values.iter().zip(&full) {
            assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0));
        }
        check_invariants(&s);
    }

    #[test]
    fn wide_and_tall_agree() {
        for (rows, cols) in [(3, 12), (12, 3), (7, 7), (1, 9), (9, 1), (12, 11)] {
            let mut rng = RngStream::new(rows as u64, cols as u64).rng();
            let m = gaussian_matrix(rows, cols, &mut rng);
            let k = rows.min(cols);
            let s = top_k_spectrum(&m, k, 1e-10).unwrap();
            let mut full: Vec<f64> = m.tr_mul(&m).symmetric_eigen().eigenvalues.iter().copied().collect();
            full.sort_by(|a, b| b.total_cmp(a));
            for (a, b) in s.values.iter().zip(&full) {
                assert!((a - b).abs() <= 1e-8 * b.abs().max(1.0), "{rows}x{cols}");
            }
            check_invariants(&s);
            // M v = sigma u
            for j in 0..k {
                let mv = &m * s.right_vectors.column(j);
                let su = s.left_vectors.column(j) * s.values[j].sqrt();
                assert!((mv - su).norm() <= 1e-8 * s.values[0].sqrt().max(1.0));
            }
        }
    }

    #[test]
    fn rank_deficient_completes_basis() {
        let mut m = DenseMatrix::zeros(5, 4);
        m[(0, 0)] = 2.0;
        let s = top_k_spectrum(&m, 3, 1e-10).unwrap();
        assert_eq!(s.values[1], 0.0);
        check_invariants(&s);
    }

    #[test]
    fn errors() {
        let m = DenseMatrix::identity(3, 3);
        assert!(matches!(top_k_spectrum(&m, 0, 1e-8), Err(Error::Dimension(_))));
        assert!(matches!(top_k_spectrum(&m, 4, 1e-8), Err(Error::Dimension(_))));
        let mut bad = m.clone();
        bad[(1, 1)] = f64::NAN;
        assert!(matches!(top_k_spectrum(&bad, 1, 1e-8), Err(Error::Data(_))));
    }
}
