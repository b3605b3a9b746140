//! Leading-order predictions for strong, well-separated spikes under a
//! general noise covariance `Σ`.

use crate::error::{ensure, Error, Result};
use crate::numerics::DenseMatrix;

use super::AspectRatios;

/// Moments of the spectrum of `Σ` and the compression `E = UᵀΣU`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovSummary {
    pub rho1: f64,
    pub rho2: f64,
    pub e: DenseMatrix,
}

impl CovSummary {
    /// `Σ = I`: `ρ₁ = ρ₂ = 1`, `E = I_k`.
    pub fn identity(k: usize) -> Self {
        Self {
            rho1: 1.0,
            rho2: 1.0,
            e: DenseMatrix::identity(k, k),
        }
    }
}

/// `ρ₁ = tr(Σ)/p`, `ρ₂ = ‖Σ‖_F²/p` and `E = UᵀΣU`.
pub fn cov_summary(sigma: &DenseMatrix, u: &DenseMatrix) -> Result<CovSummary> {
    let p = sigma.nrows();
    ensure!(sigma.is_square() && p > 0, Dimension, "covariance must be square and non-empty");
    ensure!(u.nrows() == p, Dimension, "U has {} rows, covariance is {p}x{p}", u.nrows());
    let scale = sigma.amax().max(1.0);
    for i in 0..p {
        for j in 0..i {
            if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-10 * scale {
                return Err(Error::Data(format!("covariance is not symmetric at ({i}, {j})")));
            }
        }
    }
    let rho1 = sigma.trace() / p as f64;
    let rho2 = sigma.norm_squared() / p as f64;
    let mut e = u.tr_mul(&(sigma * u));
    e = (&e + e.transpose()) * 0.5;
    Ok(CovSummary { rho1, rho2, e })
}

/// Large-signal outputs for spike `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LargeSignalPrediction {
    pub theta: f64,
    pub cos2: f64,
    /// `(j, |⟨u_j, ξ̃ᵢ⟩|²)` for every `j ≠ i`; `None` when some `d_j = dᵢ`.
    pub cross: Option<Vec<(usize, f64)>>,
}

/// `θᵢ = ξ(dᵢ² + Eᵢᵢ) + γρ₁` and
/// `cos²ᵢᵢ = (ξ − γρ₂/dᵢ⁴) / (ξ + (γ/dᵢ²)[ρ₁ + dᵢ⁻²(ρ₂ − ρ₁Eᵢᵢ)])`, with
/// cross overlaps `cos²ᵢᵢ·|Eⱼᵢ/(dᵢ² − dⱼ²)|²`.
///
/// `ar.xi` is used as given; pass `ξ̂` for CountSketch.
pub fn predict_large_signal(d: &[f64], i: usize, cov: &CovSummary, ar: AspectRatios) -> Result<LargeSignalPrediction> {
    let k = d.len();
    ensure!(i < k, Dimension, "spike index {i} out of range for k = {k}");
    ensure!(cov.e.shape() == (k, k), Dimension, "E is {:?}, expected {k}x{k}", cov.e.shape());
    ensure!(d.iter().all(|x| *x > 0.0 && x.is_finite()), Domain, "signal strengths must be positive");
    let AspectRatios { gamma, xi } = ar;
    let CovSummary { rho1, rho2, e } = cov;
    let di2 = d[i] * d[i];
    let eii = e[(i, i)];
    let theta = xi * (di2 + eii) + gamma * rho1;
    let cos2 = (xi - gamma * rho2 / (di2 * di2)) / (xi + (gamma / di2) * (rho1 + (rho2 - rho1 * eii) / di2));
    let degenerate = (0..k).any(|j| j != i && d[j] * d[j] == di2);
    let cross = (!degenerate).then(|| {
        (0..k)
            .filter(|&j| j != i)
            .map(|j| {
                let ratio = e[(j, i)] / (di2 - d[j] * d[j]);
                (j, cos2 * ratio * ratio)
            })
            .collect()
    });
    Ok(LargeSignalPrediction { theta, cos2, cross })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::theory::predict_orthogonal_family;
    use proptest::prelude::*;

    fn toeplitz(p: usize, q: f64) -> DenseMatrix {
        DenseMatrix::from_fn(p, p, |i, j| q.powi((i as i32 - j as i32).abs()))
    }

    #[test]
    fn identity_summary() {
        let u = DenseMatrix::identity(10, 3);
        let s = cov_summary(&DenseMatrix::identity(10, 10), &u).unwrap();
        assert_eq!(s, CovSummary::identity(3));
    }

    #[test]
    fn toeplitz_second_moment() {
        let (p, q) = (500usize, 0.9f64);
        let s = cov_summary(&toeplitz(p, q), &DenseMatrix::identity(p, 1)).unwrap();
        let pf = p as f64;
        let q2 = q * q;
        let closed = 1.0 + (2.0 / pf) * (pf * q2 / (1.0 - q2) - q2 * (1.0 - q.powi(2 * p as i32)) / (1.0 - q2).powi(2));
        assert!((s.rho2 - closed).abs() < 1e-10);
        assert!((s.rho1 - 1.0).abs() < 1e-15);
        assert!(((1.0 + q2) / (1.0 - q2) - 9.526316).abs() < 1e-6);
    }

    #[test]
    fn step_spectrum_trace() {
        let p = 10;
        let mut diag = vec![5.0];
        diag.extend(std::iter::repeat_n(2.0, p / 2 - 1));
        diag.extend(std::iter::repeat_n(1.0, p / 2));
        let sigma = DenseMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag.clone()));
        let s = cov_summary(&sigma, &DenseMatrix::identity(p, 1)).unwrap();
        assert!((s.rho1 - diag.iter().sum::<f64>() / p as f64).abs() < 1e-15);
        assert_eq!(s.e[(0, 0)], 5.0);
    }

    #[test]
    fn asymmetric_covariance_rejected() {
        let mut m = DenseMatrix::identity(3, 3);
        m[(0, 1)] = 0.5;
        assert!(matches!(cov_summary(&m, &DenseMatrix::identity(3, 1)), Err(Error::Data(_))));
    }

    #[test]
    fn identity_example() {
        let ar = AspectRatios::new(0.2, 0.1).unwrap();
        let p = predict_large_signal(&[5.0], 0, &CovSummary::identity(1), ar).unwrap();
        assert!((p.theta - 2.8).abs() < 1e-14);
        assert_eq!(p.cross, Some(vec![]));
        let exact = predict_orthogonal_family(5.0, ar).unwrap().theta;
        assert!((exact - p.theta - 0.008).abs() < 1e-12);
    }

    #[test]
    fn degenerate_gap_drops_cross_terms() {
        let ar = AspectRatios::new(0.2, 0.1).unwrap();
        let p = predict_large_signal(&[5.0, 5.0], 0, &CovSummary::identity(2), ar).unwrap();
        assert!(p.cross.is_none());
        assert!(p.cos2 > 0.0);
    }

    proptest! {
        #[test]
        fn identity_matches_orthogonal_family(g in 0.05f64..2.0, x in 0.05f64..1.0, d in 3.0f64..40.0) {
            let ar = AspectRatios::new(g, x).unwrap();
            let dc = (g / x).powf(0.25);
            prop_assume!(d > dc * 1.01);
            let large = predict_large_signal(&[d], 0, &CovSummary::identity(1), ar).unwrap();
            let exact = predict_orthogonal_family(d, ar).unwrap();
            prop_assert!((exact.theta - large.theta - g / (d * d)).abs() <= 1e-12 * exact.theta);
        }
    }

    #[test]
    fn identity_cos2_converges() {
        let ar = AspectRatios::new(0.2, 0.1).unwrap();
        let large = predict_large_signal(&[20.0], 0, &CovSummary::identity(1), ar).unwrap();
        let exact = predict_orthogonal_family(20.0, ar).unwrap();
        assert!((large.cos2 - exact.cos2).abs() < 1e-3);
    }
}
