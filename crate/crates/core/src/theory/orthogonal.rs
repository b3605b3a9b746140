//! Closed forms shared by Haar projection, uniform sampling, SRHT/DFT and
//! (with `ξ̂`) CountSketch.

use num_complex::Complex64;

use crate::error::{ensure, Result};

use super::{AspectRatios, SpikePrediction};

/// `m₂c` in closed form: `(−(z−γ+ξ) + √(z−λ₊)·√(z−λ₋)) / (2z)`.
///
/// Taking the principal root of each factor separately gives the branch
/// that decays like `−ξ/z`, both off the real axis and on it outside the
/// bulk. Real `z` strictly inside `(λ₋, λ₊)` (and `z = 0`) are rejected.
pub fn m2c_closed(z: Complex64, ar: AspectRatios) -> Result<Complex64> {
    let AspectRatios { gamma, xi } = ar;
    let lp = (gamma.sqrt() + xi.sqrt()).powi(2);
    let lm = (gamma.sqrt() - xi.sqrt()).powi(2);
    ensure!(z.is_finite(), Domain, "spectral point must be finite");
    ensure!(z.norm() > 0.0, Domain, "m2c is singular at z = 0");
    if z.im == 0.0 {
        ensure!(
            z.re >= lp || z.re <= lm,
            Domain,
            "z = {} lies inside the bulk ({lm}, {lp})",
            z.re
        );
    }
    let root = (z - lp).sqrt() * (z - lm).sqrt();
    Ok((-(z - gamma + xi) + root) / (2.0 * z))
}

/// Real-axis convenience wrapper of [`m2c_closed`].
pub fn m2c_closed_real(x: f64, ar: AspectRatios) -> Result<f64> {
    Ok(m2c_closed(Complex64::new(x, 0.0), ar)?.re)
}

/// `m₂c(λ₊) = −√ξ/(√ξ + √γ)`, the left end of the outlier interval.
pub fn m2c_at_edge(ar: AspectRatios) -> f64 {
    -ar.xi.sqrt() / (ar.xi.sqrt() + ar.gamma.sqrt())
}

/// Inverse of `m₂c` on the outlier interval: `γ/(1+m) − ξ/m`.
pub fn g2c_closed(m: f64, ar: AspectRatios) -> Result<f64> {
    let lo = m2c_at_edge(ar);
    ensure!(
        m > lo && m < 0.0,
        Domain,
        "m = {m} outside the admissible interval ({lo}, 0)"
    );
    Ok(ar.gamma / (1.0 + m) - ar.xi / m)
}

/// `ξ̂ = ξ(1 − e^{−1/ξ})`: CountSketch acts like an orthogonal sketch with
/// this many effective rows (the expected fraction of nonempty buckets).
pub fn effective_xi_countsketch(xi: f64) -> f64 {
    -xi * (-1.0 / xi).exp_m1()
}

pub(crate) fn cos2_orthogonal(ell: f64, ar: AspectRatios) -> Option<f64> {
    let AspectRatios { gamma, xi } = ar;
    (ell > (gamma / xi).sqrt()).then(|| (xi - gamma / (ell * ell)) / (xi + gamma / ell))
}

/// Outlier location and overlap for orthogonal-family sketches.
///
/// A spike separates from the bulk when `d² > √(γ/ξ)`, so
/// `d_critical = (γ/ξ)^{1/4}`; this reduces to the classical `d² > √γ` at
/// `ξ = 1`.
pub fn predict_orthogonal_family(d: f64, ar: AspectRatios) -> Result<SpikePrediction> {
    ensure!(d > 0.0 && d.is_finite(), Domain, "signal strength must be positive, got {d}");
    let AspectRatios { gamma, xi } = ar;
    let lambda_plus = ar.lambda_plus_orthogonal();
    let d_critical = (gamma / xi).powf(0.25);
    let ell = d * d;
    match cos2_orthogonal(ell, ar) {
        Some(cos2) => Ok(SpikePrediction {
            d,
            theta: (1.0 + ell) * (gamma / ell + xi),
            cos2,
            above_threshold: true,
            lambda_plus,
            d_critical,
        }),
        None => Ok(SpikePrediction::below(d, lambda_plus, d_critical)),
    }
}
