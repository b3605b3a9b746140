//! Marchenko–Pastur transforms of an `r x n` iid sketch with entry variance
//! `1/n`: `m1S` belongs to `SSᵀ`, `m2S` to `SᵀS`.

use crate::error::{ensure, Result};

/// Support edges `(λ₋, λ₊) = ((1−√ξ)², (1+√ξ)²)` of the `SSᵀ` spectrum.
pub fn mp_edges(xi: f64) -> (f64, f64) {
    ((1.0 - xi.sqrt()).powi(2), (1.0 + xi.sqrt()).powi(2))
}

// √((z−λ₊)(z−λ₋)) on the branch that is positive for large z.
fn radical(z: f64, xi: f64) -> Result<f64> {
    ensure!(xi > 0.0 && xi <= 1.0, Domain, "xi must lie in (0, 1], got {xi}");
    let (lm, lp) = mp_edges(xi);
    ensure!(z != 0.0, Domain, "MP transforms are singular at 0");
    ensure!(z > lp || z < lm, Domain, "z = {z} lies inside the MP bulk [{lm}, {lp}]");
    let mag = ((z - lp) * (z - lm)).sqrt();
    Ok(if z > lp { mag } else { -mag })
}

pub fn m1s(z: f64, xi: f64) -> Result<f64> {
    let r = radical(z, xi)?;
    Ok((-(z - 1.0 + xi) + r) / (2.0 * z * xi))
}

pub fn m2s(z: f64, xi: f64) -> Result<f64> {
    let r = radical(z, xi)?;
    Ok((-(z + 1.0 - xi) + r) / (2.0 * z))
}

pub fn m1s_prime(z: f64, xi: f64) -> Result<f64> {
    let r = radical(z, xi)?;
    let dr = (z - (1.0 + xi)) / r;
    let m = (-(z - 1.0 + xi) + r) / (2.0 * z * xi);
    Ok((-1.0 + dr) / (2.0 * z * xi) - m / z)
}

pub fn m2s_prime(z: f64, xi: f64) -> Result<f64> {
    let r = radical(z, xi)?;
    let dr = (z - (1.0 + xi)) / r;
    let m = (-(z + 1.0 - xi) + r) / (2.0 * z);
    Ok((-1.0 + dr) / (2.0 * z) - m / z)
}

/// Inverse of `m1S`: `1/(1+ξm) − 1/m`.
pub fn g1s(m: f64, xi: f64) -> f64 {
    1.0 / (1.0 + xi * m) - 1.0 / m
}

/// Inverse of `m2S`: `ξ/(1+m) − 1/m`.
pub fn g2s(m: f64, xi: f64) -> f64 {
    xi / (1.0 + m) - 1.0 / m
}

/// All four transforms. `m1S`/`m2S` are evaluated at the spectral point
/// `x`; `g1S`/`g2S` at the transform value `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MpTransforms {
    pub m1s: f64,
    pub m2s: f64,
    pub g1s: f64,
    pub g2s: f64,
}

pub fn mp_transforms(x: f64, xi: f64) -> Result<MpTransforms> {
    Ok(MpTransforms {
        m1s: m1s(x, xi)?,
        m2s: m2s(x, xi)?,
        g1s: g1s(x, xi),
        g2s: g2s(x, xi),
    })
}
