//! Sketches with iid entries of variance `1/n`.
//!
//! `m₁c` solves a cubic that has two negative real roots above the bulk;
//! the Stieltjes branch is the one on the increasing part of `g₁c`, i.e.
//! right of the critical point `m*`. Roots are located by bisection of
//! `g₁c(m) = z` on `(m*, 0)` and then polished on the cubic.

use crate::error::{ensure, Error, Result};

use super::mp::{m1s, m1s_prime, m2s_prime, mp_edges};
use super::{AspectRatios, SpikePrediction};

/// Right edge of the iid-sketched noise bulk and the critical point of
/// `g₁c` that maps onto it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IidEdge {
    pub lambda_plus: f64,
    pub m_star: f64,
}

// Left end of the region where `−1/m` clears the MP support.
fn m_floor(xi: f64) -> f64 {
    -1.0 / mp_edges(xi).1
}

fn g1c_raw(m: f64, ar: AspectRatios) -> Result<f64> {
    let AspectRatios { gamma, xi } = ar;
    let w = -1.0 / m;
    Ok(-gamma / m + (xi / m) * (1.0 - m1s(w, xi)? / m))
}

fn g1c_prime_raw(m: f64, ar: AspectRatios) -> Result<f64> {
    let AspectRatios { gamma, xi } = ar;
    let w = -1.0 / m;
    let m1 = m1s(w, xi)?;
    let d1 = m1s_prime(w, xi)?;
    let m2 = m * m;
    Ok((gamma - xi) / m2 - xi * d1 / (m2 * m2) + 2.0 * xi * m1 / (m2 * m))
}

/// Locates `m*` (the zero of `g₁c'` on `(−1/λ₊ˢ, 0)`) and `λ₊ = g₁c(m*)`.
///
/// `g₁c'` runs from `−∞` at the left end to `+∞` at `0⁻`, so bisection on
/// its sign is well posed.
pub fn bulk_edge_iid(ar: AspectRatios) -> Result<IidEdge> {
    let floor = m_floor(ar.xi);
    let mut lo = floor * (1.0 - 1e-12);
    let mut hi = floor / 2.0;
    let f_lo = g1c_prime_raw(lo, ar)?;
    if !(f_lo < 0.0) {
        return Err(Error::Numerical(format!(
            "iid edge bracket failed: g1c'({lo}) = {f_lo} is not negative (gamma = {}, xi = {})",
            ar.gamma, ar.xi
        )));
    }
    let mut tries = 0;
    while g1c_prime_raw(hi, ar)? <= 0.0 {
        hi /= 2.0;
        tries += 1;
        if tries > 200 {
            return Err(Error::Numerical(format!(
                "iid edge bracket failed: g1c' stays non-positive up to m = {hi} (gamma = {}, xi = {})",
                ar.gamma, ar.xi
            )));
        }
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g1c_prime_raw(mid, ar)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let m_star = 0.5 * (lo + hi);
    Ok(IidEdge {
        lambda_plus: g1c_raw(m_star, ar)?,
        m_star,
    })
}

/// `g₁c(m) = −γ/m + (ξ/m)(1 − m1S(−1/m)/m)` on `(m*, 0)`.
pub fn g1c_iid(m: f64, ar: AspectRatios) -> Result<f64> {
    let edge = bulk_edge_iid(ar)?;
    ensure!(
        m > edge.m_star && m < 0.0,
        Domain,
        "m = {m} outside ({}, 0)",
        edge.m_star
    );
    g1c_raw(m, ar)
}

/// Analytic derivative of [`g1c_iid`].
pub fn g1c_iid_prime(m: f64, ar: AspectRatios) -> Result<f64> {
    ensure!(
        m > m_floor(ar.xi) && m < 0.0,
        Domain,
        "m = {m} outside ({}, 0)",
        m_floor(ar.xi)
    );
    g1c_prime_raw(m, ar)
}

fn cubic(m: f64, z: f64, ar: AspectRatios) -> (f64, f64, f64) {
    let AspectRatios { gamma, xi } = ar;
    let b = z * (1.0 + xi - 2.0 * gamma);
    let c = z + (1.0 - gamma) * (gamma - xi);
    let terms = [z * z * m * m * m, -b * m * m, -c * m, -gamma];
    let value: f64 = terms.iter().sum();
    let scale: f64 = terms.iter().map(|t| t.abs()).sum();
    let slope = 3.0 * z * z * m * m - 2.0 * b * m - c;
    (value, scale, slope)
}

fn solve_with_edge(z: f64, ar: AspectRatios, edge: &IidEdge) -> Result<f64> {
    ensure!(
        z > edge.lambda_plus,
        Domain,
        "z = {z} is not above the iid bulk edge {}",
        edge.lambda_plus
    );
    let mut lo = edge.m_star;
    let mut hi = -ar.gamma / z;
    // g1c → +∞ at 0⁻; move towards 0 until the bracket holds
    while g1c_raw(hi, ar)? <= z {
        hi /= 2.0;
        ensure!(hi < 0.0 && hi > -1e-300, Numerical, "cannot bracket m1c at z = {z}");
    }
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g1c_raw(mid, ar)? < z {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut m = 0.5 * (lo + hi);
    let (mut value, mut scale, mut slope) = cubic(m, z, ar);
    for _ in 0..4 {
        if value.abs() <= 1e-15 * scale || slope == 0.0 {
            break;
        }
        let next = m - value / slope;
        if !(next > edge.m_star && next < 0.0) {
            break;
        }
        let (v2, s2, d2) = cubic(next, z, ar);
        if v2.abs() >= value.abs() {
            break;
        }
        (m, value, scale, slope) = (next, v2, s2, d2);
    }
    if value.abs() > 1e-12 * scale {
        return Err(Error::Numerical(format!(
            "m1c cubic residual {:.3e} at z = {z} exceeds tolerance",
            value.abs() / scale
        )));
    }
    Ok(m)
}

/// Stieltjes root `m₁c(z)` of
/// `z²m³ − z(1+ξ−2γ)m² − [z + (1−γ)(γ−ξ)]m − γ = 0` for `z > λ₊`.
pub fn solve_cubic_m1c(z: f64, ar: AspectRatios) -> Result<f64> {
    let edge = bulk_edge_iid(ar)?;
    solve_with_edge(z, ar, &edge)
}

/// `α(d) = −t / ((1+t)(ξ+t))` with `t = γ/d²`.
pub fn alpha_iid(d: f64, ar: AspectRatios) -> f64 {
    let t = ar.gamma / (d * d);
    -t / ((1.0 + t) * (ar.xi + t))
}

// α(d_c) = m* as a quadratic in t = γ/d². α is not monotone in d (its
// minimum sits at t = √ξ); the detection branch is the root with t < √ξ.
fn d_critical_iid(ar: AspectRatios, m_star: f64) -> Result<f64> {
    let AspectRatios { gamma, xi } = ar;
    let a = m_star;
    let b = m_star * (1.0 + xi) + 1.0;
    let c = m_star * xi;
    let disc = b * b - 4.0 * a * c;
    ensure!(disc >= 0.0, Numerical, "no real iid threshold (discriminant {disc})");
    let sq = disc.sqrt();
    // numerically stable pair of roots
    let q = -0.5 * (b + b.signum() * sq);
    let roots = [q / a, c / q];
    let t = roots
        .into_iter()
        .filter(|t| *t > 0.0 && *t < xi.sqrt())
        .fold(f64::NAN, f64::max);
    ensure!(t.is_finite(), Numerical, "iid threshold root not found (roots {roots:?})");
    Ok((gamma / t).sqrt())
}

/// Outlier location `θ = g₁c(α)` and overlap for iid sketches.
pub fn predict_iid(d: f64, ar: AspectRatios) -> Result<SpikePrediction> {
    ensure!(d > 0.0 && d.is_finite(), Domain, "signal strength must be positive, got {d}");
    let edge = bulk_edge_iid(ar)?;
    let d_critical = d_critical_iid(ar, edge.m_star)?;
    if d <= d_critical {
        return Ok(SpikePrediction::below(d, edge.lambda_plus, d_critical));
    }
    let alpha = alpha_iid(d, ar);
    let d2 = d * d;
    let theta = g1c_raw(alpha, ar)?;
    let num = (alpha * alpha / d2) * g1c_prime_raw(alpha, ar)?;
    let den = m2s_prime(-1.0 / alpha, ar.xi)? / (alpha * alpha) - (1.0 + ar.gamma / d2);
    Ok(SpikePrediction {
        d,
        theta,
        cos2: num / den,
        above_threshold: true,
        lambda_plus: edge.lambda_plus,
        d_critical,
    })
}

/// Large-`d` expansions for iid sketches, accurate to `O(d⁻⁴)` in `θ`:
/// `θ ≈ ξd² + (ξγ + γ + ξ) + (γ + ξ + 1)γ/d²` and
/// `cos² ≈ (ξ − (1+ξ)γ/d⁴) / (ξ + (1+ξ)γ/d²)`.
pub fn predict_iid_large(d: f64, ar: AspectRatios) -> Result<(f64, f64)> {
    ensure!(d > 0.0 && d.is_finite(), Domain, "signal strength must be positive, got {d}");
    let AspectRatios { gamma, xi } = ar;
    let d2 = d * d;
    let theta = xi * d2 + (xi * gamma + gamma + xi) + (gamma + xi + 1.0) * gamma / d2;
    let cos2 = (xi - (1.0 + xi) * gamma / (d2 * d2)) / (xi + (1.0 + xi) * gamma / d2);
    Ok((theta, cos2))
}
