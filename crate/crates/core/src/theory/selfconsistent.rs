//! Numerical solution of the coupled equations
//!
//! ```text
//! m1c = γ ∫ x / (−z(1 + x·m2c)) dπ_Σ(x)
//! m2c = ξ ∫ x / (−z(1 + x·m1c)) dπ_B(x)
//! mc  =   ∫ 1 / (−z(1 + x·m2c)) dπ_Σ(x)
//! ```
//!
//! for arbitrary atomic `π_Σ` (noise covariance spectrum) and `π_B`
//! (spectrum of `SSᵀ`). Points close to the real axis are reached by
//! continuation in `Im z` from `Im z = 1`.

use num_complex::Complex64;

use crate::error::{ensure, Error, Result};
use crate::sketch::SpectralAtoms;

use super::{AspectRatios, Detection};

/// Transform values at one spectral point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StieltjesSolution {
    pub z: Complex64,
    pub m1c: Complex64,
    pub m2c: Complex64,
    pub mc: Complex64,
}

const TOL: f64 = 1e-13;
const MAX_FIXED_POINT: usize = 10_000;
const REAL_AXIS_ETA: f64 = 1e-9;
const EDGE_ETA: f64 = 1e-7;
const EDGE_IM_THRESHOLD: f64 = 1e-4;

struct System<'a> {
    z: Complex64,
    sigma: &'a SpectralAtoms,
    b: &'a SpectralAtoms,
    gamma: f64,
    xi: f64,
}

impl System<'_> {
    // `c ∫ x/(−z(1+x·m)) dπ` and its derivative in `m`.
    fn half(&self, atoms: &SpectralAtoms, c: f64, m: Complex64) -> (Complex64, Complex64) {
        let mut value = Complex64::new(0.0, 0.0);
        let mut slope = Complex64::new(0.0, 0.0);
        for &(x, w) in atoms.atoms() {
            let den = 1.0 + x * m;
            value += w * x / (-self.z * den);
            slope += w * x * x / (self.z * den * den);
        }
        (c * value, c * slope)
    }

    fn eval(&self, m1: Complex64, m2: Complex64) -> ([Complex64; 2], [Complex64; 2]) {
        let (a, da) = self.half(self.sigma, self.gamma, m2);
        let (b, db) = self.half(self.b, self.xi, m1);
        ([a, b], [da, db])
    }

    fn residual(&self, m1: Complex64, m2: Complex64) -> f64 {
        let ([a, b], _) = self.eval(m1, m2);
        (m1 - a).norm().max((m2 - b).norm())
    }

    fn newton(&self, mut m1: Complex64, mut m2: Complex64, upper: bool) -> Option<(Complex64, Complex64)> {
        for _ in 0..60 {
            let ([a, b], [da, db]) = self.eval(m1, m2);
            let f1 = m1 - a;
            let f2 = m2 - b;
            if f1.norm().max(f2.norm()) <= TOL {
                return Some((m1, m2));
            }
            // J = [[1, −A'], [−B', 1]]
            let det = 1.0 - da * db;
            if det.norm() < 1e-300 {
                return None;
            }
            let d1 = (f1 + da * f2) / det;
            let d2 = (f2 + db * f1) / det;
            m1 -= d1;
            m2 -= d2;
            if !(m1.is_finite() && m2.is_finite()) {
                return None;
            }
            if upper && (m1.im < -1e-12 || m2.im < -1e-12) {
                return None;
            }
        }
        (self.residual(m1, m2) <= TOL).then_some((m1, m2))
    }

    fn fixed_point(&self, mut m1: Complex64, mut m2: Complex64) -> Result<(Complex64, Complex64)> {
        let mut res = f64::INFINITY;
        for _ in 0..MAX_FIXED_POINT {
            let ([a, b], _) = self.eval(m1, m2);
            res = (m1 - a).norm().max((m2 - b).norm());
            if res <= TOL {
                return Ok((m1, m2));
            }
            m1 = 0.5 * m1 + 0.5 * a;
            m2 = 0.5 * m2 + 0.5 * b;
        }
        Err(Error::Numerical(format!(
            "self-consistent iteration did not converge at z = {}; last residual {res:.3e}",
            self.z
        )))
    }

    fn solve(&self, start: (Complex64, Complex64)) -> Result<(Complex64, Complex64)> {
        let upper = self.z.im > 0.0;
        if let Some(sol) = self.newton(start.0, start.1, upper) {
            return Ok(sol);
        }
        let (m1, m2) = self.fixed_point(start.0, start.1)?;
        Ok(self.newton(m1, m2, upper).unwrap_or((m1, m2)))
    }

    fn mc(&self, m2: Complex64) -> Complex64 {
        self.sigma
            .atoms()
            .iter()
            .map(|&(x, w)| w / (-self.z * (1.0 + x * m2)))
            .sum()
    }
}

fn check_inputs(z: Complex64, pi_sigma: &SpectralAtoms, pi_b: &SpectralAtoms) -> Result<()> {
    ensure!(z.is_finite(), Domain, "spectral point must be finite");
    ensure!(z.norm() > 0.0, Domain, "self-consistent equations are singular at z = 0");
    ensure!(pi_sigma.moment(1) > 0.0, Domain, "noise covariance spectrum is identically zero");
    ensure!(pi_b.moment(1) > 0.0, Domain, "sketch spectrum is identically zero");
    Ok(())
}

// Continuation from Im z = 1 down to `eta` at fixed Re z.
fn continue_to(re: f64, eta: f64, pi_sigma: &SpectralAtoms, pi_b: &SpectralAtoms, ar: AspectRatios) -> Result<(Complex64, Complex64)> {
    let mut current = Complex64::new(re, eta.max(1.0));
    let system = |z: Complex64| System {
        z,
        sigma: pi_sigma,
        b: pi_b,
        gamma: ar.gamma,
        xi: ar.xi,
    };
    let i = Complex64::new(0.0, 1.0);
    let mut sol = system(current).fixed_point(i, i)?;
    sol = system(current).newton(sol.0, sol.1, true).unwrap_or(sol);
    while current.im > eta {
        let next_eta = (current.im * 0.5).max(eta);
        current = Complex64::new(re, next_eta);
        sol = system(current).solve(sol)?;
    }
    Ok(sol)
}

/// Solves the self-consistent equations at `z`.
///
/// `Im z > 0` is reached by continuation. `Im z < 0` is answered by
/// reflection. Real `z` must lie outside the bulk: the solution is
/// continued down to `Im z = 1e-9`, certified to be essentially real there,
/// and finished with Newton steps on the real axis.
pub fn solve_self_consistent(
    z: Complex64,
    pi_sigma: &SpectralAtoms,
    pi_b: &SpectralAtoms,
    ar: AspectRatios,
) -> Result<StieltjesSolution> {
    check_inputs(z, pi_sigma, pi_b)?;
    if z.im < 0.0 {
        let s = solve_self_consistent(z.conj(), pi_sigma, pi_b, ar)?;
        return Ok(StieltjesSolution {
            z,
            m1c: s.m1c.conj(),
            m2c: s.m2c.conj(),
            mc: s.mc.conj(),
        });
    }
    let system = System {
        z,
        sigma: pi_sigma,
        b: pi_b,
        gamma: ar.gamma,
        xi: ar.xi,
    };
    let (m1c, m2c) = if z.im > 0.0 {
        continue_to(z.re, z.im, pi_sigma, pi_b, ar)?
    } else {
        let (a, b) = continue_to(z.re, REAL_AXIS_ETA, pi_sigma, pi_b, ar)?;
        ensure!(
            a.im.abs().max(b.im.abs()) <= EDGE_IM_THRESHOLD,
            Domain,
            "z = {} is inside the bulk (Im m1c = {:.3e} near the axis)",
            z.re,
            a.im
        );
        let start = (Complex64::new(a.re, 0.0), Complex64::new(b.re, 0.0));
        system.newton(start.0, start.1, false).ok_or_else(|| {
            Error::Numerical(format!("real-axis Newton step failed at z = {}", z.re))
        })?
    };
    Ok(StieltjesSolution {
        z,
        m1c,
        m2c,
        mc: system.mc(m2c),
    })
}

/// Right edge of the noise bulk for general `(π_Σ, π_B)`.
///
/// Scans down from a point safely outside the spectrum until
/// `Im m_c(x + 1e-7 i)` exceeds `1e-4`, then bisects.
pub fn bulk_edge_general(pi_sigma: &SpectralAtoms, pi_b: &SpectralAtoms, ar: AspectRatios) -> Result<f64> {
    check_inputs(Complex64::new(1.0, 0.0), pi_sigma, pi_b)?;
    let inside = |x: f64| -> Result<bool> {
        let z = Complex64::new(x, EDGE_ETA);
        let (_, m2) = continue_to(x, EDGE_ETA, pi_sigma, pi_b, ar)?;
        let system = System {
            z,
            sigma: pi_sigma,
            b: pi_b,
            gamma: ar.gamma,
            xi: ar.xi,
        };
        Ok(system.mc(m2).im > EDGE_IM_THRESHOLD)
    };
    let top = 1.1 * pi_sigma.max_value() * pi_b.max_value() * (1.0 + ar.gamma.sqrt()).powi(2) + 0.1;
    let step = top / 400.0;
    let mut hi = top;
    let mut lo = top - step;
    while !inside(lo)? {
        hi = lo;
        lo -= step;
        if lo <= 0.0 {
            return Err(Error::Numerical("no bulk found above zero during edge scan".into()));
        }
    }
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        if inside(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solves `m₂c(x) = −1/(1+d²)` by bisection on `bracket = (lo, hi)`,
/// where `m2c_eval` is increasing. The upper end is doubled while the
/// root is not yet bracketed. `Below` when `m₂c(lo)` already exceeds the
/// target (no outlier).
pub fn find_spike_master<F>(d: f64, m2c_eval: F, bracket: (f64, f64)) -> Result<Detection>
where
    F: Fn(f64) -> Result<f64>,
{
    ensure!(d > 0.0, Domain, "signal strength must be positive, got {d}");
    let (mut lo, mut hi) = bracket;
    ensure!(lo < hi, Usage, "empty bracket ({lo}, {hi})");
    let target = -1.0 / (1.0 + d * d);
    let f = |x: f64| m2c_eval(x).map(|m| m - target);
    if f(lo)? >= 0.0 {
        return Ok(Detection::Below);
    }
    let mut doublings = 0;
    while f(hi)? < 0.0 {
        lo = hi;
        hi *= 2.0;
        doublings += 1;
        if doublings > 200 {
            return Ok(Detection::Below);
        }
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Detection::Above(0.5 * (lo + hi)))
}
