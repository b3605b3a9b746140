//! Limiting predictions for sketched spiked models.
//!
//! Every function here is pure. Aspect ratios are always the finite-sample
//! values `γ = p/n` and `ξ = r/n`.

mod iid;
mod large;
mod mp;
mod orthogonal;
mod selfconsistent;

use std::fmt;
use std::str::FromStr;

pub use iid::{alpha_iid, bulk_edge_iid, g1c_iid, g1c_iid_prime, predict_iid, predict_iid_large, solve_cubic_m1c, IidEdge};
pub use large::{cov_summary, predict_large_signal, CovSummary, LargeSignalPrediction};
pub use mp::{g1s, g2s, m1s, m1s_prime, m2s, m2s_prime, mp_edges, mp_transforms, MpTransforms};
pub use orthogonal::{
    effective_xi_countsketch, g2c_closed, m2c_at_edge, m2c_closed, m2c_closed_real, predict_orthogonal_family,
};
pub use selfconsistent::{bulk_edge_general, find_spike_master, solve_self_consistent, StieltjesSolution};

use crate::error::{ensure, Error, Result};
use crate::sketch::SketchMethod;

/// `γ = p/n` and `ξ = r/n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AspectRatios {
    pub gamma: f64,
    pub xi: f64,
}

impl AspectRatios {
    pub fn new(gamma: f64, xi: f64) -> Result<Self> {
        ensure!(gamma.is_finite() && gamma > 0.0, Domain, "gamma must be positive, got {gamma}");
        ensure!(xi.is_finite() && xi > 0.0 && xi <= 1.0, Domain, "xi must lie in (0, 1], got {xi}");
        Ok(Self { gamma, xi })
    }

    pub fn from_dims(n: usize, p: usize, r: usize) -> Result<Self> {
        ensure!(n > 0, Domain, "n must be positive");
        Self::new(p as f64 / n as f64, r as f64 / n as f64)
    }

    /// Same `γ`, different `ξ`.
    pub fn with_xi(self, xi: f64) -> Result<Self> {
        Self::new(self.gamma, xi)
    }

    /// Right edge `(√γ + √ξ)²` of the orthogonal-family bulk.
    pub fn lambda_plus_orthogonal(&self) -> f64 {
        (self.gamma.sqrt() + self.xi.sqrt()).powi(2)
    }
}

/// Outcome of a map that is only defined above a detection threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detection {
    Above(f64),
    Below,
}

impl Detection {
    pub fn value(self) -> Option<f64> {
        match self {
            Detection::Above(v) => Some(v),
            Detection::Below => None,
        }
    }

    pub fn is_above(self) -> bool {
        matches!(self, Detection::Above(_))
    }

    /// The value, or zero below the threshold.
    pub fn value_or_zero(self) -> f64 {
        self.value().unwrap_or(0.0)
    }
}

/// Limiting behaviour of one sketched spike.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpikePrediction {
    pub d: f64,
    /// Outlier location; equals `lambda_plus` below threshold.
    pub theta: f64,
    /// Squared overlap `|⟨uᵢ, ξ̃ᵢ⟩|²`; zero below threshold.
    pub cos2: f64,
    pub above_threshold: bool,
    pub lambda_plus: f64,
    pub d_critical: f64,
}

impl SpikePrediction {
    pub(crate) fn below(d: f64, lambda_plus: f64, d_critical: f64) -> Self {
        Self {
            d,
            theta: lambda_plus,
            cos2: 0.0,
            above_threshold: false,
            lambda_plus,
            d_critical,
        }
    }
}

/// `λ(ℓ, γ) = (1+ℓ)(γ/ℓ + 1)`: location of an unsketched sample spike.
pub fn classic_spike_forward(ell: f64, gamma: f64) -> Result<f64> {
    ensure!(ell > 0.0 && ell.is_finite(), Domain, "spike strength must be positive, got {ell}");
    ensure!(gamma > 0.0 && gamma.is_finite(), Domain, "gamma must be positive, got {gamma}");
    Ok((1.0 + ell) * (gamma / ell + 1.0))
}

/// `c²(ℓ, γ) = (1 − γ/ℓ²)/(1 + γ/ℓ)`, or `Below` when `ℓ ≤ √γ`.
pub fn classic_cos2_forward(ell: f64, gamma: f64) -> Detection {
    if !(ell > gamma.sqrt()) {
        return Detection::Below;
    }
    Detection::Above((1.0 - gamma / (ell * ell)) / (1.0 + gamma / ell))
}

/// Inverse of `ℓ ↦ (1+ℓ)(γ/ℓ + ξ)`: the larger root of
/// `ξℓ² + (ξ + γ − λ)ℓ + γ = 0`. `Below` at or under the bulk edge.
pub fn spike_inverse(lambda_obs: f64, ar: AspectRatios) -> Detection {
    let AspectRatios { gamma, xi } = ar;
    if !(lambda_obs > ar.lambda_plus_orthogonal()) {
        return Detection::Below;
    }
    let b = xi + gamma - lambda_obs;
    let disc = (b * b - 4.0 * xi * gamma).max(0.0);
    // b < 0 above the edge, so this form avoids cancellation
    Detection::Above((-b + disc.sqrt()) / (2.0 * xi))
}

/// Loss for the optimal singular value shrinker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShrinkLoss {
    Operator,
    Frobenius,
}

impl FromStr for ShrinkLoss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "operator" | "op" => Ok(ShrinkLoss::Operator),
            "frobenius" | "fro" => Ok(ShrinkLoss::Frobenius),
            other => Err(Error::Usage(format!(
                "unknown loss '{other}'; expected operator or frobenius"
            ))),
        }
    }
}

impl fmt::Display for ShrinkLoss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ShrinkLoss::Operator => "operator",
            ShrinkLoss::Frobenius => "frobenius",
        })
    }
}

/// Optimal shrinker for a sketched singular value `x`.
///
/// Uses the `(γ, ξ)` pair of the orthogonal-family forward map for both
/// the spike inverse and the overlap. Values at or below the bulk edge
/// return `Below`; callers report them as zero.
pub fn shrinker(x: f64, ar: AspectRatios, loss: ShrinkLoss) -> Detection {
    let Detection::Above(ell) = spike_inverse(x * x, ar) else {
        return Detection::Below;
    };
    match loss {
        ShrinkLoss::Operator => Detection::Above(ell),
        ShrinkLoss::Frobenius => {
            let c2 = orthogonal::cos2_orthogonal(ell, ar).unwrap_or(0.0);
            Detection::Above(ell * c2 + (1.0 - c2))
        }
    }
}

/// Which family of formulas to attach to a sketch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Predictor {
    #[default]
    Auto,
    OrthogonalFamily,
    Iid,
    CountSketch,
    LargeSignal,
    None,
}

impl Predictor {
    /// Resolves `Auto` for a sketch method. Non-identity covariances route
    /// every method that has large-signal theory to `LargeSignal`.
    pub fn resolve(self, method: SketchMethod, identity_sigma: bool) -> Predictor {
        if self != Predictor::Auto {
            return self;
        }
        use SketchMethod::*;
        match method {
            Leverage | Osnap => Predictor::None,
            Iid if identity_sigma => Predictor::Iid,
            Iid => Predictor::None,
            _ if !identity_sigma => Predictor::LargeSignal,
            CountSketch | CountSketchNormalized => Predictor::CountSketch,
            _ => Predictor::OrthogonalFamily,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Predictor::Auto => "auto",
            Predictor::OrthogonalFamily => "orthogonal_family",
            Predictor::Iid => "iid",
            Predictor::CountSketch => "countsketch",
            Predictor::LargeSignal => "large_signal",
            Predictor::None => "none",
        }
    }
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Predictor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Predictor::Auto,
            Predictor::OrthogonalFamily,
            Predictor::Iid,
            Predictor::CountSketch,
            Predictor::LargeSignal,
            Predictor::None,
        ]
        .into_iter()
        .find(|p| p.name() == s.trim())
        .ok_or_else(|| {
            Error::Usage(format!(
                "unknown predictor '{s}'; expected auto, orthogonal_family, iid, countsketch, large_signal or none"
            ))
        })
    }
}

/// Predictions for all spikes `d` (descending) under a resolved predictor.
///
/// `ar.xi` is the plain `r/n`; the CountSketch predictors substitute `ξ̂`
/// themselves. `cov` is required by `LargeSignal` and ignored otherwise.
/// Returns an empty list for `Predictor::None`.
pub fn predict_all(
    predictor: Predictor,
    d: &[f64],
    ar: AspectRatios,
    cov: Option<&CovSummary>,
) -> Result<Vec<SpikePrediction>> {
    match predictor {
        Predictor::Auto => Err(Error::Usage("resolve the auto predictor against a sketch method first".into())),
        Predictor::None => Ok(Vec::new()),
        Predictor::OrthogonalFamily => d.iter().map(|&di| predict_orthogonal_family(di, ar)).collect(),
        Predictor::CountSketch => {
            let ar_hat = ar.with_xi(effective_xi_countsketch(ar.xi))?;
            d.iter().map(|&di| predict_orthogonal_family(di, ar_hat)).collect()
        }
        Predictor::Iid => d.iter().map(|&di| predict_iid(di, ar)).collect(),
        Predictor::LargeSignal => {
            let identity;
            let cov = match cov {
                Some(c) => c,
                None => {
                    identity = CovSummary::identity(d.len());
                    &identity
                }
            };
            let edge = ar.lambda_plus_orthogonal();
            let d_crit = (ar.gamma / ar.xi).powf(0.25);
            (0..d.len())
                .map(|i| {
                    let p = predict_large_signal(d, i, cov, ar)?;
                    Ok(SpikePrediction {
                        d: d[i],
                        theta: p.theta,
                        cos2: p.cos2.clamp(0.0, 1.0),
                        above_threshold: d[i] > d_crit,
                        lambda_plus: edge,
                        d_critical: d_crit,
                    })
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classic_forward_examples() {
        assert!((classic_spike_forward(0.5, 0.25).unwrap() - 2.25).abs() < 1e-15);
        assert!((classic_spike_forward(4.0, 0.5).unwrap() - 5.625).abs() < 1e-15);
        let big = classic_spike_forward(1e6, 0.5).unwrap() / 1e6;
        assert!((1.0..=1.0 + 1e-5).contains(&big));
        assert!(matches!(classic_spike_forward(0.0, 0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn classic_cos2_examples() {
        assert_eq!(classic_cos2_forward(0.5, 0.25), Detection::Below);
        let c = classic_cos2_forward(4.0, 0.5).value().unwrap();
        assert!((c - 0.96875 / 1.125).abs() < 1e-15);
        assert!((c - 0.861111).abs() < 1e-6);
        assert!(classic_cos2_forward(1e6, 0.5).value().unwrap() > 1.0 - 1e-5);
    }

    #[test]
    fn spike_inverse_examples() {
        let ar = AspectRatios::new(0.2, 0.1).unwrap();
        assert!((spike_inverse(2.808, ar).value().unwrap() - 25.0).abs() < 1e-10);
        let classic = AspectRatios::new(0.5, 1.0).unwrap();
        assert!((spike_inverse(5.625, classic).value().unwrap() - 4.0).abs() < 1e-12);
        assert_eq!(spike_inverse(ar.lambda_plus_orthogonal(), ar), Detection::Below);
    }

    #[test]
    fn shrinker_examples() {
        let ar = AspectRatios::new(0.2, 0.1).unwrap();
        let edge = ar.lambda_plus_orthogonal();
        assert_eq!(shrinker(edge.sqrt(), ar, ShrinkLoss::Operator), Detection::Below);
        let lam: f64 = (1.0 + 9.0) * (0.2 / 9.0 + 0.1);
        let op = shrinker(lam.sqrt(), ar, ShrinkLoss::Operator).value().unwrap();
        assert!((op - 9.0).abs() < 1e-8);
        let fr = shrinker(lam.sqrt(), ar, ShrinkLoss::Frobenius).value().unwrap();
        let c2 = predict_orthogonal_family(3.0, ar).unwrap().cos2;
        assert!(fr >= 1.0 - c2 && fr <= 9.0);
        assert!((fr - (9.0 * c2 + 1.0 - c2)).abs() < 1e-8);
    }

    #[test]
    fn auto_predictor_mapping() {
        use SketchMethod::*;
        assert_eq!(Predictor::Auto.resolve(Haar, true), Predictor::OrthogonalFamily);
        assert_eq!(Predictor::Auto.resolve(Dft, true), Predictor::OrthogonalFamily);
        assert_eq!(Predictor::Auto.resolve(CountSketch, true), Predictor::CountSketch);
        assert_eq!(Predictor::Auto.resolve(Iid, true), Predictor::Iid);
        assert_eq!(Predictor::Auto.resolve(Osnap, true), Predictor::None);
        assert_eq!(Predictor::Auto.resolve(Srht, false), Predictor::LargeSignal);
        assert_eq!(Predictor::Iid.resolve(Osnap, true), Predictor::Iid);
    }

    #[test]
    fn countsketch_predictor_uses_xi_hat() {
        let ar = AspectRatios::from_dims(4000, 800, 2000).unwrap();
        let p = predict_all(Predictor::CountSketch, &[5.0], ar, None).unwrap();
        let hat = ar.with_xi(0.5 * (1.0 - (-2.0f64).exp())).unwrap();
        let direct = predict_orthogonal_family(5.0, hat).unwrap();
        assert_eq!(p[0], direct);
    }
}
