//! Spiked data `Y = Σᵢ dᵢ wᵢuᵢᵀ + XΣ^{1/2}`.

mod sigma;

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure, Error, Result};
use crate::numerics::{haar_orthonormal_with, max_abs_diff, DenseMatrix, RngStream};
use crate::theory::CovSummary;

pub use sigma::{make_sigma, Covariance, SigmaModel};

/// Law of the noise entries; both have variance `1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseLaw {
    #[default]
    Gaussian,
    /// `Unif(−√(3/n), √(3/n))`.
    Uniform,
}

impl NoiseLaw {
    pub fn name(self) -> &'static str {
        match self {
            NoiseLaw::Gaussian => "gaussian",
            NoiseLaw::Uniform => "uniform",
        }
    }
}

impl FromStr for NoiseLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(NoiseLaw::Gaussian),
            "uniform" => Ok(NoiseLaw::Uniform),
            other => Err(Error::Usage(format!("unknown noise law '{other}'; expected gaussian or uniform"))),
        }
    }
}

impl fmt::Display for NoiseLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the signal directions `W` (n×k) and `U` (p×k) are drawn.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum SignalBasis {
    #[default]
    Haar,
    /// Each `wᵢ` is a distinct standard basis vector; `U` is Haar. Useful
    /// for showing how row sampling can miss a spike entirely.
    Localized,
    Given { w: DenseMatrix, u: DenseMatrix },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpikedModelSpec {
    pub n: usize,
    pub p: usize,
    pub d: Vec<f64>,
    pub noise: NoiseLaw,
    pub sigma: SigmaModel,
    pub basis: SignalBasis,
    pub delocalization_check: bool,
}

impl SpikedModelSpec {
    /// Gaussian noise, identity covariance, Haar directions.
    pub fn new(n: usize, p: usize, d: Vec<f64>) -> Self {
        Self {
            n,
            p,
            d,
            noise: NoiseLaw::Gaussian,
            sigma: SigmaModel::Identity,
            basis: SignalBasis::Haar,
            delocalization_check: false,
        }
    }

    pub fn with_noise(mut self, noise: NoiseLaw) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_sigma(mut self, sigma: SigmaModel) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_basis(mut self, basis: SignalBasis) -> Self {
        self.basis = basis;
        self
    }

    pub fn with_delocalization_check(mut self, on: bool) -> Self {
        self.delocalization_check = on;
        self
    }

    pub fn k(&self) -> usize {
        self.d.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.k();
        ensure!(self.n >= 1 && self.p >= 1, Usage, "n and p must be positive");
        ensure!(k >= 1, Usage, "at least one spike is required (use the noise-only path otherwise)");
        ensure!(k <= self.n.min(self.p), Usage, "k = {k} exceeds min(n, p) = {}", self.n.min(self.p));
        ensure!(
            self.d.iter().all(|x| x.is_finite() && *x > 0.0),
            Usage,
            "signal strengths must be positive and finite"
        );
        ensure!(
            self.d.windows(2).all(|w| w[0] > w[1]),
            Usage,
            "signal strengths must be strictly decreasing"
        );
        if let SigmaModel::Toeplitz(q) = self.sigma {
            ensure!(q > 0.0 && q < 1.0, Usage, "toeplitz parameter must lie in (0, 1)");
        }
        if let SignalBasis::Given { w, u } = &self.basis {
            ensure!(w.shape() == (self.n, k), Dimension, "W is {:?}, expected ({}, {k})", w.shape(), self.n);
            ensure!(u.shape() == (self.p, k), Dimension, "U is {:?}, expected ({}, {k})", u.shape(), self.p);
            check_orthonormal(w, "W")?;
            check_orthonormal(u, "U")?;
        }
        Ok(())
    }
}

fn check_orthonormal(m: &DenseMatrix, name: &str) -> Result<()> {
    let k = m.ncols();
    let err = max_abs_diff(&m.tr_mul(m), &DenseMatrix::identity(k, k));
    ensure!(err <= 1e-10, Data, "{name} is not orthonormal (max |{name}ᵀ{name} − I| = {err:.3e})");
    Ok(())
}

#[derive(Debug, Clone)]
pub struct SpikedDataset {
    pub y: DenseMatrix,
    pub w: DenseMatrix,
    pub u: DenseMatrix,
    /// `XΣ^{1/2}`.
    pub noise: DenseMatrix,
    pub sigma: Covariance,
    /// `maxᵢ ‖wᵢ‖∞`, when requested.
    pub delocalization: Option<f64>,
}

impl SpikedDataset {
    pub fn cov_summary(&self) -> Result<CovSummary> {
        self.sigma.summary(&self.u)
    }
}

// sub-stream labels
const NOISE: u64 = 1;
const LEFT: u64 = 2;
const RIGHT: u64 = 3;

/// A validated spec with its covariance (and `Σ^{1/2}`) built once.
#[derive(Debug, Clone)]
pub struct SpikedModel {
    spec: SpikedModelSpec,
    cov: Covariance,
}

impl SpikedModel {
    pub fn new(spec: SpikedModelSpec) -> Result<Self> {
        spec.validate()?;
        let cov = make_sigma(&spec.sigma, spec.p)?;
        Ok(Self { spec, cov })
    }

    pub fn spec(&self) -> &SpikedModelSpec {
        &self.spec
    }

    pub fn covariance(&self) -> &Covariance {
        &self.cov
    }

    pub fn generate(&self, stream: &RngStream) -> Result<SpikedDataset> {
        let SpikedModelSpec { n, p, ref d, .. } = self.spec;
        let k = d.len();
        let (w, u) = match &self.spec.basis {
            SignalBasis::Haar => (
                haar_orthonormal_with(k, n, &mut stream.derive(LEFT).rng())?.transpose(),
                haar_orthonormal_with(k, p, &mut stream.derive(RIGHT).rng())?.transpose(),
            ),
            SignalBasis::Localized => {
                let rows = index::sample(&mut stream.derive(LEFT).rng(), n, k);
                let mut w = DenseMatrix::zeros(n, k);
                for (j, i) in rows.iter().enumerate() {
                    w[(i, j)] = 1.0;
                }
                (w, haar_orthonormal_with(k, p, &mut stream.derive(RIGHT).rng())?.transpose())
            }
            SignalBasis::Given { w, u } => (w.clone(), u.clone()),
        };
        let noise = generate_noise(n, p, self.spec.noise, &self.cov, &stream.derive(NOISE))?;
        let mut wd = w.clone();
        for (j, dj) in d.iter().enumerate() {
            wd.column_mut(j).scale_mut(*dj);
        }
        let mut y = noise.clone();
        y.gemm(1.0, &wd, &u.transpose(), 1.0);
        let delocalization = self.spec.delocalization_check.then(|| w.amax());
        Ok(SpikedDataset {
            y,
            w,
            u,
            noise,
            sigma: self.cov.clone(),
            delocalization,
        })
    }
}

/// One-shot [`SpikedModel::generate`].
pub fn generate(spec: &SpikedModelSpec, stream: &RngStream) -> Result<SpikedDataset> {
    SpikedModel::new(spec.clone())?.generate(stream)
}

/// `XΣ^{1/2}` alone: `X` is `n x p` with iid entries of variance `1/n`.
pub fn generate_noise(n: usize, p: usize, law: NoiseLaw, cov: &Covariance, stream: &RngStream) -> Result<DenseMatrix> {
    ensure!(n >= 1 && p >= 1, Usage, "n and p must be positive");
    let mut rng = stream.rng();
    let x = match law {
        NoiseLaw::Gaussian => {
            let s = 1.0 / (n as f64).sqrt();
            DenseMatrix::from_fn(n, p, |_, _| s * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng))
        }
        NoiseLaw::Uniform => {
            let a = (3.0 / n as f64).sqrt();
            let unif = rand_distr::Uniform::new(-a, a).expect("non-degenerate interval");
            DenseMatrix::from_fn(n, p, |_, _| unif.sample(&mut rng))
        }
    };
    cov.apply_sqrt_right(x)
}
