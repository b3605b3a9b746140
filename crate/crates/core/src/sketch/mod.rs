//! Sketching operators: construction, application, and the spectral
//! distribution of `SSᵀ`.

mod atoms;
mod dft;
mod operator;

use std::fmt;
use std::str::FromStr;

pub use atoms::SpectralAtoms;
pub use operator::{
    apply_sketch, bucket_counts, build_data_sketch, build_sketch, operator_gram_esd, SketchOperator,
};

use crate::error::{Error, Result};

/// Sketch family. `Display`/`FromStr` use the canonical CLI names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SketchMethod {
    Haar,
    Iid,
    UniformSample,
    Srht,
    Dft,
    CountSketch,
    CountSketchNormalized,
    Leverage,
    Osnap,
}

impl SketchMethod {
    pub const ALL: [SketchMethod; 9] = [
        SketchMethod::Haar,
        SketchMethod::Iid,
        SketchMethod::UniformSample,
        SketchMethod::Srht,
        SketchMethod::Dft,
        SketchMethod::CountSketch,
        SketchMethod::CountSketchNormalized,
        SketchMethod::Leverage,
        SketchMethod::Osnap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SketchMethod::Haar => "haar",
            SketchMethod::Iid => "iid",
            SketchMethod::UniformSample => "uniform_sample",
            SketchMethod::Srht => "srht",
            SketchMethod::Dft => "dft",
            SketchMethod::CountSketch => "countsketch",
            SketchMethod::CountSketchNormalized => "countsketch_normalized",
            SketchMethod::Leverage => "leverage",
            SketchMethod::Osnap => "osnap",
        }
    }

    pub fn canonical_names() -> String {
        Self::ALL.iter().map(|m| m.name()).collect::<Vec<_>>().join(", ")
    }

    pub fn is_countsketch(self) -> bool {
        matches!(self, SketchMethod::CountSketch | SketchMethod::CountSketchNormalized)
    }
}

impl fmt::Display for SketchMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SketchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| {
                Error::Usage(format!(
                    "unknown sketch method '{s}'; expected one of: {}",
                    Self::canonical_names()
                ))
            })
    }
}

/// Entry law of the iid sketch; both have mean 0 and variance `1/n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum IidLaw {
    #[default]
    Gaussian,
    Rademacher,
}

impl FromStr for IidLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(IidLaw::Gaussian),
            "rademacher" => Ok(IidLaw::Rademacher),
            other => Err(Error::Usage(format!(
                "unknown iid law '{other}'; expected gaussian or rademacher"
            ))),
        }
    }
}

/// How sampling-type sketches (uniform, SRHT, DFT) pick their rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowSampling {
    /// Keep each row independently with probability `r/n`; the realized
    /// row count varies around `r`.
    #[default]
    Bernoulli,
    /// Keep exactly `r` distinct rows chosen uniformly.
    Fixed,
}

impl FromStr for RowSampling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "bernoulli" => Ok(RowSampling::Bernoulli),
            "fixed" => Ok(RowSampling::Fixed),
            other => Err(Error::Usage(format!(
                "unknown sampling scheme '{other}'; expected bernoulli or fixed"
            ))),
        }
    }
}

/// Which sketch to draw and its target size.
#[derive(Debug, Clone, PartialEq)]
pub struct SketchSpec {
    pub method: SketchMethod,
    /// Target number of rows.
    pub r: usize,
    pub iid_law: IidLaw,
    /// Nonzeros per column for OSNAP.
    pub osnap_s: usize,
    pub sampling: RowSampling,
    /// Uniform sampling only: multiply each kept row by an independent
    /// random sign (the variant that survives column centering).
    pub random_signs: bool,
}

impl SketchSpec {
    pub const DEFAULT_OSNAP_S: usize = 4;

    pub fn new(method: SketchMethod, r: usize) -> Self {
        Self {
            method,
            r,
            iid_law: IidLaw::default(),
            osnap_s: Self::DEFAULT_OSNAP_S,
            sampling: RowSampling::default(),
            random_signs: false,
        }
    }

    pub fn with_iid_law(mut self, law: IidLaw) -> Self {
        self.iid_law = law;
        self
    }

    pub fn with_osnap_s(mut self, s: usize) -> Self {
        self.osnap_s = s;
        self
    }

    pub fn with_sampling(mut self, sampling: RowSampling) -> Self {
        self.sampling = sampling;
        self
    }

    pub fn with_random_signs(mut self, on: bool) -> Self {
        self.random_signs = on;
        self
    }

    /// Checks the spec against a sample count `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.r == 0 || self.r > n {
            return Err(Error::Dimension(format!(
                "sketch size r = {} must satisfy 1 <= r <= n = {n}",
                self.r
            )));
        }
        if self.method == SketchMethod::Osnap && (self.osnap_s == 0 || self.osnap_s > self.r) {
            return Err(Error::Usage(format!(
                "osnap needs 1 <= s <= r, got s = {} with r = {}",
                self.osnap_s, self.r
            )));
        }
        Ok(())
    }
}
