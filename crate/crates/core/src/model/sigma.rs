use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{ensure, Error, Result};
use crate::numerics::DenseMatrix;
use crate::sketch::SpectralAtoms;
use crate::theory::CovSummary;

/// Noise covariance family. String form (CLI and config files):
/// `identity`, `toeplitz:0.9`, `step:5x1,2x249,1x250` (value x count) or
/// `file:<path>` (a square CSV matrix).
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaModel {
    Identity,
    Toeplitz(f64),
    /// Diagonal spectrum given as `(value, multiplicity)` blocks.
    Step(Vec<(f64, usize)>),
    File(PathBuf),
    Explicit(DenseMatrix),
}

impl SigmaModel {
    pub fn is_identity(&self) -> bool {
        matches!(self, SigmaModel::Identity)
    }
}

impl FromStr for SigmaModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (head, arg) = s.split_once(':').unwrap_or((s, ""));
        match head {
            "identity" if arg.is_empty() => Ok(SigmaModel::Identity),
            "toeplitz" => {
                let q: f64 = arg
                    .trim()
                    .parse()
                    .map_err(|_| Error::Usage(format!("toeplitz needs a number, got '{arg}'")))?;
                ensure!(q > 0.0 && q < 1.0, Usage, "toeplitz parameter must lie in (0, 1), got {q}");
                Ok(SigmaModel::Toeplitz(q))
            }
            "step" => {
                let mut blocks = Vec::new();
                for part in arg.split(',') {
                    let (v, c) = part
                        .trim()
                        .split_once('x')
                        .ok_or_else(|| Error::Usage(format!("step block '{part}' is not of the form <value>x<count>")))?;
                    let v: f64 = v
                        .parse()
                        .map_err(|_| Error::Usage(format!("bad step value '{v}'")))?;
                    let c: usize = c
                        .parse()
                        .map_err(|_| Error::Usage(format!("bad step count '{c}'")))?;
                    ensure!(v >= 0.0 && v.is_finite(), Usage, "step values must be finite and >= 0");
                    ensure!(c > 0, Usage, "step counts must be positive");
                    blocks.push((v, c));
                }
                Ok(SigmaModel::Step(blocks))
            }
            "file" if !arg.is_empty() => Ok(SigmaModel::File(PathBuf::from(arg))),
            _ => Err(Error::Usage(format!(
                "unknown sigma model '{s}'; expected identity, toeplitz:<q>, step:<v>x<count>,... or file:<path>"
            ))),
        }
    }
}

impl fmt::Display for SigmaModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SigmaModel::Identity => f.write_str("identity"),
            SigmaModel::Toeplitz(q) => write!(f, "toeplitz:{q}"),
            SigmaModel::Step(blocks) => {
                let parts: Vec<String> = blocks.iter().map(|(v, c)| format!("{v}x{c}")).collect();
                write!(f, "step:{}", parts.join(","))
            }
            SigmaModel::File(p) => write!(f, "file:{}", p.display()),
            SigmaModel::Explicit(m) => write!(f, "explicit:{}x{}", m.nrows(), m.ncols()),
        }
    }
}

/// A realized covariance with its symmetric square root.
#[derive(Debug, Clone)]
pub struct Covariance {
    p: usize,
    kind: CovKind,
}

#[derive(Debug, Clone)]
enum CovKind {
    Identity,
    Diagonal(Vec<f64>),
    Dense {
        sigma: DenseMatrix,
        sqrt: DenseMatrix,
        eigenvalues: Vec<f64>,
    },
}

/// Builds the `p x p` covariance for a model.
///
/// Step spectra are kept diagonal. Against Haar signal directions a
/// rotated `OᵀΛO` gives the same distribution of everything we measure,
/// so the rotation is skipped.
pub fn make_sigma(model: &SigmaModel, p: usize) -> Result<Covariance> {
    ensure!(p >= 1, Dimension, "covariance dimension must be >= 1");
    let kind = match model {
        SigmaModel::Identity => CovKind::Identity,
        SigmaModel::Toeplitz(q) => {
            ensure!(*q > 0.0 && *q < 1.0, Usage, "toeplitz parameter must lie in (0, 1)");
            let sigma = DenseMatrix::from_fn(p, p, |i, j| q.powi(i.abs_diff(j) as i32));
            dense(sigma)?
        }
        SigmaModel::Step(blocks) => {
            let total: usize = blocks.iter().map(|b| b.1).sum();
            ensure!(total == p, Dimension, "step spectrum covers {total} coordinates, p = {p}");
            let values = blocks
                .iter()
                .flat_map(|&(v, c)| std::iter::repeat_n(v, c))
                .collect();
            CovKind::Diagonal(values)
        }
        SigmaModel::File(path) => {
            let raw = crate::fielddata::load_matrix(path, crate::fielddata::FileFormat::from_path(path), "NA")?;
            ensure!(
                raw.missing_count() == 0,
                Data,
                "covariance file {} has missing entries",
                path.display()
            );
            let m = raw.values;
            ensure!(m.shape() == (p, p), Dimension, "covariance file is {:?}, expected {p}x{p}", m.shape());
            dense(m)?
        }
        SigmaModel::Explicit(m) => {
            ensure!(m.shape() == (p, p), Dimension, "covariance is {:?}, expected {p}x{p}", m.shape());
            dense(m.clone())?
        }
    };
    Ok(Covariance { p, kind })
}

fn dense(sigma: DenseMatrix) -> Result<CovKind> {
    let p = sigma.nrows();
    ensure!(sigma.iter().all(|v| v.is_finite()), Data, "covariance has non-finite entries");
    let scale = sigma.amax().max(1.0);
    for i in 0..p {
        for j in 0..i {
            ensure!(
                (sigma[(i, j)] - sigma[(j, i)]).abs() <= 1e-10 * scale,
                Data,
                "covariance is not symmetric at ({i}, {j})"
            );
        }
    }
    let eig = sigma.clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    ensure!(min >= -1e-10 * scale, Data, "covariance is not positive semidefinite (eigenvalue {min:.3e})");
    let clamped: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(0.0)).collect();
    let root = DVector::from_iterator(p, clamped.iter().map(|v| v.sqrt()));
    let v = &eig.eigenvectors;
    let sqrt = v * DenseMatrix::from_diagonal(&root) * v.transpose();
    let sqrt = (&sqrt + sqrt.transpose()) * 0.5;
    Ok(CovKind::Dense {
        sigma,
        sqrt,
        eigenvalues: clamped,
    })
}

impl Covariance {
    pub fn identity(p: usize) -> Self {
        Self {
            p,
            kind: CovKind::Identity,
        }
    }

    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn is_identity(&self) -> bool {
        matches!(self.kind, CovKind::Identity)
    }

    pub fn matrix(&self) -> DenseMatrix {
        match &self.kind {
            CovKind::Identity => DenseMatrix::identity(self.p, self.p),
            CovKind::Diagonal(v) => DenseMatrix::from_diagonal(&DVector::from_column_slice(v)),
            CovKind::Dense { sigma, .. } => sigma.clone(),
        }
    }

    pub fn sqrt_matrix(&self) -> DenseMatrix {
        match &self.kind {
            CovKind::Identity => DenseMatrix::identity(self.p, self.p),
            CovKind::Diagonal(v) => DenseMatrix::from_diagonal(&DVector::from_iterator(v.len(), v.iter().map(|x| x.sqrt()))),
            CovKind::Dense { sqrt, .. } => sqrt.clone(),
        }
    }

    /// `X Σ^{1/2}`.
    pub fn apply_sqrt_right(&self, x: DenseMatrix) -> Result<DenseMatrix> {
        ensure!(x.ncols() == self.p, Dimension, "noise has {} columns, covariance is {}x{}", x.ncols(), self.p, self.p);
        Ok(match &self.kind {
            CovKind::Identity => x,
            CovKind::Diagonal(v) => {
                let mut x = x;
                for (j, s) in v.iter().enumerate() {
                    x.column_mut(j).scale_mut(s.sqrt());
                }
                x
            }
            CovKind::Dense { sqrt, .. } => x * sqrt,
        })
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        match &self.kind {
            CovKind::Identity => vec![1.0; self.p],
            CovKind::Diagonal(v) => v.clone(),
            CovKind::Dense { eigenvalues, .. } => eigenvalues.clone(),
        }
    }

    /// Spectral distribution `π_Σ`.
    pub fn spectrum(&self) -> SpectralAtoms {
        match &self.kind {
            CovKind::Identity => SpectralAtoms::point(1.0),
            _ => SpectralAtoms::from_counts(self.eigenvalues()).expect("covariance spectrum is a valid distribution"),
        }
    }

    /// `ρ₁`, `ρ₂` and `E = UᵀΣU`.
    pub fn summary(&self, u: &DenseMatrix) -> Result<CovSummary> {
        ensure!(u.nrows() == self.p, Dimension, "U has {} rows, expected {}", u.nrows(), self.p);
        let p = self.p as f64;
        Ok(match &self.kind {
            CovKind::Identity => CovSummary {
                rho1: 1.0,
                rho2: 1.0,
                e: u.tr_mul(u),
            },
            CovKind::Diagonal(v) => {
                let rho1 = v.iter().sum::<f64>() / p;
                let rho2 = v.iter().map(|x| x * x).sum::<f64>() / p;
                let k = u.ncols();
                let e = DenseMatrix::from_fn(k, k, |a, b| (0..self.p).map(|i| u[(i, a)] * v[i] * u[(i, b)]).sum());
                CovSummary { rho1, rho2, e }
            }
            CovKind::Dense { sigma, .. } => crate::theory::cov_summary(sigma, u)?,
        })
    }

    /// Summary with `E` replaced by its Haar average `ρ₁ I_k`.
    pub fn nominal_summary(&self, k: usize) -> CovSummary {
        let ev = self.eigenvalues();
        let p = self.p as f64;
        let rho1 = ev.iter().sum::<f64>() / p;
        let rho2 = ev.iter().map(|x| x * x).sum::<f64>() / p;
        CovSummary {
            rho1,
            rho2,
            e: DenseMatrix::identity(k, k) * rho1,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::max_abs_diff;

    #[test]
    fn grammar_roundtrip() {
        for s in ["identity", "toeplitz:0.9", "step:5x1,2x249,1x250", "file:/tmp/sigma.csv"] {
            let m: SigmaModel = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        for bad in ["toeplitz:1.5", "step:5", "step:ax2", "gaussian", "file:"] {
            assert!(matches!(bad.parse::<SigmaModel>(), Err(Error::Usage(_))), "{bad}");
        }
    }

    #[test]
    fn identity_covariance() {
        let c = make_sigma(&SigmaModel::Identity, 5).unwrap();
        assert_eq!(c.matrix(), DenseMatrix::identity(5, 5));
    }

    #[test]
    fn toeplitz_moments() {
        let c = make_sigma(&SigmaModel::Toeplitz(0.9), 500).unwrap();
        let m = c.matrix();
        assert_eq!(m.trace() / 500.0, 1.0);
        // finite-p value sits O(1/p) below the (1+q²)/(1−q²) limit
        let (q2, pf) = (0.81f64, 500.0f64);
        let exact = 1.0 + (2.0 / pf) * (pf * q2 / (1.0 - q2) - q2 * (1.0 - 0.9f64.powi(1000)) / (1.0 - q2).powi(2));
        assert!((m.norm_squared() / 500.0 - exact).abs() < 1e-10);
        assert!((exact - 9.4366).abs() < 1e-4);
        let s = c.sqrt_matrix();
        assert!(max_abs_diff(&(&s * &s), &m) < 1e-10);
    }

    #[test]
    fn non_psd_rejected() {
        let m = DenseMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(make_sigma(&SigmaModel::Explicit(m), 2), Err(Error::Data(_))));
    }

    #[test]
    fn step_must_cover_p() {
        let m: SigmaModel = "step:5x1,2x3".parse().unwrap();
        assert!(make_sigma(&m, 4).is_ok());
        assert!(matches!(make_sigma(&m, 5), Err(Error::Dimension(_))));
    }

    #[test]
    fn summaries_agree_across_representations() {
        let m: SigmaModel = "step:5x1,2x2,1x3".parse().unwrap();
        let diag = make_sigma(&m, 6).unwrap();
        let dense_cov = make_sigma(&SigmaModel::Explicit(diag.matrix()), 6).unwrap();
        let u = DenseMatrix::from_fn(6, 2, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
        let a = diag.summary(&u).unwrap();
        let b = dense_cov.summary(&u).unwrap();
        assert!((a.rho1 - b.rho1).abs() < 1e-12 && (a.rho2 - b.rho2).abs() < 1e-12);
        assert!(max_abs_diff(&a.e, &b.e) < 1e-12);
        let x = DenseMatrix::from_fn(3, 6, |i, j| (i * 6 + j) as f64);
        let fast = diag.apply_sqrt_right(x.clone()).unwrap();
        let slow = dense_cov.apply_sqrt_right(x).unwrap();
        assert!(max_abs_diff(&fast, &slow) < 1e-10);
    }
}
