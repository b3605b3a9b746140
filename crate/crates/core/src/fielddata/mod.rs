//! Real-data ingestion, standardization and the pivotal statistic `T`.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{ensure, Error, Result};
use crate::numerics::{top_k_spectrum, DenseMatrix, RngStream};
use crate::sketch::{apply_sketch, build_data_sketch, SketchSpec};
use crate::theory::{spike_inverse, AspectRatios, Detection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FileFormat {
    #[default]
    Csv,
    Tsv,
}

impl FileFormat {
    /// `.tsv` and `.tab` files are tab separated; everything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("tsv") | Some("tab") => FileFormat::Tsv,
            _ => FileFormat::Csv,
        }
    }

    fn delimiter(self) -> u8 {
        match self {
            FileFormat::Csv => b',',
            FileFormat::Tsv => b'\t',
        }
    }
}

impl FromStr for FileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "csv" => Ok(FileFormat::Csv),
            "tsv" => Ok(FileFormat::Tsv),
            other => Err(Error::Usage(format!("unknown format '{other}'; expected csv or tsv"))),
        }
    }
}

/// Parsed matrix; missing cells hold `NaN` and are flagged in `mask`.
#[derive(Debug, Clone)]
pub struct RawMatrix {
    pub values: DenseMatrix,
    /// `true` where the cell was the missing token.
    pub mask: DMatrix<bool>,
}

impl RawMatrix {
    pub fn fully_observed(values: DenseMatrix) -> Self {
        let mask = DMatrix::from_element(values.nrows(), values.ncols(), false);
        Self { values, mask }
    }

    pub fn missing_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

/// Reads a rectangular numeric table. Lines starting with `#` are skipped.
pub fn load_matrix(path: &Path, format: FileFormat, missing_token: &str) -> Result<RawMatrix> {
    let parse_err = |line: u64, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(format.delimiter())
        .comment(Some(b'#'))
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file);

    let mut data: Vec<f64> = Vec::new();
    let mut missing: Vec<bool> = Vec::new();
    let mut width: Option<usize> = None;
    let mut rows = 0usize;
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                kind => parse_err(line, format!("{kind:?}")),
            }
        })?;
        let line = record.position().map_or(0, |p| p.line());
        match width {
            None => width = Some(record.len()),
            Some(w) if w != record.len() => {
                return Err(parse_err(line, format!("expected {w} fields, found {}", record.len())));
            }
            _ => {}
        }
        for field in record.iter() {
            if field == missing_token {
                data.push(f64::NAN);
                missing.push(true);
            } else {
                let v: f64 = field
                    .parse()
                    .map_err(|_| parse_err(line, format!("non-numeric field '{field}'")))?;
                data.push(v);
                missing.push(false);
            }
        }
        rows += 1;
    }
    let cols = width.unwrap_or(0);
    ensure!(rows > 0 && cols > 0, Data, "{} contains no data", path.display());
    Ok(RawMatrix {
        values: DenseMatrix::from_row_slice(rows, cols, &data),
        mask: DMatrix::from_row_slice(rows, cols, &missing),
    })
}

/// Divisor used for column standard deviations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SdConvention {
    /// `n_obs − 1`.
    #[default]
    Sample,
    /// `n_obs`.
    Population,
}

impl FromStr for SdConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sample" => Ok(SdConvention::Sample),
            "population" => Ok(SdConvention::Population),
            other => Err(Error::Usage(format!("unknown sd convention '{other}'; expected sample or population"))),
        }
    }
}

impl fmt::Display for SdConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SdConvention::Sample => "sample",
            SdConvention::Population => "population",
        })
    }
}

#[derive(Debug, Clone)]
pub struct StandardizedMatrix {
    pub data: DenseMatrix,
    pub column_means: Vec<f64>,
    pub column_sds: Vec<f64>,
    pub missing_per_column: Vec<usize>,
}

/// Centers and scales each column over its observed entries, then writes
/// 0 (the column mean) into the missing cells.
pub fn standardize(raw: &RawMatrix, convention: SdConvention) -> Result<StandardizedMatrix> {
    let (n, p) = raw.values.shape();
    let mut data = DenseMatrix::zeros(n, p);
    let mut means = Vec::with_capacity(p);
    let mut sds = Vec::with_capacity(p);
    let mut missing_per_column = Vec::with_capacity(p);
    let mut sparse = Vec::new();
    let mut constant = Vec::new();
    for j in 0..p {
        let obs: Vec<f64> = (0..n).filter(|&i| !raw.mask[(i, j)]).map(|i| raw.values[(i, j)]).collect();
        missing_per_column.push(n - obs.len());
        let m = obs.len();
        if m < 2 {
            sparse.push(j);
            means.push(f64::NAN);
            sds.push(f64::NAN);
            continue;
        }
        let mean = obs.iter().sum::<f64>() / m as f64;
        let ss: f64 = obs.iter().map(|x| (x - mean).powi(2)).sum();
        let divisor = match convention {
            SdConvention::Sample => (m - 1) as f64,
            SdConvention::Population => m as f64,
        };
        let sd = (ss / divisor).sqrt();
        if !(sd > 0.0) {
            constant.push(j);
        } else {
            for i in 0..n {
                if !raw.mask[(i, j)] {
                    data[(i, j)] = (raw.values[(i, j)] - mean) / sd;
                }
            }
        }
        means.push(mean);
        sds.push(sd);
    }
    ensure!(sparse.is_empty(), Data, "columns with fewer than two observed entries: {sparse:?}");
    ensure!(constant.is_empty(), Data, "constant columns: {constant:?}");
    Ok(StandardizedMatrix {
        data,
        column_means: means,
        column_sds: sds,
        missing_per_column,
    })
}

/// `M − 1·(column means)`.
pub fn center_columns(m: &DenseMatrix) -> DenseMatrix {
    let n = m.nrows() as f64;
    let mut out = m.clone();
    for mut col in out.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    out
}

/// Outcome of the sketch-consistency check.
#[derive(Debug, Clone, PartialEq)]
pub struct TStatResult {
    /// `None` when either side is at or below its bulk edge.
    pub t: Option<f64>,
    pub ell_full: Detection,
    pub ell_sketched: Detection,
    pub lambda1_full: f64,
    pub lambda1_sketched: f64,
    /// `p/n`.
    pub gamma_full: f64,
    /// `p/r`, with `r` the realized number of sketch rows.
    pub gamma_sketched: f64,
}

impl TStatResult {
    pub fn below_edge(&self) -> bool {
        self.t.is_none()
    }
}

/// `T = ℓ̂(full) / ℓ̂(sketched)` with `ℓ̂` the classical spike inverse.
///
/// The full Gram `XᵀX` is divided by `n` and the sketched Gram
/// `(SX)ᵀ(SX)` by `‖S‖_F²` (`= r` for sketches with orthonormal rows), so
/// unit-variance noise gives a standard MP bulk on both sides.
pub fn t_statistic(x: &DenseMatrix, spec: &SketchSpec, stream: &RngStream) -> Result<TStatResult> {
    let (n, p) = x.shape();
    ensure!(n >= 2 && p >= 1, Dimension, "data must have at least two rows and one column");
    ensure!(spec.r <= n, Dimension, "sketch size r = {} exceeds n = {n}", spec.r);
    let op = build_data_sketch(spec, x, stream)?;
    let sx = apply_sketch(&op, x)?;
    let lambda1_full = top_k_spectrum(x, 1, 1e-8)?.values[0] / n as f64;
    let lambda1_sketched = top_k_spectrum(&sx, 1, 1e-8)?.values[0] / op.frobenius_sq();
    let gamma_full = p as f64 / n as f64;
    let gamma_sketched = p as f64 / op.output_rows() as f64;
    let ell_full = spike_inverse(lambda1_full, AspectRatios::new(gamma_full, 1.0)?);
    let ell_sketched = spike_inverse(lambda1_sketched, AspectRatios::new(gamma_sketched, 1.0)?);
    let t = match (ell_full, ell_sketched) {
        (Detection::Above(a), Detection::Above(b)) => Some(a / b),
        _ => None,
    };
    Ok(TStatResult {
        t,
        ell_full,
        ell_sketched,
        lambda1_full,
        lambda1_sketched,
        gamma_full,
        gamma_sketched,
    })
}
