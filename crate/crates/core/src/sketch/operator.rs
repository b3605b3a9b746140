use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{ensure, Error, Result};
use crate::numerics::{fwht_in_place, haar_orthonormal_with, DenseMatrix, RngStream, StreamRng};

use super::dft::{self, FourierRow};
use super::{IidLaw, RowSampling, SketchMethod, SketchSpec, SpectralAtoms};

/// A realized sketching matrix `S` (`output_rows() x n`).
///
/// Structured methods never materialize `S`; [`apply_sketch`] uses the
/// fast path for each family and [`SketchOperator::to_dense`] exists for
/// inspection and testing.
#[derive(Debug, Clone)]
pub struct SketchOperator {
    spec: SketchSpec,
    n: usize,
    realization: Realization,
}

#[derive(Debug, Clone)]
enum Realization {
    /// Haar and iid sketches.
    Dense(DenseMatrix),
    /// Uniform sampling: kept rows, with optional per-row random signs.
    RowSelect { rows: Vec<usize>, signs: Option<Vec<f64>> },
    /// `(1/√n') B H D` acting on data zero-padded to `n'` rows.
    Hadamard { signs: Vec<f64>, padded: usize, rows: Vec<usize> },
    /// Selected rows of the real unitary DFT, times a sign diagonal.
    Fourier { signs: Vec<f64>, rows: Vec<FourierRow> },
    CountSketch {
        bucket: Vec<usize>,
        signs: Vec<f64>,
        counts: Vec<usize>,
        /// Output row of each bucket; `None` for dropped empty buckets.
        out_row: Vec<Option<usize>>,
        /// Per-bucket multiplier: 1, or `1/√c` when normalized.
        scale: Vec<f64>,
    },
    /// Row `t` is `e_{rows[t]}ᵀ · weights[t]`.
    Leverage { rows: Vec<usize>, weights: Vec<f64>, probs: Vec<f64> },
    /// `s` nonzeros `±1/√s` per column, stored column after column.
    Osnap { s: usize, positions: Vec<usize>, signs: Vec<f64> },
}

impl SketchOperator {
    pub fn spec(&self) -> &SketchSpec {
        &self.spec
    }

    pub fn method(&self) -> SketchMethod {
        self.spec.method
    }

    /// Number of input rows (`n`).
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of rows of `S`. Differs from `spec.r` for Bernoulli row
    /// selection and for normalized CountSketch (empty buckets dropped).
    pub fn output_rows(&self) -> usize {
        match &self.realization {
            Realization::Dense(s) => s.nrows(),
            Realization::RowSelect { rows, .. } => rows.len(),
            Realization::Hadamard { rows, .. } => rows.len(),
            Realization::Fourier { rows, .. } => rows.len(),
            Realization::CountSketch { out_row, .. } => out_row.iter().flatten().count(),
            Realization::Leverage { rows, .. } => rows.len(),
            Realization::Osnap { .. } => self.spec.r,
        }
    }

    /// Reduction factor this realization should be compared against.
    ///
    /// Row-selection methods use the realized row count; normalized
    /// CountSketch uses the number of nonempty buckets (whose expectation
    /// is `n·ξ̂`); unnormalized CountSketch reports ξ̂ of the nominal `r/n`.
    pub fn effective_xi(&self) -> f64 {
        let n = self.n as f64;
        match self.spec.method {
            SketchMethod::UniformSample
            | SketchMethod::Srht
            | SketchMethod::Dft
            | SketchMethod::CountSketchNormalized => self.output_rows() as f64 / n,
            SketchMethod::CountSketch => {
                let xi = self.spec.r as f64 / n;
                xi * (1.0 - (-1.0 / xi).exp())
            }
            _ => self.spec.r as f64 / n,
        }
    }

    /// Materializes `S`.
    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.n;
        match &self.realization {
            Realization::Dense(s) => s.clone(),
            Realization::RowSelect { rows, signs } => {
                let mut s = DenseMatrix::zeros(rows.len(), n);
                for (t, &i) in rows.iter().enumerate() {
                    s[(t, i)] = signs.as_ref().map_or(1.0, |g| g[t]);
                }
                s
            }
            Realization::Hadamard { signs, padded, rows } => {
                let scale = 1.0 / (*padded as f64).sqrt();
                DenseMatrix::from_fn(rows.len(), n, |t, j| {
                    let parity = (rows[t] & j).count_ones() % 2;
                    let h = if parity == 0 { 1.0 } else { -1.0 };
                    scale * h * signs[j]
                })
            }
            Realization::Fourier { signs, rows } => dft::dense(rows, signs, n),
            Realization::CountSketch {
                bucket,
                signs,
                out_row,
                scale,
                ..
            } => {
                let mut s = DenseMatrix::zeros(self.output_rows(), n);
                for j in 0..n {
                    if let Some(t) = out_row[bucket[j]] {
                        s[(t, j)] = signs[j] * scale[bucket[j]];
                    }
                }
                s
            }
            Realization::Leverage { rows, weights, .. } => {
                let mut s = DenseMatrix::zeros(rows.len(), n);
                for (t, (&i, &w)) in rows.iter().zip(weights).enumerate() {
                    s[(t, i)] = w;
                }
                s
            }
            Realization::Osnap { s, positions, signs } => {
                let mut m = DenseMatrix::zeros(self.spec.r, n);
                let v = 1.0 / (*s as f64).sqrt();
                for j in 0..n {
                    for q in j * s..(j + 1) * s {
                        m[(positions[q], j)] = signs[q] * v;
                    }
                }
                m
            }
        }
    }

    /// `‖S‖_F²`, without materializing `S`.
    pub fn frobenius_sq(&self) -> f64 {
        match &self.realization {
            Realization::Dense(s) => s.norm_squared(),
            Realization::RowSelect { rows, .. } => rows.len() as f64,
            Realization::Fourier { rows, .. } => rows.len() as f64,
            Realization::Hadamard { rows, padded, .. } => rows.len() as f64 * self.n as f64 / *padded as f64,
            Realization::CountSketch {
                bucket, out_row, scale, ..
            } => bucket
                .iter()
                .filter(|b| out_row[**b].is_some())
                .map(|b| scale[*b] * scale[*b])
                .sum(),
            Realization::Leverage { weights, .. } => weights.iter().map(|w| w * w).sum(),
            Realization::Osnap { .. } => self.n as f64,
        }
    }

    /// Indices of the kept input rows, for row-selection methods.
    pub fn selected_rows(&self) -> Option<&[usize]> {
        match &self.realization {
            Realization::RowSelect { rows, .. } | Realization::Leverage { rows, .. } => Some(rows),
            _ => None,
        }
    }

    /// Sampling probabilities of the leverage (d₂) sketch.
    pub fn sampling_probabilities(&self) -> Option<&[f64]> {
        match &self.realization {
            Realization::Leverage { probs, .. } => Some(probs),
            _ => None,
        }
    }
}

/// Draws a data-independent sketch. Leverage sampling depends on the data
/// and must go through [`build_data_sketch`].
pub fn build_sketch(spec: &SketchSpec, n: usize, stream: &RngStream) -> Result<SketchOperator> {
    spec.validate(n)?;
    let mut rng = stream.rng();
    let r = spec.r;
    let realization = match spec.method {
        SketchMethod::Haar => Realization::Dense(haar_orthonormal_with(r, n, &mut rng)?),
        SketchMethod::Iid => {
            let scale = 1.0 / (n as f64).sqrt();
            let s = match spec.iid_law {
                IidLaw::Gaussian => DenseMatrix::from_fn(r, n, |_, _| {
                    scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng)
                }),
                IidLaw::Rademacher => DenseMatrix::from_fn(r, n, |_, _| scale * random_sign(&mut rng)),
            };
            Realization::Dense(s)
        }
        SketchMethod::UniformSample => {
            let rows = select_rows(spec, n, n, &mut rng)?;
            let signs = spec
                .random_signs
                .then(|| rows.iter().map(|_| random_sign(&mut rng)).collect());
            Realization::RowSelect { rows, signs }
        }
        SketchMethod::Srht => {
            let padded = n.next_power_of_two();
            let signs = (0..padded).map(|_| random_sign(&mut rng)).collect();
            let rows = select_rows(spec, n, padded, &mut rng)?;
            Realization::Hadamard { signs, padded, rows }
        }
        SketchMethod::Dft => {
            let signs = (0..n).map(|_| random_sign(&mut rng)).collect();
            let basis = dft::real_basis(n);
            let rows = select_rows(spec, n, n, &mut rng)?
                .into_iter()
                .map(|i| basis[i])
                .collect();
            Realization::Fourier { signs, rows }
        }
        SketchMethod::CountSketch | SketchMethod::CountSketchNormalized => {
            let bucket: Vec<usize> = (0..n).map(|_| rng.random_range(0..r)).collect();
            let signs = (0..n).map(|_| random_sign(&mut rng)).collect();
            count_sketch(spec.method, r, bucket, signs)
        }
        SketchMethod::Leverage => {
            return Err(Error::Usage(
                "leverage sampling depends on the data; build it from the data matrix".into(),
            ))
        }
        SketchMethod::Osnap => {
            let s = spec.osnap_s;
            let mut positions = Vec::with_capacity(n * s);
            let mut signs = Vec::with_capacity(n * s);
            for _ in 0..n {
                positions.extend(index::sample(&mut rng, r, s));
                signs.extend((0..s).map(|_| random_sign(&mut rng)));
            }
            Realization::Osnap { s, positions, signs }
        }
    };
    Ok(SketchOperator {
        spec: spec.clone(),
        n,
        realization,
    })
}

/// Draws a sketch that may look at the data `y` (n x p). Identical to
/// [`build_sketch`] for every method except leverage sampling.
pub fn build_data_sketch(spec: &SketchSpec, y: &DenseMatrix, stream: &RngStream) -> Result<SketchOperator> {
    if spec.method != SketchMethod::Leverage {
        return build_sketch(spec, y.nrows(), stream);
    }
    let n = y.nrows();
    spec.validate(n)?;
    ensure!(y.iter().all(|v| v.is_finite()), Data, "data matrix has non-finite entries");
    let energy: Vec<f64> = (0..n).map(|i| y.row(i).norm_squared()).collect();
    let total: f64 = energy.iter().sum();
    ensure!(total > 0.0, Data, "leverage sampling needs a nonzero data matrix");
    let probs: Vec<f64> = energy.iter().map(|e| e / total).collect();
    let dist = WeightedIndex::new(&probs).map_err(|e| Error::Data(format!("leverage weights: {e}")))?;
    let mut rng = stream.rng();
    let r = spec.r;
    let rows: Vec<usize> = (0..r).map(|_| dist.sample(&mut rng)).collect();
    let weights = rows.iter().map(|&i| 1.0 / (r as f64 * probs[i]).sqrt()).collect();
    Ok(SketchOperator {
        spec: spec.clone(),
        n,
        realization: Realization::Leverage { rows, weights, probs },
    })
}

/// `S·Y`.
pub fn apply_sketch(op: &SketchOperator, y: &DenseMatrix) -> Result<DenseMatrix> {
    ensure!(
        y.nrows() == op.n,
        Dimension,
        "sketch expects {} rows, data has {}",
        op.n,
        y.nrows()
    );
    Ok(apply_unchecked(op, y))
}

fn apply_unchecked(op: &SketchOperator, y: &DenseMatrix) -> DenseMatrix {
    let (n, p) = y.shape();
    match &op.realization {
        Realization::Dense(s) => s * y,
        Realization::RowSelect { rows, signs } => DenseMatrix::from_fn(rows.len(), p, |t, c| {
            signs.as_ref().map_or(1.0, |g| g[t]) * y[(rows[t], c)]
        }),
        Realization::Hadamard { signs, padded, rows } => {
            let np = *padded;
            let scale = 1.0 / (np as f64).sqrt();
            let mut out = DenseMatrix::zeros(rows.len(), p);
            let mut buf = vec![0.0; np];
            for c in 0..p {
                let col = y.column(c);
                for i in 0..n {
                    buf[i] = signs[i] * col[i];
                }
                buf[n..].fill(0.0);
                fwht_in_place(&mut buf);
                for (t, &i) in rows.iter().enumerate() {
                    out[(t, c)] = scale * buf[i];
                }
            }
            out
        }
        Realization::Fourier { signs, rows } => dft::apply(rows, signs, y),
        Realization::CountSketch {
            bucket,
            signs,
            out_row,
            scale,
            ..
        } => {
            let mut out = DenseMatrix::zeros(op.output_rows(), p);
            for c in 0..p {
                let col = y.column(c);
                let mut dst = out.column_mut(c);
                for j in 0..n {
                    if let Some(t) = out_row[bucket[j]] {
                        dst[t] += signs[j] * scale[bucket[j]] * col[j];
                    }
                }
            }
            out
        }
        Realization::Leverage { rows, weights, .. } => {
            DenseMatrix::from_fn(rows.len(), p, |t, c| weights[t] * y[(rows[t], c)])
        }
        Realization::Osnap { s, positions, signs } => {
            let v = 1.0 / (*s as f64).sqrt();
            let mut out = DenseMatrix::zeros(op.spec.r, p);
            for c in 0..p {
                let col = y.column(c);
                let mut dst = out.column_mut(c);
                for j in 0..n {
                    let x = v * col[j];
                    for q in j * s..(j + 1) * s {
                        dst[positions[q]] += signs[q] * x;
                    }
                }
            }
            out
        }
    }
}

/// Number of input coordinates hashed to each of the `r` buckets.
pub fn bucket_counts(op: &SketchOperator) -> Result<Vec<usize>> {
    match &op.realization {
        Realization::CountSketch { counts, .. } => Ok(counts.clone()),
        _ => Err(Error::Usage(format!(
            "bucket counts are defined for countsketch variants only, not {}",
            op.spec.method
        ))),
    }
}

/// Eigenvalue distribution of `SSᵀ`.
///
/// Exact atoms are returned where the structure gives them; iid, leverage,
/// OSNAP and zero-padded SRHT fall back to a dense eigendecomposition.
pub fn operator_gram_esd(op: &SketchOperator) -> SpectralAtoms {
    match &op.realization {
        Realization::Dense(_) if op.spec.method == SketchMethod::Haar => SpectralAtoms::point(1.0),
        Realization::RowSelect { .. } | Realization::Fourier { .. } => SpectralAtoms::point(1.0),
        Realization::Hadamard { padded, .. } if *padded == op.n => SpectralAtoms::point(1.0),
        Realization::CountSketch { counts, .. } => match op.spec.method {
            SketchMethod::CountSketchNormalized => SpectralAtoms::point(1.0),
            _ => SpectralAtoms::from_counts(counts.iter().map(|&c| c as f64))
                .expect("bucket counts form a valid distribution"),
        },
        _ => {
            let s = op.to_dense();
            let eig = (&s * s.transpose()).symmetric_eigenvalues();
            SpectralAtoms::from_eigenvalues(eig.as_slice())
                .expect("Gram eigenvalues form a valid distribution")
        }
    }
}

fn random_sign(rng: &mut StreamRng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

// Picks rows out of `pool` candidates, targeting `spec.r` of them. Bernoulli
// selection keeps each row with probability `r/pool`.
fn select_rows(spec: &SketchSpec, n: usize, pool: usize, rng: &mut StreamRng) -> Result<Vec<usize>> {
    let rows: Vec<usize> = match spec.sampling {
        RowSampling::Bernoulli => {
            let prob = spec.r as f64 / pool as f64;
            (0..pool).filter(|_| rng.random_bool(prob)).collect()
        }
        RowSampling::Fixed => {
            let mut v = index::sample(rng, pool, spec.r).into_vec();
            v.sort_unstable();
            v
        }
    };
    ensure!(
        !rows.is_empty(),
        Data,
        "Bernoulli row selection kept no rows (r = {}, n = {n}); use a larger r or fixed sampling",
        spec.r
    );
    Ok(rows)
}

fn count_sketch(method: SketchMethod, r: usize, bucket: Vec<usize>, signs: Vec<f64>) -> Realization {
    let mut counts = vec![0usize; r];
    for &b in &bucket {
        counts[b] += 1;
    }
    let normalized = method == SketchMethod::CountSketchNormalized;
    let mut next = 0;
    let out_row = counts
        .iter()
        .map(|&c| {
            if normalized && c == 0 {
                None
            } else {
                next += 1;
                Some(next - 1)
            }
        })
        .collect();
    let scale = counts
        .iter()
        .map(|&c| if normalized && c > 0 { 1.0 / (c as f64).sqrt() } else { 1.0 })
        .collect();
    Realization::CountSketch {
        bucket,
        signs,
        counts,
        out_row,
        scale,
    }
}
