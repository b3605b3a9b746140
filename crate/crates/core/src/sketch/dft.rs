//! Real representation of the unitary DFT used by the Fourier sketch.
//!
//! The `n` real basis rows are the DC row, the Nyquist row (even `n`), and a
//! `√2`-scaled cosine/sine pair for every frequency `1 <= f < n/2`. Together
//! they form an orthogonal matrix with entries of size `O(n^{-1/2})`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::numerics::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum FourierRow {
    Dc,
    Nyquist,
    Cos(usize),
    Sin(usize),
}

pub(crate) fn real_basis(n: usize) -> Vec<FourierRow> {
    let mut rows = Vec::with_capacity(n);
    rows.push(FourierRow::Dc);
    for f in 1..n.div_ceil(2) {
        rows.push(FourierRow::Cos(f));
        rows.push(FourierRow::Sin(f));
    }
    if n % 2 == 0 && n > 1 {
        rows.push(FourierRow::Nyquist);
    }
    debug_assert_eq!(rows.len(), n);
    rows
}

/// `B F D y` for each column `y`, with `F` the real DFT basis above.
pub(crate) fn apply(rows: &[FourierRow], signs: &[f64], y: &DenseMatrix) -> DenseMatrix {
    let n = y.nrows();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n);
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let pair_scale = std::f64::consts::SQRT_2 * inv_sqrt_n;
    let mut out = DenseMatrix::zeros(rows.len(), y.ncols());
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for c in 0..y.ncols() {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = Complex64::new(signs[j] * y[(j, c)], 0.0);
        }
        fft.process(&mut buf);
        for (t, row) in rows.iter().enumerate() {
            out[(t, c)] = match *row {
                FourierRow::Dc => buf[0].re * inv_sqrt_n,
                FourierRow::Nyquist => buf[n / 2].re * inv_sqrt_n,
                FourierRow::Cos(f) => buf[f].re * pair_scale,
                FourierRow::Sin(f) => buf[f].im * pair_scale,
            };
        }
    }
    out
}

pub(crate) fn dense(rows: &[FourierRow], signs: &[f64], n: usize) -> DenseMatrix {
    let inv_sqrt_n = 1.0 / (n as f64).sqrt();
    let pair_scale = std::f64::consts::SQRT_2 * inv_sqrt_n;
    DenseMatrix::from_fn(rows.len(), n, |t, j| {
        let phase = |f: usize| 2.0 * PI * ((f * j) % n) as f64 / n as f64;
        let v = match rows[t] {
            FourierRow::Dc => inv_sqrt_n,
            FourierRow::Nyquist => {
                if j % 2 == 0 {
                    inv_sqrt_n
                } else {
                    -inv_sqrt_n
                }
            }
            FourierRow::Cos(f) => pair_scale * phase(f).cos(),
            // FFT convention e^{-2πi f j / n}
            FourierRow::Sin(f) => -pair_scale * phase(f).sin(),
        };
        signs[j] * v
    })
}
