use std::io::Write;

use spikesketch::fielddata::{center_columns, load_matrix, t_statistic, FileFormat};
use spikesketch::model::{generate, SpikedModelSpec};
use spikesketch::numerics::gaussian_matrix;
use spikesketch::sketch::{SketchMethod, SketchSpec};
use spikesketch::{DenseMatrix, RngStream};

fn spiked(n: usize, p: usize, d: f64, seed: u64) -> DenseMatrix {
    let ds = generate(&SpikedModelSpec::new(n, p, vec![d]), &RngStream::new(seed, 0)).unwrap();
    ds.y * (n as f64).sqrt()
}

#[test]
fn file_roundtrip_is_bitwise() {
    let m = gaussian_matrix(1000, 50, &mut RngStream::new(31, 0).rng()) * 1e3;
    let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        writeln!(f, "{}", line.join(",")).unwrap();
    }
    f.flush().unwrap();
    let raw = load_matrix(f.path(), FileFormat::Csv, "NA").unwrap();
    assert_eq!(raw.missing_count(), 0);
    assert!(raw.values.iter().zip(m.iter()).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn t_ignores_column_order() {
    let x = spiked(400, 40, 4.0, 32);
    let perm: Vec<usize> = (0..40).map(|j| (j * 17) % 40).collect();
    let xp = DenseMatrix::from_fn(400, 40, |i, j| x[(i, perm[j])]);
    for method in [SketchMethod::Haar, SketchMethod::CountSketch, SketchMethod::Leverage] {
        let spec = SketchSpec::new(method, 200);
        let stream = RngStream::new(33, 0);
        let a = t_statistic(&x, &spec, &stream).unwrap().t.unwrap();
        let b = t_statistic(&xp, &spec, &stream).unwrap().t.unwrap();
        assert!((a - b).abs() <= 1e-8, "{method}: {a} vs {b}");
    }
}

#[test]
fn random_signs_survive_centering() {
    let (n, p, reps) = (2000, 200, 50);
    let plain = SketchSpec::new(SketchMethod::UniformSample, n / 2);
    let signed = plain.clone().with_random_signs(true);
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for rep in 0..reps {
        let x = spiked(n, p, 4.0, 100 + rep);
        let stream = RngStream::new(34, rep);
        a.push(t_statistic(&x, &plain, &stream).unwrap().t.unwrap());
        b.push(t_statistic(&center_columns(&x), &signed, &stream).unwrap().t.unwrap());
    }
    let stats = |v: &[f64]| {
        let m = v.iter().sum::<f64>() / v.len() as f64;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
        (m, var / v.len() as f64)
    };
    let ((ma, va), (mb, vb)) = (stats(&a), stats(&b));
    let se = (va + vb).sqrt();
    assert!((ma - mb).abs() <= 2.0 * se, "{ma} vs {mb} (se {se})");
}
