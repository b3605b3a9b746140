use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{Aggregate, ExperimentRecord};

/// Value written for predictions that do not exist.
const ABSENT: &str = "NA";

fn num(x: f64) -> String {
    // 17 significant digits round-trip every f64
    format!("{x:.16e}")
}

fn indexed(prefix: &str, k: usize, suffix: &str) -> Vec<String> {
    (1..=k).map(|i| format!("{prefix}_{i}{suffix}")).collect()
}

/// `method,n,p,r,k,rep,d_*,lambda_emp_*,lambda_pred_*,cos2_emp_*,cos2_pred_*,
/// cos2_emp_max_offdiag,seed,wall_ms`: `9 + 5k` columns.
pub fn record_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = ["method", "n", "p", "r", "k", "rep"].map(String::from).to_vec();
    for prefix in ["d", "lambda_emp", "lambda_pred", "cos2_emp", "cos2_pred"] {
        h.extend(indexed(prefix, k, ""));
    }
    h.extend(["cos2_emp_max_offdiag", "seed", "wall_ms"].map(String::from));
    h
}

/// Aggregate rows drop `rep`, add `reps`, and report empirical columns as
/// `_mean`/`_sd` pairs. `*_pred_i` is the nominal prediction and
/// `*_pred_i_mean` the average of the per-rep predictions.
pub fn aggregate_header(k: usize) -> Vec<String> {
    let mut h: Vec<String> = ["method", "n", "p", "r", "k", "reps"].map(String::from).to_vec();
    h.extend(indexed("d", k, ""));
    for quantity in ["lambda", "cos2"] {
        h.extend(indexed(&format!("{quantity}_emp"), k, "_mean"));
        h.extend(indexed(&format!("{quantity}_emp"), k, "_sd"));
        h.extend(indexed(&format!("{quantity}_pred"), k, ""));
        h.extend(indexed(&format!("{quantity}_pred"), k, "_mean"));
    }
    h.extend(
        ["cos2_emp_max_offdiag_mean", "cos2_emp_max_offdiag_sd", "seed", "wall_ms_mean"].map(String::from),
    );
    h
}

fn record_row(r: &ExperimentRecord) -> Vec<String> {
    let k = r.k();
    let mut row = vec![
        r.method.name().to_string(),
        r.n.to_string(),
        r.p.to_string(),
        r.r.to_string(),
        k.to_string(),
        r.rep.to_string(),
    ];
    row.extend(r.d.iter().map(|x| num(*x)));
    row.extend(r.lambda_emp.iter().map(|x| num(*x)));
    row.extend(predicted(r.predicted.iter().map(|p| p.theta), k));
    row.extend(r.cos2_diag().into_iter().map(num));
    row.extend(predicted(r.predicted.iter().map(|p| p.cos2), k));
    row.push(num(r.max_offdiag()));
    row.push(r.seed.to_string());
    row.push(num(r.wall_ms));
    row
}

fn predicted(values: impl Iterator<Item = f64>, k: usize) -> Vec<String> {
    let v: Vec<String> = values.map(num).collect();
    if v.len() == k {
        v
    } else {
        vec![ABSENT.to_string(); k]
    }
}

fn aggregate_row(a: &Aggregate) -> Vec<String> {
    let k = a.k();
    let mut row = vec![
        a.method.name().to_string(),
        a.n.to_string(),
        a.p.to_string(),
        a.r.to_string(),
        k.to_string(),
        a.reps.to_string(),
    ];
    row.extend(a.d.iter().map(|x| num(*x)));
    let quantities = [
        (&a.lambda_emp_mean, &a.lambda_emp_sd, a.nominal.iter().map(|p| p.theta).collect::<Vec<_>>(), &a.lambda_pred_mean),
        (&a.cos2_emp_mean, &a.cos2_emp_sd, a.nominal.iter().map(|p| p.cos2).collect(), &a.cos2_pred_mean),
    ];
    for (mean, sd, nominal, rep_mean) in quantities {
        row.extend(mean.iter().map(|x| num(*x)));
        row.extend(sd.iter().map(|x| num(*x)));
        row.extend(predicted(nominal.into_iter(), k));
        match rep_mean {
            Some(v) => row.extend(v.iter().map(|x| num(*x))),
            None => row.extend(vec![ABSENT.to_string(); k]),
        }
    }
    row.push(num(a.offdiag_mean));
    row.push(num(a.offdiag_sd));
    row.push(a.seed.to_string());
    row.push(num(a.wall_ms_mean));
    row
}

fn emit<W: Write>(out: W, comments: &[String], header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> std::io::Result<()> {
    let mut out = out;
    for c in comments {
        writeln!(out, "# {c}")?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()
}

fn to_path(path: &Path, f: impl FnOnce(BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    f(BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

/// Writes per-rep records. `comments` become leading `# ` lines.
pub fn write_records<W: Write>(out: W, k: usize, records: &[ExperimentRecord], comments: &[String]) -> std::io::Result<()> {
    emit(out, comments, record_header(k), records.iter().map(record_row))
}

pub fn write_aggregates<W: Write>(out: W, k: usize, aggregates: &[Aggregate], comments: &[String]) -> std::io::Result<()> {
    emit(out, comments, aggregate_header(k), aggregates.iter().map(aggregate_row))
}

/// [`write_records`] to a file; IO failures name the path.
pub fn write_records_file(path: &Path, k: usize, records: &[ExperimentRecord], comments: &[String]) -> Result<()> {
    to_path(path, |w| write_records(w, k, records, comments))
}

pub fn write_aggregates_file(path: &Path, k: usize, aggregates: &[Aggregate], comments: &[String]) -> Result<()> {
    to_path(path, |w| write_aggregates(w, k, aggregates, comments))
}

/// Header and rows of a CSV written by this module (comment lines skipped).
pub fn read_csv_rows(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let to_parse = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        line: e.position().map_or(0, |p| p.line()),
        message: e.to_string(),
    };
    let header = reader.headers().map_err(to_parse)?.iter().map(String::from).collect();
    let rows = reader
        .records()
        .map(|r| r.map(|r| r.iter().map(String::from).collect()).map_err(to_parse))
        .collect::<Result<_>>()?;
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{run, ExperimentConfig};
    use crate::model::SpikedModelSpec;
    use crate::sketch::{SketchMethod, SketchSpec};

    #[test]
    fn schema_widths() {
        assert_eq!(record_header(2).len(), 9 + 5 * 2);
        assert_eq!(record_header(1)[6], "d_1");
        assert!(!aggregate_header(2).contains(&"rep".to_string()));
        assert!(aggregate_header(2).contains(&"lambda_emp_2_sd".to_string()));
    }

    #[test]
    fn empty_aggregates_give_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("agg.csv");
        write_aggregates_file(&path, 1, &[], &[]).unwrap();
        let (header, rows) = read_csv_rows(&path).unwrap();
        assert_eq!(header, aggregate_header(1));
        assert!(rows.is_empty());
    }

    #[test]
    fn records_roundtrip_bitwise() {
        let model = SpikedModelSpec::new(100, 20, vec![5.0, 2.0]);
        let cfg = ExperimentConfig::new(model, vec![SketchSpec::new(SketchMethod::Haar, 40)])
            .with_reps(1)
            .with_timing(false);
        let out = run(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec.csv");
        write_records_file(&path, 2, &out.records, &["provenance".into()]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("# provenance\n"));
        let (header, rows) = read_csv_rows(&path).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].len(), header.len());
        assert_eq!(header.len(), 19);
        let rec = &out.records[0];
        let col = |name: &str| header.iter().position(|h| h == name).unwrap();
        let parsed: f64 = rows[0][col("lambda_emp_2")].parse().unwrap();
        assert_eq!(parsed.to_bits(), rec.lambda_emp[1].to_bits());
        let parsed: f64 = rows[0][col("cos2_pred_1")].parse().unwrap();
        assert_eq!(parsed.to_bits(), rec.predicted[0].cos2.to_bits());
    }

    #[test]
    fn unwritable_path_names_the_path() {
        let path = Path::new("/nonexistent-dir/out.csv");
        match write_records_file(path, 1, &[], &[]) {
            Err(Error::Io { path: p, .. }) => assert_eq!(p, path),
            other => panic!("{other:?}"),
        }
    }
}
