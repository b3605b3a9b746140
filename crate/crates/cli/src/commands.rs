use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use spikesketch::fielddata::{self, FileFormat, SdConvention};
use spikesketch::harness::{self, ExperimentConfig, Settings};
use spikesketch::model::{make_sigma, SigmaModel};
use spikesketch::sketch::{IidLaw, RowSampling, SketchMethod, SketchSpec};
use spikesketch::theory::{
    effective_xi_countsketch, predict_all, shrinker, AspectRatios, Detection, Predictor, ShrinkLoss,
};
use spikesketch::{Error, Result, RngStream};

/// Provenance comment lines written ahead of every table.
pub struct Header {
    command: &'static str,
    config: Option<PathBuf>,
    timestamp: bool,
}

impl Header {
    pub fn new(command: &'static str, config: &Option<PathBuf>, timestamp: bool) -> Self {
        Self {
            command,
            config: config.clone(),
            timestamp,
        }
    }

    fn lines(&self, s: &Settings, seed: Option<u64>, extra: &[&str]) -> Vec<String> {
        let mut lines = vec![
            format!("spikesketch {} {}", env!("CARGO_PKG_VERSION"), self.command),
            format!("settings: {}", s.render()),
        ];
        if let Some(c) = &self.config {
            lines.push(format!("config: {}", c.display()));
        }
        lines.push(match seed {
            Some(seed) => format!("seed: {seed}"),
            None => "seed: none".into(),
        });
        lines.extend(extra.iter().map(|x| x.to_string()));
        if self.timestamp {
            let secs = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
            lines.push(format!("generated_unix: {secs}"));
        }
        lines
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io {
        path: PathBuf::from("<stdout>"),
        source: e,
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn detection(x: Detection) -> String {
    x.value().map_or_else(|| "NA".into(), num)
}

/// Header comments, a CSV header row and data rows. Fields never contain
/// commas, so no quoting is needed.
fn table(out: &mut dyn Write, comments: &[String], header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    for c in comments {
        writeln!(out, "# {c}").map_err(io_err)?;
    }
    writeln!(out, "{}", header.join(",")).map_err(io_err)?;
    for row in rows {
        writeln!(out, "{}", row.join(",")).map_err(io_err)?;
    }
    Ok(())
}

/// Sizes resolved from `n, p, r` or the ratios. Counts win over ratios.
struct Dims {
    n: Option<usize>,
    p: Option<usize>,
    r: Option<usize>,
    gamma: f64,
    xi: f64,
}

impl Dims {
    fn from_settings(s: &Settings) -> Result<Self> {
        let n: Option<usize> = s.get("n")?;
        let mut p: Option<usize> = s.get("p")?;
        let mut r: Option<usize> = s.get("r")?;
        let gamma: Option<f64> = s.get("gamma")?;
        let xi: Option<f64> = s.get("xi")?;
        let (gamma, xi) = match n {
            Some(n) => {
                if n == 0 {
                    return Err(Error::Usage("n must be positive".into()));
                }
                p = p.or_else(|| gamma.map(|g| (g * n as f64).round() as usize));
                r = r.or_else(|| xi.map(|x| (x * n as f64).round() as usize));
                let p = p.ok_or_else(|| Error::Usage("either 'p' or 'gamma' is required".into()))?;
                let r = r.ok_or_else(|| Error::Usage("either 'r' or 'xi' is required".into()))?;
                if r > n {
                    return Err(Error::Usage(format!("r = {r} exceeds n = {n}")));
                }
                (p as f64 / n as f64, r as f64 / n as f64)
            }
            None => {
                if p.is_some() || r.is_some() {
                    return Err(Error::Usage("'p' and 'r' need 'n'; give 'gamma' and 'xi' otherwise".into()));
                }
                let g = gamma.ok_or_else(|| Error::Usage("either 'n' with 'p' or 'gamma' is required".into()))?;
                let x = xi.ok_or_else(|| Error::Usage("either 'n' with 'r' or 'xi' is required".into()))?;
                (g, x)
            }
        };
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Usage(format!("gamma = p/n must be positive, got {gamma}")));
        }
        if !(xi > 0.0 && xi <= 1.0) {
            return Err(Error::Usage(format!("xi = r/n must lie in (0, 1], got {xi}")));
        }
        Ok(Self { n, p, r, gamma, xi })
    }

    fn aspect(&self) -> Result<AspectRatios> {
        AspectRatios::new(self.gamma, self.xi)
    }
}

fn count(x: Option<usize>) -> String {
    x.map_or_else(|| "NA".into(), |v| v.to_string())
}

fn spikes(s: &Settings) -> Result<Vec<f64>> {
    let d: Vec<f64> = s.list("d")?.ok_or_else(|| Error::Usage("missing required setting 'd'".into()))?;
    if d.is_empty() || d.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
        return Err(Error::Usage("spike strengths must be positive".into()));
    }
    Ok(d)
}

pub fn predict(s: &Settings, header: &Header, out: &mut dyn Write) -> Result<()> {
    let dims = Dims::from_settings(s)?;
    let d = spikes(s)?;
    let methods: Vec<SketchMethod> = s.list("method")?.unwrap_or_else(|| vec![SketchMethod::Haar]);
    let sigma = s.get::<SigmaModel>("sigma")?.unwrap_or(SigmaModel::Identity);
    let predictor: Predictor = s.get("predictor")?.unwrap_or_default();
    let identity = sigma.is_identity();
    let summary = if identity {
        None
    } else {
        let p = dims
            .p
            .ok_or_else(|| Error::Usage("a sigma other than identity needs 'n' and 'p'".into()))?;
        Some(make_sigma(&sigma, p)?.nominal_summary(d.len()))
    };
    if summary.is_some() && d.windows(2).any(|w| w[0] <= w[1]) {
        return Err(Error::Usage("spike strengths must be strictly decreasing".into()));
    }
    let ar = dims.aspect()?;

    let mut rows = Vec::new();
    for method in methods {
        let resolved = predictor.resolve(method, identity);
        let xi_used = match resolved {
            Predictor::CountSketch => effective_xi_countsketch(dims.xi),
            other => harness::prediction_xi(method, other, dims.xi),
        };
        let preds = predict_all(resolved, &d, ar.with_xi(harness::prediction_xi(method, resolved, dims.xi))?, summary.as_ref())?;
        let note = match resolved {
            Predictor::None => format!("no theory available for {method}"),
            _ if xi_used != dims.xi => "xi_hat substituted".into(),
            _ => String::new(),
        };
        for (i, di) in d.iter().enumerate() {
            let mut row = vec![
                method.to_string(),
                count(dims.n),
                count(dims.p),
                count(dims.r),
                num(dims.gamma),
                num(dims.xi),
                num(xi_used),
                resolved.to_string(),
                num(*di),
            ];
            match preds.get(i) {
                Some(p) => row.extend([
                    num(p.theta),
                    num(p.cos2),
                    p.above_threshold.to_string(),
                    num(p.lambda_plus),
                    num(p.d_critical),
                ]),
                None => row.extend(std::iter::repeat_n("NA".to_string(), 5)),
            }
            row.push(note.clone());
            rows.push(row);
        }
    }
    let head = [
        "method", "n", "p", "r", "gamma", "xi", "xi_used", "predictor", "d", "theta", "cos2",
        "above_threshold", "lambda_plus", "d_critical", "note",
    ];
    table(out, &header.lines(s, None, &[]), &head, &rows)
}

pub fn shrink(s: &Settings, header: &Header, out: &mut dyn Write) -> Result<()> {
    let dims = Dims::from_settings(s)?;
    let lambdas: Vec<f64> =
        s.list("lambda")?.ok_or_else(|| Error::Usage("missing required setting 'lambda'".into()))?;
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
        return Err(Error::Usage("sketched eigenvalues must be non-negative".into()));
    }
    let loss: ShrinkLoss = s.get("loss")?.unwrap_or(ShrinkLoss::Operator);
    let ar = dims.aspect()?;
    let rows: Vec<Vec<String>> = lambdas
        .iter()
        .map(|&l| {
            let x = l.sqrt();
            let shrunk = shrinker(x, ar, loss);
            vec![
                num(l),
                num(x),
                loss.to_string(),
                num(shrunk.value_or_zero()),
                shrunk.is_above().to_string(),
            ]
        })
        .collect();
    let extra = format!("edge: {}", num(ar.lambda_plus_orthogonal()));
    table(
        out,
        &header.lines(s, None, &[&extra]),
        &["lambda", "singular_value", "loss", "shrunk", "above_threshold"],
        &rows,
    )
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(prefix.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

pub fn simulate(s: &Settings, header: &Header, compare: bool, out: &mut dyn Write) -> Result<()> {
    let cfg = ExperimentConfig::from_settings(s)?;
    if compare && cfg.sketches.len() < 2 {
        return Err(Error::Usage("compare needs at least two methods in 'method'".into()));
    }
    let result = harness::run(&cfg)?;
    let k = cfg.model.k();
    let comments = header.lines(s, Some(cfg.base_seed), &[]);
    match &cfg.outputs {
        Some(prefix) => {
            harness::write_records_file(&with_suffix(prefix, "_records.csv"), k, &result.records, &comments)?;
            harness::write_aggregates_file(&with_suffix(prefix, "_summary.csv"), k, &result.aggregates, &comments)
        }
        None => harness::write_aggregates(out, k, &result.aggregates, &comments).map_err(io_err),
    }
}

pub fn verify(s: &Settings, header: &Header, out: &mut dyn Write) -> Result<()> {
    let input: PathBuf = s.require("input")?;
    let format = s.get::<FileFormat>("format")?.unwrap_or_else(|| FileFormat::from_path(&input));
    let token = s.raw("missing-token").unwrap_or("NA").to_string();
    let raw = fielddata::load_matrix(&input, format, &token)?;
    let missing = raw.missing_count();
    let x = if s.flag("no-standardize")? {
        if missing > 0 {
            return Err(Error::Data(format!(
                "{missing} missing entries; drop --no-standardize to impute them"
            )));
        }
        if s.flag("center")? {
            fielddata::center_columns(&raw.values)
        } else {
            raw.values
        }
    } else {
        let sd = s.get::<SdConvention>("sd")?.unwrap_or_default();
        fielddata::standardize(&raw, sd)?.data
    };
    let (n, p) = x.shape();

    let method: SketchMethod = s.get("method")?.unwrap_or(SketchMethod::Haar);
    let r = match (s.get::<usize>("r")?, s.get::<f64>("xi")?) {
        (Some(r), _) => r,
        (None, Some(xi)) if xi > 0.0 && xi <= 1.0 => ((xi * n as f64).round() as usize).max(1),
        (None, Some(xi)) => return Err(Error::Usage(format!("xi must lie in (0, 1], got {xi}"))),
        (None, None) => return Err(Error::Usage("either 'r' or 'xi' is required".into())),
    };
    let mut spec = SketchSpec::new(method, r)
        .with_iid_law(s.get::<IidLaw>("iid-law")?.unwrap_or_default())
        .with_sampling(s.get::<RowSampling>("sampling")?.unwrap_or_default())
        .with_random_signs(s.flag("random-signs")?);
    if let Some(os) = s.get::<usize>("osnap-s")? {
        spec = spec.with_osnap_s(os);
    }
    spec.validate(n)?;
    let reps: usize = s.get("reps")?.unwrap_or(1);
    if reps == 0 {
        return Err(Error::Usage("reps must be at least 1".into()));
    }
    let seed: u64 = s.get("seed")?.unwrap_or(0);

    let mut rows = Vec::new();
    let mut ts = Vec::new();
    let (mut l_full, mut l_sk, mut g_sk) = (0.0, 0.0, 0.0);
    for rep in 0..reps {
        let res = fielddata::t_statistic(&x, &spec, &RngStream::new(seed, rep as u64))?;
        if let Some(t) = res.t {
            ts.push(t);
        }
        l_full += res.lambda1_full / reps as f64;
        l_sk += res.lambda1_sketched / reps as f64;
        g_sk += res.gamma_sketched / reps as f64;
        rows.push(vec![
            rep.to_string(),
            method.to_string(),
            n.to_string(),
            p.to_string(),
            r.to_string(),
            res.t.map_or_else(|| "NA".into(), num),
            detection(res.ell_full),
            detection(res.ell_sketched),
            num(res.lambda1_full),
            num(res.lambda1_sketched),
            num(res.gamma_full),
            num(res.gamma_sketched),
            res.below_edge().to_string(),
        ]);
    }
    let t_mean = if ts.is_empty() {
        "NA".into()
    } else {
        num(ts.iter().sum::<f64>() / ts.len() as f64)
    };
    rows.push(vec![
        "mean".into(),
        method.to_string(),
        n.to_string(),
        p.to_string(),
        r.to_string(),
        t_mean,
        "NA".into(),
        "NA".into(),
        num(l_full),
        num(l_sk),
        num(p as f64 / n as f64),
        num(g_sk),
        format!("{}/{reps}", reps - ts.len()),
    ]);
    let scaling = "scaling: full Gram / n, sketched Gram / ||S||_F^2, classical inverse at p/n and p/r";
    let missing = format!("missing_entries: {missing}");
    let head = [
        "rep", "method", "n", "p", "r", "t", "ell_full", "ell_sketched", "lambda1_full", "lambda1_sketched",
        "gamma_full", "gamma_sketched", "below_edge",
    ];
    table(out, &header.lines(s, Some(seed), &[scaling, &missing]), &head, &rows)
}

