//! Seeded Monte Carlo experiments: generate, sketch, measure, compare with
//! theory.

mod output;
mod settings;

use std::path::PathBuf;
use std::time::Instant;

use rayon::prelude::*;

use crate::error::{ensure, Result};
use crate::model::{NoiseLaw, SignalBasis, SigmaModel, SpikedModel, SpikedModelSpec};
use crate::numerics::{top_k_spectrum, DenseMatrix, RngStream};
use crate::sketch::{apply_sketch, build_data_sketch, IidLaw, RowSampling, SketchMethod, SketchSpec};
use crate::theory::{effective_xi_countsketch, predict_all, AspectRatios, CovSummary, Predictor, SpikePrediction};

pub use output::{
    aggregate_header, read_csv_rows, record_header, write_aggregates, write_aggregates_file, write_records,
    write_records_file,
};
pub use settings::Settings;

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub model: SpikedModelSpec,
    pub sketches: Vec<SketchSpec>,
    pub reps: usize,
    pub base_seed: u64,
    /// Values of `d₁` to sweep; the other spikes keep their ratios to `d₁`.
    pub d_grid: Option<Vec<f64>>,
    pub outputs: Option<PathBuf>,
    pub predictor: Predictor,
    /// Drop the signal term and sketch `XΣ^{1/2}` alone.
    pub noise_only: bool,
    /// Record wall-clock time per record. Off gives byte-reproducible CSV.
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(model: SpikedModelSpec, sketches: Vec<SketchSpec>) -> Self {
        Self {
            model,
            sketches,
            reps: 20,
            base_seed: 0,
            d_grid: None,
            outputs: None,
            predictor: Predictor::Auto,
            noise_only: false,
            timing: true,
        }
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.base_seed = seed;
        self
    }

    pub fn with_d_grid(mut self, grid: Vec<f64>) -> Self {
        self.d_grid = Some(grid);
        self
    }

    pub fn with_predictor(mut self, predictor: Predictor) -> Self {
        self.predictor = predictor;
        self
    }

    pub fn with_noise_only(mut self, on: bool) -> Self {
        self.noise_only = on;
        self
    }

    pub fn with_timing(mut self, on: bool) -> Self {
        self.timing = on;
        self
    }

    /// Builds a config from flat settings. `n`, `d` are required; `p` and
    /// `r` may be given directly or through `gamma = p/n` and `xi = r/n`
    /// (explicit counts win).
    pub fn from_settings(s: &Settings) -> Result<Self> {
        let n: usize = s.require("n")?;
        let p = match s.get::<usize>("p")? {
            Some(p) => p,
            None => ratio_count(s.get::<f64>("gamma")?, n, "p", "gamma")?,
        };
        let r = match s.get::<usize>("r")? {
            Some(r) => r,
            None => ratio_count(s.get::<f64>("xi")?, n, "r", "xi")?,
        };
        let d: Vec<f64> = s
            .list("d")?
            .ok_or_else(|| crate::Error::Usage("missing required setting 'd'".into()))?;
        let mut model = SpikedModelSpec::new(n, p, d)
            .with_noise(s.get::<NoiseLaw>("noise")?.unwrap_or_default())
            .with_sigma(s.get::<SigmaModel>("sigma")?.unwrap_or(SigmaModel::Identity))
            .with_delocalization_check(s.flag("delocalization-check")?);
        match s.raw("basis") {
            None | Some("haar") => {}
            Some("localized") => model = model.with_basis(SignalBasis::Localized),
            Some(other) => {
                return Err(crate::Error::Usage(format!("unknown basis '{other}'; expected haar or localized")));
            }
        }

        let methods: Vec<SketchMethod> = s.list("method")?.unwrap_or_else(|| vec![SketchMethod::Haar]);
        let iid_law = s.get::<IidLaw>("iid-law")?.unwrap_or_default();
        let sampling = s.get::<RowSampling>("sampling")?.unwrap_or_default();
        let random_signs = s.flag("random-signs")?;
        let osnap_s = s.get::<usize>("osnap-s")?;
        let sketches = methods
            .into_iter()
            .map(|m| {
                let mut spec = SketchSpec::new(m, r)
                    .with_iid_law(iid_law)
                    .with_sampling(sampling)
                    .with_random_signs(random_signs);
                if let Some(os) = osnap_s {
                    spec = spec.with_osnap_s(os);
                }
                spec
            })
            .collect();

        let cfg = ExperimentConfig {
            model,
            sketches,
            reps: s.get("reps")?.unwrap_or(20),
            base_seed: s.get("seed")?.unwrap_or(0),
            d_grid: s.list("d-grid")?,
            outputs: s.get::<PathBuf>("out")?,
            predictor: s.get::<Predictor>("predictor")?.unwrap_or_default(),
            noise_only: s.flag("noise-only")?,
            timing: !s.flag("no-timing")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.reps >= 1, Usage, "reps must be at least 1");
        ensure!(!self.sketches.is_empty(), Usage, "at least one sketch method is required");
        if let Some(grid) = &self.d_grid {
            ensure!(!grid.is_empty(), Usage, "d grid is empty");
            ensure!(
                grid.iter().all(|g| g.is_finite() && *g > 0.0),
                Usage,
                "d grid entries must be positive"
            );
        }
        self.model.validate()?;
        for spec in &self.sketches {
            spec.validate(self.model.n)?;
            ensure!(
                self.model.k() <= spec.r.min(self.model.p),
                Usage,
                "k = {} exceeds min(r, p) for {}",
                self.model.k(),
                spec.method
            );
        }
        Ok(())
    }

    /// Spike vectors to run: the model's own `d`, or one per grid point.
    pub fn d_points(&self) -> Vec<Vec<f64>> {
        match &self.d_grid {
            None => vec![self.model.d.clone()],
            Some(grid) => grid
                .iter()
                .map(|g| self.model.d.iter().map(|x| x * g / self.model.d[0]).collect())
                .collect(),
        }
    }
}

fn ratio_count(ratio: Option<f64>, n: usize, count: &str, name: &str) -> Result<usize> {
    let ratio = ratio.ok_or_else(|| crate::Error::Usage(format!("either '{count}' or '{name}' is required")))?;
    ensure!(ratio > 0.0 && ratio.is_finite(), Usage, "'{name}' must be positive");
    Ok((ratio * n as f64).round() as usize)
}

/// One (rep, method, d) measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentRecord {
    pub method: SketchMethod,
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub rep: usize,
    pub d: Vec<f64>,
    /// Top-k eigenvalues of `(SY)ᵀ(SY)`.
    pub lambda_emp: Vec<f64>,
    /// `cos2_emp[(i, j)] = |⟨u_j, ξ̃ᵢ⟩|²`.
    pub cos2_emp: DenseMatrix,
    /// Empty when no theory applies.
    pub predicted: Vec<SpikePrediction>,
    /// Reduction factor used for `predicted`.
    pub xi_used: f64,
    pub seed: u64,
    pub wall_ms: f64,
}

impl ExperimentRecord {
    pub fn k(&self) -> usize {
        self.d.len()
    }

    pub fn cos2_diag(&self) -> Vec<f64> {
        (0..self.k()).map(|i| self.cos2_emp[(i, i)]).collect()
    }

    pub fn max_offdiag(&self) -> f64 {
        let k = self.k();
        let mut m = 0.0f64;
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    m = m.max(self.cos2_emp[(i, j)]);
                }
            }
        }
        m
    }
}

/// Mean and sample SD of one (method, d) cell over reps.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub method: SketchMethod,
    pub n: usize,
    pub p: usize,
    pub r: usize,
    pub d: Vec<f64>,
    pub reps: usize,
    pub lambda_emp_mean: Vec<f64>,
    pub lambda_emp_sd: Vec<f64>,
    pub cos2_emp_mean: Vec<f64>,
    pub cos2_emp_sd: Vec<f64>,
    pub offdiag_mean: f64,
    pub offdiag_sd: f64,
    /// Predictions at the nominal `ξ = r/n` (and `E = ρ₁I` for general `Σ`).
    pub nominal: Vec<SpikePrediction>,
    /// Per-rep predictions averaged; `None` without theory.
    pub lambda_pred_mean: Option<Vec<f64>>,
    pub cos2_pred_mean: Option<Vec<f64>>,
    pub seed: u64,
    pub wall_ms_mean: f64,
}

impl Aggregate {
    pub fn k(&self) -> usize {
        self.d.len()
    }

    /// Standard error of the mean `cos²` of spike `i`.
    pub fn cos2_se(&self, i: usize) -> f64 {
        self.cos2_emp_sd[i] / (self.reps as f64).sqrt()
    }

    pub fn lambda_se(&self, i: usize) -> f64 {
        self.lambda_emp_sd[i] / (self.reps as f64).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    /// Ordered by d point, then rep, then method.
    pub records: Vec<ExperimentRecord>,
    /// Ordered by d point, then method.
    pub aggregates: Vec<Aggregate>,
}

impl ExperimentOutput {
    pub fn aggregate(&self, method: SketchMethod, d1: f64) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method && a.d[0] == d1)
    }
}

// stream labels
const MODEL: u64 = 0x006d_6f64_656c;
const SKETCH: u64 = 0x736b_6574_6368;

/// Sample mean and SD (divisor `m − 1`; `NaN` for a single value).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0);
    (mean, var.sqrt())
}

/// Runs every sketch in the config on the same model draws.
///
/// Rep `j` uses `RngStream(base_seed, j)`; the model and each sketch get
/// derived child streams, so all methods in a rep see the same `Y`. Reps run
/// in parallel and are reduced in rep order.
pub fn run(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let mut records = Vec::new();
    let mut aggregates = Vec::new();
    for d in config.d_points() {
        let mut spec = config.model.clone();
        spec.d = d.clone();
        let model = SpikedModel::new(spec)?;
        let nominal = nominal_predictions(config, &model)?;
        let per_rep: Vec<Vec<ExperimentRecord>> = (0..config.reps)
            .into_par_iter()
            .map(|rep| run_rep(config, &model, rep))
            .collect::<Result<_>>()?;
        for (m, sketch) in config.sketches.iter().enumerate() {
            let cell: Vec<&ExperimentRecord> = per_rep.iter().map(|rs| &rs[m]).collect();
            aggregates.push(aggregate(config, sketch, &d, &cell, nominal[m].clone()));
        }
        records.extend(per_rep.into_iter().flatten());
    }
    Ok(ExperimentOutput { records, aggregates })
}

/// [`run`] for a list of sketches; one aggregate row per (method, d).
pub fn compare_methods(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    run(config)
}

fn run_rep(config: &ExperimentConfig, model: &SpikedModel, rep: usize) -> Result<Vec<ExperimentRecord>> {
    let stream = RngStream::new(config.base_seed, rep as u64);
    let spec = model.spec();
    let (y, u, cov) = if config.noise_only {
        let ds = model.generate(&stream.derive(MODEL))?;
        (ds.noise, ds.u, None)
    } else {
        let ds = model.generate(&stream.derive(MODEL))?;
        let cov = (!model.covariance().is_identity()).then(|| ds.cov_summary()).transpose()?;
        (ds.y, ds.u, cov)
    };
    let k = spec.k();
    let mut out = Vec::with_capacity(config.sketches.len());
    for (m, sketch) in config.sketches.iter().enumerate() {
        let start = Instant::now();
        let op = build_data_sketch(sketch, &y, &stream.derive(SKETCH).derive(m as u64))?;
        let sy = apply_sketch(&op, &y)?;
        let top = top_k_spectrum(&sy, k, 1e-8)?;
        let overlaps = top.right_vectors.tr_mul(&u);
        let cos2_emp = overlaps.map(|x| x * x);
        let predictor = config.predictor.resolve(sketch.method, model.covariance().is_identity());
        let realized = match sketch.method {
            SketchMethod::UniformSample | SketchMethod::Srht | SketchMethod::Dft => op.output_rows(),
            _ => sketch.r,
        } as f64
            / spec.n as f64;
        let xi_used = prediction_xi(sketch.method, predictor, realized);
        let predicted = predictions(predictor, &spec.d, spec.n, spec.p, xi_used, cov.as_ref())?;
        let wall_ms = if config.timing {
            start.elapsed().as_secs_f64() * 1e3
        } else {
            0.0
        };
        out.push(ExperimentRecord {
            method: sketch.method,
            n: spec.n,
            p: spec.p,
            r: sketch.r,
            rep,
            d: spec.d.clone(),
            lambda_emp: top.values,
            cos2_emp,
            predicted,
            xi_used,
            seed: config.base_seed,
            wall_ms,
        });
    }
    Ok(out)
}

/// The `ξ` handed to [`predict_all`]. The CountSketch predictor applies
/// `ξ̂` itself; the large-signal formulas take it pre-substituted.
pub fn prediction_xi(method: SketchMethod, predictor: Predictor, xi: f64) -> f64 {
    if predictor == Predictor::LargeSignal && method.is_countsketch() {
        effective_xi_countsketch(xi)
    } else {
        xi
    }
}

fn predictions(
    predictor: Predictor,
    d: &[f64],
    n: usize,
    p: usize,
    xi: f64,
    cov: Option<&CovSummary>,
) -> Result<Vec<SpikePrediction>> {
    if predictor == Predictor::None {
        return Ok(Vec::new());
    }
    let ar = AspectRatios::new(p as f64 / n as f64, xi.min(1.0))?;
    predict_all(predictor, d, ar, cov)
}

fn nominal_predictions(config: &ExperimentConfig, model: &SpikedModel) -> Result<Vec<Vec<SpikePrediction>>> {
    let spec = model.spec();
    let cov = model.covariance();
    let summary = (!cov.is_identity()).then(|| cov.nominal_summary(spec.k()));
    config
        .sketches
        .iter()
        .map(|sketch| {
            let predictor = config.predictor.resolve(sketch.method, cov.is_identity());
            let xi = prediction_xi(sketch.method, predictor, sketch.r as f64 / spec.n as f64);
            predictions(predictor, &spec.d, spec.n, spec.p, xi, summary.as_ref())
        })
        .collect()
}

fn aggregate(
    config: &ExperimentConfig,
    sketch: &SketchSpec,
    d: &[f64],
    cell: &[&ExperimentRecord],
    nominal: Vec<SpikePrediction>,
) -> Aggregate {
    let k = d.len();
    let column = |f: &dyn Fn(&ExperimentRecord) -> f64| -> (f64, f64) {
        let xs: Vec<f64> = cell.iter().map(|r| f(r)).collect();
        mean_sd(&xs)
    };
    let (mut lm, mut ls, mut cm, mut cs) = (vec![], vec![], vec![], vec![]);
    for i in 0..k {
        let (a, b) = column(&|r| r.lambda_emp[i]);
        lm.push(a);
        ls.push(b);
        let (a, b) = column(&|r| r.cos2_emp[(i, i)]);
        cm.push(a);
        cs.push(b);
    }
    let (offdiag_mean, offdiag_sd) = column(&|r| r.max_offdiag());
    let has_theory = cell.iter().all(|r| r.predicted.len() == k);
    let lambda_pred_mean = has_theory.then(|| (0..k).map(|i| column(&|r| r.predicted[i].theta).0).collect());
    let cos2_pred_mean = has_theory.then(|| (0..k).map(|i| column(&|r| r.predicted[i].cos2).0).collect());
    Aggregate {
        method: sketch.method,
        n: config.model.n,
        p: config.model.p,
        r: sketch.r,
        d: d.to_vec(),
        reps: cell.len(),
        lambda_emp_mean: lm,
        lambda_emp_sd: ls,
        cos2_emp_mean: cm,
        cos2_emp_sd: cs,
        offdiag_mean,
        offdiag_sd,
        nominal,
        lambda_pred_mean,
        cos2_pred_mean,
        seed: config.base_seed,
        wall_ms_mean: column(&|r| r.wall_ms).0,
    }
}
