use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spikesketch::error::Category;
use spikesketch::harness::Settings;
use spikesketch::sketch::SketchMethod;

mod commands;

#[derive(Parser)]
#[command(name = "spikesketch", version, about = "Sketched PCA under spiked models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Limiting sketched eigenvalue and overlap for each spike
    #[command(after_help = methods_help())]
    Predict(PredictArgs),
    /// Seeded Monte Carlo run of one or more sketches
    #[command(after_help = methods_help())]
    Simulate(SimulateArgs),
    /// Paired Monte Carlo comparison of two or more sketches
    #[command(after_help = methods_help())]
    Compare(SimulateArgs),
    /// Sketch-consistency statistic T on a data matrix
    #[command(after_help = methods_help())]
    Verify(VerifyArgs),
    /// Optimal shrinkage of sketched eigenvalues
    Shrink(ShrinkArgs),
}

fn methods_help() -> String {
    format!(
        "Sketch methods: {}\n\nEvery flag can also be given as `key = value` in a --config file; flags win.",
        SketchMethod::canonical_names()
    )
}

#[derive(Args)]
struct Common {
    /// Settings file of `key = value` lines
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Drop the timestamp comment and record wall time as 0 (byte-reproducible output)
    #[arg(long)]
    no_timestamp: bool,
}

#[derive(Args)]
struct Dims {
    /// Samples
    #[arg(long)]
    n: Option<usize>,
    /// Features
    #[arg(long)]
    p: Option<usize>,
    /// Sketch rows
    #[arg(long)]
    r: Option<usize>,
    /// p/n, used when --p is absent
    #[arg(long)]
    gamma: Option<f64>,
    /// r/n, used when --r is absent
    #[arg(long)]
    xi: Option<f64>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    dims: Dims,
    /// Comma-separated spike strengths, descending
    #[arg(long, value_name = "LIST")]
    d: Option<String>,
    /// Comma-separated sketch methods [default: haar]
    #[arg(long, value_name = "LIST")]
    method: Option<String>,
    /// identity | toeplitz:Q | step:VxC,... | file:PATH
    #[arg(long)]
    sigma: Option<String>,
    /// auto | orthogonal_family | iid | countsketch | large_signal | none
    #[arg(long)]
    predictor: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    dims: Dims,
    /// Comma-separated spike strengths, descending
    #[arg(long, value_name = "LIST")]
    d: Option<String>,
    /// Comma-separated sketch methods [default: haar]
    #[arg(long, value_name = "LIST")]
    method: Option<String>,
    /// identity | toeplitz:Q | step:VxC,... | file:PATH
    #[arg(long)]
    sigma: Option<String>,
    /// auto | orthogonal_family | iid | countsketch | large_signal | none
    #[arg(long)]
    predictor: Option<String>,
    /// gaussian | uniform
    #[arg(long)]
    noise: Option<String>,
    /// haar | localized
    #[arg(long)]
    basis: Option<String>,
    /// gaussian | rademacher
    #[arg(long)]
    iid_law: Option<String>,
    /// bernoulli | fixed
    #[arg(long)]
    sampling: Option<String>,
    /// Random row signs for uniform sampling
    #[arg(long)]
    random_signs: bool,
    /// Nonzeros per column for osnap
    #[arg(long)]
    osnap_s: Option<usize>,
    /// Repetitions [default: 20]
    #[arg(long)]
    reps: Option<usize>,
    /// Base seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated values of d_1 to sweep
    #[arg(long, value_name = "LIST")]
    d_grid: Option<String>,
    /// Sketch the noise alone
    #[arg(long)]
    noise_only: bool,
    /// Reject signal vectors that are not delocalized
    #[arg(long)]
    delocalization_check: bool,
    /// Write PREFIX_records.csv and PREFIX_summary.csv instead of stdout
    #[arg(long, value_name = "PREFIX")]
    out: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct VerifyArgs {
    /// CSV or TSV matrix, rows are samples
    #[arg(long, value_name = "PATH")]
    input: Option<PathBuf>,
    /// csv | tsv [default: from extension]
    #[arg(long)]
    format: Option<String>,
    /// Sketch method [default: haar]
    #[arg(long)]
    method: Option<String>,
    /// Sketch rows
    #[arg(long)]
    r: Option<usize>,
    /// r/n, used when --r is absent
    #[arg(long)]
    xi: Option<f64>,
    /// Independent sketches [default: 1]
    #[arg(long)]
    reps: Option<usize>,
    /// Base seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Token marking a missing entry [default: NA]
    #[arg(long)]
    missing_token: Option<String>,
    /// Use the matrix as read
    #[arg(long)]
    no_standardize: bool,
    /// Center columns (only with --no-standardize)
    #[arg(long)]
    center: bool,
    /// sample | population [default: sample]
    #[arg(long)]
    sd: Option<String>,
    /// gaussian | rademacher
    #[arg(long)]
    iid_law: Option<String>,
    /// bernoulli | fixed
    #[arg(long)]
    sampling: Option<String>,
    /// Random row signs for uniform sampling
    #[arg(long)]
    random_signs: bool,
    /// Nonzeros per column for osnap
    #[arg(long)]
    osnap_s: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ShrinkArgs {
    /// Comma-separated sketched eigenvalues
    #[arg(long, value_name = "LIST")]
    lambda: Option<String>,
    #[command(flatten)]
    dims: Dims,
    /// operator | frobenius [default: operator]
    #[arg(long)]
    loss: Option<String>,
    #[command(flatten)]
    common: Common,
}

/// Flag values as settings entries; unset flags leave config values alone.
#[derive(Default)]
struct Flags(Settings);

impl Flags {
    fn opt<T: ToString>(&mut self, key: &str, v: &Option<T>) -> &mut Self {
        if let Some(v) = v {
            self.0.set(key, v.to_string());
        }
        self
    }

    fn path(&mut self, key: &str, v: &Option<PathBuf>) -> &mut Self {
        if let Some(v) = v {
            self.0.set(key, v.to_string_lossy());
        }
        self
    }

    fn on(&mut self, key: &str, v: bool) -> &mut Self {
        if v {
            self.0.set(key, "true");
        }
        self
    }

    fn dims(&mut self, d: &Dims) -> &mut Self {
        self.opt("n", &d.n).opt("p", &d.p).opt("r", &d.r).opt("gamma", &d.gamma).opt("xi", &d.xi)
    }
}

fn settings(common: &Common, flags: Flags) -> spikesketch::Result<Settings> {
    let mut s = match &common.config {
        Some(path) => Settings::load(path)?,
        None => Settings::new(),
    };
    s.merge(&flags.0);
    if common.no_timestamp {
        s.set("no-timing", "true");
    }
    Ok(s)
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> spikesketch::Result<()> {
    match cmd {
        Command::Predict(a) => {
            let mut f = Flags::default();
            f.dims(&a.dims).opt("d", &a.d).opt("method", &a.method).opt("sigma", &a.sigma).opt("predictor", &a.predictor);
            let s = settings(&a.common, f)?;
            commands::predict(&s, &commands::Header::new("predict", &a.common.config, !a.common.no_timestamp), out)
        }
        Command::Simulate(a) => simulate("simulate", a, out),
        Command::Compare(a) => simulate("compare", a, out),
        Command::Verify(a) => {
            let mut f = Flags::default();
            f.path("input", &a.input)
                .opt("format", &a.format)
                .opt("method", &a.method)
                .opt("r", &a.r)
                .opt("xi", &a.xi)
                .opt("reps", &a.reps)
                .opt("seed", &a.seed)
                .opt("missing-token", &a.missing_token)
                .on("no-standardize", a.no_standardize)
                .on("center", a.center)
                .opt("sd", &a.sd)
                .opt("iid-law", &a.iid_law)
                .opt("sampling", &a.sampling)
                .on("random-signs", a.random_signs)
                .opt("osnap-s", &a.osnap_s);
            let s = settings(&a.common, f)?;
            commands::verify(&s, &commands::Header::new("verify", &a.common.config, !a.common.no_timestamp), out)
        }
        Command::Shrink(a) => {
            let mut f = Flags::default();
            f.opt("lambda", &a.lambda).dims(&a.dims).opt("loss", &a.loss);
            let s = settings(&a.common, f)?;
            commands::shrink(&s, &commands::Header::new("shrink", &a.common.config, !a.common.no_timestamp), out)
        }
    }
}

fn simulate(name: &'static str, a: SimulateArgs, out: &mut dyn Write) -> spikesketch::Result<()> {
    let mut f = Flags::default();
    f.dims(&a.dims)
        .opt("d", &a.d)
        .opt("method", &a.method)
        .opt("sigma", &a.sigma)
        .opt("predictor", &a.predictor)
        .opt("noise", &a.noise)
        .opt("basis", &a.basis)
        .opt("iid-law", &a.iid_law)
        .opt("sampling", &a.sampling)
        .on("random-signs", a.random_signs)
        .opt("osnap-s", &a.osnap_s)
        .opt("reps", &a.reps)
        .opt("seed", &a.seed)
        .opt("d-grid", &a.d_grid)
        .on("noise-only", a.noise_only)
        .on("delocalization-check", a.delocalization_check)
        .path("out", &a.out);
    let s = settings(&a.common, f)?;
    let header = commands::Header::new(name, &a.common.config, !a.common.no_timestamp);
    commands::simulate(&s, &header, name == "compare", out)
}

fn exit_code(c: Category) -> u8 {
    match c {
        Category::Usage => 2,
        Category::Data => 3,
        Category::Numerical => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = io::BufWriter::new(stdout.lock());
    let result = dispatch(cli.command, &mut out);
    let flushed = out.flush();
    match result {
        Ok(()) => {
            if let Err(e) = flushed {
                if e.kind() != io::ErrorKind::BrokenPipe {
                    eprintln!("spikesketch: writing output: {e}");
                    return ExitCode::from(3);
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("spikesketch: {e}");
            ExitCode::from(exit_code(e.category()))
        }
    }
}
