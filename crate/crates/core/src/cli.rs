//! Command-line front end behind the `ridgepen` binary.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dispatch::{EstimatorSettings, Problem, ResponseModel};
use crate::error::{input, Error, Result};
use crate::glm::GlmFamily;
use crate::linalg::DesignMatrix;
use crate::linear::Method;
use crate::matio::{read_matrix, read_vector};
use crate::report::{write_rows, write_summary, Format, ReportRow};
use crate::rng::{stream, Stream};
use crate::sim::{run_comparison, ErrorModel, ResponseKind, SimConfig};

#[derive(Debug, Parser)]
#[command(name = "ridgepen", version, about = "Ridge penalty and variance component estimation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run estimators on a design matrix and response read from files.
    Estimate(EstimateArgs),
    /// Run a replicate sweep from a config file (or the standard setting).
    Simulate(SimulateArgs),
    /// Time single fits over a grid of problem sizes.
    Bench(BenchArgs),
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.trim().parse()
}

fn parse_family(s: &str) -> std::result::Result<GlmFamily, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (n, p) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("size '{s}' must look like NxP, e.g. 100x1000"))?;
    let n = n.trim().parse().map_err(|_| format!("size '{s}': bad n"))?;
    let p = p.trim().parse().map_err(|_| format!("size '{s}': bad p"))?;
    Ok((n, p))
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// csv or json; defaults to the extension of --out, else csv.
    #[arg(long, value_parser = parse_format)]
    pub format: Option<Format>,
}

impl OutputArgs {
    fn format(&self) -> Format {
        self.format.unwrap_or_else(|| match self.out.as_ref().and_then(|p| p.extension()).and_then(|e| e.to_str()) {
            Some("json") => Format::Json,
            _ => Format::Csv,
        })
    }

    fn sibling(&self, suffix: &str, ext: &str) -> Option<PathBuf> {
        let out = self.out.as_ref()?;
        let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
        Some(out.with_file_name(format!("{stem}_{suffix}.{ext}")))
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// n×p design matrix (CSV or binary).
    #[arg(long)]
    pub x: PathBuf,
    /// Response vector, one value per row of X.
    #[arg(long)]
    pub y: PathBuf,
    /// Optional n×m fixed-effect design for reml and mml_mixed.
    #[arg(long)]
    pub xf: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "mml")]
    pub estimators: Vec<Method>,
    /// gaussian, poisson or binomial:N.
    #[arg(long, value_parser = parse_family, default_value = "gaussian")]
    pub family: GlmFamily,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long = "k-folds", default_value_t = 10)]
    pub k_folds: usize,
    #[arg(long)]
    pub no_standardize: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    /// JSON or TOML config; the standard setting when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Overrides `base_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub estimators: Option<Vec<Method>>,
    /// Switches the response to poisson or binomial:N (gaussian keeps a linear response).
    #[arg(long, value_parser = parse_family)]
    pub family: Option<GlmFamily>,
    #[arg(long = "k-folds")]
    pub k_folds: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    #[arg(long)]
    pub no_standardize: bool,
    /// Caps exported estimates at 20× the truth (the summary is unaffected).
    #[arg(long = "truncate-20x")]
    pub truncate_20x: bool,
    #[command(flatten)]
    pub output: OutputArgs,
}

pub const DEFAULT_BENCH_SIZES: [(usize, usize); 6] =
    [(100, 1_000), (100, 10_000), (100, 100_000), (500, 1_000), (500, 10_000), (500, 100_000)];

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    /// Comma-separated NxP sizes.
    #[arg(long, value_delimiter = ',', value_parser = parse_size)]
    pub sizes: Option<Vec<(usize, usize)>>,
    #[arg(long, value_delimiter = ',', value_parser = parse_method, default_value = "mml,mom,basic,gcv,hilmm,bayes_eb")]
    pub estimators: Vec<Method>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long = "k-folds", default_value_t = 10)]
    pub k_folds: usize,
    #[command(flatten)]
    pub output: OutputArgs,
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::File {
            path: p.to_path_buf(),
            message: e.to_string(),
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn model_for(family: GlmFamily) -> ResponseModel {
    match family {
        GlmFamily::Gaussian => ResponseModel::Linear,
        f => ResponseModel::Glm(f),
    }
}

/// Runs the estimators on file inputs. Estimator failures become rows, not errors.
pub fn estimate(args: &EstimateArgs) -> Result<Vec<ReportRow>> {
    let raw = read_matrix(&args.x)?;
    let y = read_vector(&args.y)?;
    if y.len() != raw.nrows() {
        return Err(Error::File {
            path: args.y.clone(),
            message: format!("response has {} values, expected {} (rows of {})", y.len(), raw.nrows(), args.x.display()),
        });
    }
    let x = DesignMatrix::new(raw)?;
    let x = if args.no_standardize { x } else { x.standardize()? };
    let mut problem = Problem::new(x, y, args.seed)?
        .with_model(model_for(args.family))?
        .with_settings(EstimatorSettings {
            k_folds: args.k_folds,
            ..EstimatorSettings::default()
        });
    if let Some(path) = &args.xf {
        problem = problem.with_fixed(read_matrix(path)?)?;
    }
    Ok(args
        .estimators
        .iter()
        .map(|&m| match problem.run(m) {
            Ok(r) => ReportRow::from_report(&r, Some(args.seed), None),
            Err(e) => {
                let shown = model_for(args.family).route(m).unwrap_or(m);
                ReportRow::failure(shown, &e, Some(args.seed), None)
            }
        })
        .collect())
}

/// The effective sweep configuration after applying command-line overrides.
pub fn simulate_config(args: &SimulateArgs) -> Result<SimConfig> {
    let mut cfg = match &args.config {
        Some(path) => SimConfig::load(path)?,
        None => SimConfig::standard(),
    };
    if let Some(r) = args.replicates {
        cfg.replicates = r;
    }
    if let Some(s) = args.seed {
        cfg.base_seed = s;
    }
    if let Some(k) = args.k_folds {
        cfg.settings.k_folds = k;
    }
    if args.no_standardize {
        cfg.standardize = false;
    }
    match args.family {
        None => {}
        Some(GlmFamily::Gaussian) => {
            if cfg.response.is_glm() {
                cfg.response = ResponseKind::Linear;
                cfg.errors = Some(ErrorModel::Gaussian { sigma2: 10.0 });
            }
        }
        Some(GlmFamily::Poisson) => {
            cfg.response = ResponseKind::Poisson;
            cfg.errors = None;
        }
        Some(GlmFamily::Binomial { n_trials }) => {
            cfg.response = ResponseKind::Binomial { n_trials };
            cfg.errors = None;
        }
    }
    if let Some(est) = &args.estimators {
        cfg.estimators = est.iter().map(Method::to_string).collect();
    } else if args.family.is_some_and(|f| f != GlmFamily::Gaussian) && args.config.is_none() {
        cfg.estimators = vec!["glm_mml".into(), "glm_cv".into()];
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let cfg = simulate_config(args)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.threads.max(1))
        .build()
        .map_err(|e| input(format!("cannot start {} threads: {e}", args.threads)))?;
    let out = pool.install(|| run_comparison(&cfg))?;
    let mut rows = out.rows;
    if args.truncate_20x {
        rows.iter_mut().for_each(|r| r.truncate_20x(&out.truth));
    }
    let format = args.output.format();
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    write_rows(&rows, format, open_out(args.output.out.as_deref())?)?;
    match args.output.sibling("summary", ext) {
        Some(path) => {
            write_summary(&out.summary, format, open_out(Some(&path))?)?;
            let echo = args.output.sibling("config", "toml").expect("sibling of --out");
            std::fs::write(&echo, cfg.to_toml()).map_err(|e| Error::File { path: echo, message: e.to_string() })?;
        }
        None => write_summary(&out.summary, format, io::stderr().lock())?,
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: Method,
    pub n: usize,
    pub p: usize,
    /// Seconds for the fit alone (data generation and standardization excluded).
    pub seconds: Option<f64>,
    pub converged: bool,
    pub note: Option<String>,
}

fn available_memory() -> Option<u64> {
    let text = std::fs::read_to_string("/proc/meminfo").ok()?;
    let line = text.lines().find(|l| l.starts_with("MemAvailable:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Rough peak footprint of one fit: the design, its standardized copy and the SVD factors.
fn bench_bytes(n: usize, p: usize) -> u64 {
    4 * (n as u64) * (p as u64) * 8
}

pub fn bench_design(n: usize, p: usize, seed: u64) -> Result<(DesignMatrix, DVector<f64>)> {
    let mut rng = stream(seed, Stream::Bench);
    let x = DesignMatrix::standardized(DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng)))?;
    let mut draw = |scale: f64| -> f64 {
        let z: f64 = StandardNormal.sample(&mut rng);
        scale * z
    };
    let beta = DVector::from_fn(p, |_, _| draw(0.1));
    let noise = DVector::from_fn(n, |_, _| draw(10f64.sqrt()));
    let y = x.values() * beta + noise;
    Ok((x, y))
}

pub fn bench(sizes: &[(usize, usize)], methods: &[Method], seed: u64, k_folds: usize) -> Result<Vec<BenchRow>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .map_err(|e| input(e.to_string()))?;
    pool.install(|| {
        let mut rows = Vec::new();
        for &(n, p) in sizes {
            let fail_all = |note: String| methods.iter().map(move |&m| BenchRow { method: m, n, p, seconds: None, converged: false, note: Some(note.clone()) });
            let need = bench_bytes(n, p);
            if let Some(avail) = available_memory().filter(|&a| a < need) {
                rows.extend(fail_all(format!(
                    "error: insufficient memory for {n}x{p}: needs about {:.2} GB, {:.2} GB available",
                    need as f64 / 1e9,
                    avail as f64 / 1e9
                )));
                continue;
            }
            let (x, y) = match bench_design(n, p, seed) {
                Ok(d) => d,
                Err(e) => {
                    rows.extend(fail_all(format!("error: {e}")));
                    continue;
                }
            };
            for &m in methods {
                // fresh problem per method so no estimator reuses another's decomposition
                let problem = Problem::new(x.clone(), y.clone(), seed)?.with_settings(EstimatorSettings {
                    k_folds,
                    ..EstimatorSettings::default()
                });
                let start = Instant::now();
                let result = problem.run(m);
                let seconds = start.elapsed().as_secs_f64();
                rows.push(match result {
                    Ok(r) => BenchRow { method: m, n, p, seconds: Some(seconds), converged: r.converged, note: r.note },
                    Err(e) => BenchRow { method: m, n, p, seconds: None, converged: false, note: Some(format!("error: {e}")) },
                });
            }
        }
        Ok(rows)
    })
}

pub fn write_bench<W: Write>(rows: &[BenchRow], format: Format, mut w: W) -> Result<()> {
    match format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, rows).map_err(|e| Error::Numeric(e.to_string()))?;
            writeln!(w)?;
        }
        Format::Csv => {
            let mut out = csv::Writer::from_writer(w);
            for r in rows {
                out.serialize(r).map_err(|e| Error::Numeric(e.to_string()))?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Estimate(args) => {
            let rows = estimate(&args)?;
            write_rows(&rows, args.output.format(), open_out(args.output.out.as_deref())?)
        }
        Command::Simulate(args) => simulate(&args),
        Command::Bench(args) => {
            let sizes = args.sizes.clone().unwrap_or_else(|| DEFAULT_BENCH_SIZES.to_vec());
            let rows = bench(&sizes, &args.estimators, args.seed, args.k_folds)?;
            write_bench(&rows, args.output.format(), open_out(args.output.out.as_deref())?)
        }
    }
}

/// Entry point for the binary; returns the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
