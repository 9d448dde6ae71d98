use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use matsqrt_core::backward::{
    bartels_stewart, ns_sqrt_gradient, sqrt_lyapunov_gradient, DEFAULT_LYAPUNOV_ITERS, DEFAULT_TOLERANCE,
};
use matsqrt_core::bench::{write_csv, write_json, BenchConfig};
use matsqrt_core::selfcheck::{selfcheck, CheckOptions, Faults};
use matsqrt_core::whitening::{whiteness_deviation, DEFAULT_EPS};
use matsqrt_core::{
    count_ops, exact_sqrt_eig, forward, invsqrt_with, mae, pade_coefficients, random_covariance, random_symmetric,
    run_bench, sqrt_with, verify_no_poles, zca_whiten, FeatureMatrix, Matrix, Method, SymmetricMatrix, WhitenConfig,
};

const EXIT_VALIDATION: u8 = 1;
const EXIT_CRITERION: u8 = 2;

#[derive(Parser)]
#[command(name = "matsqrt", version, about = "Differentiable matrix square root toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print Pade coefficients and the pole-scan minimum.
    Coeffs(CoeffsArgs),
    /// Forward square root (or inverse square root) of a matrix.
    Sqrt(SqrtArgs),
    /// Gradient of <G, sqrt(A)> with respect to A.
    Grad(GradArgs),
    /// ZCA-whiten a feature batch.
    Whiten(WhitenArgs),
    /// Run the benchmark grid from a TOML config.
    Bench(BenchArgs),
    /// Run the acceptance checks; exits with 2 if any fails.
    Selfcheck(SelfcheckArgs),
}

#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Mtp,
    Mpa,
    Ns,
    NsSingle,
    Exact,
}

#[derive(Args, Clone)]
struct MethodOpts {
    #[arg(long, value_enum, default_value_t = MethodArg::Mpa)]
    method: MethodArg,
    /// Taylor degree K for MTP, matched degree M + N + 1 for MPA.
    #[arg(long, default_value_t = forward::DEFAULT_TAYLOR_DEGREE)]
    degree: usize,
    /// Newton-Schulz iterations.
    #[arg(long, default_value_t = forward::DEFAULT_NS_ITERS)]
    iters: usize,
}

impl MethodOpts {
    fn method(&self) -> anyhow::Result<Method> {
        Ok(match self.method {
            MethodArg::Mtp => Method::Mtp { degree: self.degree },
            MethodArg::Mpa => Method::mpa_for_degree(self.degree)?,
            MethodArg::Ns => Method::NsCoupled { iters: self.iters },
            MethodArg::NsSingle => Method::NsSingle { iters: self.iters },
            MethodArg::Exact => Method::Exact,
        })
    }
}

#[derive(Args, Clone)]
struct MatrixSource {
    /// Matrix file: first line n, then n rows of n values.
    #[arg(long, conflicts_with = "dim")]
    input: Option<PathBuf>,
    /// Generate a random SPD matrix of this size from --seed.
    #[arg(long)]
    dim: Option<usize>,
}

impl MatrixSource {
    fn load(&self, seed: u64) -> anyhow::Result<SymmetricMatrix> {
        match (&self.input, self.dim) {
            (Some(path), _) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                let m = Matrix::from_text(&text).with_context(|| format!("parsing {}", path.display()))?;
                if m.asymmetry() > 1e-12 * m.max_abs().max(1.0) {
                    bail!("{}: matrix is not symmetric", path.display());
                }
                Ok(SymmetricMatrix::symmetrize(m))
            }
            (None, Some(n)) => {
                if n == 0 {
                    bail!("--dim must be positive");
                }
                Ok(random_covariance(n, 4 * n, seed, 1e-3))
            }
            (None, None) => bail!("pass --input <file> or --dim <n>"),
        }
    }
}

#[derive(Args)]
struct CoeffsArgs {
    /// Numerator degree.
    #[arg(long, default_value_t = 5)]
    m: usize,
    /// Denominator degree.
    #[arg(long, default_value_t = 5)]
    n: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct SqrtArgs {
    #[command(flatten)]
    source: MatrixSource,
    #[command(flatten)]
    method: MethodOpts,
    /// Compute the inverse square root instead.
    #[arg(long)]
    inverse: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct GradArgs {
    #[command(flatten)]
    source: MatrixSource,
    /// Upstream gradient file; a random symmetric matrix from --seed otherwise.
    #[arg(long)]
    upstream: Option<PathBuf>,
    #[command(flatten)]
    method: MethodOpts,
    /// Lyapunov iteration cap (MTP, MPA, NS_SINGLE).
    #[arg(long, default_value_t = DEFAULT_LYAPUNOV_ITERS)]
    lya_iters: usize,
    /// Lyapunov termination threshold on ||B_k - I||_F.
    #[arg(long, default_value_t = DEFAULT_TOLERANCE)]
    tolerance: f64,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct WhitenArgs {
    /// Headerless CSV, one channel per row.
    #[arg(long, conflicts_with_all = ["channels", "samples"])]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 8)]
    channels: usize,
    #[arg(long, default_value_t = 256)]
    samples: usize,
    #[arg(long, default_value_t = DEFAULT_EPS)]
    eps: f64,
    #[command(flatten)]
    method: MethodOpts,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML file with BenchConfig fields; defaults apply to missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `trials` from the config.
    #[arg(long)]
    trials: Option<usize>,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides `output` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args)]
struct SelfcheckArgs {
    /// Matrices per randomized check.
    #[arg(long, default_value_t = 100)]
    trials: usize,
    /// Matrices for the forward-ordering and residual-schedule checks.
    #[arg(long, default_value_t = 100)]
    large_trials: usize,
    /// Perturb every solved Pade numerator by this amount.
    #[arg(long)]
    inject_pade_fault: Option<f64>,
    /// Cap the Lyapunov iterations of the residual-schedule check.
    #[arg(long)]
    lyapunov_cap: Option<usize>,
    #[command(flatten)]
    common: Common,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Coeffs(a) => coeffs(a),
        Command::Sqrt(a) => sqrt(a),
        Command::Grad(a) => grad(a),
        Command::Whiten(a) => whiten(a),
        Command::Bench(a) => bench(a),
        Command::Selfcheck(a) => return run_selfcheck(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}

fn emit(out: Option<&Path>, body: &[u8]) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => io::stdout().write_all(body).context("writing to stdout"),
    }
}

fn to_json<T: Serialize>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut body = serde_json::to_vec_pretty(value)?;
    body.push(b'\n');
    Ok(body)
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.dim()).map(|i| m.row(i).to_vec()).collect()
}

fn matrix_body(m: &Matrix, format: Option<Format>) -> anyhow::Result<Vec<u8>> {
    match format {
        None => Ok(m.to_text().into_bytes()),
        Some(Format::Csv) => csv_rows(rows(m)),
        Some(Format::Json) => to_json(&rows(m)),
    }
}

fn csv_rows(rows: Vec<Vec<f64>>) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(w.into_inner()?)
}

#[derive(Serialize)]
struct CoeffsReport {
    m: usize,
    n: usize,
    p: Vec<f64>,
    q: Vec<f64>,
    pole_min: Option<f64>,
}

fn coeffs(a: CoeffsArgs) -> anyhow::Result<()> {
    let c = pade_coefficients(a.m, a.n)?;
    let pole_min = if c.is_diagonal() { Some(verify_no_poles(&c)?) } else { None };
    let report = CoeffsReport { m: a.m, n: a.n, p: c.p.clone(), q: c.q.clone(), pole_min };
    let body = match a.common.format {
        Some(Format::Csv) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["kind", "index", "value"])?;
            for (kind, values) in [("p", &report.p), ("q", &report.q)] {
                for (i, v) in values.iter().enumerate() {
                    w.write_record([kind.to_string(), (i + 1).to_string(), v.to_string()])?;
                }
            }
            if let Some(v) = pole_min {
                w.write_record(["pole_min".to_string(), "0".to_string(), v.to_string()])?;
            }
            w.into_inner()?
        }
        _ => to_json(&report)?,
    };
    emit(a.common.out.as_deref(), &body)
}

#[derive(Serialize)]
struct SqrtReport {
    method: String,
    param: usize,
    inverse: bool,
    n: usize,
    mae_vs_exact: f64,
    matmuls: u64,
    solves: u64,
    value: Vec<Vec<f64>>,
}

fn sqrt(a: SqrtArgs) -> anyhow::Result<()> {
    let m = a.source.load(a.common.seed)?;
    let method = a.method.method()?;
    let (out, ops) = count_ops(|| if a.inverse { invsqrt_with(method, &m) } else { sqrt_with(method, &m) });
    let out = out?;
    let exact = if a.inverse { invsqrt_with(Method::Exact, &m)? } else { exact_sqrt_eig(&m)? };
    let err = mae(&out.value, &exact.value)?;
    eprintln!("{method}: mae vs exact {err:.3e}, {} matmuls, {} solves", ops.matmuls, ops.solves);
    let body = match a.common.format {
        Some(Format::Json) => to_json(&SqrtReport {
            method: method.tag().into(),
            param: method.param(),
            inverse: a.inverse,
            n: m.dim(),
            mae_vs_exact: err,
            matmuls: ops.matmuls,
            solves: ops.solves,
            value: rows(&out.value),
        })?,
        f => matrix_body(&out.value, f)?,
    };
    emit(a.common.out.as_deref(), &body)
}

#[derive(Serialize)]
struct GradReport {
    method: String,
    backward: &'static str,
    n: usize,
    iters_used: usize,
    residual_b: f64,
    error_vs_exact: f64,
    matmuls: u64,
    solves: u64,
    grad: Vec<Vec<f64>>,
}

fn grad(a: GradArgs) -> anyhow::Result<()> {
    let m = a.source.load(a.common.seed)?;
    let g = match &a.upstream {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            SymmetricMatrix::symmetrize(Matrix::from_text(&text).with_context(|| format!("parsing {}", path.display()))?)
        }
        None => random_symmetric(m.dim(), a.common.seed.wrapping_add(1)),
    };
    if g.dim() != m.dim() {
        bail!("upstream gradient is {}x{}, matrix is {}x{}", g.dim(), g.dim(), m.dim(), m.dim());
    }
    let method = a.method.method()?;
    let (result, ops) = count_ops(|| -> matsqrt_core::Result<(Matrix, &'static str, usize, f64)> {
        match method {
            Method::NsCoupled { iters } => {
                let fwd = forward::ns_sqrt_coupled_traced(&m, iters)?;
                Ok((ns_sqrt_gradient(&m, &fwd, &g)?, "NS", iters, 0.0))
            }
            Method::Exact => {
                let s = exact_sqrt_eig(&m)?.value;
                Ok((bartels_stewart(&s, &g)?, "BS", 0, 0.0))
            }
            _ => {
                let s = sqrt_with(method, &m)?.value;
                let out = sqrt_lyapunov_gradient(&s, &g, a.lya_iters, a.tolerance)?;
                Ok((out.grad, "LYA", out.iters_used, out.residual_b))
            }
        }
    });
    let (grad, backward, iters_used, residual_b) = result?;
    let oracle = bartels_stewart(&exact_sqrt_eig(&m)?.value, &g)?;
    let err = mae(&grad, &oracle)?;
    eprintln!("{method} + {backward}: mae vs exact {err:.3e}, residual {residual_b:.3e}, {} matmuls", ops.matmuls);
    let body = match a.common.format {
        Some(Format::Json) => to_json(&GradReport {
            method: method.tag().into(),
            backward,
            n: m.dim(),
            iters_used,
            residual_b,
            error_vs_exact: err,
            matmuls: ops.matmul_equivalents(),
            solves: ops.solves,
            grad: rows(&grad),
        })?,
        f => matrix_body(&grad, f)?,
    };
    emit(a.common.out.as_deref(), &body)
}

fn read_features(path: &Path) -> anyhow::Result<FeatureMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.deserialize::<Vec<f64>>().enumerate() {
        rows.push(rec.with_context(|| format!("{}: row {}", path.display(), i + 1))?);
    }
    Ok(FeatureMatrix::from_rows(&rows).with_context(|| format!("{}", path.display()))?)
}

#[derive(Serialize)]
struct WhitenReport {
    method: String,
    channels: usize,
    samples: usize,
    eps: f64,
    deviation: f64,
    whitened: Vec<Vec<f64>>,
}

fn whiten(a: WhitenArgs) -> anyhow::Result<()> {
    let x = match &a.input {
        Some(path) => read_features(path)?,
        None => FeatureMatrix::random(a.channels, a.samples, a.common.seed)?,
    };
    let cfg = WhitenConfig { eps: a.eps, method: a.method.method()?, ..WhitenConfig::default() };
    let w = zca_whiten(&x, &cfg)?;
    let deviation = whiteness_deviation(&w);
    eprintln!("{}: ||cov - I||_max = {deviation:.3e}", cfg.method);
    let rows: Vec<Vec<f64>> = (0..w.channels()).map(|c| w.row(c).to_vec()).collect();
    let body = match a.common.format {
        Some(Format::Json) => to_json(&WhitenReport {
            method: cfg.method.tag().into(),
            channels: w.channels(),
            samples: w.samples(),
            eps: cfg.eps,
            deviation,
            whitened: rows,
        })?,
        _ => csv_rows(rows)?,
    };
    emit(a.common.out.as_deref(), &body)
}

fn load_config(path: &Path) -> anyhow::Result<BenchConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn bench(a: BenchArgs) -> anyhow::Result<()> {
    let mut cfg = match &a.config {
        Some(path) => load_config(path)?,
        None => BenchConfig::default(),
    };
    if let Some(t) = a.trials {
        cfg.trials = t;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if a.out.is_some() {
        cfg.output = a.out;
    }
    let format = a.format.unwrap_or_else(|| match cfg.output.as_ref().and_then(|p| p.extension()) {
        Some(ext) if ext == "json" => Format::Json,
        _ => Format::Csv,
    });
    let report = run_bench(&cfg)?;
    for f in &report.failures {
        eprintln!("cell {} n={} batch={} failed: {}", f.cell.method, f.cell.n, f.cell.batch, f.error);
    }
    let mut body = Vec::new();
    match format {
        Format::Csv => write_csv(&report.records, &mut body)?,
        Format::Json => write_json(&report.records, &mut body)?,
    }
    emit(cfg.output.as_deref(), &body)
}

fn run_selfcheck(a: SelfcheckArgs) -> ExitCode {
    if a.trials == 0 || a.large_trials == 0 {
        eprintln!("error: trial counts must be positive");
        return ExitCode::from(EXIT_VALIDATION);
    }
    let opts = CheckOptions {
        trials: a.trials,
        large_trials: a.large_trials,
        seed: a.common.seed,
        faults: Faults { pade_perturbation: a.inject_pade_fault, lyapunov_cap: a.lyapunov_cap },
    };
    let reports = selfcheck(&opts);
    let body = match a.common.format {
        Some(Format::Json) => to_json(&reports),
        Some(Format::Csv) => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let written: anyhow::Result<Vec<u8>> = (|| {
                for r in &reports {
                    w.serialize(r)?;
                }
                Ok(w.into_inner()?)
            })();
            written
        }
        None => Ok(reports.iter().map(|r| format!("{r}\n")).collect::<String>().into_bytes()),
    };
    if let Err(e) = body.and_then(|b| emit(a.common.out.as_deref(), &b)) {
        eprintln!("error: {e:#}");
        return ExitCode::from(EXIT_VALIDATION);
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    if failed > 0 {
        eprintln!("{failed} of {} criteria failed", reports.len());
        ExitCode::from(EXIT_CRITERION)
    } else {
        ExitCode::SUCCESS
    }
}
