//! Benchmark driver: accuracy, operation counts and wall time over a grid of
//! methods, sizes, batch sizes and degrees.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::backward::{bartels_stewart, ns_sqrt_gradient, sqrt_lyapunov_gradient, DEFAULT_TOLERANCE};
use crate::counter::{count_ops, OpCounter};
use crate::error::{Error, Result};
use crate::forward::{exact_sqrt_eig, mae, ns_sqrt_coupled_traced, sqrt_with, Method};
use crate::matrix::{Matrix, SymmetricMatrix};
use crate::random::{derive_seed, random_covariance, random_symmetric};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 1024;
pub const CSV_HEADER: [&str; 10] =
    ["method", "n", "batch", "param", "mae", "wall_fwd_ns", "wall_bwd_ns", "matmuls", "solves", "residual_b"];

/// Samples per dimension for the generated covariances.
const SAMPLES_PER_DIM: usize = 4;
const INPUT_EPS: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    /// Method tags: `MTP`, `MPA`, `NS`, `NS_SINGLE`, `EXACT`.
    pub methods: Vec<String>,
    pub dims: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    /// Taylor degrees `K` for MTP; MPA uses `[(K-1)/2, (K-1)/2]` and skips even `K`.
    pub degrees: Vec<usize>,
    pub ns_iters: Vec<usize>,
    /// Iteration cap of the Lyapunov backward pass.
    pub lya_iters: usize,
    /// Timed batches per grid cell.
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            methods: vec!["MTP".into(), "MPA".into(), "NS".into()],
            dims: vec![64],
            batch_sizes: vec![1],
            degrees: vec![11],
            ns_iters: vec![5],
            lya_iters: 8,
            trials: 1000,
            seed: 0,
            output: None,
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        let invalid = |arg, reason: String| Err(Error::InvalidArgument { arg, reason });
        if self.trials < 1 {
            return invalid("trials", "must be at least 1".into());
        }
        if self.methods.is_empty() {
            return invalid("methods", "list is empty".into());
        }
        if let Some(bad) = self.methods.iter().find(|m| !TAGS.contains(&m.as_str())) {
            return invalid("methods", format!("unknown method `{bad}`; expected one of {}", TAGS.join(", ")));
        }
        if self.dims.is_empty() {
            return invalid("dims", "list is empty".into());
        }
        if let Some(d) = self.dims.iter().find(|d| !(MIN_DIM..=MAX_DIM).contains(*d)) {
            return invalid("dims", format!("{d} outside [{MIN_DIM}, {MAX_DIM}]"));
        }
        if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) {
            return invalid("batch_sizes", "need at least one positive batch size".into());
        }
        let uses = |tags: &[&str]| self.methods.iter().any(|m| tags.contains(&m.as_str()));
        if uses(&["MTP", "MPA"]) && self.degrees.is_empty() {
            return invalid("degrees", "MTP/MPA requested without degrees".into());
        }
        if let Some(k) = self.degrees.iter().find(|k| **k < 1) {
            return invalid("degrees", format!("degree {k} must be at least 1"));
        }
        if uses(&["MPA"]) && !self.degrees.iter().any(|k| *k >= 3 && k % 2 == 1) {
            return invalid("degrees", "MPA needs at least one odd degree >= 3".into());
        }
        if uses(&["NS", "NS_SINGLE"]) && (self.ns_iters.is_empty() || self.ns_iters.contains(&0)) {
            return invalid("ns_iters", "need at least one positive iteration count".into());
        }
        if self.lya_iters < 1 {
            return invalid("lya_iters", "must be at least 1".into());
        }
        Ok(())
    }

    /// Grid cells in record order: method, then dimension, batch size and
    /// degree or iteration count.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for tag in &self.methods {
            let variants: Vec<Method> = match tag.as_str() {
                "MTP" => self.degrees.iter().map(|&degree| Method::Mtp { degree }).collect(),
                "MPA" => self.degrees.iter().filter_map(|&k| Method::mpa_for_degree(k).ok()).collect(),
                "NS" => self.ns_iters.iter().map(|&iters| Method::NsCoupled { iters }).collect(),
                "NS_SINGLE" => self.ns_iters.iter().map(|&iters| Method::NsSingle { iters }).collect(),
                _ => vec![Method::Exact],
            };
            for &n in &self.dims {
                for &batch in &self.batch_sizes {
                    out.extend(variants.iter().map(|&method| Cell { method, n, batch }));
                }
            }
        }
        out
    }
}

const TAGS: [&str; 5] = ["MTP", "MPA", "NS", "NS_SINGLE", "EXACT"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cell {
    pub method: Method,
    pub n: usize,
    pub batch: usize,
}

/// One grid cell. Counts are per matrix; wall times are medians over trials
/// of one whole batch; `residual_b` is the median final `||B_k - I||_F` of
/// the Lyapunov backward pass (zero for backward passes without one).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: String,
    pub n: usize,
    pub batch: usize,
    pub param: usize,
    pub mae: f64,
    pub wall_fwd_ns: u64,
    pub wall_bwd_ns: u64,
    pub matmuls: u64,
    pub solves: u64,
    pub residual_b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellFailure {
    pub cell: Cell,
    pub error: Error,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
    pub failures: Vec<CellFailure>,
}

/// Input of trial `trial`, item `item` at dimension `n`. Shared by all
/// methods so that their errors are paired.
pub fn bench_input(seed: u64, n: usize, index: u64) -> SymmetricMatrix {
    random_covariance(n, SAMPLES_PER_DIM * n, derive_seed(derive_seed(seed, n as u64), index), INPUT_EPS)
}

/// Fixed upstream gradient for dimension `n`.
pub fn bench_upstream(seed: u64, n: usize) -> SymmetricMatrix {
    random_symmetric(n, derive_seed(derive_seed(seed, n as u64), u64::MAX))
}

pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let mut report = BenchReport::default();
    for cell in cfg.cells() {
        match run_cell(cfg, cell) {
            Ok(r) => report.records.push(r),
            Err(error) => report.failures.push(CellFailure { cell, error }),
        }
    }
    Ok(report)
}

struct Step {
    fwd_ns: u64,
    bwd_ns: u64,
    ops: OpCounter,
    residual_b: f64,
    sqrt: Matrix,
}

fn forward_backward(method: Method, a: &SymmetricMatrix, upstream: &SymmetricMatrix, lya_iters: usize) -> Result<Step> {
    let start = Instant::now();
    let (fwd, fwd_ops) = count_ops(|| match method {
        Method::NsCoupled { iters } => ns_sqrt_coupled_traced(a, iters),
        _ => sqrt_with(method, a),
    });
    let fwd = fwd?;
    let fwd_ns = start.elapsed().as_nanos() as u64;
    let start = Instant::now();
    let (residual_b, bwd_ops) = {
        let (res, ops) = count_ops(|| -> Result<f64> {
            match method {
                Method::NsCoupled { .. } => ns_sqrt_gradient(a, &fwd, upstream).map(|_| 0.0),
                Method::Exact => bartels_stewart(&fwd.value, upstream).map(|_| 0.0),
                _ => sqrt_lyapunov_gradient(&fwd.value, upstream, lya_iters, DEFAULT_TOLERANCE).map(|g| g.residual_b),
            }
        });
        (res?, ops)
    };
    let bwd_ns = start.elapsed().as_nanos() as u64;
    Ok(Step { fwd_ns, bwd_ns, ops: fwd_ops + bwd_ops, residual_b, sqrt: fwd.value.into_matrix() })
}

fn median_u64(v: &mut [u64]) -> u64 {
    v.sort_unstable();
    v[v.len() / 2]
}

fn median_f64(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn run_cell(cfg: &BenchConfig, cell: Cell) -> Result<BenchRecord> {
    let upstream = bench_upstream(cfg.seed, cell.n);
    let mut fwd_times = Vec::with_capacity(cfg.trials);
    let mut bwd_times = Vec::with_capacity(cfg.trials);
    let mut residuals = Vec::with_capacity(cfg.trials * cell.batch);
    let mut ops = OpCounter::default();
    let mut err_sum = 0.0;
    for trial in 0..cfg.trials {
        let inputs: Vec<SymmetricMatrix> =
            (0..cell.batch).map(|i| bench_input(cfg.seed, cell.n, (trial * cell.batch + i) as u64)).collect();
        let (mut fwd_ns, mut bwd_ns) = (0, 0);
        for a in &inputs {
            let step = forward_backward(cell.method, a, &upstream, cfg.lya_iters)?;
            fwd_ns += step.fwd_ns;
            bwd_ns += step.bwd_ns;
            ops += step.ops;
            residuals.push(step.residual_b);
            let exact = exact_sqrt_eig(a)?.value;
            err_sum += mae(&step.sqrt, &exact)?;
        }
        fwd_times.push(fwd_ns);
        bwd_times.push(bwd_ns);
    }
    let count = (cfg.trials * cell.batch) as f64;
    let per_matrix = |total: u64| (total as f64 / count).round() as u64;
    Ok(BenchRecord {
        method: cell.method.tag().to_string(),
        n: cell.n,
        batch: cell.batch,
        param: cell.method.param(),
        mae: err_sum / count,
        wall_fwd_ns: median_u64(&mut fwd_times),
        wall_bwd_ns: median_u64(&mut bwd_times),
        matmuls: per_matrix(ops.matmuls + ops.trace_products),
        solves: per_matrix(ops.solves),
        residual_b: median_f64(&mut residuals),
    })
}

pub fn write_csv<W: Write>(records: &[BenchRecord], out: W) -> std::result::Result<(), csv::Error> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(records: &[BenchRecord], mut out: W) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut out, records)?;
    writeln!(out)
}

pub fn emit_csv(records: &[BenchRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv(records, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

pub fn emit_json(records: &[BenchRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_json(records, &mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

pub fn read_json(path: &Path) -> Result<Vec<BenchRecord>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(methods: &[&str]) -> BenchConfig {
        BenchConfig {
            methods: methods.iter().map(|s| s.to_string()).collect(),
            dims: vec![8],
            trials: 2,
            ..BenchConfig::default()
        }
    }

    fn sample() -> BenchRecord {
        BenchRecord {
            method: "MPA".into(),
            n: 64,
            batch: 1,
            param: 11,
            mae: 1.25e-6,
            wall_fwd_ns: 1200,
            wall_bwd_ns: 3400,
            matmuls: 52,
            solves: 1,
            residual_b: 3.5e-7,
        }
    }

    #[test]
    fn validation() {
        assert!(BenchConfig::default().validate().is_ok());
        let bad = [
            BenchConfig { trials: 0, ..BenchConfig::default() },
            BenchConfig { dims: vec![1], ..BenchConfig::default() },
            BenchConfig { dims: vec![2048], ..BenchConfig::default() },
            BenchConfig { methods: vec!["SVD".into()], ..BenchConfig::default() },
            BenchConfig { batch_sizes: vec![0], ..BenchConfig::default() },
            BenchConfig { degrees: vec![4], ..BenchConfig::default() },
            BenchConfig { ns_iters: vec![], ..BenchConfig::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(Error::InvalidArgument { .. })), "{cfg:?}");
        }
    }

    #[test]
    fn exact_method_has_zero_error() {
        let cfg = BenchConfig { trials: 1, ..small(&["EXACT"]) };
        let report = run_bench(&cfg).unwrap();
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.records[0].mae, 0.0);
        assert_eq!(report.records[0].param, 0);
    }

    #[test]
    fn deterministic_apart_from_wall_time() {
        let cfg = small(&["MTP", "MPA", "NS", "NS_SINGLE"]);
        let strip = |mut r: Vec<BenchRecord>| {
            r.iter_mut().for_each(|x| {
                x.wall_fwd_ns = 0;
                x.wall_bwd_ns = 0;
            });
            r
        };
        let a = strip(run_bench(&cfg).unwrap().records);
        let b = strip(run_bench(&cfg).unwrap().records);
        assert_eq!(a, b);
        let tags: Vec<&str> = a.iter().map(|r| r.method.as_str()).collect();
        assert_eq!(tags, ["MTP", "MPA", "NS", "NS_SINGLE"]);
    }

    #[test]
    fn counts_per_matrix() {
        let report = run_bench(&BenchConfig { batch_sizes: vec![3], ..small(&["MTP", "NS"]) }).unwrap();
        let mtp = &report.records[0];
        // forward K - 1 plus at most 6 per Lyapunov step
        assert!(mtp.matmuls >= 10 + 6 && mtp.matmuls <= 10 + 48, "{}", mtp.matmuls);
        assert_eq!(report.records[1].matmuls, 15 + 54);
        assert_eq!(report.records[1].batch, 3);
        assert!(report.records.iter().all(|r| r.mae.is_finite() && r.mae >= 0.0));
    }

    #[test]
    fn mpa_more_accurate_than_ns_and_mtp() {
        let cfg = BenchConfig { dims: vec![32], trials: 20, ..small(&["MPA", "NS", "MTP"]) };
        let r = run_bench(&cfg).unwrap().records;
        assert!(r[0].mae < r[1].mae && r[0].mae < r[2].mae, "{r:?}");
    }

    #[test]
    fn empty_records_give_header_only() {
        let mut buf = Vec::new();
        write_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "method,n,batch,param,mae,wall_fwd_ns,wall_bwd_ns,matmuls,solves,residual_b\n");
    }

    #[test]
    fn one_record_row() {
        let mut buf = Vec::new();
        write_csv(&[sample()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "MPA,64,1,11,1.25e-6,1200,3400,52,1,3.5e-7");
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        let records = vec![sample(), BenchRecord { method: "NS".into(), mae: 0.1 + 0.2, ..sample() }];
        emit_json(&records, &path).unwrap();
        assert_eq!(read_json(&path).unwrap(), records);
        let text = std::fs::read_to_string(&path).unwrap();
        let keys: Vec<String> = serde_json::from_str::<Vec<serde_json::Map<String, serde_json::Value>>>(&text).unwrap()[0]
            .keys()
            .cloned()
            .collect();
        let mut want: Vec<String> = CSV_HEADER.iter().map(|s| s.to_string()).collect();
        want.sort();
        let mut got = keys;
        got.sort();
        assert_eq!(got, want);
    }

    #[test]
    fn io_errors_name_the_path() {
        let err = emit_csv(&[], Path::new("/nonexistent-dir/x.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
