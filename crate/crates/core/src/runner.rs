//! End-to-end pipelines behind the command-line subcommands.
//!
//! Every pipeline collects its outputs in memory and writes them only at the
//! end, together with `manifest.json`. The manifest lists each file with its
//! SHA-256 and the configuration hash; JSON and CSV outputs also carry the
//! hash inline. Apart from the `created_unix` field of the manifest, reruns
//! with the same configuration and seed are byte-identical.

use std::path::{Path as FsPath, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::bounds::{marginal_bounds, BoundsConfig};
use crate::config::{ExperimentConfig, Format, ProcessName};
use crate::diagnostics::{
    boundary_pinning, holder_fit, monotonicity_check, stationarity_residual, HOLDER_MIN_NODES,
};
use crate::error::Error;
use crate::io::write_paths_csv;
use crate::optimize::splitting_sequence;
use crate::oracles::{closed_form_error, run_oracles, OracleName, OracleOptions};
use crate::process::sample_paths;
use crate::quantize::{distortion, Codebook, Metric};
use crate::rng::sha256_hex;
use crate::space::PathSample;

/// Exit code when a run completes but some reported check fails.
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug)]
pub enum RunError {
    /// The configuration or the command line is unusable.
    Config(Error),
    /// The computation itself failed.
    Runtime(Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_CONFIG,
            Self::Runtime(_) => EXIT_RUNTIME,
        }
    }

    pub fn error(&self) -> &Error {
        match self {
            Self::Config(e) | Self::Runtime(e) => e,
        }
    }

    /// Machine-readable error record.
    pub fn record(&self) -> Value {
        let kind = match self {
            Self::Config(_) => "config",
            Self::Runtime(_) => "runtime",
        };
        json!({ "error": kind, "message": self.error().to_string(), "exit_code": self.exit_code() })
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.error())
    }
}

impl std::error::Error for RunError {}

type RunResult<T> = std::result::Result<T, RunError>;

fn cfg_err(e: Error) -> RunError {
    RunError::Config(e)
}

fn rt_err(e: Error) -> RunError {
    RunError::Runtime(e)
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Replaces `sample.seed`.
    pub seed: Option<u64>,
    /// Replaces `output.dir`.
    pub out: Option<PathBuf>,
    /// Compute everything, write nothing.
    pub dry_run: bool,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub out_dir: PathBuf,
    /// Files written, empty on a dry run.
    pub files: Vec<PathBuf>,
    pub config_hash: Option<String>,
    /// Headline numbers, also printed by the CLI.
    pub summary: Value,
    /// False when a reported check failed.
    pub pass: bool,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

/// Applies command-line overrides and re-validates.
pub fn apply_options(cfg: &ExperimentConfig, opts: &RunOptions) -> RunResult<ExperimentConfig> {
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seed {
        cfg.sample.seed = s;
    }
    if let Some(o) = &opts.out {
        cfg.output.dir = o.clone();
    }
    cfg.validate().map_err(cfg_err)?;
    Ok(cfg)
}

struct Outputs {
    dir: PathBuf,
    hash: Option<String>,
    files: Vec<(String, Vec<u8>)>,
    wants_csv: bool,
}

impl Outputs {
    fn new(dir: PathBuf, hash: Option<String>) -> Self {
        Self { dir, hash, files: Vec::new(), wants_csv: true }
    }

    fn comment(&self) -> Option<String> {
        self.hash.as_ref().map(|h| format!("config_hash={h}"))
    }

    fn json<T: Serialize>(&mut self, name: &str, body: &T) -> RunResult<()> {
        let mut v = serde_json::to_value(body).map_err(|e| rt_err(Error::Format(e.to_string())))?;
        if let (Some(h), Value::Object(map)) = (&self.hash, &mut v) {
            map.insert("config_hash".into(), Value::String(h.clone()));
        }
        let mut bytes = serde_json::to_vec_pretty(&v).map_err(|e| rt_err(Error::Format(e.to_string())))?;
        bytes.push(b'\n');
        self.files.push((name.into(), bytes));
        Ok(())
    }

    fn raw(&mut self, name: &str, bytes: Vec<u8>) {
        self.files.push((name.into(), bytes));
    }

    fn finish(self, dry_run: bool) -> RunResult<Vec<PathBuf>> {
        if dry_run {
            return Ok(Vec::new());
        }
        std::fs::create_dir_all(&self.dir).map_err(|e| rt_err(e.into()))?;
        let mut written = Vec::new();
        let mut listing = Vec::new();
        for (name, bytes) in &self.files {
            let path = self.dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| rt_err(e.into()))?;
            listing.push(json!({ "file": name, "sha256": sha256_hex(bytes), "bytes": bytes.len() }));
            written.push(path);
        }
        let created = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let manifest = json!({
            "created_unix": created,
            "config_hash": self.hash,
            "crate_version": env!("CARGO_PKG_VERSION"),
            "files": listing,
        });
        let path = self.dir.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest).map_err(|e| rt_err(Error::Format(e.to_string())))?;
        bytes.push(b'\n');
        std::fs::write(&path, bytes).map_err(|e| rt_err(e.into()))?;
        written.push(path);
        Ok(written)
    }
}

/// Simulates the configured sample, seeded by the `sample` stream.
pub fn simulate(cfg: &ExperimentConfig) -> RunResult<PathSample> {
    let space = cfg.space().map_err(cfg_err)?;
    let spec = cfg.process_spec().map_err(cfg_err)?;
    sample_paths(&spec, &space, cfg.sample.n_paths, cfg.seed_for("sample")).map_err(rt_err)
}

fn codebook_csv(cb: &Codebook, comment: Option<&str>) -> RunResult<Vec<u8>> {
    let mut buf = Vec::new();
    write_paths_csv(&mut buf, cb.space().grid(), cb.atoms(), comment).map_err(rt_err)?;
    Ok(buf)
}

fn holder_outputs(out: &mut Outputs, cb: &Codebook, lags: Option<(usize, usize)>) -> RunResult<Value> {
    let m = cb.space().m();
    if m < HOLDER_MIN_NODES {
        return Ok(json!({ "skipped": format!("needs at least {HOLDER_MIN_NODES} grid nodes, have {m}") }));
    }
    let fit = holder_fit(cb, lags).map_err(rt_err)?;
    if out.wants_csv {
        let mut buf = Vec::new();
        fit.write_csv(&mut buf, out.comment().as_deref()).map_err(rt_err)?;
        out.raw("holder.csv", buf);
    }
    let betas: Vec<f64> = fit.betas().filter(|b| b.is_finite()).collect();
    let min_beta = betas.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(json!({ "min_beta": if min_beta.is_finite() { json!(min_beta) } else { Value::Null }, "fit": fit }))
}

/// Splitting run to size `n`, then distortion, stationarity and regularity reports.
pub fn run_quantize(cfg: &ExperimentConfig, opts: &RunOptions) -> RunResult<RunOutcome> {
    let cfg = apply_options(cfg, opts)?;
    let hash = cfg.hash();
    let (n, r) = (cfg.quantizer.n, cfg.quantizer.r);
    let space = cfg.space().map_err(cfg_err)?;
    let sample = simulate(&cfg)?;
    let ocfg = cfg.optimizer_config();
    let (books, traces) = splitting_sequence(&sample, &space, n, r, &ocfg).map_err(rt_err)?;
    let cb = books.last().expect("n >= 1").clone();
    let trace = traces.last().expect("n >= 1");

    let mut out = Outputs::new(cfg.output.dir.clone(), Some(hash.clone()));
    out.wants_csv = cfg.wants(Format::Csv);
    let report = distortion(&cb, &sample, r).map_err(rt_err)?;
    let closed_form = cfg
        .closed_form_case()
        .and_then(|case| closed_form_error(&case, n, cfg.quantizer.p, r).ok())
        .map(|expected| {
            json!({
                "expected": expected,
                "abs_diff": (report.quant_error() - expected).abs(),
                "sigmas": (report.quant_error() - expected).abs() / report.quant_error_stderr().max(f64::MIN_POSITIVE),
            })
        });
    let mono = monotonicity_check(&books, &sample, r).map_err(rt_err)?;
    let stat = stationarity_residual(&cb, &sample, r);
    let holder = holder_outputs(&mut out, &cb, None)?;

    let tag = sample.process_tag().to_string();
    let summary = json!({
        "command": "quantize",
        "process": tag,
        "n": n,
        "p": cfg.quantizer.p,
        "r": r,
        "n_paths": sample.len(),
        "quant_error": report.quant_error(),
        "quant_error_stderr": report.quant_error_stderr(),
        "distortion": report.value,
        "relative_stationarity_residual": stat.relative_max_residual,
        "iterations": trace.iterations,
        "exit_reason": trace.exit_reason,
        "closed_form": closed_form,
    });
    if cfg.wants(Format::Json) {
        out.json(
            "distortion.json",
            &json!({
                "process": tag,
                "n": n,
                "p": cfg.quantizer.p,
                "r": r,
                "report": report,
                "quant_error": report.quant_error(),
                "quant_error_stderr": report.quant_error_stderr(),
                "closed_form": closed_form,
                "monotonicity": mono,
                "optimizer": { "iterations": trace.iterations, "exit_reason": trace.exit_reason,
                               "exit_residual": trace.exit_residual,
                               "empty_cell_events": trace.empty_cell_events },
            }),
        )?;
        out.json("stationarity.json", &stat)?;
        out.json("holder.json", &holder)?;
    }
    if cfg.wants(Format::Csv) {
        let mut buf = Vec::new();
        trace.write_csv(&mut buf, out.comment().as_deref()).map_err(rt_err)?;
        out.raw("trace.csv", buf);
        let csv = codebook_csv(&cb, out.comment().as_deref())?;
        out.raw("codebook.csv", csv);
    }
    if cfg.wants(Format::Binary) {
        let mut buf = Vec::new();
        cb.write_binary(&mut buf).map_err(rt_err)?;
        out.raw("codebook.bin", buf);
    }
    let dir = out.dir.clone();
    let files = out.finish(opts.dry_run)?;
    Ok(RunOutcome { out_dir: dir, files, config_hash: Some(hash), summary, pass: true })
}

/// Re-simulates the configured sample and diagnoses a stored codebook.
pub fn run_diagnose(cfg: &ExperimentConfig, opts: &RunOptions, codebook: Option<&FsPath>) -> RunResult<RunOutcome> {
    let cfg = apply_options(cfg, opts)?;
    let hash = cfg.hash();
    let diag = cfg.diagnose.clone().unwrap_or_default();
    let space = cfg.space().map_err(cfg_err)?;
    let path = codebook
        .map(FsPath::to_path_buf)
        .or(diag.codebook.clone())
        .unwrap_or_else(|| cfg.output.dir.join("codebook.bin"));
    let file = std::fs::File::open(&path)
        .map_err(|e| rt_err(Error::Format(format!("cannot open codebook {}: {e}", path.display()))))?;
    let cb = Codebook::read_binary(std::io::BufReader::new(file), space.clone()).map_err(rt_err)?;
    let sample = simulate(&cfg)?;
    let r = cfg.quantizer.r;

    let mut out = Outputs::new(cfg.output.dir.clone(), Some(hash.clone()));
    out.wants_csv = cfg.wants(Format::Csv);
    let report = distortion(&cb, &sample, r).map_err(rt_err)?;
    let stat = stationarity_residual(&cb, &sample, r);
    let holder = holder_outputs(&mut out, &cb, diag.lags.map(|[a, b]| (a, b)))?;
    let nodes = diag.pin_nodes.clone().unwrap_or_else(|| {
        let mut v = vec![0];
        if cfg.process.kind == ProcessName::Bridge {
            v.push(space.m() - 1);
        }
        v
    });
    let pin_value = diag.pin_value.unwrap_or(cfg.process.x0);
    let pinning = boundary_pinning(&cb, &nodes, pin_value).map_err(cfg_err)?;
    let mono = if diag.monotonicity {
        let (books, _) =
            splitting_sequence(&sample, &space, cb.len(), r, &cfg.optimizer_config()).map_err(rt_err)?;
        Some(monotonicity_check(&books, &sample, r).map_err(rt_err)?)
    } else {
        None
    };
    let body = json!({
        "codebook": path.display().to_string(),
        "n": cb.len(),
        "r": r,
        "quant_error": report.quant_error(),
        "quant_error_stderr": report.quant_error_stderr(),
        "stationarity": stat,
        "holder": holder,
        "pinning": { "nodes": nodes, "value": pin_value, "max_deviation": pinning },
        "monotonicity": mono,
    });
    let summary = json!({
        "command": "diagnose",
        "n": cb.len(),
        "quant_error": report.quant_error(),
        "relative_stationarity_residual": stat.relative_max_residual,
        "admissible": stat.admissible,
        "min_holder_beta": holder.get("min_beta"),
        "pinning_max_deviation": pinning,
    });
    if cfg.wants(Format::Json) {
        out.json("diagnostics.json", &body)?;
    }
    let dir = out.dir.clone();
    let files = out.finish(opts.dry_run)?;
    Ok(RunOutcome { out_dir: dir, files, config_hash: Some(hash), summary, pass: true })
}

/// Marginal sandwich bounds for a multi-dimensional process.
pub fn run_bounds(cfg: &ExperimentConfig, opts: &RunOptions, metric: Option<Metric>) -> RunResult<RunOutcome> {
    let cfg = apply_options(cfg, opts)?;
    if cfg.process.d < 2 {
        return Err(cfg_err(Error::InvalidParameter(format!(
            "bounds requires d >= 2 (process.d = {})",
            cfg.process.d
        ))));
    }
    let section = cfg
        .bounds
        .clone()
        .ok_or_else(|| cfg_err(Error::InvalidParameter("bounds requires a [bounds] section".into())))?;
    let hash = cfg.hash();
    let space = cfg.space().map_err(cfg_err)?;
    let bcfg = BoundsConfig {
        n: cfg.quantizer.n,
        sizes: section.sizes,
        metric: metric.unwrap_or(section.metric),
        r: section.r,
        optimizer: cfg.optimizer_config(),
        cap: section.cap,
    };
    let prod: usize = bcfg.sizes.iter().product();
    if bcfg.sizes.len() != cfg.process.d || prod > bcfg.n {
        return Err(cfg_err(Error::InvalidParameter(format!(
            "bounds.sizes {:?} needs {} entries with product <= n = {}",
            bcfg.sizes, cfg.process.d, bcfg.n
        ))));
    }
    let sample = simulate(&cfg)?;
    let report = marginal_bounds(&sample, &space, &bcfg).map_err(rt_err)?;
    let mut out = Outputs::new(cfg.output.dir.clone(), Some(hash.clone()));
    if cfg.wants(Format::Json) {
        out.json("bounds.json", &report)?;
    }
    let summary = json!({
        "command": "bounds",
        "metric": report.metric,
        "joint": report.joint.value,
        "lower": report.lower,
        "upper": report.upper,
        "pass": report.pass(),
    });
    let pass = report.pass();
    let dir = out.dir.clone();
    let files = out.finish(opts.dry_run)?;
    Ok(RunOutcome { out_dir: dir, files, config_hash: Some(hash), summary, pass })
}

/// Runs the analytic constructions and writes `oracles.json`.
///
/// `dim` overrides the dimension of every construction: `c0` and `l1` use it
/// as the truncation level, `sharp2` checks support sizes `2..=dim`, and
/// `supnorm` uses it as the number of functions.
pub fn run_oracle_cmd(names: &[OracleName], dim: Option<usize>, opts: &RunOptions) -> RunResult<RunOutcome> {
    let mut o = OracleOptions { seed: opts.seed.unwrap_or(0), ..OracleOptions::default() };
    if let Some(m) = dim {
        if m < 3 {
            return Err(cfg_err(Error::InvalidParameter(format!("--m must be >= 3, found {m}"))));
        }
        o.c0_dim = m;
        o.l1_dim = m;
        o.sharp_sizes = (2..=m).collect();
        o.sup_funcs = m;
    }
    let names: Vec<OracleName> = if names.is_empty() { OracleName::ALL.to_vec() } else { names.to_vec() };
    let manifest = run_oracles(&names, &o).map_err(rt_err)?;
    let dir = opts.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut out = Outputs::new(dir.clone(), None);
    out.json("oracles.json", &json!({ "options": o, "manifest": manifest }))?;
    let summary = json!({
        "command": "oracle",
        "oracles": manifest.entries.iter().map(|e| json!({
            "oracle": e.oracle, "value": e.value, "pass": e.pass,
            "failed": e.checks.iter().filter(|c| !c.pass).map(|c| c.quantity.clone()).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
        "pass": manifest.pass,
    });
    let files = out.finish(opts.dry_run)?;
    Ok(RunOutcome { out_dir: dir, files, config_hash: None, summary, pass: manifest.pass })
}
