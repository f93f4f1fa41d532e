//! Experiment configuration files (TOML).

use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{EmptyCellPolicy, Method, OptimizerConfig, StepSchedule};
use crate::oracles::ClosedFormCase;
use crate::process::{DiffusionCoefficients, JumpLaw, ProcessKind, ProcessSpec};
use crate::quantize::Metric;
use crate::rng::sha256_hex;
use crate::space::DiscretePathSpace;

pub const SCHEMA: &str = r#"# funquant experiment configuration (TOML). Keys marked * are required.

[process]
kind      = "brownian"   # * brownian | bridge | ou | fbm | diffusion | gamma | compound_poisson | stable_levy
d         = 1            #   coordinate dimension
x0        = 0.0          #   starting value, shared by every coordinate
hurst     = 0.7          #   fbm: Hurst index in (0, 1)
c         = 1.0          #   ou: mean-reversion rate (unit stationary variance)
a         = 1.0          #   gamma: shape rate per unit time
lambda    = 5.0          #   compound_poisson: jump intensity
jump_mean = 0.0          #   compound_poisson: normal jump mean
jump_sd   = 1.0          #   compound_poisson: normal jump standard deviation
alpha     = 1.5          #   stable_levy: stability index in (0, 2]
drift     = [0.0, 0.05]  #   diffusion: drift a + b x
vol       = [0.0, 0.2]   #   diffusion: volatility c + e x

[space]
m       = 256            # * grid nodes
t_start = 0.0
t_end   = 1.0
measure = "lebesgue"     #   lebesgue | exponential (density e^{-b t})
b       = 1.0            #   exponential rate

[quantizer]
n = 8                    # * codebook size
p = 2.0                  #   norm exponent, >= 1
r = 2.0                  #   distortion exponent, >= 1

[optimizer]
method            = "lloyd"          # lloyd (p = 2, r >= 2 only) | sgd
max_iters         = 200
tol               = 1e-9
c0                = 0.05             # sgd: initial step (default 0.1 e0^{2-r})
decay             = 1e-5             # sgd: step c0 / (1 + decay k) (default 1/N)
empty_cell_policy = "split_largest"  # split_largest | resample
record_every      = 10000            # sgd: draws between trace records (default N)

[sample]
n_paths = 100000         # * number of simulated paths
seed    = 1              #   top-level seed; every stream is derived from it

[output]
dir     = "out"                       # result directory
formats = ["json", "csv", "binary"]   # subset to write

[bounds]                 # used by `bounds`
sizes  = [2, 2]          # per-coordinate codebook sizes, product <= n
metric = "lp"            # lp | sup
r      = 2.0             # distortion exponent of the sup variant
cap    = 4096            # largest product codebook

[diagnose]               # used by `diagnose`
# codebook   = "out/codebook.bin"   # defaults to <output.dir>/codebook.bin
# lags       = [1, 31]              # Holder lag range in grid steps, default [1, max((m-1)/8, 2)]
pin_nodes    = [0]                  # defaults: first node, plus the last for a bridge
pin_value    = 0.0                  # defaults to x0
monotonicity = true                 # re-run the splitting sequence 1..n
"#;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub process: ProcessSection,
    pub space: SpaceSection,
    pub quantizer: QuantizerSection,
    #[serde(default)]
    pub optimizer: OptimizerSection,
    pub sample: SampleSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub bounds: Option<BoundsSection>,
    #[serde(default)]
    pub diagnose: Option<DiagnoseSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessName {
    Brownian,
    Bridge,
    Ou,
    Fbm,
    Diffusion,
    Gamma,
    CompoundPoisson,
    StableLevy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProcessSection {
    pub kind: ProcessName,
    #[serde(default = "one")]
    pub d: usize,
    #[serde(default)]
    pub x0: f64,
    pub hurst: Option<f64>,
    pub c: Option<f64>,
    pub a: Option<f64>,
    pub lambda: Option<f64>,
    pub jump_mean: Option<f64>,
    pub jump_sd: Option<f64>,
    pub alpha: Option<f64>,
    pub drift: Option<[f64; 2]>,
    pub vol: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    #[default]
    Lebesgue,
    Exponential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceSection {
    pub m: usize,
    #[serde(default)]
    pub t_start: f64,
    #[serde(default = "one_f")]
    pub t_end: f64,
    #[serde(default)]
    pub measure: MeasureKind,
    pub b: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizerSection {
    pub n: usize,
    #[serde(default = "two")]
    pub p: f64,
    #[serde(default = "two")]
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    #[serde(default = "lloyd")]
    pub method: Method,
    #[serde(default = "max_iters")]
    pub max_iters: usize,
    #[serde(default = "tol")]
    pub tol: f64,
    pub c0: Option<f64>,
    pub decay: Option<f64>,
    #[serde(default)]
    pub empty_cell_policy: EmptyCellPolicy,
    pub record_every: Option<usize>,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        Self {
            method: Method::Lloyd,
            max_iters: max_iters(),
            tol: tol(),
            c0: None,
            decay: None,
            empty_cell_policy: EmptyCellPolicy::SplitLargest,
            record_every: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleSection {
    pub n_paths: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "out_dir")]
    pub dir: PathBuf,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: out_dir(), formats: all_formats() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSection {
    pub sizes: Vec<usize>,
    #[serde(default = "lp")]
    pub metric: Metric,
    #[serde(default = "two")]
    pub r: f64,
    #[serde(default = "cap")]
    pub cap: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseSection {
    pub codebook: Option<PathBuf>,
    pub lags: Option<[usize; 2]>,
    pub pin_nodes: Option<Vec<usize>>,
    pub pin_value: Option<f64>,
    #[serde(default)]
    pub monotonicity: bool,
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn lloyd() -> Method {
    Method::Lloyd
}
fn max_iters() -> usize {
    200
}
fn tol() -> f64 {
    1e-9
}
fn out_dir() -> PathBuf {
    PathBuf::from("out")
}
fn all_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv, Format::Binary]
}
fn lp() -> Metric {
    Metric::Lp
}
fn cap() -> usize {
    4096
}

fn need(v: Option<f64>, key: &str, kind: &str) -> Result<f64> {
    v.ok_or_else(|| Error::InvalidParameter(format!("process.{key} is required for kind = \"{kind}\"")))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let q = &self.quantizer;
        if q.n == 0 {
            return Err(Error::InvalidParameter("quantizer.n must be >= 1".into()));
        }
        if !(q.p.is_finite() && q.p >= 1.0) || !(q.r.is_finite() && q.r >= 1.0) {
            return Err(Error::InvalidParameter(format!("need p >= 1 and r >= 1, found p = {}, r = {}", q.p, q.r)));
        }
        if self.sample.n_paths == 0 {
            return Err(Error::InvalidParameter("sample.n_paths must be >= 1".into()));
        }
        if self.optimizer.method == Method::Lloyd && (q.p != 2.0 || q.r < 2.0) {
            return Err(Error::LloydUnsupported { p: q.p, r: q.r });
        }
        if self.space.measure == MeasureKind::Exponential && self.space.b.is_none() {
            return Err(Error::InvalidParameter("space.b is required for measure = \"exponential\"".into()));
        }
        self.optimizer_config().validate()?;
        self.space()?;
        self.process_spec()?.validate()?;
        if let Some(b) = &self.bounds {
            if b.sizes.contains(&0) {
                return Err(Error::InvalidParameter("bounds.sizes entries must be >= 1".into()));
            }
        }
        Ok(())
    }

    pub fn space(&self) -> Result<Arc<DiscretePathSpace>> {
        let s = &self.space;
        let (p, d) = (self.quantizer.p, self.process.d);
        let space = match s.measure {
            MeasureKind::Lebesgue => DiscretePathSpace::uniform(s.t_start, s.t_end, s.m, p, d)?,
            MeasureKind::Exponential => {
                DiscretePathSpace::exponential(s.t_start, s.t_end, s.m, p, d, s.b.unwrap_or(1.0))?
            }
        };
        Ok(Arc::new(space))
    }

    pub fn process_spec(&self) -> Result<ProcessSpec> {
        let pr = &self.process;
        let name = serde_json::to_value(pr.kind).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        let kind = match pr.kind {
            ProcessName::Brownian => ProcessKind::Brownian,
            ProcessName::Bridge => ProcessKind::Bridge,
            ProcessName::Ou => ProcessKind::OrnsteinUhlenbeck { c: need(pr.c, "c", &name)? },
            ProcessName::Fbm => ProcessKind::Fbm { hurst: need(pr.hurst, "hurst", &name)? },
            ProcessName::Gamma => ProcessKind::Gamma { a: need(pr.a, "a", &name)? },
            ProcessName::CompoundPoisson => ProcessKind::CompoundPoisson {
                lambda: need(pr.lambda, "lambda", &name)?,
                jumps: JumpLaw::Normal { mean: pr.jump_mean.unwrap_or(0.0), sd: pr.jump_sd.unwrap_or(1.0) },
            },
            ProcessName::StableLevy => ProcessKind::StableLevy { alpha: need(pr.alpha, "alpha", &name)? },
            ProcessName::Diffusion => {
                let drift = pr.drift.unwrap_or([0.0, 0.0]);
                let vol = pr.vol.ok_or_else(|| Error::InvalidParameter("process.vol is required for kind = \"diffusion\"".into()))?;
                ProcessKind::Diffusion(DiffusionCoefficients::affine(drift[0], drift[1], vol[0], vol[1]))
            }
        };
        ProcessSpec::new(kind, vec![pr.x0; pr.d])
    }

    pub fn optimizer_config(&self) -> OptimizerConfig {
        let o = &self.optimizer;
        OptimizerConfig {
            method: o.method,
            max_iters: o.max_iters,
            tol: o.tol,
            step: StepSchedule { c0: o.c0, decay: o.decay },
            empty_cell_policy: o.empty_cell_policy,
            seed: self.seed_for("optimizer"),
            record_every: o.record_every,
        }
    }

    /// Stream seed for one purpose, derived from the top-level seed.
    pub fn seed_for(&self, purpose: &str) -> u64 {
        crate::rng::derive_seed(self.sample.seed, purpose)
    }

    /// SHA-256 of the canonical JSON form of the parsed configuration, with
    /// the `[output]` section left out.
    pub fn hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output = OutputSection::default();
        sha256_hex(serde_json::to_string(&canonical).expect("config serializes").as_bytes())
    }

    pub fn wants(&self, f: Format) -> bool {
        self.output.formats.contains(&f)
    }

    /// Registered closed-form one-point error for this setup, if any.
    pub fn closed_form_case(&self) -> Option<ClosedFormCase> {
        let s = &self.space;
        if s.t_start != 0.0 {
            return None;
        }
        match (self.process.kind, s.measure) {
            (ProcessName::Brownian, MeasureKind::Lebesgue) => Some(ClosedFormCase::Brownian { t_end: s.t_end }),
            (ProcessName::Bridge, MeasureKind::Lebesgue) => Some(ClosedFormCase::Bridge { t_end: s.t_end }),
            (ProcessName::Ou, MeasureKind::Exponential) => {
                Some(ClosedFormCase::StationaryOu { b: s.b.unwrap_or(1.0), t0: s.t_end })
            }
            _ => None,
        }
    }
}
