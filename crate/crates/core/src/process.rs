//! Seeded path samplers for the example processes, plus Monte Carlo
//! estimators of the intrinsic semimetric and of path-norm moments.
//!
//! Every process is indexed by `t - t_start` of the space's grid, so the
//! first grid node plays the role of time zero. Coordinates of `R^d`-valued
//! processes are independent except for Euler-simulated diffusions, whose
//! coefficients may couple them.
//!
//! Path `i` of a sample is drawn from ChaCha8 stream `i` of the sample seed,
//! which makes a sample independent of thread count and lets callers generate
//! any index range on its own (see [`sample_paths_range`]).

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Gamma, Normal, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::space::{DiscretePathSpace, Path, PathSample};

/// Diagonal jitter added when the plain fBM covariance factorization fails.
pub const FBM_JITTER: f64 = 1e-12;

/// Coefficient callback: `(t, x, out)`.
pub type CoefficientFn = Arc<dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync>;

/// `dX = b(t, X) dt + sigma(t, X) dW` with `W` a `d`-dimensional Brownian motion.
///
/// `drift` fills `d` entries, `diffusion` fills a row-major `d x d` matrix.
/// Existence of a (weak) solution is the caller's responsibility; it is not
/// checked.
#[derive(Clone)]
pub struct DiffusionCoefficients {
    pub label: String,
    pub drift: CoefficientFn,
    pub diffusion: CoefficientFn,
}

impl DiffusionCoefficients {
    /// Coordinate-wise affine coefficients `b(x) = a + b x`, `sigma(x) = c + e x` (diagonal noise).
    pub fn affine(a: f64, b: f64, c: f64, e: f64) -> Self {
        Self {
            label: format!("affine(a={a},b={b},c={c},e={e})"),
            drift: Arc::new(move |_, x, out| {
                out.iter_mut().zip(x).for_each(|(o, x)| *o = a + b * x);
            }),
            diffusion: Arc::new(move |_, x, out| {
                let d = x.len();
                out.iter_mut().for_each(|o| *o = 0.0);
                for j in 0..d {
                    out[j * d + j] = c + e * x[j];
                }
            }),
        }
    }
}

impl fmt::Debug for DiffusionCoefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionCoefficients").field("label", &self.label).finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum JumpLaw {
    Normal { mean: f64, sd: f64 },
    Uniform { low: f64, high: f64 },
}

impl Default for JumpLaw {
    fn default() -> Self {
        JumpLaw::Normal { mean: 0.0, sd: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub enum ProcessKind {
    Brownian,
    /// Pinned to `x0` at both ends of the grid.
    Bridge,
    /// Stationary, covariance `e^{-c|s-t|}` around mean `x0`.
    OrnsteinUhlenbeck { c: f64 },
    Fbm { hurst: f64 },
    Diffusion(DiffusionCoefficients),
    /// Gamma process: `X_t ~ Gamma(shape t, rate a)`.
    Gamma { a: f64 },
    CompoundPoisson { lambda: f64, jumps: JumpLaw },
    /// Symmetric `alpha`-stable Levy motion.
    StableLevy { alpha: f64 },
}

impl ProcessKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProcessKind::Brownian => "brownian",
            ProcessKind::Bridge => "bridge",
            ProcessKind::OrnsteinUhlenbeck { .. } => "ou",
            ProcessKind::Fbm { .. } => "fbm",
            ProcessKind::Diffusion(_) => "diffusion_euler",
            ProcessKind::Gamma { .. } => "gamma",
            ProcessKind::CompoundPoisson { .. } => "compound_poisson",
            ProcessKind::StableLevy { .. } => "stable_levy",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProcessSpec {
    pub kind: ProcessKind,
    pub x0: Vec<f64>,
}

impl ProcessSpec {
    pub fn new(kind: ProcessKind, x0: Vec<f64>) -> Result<Self> {
        let spec = Self { kind, x0 };
        spec.validate()?;
        Ok(spec)
    }

    /// Process started at the origin of `R^d`.
    pub fn centered(kind: ProcessKind, d: usize) -> Result<Self> {
        Self::new(kind, vec![0.0; d])
    }

    pub fn d(&self) -> usize {
        self.x0.len()
    }

    /// Identifier stored in generated samples, e.g. `fbm(H=0.7)`.
    pub fn tag(&self) -> String {
        match &self.kind {
            ProcessKind::OrnsteinUhlenbeck { c } => format!("ou(c={c})"),
            ProcessKind::Fbm { hurst } => format!("fbm(H={hurst})"),
            ProcessKind::Diffusion(coef) => format!("diffusion_euler({})", coef.label),
            ProcessKind::Gamma { a } => format!("gamma(a={a})"),
            ProcessKind::CompoundPoisson { lambda, .. } => format!("compound_poisson(lambda={lambda})"),
            ProcessKind::StableLevy { alpha } => format!("stable_levy(alpha={alpha})"),
            k => k.name().to_string(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.x0.is_empty() {
            return bad("x0 must have at least one coordinate".into());
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return bad("x0 must be finite".into());
        }
        let positive = |name: &str, v: f64| -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} must be finite and > 0")))
            }
        };
        match &self.kind {
            ProcessKind::Fbm { hurst } if !(*hurst > 0.0 && *hurst < 1.0) => {
                bad(format!("Hurst exponent {hurst} must lie in (0, 1)"))
            }
            ProcessKind::StableLevy { alpha } if !(*alpha > 0.0 && *alpha < 2.0) => {
                bad(format!("stability index {alpha} must lie in (0, 2)"))
            }
            ProcessKind::OrnsteinUhlenbeck { c } => positive("c", *c),
            ProcessKind::Gamma { a } => positive("a", *a),
            ProcessKind::CompoundPoisson { lambda, jumps } => {
                positive("lambda", *lambda)?;
                match *jumps {
                    JumpLaw::Normal { mean, sd } if mean.is_finite() => positive("sd", sd),
                    JumpLaw::Uniform { low, high } if low.is_finite() && high.is_finite() && low < high => Ok(()),
                    j => bad(format!("invalid jump law {j:?}")),
                }
            }
            _ => Ok(()),
        }
    }
}

/// Per-space preparation shared by every path of a sample.
struct Sampler<'a> {
    spec: &'a ProcessSpec,
    space: &'a DiscretePathSpace,
    /// Elapsed time `t_k - t_0`.
    times: Vec<f64>,
    /// Cholesky factor of the fBM covariance on nodes `1..m`.
    fbm_factor: Option<DMatrix<f64>>,
}

impl<'a> Sampler<'a> {
    fn new(spec: &'a ProcessSpec, space: &'a DiscretePathSpace) -> Result<Self> {
        spec.validate()?;
        if spec.d() != space.d() {
            return Err(Error::InvalidParameter(format!(
                "process dimension {} does not match space dimension {}",
                spec.d(),
                space.d()
            )));
        }
        let t0 = space.t_start();
        let times: Vec<f64> = space.grid().iter().map(|t| t - t0).collect();
        let fbm_factor = match spec.kind {
            ProcessKind::Fbm { hurst } => Some(fbm_cholesky(&times[1..], hurst)?),
            _ => None,
        };
        Ok(Self { spec, space, times, fbm_factor })
    }

    /// Path `index` of the sample keyed by `seed`, with its jump count.
    fn path(&self, seed: u64, index: u64) -> (Path, u64) {
        let mut rng = stream_rng(seed, index);
        let (d, m) = (self.space.d(), self.space.m());
        let mut values = vec![0.0; d * m];
        let mut jumps = 0u64;
        match &self.spec.kind {
            ProcessKind::Diffusion(coef) => self.euler(coef, &mut rng, &mut values),
            kind => {
                for j in 0..d {
                    let row = &mut values[j * m..(j + 1) * m];
                    jumps += self.scalar_path(kind, &mut rng, row);
                    let x0 = self.spec.x0[j];
                    if x0 != 0.0 {
                        row.iter_mut().for_each(|v| *v += x0);
                    }
                }
            }
        }
        (Path::from_raw(d, m, values), jumps)
    }

    /// Fills one centered coordinate; returns the number of jumps.
    fn scalar_path(&self, kind: &ProcessKind, rng: &mut ChaCha8Rng, row: &mut [f64]) -> u64 {
        let t = &self.times;
        let m = row.len();
        match *kind {
            ProcessKind::Brownian => brownian_into(t, rng, row),
            ProcessKind::Bridge => {
                brownian_into(t, rng, row);
                let end = row[m - 1];
                let span = t[m - 1];
                for k in 0..m {
                    row[k] -= (t[k] / span) * end;
                }
                row[m - 1] = 0.0;
            }
            ProcessKind::OrnsteinUhlenbeck { c } => {
                row[0] = rng.sample(StandardNormal);
                for k in 1..m {
                    let rho = (-c * (t[k] - t[k - 1])).exp();
                    let z: f64 = rng.sample(StandardNormal);
                    row[k] = rho * row[k - 1] + (1.0 - rho * rho).sqrt() * z;
                }
            }
            ProcessKind::Fbm { .. } => {
                let l = self.fbm_factor.as_ref().expect("factor prepared for fbm");
                let z = DVector::from_iterator(m - 1, (0..m - 1).map(|_| rng.sample::<f64, _>(StandardNormal)));
                let x = l * z;
                row[0] = 0.0;
                row[1..].copy_from_slice(x.as_slice());
            }
            ProcessKind::Gamma { a } => {
                row[0] = 0.0;
                for k in 1..m {
                    let shape = t[k] - t[k - 1];
                    let inc = Gamma::new(shape, 1.0 / a).expect("positive shape and scale").sample(rng);
                    row[k] = row[k - 1] + inc;
                }
            }
            ProcessKind::CompoundPoisson { lambda, jumps } => {
                row[0] = 0.0;
                let mut count = 0u64;
                for k in 1..m {
                    let mean = lambda * (t[k] - t[k - 1]);
                    let nk = Poisson::new(mean).expect("positive intensity").sample(rng) as u64;
                    let mut inc = 0.0;
                    for _ in 0..nk {
                        inc += draw_jump(jumps, rng);
                    }
                    count += nk;
                    row[k] = row[k - 1] + inc;
                }
                return count;
            }
            ProcessKind::StableLevy { alpha } => {
                row[0] = 0.0;
                for k in 1..m {
                    let dt = t[k] - t[k - 1];
                    row[k] = row[k - 1] + dt.powf(1.0 / alpha) * symmetric_stable(alpha, rng);
                }
            }
            ProcessKind::Diffusion(_) => unreachable!("handled by euler"),
        }
        0
    }

    fn euler(&self, coef: &DiffusionCoefficients, rng: &mut ChaCha8Rng, values: &mut [f64]) {
        let (d, m) = (self.space.d(), self.space.m());
        let grid = self.space.grid();
        let mut x = self.spec.x0.clone();
        let mut drift = vec![0.0; d];
        let mut sigma = vec![0.0; d * d];
        let mut dw = vec![0.0; d];
        for j in 0..d {
            values[j * m] = x[j];
        }
        for k in 1..m {
            let (t, dt) = (grid[k - 1], grid[k] - grid[k - 1]);
            (coef.drift)(t, &x, &mut drift);
            (coef.diffusion)(t, &x, &mut sigma);
            let sd = dt.sqrt();
            dw.iter_mut().for_each(|w| *w = sd * rng.sample::<f64, _>(StandardNormal));
            for j in 0..d {
                let noise: f64 = (0..d).map(|l| sigma[j * d + l] * dw[l]).sum();
                x[j] += drift[j] * dt + noise;
            }
            for j in 0..d {
                values[j * m + k] = x[j];
            }
        }
    }
}

fn brownian_into(t: &[f64], rng: &mut ChaCha8Rng, row: &mut [f64]) {
    row[0] = 0.0;
    for k in 1..row.len() {
        let z: f64 = rng.sample(StandardNormal);
        row[k] = row[k - 1] + (t[k] - t[k - 1]).sqrt() * z;
    }
}

fn draw_jump(law: JumpLaw, rng: &mut ChaCha8Rng) -> f64 {
    match law {
        JumpLaw::Normal { mean, sd } => Normal::new(mean, sd).expect("validated").sample(rng),
        JumpLaw::Uniform { low, high } => rng.random_range(low..high),
    }
}

/// Chambers-Mallows-Stuck draw of a standard symmetric `alpha`-stable variable.
pub(crate) fn symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = rng.random_range(-FRAC_PI_2..FRAC_PI_2);
    let w: f64 = rng.sample(Exp1);
    if (alpha - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    (alpha * v).sin() / v.cos().powf(1.0 / alpha) * ((v - alpha * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// Lower Cholesky factor of `1/2 (s^{2H} + t^{2H} - |s - t|^{2H})` on strictly positive times.
fn fbm_cholesky(times: &[f64], hurst: f64) -> Result<DMatrix<f64>> {
    let n = times.len();
    let h2 = 2.0 * hurst;
    let cov = DMatrix::from_fn(n, n, |i, j| {
        let (s, t) = (times[i], times[j]);
        0.5 * (s.powf(h2) + t.powf(h2) - (s - t).abs().powf(h2))
    });
    if let Some(ch) = cov.clone().cholesky() {
        return Ok(ch.unpack());
    }
    let scale = (0..n).map(|i| cov[(i, i)]).fold(0.0f64, f64::max);
    let jitter = FBM_JITTER * scale.max(1.0);
    let mut jittered = cov;
    for i in 0..n {
        jittered[(i, i)] += jitter;
    }
    jittered
        .cholesky()
        .map(|c| c.unpack())
        .ok_or(Error::CovarianceFactorization { jitter })
}

/// Draws `n_paths` i.i.d. paths of `spec` on `space`.
pub fn sample_paths(spec: &ProcessSpec, space: &DiscretePathSpace, n_paths: usize, seed: u64) -> Result<PathSample> {
    sample_paths_range(spec, space, 0, n_paths, seed)
}

/// Paths `start..start + count` of the sample that [`sample_paths`] would draw with `seed`.
pub fn sample_paths_range(
    spec: &ProcessSpec,
    space: &DiscretePathSpace,
    start: usize,
    count: usize,
    seed: u64,
) -> Result<PathSample> {
    if count == 0 {
        return Err(Error::InvalidParameter("n_paths must be >= 1".into()));
    }
    let sampler = Sampler::new(spec, space)?;
    let drawn: Vec<(Path, u64)> = (start..start + count)
        .into_par_iter()
        .map(|i| sampler.path(seed, i as u64))
        .collect();
    let (paths, jumps): (Vec<Path>, Vec<u64>) = drawn.into_iter().unzip();
    let mut sample = PathSample::new(paths, seed, spec.tag())?;
    match spec.kind {
        ProcessKind::CompoundPoisson { .. } => sample = sample.with_jump_counts(jumps),
        ProcessKind::StableLevy { alpha } => sample = sample.with_tail_index(alpha),
        _ => {}
    }
    Ok(sample)
}

/// Monte Carlo estimate of `(E |X_s - X_t|_q^q)^{1 / max(q, 1)}` between grid nodes.
pub fn intrinsic_semimetric(sample: &PathSample, q: f64, s_idx: usize, t_idx: usize) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(q.is_finite() && q > 0.0) {
        return Err(Error::InvalidParameter(format!("q = {q} must be > 0")));
    }
    let m = sample.m();
    if s_idx >= m || t_idx >= m {
        return Err(Error::InvalidParameter(format!("node index out of range (m = {m})")));
    }
    if s_idx == t_idx {
        return Ok(0.0);
    }
    let d = sample.d();
    let total: f64 = sample
        .paths()
        .iter()
        .map(|p| (0..d).map(|j| (p.get(j, s_idx) - p.get(j, t_idx)).abs().powf(q)).sum::<f64>())
        .sum();
    Ok((total / sample.len() as f64).powf(1.0 / q.max(1.0)))
}

/// Outcome of the integrability sanity gate `E ||X||_p^r < infinity`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    /// Estimate of `E ||X||_p^r` over the whole sample.
    pub value: f64,
    pub first_half: f64,
    pub second_half: f64,
    /// Finite, and the two half-sample estimates agree within 20 %.
    pub stable: bool,
    /// The law's tail index is at most `r`, so the moment diverges.
    pub heavy_tail: bool,
    pub note: Option<String>,
}

/// Estimates `E ||X||_p^r` and checks it for stability across half samples.
pub fn moment_check(sample: &PathSample, space: &DiscretePathSpace, r: f64) -> Result<MomentCheck> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter(format!("r = {r} must be > 0")));
    }
    space.check(sample.path(0))?;
    let p = space.p();
    let terms: Vec<f64> = sample
        .paths()
        .par_iter()
        .map(|x| space.pow_sum(x.values()).powf(r / p))
        .collect();
    let mean = |s: &[f64]| if s.is_empty() { f64::NAN } else { s.iter().sum::<f64>() / s.len() as f64 };
    let value = mean(&terms);
    let half = terms.len() / 2;
    let (first_half, second_half) = if half == 0 { (value, value) } else { (mean(&terms[..half]), mean(&terms[half..])) };
    let scale = first_half.abs().max(second_half.abs());
    let stable = value.is_finite() && (scale == 0.0 || (first_half - second_half).abs() <= 0.2 * scale);
    let heavy_tail = sample.tail_index().is_some_and(|rho| r >= rho);
    let note = heavy_tail.then(|| format!("heavy-tail: r >= rho (r = {r}, rho = {})", sample.tail_index().unwrap()));
    Ok(MomentCheck {
        value,
        first_half,
        second_half,
        stable,
        heavy_tail,
        note,
    })
}
