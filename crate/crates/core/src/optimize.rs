//! Codebook optimization.
//!
//! * [`lloyd_step`] / [`lloyd_run`]: the quadratic fixed-point map, where each
//!   atom moves to the centroid of its cell weighted by `||x - a_i||^{r-2}`.
//!   Only available for `p = 2`, `r >= 2`.
//! * [`sgd_run`]: competitive learning on the distortion gradient
//!   `r E(1_{C_i}(X) ||X - a_i||^{r-1} grad||.||(a_i - X))` for any `p > 1`.
//! * [`splitting_sequence`]: grows a codebook one atom at a time.
//! * [`product_quantizer`]: cartesian products of per-coordinate codebooks.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::stationarity_residual;
use crate::error::{Error, Result};
use crate::quantize::{distortion, nearest, nearest_all, raw_to_power, Codebook, Metric};
use crate::rng::{derive_seed, stream_rng};
use crate::space::{fill_gradient, DiscretePathSpace, Path, PathSample};

/// Fraction of the way from the split atom towards the sampled path.
pub const SPLIT_FRACTION: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lloyd,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmptyCellPolicy {
    /// Move the dead atom onto the farthest path of the cell with the largest distortion.
    #[default]
    SplitLargest,
    /// Move the dead atom onto a uniformly drawn sample path.
    Resample,
}

/// Step size `c0 / (1 + decay * k)` at draw `k`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepSchedule {
    /// Defaults to `0.1 * e0^{2-r}` with `e0` the initial quantization error.
    pub c0: Option<f64>,
    /// Defaults to `1 / N`.
    pub decay: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub method: Method,
    /// Lloyd steps, or SGD draws.
    pub max_iters: usize,
    /// Stop once the relative stationarity residual falls below this.
    pub tol: f64,
    pub step: StepSchedule,
    pub empty_cell_policy: EmptyCellPolicy,
    pub seed: u64,
    /// SGD draws between two trace records; defaults to the sample size.
    pub record_every: Option<usize>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            method: Method::Lloyd,
            max_iters: 200,
            tol: 1e-9,
            step: StepSchedule::default(),
            empty_cell_policy: EmptyCellPolicy::SplitLargest,
            seed: 0,
            record_every: None,
        }
    }
}

impl OptimizerConfig {
    pub fn lloyd(max_iters: usize, tol: f64) -> Self {
        Self {
            max_iters,
            tol,
            ..Self::default()
        }
    }

    pub fn sgd(max_iters: usize, tol: f64, seed: u64) -> Self {
        Self {
            method: Method::Sgd,
            max_iters,
            tol,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!("tol = {} must be > 0", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be >= 1".into()));
        }
        if let Some(c0) = self.step.c0 {
            if !(c0.is_finite() && c0 > 0.0) {
                return Err(Error::InvalidParameter(format!("c0 = {c0} must be > 0")));
            }
        }
        if let Some(decay) = self.step.decay {
            if !(decay.is_finite() && decay >= 0.0) {
                return Err(Error::InvalidParameter(format!("decay = {decay} must be >= 0")));
            }
        }
        if self.record_every == Some(0) {
            return Err(Error::InvalidParameter("record_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExitReason {
    /// The Voronoi partition stopped changing (exact Lloyd fixed point).
    FixedPoint,
    Tolerance,
    MaxIters,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmptyCellEvent {
    pub iteration: usize,
    pub atom: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeTrace {
    /// Iteration (Lloyd step or SGD draw count) of each record.
    pub iterations_at: Vec<usize>,
    pub distortions: Vec<f64>,
    /// Relative stationarity residual of each record.
    pub residuals: Vec<f64>,
    /// Relative stationarity residual of the returned codebook.
    pub exit_residual: f64,
    pub iterations: usize,
    pub exit_reason: ExitReason,
    pub empty_cell_events: Vec<EmptyCellEvent>,
    /// Records whose distortion exceeded the previous one (Lloyd with `r > 2` only).
    pub monotonicity_violations: Vec<usize>,
}

impl OptimizeTrace {
    fn new() -> Self {
        Self {
            iterations_at: Vec::new(),
            distortions: Vec::new(),
            residuals: Vec::new(),
            exit_residual: f64::NAN,
            iterations: 0,
            exit_reason: ExitReason::MaxIters,
            empty_cell_events: Vec::new(),
            monotonicity_violations: Vec::new(),
        }
    }

    fn record(&mut self, iteration: usize, distortion: f64, residual: f64) {
        self.iterations_at.push(iteration);
        self.distortions.push(distortion);
        self.residuals.push(residual);
    }

    pub fn final_distortion(&self) -> f64 {
        *self.distortions.last().unwrap_or(&f64::NAN)
    }

    /// `iteration,distortion,residual` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "iteration,distortion,residual")?;
        for ((i, d), r) in self.iterations_at.iter().zip(&self.distortions).zip(&self.residuals) {
            writeln!(w, "{i},{d},{r}")?;
        }
        Ok(())
    }
}

fn require_lloyd(space: &DiscretePathSpace, r: f64) -> Result<()> {
    if space.p() != 2.0 || !(r.is_finite() && r >= 2.0) {
        return Err(Error::LloydUnsupported { p: space.p(), r });
    }
    Ok(())
}

/// One Lloyd update with the default empty-cell policy.
pub fn lloyd_step(codebook: &Codebook, sample: &PathSample, r: f64) -> Result<Codebook> {
    require_lloyd(codebook.space(), r)?;
    codebook.check_sample(sample)?;
    let mut atoms = codebook.atoms().to_vec();
    let mut rng = stream_rng(0, 0);
    repair_empty_cells(codebook.space(), &mut atoms, sample, r, EmptyCellPolicy::SplitLargest, &mut rng);
    let pass = centroid_pass(codebook.space(), &atoms, sample, r);
    Codebook::new(codebook.space().clone(), pass.centroids)
}

/// Result of one assignment + weighted-centroid sweep.
struct CentroidPass {
    cells: Vec<usize>,
    counts: Vec<usize>,
    distortion: f64,
    /// Max over atoms of `||E 1_{C_i} ||X-a_i||^{r-2} (a_i - X)||_2` divided by `D^{(r-1)/r}`.
    relative_residual: f64,
    centroids: Vec<Path>,
}

fn centroid_pass(space: &DiscretePathSpace, atoms: &[Path], sample: &PathSample, r: f64) -> CentroidPass {
    let n = atoms.len();
    let len = atoms[0].values().len();
    let cb_atoms = atoms;
    let near: Vec<_> = {
        use rayon::prelude::*;
        sample
            .paths()
            .par_iter()
            .map(|x| nearest(space, Metric::Lp, cb_atoms, x.values()))
            .collect()
    };
    let mut sums = vec![vec![0.0; len]; n];
    let mut wsum = vec![0.0; n];
    let mut total = 0.0;
    for (x, nr) in sample.paths().iter().zip(&near) {
        total += raw_to_power(space, Metric::Lp, nr.raw, r);
        // ||x - a||^{r-2} from the squared norm
        let w = if r == 2.0 { 1.0 } else { nr.raw.powf(0.5 * (r - 2.0)) };
        if w == 0.0 {
            continue;
        }
        wsum[nr.index] += w;
        sums[nr.index].iter_mut().zip(x.values()).for_each(|(s, v)| *s += w * v);
    }
    let count = sample.len() as f64;
    let distortion = total / count;
    let mut residual = 0.0f64;
    let centroids: Vec<Path> = atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if wsum[i] == 0.0 {
                return a.clone();
            }
            let c: Vec<f64> = sums[i].iter().map(|s| s / wsum[i]).collect();
            let shift = space.pow_sum_diff(a.values(), &c).sqrt();
            residual = residual.max(wsum[i] / count * shift);
            Path::from_raw(a.d(), a.m(), c)
        })
        .collect();
    let scale = distortion.powf((r - 1.0) / r);
    let mut counts = vec![0usize; n];
    near.iter().for_each(|nr| counts[nr.index] += 1);
    CentroidPass {
        cells: near.iter().map(|n| n.index).collect(),
        counts,
        distortion,
        relative_residual: if scale > 0.0 { residual / scale } else { residual },
        centroids,
    }
}

/// Moves atoms of empty cells; returns the indices that were moved.
fn repair_empty_cells<R: Rng>(
    space: &DiscretePathSpace,
    atoms: &mut [Path],
    sample: &PathSample,
    r: f64,
    policy: EmptyCellPolicy,
    rng: &mut R,
) -> Vec<usize> {
    let mut moved = Vec::new();
    for _round in 0..atoms.len() {
        let near: Vec<_> = sample.paths().iter().map(|x| nearest(space, Metric::Lp, atoms, x.values())).collect();
        let mut counts = vec![0usize; atoms.len()];
        let mut cell_distortion = vec![0.0; atoms.len()];
        for n in &near {
            counts[n.index] += 1;
            cell_distortion[n.index] += raw_to_power(space, Metric::Lp, n.raw, r);
        }
        let Some(dead) = counts.iter().position(|&c| c == 0) else {
            break;
        };
        let replacement = match policy {
            EmptyCellPolicy::SplitLargest => {
                let (largest, &mass) = cell_distortion
                    .iter()
                    .enumerate()
                    .max_by(|a, b| a.1.total_cmp(b.1))
                    .expect("non-empty codebook");
                if mass == 0.0 {
                    None
                } else {
                    near.iter()
                        .enumerate()
                        .filter(|(_, n)| n.index == largest)
                        .max_by(|a, b| a.1.raw.total_cmp(&b.1.raw))
                        .map(|(k, _)| k)
                }
            }
            EmptyCellPolicy::Resample => {
                let off_atom: Vec<usize> = (0..sample.len()).filter(|&k| near[k].raw > 0.0).collect();
                (!off_atom.is_empty()).then(|| off_atom[rng.random_range(0..off_atom.len())])
            }
        };
        match replacement {
            Some(k) => {
                atoms[dead] = sample.path(k).clone();
                moved.push(dead);
            }
            // every path sits on an atom: nothing left to split
            None => break,
        }
    }
    moved
}

/// Lloyd iteration from `init` until the partition is fixed, the relative
/// stationarity residual of the current atoms drops below `config.tol`, or
/// `config.max_iters` steps.
pub fn lloyd_run(config: &OptimizerConfig, init: &Codebook, sample: &PathSample, r: f64) -> Result<(Codebook, OptimizeTrace)> {
    config.validate()?;
    let space = init.space().clone();
    require_lloyd(&space, r)?;
    init.check_sample(sample)?;
    let mut rng = stream_rng(derive_seed(config.seed, "lloyd-empty-cells"), 0);
    let mut atoms = init.atoms().to_vec();
    let mut trace = OptimizeTrace::new();
    let mut prev_cells: Option<Vec<usize>> = None;
    let mut iteration = 0usize;
    loop {
        let mut pass = centroid_pass(&space, &atoms, sample, r);
        let mut moved = Vec::new();
        if pass.counts.contains(&0) {
            moved = repair_empty_cells(&space, &mut atoms, sample, r, config.empty_cell_policy, &mut rng);
            if !moved.is_empty() {
                pass = centroid_pass(&space, &atoms, sample, r);
            }
        }
        trace
            .empty_cell_events
            .extend(moved.iter().map(|&atom| EmptyCellEvent { iteration, atom }));
        if let Some(&last) = trace.distortions.last() {
            if pass.distortion > last * (1.0 + 1e-12) + 1e-10 * (r > 2.0) as u8 as f64 {
                trace.monotonicity_violations.push(iteration);
            }
        }
        trace.record(iteration, pass.distortion, pass.relative_residual);
        trace.exit_residual = pass.relative_residual;
        let fixed = moved.is_empty() && prev_cells.as_ref() == Some(&pass.cells);
        if fixed || pass.distortion == 0.0 {
            trace.exit_reason = ExitReason::FixedPoint;
            break;
        }
        if moved.is_empty() && pass.relative_residual < config.tol {
            trace.exit_reason = ExitReason::Tolerance;
            break;
        }
        if iteration == config.max_iters {
            trace.exit_reason = ExitReason::MaxIters;
            break;
        }
        atoms = pass.centroids;
        prev_cells = Some(pass.cells);
        iteration += 1;
    }
    trace.iterations = iteration;
    Ok((Codebook::new(space, atoms)?, trace))
}

/// Empirical distortion gradient, one dual-space path per atom:
/// `(r / N) sum_{x in C_i, x != a_i} ||x - a_i||^{r-1} grad||.||_p(a_i - x)`.
pub fn distortion_gradient(codebook: &Codebook, sample: &PathSample, r: f64) -> Result<Vec<Path>> {
    let space = codebook.space();
    if space.p() == 1.0 {
        return Err(Error::NonSmoothNorm { p: 1.0 });
    }
    codebook.check_sample(sample)?;
    let p = space.p();
    let near = nearest_all(codebook, sample, Metric::Lp);
    let len = codebook.atom(0).values().len();
    let mut grads = vec![vec![0.0; len]; codebook.len()];
    let mut diff = vec![0.0; len];
    let mut g = vec![0.0; len];
    for (x, nr) in sample.paths().iter().zip(&near) {
        if nr.raw == 0.0 {
            continue;
        }
        let a = codebook.atom(nr.index);
        diff.iter_mut()
            .zip(a.values().iter().zip(x.values()))
            .for_each(|(d, (u, v))| *d = u - v);
        let norm = nr.raw.powf(1.0 / p);
        fill_gradient(p, norm, &diff, &mut g);
        let coef = r * norm.powf(r - 1.0);
        grads[nr.index].iter_mut().zip(&g).for_each(|(s, v)| *s += coef * v);
    }
    let n = sample.len() as f64;
    Ok(grads
        .into_iter()
        .map(|v| Path::from_raw(codebook.atom(0).d(), codebook.atom(0).m(), v.into_iter().map(|s| s / n).collect()))
        .collect())
}

/// Competitive learning: each draw moves its nearest atom against the
/// single-sample distortion gradient.
pub fn sgd_run(config: &OptimizerConfig, init: &Codebook, sample: &PathSample, r: f64) -> Result<(Codebook, OptimizeTrace)> {
    config.validate()?;
    let space = init.space().clone();
    let p = space.p();
    if p == 1.0 {
        return Err(Error::NonSmoothNorm { p });
    }
    if !(r.is_finite() && r >= 1.0) {
        return Err(Error::InvalidParameter(format!("r = {r} must be >= 1")));
    }
    init.check_sample(sample)?;
    let initial = distortion(init, sample, r)?;
    if r == 1.0 && nearest_all(init, sample, Metric::Lp).iter().any(|n| n.raw == 0.0) {
        return Err(Error::InvalidParameter(
            "r = 1 requires that no sample path coincides with an atom".into(),
        ));
    }
    let n_paths = sample.len();
    let c0 = config
        .step
        .c0
        .unwrap_or_else(|| 0.1 * initial.quant_error().max(f64::MIN_POSITIVE).powf(2.0 - r));
    let decay = config.step.decay.unwrap_or(1.0 / n_paths as f64);
    let record_every = config.record_every.unwrap_or(n_paths);

    let mut trace = OptimizeTrace::new();
    let initial_residual = stationarity_residual(init, sample, r).relative_max_residual;
    trace.record(0, initial.value, initial_residual);
    trace.exit_residual = initial_residual;

    let mut atoms = init.atoms().to_vec();
    let mut rng = stream_rng(derive_seed(config.seed, "sgd-draws"), 0);
    let len = atoms[0].values().len();
    let mut diff = vec![0.0; len];
    let mut g = vec![0.0; len];
    for k in 0..config.max_iters {
        let x = sample.path(rng.random_range(0..n_paths));
        let nr = nearest(&space, Metric::Lp, &atoms, x.values());
        if nr.raw > 0.0 {
            let a = &mut atoms[nr.index];
            diff.iter_mut()
                .zip(a.values().iter().zip(x.values()))
                .for_each(|(d, (u, v))| *d = u - v);
            let norm = nr.raw.powf(1.0 / p);
            fill_gradient(p, norm, &diff, &mut g);
            let step = c0 / (1.0 + decay * k as f64) * r * norm.powf(r - 1.0);
            a.values_mut().iter_mut().zip(&g).for_each(|(u, v)| *u -= step * v);
        }
        let done = k + 1 == config.max_iters;
        if (k + 1) % record_every == 0 || done {
            let cb = Codebook::new(space.clone(), atoms.clone())?;
            let d = distortion(&cb, sample, r)?.value;
            let res = stationarity_residual(&cb, sample, r).relative_max_residual;
            trace.record(k + 1, d, res);
            trace.exit_residual = res;
            trace.iterations = k + 1;
            if !d.is_finite() || d > 10.0 * initial.value {
                return Err(Error::Diverged { trace: Box::new(trace) });
            }
            if res < config.tol {
                trace.exit_reason = ExitReason::Tolerance;
                break;
            }
        }
    }
    Ok((Codebook::new(space, atoms)?, trace))
}

/// Runs the configured method.
pub fn optimize(config: &OptimizerConfig, init: &Codebook, sample: &PathSample, r: f64) -> Result<(Codebook, OptimizeTrace)> {
    match config.method {
        Method::Lloyd => lloyd_run(config, init, sample, r),
        Method::Sgd => sgd_run(config, init, sample, r),
    }
}

/// Optimized codebooks of sizes `1..=n`, each grown from the previous one by
/// splitting the atom that carries the largest share of the distortion.
pub fn splitting_sequence(
    sample: &PathSample,
    space: &Arc<DiscretePathSpace>,
    n: usize,
    r: f64,
    config: &OptimizerConfig,
) -> Result<(Vec<Codebook>, Vec<OptimizeTrace>)> {
    if n == 0 {
        return Err(Error::InvalidParameter("codebook size n must be >= 1".into()));
    }
    space.check(sample.path(0))?;
    let mut init = Codebook::single(space.clone(), sample.mean_path())?;
    let mut books = Vec::with_capacity(n);
    let mut traces = Vec::with_capacity(n);
    for k in 1..=n {
        let (cb, trace) = optimize(config, &init, sample, r)?;
        books.push(cb.clone());
        traces.push(trace);
        if k == n {
            break;
        }
        init = split_worst(&cb, sample, r, derive_seed(config.seed, "split"), k as u64)?;
    }
    Ok((books, traces))
}

/// The size-`n` codebook of [`splitting_sequence`].
pub fn splitting_init(
    sample: &PathSample,
    space: &Arc<DiscretePathSpace>,
    n: usize,
    r: f64,
    config: &OptimizerConfig,
) -> Result<Codebook> {
    let (mut books, _) = splitting_sequence(sample, space, n, r, config)?;
    Ok(books.pop().expect("n >= 1"))
}

fn split_worst(cb: &Codebook, sample: &PathSample, r: f64, seed: u64, level: u64) -> Result<Codebook> {
    let space = cb.space();
    let near = nearest_all(cb, sample, Metric::Lp);
    let mut share = vec![0.0; cb.len()];
    for n in &near {
        share[n.index] += raw_to_power(space, Metric::Lp, n.raw, r);
    }
    let worst = share
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .expect("non-empty codebook");
    let members: Vec<usize> = (0..sample.len())
        .filter(|&k| near[k].index == worst && near[k].raw > 0.0)
        .collect();
    if members.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "cannot grow beyond {} atoms: every path coincides with an atom",
            cb.len()
        )));
    }
    let mut rng = stream_rng(seed, level);
    let x = sample.path(members[rng.random_range(0..members.len())]);
    let a = cb.atom(worst);
    let child = a.affine(1.0 - SPLIT_FRACTION, &x.scaled(SPLIT_FRACTION));
    let mut atoms = cb.atoms().to_vec();
    atoms.push(child);
    Codebook::new(space.clone(), atoms)
}

/// Cartesian product of single-coordinate codebooks sharing one grid. Atom
/// order is lexicographic with the first coordinate varying slowest.
pub fn product_quantizer(marginals: &[Codebook], cap: usize) -> Result<Codebook> {
    let first = marginals
        .first()
        .ok_or_else(|| Error::InvalidParameter("need at least one marginal codebook".into()))?;
    let base = first.space();
    for cb in marginals {
        let s = cb.space();
        if s.d() != 1 {
            return Err(Error::InvalidParameter("marginal codebooks must be single-coordinate".into()));
        }
        if s.grid() != base.grid() || s.weights() != base.weights() || s.p() != base.p() {
            return Err(Error::InvalidParameter("marginal codebooks must share grid, weights and p".into()));
        }
    }
    let size = marginals
        .iter()
        .try_fold(1usize, |acc, cb| acc.checked_mul(cb.len()))
        .unwrap_or(usize::MAX);
    if size > cap {
        return Err(Error::CapExceeded { size, cap });
    }
    let d = marginals.len();
    let m = base.m();
    let space = Arc::new(base.with_dim(d)?);
    let mut atoms = Vec::with_capacity(size);
    let mut idx = vec![0usize; d];
    for _ in 0..size {
        let mut values = Vec::with_capacity(d * m);
        for (j, cb) in marginals.iter().enumerate() {
            values.extend_from_slice(cb.atom(idx[j]).values());
        }
        atoms.push(Path::from_raw(d, m, values));
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < marginals[j].len() {
                break;
            }
            idx[j] = 0;
        }
    }
    Codebook::new(space, atoms)
}
