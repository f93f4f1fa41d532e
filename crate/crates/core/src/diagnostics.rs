//! Necessary-condition and regularity checks on a given codebook.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantize::{distortion, nearest_all, Codebook, Metric};
use crate::space::{sign, PathSample};
use crate::stats::linear_fit;

/// Ties above this fraction of the sample make a codebook inadmissible.
pub const TIE_MASS_THRESHOLD: f64 = 1e-3;

/// Smallest grid accepted by [`holder_fit`].
pub const HOLDER_MIN_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    /// `residuals[i][j]`: dual-norm of the mean first-order integrand for atom `i`, coordinate `j`.
    pub residuals: Vec<Vec<f64>>,
    pub max_residual: f64,
    /// `D^{(r-1)/r}`, the natural size of the integrand.
    pub scale: f64,
    pub relative_max_residual: f64,
    pub cell_masses: Vec<f64>,
    pub min_cell_mass: f64,
    pub tie_mass: f64,
    /// Empirical probability that a path coincides with some atom.
    pub atom_hit_mass: f64,
    /// Per atom share of the sample sitting exactly on it.
    pub atom_hits: Vec<f64>,
    /// All cells carry mass and the tie mass is below [`TIE_MASS_THRESHOLD`].
    pub admissible: bool,
    pub p: f64,
    pub r: f64,
}

/// Mean over the sample of `1_{C_i}(x) ||x - a_i||^{r-p} |a_i - x|^{p-1} sign(a_i - x)`,
/// measured in the conjugate grid norm (sup norm when `p = 1`).
pub fn stationarity_residual(codebook: &Codebook, sample: &PathSample, r: f64) -> StationarityReport {
    let space = codebook.space();
    let (p, d, m) = (space.p(), space.d(), space.m());
    let n = codebook.len();
    let near = nearest_all(codebook, sample, Metric::Lp);
    let mut sums = vec![vec![0.0; d * m]; n];
    let mut counts = vec![0usize; n];
    let mut hits = vec![0usize; n];
    let mut ties = 0usize;
    let mut total = 0.0;
    for (x, nr) in sample.paths().iter().zip(&near) {
        counts[nr.index] += 1;
        ties += nr.tie as usize;
        if nr.raw == 0.0 {
            hits[nr.index] += 1;
            continue;
        }
        let norm = nr.raw.powf(1.0 / p);
        total += norm.powf(r);
        let radial = norm.powf(r - p);
        let a = codebook.atom(nr.index).values();
        for ((s, u), v) in sums[nr.index].iter_mut().zip(a).zip(x.values()) {
            let diff = u - v;
            *s += radial
                * if p == 1.0 {
                    sign(diff)
                } else if p == 2.0 {
                    diff
                } else {
                    diff.abs().powf(p - 1.0) * sign(diff)
                };
        }
    }
    let count = sample.len() as f64;
    let w = space.weights();
    let residuals: Vec<Vec<f64>> = sums
        .iter()
        .map(|s| {
            (0..d)
                .map(|j| {
                    let row = &s[j * m..(j + 1) * m];
                    if p == 1.0 {
                        row.iter().fold(0.0f64, |acc, v| acc.max(v.abs())) / count
                    } else {
                        let q = p / (p - 1.0);
                        let acc: f64 = row.iter().zip(w).map(|(v, wk)| (v / count).abs().powf(q) * wk).sum();
                        acc.powf(1.0 / q)
                    }
                })
                .collect()
        })
        .collect();
    let max_residual = residuals.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
    let distortion = total / count;
    let scale = distortion.powf((r - 1.0) / r);
    let cell_masses: Vec<f64> = counts.iter().map(|&c| c as f64 / count).collect();
    let min_cell_mass = cell_masses.iter().copied().fold(f64::INFINITY, f64::min);
    let tie_mass = ties as f64 / count;
    let atom_hits: Vec<f64> = hits.iter().map(|&h| h as f64 / count).collect();
    StationarityReport {
        relative_max_residual: if scale > 0.0 { max_residual / scale } else { max_residual },
        residuals,
        max_residual,
        scale,
        admissible: min_cell_mass > 0.0 && tie_mass < TIE_MASS_THRESHOLD,
        cell_masses,
        min_cell_mass,
        tie_mass,
        atom_hit_mass: atom_hits.iter().sum(),
        atom_hits,
        p,
        r,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityEntry {
    pub n: usize,
    pub error: f64,
    pub stderr: f64,
    /// `(e_prev - e) / sqrt(se_prev^2 + se^2)`; absent for the first entry.
    pub gap_sigmas: Option<f64>,
    /// The error did not drop by more than two standard errors.
    pub flagged: bool,
}

pub fn monotonicity_check(codebooks: &[Codebook], sample: &PathSample, r: f64) -> Result<Vec<MonotonicityEntry>> {
    let mut out: Vec<MonotonicityEntry> = Vec::with_capacity(codebooks.len());
    for cb in codebooks {
        let rep = distortion(cb, sample, r)?;
        let (error, stderr) = (rep.quant_error(), rep.quant_error_stderr());
        let gap_sigmas = out.last().map(|prev| {
            let gap = prev.error - error;
            let se = prev.stderr.hypot(stderr);
            if se > 0.0 {
                gap / se
            } else if gap > 0.0 {
                f64::INFINITY
            } else if gap < 0.0 {
                f64::NEG_INFINITY
            } else {
                0.0
            }
        });
        out.push(MonotonicityEntry {
            n: cb.len(),
            error,
            stderr,
            gap_sigmas,
            flagged: gap_sigmas.is_some_and(|g| g <= 2.0),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderCoordinate {
    pub atom: usize,
    pub coord: usize,
    /// `+inf` when the coordinate has no positive increment at any lag.
    pub beta: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub max_increments: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    /// Lags in grid steps.
    pub lag_steps: Vec<usize>,
    /// Lags in time units.
    pub lags: Vec<f64>,
    pub fits: Vec<HolderCoordinate>,
}

impl HolderFit {
    pub fn betas(&self) -> impl Iterator<Item = f64> + '_ {
        self.fits.iter().map(|f| f.beta)
    }

    /// `atom,coord,lag,max_increment` rows.
    pub fn write_csv<W: Write>(&self, mut w: W, comment: Option<&str>) -> Result<()> {
        if let Some(c) = comment {
            writeln!(w, "# {c}")?;
        }
        writeln!(w, "atom,coord,lag,max_increment")?;
        for f in &self.fits {
            for (lag, inc) in self.lags.iter().zip(&f.max_increments) {
                writeln!(w, "{},{},{lag},{inc}", f.atom, f.coord)?;
            }
        }
        Ok(())
    }
}

/// Default lag range in grid steps: one step up to an eighth of the span.
pub fn default_lag_range(m: usize) -> (usize, usize) {
    (1, ((m - 1) / 8).max(2))
}

/// Log-log regression of `max_k |a(t_{k+l}) - a(t_k)|` against `l * dt` over
/// geometrically spaced integer lags `l` in `lag_range` (grid steps).
/// `dt` is the mean grid step.
pub fn holder_fit(codebook: &Codebook, lag_range: Option<(usize, usize)>) -> Result<HolderFit> {
    let space = codebook.space();
    let m = space.m();
    if m < HOLDER_MIN_NODES {
        return Err(Error::GridTooCoarse { min_m: HOLDER_MIN_NODES, m });
    }
    let (lo, hi) = lag_range.unwrap_or_else(|| default_lag_range(m));
    if lo == 0 || hi <= lo || hi > (m - 1) / 4 {
        return Err(Error::InvalidParameter(format!(
            "lag range [{lo}, {hi}] steps must satisfy 1 <= lo < hi <= {}",
            (m - 1) / 4
        )));
    }
    let lag_steps = geometric_lags(lo, hi, 24);
    let dt = space.step();
    let lags: Vec<f64> = lag_steps.iter().map(|&l| l as f64 * dt).collect();
    let log_lags: Vec<f64> = lags.iter().map(|l| l.ln()).collect();
    let mut fits = Vec::new();
    for (i, atom) in codebook.atoms().iter().enumerate() {
        for j in 0..space.d() {
            let row = atom.row(j);
            let max_increments: Vec<f64> = lag_steps
                .iter()
                .map(|&l| (0..m - l).fold(0.0f64, |acc, k| acc.max((row[k + l] - row[k]).abs())))
                .collect();
            let (xs, ys): (Vec<f64>, Vec<f64>) = log_lags
                .iter()
                .zip(&max_increments)
                .filter(|(_, &inc)| inc > 0.0)
                .map(|(&x, &inc)| (x, inc.ln()))
                .unzip();
            let fit = if xs.len() >= 2 { linear_fit(&xs, &ys) } else { None };
            let (beta, intercept, r_squared) = match fit {
                Some(f) => (f.slope, f.intercept, f.r_squared),
                None => (f64::INFINITY, f64::NEG_INFINITY, 0.0),
            };
            fits.push(HolderCoordinate { atom: i, coord: j, beta, intercept, r_squared, max_increments });
        }
    }
    Ok(HolderFit { lag_steps, lags, fits })
}

fn geometric_lags(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    let ratio = (hi as f64 / lo as f64).ln();
    let mut out: Vec<usize> = (0..count)
        .map(|k| (lo as f64 * (ratio * k as f64 / (count - 1) as f64).exp()).round() as usize)
        .map(|l| l.clamp(lo, hi))
        .collect();
    out.dedup();
    out
}

/// Largest `|a_i(t_k) - value|` over atoms, coordinates and the given node indices.
pub fn boundary_pinning(codebook: &Codebook, nodes: &[usize], value: f64) -> Result<f64> {
    let m = codebook.space().m();
    if let Some(&bad) = nodes.iter().find(|&&k| k >= m) {
        return Err(Error::InvalidParameter(format!("pin node {bad} outside grid of {m} nodes")));
    }
    let mut worst = 0.0f64;
    for a in codebook.atoms() {
        for j in 0..a.d() {
            for &k in nodes {
                worst = worst.max((a.get(j, k) - value).abs());
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::{lloyd_run, OptimizerConfig};
    use crate::process::{sample_paths, ProcessKind, ProcessSpec};
    use crate::space::{DiscretePathSpace, Path};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn space(m: usize, p: f64) -> Arc<DiscretePathSpace> {
        Arc::new(DiscretePathSpace::uniform(0.0, 1.0, m, p, 1).unwrap())
    }

    fn brownian(s: &DiscretePathSpace, n: usize, seed: u64) -> PathSample {
        sample_paths(&ProcessSpec::centered(ProcessKind::Brownian, 1).unwrap(), s, n, seed).unwrap()
    }

    #[test]
    fn residual_vanishes_at_the_mean() {
        let s = space(32, 2.0);
        let bm = brownian(&s, 500, 1);
        let cb = Codebook::single(s.clone(), bm.mean_path()).unwrap();
        let rep = stationarity_residual(&cb, &bm, 2.0);
        assert!(rep.max_residual < 1e-12);
        assert_eq!(rep.cell_masses, vec![1.0]);
        assert!(rep.admissible);

        let delta = 1e-3;
        let moved = Codebook::single(s.clone(), bm.mean_path().add(&Path::constant(1, 32, delta))).unwrap();
        let rep = stationarity_residual(&moved, &bm, 2.0);
        let expected = delta * s.total_mass().sqrt();
        assert!((rep.max_residual - expected).abs() < 1e-9, "{} vs {expected}", rep.max_residual);
    }

    #[test]
    fn lloyd_fixed_points_are_stationary() {
        let s = space(32, 2.0);
        let bm = brownian(&s, 1000, 2);
        let init = Codebook::new(s, bm.paths()[..4].to_vec()).unwrap();
        let (cb, _) = lloyd_run(&OptimizerConfig::lloyd(1000, 1e-300), &init, &bm, 2.0).unwrap();
        let rep = stationarity_residual(&cb, &bm, 2.0);
        assert!(rep.max_residual < 1e-10, "{}", rep.max_residual);
        let sum: f64 = rep.cell_masses.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn l1_uses_signs_and_sup_norm() {
        let s = space(8, 1.0);
        let sample = PathSample::new(vec![Path::constant(1, 8, 1.0), Path::constant(1, 8, 3.0)], 0, "two").unwrap();
        let at = |c: f64| stationarity_residual(&Codebook::single(s.clone(), Path::constant(1, 8, c)).unwrap(), &sample, 1.0);
        // any point between the two is a median
        assert_eq!(at(2.0).max_residual, 0.0);
        assert_eq!(at(0.0).max_residual, 1.0);
        let rep = at(1.0);
        assert_eq!(rep.atom_hit_mass, 0.5);
        assert_eq!(rep.max_residual, 0.5);
    }

    #[test]
    fn empty_cells_and_ties_are_flagged() {
        let s = space(8, 2.0);
        let sample = PathSample::new(vec![Path::constant(1, 8, 0.0)], 0, "one").unwrap();
        let cb = Codebook::new(s, vec![Path::constant(1, 8, -1.0), Path::constant(1, 8, 1.0), Path::constant(1, 8, 5.0)]).unwrap();
        let rep = stationarity_residual(&cb, &sample, 2.0);
        assert_eq!(rep.tie_mass, 1.0);
        assert_eq!(rep.min_cell_mass, 0.0);
        assert!(!rep.admissible);
    }

    #[test]
    fn monotonicity_flags() {
        let s = space(8, 2.0);
        let sample = PathSample::new(vec![Path::constant(1, 8, -1.0), Path::constant(1, 8, 1.0)], 0, "two").unwrap();
        let one = Codebook::single(s.clone(), Path::zeros(1, 8)).unwrap();
        let two = Codebook::new(s, vec![Path::constant(1, 8, -1.0), Path::constant(1, 8, 1.0)]).unwrap();
        let rows = monotonicity_check(&[one.clone(), two], &sample, 2.0).unwrap();
        assert_eq!(rows[1].error, 0.0);
        assert!(rows[1].error < rows[0].error && !rows[1].flagged);
        let rows = monotonicity_check(&[one.clone(), one], &sample, 2.0).unwrap();
        assert!(rows[1].flagged);
    }

    fn atom_fit(m: usize, f: impl Fn(f64) -> f64, lags: Option<(usize, usize)>) -> HolderFit {
        let s = space(m, 2.0);
        let a = Path::from_fn(1, s.grid(), |_, t| f(t)).unwrap();
        holder_fit(&Codebook::single(s, a).unwrap(), lags).unwrap()
    }

    #[test]
    fn holder_exponents_of_reference_functions() {
        let lin = atom_fit(257, |t| t, None);
        assert!((lin.fits[0].beta - 1.0).abs() < 1e-6);
        let root = atom_fit(1025, f64::sqrt, Some((1, 256)));
        assert!((root.fits[0].beta - 0.5).abs() < 0.02, "{}", root.fits[0].beta);
        let flat = atom_fit(128, |_| 2.0, None);
        assert_eq!(flat.fits[0].beta, f64::INFINITY);
    }

    #[test]
    fn holder_rejects_bad_inputs() {
        let s = space(32, 2.0);
        let cb = Codebook::single(s, Path::zeros(1, 32)).unwrap();
        assert!(matches!(holder_fit(&cb, None), Err(Error::GridTooCoarse { min_m: 64, m: 32 })));
        let s = space(128, 2.0);
        let cb = Codebook::single(s, Path::zeros(1, 128)).unwrap();
        assert!(holder_fit(&cb, Some((1, 100))).is_err());
        assert!(holder_fit(&cb, Some((0, 10))).is_err());
    }

    #[test]
    fn holder_csv_has_one_row_per_lag() {
        let fit = atom_fit(129, |t| t * t, None);
        let mut buf = Vec::new();
        fit.write_csv(&mut buf, None).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1 + fit.lags.len());
    }

    #[test]
    fn pinning() {
        let s = space(64, 2.0);
        let bm = brownian(&s, 200, 3);
        let cb = Codebook::new(s, bm.paths()[..3].to_vec()).unwrap();
        assert_eq!(boundary_pinning(&cb, &[0], 0.0).unwrap(), 0.0);
        assert!(boundary_pinning(&cb, &[63], 0.0).unwrap() > 0.0);
        assert!(boundary_pinning(&cb, &[64], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn holder_fit_is_scale_invariant(c in 0.01f64..100.0, seed in 0u64..20) {
            let s = space(96, 2.0);
            let bm = brownian(&s, 3, seed);
            let cb = Codebook::new(s.clone(), bm.paths().to_vec()).unwrap();
            let scaled = cb.affine(c, &Path::zeros(1, 96)).unwrap();
            let a = holder_fit(&cb, None).unwrap();
            let b = holder_fit(&scaled, None).unwrap();
            for (x, y) in a.fits.iter().zip(&b.fits) {
                prop_assert!((x.beta - y.beta).abs() < 1e-12);
                prop_assert!((y.intercept - x.intercept - c.ln()).abs() < 1e-9);
            }
        }
    }
}
