//! Codebooks, Voronoi assignment and empirical distortion.
//!
//! For a codebook `alpha = {a_1, ..., a_n}` and a sample standing in for the
//! law of `X`, the empirical distortion is `mean_x min_i ||x - a_i||^r` and
//! the quantization error is its `1/r`-th power. Nearest-atom ties go to the
//! lowest atom index and are flagged so that tie mass can be reported.

use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{read_paths_binary, write_paths_binary};
use crate::space::{DiscretePathSpace, Path, PathSample};

/// An ordered n-tuple of pairwise distinct atoms in a path space.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    atoms: Vec<Path>,
    space: Arc<DiscretePathSpace>,
}

impl Codebook {
    /// Rejects empty codebooks, shape mismatches and duplicate atoms.
    pub fn new(space: Arc<DiscretePathSpace>, atoms: Vec<Path>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyCodebook);
        }
        let mut cb = Self {
            atoms: Vec::with_capacity(atoms.len()),
            space,
        };
        for a in atoms {
            cb.push(a)?;
        }
        Ok(cb)
    }

    pub fn single(space: Arc<DiscretePathSpace>, atom: Path) -> Result<Self> {
        Self::new(space, vec![atom])
    }

    /// Appends an atom, refusing one that coincides with an existing atom.
    pub fn push(&mut self, atom: Path) -> Result<()> {
        self.space.check(&atom)?;
        if let Some(index) = self
            .atoms
            .iter()
            .position(|a| self.space.pow_sum_diff(a.values(), atom.values()) == 0.0)
        {
            return Err(Error::DuplicateAtom { index });
        }
        self.atoms.push(atom);
        Ok(())
    }

    pub fn atoms(&self) -> &[Path] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Path {
        &self.atoms[i]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn space(&self) -> &Arc<DiscretePathSpace> {
        &self.space
    }

    pub fn into_atoms(self) -> Vec<Path> {
        self.atoms
    }

    /// The same atoms measured in another space of identical shape (e.g. another exponent).
    pub fn in_space(&self, space: Arc<DiscretePathSpace>) -> Result<Self> {
        for a in &self.atoms {
            space.check(a)?;
        }
        Ok(Self {
            atoms: self.atoms.clone(),
            space,
        })
    }

    /// Image under `x -> c x + shift`, `c != 0`.
    pub fn affine(&self, c: f64, shift: &Path) -> Result<Self> {
        self.space.check(shift)?;
        Self::new(self.space.clone(), self.atoms.iter().map(|a| a.affine(c, shift)).collect())
    }

    pub fn write_binary<W: Write>(&self, w: W) -> Result<()> {
        write_paths_binary(w, &self.atoms, 0)
    }

    pub fn read_binary<R: Read>(r: R, space: Arc<DiscretePathSpace>) -> Result<Self> {
        let (_, atoms) = read_paths_binary(r)?;
        Self::new(space, atoms)
    }

    pub(crate) fn check_sample(&self, sample: &PathSample) -> Result<()> {
        self.space.check(sample.path(0))
    }
}

/// Distance used to pick the nearest atom and to measure distortion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// The space's `L^p` norm.
    Lp,
    /// Maximum absolute entry over coordinates and grid nodes.
    Sup,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Nearest {
    pub index: usize,
    /// `||x - a||_p^p` for `Metric::Lp`, `||x - a||_sup` for `Metric::Sup`.
    pub raw: f64,
    pub tie: bool,
}

#[inline]
pub(crate) fn raw_distance(space: &DiscretePathSpace, metric: Metric, x: &[f64], a: &[f64]) -> f64 {
    match metric {
        Metric::Lp => space.pow_sum_diff(x, a),
        Metric::Sup => x.iter().zip(a).fold(0.0f64, |acc, (u, v)| acc.max((u - v).abs())),
    }
}

/// `raw` to `distance^r`; exact when `r` equals the natural power of `raw`.
#[inline]
pub(crate) fn raw_to_power(space: &DiscretePathSpace, metric: Metric, raw: f64, r: f64) -> f64 {
    let native = match metric {
        Metric::Lp => space.p(),
        Metric::Sup => 1.0,
    };
    if r == native {
        raw
    } else if r == 2.0 * native {
        raw * raw
    } else {
        raw.powf(r / native)
    }
}

#[inline]
pub(crate) fn nearest(space: &DiscretePathSpace, metric: Metric, atoms: &[Path], x: &[f64]) -> Nearest {
    let mut best = Nearest {
        index: 0,
        raw: f64::INFINITY,
        tie: false,
    };
    for (i, a) in atoms.iter().enumerate() {
        let raw = raw_distance(space, metric, x, a.values());
        if raw < best.raw {
            best = Nearest { index: i, raw, tie: false };
        } else if raw == best.raw {
            best.tie = true;
        }
    }
    best
}

pub(crate) fn nearest_all(codebook: &Codebook, sample: &PathSample, metric: Metric) -> Vec<Nearest> {
    let space = codebook.space.as_ref();
    sample
        .paths()
        .par_iter()
        .map(|x| nearest(space, metric, &codebook.atoms, x.values()))
        .collect()
}

/// Nearest-atom cell of every sample path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VoronoiAssignment {
    pub cell_index: Vec<usize>,
    /// The minimum distance was attained by more than one atom.
    pub tie_flags: Vec<bool>,
    /// Distance from each path to its assigned atom.
    pub distances: Vec<f64>,
}

impl VoronoiAssignment {
    /// Paths per cell for a codebook of `n` atoms.
    pub fn cell_counts(&self, n: usize) -> Vec<usize> {
        let mut counts = vec![0; n];
        self.cell_index.iter().for_each(|&i| counts[i] += 1);
        counts
    }

    pub fn tie_mass(&self) -> f64 {
        self.tie_flags.iter().filter(|&&t| t).count() as f64 / self.tie_flags.len() as f64
    }
}

pub fn assign(codebook: &Codebook, sample: &PathSample) -> Result<VoronoiAssignment> {
    assign_in(codebook, sample, Metric::Lp)
}

pub fn assign_in(codebook: &Codebook, sample: &PathSample, metric: Metric) -> Result<VoronoiAssignment> {
    if codebook.is_empty() {
        return Err(Error::EmptyCodebook);
    }
    codebook.check_sample(sample)?;
    let near = nearest_all(codebook, sample, metric);
    let p = codebook.space.p();
    Ok(VoronoiAssignment {
        cell_index: near.iter().map(|n| n.index).collect(),
        tie_flags: near.iter().map(|n| n.tie).collect(),
        distances: near
            .iter()
            .map(|n| match metric {
                Metric::Lp => n.raw.powf(1.0 / p),
                Metric::Sup => n.raw,
            })
            .collect(),
    })
}

/// Empirical `D_{n,r}` with its Voronoi decomposition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub value: f64,
    /// Empirical `P(X in C_i)`.
    pub per_cell_mass: Vec<f64>,
    /// `sum_{x in C_i} ||x - a_i||^r / N`; these add up to `value`.
    pub per_cell_distortion: Vec<f64>,
    /// Monte Carlo standard error of `value`.
    pub stderr: f64,
    pub r: f64,
    pub metric: Metric,
    pub n_paths: usize,
}

impl DistortionReport {
    /// `value^{1/r}`.
    pub fn quant_error(&self) -> f64 {
        self.value.powf(1.0 / self.r)
    }

    /// Delta-method standard error of [`Self::quant_error`].
    pub fn quant_error_stderr(&self) -> f64 {
        if self.value == 0.0 {
            return 0.0;
        }
        self.stderr / (self.r * self.value.powf((self.r - 1.0) / self.r))
    }
}

/// Per-path `min_i ||x - a_i||^r` and nearest atom index.
pub(crate) fn distortion_terms(codebook: &Codebook, sample: &PathSample, r: f64, metric: Metric) -> Vec<(usize, f64)> {
    let space = codebook.space.as_ref();
    nearest_all(codebook, sample, metric)
        .into_iter()
        .map(|n| (n.index, raw_to_power(space, metric, n.raw, r)))
        .collect()
}

pub fn distortion(codebook: &Codebook, sample: &PathSample, r: f64) -> Result<DistortionReport> {
    distortion_in(codebook, sample, r, Metric::Lp)
}

pub fn distortion_in(codebook: &Codebook, sample: &PathSample, r: f64, metric: Metric) -> Result<DistortionReport> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter(format!("r = {r} must be > 0")));
    }
    if codebook.is_empty() {
        return Err(Error::EmptyCodebook);
    }
    codebook.check_sample(sample)?;
    let terms = distortion_terms(codebook, sample, r, metric);
    Ok(report_from_terms(&terms, codebook.len(), r, metric))
}

pub(crate) fn report_from_terms(terms: &[(usize, f64)], n_atoms: usize, r: f64, metric: Metric) -> DistortionReport {
    let n = terms.len() as f64;
    let mut mass = vec![0.0; n_atoms];
    let mut cell = vec![0.0; n_atoms];
    let mut total = 0.0;
    for &(i, v) in terms {
        mass[i] += 1.0;
        cell[i] += v;
        total += v;
    }
    let value = total / n;
    let var = if terms.len() > 1 {
        terms.iter().map(|(_, v)| (v - value).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    DistortionReport {
        value,
        per_cell_mass: mass.into_iter().map(|c| c / n).collect(),
        per_cell_distortion: cell.into_iter().map(|c| c / n).collect(),
        stderr: (var / n).sqrt(),
        r,
        metric,
        n_paths: terms.len(),
    }
}

/// `(mean_x min_i ||x - a_i||^r)^{1/r}`: an upper estimate of `e_{n,r}` for this codebook.
pub fn quant_error(codebook: &Codebook, sample: &PathSample, r: f64) -> Result<f64> {
    Ok(distortion(codebook, sample, r)?.quant_error())
}

/// Replaces every path by its nearest atom.
pub fn quantize_paths(codebook: &Codebook, sample: &PathSample) -> Result<PathSample> {
    let a = assign(codebook, sample)?;
    let paths = a.cell_index.iter().map(|&i| codebook.atoms[i].clone()).collect();
    PathSample::new(paths, sample.seed(), format!("quantized:{}", sample.process_tag()))
}

/// Both sides of the `L^p` / `L^r` comparison for a fixed codebook.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossExponentBounds {
    /// `mu(T)^{1/p - 1/(p^r)} e(X; L^{p^r}, exponent p^r)`.
    pub lower: f64,
    /// `e(X; L^p, exponent r)`.
    pub value: f64,
    /// `mu(T)^{1/p - 1/(pvr)} e(X; L^{pvr}, exponent pvr)`.
    pub upper: f64,
}

/// Re-measures the codebook under exponents `min(p, r)` and `max(p, r)`.
///
/// The sandwich `lower <= value <= upper` holds pathwise for every fixed
/// codebook, hence exactly on the empirical law.
pub fn cross_exponent_bounds(sample: &PathSample, codebook: &Codebook, r: f64) -> Result<CrossExponentBounds> {
    let space = codebook.space();
    let p = space.p();
    if !(r.is_finite() && r >= 1.0) {
        return Err(Error::InvalidParameter(format!("r = {r} must be >= 1")));
    }
    let (lo, hi) = (p.min(r), p.max(r));
    let mass = space.total_mass();
    let remeasured = |q: f64| -> Result<f64> {
        let cb = codebook.in_space(Arc::new(space.with_p(q)?))?;
        let e = quant_error(&cb, sample, q)?;
        Ok(mass.powf(1.0 / p - 1.0 / q) * e)
    };
    Ok(CrossExponentBounds {
        lower: remeasured(lo)?,
        value: quant_error(codebook, sample, r)?,
        upper: remeasured(hi)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{sample_paths, ProcessKind, ProcessSpec};
    use proptest::prelude::*;

    fn space(m: usize, p: f64) -> Arc<DiscretePathSpace> {
        Arc::new(DiscretePathSpace::uniform(0.0, 1.0, m, p, 1).unwrap())
    }

    fn constants(m: usize, levels: &[f64]) -> Vec<Path> {
        levels.iter().map(|&c| Path::constant(1, m, c)).collect()
    }

    fn const_sample(m: usize, levels: &[f64]) -> PathSample {
        PathSample::new(constants(m, levels), 0, "constants").unwrap()
    }

    #[test]
    fn codebook_invariants() {
        let s = space(4, 2.0);
        assert!(matches!(Codebook::new(s.clone(), vec![]), Err(Error::EmptyCodebook)));
        let dup = Codebook::new(s.clone(), constants(4, &[1.0, 2.0, 1.0]));
        assert!(matches!(dup, Err(Error::DuplicateAtom { index: 0 })));
        assert!(Codebook::new(s, vec![Path::zeros(1, 5)]).is_err());
    }

    #[test]
    fn single_cell_assignment() {
        let s = space(8, 2.0);
        let cb = Codebook::single(s, Path::zeros(1, 8)).unwrap();
        let a = assign(&cb, &const_sample(8, &[-1.0, 0.5, 3.0])).unwrap();
        assert_eq!(a.cell_index, vec![0, 0, 0]);
        assert!(a.tie_flags.iter().all(|t| !t));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let s = space(8, 2.0);
        let cb = Codebook::new(s, constants(8, &[-1.0, 1.0])).unwrap();
        let a = assign(&cb, &const_sample(8, &[0.0])).unwrap();
        assert_eq!(a.cell_index, vec![0]);
        assert_eq!(a.tie_flags, vec![true]);
        assert_eq!(a.tie_mass(), 1.0);
    }

    #[test]
    fn constant_paths_assignment() {
        let s = space(8, 2.0);
        let cb = Codebook::new(s, constants(8, &[-1.0, 1.0])).unwrap();
        let a = assign(&cb, &const_sample(8, &[-0.9, 0.2, 0.8])).unwrap();
        assert_eq!(a.cell_index, vec![0, 1, 1]);
    }

    #[test]
    fn perfect_cover_has_zero_distortion() {
        let s = space(8, 3.0);
        let levels = [-2.0, 0.1, 4.0];
        let cb = Codebook::new(s, constants(8, &levels)).unwrap();
        let sample = const_sample(8, &[0.1, 4.0, -2.0, 0.1]);
        let rep = distortion(&cb, &sample, 2.5).unwrap();
        assert_eq!(rep.value, 0.0);
        assert_eq!(quant_error(&cb, &sample, 2.5).unwrap(), 0.0);
    }

    #[test]
    fn report_decomposition() {
        let s = space(16, 2.0);
        let bm = sample_paths(&ProcessSpec::centered(ProcessKind::Brownian, 1).unwrap(), &s, 500, 1).unwrap();
        let cb = Codebook::new(s, vec![bm.path(0).clone(), bm.path(1).clone(), bm.path(2).clone()]).unwrap();
        let rep = distortion(&cb, &bm, 3.0).unwrap();
        assert!((rep.per_cell_mass.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((rep.per_cell_distortion.iter().sum::<f64>() - rep.value).abs() < 1e-12 * rep.value);
        // direct recomputation
        let direct = bm
            .paths()
            .iter()
            .map(|x| cb.atoms().iter().map(|a| crate::space::lp_dist(cb.space(), x, a).unwrap()).fold(f64::INFINITY, f64::min).powi(3))
            .sum::<f64>()
            / 500.0;
        assert!((direct - rep.value).abs() < 1e-12 * direct);
    }

    #[test]
    fn brownian_single_zero_atom() {
        let s = space(257, 2.0);
        let bm = sample_paths(&ProcessSpec::centered(ProcessKind::Brownian, 1).unwrap(), &s, 50_000, 2).unwrap();
        let cb = Codebook::single(s, Path::zeros(1, 257)).unwrap();
        let rep = distortion(&cb, &bm, 2.0).unwrap();
        assert!((rep.value - 0.5).abs() / 0.5 < 0.02, "{}", rep.value);
        assert!((rep.quant_error() - 0.5f64.sqrt()).abs() / 0.5f64.sqrt() < 0.01);
    }

    #[test]
    fn quantize_paths_properties() {
        let s = space(16, 2.0);
        let bm = sample_paths(&ProcessSpec::centered(ProcessKind::Brownian, 1).unwrap(), &s, 200, 3).unwrap();
        let single = Codebook::single(s.clone(), bm.path(7).clone()).unwrap();
        let q = quantize_paths(&single, &bm).unwrap();
        assert!(q.paths().iter().all(|p| p == bm.path(7)));

        let cb = Codebook::new(s, bm.paths()[..5].to_vec()).unwrap();
        let q = quantize_paths(&cb, &bm).unwrap();
        let mut support: Vec<&Path> = vec![];
        for p in q.paths() {
            if !support.contains(&p) {
                support.push(p);
            }
        }
        assert!(support.len() <= 5);
        assert_eq!(quantize_paths(&cb, &q).unwrap().paths(), q.paths());
    }

    #[test]
    fn adding_an_atom_never_increases_error() {
        let s = space(32, 2.5);
        let bm = sample_paths(&ProcessSpec::centered(ProcessKind::Brownian, 1).unwrap(), &s, 300, 4).unwrap();
        let mut cb = Codebook::single(s, bm.path(0).clone()).unwrap();
        let mut prev = quant_error(&cb, &bm, 2.5).unwrap();
        for i in 1..10 {
            cb.push(bm.path(i).clone()).unwrap();
            let e = quant_error(&cb, &bm, 2.5).unwrap();
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn cross_exponent_sandwich() {
        let s = space(64, 2.0);
        let bm = sample_paths(&ProcessSpec::centered(ProcessKind::Brownian, 1).unwrap(), &s, 2000, 5).unwrap();
        let cb = Codebook::new(s.clone(), bm.paths()[..4].to_vec()).unwrap();
        let b = cross_exponent_bounds(&bm, &cb, 2.0).unwrap();
        assert_eq!(b.lower, b.value);
        assert_eq!(b.upper, b.value);
        for r in [1.0, 1.5, 3.0, 4.0] {
            let b = cross_exponent_bounds(&bm, &cb, r).unwrap();
            assert!(b.lower <= b.value && b.value <= b.upper, "r={r}: {b:?}");
        }
        // non-unit mass exercises the prefactors
        let wide = Arc::new(DiscretePathSpace::uniform(0.0, 3.0, 64, 2.0, 1).unwrap());
        let cbw = cb.in_space(wide).unwrap();
        for r in [1.0, 1.5, 3.0, 4.0] {
            let b = cross_exponent_bounds(&bm, &cbw, r).unwrap();
            assert!(b.lower <= b.value * (1.0 + 1e-12) && b.value <= b.upper * (1.0 + 1e-12), "r={r}: {b:?}");
        }
    }

    #[test]
    fn codebook_binary_round_trip() {
        let s = space(6, 2.0);
        let cb = Codebook::new(s.clone(), constants(6, &[1.5, -0.25])).unwrap();
        let mut buf = Vec::new();
        cb.write_binary(&mut buf).unwrap();
        assert_eq!(Codebook::read_binary(&buf[..], s).unwrap(), cb);
    }

    proptest! {
        #[test]
        fn affine_equivariance(c in 0.1f64..5.0, shift in -3.0f64..3.0, seed in 0u64..50, r in 1.0f64..4.0) {
            let s = space(24, 2.0);
            let bm = sample_paths(&ProcessSpec::centered(ProcessKind::Brownian, 1).unwrap(), &s, 60, seed).unwrap();
            let cb = Codebook::new(s.clone(), bm.paths()[..3].to_vec()).unwrap();
            let u = Path::from_fn(1, s.grid(), |_, t| shift * t).unwrap();
            let tb = bm.affine(c, &u).unwrap();
            let tc = cb.affine(c, &u).unwrap();
            let a0 = assign(&cb, &bm).unwrap();
            let a1 = assign(&tc, &tb).unwrap();
            prop_assert_eq!(a0.cell_index, a1.cell_index);
            let e0 = quant_error(&cb, &bm, r).unwrap();
            let e1 = quant_error(&tc, &tb, r).unwrap();
            prop_assert!((e1 - c * e0).abs() <= 1e-12 * c * e0);
        }
    }
}
