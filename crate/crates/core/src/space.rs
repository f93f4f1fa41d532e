//! Discretized path spaces `L^p_{R^d}(T, mu)`.
//!
//! A [`DiscretePathSpace`] is a strictly increasing time grid together with
//! strictly positive quadrature weights approximating the measure `mu`. Paths
//! are `d x m` matrices of grid samples, stored row-major (coordinate `j`,
//! node `k` at index `j * m + k`). There is no interpolation between nodes:
//! every integral over `T` is a weighted sum over the grid.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscretePathSpace {
    grid: Vec<f64>,
    weights: Vec<f64>,
    p: f64,
    d: usize,
}

impl DiscretePathSpace {
    /// Builds a space from an explicit grid and weight vector.
    pub fn new(grid: Vec<f64>, weights: Vec<f64>, p: f64, d: usize) -> Result<Self> {
        if grid.len() < 2 {
            return Err(Error::InvalidSpace(format!(
                "need at least 2 grid nodes, got {}",
                grid.len()
            )));
        }
        if weights.len() != grid.len() {
            return Err(Error::InvalidSpace(format!(
                "{} weights for {} grid nodes",
                weights.len(),
                grid.len()
            )));
        }
        if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidSpace("grid must be finite and strictly increasing".into()));
        }
        if let Some(k) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::InvalidSpace(format!(
                "weight {k} is {} (must be finite and > 0)",
                weights[k]
            )));
        }
        if !(p.is_finite() && p >= 1.0) {
            return Err(Error::InvalidSpace(format!("exponent p = {p} must be finite and >= 1")));
        }
        if d == 0 {
            return Err(Error::InvalidSpace("coordinate dimension d must be >= 1".into()));
        }
        Ok(Self { grid, weights, p, d })
    }

    /// Uniform grid on `[t_start, t_end]` with trapezoid weights for Lebesgue measure.
    pub fn uniform(t_start: f64, t_end: f64, m: usize, p: f64, d: usize) -> Result<Self> {
        let grid = linspace(t_start, t_end, m)?;
        let weights = trapezoid_weights(&grid);
        Self::new(grid, weights, p, d)
    }

    /// Uniform grid with weights `density(t_k) * trapezoid_k`, rescaled so that
    /// they sum to `total_mass`.
    pub fn with_density<F>(
        t_start: f64,
        t_end: f64,
        m: usize,
        p: f64,
        d: usize,
        density: F,
        total_mass: f64,
    ) -> Result<Self>
    where
        F: Fn(f64) -> f64,
    {
        if !(total_mass.is_finite() && total_mass > 0.0) {
            return Err(Error::InvalidSpace(format!("total mass {total_mass} must be > 0")));
        }
        let grid = linspace(t_start, t_end, m)?;
        let mut weights: Vec<f64> = trapezoid_weights(&grid)
            .into_iter()
            .zip(&grid)
            .map(|(w, &t)| w * density(t))
            .collect();
        let raw: f64 = weights.iter().sum();
        if !(raw.is_finite() && raw > 0.0) {
            return Err(Error::InvalidSpace("density integrates to a non-positive mass".into()));
        }
        let scale = total_mass / raw;
        weights.iter_mut().for_each(|w| *w *= scale);
        Self::new(grid, weights, p, d)
    }

    /// `mu(dt) = e^{-b t} dt` on `[t_start, t_end]`.
    pub fn exponential(t_start: f64, t_end: f64, m: usize, p: f64, d: usize, b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidSpace(format!("exponential rate b = {b} must be > 0")));
        }
        let mass = ((-b * t_start).exp() - (-b * t_end).exp()) / b;
        Self::with_density(t_start, t_end, m, p, d, |t| (-b * t).exp(), mass)
    }

    /// Same grid and weights, different exponent.
    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.weights.clone(), p, self.d)
    }

    /// Same grid and weights, different coordinate dimension.
    pub fn with_dim(&self, d: usize) -> Result<Self> {
        Self::new(self.grid.clone(), self.weights.clone(), self.p, d)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.grid.len()
    }

    /// `mu(T)` as carried by the weights.
    pub fn total_mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn t_start(&self) -> f64 {
        self.grid[0]
    }

    pub fn t_end(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn span(&self) -> f64 {
        self.t_end() - self.t_start()
    }

    /// Mean grid step.
    pub fn step(&self) -> f64 {
        self.span() / (self.m() - 1) as f64
    }

    /// Verifies that `f` has this space's shape.
    pub fn check(&self, f: &Path) -> Result<()> {
        if f.d() != self.d || f.m() != self.m() {
            return Err(Error::DimensionMismatch {
                expected_d: self.d,
                expected_m: self.m(),
                found_d: f.d(),
                found_m: f.m(),
            });
        }
        Ok(())
    }

    /// `sum_j sum_k |f_{jk}|^p w_k` over a row-major slice.
    #[inline]
    pub(crate) fn pow_sum(&self, f: &[f64]) -> f64 {
        pow_sum_with(self.p, &self.weights, f)
    }

    /// `sum_j sum_k |f_{jk} - g_{jk}|^p w_k`.
    #[inline]
    pub(crate) fn pow_sum_diff(&self, f: &[f64], g: &[f64]) -> f64 {
        pow_sum_diff_with(self.p, &self.weights, f, g)
    }
}

/// `m` equally spaced nodes, endpoints included exactly.
pub fn linspace(t_start: f64, t_end: f64, m: usize) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::InvalidSpace(format!("need at least 2 grid nodes, got {m}")));
    }
    if !(t_start.is_finite() && t_end.is_finite() && t_end > t_start) {
        return Err(Error::InvalidSpace(format!("bad interval [{t_start}, {t_end}]")));
    }
    let h = (t_end - t_start) / (m - 1) as f64;
    let mut grid: Vec<f64> = (0..m).map(|k| t_start + k as f64 * h).collect();
    grid[m - 1] = t_end;
    Ok(grid)
}

/// Composite trapezoid weights for an arbitrary increasing grid.
pub fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let m = grid.len();
    let mut w = vec![0.0; m];
    for k in 0..m - 1 {
        let half = 0.5 * (grid[k + 1] - grid[k]);
        w[k] += half;
        w[k + 1] += half;
    }
    w
}

#[inline]
pub(crate) fn pow_sum_with(p: f64, weights: &[f64], f: &[f64]) -> f64 {
    let mut total = 0.0;
    for row in f.chunks_exact(weights.len()) {
        let s: f64 = if p == 2.0 {
            row.iter().zip(weights).map(|(x, w)| x * x * w).sum()
        } else if p == 1.0 {
            row.iter().zip(weights).map(|(x, w)| x.abs() * w).sum()
        } else {
            row.iter().zip(weights).map(|(x, w)| x.abs().powf(p) * w).sum()
        };
        total += s;
    }
    total
}

#[inline]
pub(crate) fn pow_sum_diff_with(p: f64, weights: &[f64], f: &[f64], g: &[f64]) -> f64 {
    let m = weights.len();
    let mut total = 0.0;
    for (rf, rg) in f.chunks_exact(m).zip(g.chunks_exact(m)) {
        total += if p == 2.0 {
            weighted_sum4(weights, rf, rg, |e| e * e)
        } else if p == 1.0 {
            weighted_sum4(weights, rf, rg, f64::abs)
        } else {
            weighted_sum4(weights, rf, rg, |e| e.abs().powf(p))
        };
    }
    total
}

/// `sum_k w_k phi(x_k - y_k)` with four interleaved accumulators; the
/// summation order is fixed, so results stay bit-reproducible.
#[inline(always)]
fn weighted_sum4(w: &[f64], x: &[f64], y: &[f64], phi: impl Fn(f64) -> f64) -> f64 {
    let mut acc = [0.0f64; 4];
    let (wc, xc, yc) = (w.chunks_exact(4), x.chunks_exact(4), y.chunks_exact(4));
    let (wr, xr, yr) = (wc.remainder(), xc.remainder(), yc.remainder());
    for ((w, x), y) in wc.zip(xc).zip(yc) {
        for l in 0..4 {
            acc[l] += phi(x[l] - y[l]) * w[l];
        }
    }
    let mut tail = 0.0;
    for ((w, x), y) in wr.iter().zip(xr).zip(yr) {
        tail += phi(x - y) * w;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// One realization of an `R^d`-valued process sampled on the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    d: usize,
    m: usize,
    values: Vec<f64>,
}

impl Path {
    /// Wraps row-major values; every entry must be finite.
    pub fn new(d: usize, m: usize, values: Vec<f64>) -> Result<Self> {
        if d == 0 || m == 0 {
            return Err(Error::InvalidParameter(format!("path shape {d}x{m} is empty")));
        }
        if values.len() != d * m {
            return Err(Error::InvalidParameter(format!(
                "{} values for a {d}x{m} path",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "path entry ({}, {}) is not finite",
                i / m,
                i % m
            )));
        }
        Ok(Self { d, m, values })
    }

    pub(crate) fn from_raw(d: usize, m: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), d * m);
        Self { d, m, values }
    }

    pub fn zeros(d: usize, m: usize) -> Self {
        Self::from_raw(d, m, vec![0.0; d * m])
    }

    pub fn constant(d: usize, m: usize, c: f64) -> Self {
        Self::from_raw(d, m, vec![c; d * m])
    }

    /// Samples `f(coordinate, t)` on the grid.
    pub fn from_fn<F>(d: usize, grid: &[f64], f: F) -> Result<Self>
    where
        F: Fn(usize, f64) -> f64,
    {
        let m = grid.len();
        let values = (0..d).flat_map(|j| grid.iter().map(move |&t| (j, t))).map(|(j, t)| f(j, t)).collect();
        Self::new(d, m, values)
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.values[j * self.m + k]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.m..(j + 1) * self.m]
    }

    /// `c * self + shift`.
    pub fn affine(&self, c: f64, shift: &Path) -> Path {
        debug_assert_eq!(self.values.len(), shift.values.len());
        let values = self.values.iter().zip(&shift.values).map(|(x, u)| c * x + u).collect();
        Self::from_raw(self.d, self.m, values)
    }

    pub fn scaled(&self, c: f64) -> Path {
        Self::from_raw(self.d, self.m, self.values.iter().map(|x| c * x).collect())
    }

    pub fn sub(&self, other: &Path) -> Path {
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x - y).collect();
        Self::from_raw(self.d, self.m, values)
    }

    pub fn add(&self, other: &Path) -> Path {
        let values = self.values.iter().zip(&other.values).map(|(x, y)| x + y).collect();
        Self::from_raw(self.d, self.m, values)
    }

    fn same_shape(&self, other: &Path) -> Result<()> {
        if self.d != other.d || self.m != other.m {
            return Err(Error::DimensionMismatch {
                expected_d: self.d,
                expected_m: self.m,
                found_d: other.d,
                found_m: other.m,
            });
        }
        Ok(())
    }
}

/// A seeded collection of paths standing in for the law of `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    paths: Vec<Path>,
    seed: u64,
    process_tag: String,
    tail_index: Option<f64>,
    jump_counts: Option<Vec<u64>>,
}

impl PathSample {
    pub fn new(paths: Vec<Path>, seed: u64, process_tag: impl Into<String>) -> Result<Self> {
        let first = paths.first().ok_or(Error::EmptySample)?;
        for p in &paths[1..] {
            first.same_shape(p)?;
        }
        Ok(Self {
            paths,
            seed,
            process_tag: process_tag.into(),
            tail_index: None,
            jump_counts: None,
        })
    }

    /// Marks the sample as drawn from a law whose moments of order `>= index` diverge.
    pub fn with_tail_index(mut self, index: f64) -> Self {
        self.tail_index = Some(index);
        self
    }

    pub(crate) fn with_jump_counts(mut self, counts: Vec<u64>) -> Self {
        self.jump_counts = Some(counts);
        self
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn paths(&self) -> &[Path] {
        &self.paths
    }

    pub fn path(&self, i: usize) -> &Path {
        &self.paths[i]
    }

    pub fn into_paths(self) -> Vec<Path> {
        self.paths
    }

    pub fn d(&self) -> usize {
        self.paths[0].d
    }

    pub fn m(&self) -> usize {
        self.paths[0].m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn process_tag(&self) -> &str {
        &self.process_tag
    }

    pub fn tail_index(&self) -> Option<f64> {
        self.tail_index
    }

    /// Per-path jump counts, recorded by jump-process samplers.
    pub fn jump_counts(&self) -> Option<&[u64]> {
        self.jump_counts.as_deref()
    }

    /// Pointwise empirical mean.
    pub fn mean_path(&self) -> Path {
        let mut acc = vec![0.0; self.d() * self.m()];
        for p in &self.paths {
            acc.iter_mut().zip(&p.values).for_each(|(a, v)| *a += v);
        }
        let n = self.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        Path::from_raw(self.d(), self.m(), acc)
    }

    /// Applies `x -> c * x + shift` to every path.
    pub fn affine(&self, c: f64, shift: &Path) -> Result<Self> {
        self.paths[0].same_shape(shift)?;
        let paths = self.paths.iter().map(|p| p.affine(c, shift)).collect();
        Ok(Self { paths, ..self.clone_meta() })
    }

    /// Keeps only coordinate `j` of every path.
    pub fn coordinate(&self, j: usize) -> Result<Self> {
        if j >= self.d() {
            return Err(Error::InvalidParameter(format!("coordinate {j} out of range (d = {})", self.d())));
        }
        let paths = self.paths.iter().map(|p| Path::from_raw(1, p.m, p.row(j).to_vec())).collect();
        Ok(Self { paths, ..self.clone_meta() })
    }

    fn clone_meta(&self) -> Self {
        Self {
            paths: Vec::new(),
            seed: self.seed,
            process_tag: self.process_tag.clone(),
            tail_index: self.tail_index,
            jump_counts: self.jump_counts.clone(),
        }
    }
}

/// `( sum_j sum_k |f_{jk}|^p w_k )^{1/p}`.
pub fn lp_norm(space: &DiscretePathSpace, f: &Path) -> Result<f64> {
    space.check(f)?;
    Ok(space.pow_sum(&f.values).powf(1.0 / space.p))
}

pub fn lp_dist(space: &DiscretePathSpace, f: &Path, g: &Path) -> Result<f64> {
    space.check(f)?;
    space.check(g)?;
    Ok(space.pow_sum_diff(&f.values, &g.values).powf(1.0 / space.p))
}

/// Largest absolute entry over all coordinates and nodes.
pub fn sup_norm(f: &Path) -> f64 {
    f.values.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn sup_dist(f: &Path, g: &Path) -> f64 {
    f.values.iter().zip(&g.values).fold(0.0_f64, |acc, (x, y)| acc.max((x - y).abs()))
}

/// Gateaux gradient of `||.||_p` at `f`: entries `(|f_jk| / ||f||_p)^{p-1} sign f_jk`.
///
/// The result lives in the dual space `L^q`; pair it with a direction through
/// [`dual_pairing`].
pub fn norm_gradient(space: &DiscretePathSpace, f: &Path) -> Result<Path> {
    space.check(f)?;
    let mut out = vec![0.0; f.values.len()];
    norm_gradient_into(space.p, &space.weights, &f.values, &mut out)?;
    Ok(Path::from_raw(f.d, f.m, out))
}

pub(crate) fn norm_gradient_into(p: f64, weights: &[f64], f: &[f64], out: &mut [f64]) -> Result<()> {
    if p == 1.0 {
        return Err(Error::NonSmoothNorm { p });
    }
    let norm = pow_sum_with(p, weights, f).powf(1.0 / p);
    if norm == 0.0 {
        return Err(Error::GradientAtZero);
    }
    fill_gradient(p, norm, f, out);
    Ok(())
}

/// Writes the duality map of `f` given its (nonzero) norm.
#[inline]
pub(crate) fn fill_gradient(p: f64, norm: f64, f: &[f64], out: &mut [f64]) {
    if p == 2.0 {
        out.iter_mut().zip(f).for_each(|(o, x)| *o = x / norm);
    } else {
        out.iter_mut()
            .zip(f)
            .for_each(|(o, x)| *o = (x.abs() / norm).powf(p - 1.0) * sign(*x));
    }
}

#[inline]
pub(crate) fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `<g, h> = sum_j sum_k g_jk h_jk w_k`.
pub fn dual_pairing(space: &DiscretePathSpace, g: &Path, h: &Path) -> Result<f64> {
    space.check(g)?;
    space.check(h)?;
    Ok(pairing(&space.weights, &g.values, &h.values))
}

#[inline]
pub(crate) fn pairing(weights: &[f64], g: &[f64], h: &[f64]) -> f64 {
    let m = weights.len();
    g.chunks_exact(m)
        .zip(h.chunks_exact(m))
        .map(|(rg, rh)| rg.iter().zip(rh).zip(weights).map(|((a, b), w)| a * b * w).sum::<f64>())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(m: usize, p: f64, d: usize) -> DiscretePathSpace {
        DiscretePathSpace::uniform(0.0, 1.0, m, p, d).unwrap()
    }

    #[test]
    fn rejects_bad_spaces() {
        assert!(DiscretePathSpace::new(vec![0.0], vec![1.0], 2.0, 1).is_err());
        assert!(DiscretePathSpace::new(vec![0.0, 0.0], vec![1.0, 1.0], 2.0, 1).is_err());
        assert!(DiscretePathSpace::new(vec![0.0, 1.0], vec![1.0, 0.0], 2.0, 1).is_err());
        assert!(DiscretePathSpace::new(vec![0.0, 1.0], vec![1.0, 1.0], 0.5, 1).is_err());
        assert!(DiscretePathSpace::new(vec![0.0, 1.0], vec![1.0, 1.0], 2.0, 0).is_err());
    }

    #[test]
    fn trapezoid_mass_is_exact() {
        let s = unit(1025, 2.0, 1);
        assert!((s.total_mass() - 1.0).abs() < 1e-12);
        let e = DiscretePathSpace::exponential(0.0, 4.0, 257, 2.0, 1, 1.0).unwrap();
        let mass = 1.0 - (-4.0f64).exp();
        assert!((e.total_mass() - mass).abs() / mass < 1e-12);
    }

    #[test]
    fn norm_of_constants() {
        let s = unit(33, 2.0, 1);
        assert!((lp_norm(&s, &Path::constant(1, 33, 1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(lp_norm(&s, &Path::zeros(1, 33)).unwrap(), 0.0);
    }

    #[test]
    fn norm_of_identity_matches_closed_form() {
        let s = unit(1025, 2.0, 1);
        let f = Path::from_fn(1, s.grid(), |_, t| t).unwrap();
        let expected = (1.0f64 / 3.0).sqrt();
        assert!((lp_norm(&s, &f).unwrap() - expected).abs() < 1e-4);
    }

    #[test]
    fn dimension_mismatch_names_both_shapes() {
        let s = unit(8, 2.0, 1);
        let err = lp_norm(&s, &Path::zeros(2, 8)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("1x8") && msg.contains("2x8"), "{msg}");
    }

    #[test]
    fn distances_of_constants() {
        for p in [1.0, 1.5, 2.0, 3.0, 7.0] {
            let s = unit(17, p, 1);
            let one = Path::constant(1, 17, 1.0);
            let zero = Path::zeros(1, 17);
            assert!((lp_dist(&s, &one, &zero).unwrap() - 1.0).abs() < 1e-12);
            assert_eq!(lp_dist(&s, &one, &one).unwrap(), 0.0);
        }
    }

    #[test]
    fn sup_norm_cases() {
        assert_eq!(sup_norm(&Path::zeros(2, 5)), 0.0);
        let mut v = vec![0.5, -0.9, 0.2, 0.99, -0.1, 0.3];
        v[4] = -3.0;
        assert_eq!(sup_norm(&Path::new(2, 3, v).unwrap()), 3.0);
    }

    #[test]
    fn gradient_is_identity_on_the_unit_sphere_for_p2() {
        let s = unit(65, 2.0, 2);
        let f = Path::from_fn(2, s.grid(), |j, t| (t + j as f64).sin()).unwrap();
        let f = f.scaled(1.0 / lp_norm(&s, &f).unwrap());
        let g = norm_gradient(&s, &f).unwrap();
        for (a, b) in g.values().iter().zip(f.values()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_constant_for_p3() {
        let s = unit(9, 3.0, 1);
        let g = norm_gradient(&s, &Path::constant(1, 9, 2.0)).unwrap();
        assert!(g.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn gradient_errors() {
        let s = unit(9, 2.0, 1);
        assert!(matches!(norm_gradient(&s, &Path::zeros(1, 9)), Err(Error::GradientAtZero)));
        let s1 = unit(9, 1.0, 1);
        assert!(matches!(
            norm_gradient(&s1, &Path::constant(1, 9, 1.0)),
            Err(Error::NonSmoothNorm { .. })
        ));
    }

    #[test]
    fn refinement_is_second_order() {
        let f = |t: f64| (3.0 * t).sin() + t * t;
        let exact = {
            // fine reference
            let s = unit(1 << 16, 2.0, 1);
            lp_norm(&s, &Path::from_fn(1, s.grid(), |_, t| f(t)).unwrap()).unwrap()
        };
        let mut prev_err = f64::NAN;
        for m in [17usize, 33, 65, 129] {
            let s = unit(m, 2.0, 1);
            let err = (lp_norm(&s, &Path::from_fn(1, s.grid(), |_, t| f(t)).unwrap()).unwrap() - exact).abs();
            if prev_err.is_finite() {
                let ratio = prev_err / err;
                assert!(ratio > 3.5 && ratio < 4.5, "m={m} ratio={ratio}");
            }
            prev_err = err;
        }
    }

    fn path_strategy(len: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-5.0f64..5.0, len)
    }

    proptest! {
        #[test]
        fn homogeneity(v in path_strategy(2 * 12), c in -10.0f64..10.0, p in 1.0f64..6.0) {
            let s = unit(12, p, 2);
            let f = Path::new(2, 12, v).unwrap();
            let lhs = lp_norm(&s, &f.scaled(c)).unwrap();
            let rhs = c.abs() * lp_norm(&s, &f).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1e-300) + 1e-300);
        }

        #[test]
        fn triangle_and_symmetry(a in path_strategy(10), b in path_strategy(10), c in path_strategy(10), p in 1.0f64..6.0) {
            let s = unit(10, p, 1);
            let (a, b, c) = (Path::new(1, 10, a).unwrap(), Path::new(1, 10, b).unwrap(), Path::new(1, 10, c).unwrap());
            let ab = lp_dist(&s, &a, &b).unwrap();
            prop_assert_eq!(ab, lp_dist(&s, &b, &a).unwrap());
            prop_assert!(lp_dist(&s, &a, &c).unwrap() <= ab + lp_dist(&s, &b, &c).unwrap() + 1e-12);
        }

        #[test]
        fn norming_functional(v in path_strategy(16), p in 1.1f64..6.0) {
            let s = unit(16, p, 1);
            let f = Path::new(1, 16, v).unwrap();
            let n = lp_norm(&s, &f).unwrap();
            prop_assume!(n > 1e-6);
            let g = norm_gradient(&s, &f).unwrap();
            prop_assert!((dual_pairing(&s, &g, &f).unwrap() - n).abs() <= 1e-10 * n);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for p in [1.5, 2.0, 3.0] {
            let s = unit(40, p, 2);
            for _ in 0..20 {
                let f = Path::new(2, 40, (0..80).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
                let h = Path::new(2, 40, (0..80).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
                let eps = 1e-6;
                let fd = (lp_norm(&s, &f.affine(1.0, &h.scaled(eps))).unwrap()
                    - lp_norm(&s, &f.affine(1.0, &h.scaled(-eps))).unwrap())
                    / (2.0 * eps);
                let an = dual_pairing(&s, &norm_gradient(&s, &f).unwrap(), &h).unwrap();
                assert!((fd - an).abs() <= 1e-5 * an.abs().max(1e-3), "p={p} fd={fd} an={an}");
            }
        }
    }
}
