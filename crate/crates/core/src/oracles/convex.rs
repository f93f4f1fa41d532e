//! Independent routes to the minimum of small convex piecewise-linear objectives.

use nalgebra::{DMatrix, DVector};

/// `sum_i w_i |a_i . x - b_i|`.
#[derive(Debug, Clone, Default)]
pub struct AbsSum {
    pub dim: usize,
    pub terms: Vec<(f64, Vec<f64>, f64)>,
}

impl AbsSum {
    pub fn new(dim: usize) -> Self {
        Self { dim, terms: Vec::new() }
    }

    pub fn push(&mut self, weight: f64, a: Vec<f64>, b: f64) {
        debug_assert_eq!(a.len(), self.dim);
        self.terms.push((weight, a, b));
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|(w, a, b)| w * (dot(a, x) - b).abs()).sum()
    }

    pub fn subgradient(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut g = vec![0.0; self.dim];
        let mut f = 0.0;
        for (w, a, b) in &self.terms {
            let v = dot(a, x) - b;
            f += w * v.abs();
            let s = if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            };
            g.iter_mut().zip(a).for_each(|(gi, ai)| *gi += w * s * ai);
        }
        (f, g)
    }

    /// Distinct kink hyperplanes `a . x = b`, scaled so the first nonzero coefficient is 1.
    fn hyperplanes(&self) -> Vec<(Vec<f64>, f64)> {
        let mut out: Vec<(Vec<f64>, f64)> = Vec::new();
        for (_, a, b) in &self.terms {
            let Some(lead) = a.iter().copied().find(|v| *v != 0.0) else {
                continue;
            };
            let na: Vec<f64> = a.iter().map(|v| v / lead).collect();
            let nb = b / lead;
            let dup = out
                .iter()
                .any(|(oa, ob)| (ob - nb).abs() < 1e-12 && oa.iter().zip(&na).all(|(u, v)| (u - v).abs() < 1e-12));
            if !dup {
                out.push((na, nb));
            }
        }
        out
    }

    /// Exact minimum by enumerating every vertex of the kink arrangement.
    /// Valid when the objective is bounded below and its kink normals span
    /// the space, so that some vertex is a minimizer.
    pub fn minimize_by_vertices(&self) -> Option<(Vec<f64>, f64)> {
        let planes = self.hyperplanes();
        let k = self.dim;
        if planes.len() < k {
            return None;
        }
        let mut best: Option<(Vec<f64>, f64)> = None;
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let a = DMatrix::from_fn(k, k, |i, j| planes[idx[i]].0[j]);
            let b = DVector::from_fn(k, |i, _| planes[idx[i]].1);
            let lu = a.lu();
            if lu.determinant().abs() > 1e-12 {
                if let Some(x) = lu.solve(&b) {
                    let x: Vec<f64> = x.iter().copied().collect();
                    let v = self.eval(&x);
                    if best.as_ref().is_none_or(|(_, bv)| v < *bv) {
                        best = Some((x, v));
                    }
                }
            }
            if !next_combination(&mut idx, planes.len()) {
                break;
            }
        }
        best
    }
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    for i in (0..k).rev() {
        if idx[i] < n - k + i {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| u * v).sum()
}

/// Normalized subgradient steps of constant length within each stage; every
/// stage restarts from the best point so far with half the previous length.
/// Converges linearly on objectives with sharp minima, which includes every
/// polyhedral convex function.
pub fn restarted_subgradient<F>(f: F, x0: Vec<f64>, step0: f64, stages: usize, iters_per_stage: usize) -> (Vec<f64>, f64)
where
    F: Fn(&[f64]) -> (f64, Vec<f64>),
{
    let (mut best_f, _) = f(&x0);
    let mut best = x0;
    let mut h = step0;
    for _ in 0..stages {
        let mut x = best.clone();
        for _ in 0..iters_per_stage {
            let (fx, g) = f(&x);
            if fx < best_f {
                best_f = fx;
                best.clone_from(&x);
            }
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm == 0.0 {
                return (best, best_f);
            }
            x.iter_mut().zip(&g).for_each(|(xi, gi)| *xi -= h * gi / norm);
        }
        let (fx, _) = f(&x);
        if fx < best_f {
            best_f = fx;
            best = x;
        }
        h *= 0.5;
    }
    (best, best_f)
}

/// Lower weighted median of `(value, weight)` pairs: a minimizer of `sum w |x - v|`.
pub fn weighted_median(points: &[(f64, f64)]) -> f64 {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: f64 = pts.iter().map(|p| p.1).sum();
    let mut acc = 0.0;
    for (v, w) in &pts {
        acc += w;
        if acc >= 0.5 * total {
            return *v;
        }
    }
    pts.last().map(|p| p.0).unwrap_or(0.0)
}
