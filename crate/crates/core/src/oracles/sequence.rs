//! Counterexamples living in truncated sequence spaces.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::convex::{restarted_subgradient, weighted_median, AbsSum};
use super::lp::{LinearProgram, Relation};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeqNorm {
    L1,
    Linf,
}

/// `R^M` with the l1 or sup norm, optionally cut down to the hyperplane `sum c_j x_j = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedSequenceSpace {
    pub dim: usize,
    pub norm: SeqNorm,
    pub constraint: Option<Vec<f64>>,
}

impl TruncatedSequenceSpace {
    pub fn new(dim: usize, norm: SeqNorm, constraint: Option<Vec<f64>>) -> Result<Self> {
        if dim < 3 {
            return Err(Error::InvalidParameter(format!("truncation level {dim} must be >= 3")));
        }
        if let Some(c) = &constraint {
            validate_constraint(c, dim)?;
        }
        Ok(Self { dim, norm, constraint })
    }

    pub fn norm(&self, x: &[f64]) -> f64 {
        match self.norm {
            SeqNorm::L1 => x.iter().map(|v| v.abs()).sum(),
            SeqNorm::Linf => x.iter().fold(0.0f64, |a, v| a.max(v.abs())),
        }
    }

    pub fn dist(&self, x: &[f64], y: &[f64]) -> f64 {
        let diff: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        self.norm(&diff)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        match &self.constraint {
            None => true,
            Some(c) => super::convex::dot(c, x).abs() <= 1e-12 * (1.0 + self.norm(x)),
        }
    }
}

fn validate_constraint(c: &[f64], dim: usize) -> Result<()> {
    let bad = |why: &str| Err(Error::InvalidParameter(format!("hyperplane constraint: {why}")));
    if c.len() != dim {
        return bad(&format!("expected {dim} entries, found {}", c.len()));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return bad("entries must be finite");
    }
    if c[..3] != [1.0, 1.0, 1.0] {
        return bad("c_1 = c_2 = c_3 = 1 required");
    }
    if c[2..].windows(2).any(|w| w[1] <= w[0]) {
        return bad("(c_j) must be strictly increasing from j = 3");
    }
    if c.iter().fold(0.0f64, |a, v| a.max(v.abs())) <= 3.0 {
        return bad("sup |c_j| must exceed 3");
    }
    Ok(())
}

/// A finitely supported law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomicLaw {
    pub atoms: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
}

impl AtomicLaw {
    pub fn new(atoms: Vec<Vec<f64>>, probs: Vec<f64>) -> Result<Self> {
        if atoms.is_empty() || atoms.len() != probs.len() {
            return Err(Error::InvalidParameter("atoms and probabilities must be non-empty and match".into()));
        }
        if probs.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::InvalidParameter("probabilities must be positive".into()));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-15 {
            return Err(Error::InvalidParameter(format!("probabilities sum to {total}, not 1")));
        }
        for i in 0..atoms.len() {
            for j in 0..i {
                if atoms[i] == atoms[j] {
                    return Err(Error::InvalidParameter(format!("atoms {j} and {i} coincide")));
                }
            }
        }
        Ok(Self { atoms, probs })
    }

    pub fn uniform(atoms: Vec<Vec<f64>>) -> Result<Self> {
        let n = atoms.len();
        Self::new(atoms, vec![1.0 / n as f64; n])
    }

    /// `E ||X - a||^r` raised to `1/r`.
    pub fn error_at(&self, space: &TruncatedSequenceSpace, a: &[f64], r: f64) -> f64 {
        let v: f64 = self.atoms.iter().zip(&self.probs).map(|(x, p)| p * space.dist(x, a).powf(r)).sum();
        v.powf(1.0 / r)
    }
}

/// `p_n = (1/3)(2/3)^{n-1}` for `n < M`, with the remaining tail mass on `p_M`.
/// Every entry lies in `(0, 1/2)` once `M >= 3`.
pub fn default_probs(m: usize) -> Result<Vec<f64>> {
    if m < 3 {
        return Err(Error::InvalidParameter(format!("truncation level {m} must be >= 3")));
    }
    let mut probs: Vec<f64> = (0..m - 1).map(|k| (2.0f64 / 3.0).powi(k as i32) / 3.0).collect();
    let head: f64 = probs.iter().sum();
    probs.push(1.0 - head);
    Ok(probs)
}

fn check_probs(probs: &[f64], m: usize) -> Result<()> {
    if probs.len() != m {
        return Err(Error::InvalidParameter(format!("expected {m} probabilities, found {}", probs.len())));
    }
    if probs.iter().any(|&p| !(p > 0.0 && p < 0.5)) {
        return Err(Error::InvalidParameter("every probability must lie in (0, 1/2)".into()));
    }
    Ok(())
}

fn unit(m: usize, k: usize) -> Vec<f64> {
    let mut u = vec![0.0; m];
    u[k] = 1.0;
    u
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct C0Example {
    pub dim: usize,
    pub probs: Vec<f64>,
    /// `E ||X - (1/2, ..., 1/2)||_inf`.
    pub value_at_half: f64,
    /// Exact minimum over `R^M` (linear program) and its minimizer.
    pub minimum: f64,
    pub minimizer: Vec<f64>,
    /// Minimum found by restarted subgradient descent.
    pub minimum_subgradient: f64,
    /// `E ||X - a^(m)||_inf` for `a^(m) = (1/2) sum_{n <= m} u^(n)`, `m = 1..M`.
    pub sequence: Vec<f64>,
    /// `1/2 sum_{n<=m} p_n + sum_{n>m} p_n`, the closed form of `sequence`.
    pub sequence_closed_form: Vec<f64>,
    /// Smallest value over random points within sup distance `< 1/2` of some atom.
    pub near_atom_min: f64,
    pub near_atom_samples: usize,
}

/// `X = u^(n)` with probability `p_n` in `(R^M, ||.||_inf)`; one-point quantization with `r = 1`.
pub fn c0_example(m: usize, probs: Option<Vec<f64>>, seed: u64) -> Result<C0Example> {
    let probs = match probs {
        Some(p) => p,
        None => default_probs(m)?,
    };
    let space = TruncatedSequenceSpace::new(m, SeqNorm::Linf, None)?;
    check_probs(&probs, m)?;
    let law = AtomicLaw::new((0..m).map(|k| unit(m, k)).collect(), probs.clone())?;

    let value_at_half = law.error_at(&space, &vec![0.5; m], 1.0);

    // variables: b_1..b_M free, z_1..z_M
    let mut cost = vec![0.0; 2 * m];
    cost[m..].copy_from_slice(&probs);
    let mut lp = LinearProgram::new(cost);
    for k in 0..m {
        lp.set_free(k);
    }
    for n in 0..m {
        for k in 0..m {
            let delta = (n == k) as u8 as f64;
            let mut row = vec![0.0; 2 * m];
            row[m + n] = 1.0;
            row[k] = 1.0;
            lp.add_row(row.clone(), Relation::Ge, delta);
            row[k] = -1.0;
            lp.add_row(row, Relation::Ge, -delta);
        }
    }
    let sol = lp.solve()?;
    let minimizer = sol.x[..m].to_vec();
    let minimum = law.error_at(&space, &minimizer, 1.0);

    let objective = |b: &[f64]| {
        let mut g = vec![0.0; m];
        let mut f = 0.0;
        for (n, p) in probs.iter().enumerate() {
            let (k, v) = (0..m)
                .map(|k| (k, (n == k) as u8 as f64 - b[k]))
                .fold((0, -1.0), |best, (k, v)| if v.abs() > best.1 { (k, v.abs()) } else { best });
            f += p * v;
            let s = b[k] - (n == k) as u8 as f64;
            g[k] += p * if s > 0.0 { 1.0 } else if s < 0.0 { -1.0 } else { 0.0 };
        }
        (f, g)
    };
    let (_, minimum_subgradient) = restarted_subgradient(objective, vec![0.0; m], 0.5, 60, 400);

    let sequence = (1..=m)
        .map(|j| {
            let a: Vec<f64> = (0..m).map(|k| if k < j { 0.5 } else { 0.0 }).collect();
            law.error_at(&space, &a, 1.0)
        })
        .collect();
    let sequence_closed_form = (1..=m)
        .map(|j| 0.5 * probs[..j].iter().sum::<f64>() + probs[j..].iter().sum::<f64>())
        .collect();

    let mut rng = stream_rng(seed, 0);
    let near_atom_samples = 200 * m;
    let near_atom_min = (0..near_atom_samples)
        .map(|s| {
            let n0 = s % m;
            let b: Vec<f64> = (0..m)
                .map(|k| (n0 == k) as u8 as f64 + rng.random_range(-0.499..0.499))
                .collect();
            law.error_at(&space, &b, 1.0)
        })
        .fold(f64::INFINITY, f64::min);

    Ok(C0Example {
        dim: m,
        probs,
        value_at_half,
        minimum,
        minimizer,
        minimum_subgradient,
        sequence,
        sequence_closed_form,
        near_atom_min,
        near_atom_samples,
    })
}

/// `c_1 = c_2 = c_3 = 1`, `c_j = 4 - 4/j` for `j >= 4`.
pub fn default_constraint(m: usize) -> Vec<f64> {
    (1..=m).map(|j| if j <= 3 { 1.0 } else { 4.0 - 4.0 / j as f64 }).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperplaneCandidate {
    /// One-based index `k >= 4`.
    pub k: usize,
    pub value: f64,
    /// `1 + 1/c_k`.
    pub closed_form: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Example {
    pub dim: usize,
    pub constraint: Vec<f64>,
    /// Minimum over the plane spanned by `v^(2), v^(3)` (vertex enumeration).
    pub e_f: f64,
    pub e_f_subgradient: f64,
    /// Value at every `v^(i)`.
    pub e_f_at_support: Vec<f64>,
    /// Minimum over all of `R^M` (linear program) and its minimizer.
    pub e_l1: f64,
    pub minimizer_l1: Vec<f64>,
    /// The same minimum from coordinate-wise weighted medians.
    pub e_l1_median: f64,
    pub minimizer_l1_median: Vec<f64>,
    /// `a^(k) = u^(1) - u^(k) / c_k` for `k = 4..M`.
    pub candidates: Vec<HyperplaneCandidate>,
    /// `min_k (1 + 1/c_k)`, an upper bound for the hyperplane error.
    pub e_e_upper: f64,
    /// Exact minimum over the truncated hyperplane (linear program) and by subgradient descent.
    pub e_e_truncated: f64,
    pub e_e_truncated_subgradient: f64,
}

fn l1_law(m: usize) -> Result<AtomicLaw> {
    let mut v2 = vec![0.0; m];
    v2[0] = 1.0;
    v2[1] = -1.0;
    let mut v3 = vec![0.0; m];
    v3[0] = 1.0;
    v3[2] = -1.0;
    AtomicLaw::uniform(vec![vec![0.0; m], v2, v3])
}

/// l1 minimization `min_a sum_i p_i ||x_i - a||_1` as a linear program, optionally on a hyperplane.
fn l1_lp(law: &AtomicLaw, m: usize, constraint: Option<&[f64]>) -> Result<(Vec<f64>, f64)> {
    let n = law.atoms.len();
    let nv = m + n * m;
    let mut cost = vec![0.0; nv];
    for i in 0..n {
        for k in 0..m {
            cost[m + i * m + k] = law.probs[i];
        }
    }
    let mut lp = LinearProgram::new(cost);
    for k in 0..m {
        lp.set_free(k);
    }
    for (i, x) in law.atoms.iter().enumerate() {
        for k in 0..m {
            let mut row = vec![0.0; nv];
            row[m + i * m + k] = 1.0;
            row[k] = 1.0;
            lp.add_row(row.clone(), Relation::Ge, x[k]);
            row[k] = -1.0;
            lp.add_row(row, Relation::Ge, -x[k]);
        }
    }
    if let Some(c) = constraint {
        let mut row = vec![0.0; nv];
        row[..m].copy_from_slice(c);
        lp.add_row(row, Relation::Eq, 0.0);
    }
    let sol = lp.solve()?;
    Ok((sol.x[..m].to_vec(), sol.value))
}

pub fn l1_hyperplane_example(m: usize, constraint: Option<Vec<f64>>) -> Result<L1Example> {
    let c = constraint.unwrap_or_else(|| default_constraint(m));
    let space = TruncatedSequenceSpace::new(m, SeqNorm::L1, Some(c.clone()))?;
    let law = l1_law(m)?;

    // a = (s + t) u1 - s u2 - t u3 over (s, t)
    let mut f = AbsSum::new(2);
    let coord_maps = [vec![1.0, 1.0], vec![-1.0, 0.0], vec![0.0, -1.0]];
    for x in &law.atoms {
        for (k, a) in coord_maps.iter().enumerate() {
            f.push(1.0 / 3.0, a.clone(), x[k]);
        }
    }
    let (_, e_f) = f
        .minimize_by_vertices()
        .ok_or_else(|| Error::InvalidParameter("vertex enumeration failed".into()))?;
    let (_, e_f_subgradient) = restarted_subgradient(|x| f.subgradient(x), vec![0.3, -0.7], 1.0, 60, 200);
    let e_f_at_support = law.atoms.iter().map(|v| law.error_at(&space, v, 1.0)).collect();

    let (minimizer_l1, e_l1) = l1_lp(&law, m, None)?;
    let minimizer_l1_median: Vec<f64> = (0..m)
        .map(|k| weighted_median(&law.atoms.iter().zip(&law.probs).map(|(x, &p)| (x[k], p)).collect::<Vec<_>>()))
        .collect();
    let e_l1_median = law.error_at(&space, &minimizer_l1_median, 1.0);

    let candidates: Vec<HyperplaneCandidate> = (4..=m)
        .map(|k| {
            let mut a = vec![0.0; m];
            a[0] = 1.0;
            a[k - 1] = -1.0 / c[k - 1];
            debug_assert!(space.contains(&a));
            HyperplaneCandidate { k, value: law.error_at(&space, &a, 1.0), closed_form: 1.0 + 1.0 / c[k - 1] }
        })
        .collect();
    let e_e_upper = candidates.iter().map(|h| h.closed_form).fold(f64::INFINITY, f64::min);

    let (_, e_e_truncated) = l1_lp(&law, m, Some(&c))?;
    // a_1 = -sum_{j >= 2} c_j a_j, free coordinates a_2..a_M
    let mut g = AbsSum::new(m - 1);
    for (x, &p) in law.atoms.iter().zip(&law.probs) {
        g.push(p, c[1..].iter().map(|v| -v).collect(), x[0]);
        for k in 1..m {
            g.push(p, unit(m - 1, k - 1), x[k]);
        }
    }
    let (_, e_e_truncated_subgradient) = restarted_subgradient(|x| g.subgradient(x), vec![0.0; m - 1], 1.0, 80, 1000 * m);

    Ok(L1Example {
        dim: m,
        constraint: c,
        e_f,
        e_f_subgradient,
        e_f_at_support,
        e_l1,
        minimizer_l1,
        e_l1_median,
        minimizer_l1_median,
        candidates,
        e_e_upper,
        e_e_truncated,
        e_e_truncated_subgradient,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharpConstant {
    pub m: usize,
    /// Error over all of `l1`, from coordinate-wise medians (exact) and a linear program.
    pub e_e: f64,
    pub e_e_lp: f64,
    /// Error over the span of the support, by vertex enumeration and by subgradient descent.
    pub e_f: f64,
    pub e_f_subgradient: f64,
    pub ratio: f64,
    /// `2(m-1)/m`.
    pub closed_form: f64,
}

/// Uniform law on `v^(i) = u^(1) - u^(i)`, `i = 1..m`, in `l1`.
pub fn sharp_constant_example(m: usize) -> Result<SharpConstant> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("support size m = {m} must be >= 2")));
    }
    let dim = m.max(3);
    let atoms: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut v = unit(dim, 0);
            v[i] -= 1.0;
            v
        })
        .collect();
    let law = AtomicLaw::uniform(atoms)?;
    let space = TruncatedSequenceSpace::new(dim, SeqNorm::L1, None)?;

    let median: Vec<f64> = (0..dim)
        .map(|k| weighted_median(&law.atoms.iter().zip(&law.probs).map(|(x, &p)| (x[k], p)).collect::<Vec<_>>()))
        .collect();
    let e_e = law.error_at(&space, &median, 1.0);
    let (_, e_e_lp) = l1_lp(&law, dim, None)?;

    // a = sum_{j>=2} s_j (u^(1) - u^(j)) over s in R^{m-1}
    let w = 1.0 / m as f64;
    let mut f = AbsSum::new(m - 1);
    for x in &law.atoms {
        f.push(w, vec![1.0; m - 1], x[0]);
        for j in 1..m {
            let mut a = vec![0.0; m - 1];
            a[j - 1] = -1.0;
            f.push(w, a, x[j]);
        }
    }
    let (_, e_f) = f
        .minimize_by_vertices()
        .ok_or_else(|| Error::InvalidParameter("vertex enumeration failed".into()))?;
    let start: Vec<f64> = (0..m - 1).map(|j| 0.1 * (j as f64 + 1.0)).collect();
    let (_, e_f_subgradient) = restarted_subgradient(|x| f.subgradient(x), start, 1.0, 60, 150 * m);

    Ok(SharpConstant {
        m,
        e_e,
        e_e_lp,
        e_f,
        e_f_subgradient,
        ratio: e_f / e_e,
        closed_form: 2.0 * (m as f64 - 1.0) / m as f64,
    })
}
