//! The tent-function law on `C([0,1])` under the sup norm.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sequence::default_probs;
use crate::error::{Error, Result};
use crate::rng::stream_rng;
use crate::space::{linspace, sup_dist, Path};

/// Probe values must clear `1/2` by at least this much.
pub const PROBE_MARGIN: f64 = 1e-3;

/// Smallest uniform grid on `[0, 1]` that resolves the first `n_funcs` tents.
pub fn min_nodes(n_funcs: usize) -> usize {
    1usize << (n_funcs + 3)
}

/// Tent of height 1 on `[1/2 - 2^-n, 1/2 - 2^-(n+1)]` and its negative mirror image on `[1/2, 1]`.
pub fn tent(n: usize, t: f64) -> f64 {
    if t > 0.5 {
        return -tent(n, 1.0 - t);
    }
    let peak = 0.5 - 3.0 * 0.5f64.powi(n as i32 + 2);
    let half_width = 0.5f64.powi(n as i32 + 2);
    (1.0 - (t - peak).abs() / half_width).max(0.0)
}

/// `h = 1/2` on `[0, 1/2]` and `-1/2` on `(1/2, 1]`.
pub fn step_h(t: f64) -> f64 {
    if t <= 0.5 {
        0.5
    } else {
        -0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub label: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupExample {
    pub n_funcs: usize,
    pub m: usize,
    pub probs: Vec<f64>,
    /// `||f_n - h||_sup` on the grid, `n = 1..n_funcs`.
    pub dist_to_h: Vec<f64>,
    /// Smallest `||f_n - f_k||_sup` over `n != k`.
    pub min_pairwise: f64,
    /// `(r, (E ||X - h||_sup^r)^{1/r})`.
    pub value_at_h: Vec<(f64, f64)>,
    pub probes: Vec<Probe>,
    pub best_probe: f64,
}

/// Builds the tents on a uniform grid of `m` nodes and probes continuous candidates.
pub fn sup_counterexample(n_funcs: usize, m: usize, seed: u64) -> Result<SupExample> {
    if n_funcs < 3 {
        return Err(Error::InvalidParameter(format!("n_funcs = {n_funcs} must be >= 3")));
    }
    let min_m = min_nodes(n_funcs);
    if m < min_m {
        return Err(Error::GridTooCoarse { min_m, m });
    }
    let grid = linspace(0.0, 1.0, m)?;
    let probs = default_probs(n_funcs)?;
    let funcs: Vec<Path> = (1..=n_funcs)
        .map(|n| Path::from_fn(1, &grid, |_, t| tent(n, t)))
        .collect::<Result<_>>()?;
    let h = Path::from_fn(1, &grid, |_, t| step_h(t))?;
    let dist_to_h: Vec<f64> = funcs.iter().map(|f| sup_dist(f, &h)).collect();
    let mut min_pairwise = f64::INFINITY;
    for i in 0..n_funcs {
        for j in 0..i {
            min_pairwise = min_pairwise.min(sup_dist(&funcs[i], &funcs[j]));
        }
    }
    let error_at = |g: &Path, r: f64| -> f64 {
        let v: f64 = funcs.iter().zip(&probs).map(|(f, p)| p * sup_dist(f, g).powf(r)).sum();
        v.powf(1.0 / r)
    };
    let value_at_h = [1.0, 2.0, 4.0].iter().map(|&r| (r, error_at(&h, r))).collect();

    let mut probes = Vec::new();
    let mut push = |label: String, coeffs: &[f64]| -> Result<()> {
        let g = Path::from_fn(1, &grid, |_, t| chebyshev(coeffs, 2.0 * t - 1.0))?;
        probes.push(Probe { label, value: error_at(&g, 1.0) });
        Ok(())
    };
    push("zero".into(), &[0.0])?;
    push("constant 1/2".into(), &[0.5])?;
    push("constant -1/2".into(), &[-0.5])?;
    push("linear 1/2 - t".into(), &[0.0, -0.5])?;
    // truncated Chebyshev series of -sign(x)/2
    for degree in [1usize, 3, 5, 7, 9, 15, 25] {
        let mut c = vec![0.0; degree + 1];
        for k in (1..=degree).step_by(2) {
            let j = (k - 1) / 2;
            c[k] = -0.5 * 4.0 / std::f64::consts::PI * if j % 2 == 0 { 1.0 } else { -1.0 } / k as f64;
        }
        push(format!("step approximation, degree {degree}"), &c)?;
    }
    let mut rng = stream_rng(seed, 0);
    for s in 0..64 {
        let degree = 1 + s % 8;
        let c: Vec<f64> = (0..=degree).map(|_| rng.random_range(-1.0..1.0)).collect();
        push(format!("random degree {degree} #{s}"), &c)?;
    }
    let best_probe = probes.iter().map(|p| p.value).fold(f64::INFINITY, f64::min);
    Ok(SupExample { n_funcs, m, probs, dist_to_h, min_pairwise, value_at_h, probes, best_probe })
}

fn chebyshev(coeffs: &[f64], x: f64) -> f64 {
    let (mut t0, mut t1) = (1.0, x);
    let mut acc = coeffs[0];
    for (k, c) in coeffs.iter().enumerate().skip(1) {
        if k > 1 {
            let t2 = 2.0 * x * t1 - t0;
            t0 = t1;
            t1 = t2;
        }
        acc += c * t1;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    /// The piecewise-linear formula, written out branch by branch.
    fn tent_literal(n: i32, t: f64) -> f64 {
        if t > 0.5 {
            return -tent_literal(n, 1.0 - t);
        }
        let a = 0.5 - 0.5f64.powi(n);
        let b = 0.5 - 3.0 * 0.5f64.powi(n + 2);
        let c = 0.5 - 0.5f64.powi(n + 1);
        let s = 2.0f64.powi(n + 1);
        if t < a || t > c {
            0.0
        } else if t <= b {
            s * (2.0 * t - 1.0) + 4.0
        } else {
            s * (1.0 - 2.0 * t) - 2.0
        }
    }

    #[test]
    fn tent_matches_piecewise_formula() {
        let grid = linspace(0.0, 1.0, 4097).unwrap();
        for n in 1..=9 {
            for &t in &grid {
                assert!((tent(n as usize, t) - tent_literal(n, t)).abs() < 1e-12, "n={n} t={t}");
            }
        }
    }

    #[test]
    fn distances_are_exact() {
        let ex = sup_counterexample(6, min_nodes(6) + 1, 0).unwrap();
        assert!(ex.dist_to_h.iter().all(|&d| d == 0.5));
        assert_eq!(ex.min_pairwise, 1.0);
        for (_, v) in &ex.value_at_h {
            assert!((v - 0.5).abs() < 1e-12);
        }
        assert!(ex.best_probe > 0.5 + PROBE_MARGIN, "{}", ex.best_probe);
        let zero = &ex.probes[0];
        assert!(zero.value >= 1.0 - 1e-12);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        assert!(matches!(sup_counterexample(5, 200, 0), Err(Error::GridTooCoarse { min_m: 256, m: 200 })));
    }
}
