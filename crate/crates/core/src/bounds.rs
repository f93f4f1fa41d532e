//! Marginal sandwich bounds for `R^d`-valued processes.
//!
//! With `e_n` the best empirical error over a candidate family, the checks are
//!
//! ```text
//! L^p (r = p):  sum_i e_n(X_i)^p   <= e_n(X)^p <= sum_i e_{n_i}(X_i)^p
//! sup norm:     max_i e_n(X_i)^r   <= e_n(X)^r <= sum_i e_{n_i}(X_i)^r
//! ```
//!
//! each side allowed three Monte Carlo standard errors of slack.
//!
//! Joint candidates are a joint splitting run, the product of the marginal
//! `n_i`-codebooks, and a joint run started from that product. Marginal
//! `n`-codebook candidates are a marginal splitting run and the coordinate
//! projections of the best joint codebook.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::{optimize, product_quantizer, splitting_init, OptimizerConfig};
use crate::quantize::{distortion_in, Codebook, DistortionReport, Metric};
use crate::space::{DiscretePathSpace, Path, PathSample};

/// Standard errors of slack allowed on each side.
pub const SIGMA_SLACK: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsConfig {
    /// Joint codebook size.
    pub n: usize,
    /// Per-coordinate sizes with product at most `n`.
    pub sizes: Vec<usize>,
    pub metric: Metric,
    /// Distortion exponent for the sup-norm variant; the `L^p` variant uses `r = p`.
    pub r: f64,
    pub optimizer: OptimizerConfig,
    /// Largest product codebook allowed.
    pub cap: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// Best empirical distortion `E min ||X - a||^r`.
    pub value: f64,
    pub stderr: f64,
    /// Which candidate achieved it.
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    /// Combined standard error of both sides.
    pub sigma: f64,
    /// `lhs <= rhs + 3 sigma`.
    pub pass: bool,
}

impl Inequality {
    fn new(lhs: f64, rhs: f64, sigma: f64) -> Self {
        Self { lhs, rhs, sigma, pass: lhs <= rhs + SIGMA_SLACK * sigma }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    pub metric: Metric,
    pub n: usize,
    pub sizes: Vec<usize>,
    pub r: f64,
    pub n_paths: usize,
    pub joint: Estimate,
    /// `e_n(X_i)^r` estimates.
    pub marginal_n: Vec<Estimate>,
    /// `e_{n_i}(X_i)^r` estimates.
    pub marginal_sizes: Vec<Estimate>,
    /// Product codebook distortion; equal to the sum of `marginal_sizes` in the `L^p` case.
    pub product: Estimate,
    pub lower: Inequality,
    pub upper: Inequality,
}

impl BoundsReport {
    pub fn pass(&self) -> bool {
        self.lower.pass && self.upper.pass
    }
}

fn estimate(rep: &DistortionReport, source: impl Into<String>) -> Estimate {
    Estimate { value: rep.value, stderr: rep.stderr, source: source.into() }
}

fn best(cands: Vec<(DistortionReport, String, Codebook)>) -> (Estimate, Codebook) {
    let (rep, source, cb) = cands
        .into_iter()
        .min_by(|a, b| a.0.value.total_cmp(&b.0.value))
        .expect("at least one candidate");
    (estimate(&rep, source), cb)
}

/// Coordinate `j` of every atom, duplicates dropped.
pub fn project(codebook: &Codebook, j: usize, space: &Arc<DiscretePathSpace>) -> Result<Codebook> {
    let mut atoms: Vec<Path> = Vec::new();
    for a in codebook.atoms() {
        let row = Path::new(1, a.m(), a.row(j).to_vec())?;
        if !atoms.contains(&row) {
            atoms.push(row);
        }
    }
    Codebook::new(space.clone(), atoms)
}

pub fn marginal_bounds(sample: &PathSample, space: &Arc<DiscretePathSpace>, cfg: &BoundsConfig) -> Result<BoundsReport> {
    let d = space.d();
    if d < 2 {
        return Err(Error::InvalidParameter("marginal bounds require d >= 2".into()));
    }
    if cfg.sizes.len() != d {
        return Err(Error::InvalidParameter(format!("expected {d} marginal sizes, found {}", cfg.sizes.len())));
    }
    let prod: usize = cfg.sizes.iter().product();
    if cfg.sizes.contains(&0) || prod > cfg.n {
        return Err(Error::InvalidParameter(format!(
            "marginal sizes {:?} must be >= 1 with product <= n = {}",
            cfg.sizes, cfg.n
        )));
    }
    space.check(sample.path(0))?;
    let r = match cfg.metric {
        Metric::Lp => space.p(),
        Metric::Sup => cfg.r,
    };
    let metric = cfg.metric;
    let eval = |cb: &Codebook, x: &PathSample| distortion_in(cb, x, r, metric);
    let design_r = match metric {
        Metric::Lp => r,
        // sup-norm codebooks are designed in the ambient L^p geometry
        Metric::Sup => 2.0f64.max(space.p()),
    };
    let space1 = Arc::new(space.with_dim(1)?);
    let coords: Vec<PathSample> = (0..d).map(|j| sample.coordinate(j)).collect::<Result<_>>()?;

    let mut marginal_sizes = Vec::with_capacity(d);
    let mut marginal_books = Vec::with_capacity(d);
    for (j, x) in coords.iter().enumerate() {
        let cb = splitting_init(x, &space1, cfg.sizes[j], design_r, &cfg.optimizer)?;
        marginal_sizes.push(estimate(&eval(&cb, x)?, format!("splitting, n = {}", cfg.sizes[j])));
        marginal_books.push(cb);
    }

    let product_cb = product_quantizer(&marginal_books, cfg.cap)?;
    let product_cb = product_cb.in_space(space.clone())?;
    let product = estimate(&eval(&product_cb, sample)?, "product");

    let mut joint_cands = vec![(eval(&product_cb, sample)?, "product".to_string(), product_cb.clone())];
    let joint_split = splitting_init(sample, space, cfg.n, design_r, &cfg.optimizer)?;
    joint_cands.push((eval(&joint_split, sample)?, "joint splitting".into(), joint_split));
    if prod == cfg.n {
        let (refined, _) = optimize(&cfg.optimizer, &product_cb, sample, design_r)?;
        joint_cands.push((eval(&refined, sample)?, "joint run from product".into(), refined));
    }
    let (joint, joint_cb) = best(joint_cands);

    let mut marginal_n = Vec::with_capacity(d);
    for (j, x) in coords.iter().enumerate() {
        let split = splitting_init(x, &space1, cfg.n, design_r, &cfg.optimizer)?;
        let mut cands = vec![(eval(&split, x)?, "splitting".to_string(), split)];
        let proj = project(&joint_cb, j, &space1)?;
        cands.push((eval(&proj, x)?, "joint projection".into(), proj.clone()));
        if metric == Metric::Lp {
            let (refined, _) = optimize(&cfg.optimizer, &proj, x, design_r)?;
            cands.push((eval(&refined, x)?, "run from joint projection".into(), refined));
        }
        marginal_n.push(best(cands).0);
    }

    let se2 = |es: &[Estimate]| es.iter().map(|e| e.stderr * e.stderr).sum::<f64>();
    let lower = match metric {
        Metric::Lp => Inequality::new(
            marginal_n.iter().map(|e| e.value).sum(),
            joint.value,
            (se2(&marginal_n) + joint.stderr.powi(2)).sqrt(),
        ),
        Metric::Sup => {
            let worst = marginal_n
                .iter()
                .max_by(|a, b| a.value.total_cmp(&b.value))
                .expect("d >= 2");
            Inequality::new(worst.value, joint.value, worst.stderr.hypot(joint.stderr))
        }
    };
    let upper = Inequality::new(
        joint.value,
        marginal_sizes.iter().map(|e| e.value).sum(),
        (se2(&marginal_sizes) + joint.stderr.powi(2)).sqrt(),
    );
    Ok(BoundsReport {
        metric,
        n: cfg.n,
        sizes: cfg.sizes.clone(),
        r,
        n_paths: sample.len(),
        joint,
        marginal_n,
        marginal_sizes,
        product,
        lower,
        upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{sample_paths, ProcessKind, ProcessSpec};

    fn setup(d: usize) -> (Arc<DiscretePathSpace>, PathSample) {
        let s = Arc::new(DiscretePathSpace::uniform(0.0, 1.0, 32, 2.0, d).unwrap());
        let x = sample_paths(&ProcessSpec::centered(ProcessKind::Brownian, d).unwrap(), &s, 2000, 5).unwrap();
        (s, x)
    }

    fn cfg(metric: Metric) -> BoundsConfig {
        BoundsConfig {
            n: 4,
            sizes: vec![2, 2],
            metric,
            r: 2.0,
            optimizer: OptimizerConfig::lloyd(100, 1e-9),
            cap: 64,
        }
    }

    #[test]
    fn lp_sandwich_holds() {
        let (s, x) = setup(2);
        let rep = marginal_bounds(&x, &s, &cfg(Metric::Lp)).unwrap();
        assert!(rep.pass(), "{rep:#?}");
        let sum: f64 = rep.marginal_sizes.iter().map(|e| e.value).sum();
        assert!((rep.product.value - sum).abs() < 1e-12 * sum);
        assert!(rep.joint.value <= rep.product.value);
    }

    #[test]
    fn sup_sandwich_holds() {
        let (s, x) = setup(2);
        let rep = marginal_bounds(&x, &s, &cfg(Metric::Sup)).unwrap();
        assert!(rep.pass(), "{rep:#?}");
        assert!(rep.product.value <= rep.upper.rhs + 1e-12);
    }

    #[test]
    fn rejects_bad_configs() {
        let (s, x) = setup(1);
        let mut c = cfg(Metric::Lp);
        c.sizes = vec![2];
        assert!(marginal_bounds(&x, &s, &c).unwrap_err().to_string().contains("d >= 2"));
        let (s, x) = setup(2);
        let mut c = cfg(Metric::Lp);
        c.sizes = vec![3, 2];
        assert!(marginal_bounds(&x, &s, &c).is_err());
    }
}
