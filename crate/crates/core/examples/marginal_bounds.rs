//! Sandwich bounds for a planar Brownian motion, in L^2 and in the sup norm.

use std::sync::Arc;

use funquant::bounds::{marginal_bounds, BoundsConfig};
use funquant::optimize::OptimizerConfig;
use funquant::process::{sample_paths, ProcessKind, ProcessSpec};
use funquant::quantize::Metric;
use funquant::space::DiscretePathSpace;

fn main() -> funquant::error::Result<()> {
    let space = Arc::new(DiscretePathSpace::uniform(0.0, 1.0, 64, 2.0, 2)?);
    let x = sample_paths(&ProcessSpec::centered(ProcessKind::Brownian, 2)?, &space, 10_000, 2)?;
    for metric in [Metric::Lp, Metric::Sup] {
        let cfg = BoundsConfig {
            n: 6,
            sizes: vec![3, 2],
            metric,
            r: 2.0,
            optimizer: OptimizerConfig::lloyd(300, 1e-9),
            cap: 64,
        };
        let rep = marginal_bounds(&x, &space, &cfg)?;
        println!("{metric:?}");
        println!("  lower {:.5} <= joint {:.5} ({})", rep.lower.lhs, rep.joint.value, rep.joint.source);
        println!("  joint {:.5} <= upper {:.5}  pass = {}", rep.upper.lhs, rep.upper.rhs, rep.pass());
    }
    Ok(())
}
