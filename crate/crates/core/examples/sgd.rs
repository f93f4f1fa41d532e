//! Stochastic gradient descent for a non-Hilbert setting: fBM in L^3 with r = 3.

use std::sync::Arc;

use funquant::diagnostics::stationarity_residual;
use funquant::optimize::{sgd_run, OptimizerConfig};
use funquant::process::{sample_paths, ProcessKind, ProcessSpec};
use funquant::quantize::{quant_error, Codebook};
use funquant::space::DiscretePathSpace;

fn main() -> funquant::error::Result<()> {
    let (p, r) = (3.0, 3.0);
    let space = Arc::new(DiscretePathSpace::uniform(0.0, 1.0, 64, p, 1)?);
    let spec = ProcessSpec::centered(ProcessKind::Fbm { hurst: 0.3 }, 1)?;
    let x = sample_paths(&spec, &space, 10_000, 3)?;
    let init = Codebook::new(space.clone(), x.paths()[..5].to_vec())?;
    let config = OptimizerConfig { record_every: Some(10_000), ..OptimizerConfig::sgd(200_000, 1e-3, 3) };
    let (cb, trace) = sgd_run(&config, &init, &x, r)?;
    println!("initial error {:.5}", quant_error(&init, &x, r)?);
    for (k, (d, res)) in trace.iterations_at.iter().zip(trace.distortions.iter().zip(&trace.residuals)) {
        println!("draw {k:>7}: error {:.5}, relative residual {res:.3e}", d.powf(1.0 / r));
    }
    let stat = stationarity_residual(&cb, &x, r);
    println!("exit {:?}, final residual {:.3e}, admissible {}", trace.exit_reason, stat.relative_max_residual, stat.admissible);
    Ok(())
}
