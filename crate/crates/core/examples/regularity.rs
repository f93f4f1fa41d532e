//! Hölder fits and boundary pinning of optimized quantizers.

use std::sync::Arc;

use funquant::diagnostics::{boundary_pinning, holder_fit};
use funquant::optimize::{splitting_init, OptimizerConfig};
use funquant::process::{sample_paths, ProcessKind, ProcessSpec};
use funquant::space::DiscretePathSpace;

fn main() -> funquant::error::Result<()> {
    let space = Arc::new(DiscretePathSpace::uniform(0.0, 1.0, 256, 2.0, 1)?);
    for kind in [ProcessKind::Brownian, ProcessKind::Bridge, ProcessKind::Fbm { hurst: 0.75 }] {
        let spec = ProcessSpec::centered(kind, 1)?;
        let x = sample_paths(&spec, &space, 10_000, 9)?;
        let cb = splitting_init(&x, &space, 6, 2.0, &OptimizerConfig::lloyd(300, 1e-9))?;
        let fit = holder_fit(&cb, None)?;
        let betas: Vec<String> = fit.betas().map(|b| format!("{b:.3}")).collect();
        let start = boundary_pinning(&cb, &[0], 0.0)?;
        let end = boundary_pinning(&cb, &[space.m() - 1], 0.0)?;
        println!("{:<12} beta per atom {betas:?}", spec.tag());
        println!("{:<12} max |a(0)| = {start:.3e}, max |a(1)| = {end:.3e}", "");
    }
    Ok(())
}
