//! Simulates every supported process on one grid and prints a few summary statistics.

use std::sync::Arc;

use funquant::process::{
    intrinsic_semimetric, moment_check, sample_paths, DiffusionCoefficients, JumpLaw, ProcessKind, ProcessSpec,
};
use funquant::space::DiscretePathSpace;

fn main() -> funquant::error::Result<()> {
    let space = Arc::new(DiscretePathSpace::uniform(0.0, 1.0, 129, 2.0, 1)?);
    let kinds = [
        ProcessKind::Brownian,
        ProcessKind::Bridge,
        ProcessKind::OrnsteinUhlenbeck { c: 2.0 },
        ProcessKind::Fbm { hurst: 0.75 },
        ProcessKind::Diffusion(DiffusionCoefficients::affine(0.0, 0.05, 0.0, 0.2)),
        ProcessKind::Gamma { a: 3.0 },
        ProcessKind::CompoundPoisson { lambda: 4.0, jumps: JumpLaw::Normal { mean: 0.0, sd: 0.5 } },
        ProcessKind::StableLevy { alpha: 1.5 },
    ];
    println!("{:<28} {:>12} {:>12} {:>10} {:>7}", "process", "E||X||^2", "rho(0,1/2)", "stable", "heavy");
    for kind in kinds {
        let x0 = if matches!(kind, ProcessKind::Diffusion(_)) { 1.0 } else { 0.0 };
        let spec = ProcessSpec::new(kind, vec![x0])?;
        let x = sample_paths(&spec, &space, 5000, 1)?;
        let moments = moment_check(&x, &space, 2.0)?;
        let rho = intrinsic_semimetric(&x, 2.0, 0, 64)?;
        println!(
            "{:<28} {:>12.4} {:>12.4} {:>10} {:>7}",
            spec.tag(),
            moments.value,
            rho,
            moments.stable,
            moments.heavy_tail
        );
    }
    Ok(())
}
