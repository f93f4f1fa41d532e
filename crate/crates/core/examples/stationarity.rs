//! Stationarity diagnostics before and after optimization, including the p = 1 case.

use std::sync::Arc;

use funquant::diagnostics::stationarity_residual;
use funquant::optimize::{lloyd_run, OptimizerConfig};
use funquant::process::{sample_paths, ProcessKind, ProcessSpec};
use funquant::quantize::Codebook;
use funquant::space::DiscretePathSpace;

fn main() -> funquant::error::Result<()> {
    let space = Arc::new(DiscretePathSpace::uniform(0.0, 1.0, 128, 2.0, 1)?);
    let x = sample_paths(&ProcessSpec::centered(ProcessKind::OrnsteinUhlenbeck { c: 1.0 }, 1)?, &space, 20_000, 4)?;
    let init = Codebook::new(space.clone(), x.paths()[..6].to_vec())?;
    let (cb, trace) = lloyd_run(&OptimizerConfig::lloyd(500, 1e-8), &init, &x, 2.0)?;
    for (label, book) in [("random paths", &init), ("after Lloyd", &cb)] {
        let s = stationarity_residual(book, &x, 2.0);
        println!(
            "{label:<13} relative residual {:.3e}, min cell mass {:.4}, tie mass {:.1e}",
            s.relative_max_residual, s.min_cell_mass, s.tie_mass
        );
    }
    println!("Lloyd exit {:?} after {} steps", trace.exit_reason, trace.iterations);

    let l1 = Arc::new(space.with_p(1.0)?);
    let s = stationarity_residual(&cb.in_space(l1)?, &x, 1.0);
    println!("same codebook in L^1, r = 1: sup-norm residual {:.3e}", s.max_residual);
    Ok(())
}
