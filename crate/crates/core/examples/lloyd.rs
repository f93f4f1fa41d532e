//! Lloyd iteration for Brownian motion in L^2 and the one-point closed forms.

use std::sync::Arc;

use funquant::optimize::{splitting_sequence, OptimizerConfig};
use funquant::oracles::{closed_form_error, ClosedFormCase};
use funquant::process::{sample_paths, ProcessKind, ProcessSpec};
use funquant::quantize::distortion;
use funquant::space::DiscretePathSpace;

fn main() -> funquant::error::Result<()> {
    let space = Arc::new(DiscretePathSpace::uniform(0.0, 1.0, 256, 2.0, 1)?);
    let spec = ProcessSpec::centered(ProcessKind::Brownian, 1)?;
    let x = sample_paths(&spec, &space, 40_000, 7)?;
    let (books, traces) = splitting_sequence(&x, &space, 6, 2.0, &OptimizerConfig::lloyd(500, 1e-10))?;
    println!("{:>3} {:>10} {:>10} {:>6} {:>12}", "n", "e_n", "stderr", "iters", "exit");
    for (cb, trace) in books.iter().zip(&traces) {
        let rep = distortion(cb, &x, 2.0)?;
        println!(
            "{:>3} {:>10.5} {:>10.5} {:>6} {:>12?}",
            cb.len(),
            rep.quant_error(),
            rep.quant_error_stderr(),
            trace.iterations,
            trace.exit_reason
        );
    }
    let exact = closed_form_error(&ClosedFormCase::Brownian { t_end: 1.0 }, 1, 2.0, 2.0)?;
    println!("closed form e_1 = {exact:.5}");
    Ok(())
}
