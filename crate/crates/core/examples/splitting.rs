//! Greedy splitting to n = 10 and the strict-decrease check on the resulting errors.

use std::sync::Arc;

use funquant::diagnostics::monotonicity_check;
use funquant::optimize::{splitting_sequence, OptimizerConfig};
use funquant::process::{sample_paths, ProcessKind, ProcessSpec};
use funquant::space::DiscretePathSpace;

fn main() -> funquant::error::Result<()> {
    let space = Arc::new(DiscretePathSpace::uniform(0.0, 1.0, 128, 2.0, 1)?);
    let x = sample_paths(&ProcessSpec::centered(ProcessKind::Bridge, 1)?, &space, 20_000, 5)?;
    let (books, _) = splitting_sequence(&x, &space, 10, 2.0, &OptimizerConfig::lloyd(300, 1e-9))?;
    for e in monotonicity_check(&books, &x, 2.0)? {
        let gap = e.gap_sigmas.map(|g| format!("{g:7.1} sigma")).unwrap_or_default();
        println!("n = {:>2}: e = {:.5} +- {:.5} {gap}{}", e.n, e.error, e.stderr, if e.flagged { "  FLAGGED" } else { "" });
    }
    Ok(())
}
