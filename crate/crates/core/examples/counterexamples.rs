//! The sequence-space and sup-norm constructions, computed exactly.

use funquant::oracles::sequence::{c0_example, l1_hyperplane_example, sharp_constant_example};
use funquant::oracles::sup_counterexample;

fn main() -> funquant::error::Result<()> {
    let c0 = c0_example(12, None, 0)?;
    println!("c0: E||X - 1/2|| = {:.12}, exact minimum {:.12}", c0.value_at_half, c0.minimum);
    println!("    a^(m) values: {:?}", c0.sequence.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>());

    let l1 = l1_hyperplane_example(12, None)?;
    println!("l1: plane minimum {:.9}, full minimum {:.9} (median route {:.9})", l1.e_f, l1.e_l1, l1.e_l1_median);
    println!("    hyperplane minimum {:.9}, upper bound {:.9}", l1.e_e_truncated, l1.e_e_upper);
    for c in &l1.candidates {
        println!("    candidate k = {:>2}: {:.9} (closed form {:.9})", c.k, c.value, c.closed_form);
    }

    for m in 2..=10 {
        let s = sharp_constant_example(m)?;
        println!("sharp constant m = {m:>2}: ratio {:.9} vs 2(m-1)/m = {:.9}", s.ratio, s.closed_form);
    }

    let sup = sup_counterexample(8, funquant::oracles::sup::min_nodes(8), 0)?;
    println!("sup: ||f_n - h|| = {:?}", sup.dist_to_h);
    println!("     best continuous probe {:.6}, value at h {:?}", sup.best_probe, sup.value_at_h);
    Ok(())
}
