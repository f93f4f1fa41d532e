use std::sync::Arc;

use funquant::diagnostics::stationarity_residual;
use funquant::optimize::{lloyd_run, lloyd_step, splitting_init, ExitReason, OptimizerConfig};
use funquant::oracles::sequence::sharp_constant_example;
use funquant::process::{sample_paths, ProcessKind, ProcessSpec};
use funquant::quantize::{assign, distortion, quant_error, Codebook};
use funquant::space::{lp_dist, DiscretePathSpace, Path, PathSample};
use proptest::prelude::*;

fn space(m: usize, p: f64, d: usize) -> Arc<DiscretePathSpace> {
    Arc::new(DiscretePathSpace::uniform(0.0, 1.0, m, p, d).unwrap())
}

fn brownian(s: &Arc<DiscretePathSpace>, n: usize, seed: u64) -> PathSample {
    sample_paths(&ProcessSpec::centered(ProcessKind::Brownian, s.d()).unwrap(), s, n, seed).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn distortion_root_is_one_lipschitz_in_the_law(
        seed in 0u64..1000,
        p in 1.0f64..4.0,
        r in 1.0f64..4.0,
        noise in prop::collection::vec(-1.0f64..1.0, 40 * 16),
        scale in 0.001f64..3.0,
    ) {
        let s = space(16, p, 1);
        let x = brownian(&s, 40, seed);
        let cb = Codebook::new(s.clone(), x.paths()[..3].to_vec()).unwrap();
        let moved: Vec<Path> = x
            .paths()
            .iter()
            .zip(noise.chunks(16))
            .map(|(a, z)| a.add(&Path::new(1, 16, z.iter().map(|v| scale * v).collect()).unwrap()))
            .collect();
        let y = PathSample::new(moved, 0, "perturbed").unwrap();
        let lhs = (quant_error(&cb, &x, r).unwrap() - quant_error(&cb, &y, r).unwrap()).abs();
        let coupling = x.paths().iter().zip(y.paths()).map(|(a, b)| lp_dist(&s, a, b).unwrap().powf(r)).sum::<f64>();
        let rhs = (coupling / 40.0).powf(1.0 / r);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12), "{lhs} > {rhs}");
    }

    #[test]
    fn lloyd_steps_never_increase_quadratic_distortion(seed in 0u64..1000, n in 2usize..6) {
        let s = space(12, 2.0, 1);
        let x = brownian(&s, 120, seed);
        let mut cb = Codebook::new(s, x.paths()[..n].to_vec()).unwrap();
        let mut prev = distortion(&cb, &x, 2.0).unwrap().value;
        for _ in 0..10 {
            cb = lloyd_step(&cb, &x, 2.0).unwrap();
            let d = distortion(&cb, &x, 2.0).unwrap().value;
            prop_assert!(d <= prev * (1.0 + 1e-12) + 1e-15, "{d} > {prev}");
            prev = d;
        }
    }

    #[test]
    fn optimized_codebooks_have_full_distinct_cells(seed in 0u64..1000, n in 1usize..7) {
        let s = space(16, 2.0, 1);
        let x = brownian(&s, 300, seed);
        let cb = splitting_init(&x, &s, n, 2.0, &OptimizerConfig::lloyd(200, 1e-10)).unwrap();
        prop_assert_eq!(cb.len(), n);
        for i in 0..n {
            for j in 0..i {
                prop_assert!(cb.atom(i) != cb.atom(j));
            }
        }
        prop_assert!(!assign(&cb, &x).unwrap().cell_counts(n).contains(&0));
    }

    #[test]
    fn halving_tol_does_not_raise_the_exit_residual(seed in 0u64..1000, tol in 1e-6f64..1e-2) {
        let s = space(16, 2.0, 1);
        let x = brownian(&s, 400, seed);
        let init = Codebook::new(s, x.paths()[..4].to_vec()).unwrap();
        let (a, _) = lloyd_run(&OptimizerConfig::lloyd(500, tol), &init, &x, 2.0).unwrap();
        let (b, _) = lloyd_run(&OptimizerConfig::lloyd(500, tol / 2.0), &init, &x, 2.0).unwrap();
        let ra = stationarity_residual(&a, &x, 2.0).max_residual;
        let rb = stationarity_residual(&b, &x, 2.0).max_residual;
        prop_assert!(rb <= ra * (1.0 + 1e-9) + 1e-14, "{rb} > {ra}");
    }

    #[test]
    fn tolerance_exits_are_stationary_to_tol(seed in 0u64..1000, tol in 1e-5f64..1e-1) {
        let s = space(16, 2.0, 2);
        let x = brownian(&s, 300, seed);
        let init = Codebook::new(s, x.paths()[..5].to_vec()).unwrap();
        let (cb, trace) = lloyd_run(&OptimizerConfig::lloyd(500, tol), &init, &x, 2.0).unwrap();
        if trace.exit_reason == ExitReason::Tolerance {
            prop_assert!(stationarity_residual(&cb, &x, 2.0).relative_max_residual < tol);
        }
    }

    #[test]
    fn sampling_is_a_function_of_the_seed(seed in any::<u64>(), m in 2usize..20) {
        let s = space(m, 2.0, 2);
        for kind in [ProcessKind::Brownian, ProcessKind::OrnsteinUhlenbeck { c: 0.5 }, ProcessKind::Gamma { a: 2.0 }] {
            let spec = ProcessSpec::centered(kind, 2).unwrap();
            let a = sample_paths(&spec, &s, 7, seed).unwrap();
            let b = sample_paths(&spec, &s, 7, seed).unwrap();
            prop_assert_eq!(a.paths(), b.paths());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sharp_ratio_is_below_two(m in 2usize..12) {
        let ex = sharp_constant_example(m).unwrap();
        prop_assert!(ex.ratio <= 2.0);
        prop_assert!((ex.ratio - 2.0 * (m as f64 - 1.0) / m as f64).abs() < 1e-9);
    }
}
