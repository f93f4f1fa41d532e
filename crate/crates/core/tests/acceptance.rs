//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::sync::Arc;
use std::time::Instant;

use funquant::bounds::{marginal_bounds, BoundsConfig};
use funquant::diagnostics::{boundary_pinning, holder_fit, monotonicity_check, stationarity_residual};
use funquant::optimize::{distortion_gradient, splitting_sequence, OptimizerConfig};
use funquant::oracles::{closed_form_error, run_oracles, ClosedFormCase, OracleName, OracleOptions};
use funquant::process::{sample_paths, ProcessKind, ProcessSpec};
use funquant::quantize::{assign, assign_in, quant_error, Codebook, Metric};
use funquant::rng::stream_rng;
use funquant::space::{dual_pairing, lp_dist, DiscretePathSpace, Path, PathSample};
use rand::Rng;
use rand_distr::StandardNormal;

type Outcome = (bool, String);

fn uniform(m: usize, p: f64, d: usize) -> Arc<DiscretePathSpace> {
    Arc::new(DiscretePathSpace::uniform(0.0, 1.0, m, p, d).unwrap())
}

fn simulate(kind: ProcessKind, space: &Arc<DiscretePathSpace>, n: usize, seed: u64) -> PathSample {
    sample_paths(&ProcessSpec::centered(kind, space.d()).unwrap(), space, n, seed).unwrap()
}

fn lloyd() -> OptimizerConfig {
    OptimizerConfig::lloyd(1000, 1e-12)
}

fn oracle_suite() -> Outcome {
    let start = Instant::now();
    let names = [OracleName::C0, OracleName::L1, OracleName::Sharp2, OracleName::Supnorm];
    let manifest = match run_oracles(&names, &OracleOptions::default()) {
        Ok(m) => m,
        Err(e) => return (false, format!("error: {e}")),
    };
    let secs = start.elapsed().as_secs_f64();
    let failed: Vec<String> = manifest
        .checks()
        .filter(|(_, c)| !c.pass)
        .map(|(e, c)| format!("{}:{} (expected {}, got {})", e.oracle, c.quantity, c.expected, c.computed))
        .collect();
    let total = manifest.checks().count();
    let ok = failed.is_empty() && secs < 10.0;
    (ok, format!("{} of {total} checks hold in {secs:.2} s (limit 10 s) {}", total - failed.len(), failed.join("; ")))
}

fn closed_form() -> Outcome {
    let start = Instant::now();
    let (m, n_paths) = (512, 200_000);
    let cases: [(&str, ProcessKind, Arc<DiscretePathSpace>, ClosedFormCase, f64); 3] = [
        ("brownian", ProcessKind::Brownian, uniform(m, 2.0, 1), ClosedFormCase::Brownian { t_end: 1.0 }, 0.015),
        ("bridge", ProcessKind::Bridge, uniform(m, 2.0, 1), ClosedFormCase::Bridge { t_end: 1.0 }, 0.02),
        (
            "ou",
            ProcessKind::OrnsteinUhlenbeck { c: 1.0 },
            Arc::new(DiscretePathSpace::exponential(0.0, 4.0, m, 2.0, 1, 1.0).unwrap()),
            ClosedFormCase::StationaryOu { b: 1.0, t0: 4.0 },
            0.03,
        ),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (name, kind, space, case, tol)) in cases.into_iter().enumerate() {
        let x = simulate(kind, &space, n_paths, 200 + i as u64);
        let (books, _) = splitting_sequence(&x, &space, 1, 2.0, &lloyd()).unwrap();
        let e = quant_error(&books[0], &x, 2.0).unwrap();
        let expected = closed_form_error(&case, 1, 2.0, 2.0).unwrap();
        let rel = (e - expected).abs() / expected;
        ok &= rel <= tol;
        parts.push(format!("{name} {e:.5} vs {expected:.5} ({:.2}% <= {:.1}%)", 100.0 * rel, 100.0 * tol));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 60.0;
    (ok, format!("{}; {secs:.1} s (limit 60 s)", parts.join(", ")))
}

/// Brownian p = r = 2 splitting run to n = 8, shared by several criteria.
struct BrownianRun {
    sample: PathSample,
    books: Vec<Codebook>,
    exits: Vec<String>,
}

fn brownian_run() -> BrownianRun {
    let space = uniform(256, 2.0, 1);
    let sample = simulate(ProcessKind::Brownian, &space, 100_000, 300);
    let (books, traces) = splitting_sequence(&sample, &space, 8, 2.0, &lloyd()).unwrap();
    let exits = traces.iter().map(|t| format!("{:?}@{}", t.exit_reason, t.iterations)).collect();
    BrownianRun { sample, books, exits }
}

fn stationarity(run: &BrownianRun) -> Outcome {
    let cb = run.books.last().unwrap();
    let rep = stationarity_residual(cb, &run.sample, 2.0);
    let n = cb.len() as f64;
    let masses_ok = rep.min_cell_mass >= 1.0 / (10.0 * n);
    let ok = rep.relative_max_residual < 1e-3 && masses_ok && rep.tie_mass < 1e-3;
    (
        ok,
        format!(
            "relative residual {:.2e} (< 1e-3), min cell mass {:.4} (>= {:.4}), tie mass {:.1e} (< 1e-3), exit {}",
            rep.relative_max_residual,
            rep.min_cell_mass,
            1.0 / (10.0 * n),
            rep.tie_mass,
            run.exits.last().unwrap()
        ),
    )
}

fn gradient() -> Outcome {
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut skipped = 0usize;
    for (k, &(p, r)) in [(2.0, 2.0), (2.5, 2.5), (3.0, 4.0)].iter().enumerate() {
        let space = uniform(24, p, 2);
        for trial in 0..10u64 {
            let seed = 400 + 100 * k as u64 + trial;
            let x = simulate(ProcessKind::Brownian, &space, 50, seed);
            let mut rng = stream_rng(seed, 1);
            let atoms: Vec<Path> = x.paths()[..3]
                .iter()
                .map(|a| {
                    let shift: Vec<f64> = (0..a.values().len()).map(|_| 0.05 * rng.sample::<f64, _>(StandardNormal)).collect();
                    a.add(&Path::new(2, 24, shift).unwrap())
                })
                .collect();
            let cb = Codebook::new(space.clone(), atoms).unwrap();
            let a = assign(&cb, &x).unwrap();
            if a.tie_flags.iter().any(|&t| t) || a.cell_counts(3).contains(&0) {
                skipped += 1;
                continue;
            }
            let grads = distortion_gradient(&cb, &x, r).unwrap();
            for i in 0..3 {
                let h = Path::new(2, 24, (0..48).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap();
                let eps = 1e-6;
                let moved = |sgn: f64| {
                    let mut atoms = cb.atoms().to_vec();
                    atoms[i] = atoms[i].add(&h.scaled(sgn * eps));
                    let cb = Codebook::new(space.clone(), atoms).unwrap();
                    funquant::quantize::distortion(&cb, &x, r).unwrap().value
                };
                let fd = (moved(1.0) - moved(-1.0)) / (2.0 * eps);
                let an = dual_pairing(&space, &grads[i], &h).unwrap();
                worst = worst.max((fd - an).abs() / an.abs());
                checked += 1;
            }
        }
    }
    let ok = worst < 1e-4 && checked >= 60;
    (ok, format!("worst relative error {worst:.2e} (< 1e-4) over {checked} directional derivatives, {skipped} inadmissible codebooks skipped"))
}

fn monotonicity(run: &BrownianRun) -> Outcome {
    let entries = monotonicity_check(&run.books, &run.sample, 2.0).unwrap();
    let strictly = entries.windows(2).all(|w| w[1].error < w[0].error);
    let gaps_ok = entries.iter().filter(|e| e.n <= 6).all(|e| e.gap_sigmas.is_none_or(|g| g > 2.0));
    let listing: Vec<String> = entries
        .iter()
        .map(|e| match e.gap_sigmas {
            Some(g) => format!("e{}={:.4} ({g:.0}σ)", e.n, e.error),
            None => format!("e{}={:.4}", e.n, e.error),
        })
        .collect();
    (strictly && gaps_ok, format!("strictly decreasing: {strictly}; {}", listing.join(" ")))
}

fn marginal() -> Outcome {
    let start = Instant::now();
    let space = uniform(128, 2.0, 2);
    let x = simulate(ProcessKind::Brownian, &space, 20_000, 600);
    let mut ok = true;
    let mut parts = Vec::new();
    for metric in [Metric::Lp, Metric::Sup] {
        let cfg = BoundsConfig { n: 4, sizes: vec![2, 2], metric, r: 2.0, optimizer: lloyd(), cap: 64 };
        let rep = marginal_bounds(&x, &space, &cfg).unwrap();
        ok &= rep.pass();
        parts.push(format!(
            "{metric:?}: {:.4} <= {:.4} <= {:.4} (σ {:.4}/{:.4})",
            rep.lower.lhs, rep.joint.value, rep.upper.rhs, rep.lower.sigma, rep.upper.sigma
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 300.0;
    (ok, format!("{}; {secs:.1} s (limit 300 s)", parts.join(", ")))
}

fn betas(cb: &Codebook) -> (f64, f64) {
    let fit = holder_fit(cb, None).unwrap();
    fit.betas().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), b| (lo.min(b), hi.max(b)))
}

fn regularity(run: &BrownianRun) -> Outcome {
    let bm = run.books.last().unwrap();
    let (bm_lo, bm_hi) = betas(bm);
    let bm_ok = bm_lo >= 0.35 && bm_hi <= 0.65;

    let space = uniform(256, 2.0, 1);
    let fbm = simulate(ProcessKind::Fbm { hurst: 0.75 }, &space, 20_000, 700);
    let (books, _) = splitting_sequence(&fbm, &space, 8, 2.0, &lloyd()).unwrap();
    let (f_lo, f_hi) = betas(books.last().unwrap());
    let fbm_ok = f_lo >= 0.55 && f_hi <= 0.95;

    let pin_bm = boundary_pinning(bm, &[0], 0.0).unwrap();
    let bridge = simulate(ProcessKind::Bridge, &space, 20_000, 701);
    let (books, _) = splitting_sequence(&bridge, &space, 8, 2.0, &lloyd()).unwrap();
    let pin_bridge = boundary_pinning(books.last().unwrap(), &[space.m() - 1], 0.0).unwrap();
    let pin_ok = pin_bm < 1e-6 && pin_bridge < 1e-6;
    (
        bm_ok && fbm_ok && pin_ok,
        format!(
            "brownian β in [{bm_lo:.3}, {bm_hi:.3}] (need [0.35, 0.65]); fbm(0.75) β in [{f_lo:.3}, {f_hi:.3}] (need [0.55, 0.95]); \
             pinning {pin_bm:.1e} at t=0, {pin_bridge:.1e} at t=1 (< 1e-6)"
        ),
    )
}

fn equivariance() -> Outcome {
    let mut worst = 0.0f64;
    let mut same = true;
    for (k, &(p, r)) in [(2.0, 2.0), (3.0, 1.5), (1.0, 1.0), (1.5, 3.0)].iter().enumerate() {
        let space = uniform(64, p, 2);
        let x = simulate(ProcessKind::Brownian, &space, 1000, 800 + k as u64);
        let cb = Codebook::new(space.clone(), x.paths()[..5].to_vec()).unwrap();
        let mut rng = stream_rng(800, k as u64);
        for _ in 0..5 {
            let c = rng.random_range(0.1..10.0);
            let u = Path::new(2, 64, (0..128).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
            let (xs, cs) = (x.affine(c, &u).unwrap(), cb.affine(c, &u).unwrap());
            for metric in [Metric::Lp, Metric::Sup] {
                same &= assign_in(&cb, &x, metric).unwrap().cell_index == assign_in(&cs, &xs, metric).unwrap().cell_index;
            }
            let (e, es) = (quant_error(&cb, &x, r).unwrap(), quant_error(&cs, &xs, r).unwrap());
            worst = worst.max((es - c * e).abs() / (c * e));
        }
    }
    (worst < 1e-12 && same, format!("worst relative deviation {worst:.1e} (< 1e-12); assignments invariant: {same}"))
}

fn lipschitz() -> Outcome {
    let space = uniform(32, 2.0, 1);
    let x = simulate(ProcessKind::Brownian, &space, 200, 900);
    let cb = Codebook::new(space.clone(), x.paths()[..4].to_vec()).unwrap();
    let mut fails = 0usize;
    let mut tightest = 0.0f64;
    for r in [1.0, 2.0, 3.0] {
        let base = quant_error(&cb, &x, r).unwrap();
        let mut rng = stream_rng(900, r as u64);
        for _ in 0..100 {
            let scale = 10f64.powf(rng.random_range(-3.0..0.5));
            let moved: Vec<Path> = x
                .paths()
                .iter()
                .map(|p| {
                    let noise: Vec<f64> = (0..32).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
                    p.add(&Path::new(1, 32, noise).unwrap())
                })
                .collect();
            let y = PathSample::new(moved, 0, "perturbed").unwrap();
            let lhs = (quant_error(&cb, &y, r).unwrap() - base).abs();
            let rhs = (x
                .paths()
                .iter()
                .zip(y.paths())
                .map(|(a, b)| lp_dist(&space, a, b).unwrap().powf(r))
                .sum::<f64>()
                / x.len() as f64)
                .powf(1.0 / r);
            if lhs > rhs * (1.0 + 1e-12) {
                fails += 1;
            }
            tightest = tightest.max(lhs / rhs);
        }
    }
    (fails == 0, format!("{fails} violations in 300 coupled perturbations; largest ratio {tightest:.3} (<= 1)"))
}

fn main() {
    let start = Instant::now();
    let mut all = true;
    let mut report = |id: usize, name: &str, (ok, detail): Outcome| {
        all &= ok;
        println!("criterion {id} {name}: {} ({detail})", if ok { "PASS" } else { "FAIL" });
    };
    report(1, "oracle suite", oracle_suite());
    report(2, "closed-form one-point errors", closed_form());
    let run = brownian_run();
    report(3, "stationarity and admissibility", stationarity(&run));
    report(4, "gradient vs finite differences", gradient());
    report(5, "strict monotonicity", monotonicity(&run));
    report(6, "marginal bounds", marginal());
    report(7, "regularity and pinning", regularity(&run));
    report(8, "affine equivariance", equivariance());
    report(9, "Lipschitz dependence on the law", lipschitz());
    println!("acceptance: {} in {:.1} s", if all { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
    if !all {
        std::process::exit(1);
    }
}
