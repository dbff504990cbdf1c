//! Invariant checks per module, sized to finish in seconds.

use fraccd::baselines::{run_pgsa, run_qtpa, Baseline, BaselineConfig};
use fraccd::cd::run_cd;
use fraccd::data::{load_libsvm, randn, seeded_rng, spectral_norm_sq, synth_sparse_instance, write_libsvm, CscMatrix};
use fraccd::problems::{topk_magnitude_sum, EigL4Problem, PiecewiseRatio, SparseRecoveryProblem};
use fraccd::scalar::{solve_quartic, stationarity_poly, QuarticCoeffs, QUARTIC_TOL};
use fraccd::stationarity::{classify_point, pcw_residual};
use fraccd::{apply_step, make_state, CoordinateRule, FractionalProblem, Method, SolverConfig};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;

use crate::oracles::{exact_stationarity_quintic, roots_agree, topk_by_sort, Q};
use crate::{outcome, Check, Outcome};

pub fn checks() -> Vec<Check> {
    vec![
        Check { name: "core-rejects-zero-theta", module: "core", run: rejects_zero_theta },
        Check { name: "core-cache-coherence", module: "core", run: cache_coherence },
        Check { name: "data-libsvm-round-trip", module: "data", run: libsvm_round_trip },
        Check { name: "data-column-axpy", module: "data", run: column_axpy },
        Check { name: "data-spectral-norm", module: "data", run: spectral_norm },
        Check { name: "scalar-quintic-cancels", module: "scalar", run: quintic_cancels },
        Check { name: "scalar-planted-roots", module: "scalar", run: planted_roots },
        Check { name: "scalar-companion-roots", module: "scalar", run: companion_agreement },
        Check { name: "cd-random-rule-reproducible", module: "cd", run: random_rule_reproducible },
        Check { name: "cd-monotone-traces", module: "cd", run: monotone_traces },
        Check { name: "problems-topk-sort", module: "problems", run: topk_sort },
        Check { name: "problems-majorization", module: "problems", run: majorization },
        Check { name: "baselines-qtpa-equals-pgsa", module: "baselines", run: qtpa_equals_pgsa },
        Check { name: "stationarity-hierarchy", module: "stationarity", run: hierarchy },
        Check { name: "stationarity-quiet-epoch-residual", module: "stationarity", run: quiet_epoch_residual },
    ]
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn rejects_zero_theta() -> Outcome {
    let cfg = SolverConfig {
        theta: 0.0,
        ..Default::default()
    };
    let p = PiecewiseRatio::kinked_1d();
    outcome(
        cfg.validate().is_err() && run_cd(&p, &cfg, &[0.0]).is_err(),
        "theta = 0 rejected by config validation".into(),
    )
}

fn cache_coherence() -> Outcome {
    let mut rng = seeded_rng(31);
    let g = CscMatrix::from_dense(15, 10, &randn(150, &mut rng)).map_err(err)?;
    let sr = SparseRecoveryProblem::new(g.clone(), randn(15, &mut rng), 0.2, 3).map_err(err)?;
    let l4 = EigL4Problem::new(g);
    let mut s1 = make_state(&sr, &randn(10, &mut rng)).map_err(err)?;
    let mut s2 = make_state(&l4, &randn(10, &mut rng)).map_err(err)?;
    let mut worst = 0.0f64;
    for t in 0..20_000 {
        let i = rng.random_range(0..10);
        let eta: f64 = rng.random_range(-0.5..0.5);
        apply_step(&sr, &mut s1, i, eta).map_err(err)?;
        apply_step(&l4, &mut s2, i, eta).map_err(err)?;
        if t % 997 == 0 {
            let (a, b) = s1.recompute(&sr).map_err(err)?;
            worst = worst.max((a - b).abs() / a.abs());
            let (a, b) = s2.recompute(&l4).map_err(err)?;
            worst = worst.max((a - b).abs() / a.abs());
        }
    }
    outcome(worst <= 1e-9, format!("max relative cached/fresh gap {worst:.2e}"))
}

fn libsvm_round_trip() -> Outcome {
    let mut rng = seeded_rng(41);
    let path = std::env::temp_dir().join(format!("fraccd-verify-{}.svm", std::process::id()));
    let mut bad = 0;
    for _ in 0..50 {
        let (m, n) = (rng.random_range(1..8), rng.random_range(1..8));
        let data: Vec<f64> = (0..m * n)
            .map(|_| if rng.random_bool(0.4) { rng.random_range(-1e3..1e3) } else { 0.0 })
            .collect();
        // keep the last column populated so that the width survives
        let mut data = data;
        data[n - 1] = 1.5;
        let a = CscMatrix::from_dense(m, n, &data).map_err(err)?;
        write_libsvm(&path, &a).map_err(err)?;
        let b = load_libsvm(&path).map_err(err)?;
        if a.to_dense() != b.to_dense() || (a.nrows(), a.ncols()) != (b.nrows(), b.ncols()) {
            bad += 1;
        }
    }
    let _ = std::fs::remove_file(&path);
    outcome(bad == 0, format!("{bad}/50 round trips differ"))
}

fn column_axpy() -> Outcome {
    let mut rng = seeded_rng(42);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let (m, n) = (rng.random_range(1..10), rng.random_range(1..10));
        let data: Vec<f64> = (0..m * n)
            .map(|_| if rng.random_bool(0.5) { rng.random_range(-5.0..5.0) } else { 0.0 })
            .collect();
        let a = CscMatrix::from_dense(m, n, &data).map_err(err)?;
        let j = rng.random_range(0..n);
        let eta: f64 = rng.random_range(-3.0..3.0);
        let mut z = randn(m, &mut rng);
        let z0 = z.clone();
        a.column_axpy(j, eta, &mut z).map_err(err)?;
        for r in 0..m {
            worst = worst.max((z[r] - (z0[r] + eta * data[r * n + j])).abs());
        }
    }
    outcome(worst <= 1e-12, format!("max error vs dense {worst:.2e} over 1000 updates"))
}

fn spectral_norm() -> Outcome {
    let mut rng = seeded_rng(43);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let data = randn(20 * 30, &mut rng);
        let a = CscMatrix::from_dense(20, 30, &data).map_err(err)?;
        let est = spectral_norm_sq(&a, 100_000, 1e-10).map_err(err)?;
        let dense = DMatrix::from_row_slice(20, 30, &data);
        let exact = SymmetricEigen::new(dense.transpose() * &dense).eigenvalues.max();
        if est < exact * (1.0 - 1e-10) {
            return Err(format!("estimate {est} below eigenvalue {exact}"));
        }
        worst = worst.max((est - exact).abs() / exact);
    }
    outcome(worst <= 1e-6, format!("max relative error vs dense eigensolve {worst:.2e}"))
}

fn quintic_cancels() -> Outcome {
    let mut rng = seeded_rng(44);
    for _ in 0..1000 {
        let mut q = || Q::new(rng.random_range(-50..=50), rng.random_range(1..=12));
        let a = [q(), q(), q()];
        let b = [q(), q(), q(), q(), q()];
        let full = exact_stationarity_quintic(a, b);
        if full[0] != Q::from_integer(0) {
            return Err(format!("nonzero fifth-degree term for {a:?}, {b:?}"));
        }
        if full[1..] != stationarity_poly(a, b)[..] {
            return Err(format!("quartic mismatch for {a:?}, {b:?}"));
        }
    }
    Ok("fifth-degree term cancels and quartic matches exactly on 1000 rational draws".into())
}

fn planted_roots() -> Outcome {
    let mut rng = seeded_rng(45);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let mut r: Vec<f64> = (0..4).map(|_| rng.random_range(-10.0..10.0)).collect();
        r.sort_by(f64::total_cmp);
        let mut c = [rng.random_range(0.5..3.0), 0.0, 0.0, 0.0, 0.0];
        for (deg, root) in r.iter().enumerate() {
            for k in (1..=deg + 1).rev() {
                c[k] -= root * c[k - 1];
            }
        }
        let got = solve_quartic(&QuarticCoeffs::from_array(c), QUARTIC_TOL).map_err(err)?;
        if got.len() != 4 {
            return Err(format!("{} roots for planted {r:?}", got.len()));
        }
        for (a, b) in got.iter().zip(&r) {
            worst = worst.max((a - b).abs() / (1.0 + b.abs()));
        }
    }
    outcome(worst <= 1e-5, format!("max relative root error {worst:.2e} over 1000 quartics"))
}

fn companion_agreement() -> Outcome {
    let mut rng = seeded_rng(46);
    let mut failed = 0;
    let mut real = 0;
    for _ in 0..1000 {
        let c: Vec<f64> = randn(5, &mut rng);
        let c = [c[0], c[1], c[2], c[3], c[4]];
        let got = solve_quartic(&QuarticCoeffs::from_array(c), QUARTIC_TOL).map_err(err)?;
        real += got.len();
        failed += usize::from(!roots_agree(&got, c, 1e-7));
    }
    outcome(
        failed == 0,
        format!("{failed}/1000 random quartics disagree with the companion eigenvalues ({real} real roots)"),
    )
}

fn random_rule_reproducible() -> Outcome {
    let inst = synth_sparse_instance(20, 30, 3, 0.1, 46).map_err(err)?;
    let p = SparseRecoveryProblem::new(inst.g, inst.y.unwrap_or_default(), 0.005, 3).map_err(err)?;
    let x0 = randn(30, &mut seeded_rng(47));
    let cfg = SolverConfig {
        rule: CoordinateRule::Random,
        max_iters: 2000,
        seed: 9,
        ..Default::default()
    };
    let (a, ta) = run_cd(&p, &cfg, &x0).map_err(err)?;
    let (b, tb) = run_cd(&p, &cfg, &x0).map_err(err)?;
    outcome(
        a == b && ta.objectives() == tb.objectives(),
        "identical seed gives identical iterates and trace".into(),
    )
}

fn monotone_traces() -> Outcome {
    let inst = synth_sparse_instance(30, 60, 5, 0.1, 48).map_err(err)?;
    let sr = SparseRecoveryProblem::new(inst.g.clone(), inst.y.unwrap_or_default(), 0.1 / 30.0, 5).map_err(err)?;
    let l4 = EigL4Problem::new(inst.g);
    let x0 = randn(60, &mut seeded_rng(49));
    let cfg = SolverConfig {
        max_iters: 3000,
        verify: true,
        ..Default::default()
    };
    let (_, a) = run_cd(&sr, &cfg, &x0).map_err(err)?;
    let fcd = SolverConfig {
        method: Method::Fcd,
        ..cfg
    };
    let (_, b) = run_cd(&l4, &fcd, &x0).map_err(err)?;
    let rises = [a.objectives(), b.objectives()]
        .iter()
        .flat_map(|f| f.windows(2).map(|w| w[1] - w[0] - 1e-9 * w[0].abs().max(1.0)).collect::<Vec<_>>())
        .filter(|d| *d > 0.0)
        .count();
    outcome(rises == 0, format!("{rises} increases across PCD and FCD traces in verify mode"))
}

fn topk_sort() -> Outcome {
    let mut rng = seeded_rng(50);
    for _ in 0..1000 {
        let n = rng.random_range(1..50);
        let k = rng.random_range(1..=n);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let got = topk_magnitude_sum(&x, k).map_err(err)?;
        if got != topk_by_sort(&x, k) {
            return Err(format!("k={k} x={x:?}: {got} vs {}", topk_by_sort(&x, k)));
        }
    }
    Ok("top-k sum equals the sort oracle exactly on 1000 draws".into())
}

fn majorization_gap<P: FractionalProblem>(p: &P, rng: &mut fraccd::data::Rng64) -> Result<f64, String> {
    let n = p.dim();
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let x = randn(n, rng);
        let i = rng.random_range(0..n);
        let eta: f64 = rng.random_range(-3.0..3.0);
        let c = p.init_cache(&x).map_err(err)?;
        let mut moved = x.clone();
        moved[i] += eta;
        let cm = p.init_cache(&moved).map_err(err)?;
        let bound = p.eval_f(&x, &c) + p.grad_f_coord(&x, &c, i) * eta + 0.5 * p.coord_lipschitz(i) * eta * eta;
        worst = worst.min(bound - p.eval_f(&moved, &cm));
    }
    Ok(worst)
}

fn majorization() -> Outcome {
    let mut rng = seeded_rng(51);
    let g = CscMatrix::from_dense(12, 8, &randn(96, &mut rng)).map_err(err)?;
    let sr = SparseRecoveryProblem::new(g.clone(), randn(12, &mut rng), 0.1, 3).map_err(err)?;
    let a = majorization_gap(&sr, &mut rng)?;
    let b = majorization_gap(&EigL4Problem::new(g), &mut rng)?;
    let pw = PiecewiseRatio::new(randn(3, &mut rng), randn(3, &mut rng), randn(3, &mut rng), 1.0).map_err(err)?;
    let c = majorization_gap(&pw, &mut rng)?;
    let worst = a.min(b).min(c);
    outcome(worst >= -1e-10, format!("min majorization slack {worst:.2e} over 3000 triples"))
}

fn qtpa_equals_pgsa() -> Outcome {
    let inst = synth_sparse_instance(30, 50, 5, 0.1, 52).map_err(err)?;
    let p = SparseRecoveryProblem::new(inst.g, inst.y.unwrap_or_default(), 0.1 / 30.0, 5).map_err(err)?;
    let l = spectral_norm_sq(p.matrix(), 1000, 1e-10).map_err(err)?;
    let mut cfg = BaselineConfig::new(Baseline::Qtpa, l);
    cfg.max_iters = 100;
    let x0 = randn(50, &mut seeded_rng(53));
    let (_, q) = run_qtpa(&p, &cfg, &x0).map_err(err)?;
    let (_, g) = run_pgsa(&p, &cfg, &x0).map_err(err)?;
    let worst = q
        .objectives()
        .iter()
        .zip(g.objectives())
        .map(|(a, b)| (a - b).abs() / b.abs())
        .fold(0.0, f64::max);
    outcome(worst <= 1e-9, format!("max relative trace gap {worst:.2e}"))
}

fn hierarchy() -> Outcome {
    let mut rng = seeded_rng(54);
    let mut points = 0;
    for k in 0..10 {
        let n = 1 + k % 2;
        let u = randn(n, &mut rng);
        let a = randn(n, &mut rng);
        let b = randn(n, &mut rng);
        let p = PiecewiseRatio::new(u.clone(), a.clone(), b.clone(), 0.5).map_err(err)?;
        let kink: Vec<f64> = (0..n).map(|i| -b[i] / a[i]).collect();
        let cfg = SolverConfig {
            max_iters: 20_000,
            eps: 1e-300,
            ..Default::default()
        };
        let (fixed, _) = run_cd(&p, &cfg, &randn(n, &mut rng)).map_err(err)?;
        for x in [u.clone(), kink, fixed, randn(n, &mut rng)] {
            let c = classify_point(&p, &x, 1e-6, 1e-6).map_err(err)?;
            if !c.hierarchy_consistent() {
                return Err(format!("instance {k} at {x:?}: {c:?}"));
            }
            points += 1;
        }
    }
    let kinked = PiecewiseRatio::kinked_1d();
    for x in [-2.0 / 3.0, 0.0, -2.0, 1.0] {
        let c = classify_point(&kinked, &[x], 1e-6, 1e-6).map_err(err)?;
        if !c.hierarchy_consistent() {
            return Err(format!("kinked example at {x}: {c:?}"));
        }
        points += 1;
    }
    Ok(format!("FCW/PCW => D => C on {points} classified points"))
}

fn quiet_epoch_residual() -> Outcome {
    // exact zero steps need coordinates pinned to the box; an interior
    // optimum is only approached geometrically
    let inst = synth_sparse_instance(20, 15, 3, 0.1, 55).map_err(err)?;
    let y: Vec<f64> = inst.y.unwrap_or_default().iter().map(|v| 10.0 * v).collect();
    let p = SparseRecoveryProblem::new(inst.g, y, 0.005, 3)
        .and_then(|p| p.with_vartheta(0.3))
        .map_err(err)?;
    let x0: Vec<f64> = randn(15, &mut seeded_rng(56)).iter().map(|v| 0.01 * v).collect();
    let cfg = SolverConfig {
        max_iters: 200_000,
        eps: 1e-300,
        window: 15,
        ..Default::default()
    };
    let (x, trace) = run_cd(&p, &cfg, &x0).map_err(err)?;
    let quiet = trace.records.windows(15).any(|w| w.iter().all(|r| r.eta == 0.0));
    if !quiet {
        return Err("no quiet epoch reached within the budget".into());
    }
    let r = pcw_residual(&p, &x, cfg.theta).map_err(err)?;
    outcome(r.r == 0.0, format!("residual after a quiet epoch: {:e}", r.r))
}

#[cfg(test)]
mod tests {
    use crate::run_check;

    #[test]
    fn every_invariant_check_passes() {
        let mut failed = Vec::new();
        for check in super::checks() {
            let r = run_check(&check);
            eprintln!("[invariant] {} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            if !r.passed {
                failed.push(r.name);
            }
        }
        assert!(failed.is_empty(), "failed: {failed:?}");
    }
}
