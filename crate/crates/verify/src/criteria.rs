//! The ten acceptance criteria. Each returns an [`Outcome`] whose message
//! carries the measured quantities.

use std::time::Instant;

use fraccd::baselines::{run_dpa, run_pgsa, run_power_method, run_qtpa, Baseline, BaselineConfig};
use fraccd::cd::run_cd;
use fraccd::data::{randn, seeded_rng, spectral_norm_sq, synth_l4_instance, synth_sparse_instance, CscMatrix};
use fraccd::problems::{
    l4_fcd_step, l4_quartic_radicand, recover_unit_solution, sr_pcd_step, EigL4Problem, PiecewiseRatio,
    SparseRecoveryProblem,
};
use fraccd::scalar::{grid_oracle_1d, ratio_stationarity_coeffs, solve_quartic, RatioCoeffs, QUARTIC_TOL};
use fraccd::stationarity::{classify_point, quasiconvexity_probe, rho_bound_l4, weak_convexity_slack};
use fraccd::{make_state, DenominatorKind, FractionalProblem, Method, SolverConfig};
use rand::Rng;

use crate::oracles::{replay_lemmas, roots_agree};
use crate::{ls_slope, outcome, Check, Outcome};

pub fn checks() -> Vec<Check> {
    vec![
        Check { name: "criterion-1-kinked-golden", module: "stationarity", run: criterion_1 },
        Check { name: "criterion-2-sufficient-decrease", module: "cd", run: criterion_2 },
        Check { name: "criterion-3-alpha-sandwich", module: "cd", run: criterion_3 },
        Check { name: "criterion-4-scalar-oracles", module: "scalar", run: criterion_4 },
        Check { name: "criterion-5-pgsa-power", module: "baselines", run: criterion_5 },
        Check { name: "criterion-6-fcd-vs-power", module: "baselines", run: criterion_6 },
        Check { name: "criterion-7-pcd-vs-baselines", module: "baselines", run: criterion_7 },
        Check { name: "criterion-8-quasiconvexity", module: "problems", run: criterion_8 },
        Check { name: "criterion-9-sublinear-rate", module: "cd", run: criterion_9 },
        Check { name: "criterion-10-rho-bound", module: "stationarity", run: criterion_10 },
    ]
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn within_budget(start: Instant, budget_s: f64) -> (bool, String) {
    let t = start.elapsed().as_secs_f64();
    (t < budget_s, format!("{t:.2}s (budget {budget_s}s)"))
}

fn l4_instance(m: usize, n: usize, seed: u64) -> Result<(EigL4Problem, Vec<f64>), String> {
    let inst = synth_l4_instance(m, n, seed).map_err(err)?;
    Ok((EigL4Problem::new(inst.g), randn(n, &mut seeded_rng(seed ^ 0x5eed))))
}

fn sparse_instance(m: usize, n: usize, s: usize, k: usize, seed: u64) -> Result<(SparseRecoveryProblem, Vec<f64>), String> {
    let inst = synth_sparse_instance(m, n, s, 0.1, seed).map_err(err)?;
    let y = inst.y.ok_or("instance without observations")?;
    let p = SparseRecoveryProblem::new(inst.g, y, 0.1 / m as f64, k).map_err(err)?;
    Ok((p, randn(n, &mut seeded_rng(seed ^ 0x5eed))))
}

/// Kinked 1D example: classification table, PCD convergence from 0, and
/// the first PCD step as θ → 0.
pub fn criterion_1() -> Outcome {
    let start = Instant::now();
    let p = PiecewiseRatio::kinked_1d();
    let mut parts = Vec::new();
    let mut ok = true;
    // (x, C, D, FCW, PCW)
    let table = [
        (-2.0 / 3.0, true, false, false, false),
        (0.0, true, true, false, false),
        (-2.0, true, true, true, true),
    ];
    for (x, c, d, fcw, pcw) in table {
        let got = classify_point(&p, &[x], 1e-6, 1e-6).map_err(err)?;
        let row_ok = got.is_c == c && got.is_d == d && got.is_fcw == Some(fcw) && got.is_pcw == Some(pcw);
        ok &= row_ok;
        parts.push(format!(
            "x={x:.4}: C={} D={} FCW={:?} PCW={:?} [{}]",
            got.is_c,
            got.is_d,
            got.is_fcw,
            got.is_pcw,
            if row_ok { "ok" } else { "MISMATCH" }
        ));
    }

    let cfg = SolverConfig {
        max_iters: 100,
        ..Default::default()
    };
    let (x, _) = run_cd(&p, &cfg, &[0.0]).map_err(err)?;
    let reached = (x[0] + 2.0).abs() <= 1e-6;
    ok &= reached;
    parts.push(format!("PCD from 0 after 100 iterations: |x+2| = {:.2e}", (x[0] + 2.0).abs()));

    let theta = 1e-12;
    let state = make_state(&p, &[0.0]).map_err(err)?;
    let eta = p.solve_pcd_1d(&state.x, &state.cache, 0, state.objective, theta).map_err(err)?;
    let step_ok = (eta + 14.0 / 3.0).abs() <= 1e-9;
    ok &= step_ok;
    parts.push(format!(
        "first PCD step from 0 with theta={theta:e}: eta = {eta:.12} (expected -14/3) [{}]",
        if step_ok { "ok" } else { "MISMATCH" }
    ));

    let (fast, t) = within_budget(start, 1.0);
    ok &= fast;
    parts.push(t);
    outcome(ok, parts.join("; "))
}

const LEMMA_ITERS: u64 = 5000;
const LEMMA_RTOL: f64 = 1e-9;

struct LemmaRuns {
    fcd_decrease: f64,
    fcd_sandwich: f64,
    pcd_decrease: f64,
    drift: f64,
    steps: usize,
}

fn lemma_runs() -> Result<LemmaRuns, String> {
    let mut rng = seeded_rng(2);
    let mut out = LemmaRuns {
        fcd_decrease: f64::NEG_INFINITY,
        fcd_sandwich: f64::NEG_INFINITY,
        pcd_decrease: f64::NEG_INFINITY,
        drift: 0.0,
        steps: 0,
    };
    let base = SolverConfig {
        max_iters: LEMMA_ITERS,
        eps: 1e-300,
        ..Default::default()
    };
    for k in 0..10u64 {
        let m = rng.random_range(20..=200);
        let n = rng.random_range(10..=100);
        let (p, x0) = l4_instance(m, n, 100 + k)?;
        let cfg = SolverConfig {
            method: Method::Fcd,
            ..base.clone()
        };
        let (_, trace) = run_cd(&p, &cfg, &x0).map_err(err)?;
        let r = replay_lemmas(&p, &x0, &trace, cfg.theta).map_err(err)?;
        out.fcd_decrease = out.fcd_decrease.max(r.decrease);
        out.fcd_sandwich = out.fcd_sandwich.max(r.sandwich);
        out.drift = out.drift.max(r.drift);
        out.steps += r.steps;

        let (p, x0) = sparse_instance(50, 100, 10, 10, 200 + k)?;
        let (_, trace) = run_cd(&p, &base, &x0).map_err(err)?;
        let r = replay_lemmas(&p, &x0, &trace, base.theta).map_err(err)?;
        out.pcd_decrease = out.pcd_decrease.max(r.decrease);
        out.drift = out.drift.max(r.drift);
        out.steps += r.steps;
    }
    Ok(out)
}

/// Sufficient decrease along FCD on ℓ4 and PCD on sparse recovery.
pub fn criterion_2() -> Outcome {
    let start = Instant::now();
    let r = lemma_runs()?;
    let (fast, t) = within_budget(start, 30.0);
    let ok = r.fcd_decrease <= LEMMA_RTOL && r.pcd_decrease <= LEMMA_RTOL && r.drift <= LEMMA_RTOL && fast;
    outcome(
        ok,
        format!(
            "{} replayed steps; worst normalised slack FCD {:.2e}, PCD {:.2e} (tol {LEMMA_RTOL:e}); trace drift {:.1e}; {t}",
            r.steps, r.fcd_decrease, r.pcd_decrease, r.drift
        ),
    )
}

/// α sandwich along the FCD runs of criterion 2.
pub fn criterion_3() -> Outcome {
    let start = Instant::now();
    let r = lemma_runs()?;
    let (fast, t) = within_budget(start, 30.0);
    outcome(
        r.fcd_sandwich <= LEMMA_RTOL && fast,
        format!("worst normalised sandwich slack {:.2e} (tol {LEMMA_RTOL:e}); {t}", r.fcd_sandwich),
    )
}

const ORACLE_DRAWS: usize = 10_000;
const ORACLE_TOL: f64 = 1e-6;
const ROOT_TOL: f64 = 1e-7;

pub fn pcd_draw(rng: &mut fraccd::data::Rng64) -> Result<(f64, f64), String> {
    let m = rng.random_range(1..=6);
    let n = rng.random_range(2..=6);
    let g = CscMatrix::from_dense(m, n, &randn(m * n, rng)).map_err(err)?;
    let y = randn(m, rng);
    let gamma = rng.random_range(0.01..2.0);
    let k = rng.random_range(1..=n);
    let mut p = SparseRecoveryProblem::new(g, y, gamma, k).map_err(err)?;
    if rng.random_bool(0.5) {
        p = p.with_vartheta(rng.random_range(1.0..10.0)).map_err(err)?;
    }
    let scale = p.vartheta().min(3.0);
    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-scale..scale)).collect();
    let cache = p.init_cache(&x).map_err(err)?;
    let i = rng.random_range(0..n);
    let theta = 10f64.powf(rng.random_range(-6.0..0.0));
    let f = fraccd::evaluate_objective(&p, &x, &cache).map_err(err)?;
    let lambda = f * rng.random_range(0.0..1.5);
    let eta = sr_pcd_step(&p, &x, &cache, i, lambda, theta).map_err(err)?;
    let obj = |e: f64| p.pcd_objective(&x, &cache, i, e, lambda, theta);
    let (c1, c2) = (-p.vartheta() - x[i], p.vartheta() - x[i]);
    let best = grid_oracle_1d(obj, c1, c2, 2001, 3);
    Ok((obj(eta), obj(best)))
}

pub struct FcdDraw {
    pub solver: f64,
    pub oracle: f64,
    pub roots_ok: bool,
}

pub fn fcd_draw(rng: &mut fraccd::data::Rng64) -> Result<FcdDraw, String> {
    let m = rng.random_range(1..=6);
    let n = rng.random_range(1..=5);
    let g = CscMatrix::from_dense(m, n, &randn(m * n, rng)).map_err(err)?;
    let gamma3 = if rng.random_bool(0.5) { rng.random_range(0.0..2.0) } else { 0.0 };
    let p = EigL4Problem::new(g).with_offsets(gamma3, 0.0).map_err(err)?;
    let x = randn(n, rng);
    let cache = p.init_cache(&x).map_err(err)?;
    let i = rng.random_range(0..n);
    let theta = 10f64.powf(rng.random_range(-6.0..0.0));
    let eta = l4_fcd_step(&p, &x, &cache, i, theta).map_err(err)?;
    let obj = |e: f64| p.fcd_objective(&x, &cache, i, e, theta);
    let best = grid_oracle_1d(obj, f64::NEG_INFINITY, f64::INFINITY, 2001, 3);

    let [b4, b3, b2, b1, b0] = l4_quartic_radicand(&cache.z, p.matrix().column(i), cache.z4);
    let rc = RatioCoeffs {
        a2: (p.coord_lipschitz(i) + theta) / 2.0,
        a1: 2.0 * x[i],
        a0: cache.xsq + gamma3,
        b4,
        b3,
        b2,
        b1,
        b0,
    };
    let q = ratio_stationarity_coeffs(&rc);
    let ours = solve_quartic(&q, QUARTIC_TOL).map_err(err)?;
    let coeffs = q.to_array();
    let cmax = coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()));
    // a vanishing leading coefficient sends a companion eigenvalue to infinity
    let roots_ok = coeffs[0].abs() <= 1e-8 * cmax || roots_agree(&ours, coeffs, ROOT_TOL);
    Ok(FcdDraw {
        solver: obj(eta),
        oracle: obj(best),
        roots_ok,
    })
}

/// Breakpoint and quartic scalar solvers against the grid oracle, and the
/// quartic roots against the companion matrix. A solver value may undercut
/// the grid (the grid only resolves η to its final spacing) but must never
/// exceed it by more than the tolerance.
pub fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = seeded_rng(4);
    let tally = |pairs: &[(f64, f64)]| {
        let worse = pairs.iter().filter(|(s, o)| !(s <= &(o + ORACLE_TOL))).count();
        let better = pairs.iter().filter(|(s, o)| *o > s + ORACLE_TOL).count();
        let gap = pairs.iter().map(|(s, o)| s - o).fold(f64::NEG_INFINITY, f64::max);
        (worse, better, gap)
    };
    let pcd: Vec<(f64, f64)> = (0..ORACLE_DRAWS).map(|_| pcd_draw(&mut rng)).collect::<Result<_, _>>()?;
    let mut fcd = Vec::with_capacity(ORACLE_DRAWS);
    let mut root_fail = 0;
    for _ in 0..ORACLE_DRAWS {
        let r = fcd_draw(&mut rng)?;
        fcd.push((r.solver, r.oracle));
        root_fail += usize::from(!r.roots_ok);
    }
    let (pw, pb, pg) = tally(&pcd);
    let (fw, fb, fg) = tally(&fcd);
    let (fast, t) = within_budget(start, 60.0);
    outcome(
        pw == 0 && fw == 0 && root_fail == 0 && fast,
        format!(
            "PCD breakpoint: {pw}/{ORACLE_DRAWS} above grid + {ORACLE_TOL:e} (max solver - grid {pg:.2e}, {pb} strictly below grid); \
             FCD quartic: {fw}/{ORACLE_DRAWS} above (max {fg:.2e}, {fb} strictly below); \
             companion root mismatches {root_fail}/{ORACLE_DRAWS}; {t}"
        ),
    )
}

/// PGSA and the power method produce the same objective trace on ℓ4.
pub fn criterion_5() -> Outcome {
    let mut worst = 0.0f64;
    for k in 0..10u64 {
        let (p, x0) = l4_instance(40 + 5 * k as usize, 20 + 2 * k as usize, 500 + k)?;
        let unit = recover_unit_solution(&x0).map_err(err)?;
        let mut cfg = BaselineConfig::new(Baseline::Pgsa, 2.0);
        cfg.max_iters = 100;
        cfg.eps = 1e-300;
        let (_, tp) = run_pgsa(&p, &cfg, &unit).map_err(err)?;
        let (_, tw) = run_power_method(&p, &cfg, &unit).map_err(err)?;
        if tp.records.len() != tw.records.len() || tp.records.len() != 101 {
            return Err(format!("instance {k}: trace lengths {} vs {}", tp.records.len(), tw.records.len()));
        }
        for (a, b) in tp.objectives().iter().zip(tw.objectives()) {
            worst = worst.max((a - b).abs() / b.abs());
        }
    }
    outcome(worst <= 1e-8, format!("max relative trace gap {worst:.2e} over 10 instances x 100 iterations"))
}

/// Per-run wall-clock cap for the ℓ4 comparison (2 methods × 10 instances).
/// The other stopping parameters keep their defaults.
pub const COMPARISON_TIME_CAP_S: f64 = 5.0;

/// Per-run wall-clock cap for the sparse-recovery comparison (4 methods × 10
/// instances), sized to the two-minute budget. None of the methods meets the
/// stopping rule on these instances, so all of them run to this cap.
pub const SPARSE_TIME_CAP_S: f64 = 2.5;

/// Final objectives are only determined up to the stopping tolerance, so
/// values within it count as a tie.
fn no_worse(a: f64, b: f64) -> bool {
    a <= b + SolverConfig::default().eps * b.abs()
}

/// FCD reaches a final objective no worse than the power method.
pub fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut wins = 0;
    let mut rows = Vec::new();
    for k in 0..10u64 {
        let (p, x0) = l4_instance(100, 80, 600 + k)?;
        let cfg = SolverConfig {
            method: Method::Fcd,
            max_time_s: COMPARISON_TIME_CAP_S,
            trace_every: u64::MAX,
            ..Default::default()
        };
        let (_, fcd) = run_cd(&p, &cfg, &x0).map_err(err)?;
        let mut bcfg = BaselineConfig::new(Baseline::Power, 2.0);
        bcfg.max_time_s = COMPARISON_TIME_CAP_S;
        bcfg.trace_every = u64::MAX;
        let (_, pw) = run_power_method(&p, &bcfg, &x0).map_err(err)?;
        let (a, b) = (fcd.final_objective, pw.final_objective);
        if no_worse(a, b) {
            wins += 1;
        }
        rows.push(format!("{a:.6}/{b:.6}[{:.1e}]", (a - b) / b));
    }
    let (fast, t) = within_budget(start, 120.0);
    outcome(
        wins >= 8 && fast,
        format!("FCD <= power on {wins}/10 (FCD/power: {}); {t}", rows.join(" ")),
    )
}

/// PCD reaches a final objective no worse than DPA, PGSA and QTPA.
pub fn criterion_7() -> Outcome {
    let start = Instant::now();
    let mut wins = 0;
    let mut rows = Vec::new();
    for k in 0..10u64 {
        let (p, x0) = sparse_instance(100, 200, 20, 20, 700 + k)?;
        let cfg = SolverConfig {
            max_time_s: SPARSE_TIME_CAP_S,
            trace_every: u64::MAX,
            ..Default::default()
        };
        let (_, pcd) = run_cd(&p, &cfg, &x0).map_err(err)?;
        let l = spectral_norm_sq(p.matrix(), 10_000, 1e-10).map_err(err)?;
        let mut best = f64::INFINITY;
        for alg in [Baseline::Dpa, Baseline::Pgsa, Baseline::Qtpa] {
            let mut bcfg = BaselineConfig::new(alg, l);
            bcfg.max_time_s = SPARSE_TIME_CAP_S;
            bcfg.trace_every = u64::MAX;
            let run = match alg {
                Baseline::Dpa => run_dpa::<SparseRecoveryProblem>,
                Baseline::Pgsa => run_pgsa::<SparseRecoveryProblem>,
                _ => run_qtpa::<SparseRecoveryProblem>,
            };
            let (_, tr) = run(&p, &bcfg, &x0).map_err(err)?;
            best = best.min(tr.final_objective);
        }
        let a = pcd.final_objective;
        if no_worse(a, best) {
            wins += 1;
        }
        rows.push(format!("{a:.6}/{best:.6}[{:.1e}]", (a - best) / best));
    }
    let (fast, t) = within_budget(start, 120.0);
    outcome(
        wins >= 8 && fast,
        format!("PCD <= best baseline on {wins}/10 (PCD/best: {}); {t}", rows.join(" ")),
    )
}

/// Quasiconvexity probe of the ℓ4 objective.
pub fn criterion_8() -> Outcome {
    let (p, _) = l4_instance(20, 10, 800)?;
    let p = p.with_denominator_kind(DenominatorKind::ConcaveDifferentiable);
    let worst = quasiconvexity_probe(&p, 10_000, 8);
    outcome(worst <= 1e-9, format!("max violation F(mid) - max(F(x), F(y)) = {worst:.3e} over 10^4 triples"))
}

/// Tail slope of `F(x^t) − F_best` on a log-log scale.
pub fn criterion_9() -> Outcome {
    let mut slopes = Vec::new();
    for k in 0..5u64 {
        let (p, x0) = l4_instance(60, 30, 900 + k)?;
        let n = p.dim() as u64;
        let iters = RATE_EPOCHS * n;
        let cfg = SolverConfig {
            method: Method::Fcd,
            max_iters: iters,
            eps: 1e-300,
            ..Default::default()
        };
        let (_, short) = run_cd(&p, &cfg, &x0).map_err(err)?;
        let long_cfg = SolverConfig {
            max_iters: 10 * iters,
            trace_every: u64::MAX,
            ..cfg.clone()
        };
        let (_, long) = run_cd(&p, &long_cfg, &x0).map_err(err)?;
        let f_best = long.final_objective.min(short.final_objective);
        slopes.push(tail_slope(&short.objectives(), f_best)?);
    }
    let worst = slopes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    outcome(
        worst <= -0.8,
        format!(
            "tail slopes {} (need <= -0.8)",
            slopes.iter().map(|s| format!("{s:.2}")).collect::<Vec<_>>().join(", ")
        ),
    )
}

pub const RATE_EPOCHS: u64 = 200;

/// Slope of `log(F_t − F_best)` against `log t` over the second half of the
/// iterations that are still above the rounding floor.
pub fn tail_slope(objectives: &[f64], f_best: f64) -> Result<f64, String> {
    let floor = 1e-12 * f_best.abs().max(1e-300);
    let above: Vec<(f64, f64)> = objectives
        .iter()
        .enumerate()
        .skip(1)
        .map(|(t, f)| (t as f64, f - f_best))
        .take_while(|(_, gap)| *gap > floor)
        .collect();
    if above.len() < 4 {
        return Err(format!("only {} iterates above the rounding floor", above.len()));
    }
    let tail = &above[above.len() / 2..];
    let xs: Vec<f64> = tail.iter().map(|(t, _)| t.ln()).collect();
    let ys: Vec<f64> = tail.iter().map(|(_, g)| g.ln()).collect();
    Ok(ls_slope(&xs, &ys))
}

/// ρ on `diag(2, 1)` and the weak-convexity inequality on random pairs.
pub fn criterion_10() -> Outcome {
    let d = CscMatrix::diag(&[2.0, 1.0]).map_err(err)?;
    let rho = rho_bound_l4(&d).map_err(err)?;
    let exact = rho == 192.0;
    let mut rng = seeded_rng(10);
    let mut worst = f64::INFINITY;
    for k in 0..5u64 {
        let m = rng.random_range(5..=30);
        let n = rng.random_range(2..=m.min(10));
        let (p, _) = l4_instance(m, n, 1000 + k)?;
        let rho = rho_bound_l4(p.matrix()).map_err(err)?;
        for _ in 0..10_000 {
            let x = randn(n, &mut rng);
            let y = randn(n, &mut rng);
            let s = weak_convexity_slack(&p, &x, &y, rho).map_err(err)?;
            worst = worst.min(s);
        }
    }
    outcome(
        exact && worst >= -1e-9,
        format!("rho(diag(2,1)) = {rho}; min slack over 5 x 10^4 pairs = {worst:.3e}"),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_slope_of_a_power_law() {
        let f: Vec<f64> = (0..1000).map(|t| 1.0 + 1.0 / (t as f64 + 1.0)).collect();
        let s = tail_slope(&f, 1.0).unwrap();
        assert!((s + 1.0).abs() < 0.01, "{s}");
    }
}
