//! The coordinate descent driver: coordinate selection, exact 1D steps,
//! stopping rule and trace recording.

use std::collections::VecDeque;
use std::time::Instant;

use rand::Rng;

use crate::data::{seeded_rng, Rng64, RNG_ALGORITHM};
use crate::error::{Error, Result};
use crate::fractional::{
    alpha_sandwich_check, apply_step, check_sufficient_decrease, make_state, CoordinateRule, FractionalProblem,
    Method, SolverConfig, SolverState, Status, Trace, TraceRecord,
};

/// Wall-clock budget is checked once every this many iterations.
pub const TIME_CHECK_EVERY: u64 = 64;

/// Relative tolerance of the per-iteration lemma assertions.
pub const ASSERT_RTOL: f64 = 1e-9;

/// Ring buffer of relative decreases `w_t = (F_t − F_{t+1}) / max(1, F_t)`.
#[derive(Debug, Clone)]
pub struct StoppingWindow {
    values: VecDeque<f64>,
    capacity: usize,
}

impl StoppingWindow {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity >= 1, "window capacity must be positive");
        Self {
            values: VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn push(&mut self, w: f64) {
        if self.values.len() == self.capacity {
            self.values.pop_front();
        }
        self.values.push_back(w);
    }

    /// Records the decrease from `f_prev` to `f_next`.
    pub fn push_decrease(&mut self, f_prev: f64, f_next: f64) {
        self.push((f_prev - f_next) / f_prev.max(1.0));
    }

    pub fn is_full(&self) -> bool {
        self.values.len() == self.capacity
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}

/// Mean of the buffered `w` values is at most `eps`.
pub fn stopping_met(window: &StoppingWindow, eps: f64) -> bool {
    !window.is_empty() && window.mean() <= eps
}

/// Index of the largest `|d_j|`, smallest index on ties.
pub fn argmax_abs(d: &[f64]) -> usize {
    let mut best = 0;
    for (j, v) in d.iter().enumerate() {
        if v.abs() > d[best].abs() {
            best = j;
        }
    }
    best
}

/// Proximal gradient-subgradient direction
/// `d̄ = argmin_d ⟨∇f − F·∂g, d⟩ + (L/2)‖d‖² + h(x + d)`, solved per coordinate.
pub fn greedy_direction<P: FractionalProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    cache: &P::Cache,
    objective: f64,
    lipschitz: f64,
) -> Result<Vec<f64>> {
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::InvalidConfig(format!("L must be finite and > 0, got {lipschitz}")));
    }
    let grad = problem.grad_f(x, cache);
    let sub = problem.subgrad_g(x, cache);
    x.iter()
        .enumerate()
        .map(|(j, &xj)| {
            let v = xj - (grad[j] - objective * sub[j]) / lipschitz;
            Ok(problem.prox_h_coord(j, v, 1.0 / lipschitz)? - xj)
        })
        .collect()
}

/// Next coordinate under `rule`.
pub fn select_coordinate<P: FractionalProblem + ?Sized>(
    problem: &P,
    rule: CoordinateRule,
    t: u64,
    state: &SolverState<P::Cache>,
    rng: &mut Rng64,
) -> Result<usize> {
    let n = problem.dim();
    Ok(match rule {
        CoordinateRule::Cyclic => (t % n as u64) as usize,
        CoordinateRule::Random => rng.random_range(0..n),
        CoordinateRule::Greedy { lipschitz } => {
            argmax_abs(&greedy_direction(problem, &state.x, &state.cache, state.objective, lipschitz)?)
        }
    })
}

/// Runs FCD or PCD from `x0` until the stopping rule or a budget fires.
///
/// The stopping rule is evaluated once the window holds `config.window`
/// decreases. With `config.verify` the sufficient-decrease inequality (and,
/// for FCD, the α sandwich) is asserted at every step.
pub fn run_cd<P: FractionalProblem + ?Sized>(problem: &P, config: &SolverConfig, x0: &[f64]) -> Result<(Vec<f64>, Trace)> {
    config.validate()?;
    if problem.dim() == 0 {
        return Err(Error::BadDimensions("problem has no coordinates".into()));
    }
    let start = Instant::now();
    let mut state = make_state(problem, x0)?;
    let mut rng = seeded_rng(config.seed);
    let mut window = StoppingWindow::new(config.window);
    let f0 = state.objective;
    let c_max = problem.max_coord_lipschitz();
    let theta = config.theta;

    let mut records = vec![TraceRecord {
        t: 0,
        coord: -1,
        eta: 0.0,
        f: f0,
        g: problem.eval_g(&state.x, &state.cache),
        elapsed_s: 0.0,
    }];
    let mut status = Status::IterBudget;
    let mut t = 0u64;

    while t < config.max_iters {
        if t.is_multiple_of(TIME_CHECK_EVERY) && t > 0 && start.elapsed().as_secs_f64() >= config.max_time_s {
            status = Status::TimeBudget;
            break;
        }
        let i = select_coordinate(problem, config.rule, t, &state, &mut rng)?;
        let f_prev = state.objective;
        let eta = match config.method {
            Method::Fcd => problem.solve_fcd_1d(&state.x, &state.cache, i, theta)?,
            Method::Pcd => problem.solve_pcd_1d(&state.x, &state.cache, i, f_prev, theta)?,
        };
        let numerator = if config.verify && config.method == Method::Fcd {
            problem.surrogate_numerator(&state.x, &state.cache, i, eta, theta)
        } else {
            f64::NAN
        };
        apply_step(problem, &mut state, i, eta)?;
        t += 1;
        let f_next = state.objective;
        let g_next = problem.eval_g(&state.x, &state.cache);

        if config.verify {
            let tol = ASSERT_RTOL * f_prev.abs().max(1.0);
            if !check_sufficient_decrease(f_prev, f_next, g_next, eta * eta, theta, tol) {
                return Err(Error::AssertionFailure {
                    iteration: t,
                    details: format!(
                        "sufficient decrease: F {f_prev:e} -> {f_next:e}, g = {g_next:e}, eta = {eta:e}"
                    ),
                });
            }
            if config.method == Method::Fcd {
                let alpha = numerator / g_next;
                if !alpha_sandwich_check(alpha, f_next, f_prev, f0, c_max, theta, tol) {
                    return Err(Error::AssertionFailure {
                        iteration: t,
                        details: format!("alpha sandwich: alpha = {alpha:e}, F {f_prev:e} -> {f_next:e}"),
                    });
                }
            }
        }

        if t.is_multiple_of(config.trace_every) {
            records.push(TraceRecord {
                t,
                coord: i as i64,
                eta,
                f: f_next,
                g: g_next,
                elapsed_s: start.elapsed().as_secs_f64(),
            });
        }
        window.push_decrease(f_prev, f_next);
        if window.is_full() && stopping_met(&window, config.eps) {
            status = Status::Converged;
            break;
        }
    }

    let final_objective = state.objective;
    Ok((
        state.x,
        Trace {
            rng: RNG_ALGORITHM.to_string(),
            records,
            status,
            iterations: t,
            final_objective,
        },
    ))
}
