//! Reference algorithms: Dinkelbach's parametric method (DPA), the proximal
//! gradient-subgradient algorithm (PGSA), the quadratic transform parametric
//! algorithm (QTPA) and the power method for the ℓ4 problem.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cd::{greedy_direction, StoppingWindow, TIME_CHECK_EVERY};
use crate::data::RNG_ALGORITHM;
use crate::error::{Error, Result};
use crate::fractional::{make_state, FractionalProblem, SolverState, Status, Trace, TraceRecord};
use crate::problems::EigL4Problem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Baseline {
    Dpa,
    Pgsa,
    Qtpa,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub algorithm: Baseline,
    /// FISTA iterations per DPA outer step.
    pub inner_iters: usize,
    /// DPA inner loop also stops once the relative change is this small.
    pub inner_tol: f64,
    /// Global Lipschitz constant of `∇f`.
    pub lipschitz: f64,
    pub eps: f64,
    pub window: usize,
    pub max_time_s: f64,
    pub max_iters: u64,
    pub seed: u64,
    pub trace_every: u64,
}

impl BaselineConfig {
    pub fn new(algorithm: Baseline, lipschitz: f64) -> Self {
        Self {
            algorithm,
            inner_iters: 50,
            inner_tol: 1e-9,
            lipschitz,
            eps: 1e-10,
            window: 500,
            max_time_s: 100.0,
            max_iters: u64::MAX,
            seed: 0,
            trace_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.inner_iters == 0 {
            return Err(Error::InvalidConfig("inner_iters must be >= 1".into()));
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::InvalidConfig(format!("L must be finite and > 0, got {}", self.lipschitz)));
        }
        if !(self.eps > 0.0) || self.window == 0 || !(self.max_time_s > 0.0) || self.trace_every == 0 {
            return Err(Error::InvalidConfig("eps, window, max_time_s and trace_every must be positive".into()));
        }
        Ok(())
    }
}

/// `sign(v)·max(|v| − lam, 0)`.
pub fn soft_threshold(v: f64, lam: f64) -> f64 {
    v.signum() * (v.abs() - lam).max(0.0)
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Shared outer loop: applies `step` until the stopping rule or a budget
/// fires, recording `F` after every full-vector update.
fn run_outer<P, S>(problem: &P, config: &BaselineConfig, x0: &[f64], mut step: S) -> Result<(Vec<f64>, Trace)>
where
    P: FractionalProblem + ?Sized,
    S: FnMut(&SolverState<P::Cache>) -> Result<Vec<f64>>,
{
    config.validate()?;
    let start = Instant::now();
    let mut state = make_state(problem, x0)?;
    let mut window = StoppingWindow::new(config.window);
    let mut records = vec![TraceRecord {
        t: 0,
        coord: -1,
        eta: 0.0,
        f: state.objective,
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
        let next = step(&state)?;
        let moved = distance(&next, &state.x);
        let f_prev = state.objective;
        state = make_state(problem, &next)?;
        t += 1;
        if t.is_multiple_of(config.trace_every) {
            records.push(TraceRecord {
                t,
                coord: -1,
                eta: moved,
                f: state.objective,
                g: problem.eval_g(&state.x, &state.cache),
                elapsed_s: start.elapsed().as_secs_f64(),
            });
        }
        window.push_decrease(f_prev, state.objective);
        if window.is_full() && window.mean() <= config.eps {
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

/// PGSA: `x⁺ = prox_{h/L}(x − (∇f(x) − F(x)∂g(x))/L)`.
pub fn run_pgsa<P: FractionalProblem + ?Sized>(problem: &P, config: &BaselineConfig, x0: &[f64]) -> Result<(Vec<f64>, Trace)> {
    run_outer(problem, config, x0, |s| {
        let d = greedy_direction(problem, &s.x, &s.cache, s.objective, config.lipschitz)?;
        Ok(s.x.iter().zip(d).map(|(x, d)| x + d).collect())
    })
}

/// QTPA: with `β = sqrt(g)/(f + h)` the linear term is
/// `2β⁻¹·½g^{−1/2}∂g`, followed by one proximal step.
pub fn run_qtpa<P: FractionalProblem + ?Sized>(problem: &P, config: &BaselineConfig, x0: &[f64]) -> Result<(Vec<f64>, Trace)> {
    let l = config.lipschitz;
    run_outer(problem, config, x0, |s| {
        let g = problem.eval_g(&s.x, &s.cache);
        if !(g > 0.0) {
            return Err(Error::NonPositiveDenominator(g));
        }
        let num = problem.eval_f(&s.x, &s.cache) + problem.eval_h(&s.x, &s.cache);
        let beta = g.sqrt() / num;
        let scale = 2.0 / beta * 0.5 / g.sqrt();
        let grad = problem.grad_f(&s.x, &s.cache);
        let sub = problem.subgrad_g(&s.x, &s.cache);
        s.x.iter()
            .enumerate()
            .map(|(j, &xj)| problem.prox_h_coord(j, xj - (grad[j] - scale * sub[j]) / l, 1.0 / l))
            .collect()
    })
}

/// DPA with `g` linearized at the outer iterate: each outer step minimizes
/// `f(x) + h(x) − λ⟨∂g(x^t), x⟩` with monotone FISTA, `λ = F(x^t)`.
pub fn run_dpa<P: FractionalProblem + ?Sized>(problem: &P, config: &BaselineConfig, x0: &[f64]) -> Result<(Vec<f64>, Trace)> {
    let l = config.lipschitz;
    run_outer(problem, config, x0, |s| {
        let lambda = s.objective;
        let lin: Vec<f64> = problem.subgrad_g(&s.x, &s.cache).into_iter().map(|v| lambda * v).collect();
        let phi = |x: &[f64]| -> Result<f64> {
            let c = problem.init_cache(x)?;
            let dot: f64 = lin.iter().zip(x).map(|(a, b)| a * b).sum();
            Ok(problem.eval_f(x, &c) + problem.eval_h(x, &c) - dot)
        };
        let mut xk = s.x.clone();
        let mut phi_k = phi(&xk)?;
        let mut y = xk.clone();
        let mut tk = 1.0f64;
        for _ in 0..config.inner_iters {
            let cy = problem.init_cache(&y)?;
            let grad = problem.grad_f(&y, &cy);
            let z: Vec<f64> = y
                .iter()
                .enumerate()
                .map(|(j, &yj)| problem.prox_h_coord(j, yj - (grad[j] - lin[j]) / l, 1.0 / l))
                .collect::<Result<_>>()?;
            let phi_z = phi(&z)?;
            let next = if phi_z <= phi_k { z.clone() } else { xk.clone() };
            let t_next = (1.0 + (1.0 + 4.0 * tk * tk).sqrt()) / 2.0;
            y = (0..next.len())
                .map(|j| next[j] + (tk / t_next) * (z[j] - next[j]) + ((tk - 1.0) / t_next) * (next[j] - xk[j]))
                .collect();
            let change = distance(&next, &xk) / xk.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
            phi_k = phi_k.min(phi_z);
            xk = next;
            tk = t_next;
            if change <= config.inner_tol {
                break;
            }
        }
        Ok(xk)
    })
}

/// Power iteration `x⁺ = Gᵀ(Gx)³ / ‖Gᵀ(Gx)³‖`. The start is normalized first.
pub fn run_power_method(problem: &EigL4Problem, config: &BaselineConfig, x0: &[f64]) -> Result<(Vec<f64>, Trace)> {
    let start = crate::problems::recover_unit_solution(x0)?;
    run_outer(problem, config, &start, |s| {
        let d = problem.gt_z_cubed(&s.cache);
        let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroGradient);
        }
        Ok(d.into_iter().map(|v| v / norm).collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::CscMatrix;
    use crate::problems::PiecewiseRatio;

    #[test]
    fn soft_threshold_examples() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-0.5, 1.0), 0.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
    }

    #[test]
    fn pgsa_fixed_point_at_critical_point() {
        // F'(0) = 0 for (x+2)²/(|3x+2|+1), so x = 0 is a fixed point.
        let p = PiecewiseRatio::kinked_1d();
        let mut cfg = BaselineConfig::new(Baseline::Pgsa, 2.0);
        cfg.window = 5;
        let (x, trace) = run_pgsa(&p, &cfg, &[0.0]).unwrap();
        assert!(x[0].abs() < 1e-15, "{x:?}");
        assert_eq!(trace.status, Status::Converged);
    }

    #[test]
    fn power_method_stays_on_sphere() {
        let g = CscMatrix::from_dense(3, 2, &[1.0, 0.3, -0.5, 2.0, 0.2, 0.9]).unwrap();
        let p = EigL4Problem::new(g);
        let mut cfg = BaselineConfig::new(Baseline::Power, 2.0);
        cfg.max_iters = 30;
        let (x, trace) = run_power_method(&p, &cfg, &[3.0, 1.0]).unwrap();
        assert!((x.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        let f = trace.objectives();
        assert!(f.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn power_method_zero_gradient() {
        let g = CscMatrix::from_dense(2, 2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        let p = EigL4Problem::new(g);
        let cfg = BaselineConfig::new(Baseline::Power, 2.0);
        assert!(run_power_method(&p, &cfg, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn config_rejects_bad_values() {
        let mut cfg = BaselineConfig::new(Baseline::Dpa, 1.0);
        assert!(cfg.validate().is_ok());
        cfg.inner_iters = 0;
        assert!(cfg.validate().is_err());
        assert!(BaselineConfig::new(Baseline::Dpa, 0.0).validate().is_err());
    }
}
