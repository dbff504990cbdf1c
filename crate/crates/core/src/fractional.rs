//! Problem abstraction, iterate state and the descent-lemma predicates.

use std::fmt::Debug;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Caches are rebuilt from scratch after this many coordinate steps.
pub const REFRESH_EVERY: u64 = 10_000;

/// Which convexity assumption the denominator satisfies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DenominatorKind {
    Convex,
    ConcaveDifferentiable,
}

/// A fractional program `F = (f + h) / g` with `f` smooth convex, `h`
/// coordinate-separable and `g > 0`.
///
/// Methods take the iterate together with its problem-specific cache so that
/// coordinate quantities cost `O(nnz(column))` rather than a full pass.
pub trait FractionalProblem: Sync {
    type Cache: Clone + Debug + Send;

    fn name(&self) -> &'static str;

    fn dim(&self) -> usize;

    /// Builds every cached quantity from `x`.
    fn init_cache(&self, x: &[f64]) -> Result<Self::Cache>;

    fn eval_f(&self, x: &[f64], cache: &Self::Cache) -> f64;

    fn grad_f_coord(&self, x: &[f64], cache: &Self::Cache, i: usize) -> f64;

    /// Coordinate-wise Lipschitz constant `c_i` of `∇f`.
    fn coord_lipschitz(&self, i: usize) -> f64;

    /// Separable term `h_i(v)`, `+inf` outside the domain.
    fn h_coord(&self, i: usize, v: f64) -> f64;

    fn eval_g(&self, x: &[f64], cache: &Self::Cache) -> f64;

    /// `g(x + η e_i)` without mutating anything.
    fn eval_g_at_step(&self, x: &[f64], cache: &Self::Cache, i: usize, eta: f64) -> f64;

    /// One (deterministically chosen) element of `∂g(x)`.
    fn subgrad_g(&self, x: &[f64], cache: &Self::Cache) -> Vec<f64>;

    /// Interval `[lo, hi]` of the i-th component of `∂g(x)`.
    fn subdiff_g_coord(&self, x: &[f64], cache: &Self::Cache, i: usize) -> (f64, f64);

    /// Interval `[lo, hi]` of `∂h_i(v)`; infinite ends at the box boundary.
    fn subdiff_h_coord(&self, i: usize, v: f64) -> (f64, f64);

    fn denominator_kind(&self) -> DenominatorKind;

    /// Applies `x_i += η` to the cache. `x` is the iterate before the step.
    fn update_cache(&self, x: &[f64], cache: &mut Self::Cache, i: usize, eta: f64);

    /// Global minimizer of `η ↦ J_i(x, η) − λ g(x + η e_i)`.
    fn solve_pcd_1d(
        &self,
        _x: &[f64],
        _cache: &Self::Cache,
        _i: usize,
        _lambda: f64,
        _theta: f64,
    ) -> Result<f64> {
        Err(Error::UnsupportedVariant {
            method: "PCD",
            problem: self.name(),
        })
    }

    /// Global minimizer of `η ↦ J_i(x, η) / g(x + η e_i)`.
    fn solve_fcd_1d(&self, _x: &[f64], _cache: &Self::Cache, _i: usize, _theta: f64) -> Result<f64> {
        Err(Error::UnsupportedVariant {
            method: "FCD",
            problem: self.name(),
        })
    }

    /// `argmin_u h_i(u) + (u − v)² / (2·step)`.
    fn prox_h_coord(&self, _i: usize, _v: f64, _step: f64) -> Result<f64> {
        Err(Error::ProxUnavailable)
    }

    fn eval_h(&self, x: &[f64], _cache: &Self::Cache) -> f64 {
        x.iter().enumerate().map(|(i, &v)| self.h_coord(i, v)).sum()
    }

    fn grad_f(&self, x: &[f64], cache: &Self::Cache) -> Vec<f64> {
        (0..self.dim()).map(|i| self.grad_f_coord(x, cache, i)).collect()
    }

    fn max_coord_lipschitz(&self) -> f64 {
        (0..self.dim()).map(|i| self.coord_lipschitz(i)).fold(0.0, f64::max)
    }

    /// `h(x + η e_i)`.
    fn eval_h_at_step(&self, x: &[f64], i: usize, eta: f64) -> f64 {
        x.iter()
            .enumerate()
            .map(|(j, &v)| if j == i { self.h_coord(j, v + eta) } else { self.h_coord(j, v) })
            .sum()
    }

    /// `J_i(x, η) = f(x) + ∇_i f(x) η + ((c_i + θ)/2) η² + h(x + η e_i)`.
    fn surrogate_numerator(&self, x: &[f64], cache: &Self::Cache, i: usize, eta: f64, theta: f64) -> f64 {
        self.eval_f(x, cache)
            + self.grad_f_coord(x, cache, i) * eta
            + 0.5 * (self.coord_lipschitz(i) + theta) * eta * eta
            + self.eval_h_at_step(x, i, eta)
    }

    /// `K_i(x, η)`.
    fn fcd_objective(&self, x: &[f64], cache: &Self::Cache, i: usize, eta: f64, theta: f64) -> f64 {
        let g = self.eval_g_at_step(x, cache, i, eta);
        if g > 0.0 {
            self.surrogate_numerator(x, cache, i, eta, theta) / g
        } else {
            f64::INFINITY
        }
    }

    /// `M_i(x, η)` for parameter `λ`.
    fn pcd_objective(
        &self,
        x: &[f64],
        cache: &Self::Cache,
        i: usize,
        eta: f64,
        lambda: f64,
        theta: f64,
    ) -> f64 {
        self.surrogate_numerator(x, cache, i, eta, theta) - lambda * self.eval_g_at_step(x, cache, i, eta)
    }
}

/// Iterate plus caches; `objective` always holds `F(x)`.
#[derive(Debug, Clone)]
pub struct SolverState<C> {
    pub x: Vec<f64>,
    pub cache: C,
    pub objective: f64,
    /// Coordinate steps applied so far.
    pub t: u64,
    steps_since_refresh: u64,
}

/// `(f + h) / g` at `x` using the given cache.
pub fn evaluate_objective<P: FractionalProblem + ?Sized>(problem: &P, x: &[f64], cache: &P::Cache) -> Result<f64> {
    let h = problem.eval_h(x, cache);
    if !h.is_finite() {
        return Err(Error::InfeasibleState);
    }
    let g = problem.eval_g(x, cache);
    if !(g > 0.0) {
        return Err(Error::NonPositiveDenominator(g));
    }
    Ok((problem.eval_f(x, cache) + h) / g)
}

/// Fresh state at `x0` with every cache built from scratch.
pub fn make_state<P: FractionalProblem + ?Sized>(problem: &P, x0: &[f64]) -> Result<SolverState<P::Cache>> {
    if x0.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: x0.len(),
        });
    }
    let cache = problem.init_cache(x0)?;
    let objective = evaluate_objective(problem, x0, &cache)?;
    Ok(SolverState {
        x: x0.to_vec(),
        cache,
        objective,
        t: 0,
        steps_since_refresh: 0,
    })
}

impl<C> SolverState<C> {
    /// Recomputes `F` from scratch and returns it with the cached value.
    pub fn recompute<P>(&self, problem: &P) -> Result<(f64, f64)>
    where
        P: FractionalProblem<Cache = C> + ?Sized,
    {
        let fresh = make_state(problem, &self.x)?;
        Ok((fresh.objective, self.objective))
    }
}

/// `x_i += η`, incremental cache update, periodic full refresh and a new
/// cached objective.
pub fn apply_step<P: FractionalProblem + ?Sized>(
    problem: &P,
    state: &mut SolverState<P::Cache>,
    i: usize,
    eta: f64,
) -> Result<()> {
    if i >= state.x.len() {
        return Err(Error::DimensionMismatch {
            expected: state.x.len(),
            got: i,
        });
    }
    state.t += 1;
    state.steps_since_refresh += 1;
    if eta != 0.0 {
        problem.update_cache(&state.x, &mut state.cache, i, eta);
        state.x[i] += eta;
    }
    if state.steps_since_refresh >= REFRESH_EVERY {
        state.cache = problem.init_cache(&state.x)?;
        state.steps_since_refresh = 0;
    }
    state.objective = evaluate_objective(problem, &state.x, &state.cache)?;
    Ok(())
}

/// Sufficient decrease: `F_next − F_prev ≤ −θ/(2 g_next)·‖step‖² + tol`.
pub fn check_sufficient_decrease(f_prev: f64, f_next: f64, g_next: f64, step_sq: f64, theta: f64, tol: f64) -> bool {
    f_next - f_prev <= -(theta / (2.0 * g_next)) * step_sq + tol
}

/// `F_next − tol ≤ α ≤ F_next + σ(F_prev − F_next) + tol` and
/// `α ≤ σ F0 + tol`, with `σ = (c_max + θ)/θ`.
pub fn alpha_sandwich_check(
    alpha: f64,
    f_next: f64,
    f_prev: f64,
    f0: f64,
    c_max: f64,
    theta: f64,
    tol: f64,
) -> bool {
    let sigma = (c_max + theta) / theta;
    f_next - tol <= alpha && alpha <= f_next + sigma * (f_prev - f_next) + tol && alpha <= sigma * f0 + tol
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    Fcd,
    Pcd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CoordinateRule {
    Cyclic,
    Random,
    /// Largest component of the proximal gradient-subgradient direction
    /// computed with global Lipschitz constant `lipschitz`.
    Greedy { lipschitz: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: Method,
    pub rule: CoordinateRule,
    pub theta: f64,
    pub eps: f64,
    pub window: usize,
    pub max_time_s: f64,
    pub max_iters: u64,
    pub seed: u64,
    /// Check both descent lemmas at every iteration.
    pub verify: bool,
    /// Keep every n-th trace record (the stopping rule still sees all).
    pub trace_every: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::Pcd,
            rule: CoordinateRule::Cyclic,
            theta: 1e-6,
            eps: 1e-10,
            window: 500,
            max_time_s: 100.0,
            max_iters: u64::MAX,
            seed: 0,
            verify: false,
            trace_every: 1,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::InvalidConfig(format!("theta must be > 0, got {}", self.theta)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidConfig(format!("eps must be > 0, got {}", self.eps)));
        }
        if self.window == 0 {
            return Err(Error::InvalidConfig("window must be >= 1".into()));
        }
        if !(self.max_time_s > 0.0) {
            return Err(Error::InvalidConfig(format!("max_time_s must be > 0, got {}", self.max_time_s)));
        }
        if self.trace_every == 0 {
            return Err(Error::InvalidConfig("trace_every must be >= 1".into()));
        }
        if let CoordinateRule::Greedy { lipschitz } = self.rule {
            if !(lipschitz > 0.0 && lipschitz.is_finite()) {
                return Err(Error::InvalidConfig(format!("greedy rule needs finite L > 0, got {lipschitz}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Converged,
    IterBudget,
    TimeBudget,
}

/// One row of a trace. `coord` is `-1` for full-vector (baseline) updates,
/// in which case `eta` is the step norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: u64,
    pub coord: i64,
    pub eta: f64,
    #[serde(rename = "F")]
    pub f: f64,
    /// `g(x^t)`, kept for invariant replay; not written to CSV.
    pub g: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trace {
    pub rng: String,
    pub records: Vec<TraceRecord>,
    pub status: Status,
    pub iterations: u64,
    pub final_objective: f64,
}

impl Trace {
    pub fn objectives(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f).collect()
    }

    pub fn write_csv_to<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "t,coord,eta,F,elapsed_s")?;
        for r in &self.records {
            writeln!(out, "{},{},{},{},{}", r.t, r.coord, r.eta, r.f, r.elapsed_s)?;
        }
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv_to(&mut out)?;
        out.flush()?;
        Ok(())
    }
}
