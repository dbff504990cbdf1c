use crate::data::CscMatrix;
use crate::error::{Error, Result};
use crate::fractional::{DenominatorKind, FractionalProblem};
use crate::scalar::{argmin_over_candidates, pcd_breakpoints, PcdBreakpointParams};

/// Choice of coordinate curvature for `½‖Gx − y‖²`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Curvature {
    /// `(GᵀG)_{ii}`: the true coordinate Lipschitz constant.
    ColumnNorms,
    /// `(GGᵀ)_{ii}`: compatibility mode, square `G` only. Not a valid
    /// majorizer in general.
    RowNorms,
}

/// `min (½‖Gx − y‖² + γ‖x‖₁) / (γ·Σ_{j≤k}|x_[j]| + g_offset)` s.t. `‖x‖∞ ≤ ϑ`.
#[derive(Debug, Clone)]
pub struct SparseRecoveryProblem {
    g: CscMatrix,
    y: Vec<f64>,
    gamma: f64,
    k: usize,
    vartheta: f64,
    g_offset: f64,
    curvature: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseRecoveryCache {
    /// `Gx − y`.
    pub resid: Vec<f64>,
    pub resid_sq: f64,
    pub l1: f64,
}

impl SparseRecoveryProblem {
    pub fn new(g: CscMatrix, y: Vec<f64>, gamma: f64, k: usize) -> Result<Self> {
        let n = g.ncols();
        if y.len() != g.nrows() {
            return Err(Error::DimensionMismatch {
                expected: g.nrows(),
                got: y.len(),
            });
        }
        if k == 0 || k > n {
            return Err(Error::BadK { k, n });
        }
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::InvalidConfig(format!("gamma must be > 0, got {gamma}")));
        }
        let curvature = g.col_sq_norms().to_vec();
        Ok(Self {
            g,
            y,
            gamma,
            k,
            vartheta: f64::INFINITY,
            g_offset: 0.0,
            curvature,
        })
    }

    /// Box bound `‖x‖∞ ≤ ϑ`; `+inf` disables it.
    pub fn with_vartheta(mut self, vartheta: f64) -> Result<Self> {
        if !(vartheta > 0.0) {
            return Err(Error::InvalidConfig(format!("vartheta must be > 0, got {vartheta}")));
        }
        self.vartheta = vartheta;
        Ok(self)
    }

    /// Additive constant in the denominator, making `x = 0` admissible.
    pub fn with_g_offset(mut self, g_offset: f64) -> Result<Self> {
        if !(g_offset >= 0.0 && g_offset.is_finite()) {
            return Err(Error::InvalidConfig(format!("g_offset must be >= 0, got {g_offset}")));
        }
        self.g_offset = g_offset;
        Ok(self)
    }

    pub fn with_curvature(mut self, curvature: Curvature) -> Result<Self> {
        self.curvature = match curvature {
            Curvature::ColumnNorms => self.g.col_sq_norms().to_vec(),
            Curvature::RowNorms => {
                if self.g.nrows() != self.g.ncols() {
                    return Err(Error::BadDimensions("row-norm curvature needs a square G".into()));
                }
                self.g.row_sq_norms()
            }
        };
        Ok(self)
    }

    pub fn matrix(&self) -> &CscMatrix {
        &self.g
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn vartheta(&self) -> f64 {
        self.vartheta
    }

    pub fn g_offset(&self) -> f64 {
        self.g_offset
    }

    /// Sum of the `k − 1` largest magnitudes among `x_j, j ≠ i`, and the
    /// `k`-th largest (0 if there are fewer than `k` others).
    fn topk_excluding(&self, x: &[f64], i: usize) -> (f64, f64) {
        let mut mags: Vec<f64> = x
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| v.abs())
            .collect();
        let head = self.k - 1;
        if head >= mags.len() {
            return (sorted_sum(&mut mags), 0.0);
        }
        mags.select_nth_unstable_by(head, |a, b| b.total_cmp(a));
        let vk = mags[head];
        (sorted_sum(&mut mags[..head]), vk)
    }
}

fn sorted_sum(v: &mut [f64]) -> f64 {
    v.sort_unstable_by(|a, b| b.total_cmp(a));
    v.iter().sum()
}

/// Sum of the `k` largest magnitudes of `x`.
pub fn topk_magnitude_sum(x: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > x.len() {
        return Err(Error::BadK { k, n: x.len() });
    }
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    if k < mags.len() {
        mags.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    }
    Ok(sorted_sum(&mut mags[..k]))
}

/// Indices of the `k` largest magnitudes, ties broken toward the smallest
/// index.
fn topk_indices(x: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}

/// Element of `∂ Σ_{j≤k}|x_[j]|`: `sign(x_i)` on the top-k set and 0
/// elsewhere (including zero entries).
pub fn subgrad_topk(x: &[f64], k: usize) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in topk_indices(x, k.min(x.len())) {
        if x[i] != 0.0 {
            out[i] = x[i].signum();
        }
    }
    out
}

/// Exact global minimizer of the PCD subproblem along coordinate `i`.
pub fn sr_pcd_step(
    problem: &SparseRecoveryProblem,
    x: &[f64],
    cache: &SparseRecoveryCache,
    i: usize,
    lambda: f64,
    theta: f64,
) -> Result<f64> {
    let a = problem.curvature[i] + theta;
    let b = problem.g.column_dot(i, &cache.resid);
    let gamma = problem.gamma;
    let tau = gamma * lambda;
    let xi = x[i];
    let params = PcdBreakpointParams {
        a,
        b,
        gamma,
        tau,
        xi,
        c1: -problem.vartheta - xi,
        c2: problem.vartheta - xi,
    };
    let candidates = pcd_breakpoints(&params);
    let (head, vk) = problem.topk_excluding(x, i);
    let objective = |eta: f64| {
        let u = (xi + eta).abs();
        0.5 * a * eta * eta + b * eta + gamma * u - tau * (head + vk.max(u))
    };
    let mut eta = argmin_over_candidates(&candidates, objective)?.0;
    // a bound step ±ϑ − x_i can round to just outside the box
    while (xi + eta).abs() > problem.vartheta {
        eta = if xi + eta > 0.0 { eta.next_down() } else { eta.next_up() };
    }
    Ok(eta)
}

impl FractionalProblem for SparseRecoveryProblem {
    type Cache = SparseRecoveryCache;

    fn name(&self) -> &'static str {
        "sparse-recovery"
    }

    fn dim(&self) -> usize {
        self.g.ncols()
    }

    fn init_cache(&self, x: &[f64]) -> Result<Self::Cache> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let mut resid = self.g.matvec(x);
        resid.iter_mut().zip(&self.y).for_each(|(r, y)| *r -= y);
        Ok(SparseRecoveryCache {
            resid_sq: resid.iter().map(|r| r * r).sum(),
            resid,
            l1: x.iter().map(|v| v.abs()).sum(),
        })
    }

    fn eval_f(&self, _x: &[f64], cache: &Self::Cache) -> f64 {
        0.5 * cache.resid_sq
    }

    fn grad_f_coord(&self, _x: &[f64], cache: &Self::Cache, i: usize) -> f64 {
        self.g.column_dot(i, &cache.resid)
    }

    fn grad_f(&self, _x: &[f64], cache: &Self::Cache) -> Vec<f64> {
        self.g.matvec_t(&cache.resid)
    }

    fn coord_lipschitz(&self, i: usize) -> f64 {
        self.curvature[i]
    }

    fn h_coord(&self, _i: usize, v: f64) -> f64 {
        if v.abs() <= self.vartheta {
            self.gamma * v.abs()
        } else {
            f64::INFINITY
        }
    }

    fn eval_h(&self, x: &[f64], cache: &Self::Cache) -> f64 {
        if self.vartheta.is_finite() && x.iter().any(|v| v.abs() > self.vartheta) {
            f64::INFINITY
        } else {
            self.gamma * cache.l1
        }
    }

    fn eval_g(&self, x: &[f64], _cache: &Self::Cache) -> f64 {
        self.gamma * topk_magnitude_sum(x, self.k).expect("k validated at construction") + self.g_offset
    }

    fn eval_g_at_step(&self, x: &[f64], _cache: &Self::Cache, i: usize, eta: f64) -> f64 {
        let (head, vk) = self.topk_excluding(x, i);
        self.gamma * (head + vk.max((x[i] + eta).abs())) + self.g_offset
    }

    fn subgrad_g(&self, x: &[f64], _cache: &Self::Cache) -> Vec<f64> {
        subgrad_topk(x, self.k).into_iter().map(|s| self.gamma * s).collect()
    }

    fn subdiff_g_coord(&self, x: &[f64], _cache: &Self::Cache, i: usize) -> (f64, f64) {
        let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        mags.sort_unstable_by(|a, b| b.total_cmp(a));
        let vk = mags[self.k - 1];
        let next = mags.get(self.k).copied().unwrap_or(-1.0);
        let u = x[i].abs();
        let (lo, hi) = if u > next && u > 0.0 {
            // certainly in the top-k set
            (x[i].signum(), x[i].signum())
        } else if u < vk {
            (0.0, 0.0)
        } else if u == 0.0 {
            (-1.0, 1.0)
        } else {
            let s = x[i].signum();
            (s.min(0.0), s.max(0.0))
        };
        (self.gamma * lo, self.gamma * hi)
    }

    fn subdiff_h_coord(&self, _i: usize, v: f64) -> (f64, f64) {
        let g = self.gamma;
        let (lo, hi) = if v > 0.0 {
            (g, g)
        } else if v < 0.0 {
            (-g, -g)
        } else {
            (-g, g)
        };
        if v >= self.vartheta {
            (lo, f64::INFINITY)
        } else if v <= -self.vartheta {
            (f64::NEG_INFINITY, hi)
        } else {
            (lo, hi)
        }
    }

    fn denominator_kind(&self) -> DenominatorKind {
        DenominatorKind::Convex
    }

    fn update_cache(&self, x: &[f64], cache: &mut Self::Cache, i: usize, eta: f64) {
        let (rows, vals) = self.g.column(i);
        let mut delta = 0.0;
        for (&r, &v) in rows.iter().zip(vals) {
            let old = cache.resid[r];
            let new = old + eta * v;
            delta += (new - old) * (new + old);
            cache.resid[r] = new;
        }
        cache.resid_sq = (cache.resid_sq + delta).max(0.0);
        cache.l1 += (x[i] + eta).abs() - x[i].abs();
    }

    fn solve_pcd_1d(&self, x: &[f64], cache: &Self::Cache, i: usize, lambda: f64, theta: f64) -> Result<f64> {
        sr_pcd_step(self, x, cache, i, lambda, theta)
    }

    fn prox_h_coord(&self, _i: usize, v: f64, step: f64) -> Result<f64> {
        let shrunk = v.signum() * (v.abs() - self.gamma * step).max(0.0);
        Ok(shrunk.clamp(-self.vartheta, self.vartheta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractional::{evaluate_objective, make_state};
    use crate::scalar::grid_oracle_1d;

    fn toy() -> SparseRecoveryProblem {
        SparseRecoveryProblem::new(CscMatrix::identity(2), vec![0.0, 0.0], 1.0, 1).unwrap()
    }

    #[test]
    fn objective_by_substitution() {
        let p = toy();
        let s = make_state(&p, &[1.0, 0.0]).unwrap();
        assert_eq!(s.objective, 1.5);
    }

    #[test]
    fn zero_start_needs_offset() {
        let p = toy();
        assert!(matches!(make_state(&p, &[0.0, 0.0]), Err(Error::NonPositiveDenominator(_))));
        let p = toy().with_g_offset(0.5).unwrap();
        let s = make_state(&p, &[0.0, 0.0]).unwrap();
        assert_eq!(s.objective, 0.0);
    }

    #[test]
    fn box_violation_is_infeasible() {
        let p = toy().with_vartheta(0.5).unwrap();
        assert!(matches!(make_state(&p, &[1.0, 0.0]), Err(Error::InfeasibleState)));
    }

    #[test]
    fn topk_examples() {
        assert_eq!(topk_magnitude_sum(&[1.0, -3.0, 2.0], 2).unwrap(), 5.0);
        assert_eq!(topk_magnitude_sum(&[1.0, -3.0, 2.0], 3).unwrap(), 6.0);
        assert!(matches!(topk_magnitude_sum(&[1.0], 2), Err(Error::BadK { .. })));
        assert!(topk_magnitude_sum(&[1.0], 0).is_err());
    }

    #[test]
    fn subgrad_topk_examples() {
        assert_eq!(subgrad_topk(&[2.0, -1.0, 0.0], 1), vec![1.0, 0.0, 0.0]);
        assert_eq!(subgrad_topk(&[0.0, 0.0, 0.0], 2), vec![0.0, 0.0, 0.0]);
        assert_eq!(subgrad_topk(&[1.0, 1.0], 1), vec![1.0, 0.0]);
        assert_eq!(subgrad_topk(&[-1.0, 3.0, -2.0], 2), vec![0.0, 1.0, -1.0]);
    }

    #[test]
    fn subdiff_intervals() {
        let p = SparseRecoveryProblem::new(CscMatrix::identity(3), vec![0.0; 3], 2.0, 1).unwrap();
        let x = [1.0, 1.0, 0.5];
        let c = p.init_cache(&x).unwrap();
        assert_eq!(p.subdiff_g_coord(&x, &c, 0), (0.0, 2.0));
        assert_eq!(p.subdiff_g_coord(&x, &c, 2), (0.0, 0.0));
        let x = [-3.0, 1.0, 0.5];
        assert_eq!(p.subdiff_g_coord(&x, &c, 0), (-2.0, -2.0));
        assert_eq!(p.subdiff_h_coord(0, 0.0), (-2.0, 2.0));
        assert_eq!(p.subdiff_h_coord(0, -1.0), (-2.0, -2.0));
    }

    #[test]
    fn step_denominator_matches_recomputation() {
        let p = SparseRecoveryProblem::new(CscMatrix::identity(4), vec![0.0; 4], 0.5, 2).unwrap();
        let x = [0.3, -2.0, 1.0, 0.7];
        let c = p.init_cache(&x).unwrap();
        for eta in [-3.0, -0.3, 0.0, 0.4, 2.5] {
            let mut moved = x;
            moved[0] += eta;
            let direct = 0.5 * topk_magnitude_sum(&moved, 2).unwrap();
            assert!((p.eval_g_at_step(&x, &c, 0, eta) - direct).abs() < 1e-15);
        }
    }

    #[test]
    fn pcd_step_matches_grid_oracle() {
        let g = CscMatrix::from_dense(3, 3, &[1.0, 0.5, 0.0, -0.2, 2.0, 1.0, 0.3, 0.0, 1.5]).unwrap();
        let p = SparseRecoveryProblem::new(g, vec![1.0, -1.0, 0.5], 0.3, 2)
            .unwrap()
            .with_vartheta(4.0)
            .unwrap();
        let x = [0.5, -1.0, 0.2];
        let c = p.init_cache(&x).unwrap();
        let lambda = evaluate_objective(&p, &x, &c).unwrap();
        for i in 0..3 {
            let eta = sr_pcd_step(&p, &x, &c, i, lambda, 1e-6).unwrap();
            let obj = |e: f64| p.pcd_objective(&x, &c, i, e, lambda, 1e-6);
            let oracle = grid_oracle_1d(obj, -4.0 - x[i], 4.0 - x[i], 2001, 3);
            assert!(obj(eta) <= obj(oracle) + 1e-9, "i={i}: {} vs {}", obj(eta), obj(oracle));
        }
    }

    #[test]
    fn bound_steps_stay_inside_the_box() {
        // y far above the box pushes every coordinate onto ϑ
        let p = SparseRecoveryProblem::new(CscMatrix::identity(2), vec![50.0, 50.0], 0.01, 1)
            .unwrap()
            .with_vartheta(0.7)
            .unwrap();
        for k in 1..200 {
            let x = [-0.7 + 1.4 * k as f64 / 200.0, 0.3];
            let c = p.init_cache(&x).unwrap();
            let lambda = evaluate_objective(&p, &x, &c).unwrap();
            let eta = sr_pcd_step(&p, &x, &c, 0, lambda, 1e-6).unwrap();
            assert!((x[0] + eta).abs() <= 0.7, "x0 = {}, eta = {eta}", x[0]);
            assert!(p.pcd_objective(&x, &c, 0, eta, lambda, 1e-6).is_finite());
        }
    }

    #[test]
    fn row_norm_curvature_requires_square() {
        let g = CscMatrix::from_dense(2, 3, &[1.0; 6]).unwrap();
        let p = SparseRecoveryProblem::new(g, vec![0.0; 2], 1.0, 1).unwrap();
        assert!(p.with_curvature(Curvature::RowNorms).is_err());
        let g = CscMatrix::from_dense(2, 2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        let p = SparseRecoveryProblem::new(g, vec![0.0; 2], 1.0, 1)
            .unwrap()
            .with_curvature(Curvature::RowNorms)
            .unwrap();
        assert_eq!((p.coord_lipschitz(0), p.coord_lipschitz(1)), (5.0, 1.0));
    }
}
