use crate::data::CscMatrix;
use crate::error::{Error, Result};
use crate::fractional::{DenominatorKind, FractionalProblem};
use crate::scalar::{argmin_over_candidates, ratio_stationarity_coeffs, solve_fcd_ratio_1d, solve_quartic, RatioCoeffs, QUARTIC_TOL};

/// `min (‖x‖² + γ₃) / (‖Gx‖₄² + γ₄)`.
#[derive(Debug, Clone)]
pub struct EigL4Problem {
    g: CscMatrix,
    gamma3: f64,
    gamma4: f64,
    kind: DenominatorKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigL4Cache {
    /// `Gx`.
    pub z: Vec<f64>,
    pub xsq: f64,
    /// `Σ z_j⁴`.
    pub z4: f64,
}

impl EigL4Problem {
    pub fn new(g: CscMatrix) -> Self {
        Self {
            g,
            gamma3: 0.0,
            gamma4: 0.0,
            kind: DenominatorKind::Convex,
        }
    }

    pub fn with_offsets(mut self, gamma3: f64, gamma4: f64) -> Result<Self> {
        if !(gamma3 >= 0.0 && gamma4 >= 0.0 && gamma3.is_finite() && gamma4.is_finite()) {
            return Err(Error::InvalidConfig(format!("offsets must be >= 0, got {gamma3}, {gamma4}")));
        }
        self.gamma3 = gamma3;
        self.gamma4 = gamma4;
        Ok(self)
    }

    /// The denominator is convex and its negation is weakly convex, so both
    /// analyses can be argued; the caller picks which one to declare.
    pub fn with_denominator_kind(mut self, kind: DenominatorKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn matrix(&self) -> &CscMatrix {
        &self.g
    }

    pub fn gamma3(&self) -> f64 {
        self.gamma3
    }

    pub fn gamma4(&self) -> f64 {
        self.gamma4
    }

    /// `Gᵀ z³` at the cached `z`.
    pub fn gt_z_cubed(&self, cache: &EigL4Cache) -> Vec<f64> {
        let z3: Vec<f64> = cache.z.iter().map(|v| v * v * v).collect();
        self.g.matvec_t(&z3)
    }
}

/// Coefficients `[b4, b3, b2, b1, b0]` of `Σ_j (z_j + η c_j)⁴` for a sparse
/// column `c`; `b0` is the cached `Σ z_j⁴`.
pub fn l4_quartic_radicand(z: &[f64], col: (&[usize], &[f64]), z4: f64) -> [f64; 5] {
    let (mut b4, mut b3, mut b2, mut b1) = (0.0, 0.0, 0.0, 0.0);
    for (&r, &c) in col.0.iter().zip(col.1) {
        let zr = z[r];
        let c2 = c * c;
        b4 += c2 * c2;
        b3 += zr * c2 * c;
        b2 += zr * zr * c2;
        b1 += zr * zr * zr * c;
    }
    [b4, 4.0 * b3, 6.0 * b2, 4.0 * b1, z4]
}

/// Exact global minimizer of the FCD ratio along coordinate `i`.
pub fn l4_fcd_step(problem: &EigL4Problem, x: &[f64], cache: &EigL4Cache, i: usize, theta: f64) -> Result<f64> {
    if !(cache.z4 > 0.0) && problem.gamma4 == 0.0 {
        return Err(Error::NonPositiveDenominator(0.0));
    }
    let [b4, b3, b2, b1, b0] = l4_quartic_radicand(&cache.z, problem.g.column(i), cache.z4);
    let rc = RatioCoeffs {
        a2: (2.0 + theta) / 2.0,
        a1: 2.0 * x[i],
        a0: cache.xsq + problem.gamma3,
        b4,
        b3,
        b2,
        b1,
        b0,
    };
    if problem.gamma4 == 0.0 {
        return Ok(solve_fcd_ratio_1d(&rc, QUARTIC_TOL)?.0);
    }
    offset_ratio_min(&rc, problem.gamma4, x[i])
}

const GOLDEN_ITERS: usize = 200;

/// `min N(η) / (sqrt(D(η)) + γ₄)` by golden-section search on the brackets
/// delimited by the stationary points of the offset-free ratio.
fn offset_ratio_min(rc: &RatioCoeffs, gamma4: f64, xi: f64) -> Result<f64> {
    let obj = |eta: f64| {
        let d = rc.radicand(eta).max(0.0);
        rc.numerator(eta) / (d.sqrt() + gamma4)
    };
    let mut anchors = match solve_quartic(&ratio_stationarity_coeffs(rc), QUARTIC_TOL) {
        Ok(r) => r,
        Err(Error::DegenerateAllZero) => Vec::new(),
        Err(e) => return Err(e),
    };
    let reach = 10.0 * anchors.iter().fold(xi.abs().max(1.0), |m, r| m.max(r.abs()));
    anchors.extend([0.0, -reach, reach]);
    anchors.sort_by(f64::total_cmp);
    anchors.dedup();
    let mut candidates = anchors.clone();
    for w in anchors.windows(2) {
        candidates.push(golden_section(&obj, w[0], w[1]));
    }
    Ok(argmin_over_candidates(&candidates, obj)?.0)
}

fn golden_section<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - r * (hi - lo);
    let mut b = lo + r * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..GOLDEN_ITERS {
        if hi - lo <= 1e-14 * hi.abs().max(lo.abs()).max(1.0) {
            break;
        }
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - r * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + r * (hi - lo);
            fb = f(b);
        }
    }
    if fa <= fb {
        a
    } else {
        b
    }
}

/// `x / ‖x‖`, the unit-norm representative of the scale-invariant solution.
pub fn recover_unit_solution(x: &[f64]) -> Result<Vec<f64>> {
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroVector);
    }
    Ok(x.iter().map(|v| v / norm).collect())
}

impl FractionalProblem for EigL4Problem {
    type Cache = EigL4Cache;

    fn name(&self) -> &'static str {
        "eig-l4"
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
        let z = self.g.matvec(x);
        Ok(EigL4Cache {
            z4: z.iter().map(|v| v.powi(4)).sum(),
            z,
            xsq: x.iter().map(|v| v * v).sum(),
        })
    }

    fn eval_f(&self, _x: &[f64], cache: &Self::Cache) -> f64 {
        cache.xsq + self.gamma3
    }

    fn grad_f_coord(&self, x: &[f64], _cache: &Self::Cache, i: usize) -> f64 {
        2.0 * x[i]
    }

    fn grad_f(&self, x: &[f64], _cache: &Self::Cache) -> Vec<f64> {
        x.iter().map(|v| 2.0 * v).collect()
    }

    fn coord_lipschitz(&self, _i: usize) -> f64 {
        2.0
    }

    fn h_coord(&self, _i: usize, _v: f64) -> f64 {
        0.0
    }

    fn eval_h(&self, _x: &[f64], _cache: &Self::Cache) -> f64 {
        0.0
    }

    fn eval_h_at_step(&self, _x: &[f64], _i: usize, _eta: f64) -> f64 {
        0.0
    }

    fn eval_g(&self, _x: &[f64], cache: &Self::Cache) -> f64 {
        cache.z4.sqrt() + self.gamma4
    }

    fn eval_g_at_step(&self, _x: &[f64], cache: &Self::Cache, i: usize, eta: f64) -> f64 {
        let (rows, vals) = self.g.column(i);
        let mut z4 = cache.z4;
        for (&r, &v) in rows.iter().zip(vals) {
            let old = cache.z[r];
            z4 += (old + eta * v).powi(4) - old.powi(4);
        }
        z4.max(0.0).sqrt() + self.gamma4
    }

    /// `∇‖Gx‖₄² = 2 Gᵀz³ / sqrt(Σz⁴)`; zero where `z = 0`.
    fn subgrad_g(&self, _x: &[f64], cache: &Self::Cache) -> Vec<f64> {
        if cache.z4 <= 0.0 {
            return vec![0.0; self.dim()];
        }
        let scale = 2.0 / cache.z4.sqrt();
        self.gt_z_cubed(cache).into_iter().map(|v| scale * v).collect()
    }

    fn subdiff_g_coord(&self, _x: &[f64], cache: &Self::Cache, i: usize) -> (f64, f64) {
        if cache.z4 <= 0.0 {
            return (0.0, 0.0);
        }
        let (rows, vals) = self.g.column(i);
        let d: f64 = rows.iter().zip(vals).map(|(&r, &v)| v * cache.z[r].powi(3)).sum();
        let v = 2.0 * d / cache.z4.sqrt();
        (v, v)
    }

    fn subdiff_h_coord(&self, _i: usize, _v: f64) -> (f64, f64) {
        (0.0, 0.0)
    }

    fn denominator_kind(&self) -> DenominatorKind {
        self.kind
    }

    fn update_cache(&self, x: &[f64], cache: &mut Self::Cache, i: usize, eta: f64) {
        let (rows, vals) = self.g.column(i);
        for (&r, &v) in rows.iter().zip(vals) {
            let old = cache.z[r];
            let new = old + eta * v;
            cache.z4 += new.powi(4) - old.powi(4);
            cache.z[r] = new;
        }
        cache.z4 = cache.z4.max(0.0);
        cache.xsq = (cache.xsq + eta * (2.0 * x[i] + eta)).max(0.0);
    }

    fn solve_fcd_1d(&self, x: &[f64], cache: &Self::Cache, i: usize, theta: f64) -> Result<f64> {
        l4_fcd_step(self, x, cache, i, theta)
    }

    fn prox_h_coord(&self, _i: usize, v: f64, _step: f64) -> Result<f64> {
        Ok(v)
    }
}
