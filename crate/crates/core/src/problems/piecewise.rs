use crate::error::{Error, Result};
use crate::fractional::{DenominatorKind, FractionalProblem};
use crate::scalar::{argmin_over_candidates, solve_quartic, QuarticCoeffs, QUARTIC_TOL};

/// Points this close (relatively) to a kink get the full subdifferential.
const KINK_RTOL: f64 = 1e-12;

/// `F(x) = Σ(x_i − u_i)² / (Σ|a_i x_i + b_i| + d)` with `d > 0`.
///
/// A small convex-denominator problem whose subproblems have closed-form
/// candidate sets; [`PiecewiseRatio::kinked_1d`] is
/// `(x+2)² / (|3x+2| + 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseRatio {
    u: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    d: f64,
}

impl PiecewiseRatio {
    pub fn new(u: Vec<f64>, a: Vec<f64>, b: Vec<f64>, d: f64) -> Result<Self> {
        let n = u.len();
        if n == 0 || a.len() != n || b.len() != n {
            return Err(Error::BadDimensions(format!("u/a/b lengths {}, {}, {}", n, a.len(), b.len())));
        }
        if !(d > 0.0 && d.is_finite()) {
            return Err(Error::InvalidConfig(format!("d must be > 0, got {d}")));
        }
        Ok(Self { u, a, b, d })
    }

    pub fn kinked_1d() -> Self {
        Self::new(vec![-2.0], vec![3.0], vec![2.0], 1.0).expect("valid constants")
    }

    fn term(&self, i: usize, v: f64) -> f64 {
        (self.a[i] * v + self.b[i]).abs()
    }

    fn kink(&self, x: &[f64], i: usize) -> Option<f64> {
        (self.a[i] != 0.0).then(|| -self.b[i] / self.a[i] - x[i])
    }
}

impl FractionalProblem for PiecewiseRatio {
    type Cache = ();

    fn name(&self) -> &'static str {
        "piecewise-ratio"
    }

    fn dim(&self) -> usize {
        self.u.len()
    }

    fn init_cache(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn eval_f(&self, x: &[f64], _: &()) -> f64 {
        x.iter().zip(&self.u).map(|(v, u)| (v - u) * (v - u)).sum()
    }

    fn grad_f_coord(&self, x: &[f64], _: &(), i: usize) -> f64 {
        2.0 * (x[i] - self.u[i])
    }

    fn coord_lipschitz(&self, _i: usize) -> f64 {
        2.0
    }

    fn h_coord(&self, _i: usize, _v: f64) -> f64 {
        0.0
    }

    fn eval_g(&self, x: &[f64], _: &()) -> f64 {
        x.iter().enumerate().map(|(i, &v)| self.term(i, v)).sum::<f64>() + self.d
    }

    fn eval_g_at_step(&self, x: &[f64], c: &(), i: usize, eta: f64) -> f64 {
        self.eval_g(x, c) - self.term(i, x[i]) + self.term(i, x[i] + eta)
    }

    fn subgrad_g(&self, x: &[f64], _: &()) -> Vec<f64> {
        (0..self.dim())
            .map(|i| {
                let s = self.a[i] * x[i] + self.b[i];
                if s == 0.0 {
                    0.0
                } else {
                    self.a[i] * s.signum()
                }
            })
            .collect()
    }

    fn subdiff_g_coord(&self, x: &[f64], _: &(), i: usize) -> (f64, f64) {
        let s = self.a[i] * x[i] + self.b[i];
        if s.abs() <= KINK_RTOL * ((self.a[i] * x[i]).abs() + self.b[i].abs()) {
            (-self.a[i].abs(), self.a[i].abs())
        } else {
            let v = self.a[i] * s.signum();
            (v, v)
        }
    }

    fn subdiff_h_coord(&self, _i: usize, _v: f64) -> (f64, f64) {
        (0.0, 0.0)
    }

    fn denominator_kind(&self) -> DenominatorKind {
        DenominatorKind::Convex
    }

    fn update_cache(&self, _x: &[f64], _cache: &mut (), _i: usize, _eta: f64) {}

    /// Candidates: the kink and the stationary point of each linear branch.
    fn solve_pcd_1d(&self, x: &[f64], c: &(), i: usize, lambda: f64, theta: f64) -> Result<f64> {
        let grad = self.grad_f_coord(x, c, i);
        let mut candidates = vec![0.0];
        candidates.extend(self.kink(x, i));
        for s in [1.0, -1.0] {
            candidates.push((lambda * s * self.a[i] - grad) / (2.0 + theta));
        }
        Ok(argmin_over_candidates(&candidates, |e| self.pcd_objective(x, c, i, e, lambda, theta))?.0)
    }

    /// On a branch `g = pη + q` the ratio `(Aη² + Bη + C)/(pη + q)` is
    /// stationary where `Apη² + 2Aqη + (Bq − Cp) = 0`.
    fn solve_fcd_1d(&self, x: &[f64], c: &(), i: usize, theta: f64) -> Result<f64> {
        let big_a = (2.0 + theta) / 2.0;
        let big_b = self.grad_f_coord(x, c, i);
        let big_c = self.eval_f(x, c);
        let rest = self.eval_g(x, c) - self.term(i, x[i]);
        let mut candidates = vec![0.0];
        candidates.extend(self.kink(x, i));
        for s in [1.0, -1.0] {
            let p = s * self.a[i];
            let q = s * (self.a[i] * x[i] + self.b[i]) + rest;
            let quad = QuarticCoeffs::from_array([0.0, 0.0, big_a * p, 2.0 * big_a * q, big_b * q - big_c * p]);
            match solve_quartic(&quad, QUARTIC_TOL) {
                Ok(r) => candidates.extend(r),
                Err(Error::DegenerateAllZero) => {}
                Err(e) => return Err(e),
            }
        }
        Ok(argmin_over_candidates(&candidates, |e| self.fcd_objective(x, c, i, e, theta))?.0)
    }

    fn prox_h_coord(&self, _i: usize, v: f64, _step: f64) -> Result<f64> {
        Ok(v)
    }
}
