//! Point classification (C, D, FCW, PCW), coordinate residuals, the ρ-bound
//! of the ℓ4 denominator and a quasiconvexity probe.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{randn, seeded_rng, spectral_norm_sq, CscMatrix};
use crate::error::{Error, Result};
use crate::fractional::{make_state, FractionalProblem};

/// Largest dimension accepted by [`classify_point`].
pub const MAX_CLASSIFY_DIM: usize = 4;

/// Step of the one-sided difference quotient.
pub const DIRECTIONAL_STEP: f64 = 1e-7;

/// Above this size [`rho_bound_l4`] uses iterative eigenvalue estimates.
pub const DENSE_EIGEN_MAX: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witnesses {
    /// Coordinate whose subdifferential interval misses 0.
    pub c: Option<usize>,
    /// Direction with a negative directional derivative.
    pub d: Option<Vec<f64>>,
    /// `(i, η̄)` with a nonzero FCD step.
    pub fcw: Option<(usize, f64)>,
    /// `(i, η̄)` with a nonzero PCD step.
    pub pcw: Option<(usize, f64)>,
}

/// `is_d` means "not refuted" by the direction sweep. `is_fcw` / `is_pcw`
/// are `None` when the problem has no solver for that subproblem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointClassification {
    pub is_c: bool,
    pub is_d: bool,
    pub is_fcw: Option<bool>,
    pub is_pcw: Option<bool>,
    pub witnesses: Witnesses,
}

impl PointClassification {
    /// Implications FCW ⇒ D, PCW ⇒ D and D ⇒ C on this classification.
    pub fn hierarchy_consistent(&self) -> bool {
        let coordinatewise = self.is_fcw == Some(true) || self.is_pcw == Some(true);
        (!coordinatewise || self.is_d) && (!self.is_d || self.is_c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    /// `(1/n) Σ |P_i(x)|`.
    pub r: f64,
    /// `|P_i(x)|`, the magnitude of each exact coordinate step.
    pub per_coord: Vec<f64>,
    /// `(1/n) Σ η̄_i²` of the FCD subproblems, if available.
    pub eps_fcw: Option<f64>,
    /// `(1/n) Σ η̄_i²` of the PCD subproblems, if available.
    pub eps_pcw: Option<f64>,
}

/// JSON form of a classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub point: Vec<f64>,
    pub flags: PointClassification,
    pub residuals: ResidualReport,
}

fn optional<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UnsupportedVariant { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Unit directions used by the D-point sweep.
pub fn sweep_directions(n: usize) -> Vec<Vec<f64>> {
    match n {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..720)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 720.0;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        3 => {
            let golden = PI * (3.0 - 5f64.sqrt());
            let m = 2000;
            (0..m)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    vec![r * a.cos(), r * a.sin(), z]
                })
                .collect()
        }
        _ => {
            let mut rng = seeded_rng(0x5eed);
            let mut out: Vec<Vec<f64>> = (0..n).flat_map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                let mut m = e.clone();
                m[i] = -1.0;
                [e, m]
            }).collect();
            while out.len() < 2000 {
                let v = randn(n, &mut rng);
                let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
                if norm > 0.0 {
                    out.push(v.into_iter().map(|a| a / norm).collect());
                }
            }
            out
        }
    }
}

/// Classifies `x` against the four stationarity notions.
///
/// * C: `0 ∈ ∇_i f + ∂h_i − F·∂g_i` for every coordinate, using interval
///   subdifferentials (exact when `∂g` is a product of intervals).
/// * D: one-sided difference quotients along [`sweep_directions`] are all
///   `≥ −tol`.
/// * FCW / PCW: every exact coordinate step has `|η̄| ≤ tol` (exact ties are
///   already resolved toward `η = 0` by the solvers).
pub fn classify_point<P: FractionalProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    theta: f64,
    tol: f64,
) -> Result<PointClassification> {
    let n = problem.dim();
    if n > MAX_CLASSIFY_DIM {
        return Err(Error::DimensionTooLarge {
            n,
            max: MAX_CLASSIFY_DIM,
        });
    }
    let state = make_state(problem, x)?;
    let (f, cache) = (state.objective, &state.cache);

    let mut c_witness = None;
    for i in 0..n {
        let grad = problem.grad_f_coord(x, cache, i);
        let (hl, hh) = problem.subdiff_h_coord(i, x[i]);
        let (gl, gh) = problem.subdiff_g_coord(x, cache, i);
        let lo = grad + hl - f * gh;
        let hi = grad + hh - f * gl;
        let scale = 1.0 + grad.abs() + f * gl.abs().max(gh.abs());
        if lo > tol * scale || hi < -tol * scale {
            c_witness = Some(i);
            break;
        }
    }

    let mut d_witness = None;
    for dir in sweep_directions(n) {
        let moved: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a + DIRECTIONAL_STEP * d).collect();
        let f_moved = match make_state(problem, &moved) {
            Ok(s) => s.objective,
            Err(Error::InfeasibleState) => continue,
            Err(e) => return Err(e),
        };
        if (f_moved - f) / DIRECTIONAL_STEP < -tol {
            d_witness = Some(dir);
            break;
        }
    }

    let mut fcw = Some(true);
    let mut fcw_witness = None;
    let mut pcw = Some(true);
    let mut pcw_witness = None;
    for i in 0..n {
        if fcw.is_some() && fcw_witness.is_none() {
            match optional(problem.solve_fcd_1d(x, cache, i, theta))? {
                None => fcw = None,
                Some(eta) => {
                    if eta.abs() > tol {
                        fcw = Some(false);
                        fcw_witness = Some((i, eta));
                    }
                }
            }
        }
        if pcw.is_some() && pcw_witness.is_none() {
            match optional(problem.solve_pcd_1d(x, cache, i, f, theta))? {
                None => pcw = None,
                Some(eta) => {
                    if eta.abs() > tol {
                        pcw = Some(false);
                        pcw_witness = Some((i, eta));
                    }
                }
            }
        }
    }

    Ok(PointClassification {
        is_c: c_witness.is_none(),
        is_d: d_witness.is_none(),
        is_fcw: fcw,
        is_pcw: pcw,
        witnesses: Witnesses {
            c: c_witness,
            d: d_witness,
            fcw: fcw_witness,
            pcw: pcw_witness,
        },
    })
}

/// Solves every coordinate subproblem at `x` without moving. `per_coord`
/// and `r` come from the PCD steps when available, otherwise FCD.
pub fn pcw_residual<P: FractionalProblem + ?Sized>(problem: &P, x: &[f64], theta: f64) -> Result<ResidualReport> {
    let state = make_state(problem, x)?;
    let n = problem.dim();
    let mut pcd = Some(Vec::with_capacity(n));
    let mut fcd = Some(Vec::with_capacity(n));
    for i in 0..n {
        if let Some(v) = pcd.as_mut() {
            match optional(problem.solve_pcd_1d(x, &state.cache, i, state.objective, theta))? {
                Some(eta) => v.push(eta),
                None => pcd = None,
            }
        }
        if let Some(v) = fcd.as_mut() {
            match optional(problem.solve_fcd_1d(x, &state.cache, i, theta))? {
                Some(eta) => v.push(eta),
                None => fcd = None,
            }
        }
    }
    let mean_sq = |v: &Vec<f64>| v.iter().map(|e| e * e).sum::<f64>() / n as f64;
    let steps = pcd.as_ref().or(fcd.as_ref()).ok_or(Error::UnsupportedVariant {
        method: "FCD or PCD",
        problem: problem.name(),
    })?;
    let per_coord: Vec<f64> = steps.iter().map(|e| e.abs()).collect();
    Ok(ResidualReport {
        r: per_coord.iter().sum::<f64>() / n as f64,
        eps_fcw: fcd.as_ref().map(mean_sq),
        eps_pcw: pcd.as_ref().map(mean_sq),
        per_coord,
    })
}

/// Classification plus residuals, ready for JSON output.
pub fn classification_report<P: FractionalProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    theta: f64,
    tol: f64,
) -> Result<ClassificationReport> {
    Ok(ClassificationReport {
        point: x.to_vec(),
        flags: classify_point(problem, x, theta, tol)?,
        residuals: pcw_residual(problem, x, theta)?,
    })
}

fn gram_extreme_eigenvalues(g: &CscMatrix) -> Result<(f64, f64)> {
    let n = g.ncols();
    if n <= DENSE_EIGEN_MAX {
        let dense = DMatrix::from_row_slice(g.nrows(), n, &g.to_dense());
        let gram = dense.transpose() * &dense;
        let eig = SymmetricEigen::new(gram).eigenvalues;
        let lmax = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lmin = eig.iter().copied().fold(f64::INFINITY, f64::min);
        return Ok((lmin, lmax));
    }
    let tol = 1e-12;
    let lmax = spectral_norm_sq(g, 10_000, tol)? / (1.0 + 10.0 * tol);
    // power iteration on λmax·I − GᵀG yields λmax − λmin
    let mut v: Vec<f64> = (0..n).map(|j| 1.0 + ((j as f64 + 1.0) * 0.754_877_666).fract()).collect();
    let mut shifted = 0.0;
    for _ in 0..10_000 {
        let gv = g.matvec_t(&g.matvec(&v));
        let w: Vec<f64> = v.iter().zip(&gv).map(|(a, b)| lmax * a - b).collect();
        let norm = w.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm == 0.0 {
            break;
        }
        let next: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / v.iter().map(|a| a * a).sum::<f64>();
        v = w.into_iter().map(|a| a / norm).collect();
        let done = (next - shifted).abs() <= tol * lmax;
        shifted = next;
        if done {
            break;
        }
    }
    Ok((lmax - shifted, lmax))
}

/// `ρ = 6m·max_i (GGᵀ)_{ii}·λmax(GᵀG)/λmin(GᵀG)`, a weak-convexity modulus
/// of `−‖Gx‖₄²`.
pub fn rho_bound_l4(g: &CscMatrix) -> Result<f64> {
    if g.nnz() == 0 {
        return Err(Error::ZeroMatrix);
    }
    let (lmin, lmax) = gram_extreme_eigenvalues(g)?;
    if lmin <= 1e-12 * lmax {
        return Err(Error::RankDeficient {
            lambda_min: lmin,
            lambda_max: lmax,
        });
    }
    let row_max = g.row_sq_norms().into_iter().fold(0.0, f64::max);
    Ok(6.0 * g.nrows() as f64 * row_max * lmax / lmin)
}

/// Slack of `−g(x) ≤ −g(y) + ⟨−∇g(x), x − y⟩ + (ρ/2)‖x − y‖²`; non-negative
/// when the inequality holds.
pub fn weak_convexity_slack<P: FractionalProblem + ?Sized>(problem: &P, x: &[f64], y: &[f64], rho: f64) -> Result<f64> {
    let cx = problem.init_cache(x)?;
    let cy = problem.init_cache(y)?;
    let gx = problem.eval_g(x, &cx);
    let gy = problem.eval_g(y, &cy);
    let sub = problem.subgrad_g(x, &cx);
    let inner: f64 = sub.iter().zip(x.iter().zip(y)).map(|(s, (a, b))| s * (a - b)).sum();
    let dist_sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((-gy - inner + 0.5 * rho * dist_sq) - (-gx))
}

/// `F(αx + (1−α)y) − max(F(x), F(y))`.
pub fn quasiconvexity_violation<P: FractionalProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    y: &[f64],
    alpha: f64,
) -> Result<f64> {
    let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| alpha * a + (1.0 - alpha) * b).collect();
    let fx = make_state(problem, x)?.objective;
    let fy = make_state(problem, y)?.objective;
    let fm = make_state(problem, &mid)?.objective;
    Ok(fm - fx.max(fy))
}

/// Largest quasiconvexity violation over random Gaussian `(x, y)` and
/// uniform `α`; 0 if no sample violates. Samples where `F` is undefined are
/// skipped.
pub fn quasiconvexity_probe<P: FractionalProblem + ?Sized>(problem: &P, n_samples: usize, seed: u64) -> f64 {
    let mut rng = seeded_rng(seed);
    let n = problem.dim();
    let mut worst = 0.0f64;
    for _ in 0..n_samples {
        let x = randn(n, &mut rng);
        let y = randn(n, &mut rng);
        let alpha: f64 = rng.random();
        if let Ok(v) = quasiconvexity_violation(problem, &x, &y, alpha) {
            worst = worst.max(v);
        }
    }
    worst
}
