//! Exact global solvers for the one-dimensional subproblems.
//!
//! Two shapes of scalar problem appear in the coordinate steps:
//!
//! * a piecewise quadratic with an `|x_i + η|` kink and a top-k kink, whose
//!   minimizer lies in a finite breakpoint set ([`pcd_breakpoints`]);
//! * a ratio `p(η) = N(η) / sqrt(D(η))` with `N` quadratic and `D` quartic,
//!   whose stationary points are the real roots of a quartic
//!   ([`ratio_stationarity_coeffs`] + [`solve_quartic`]).
//!
//! [`grid_oracle_1d`] is a brute-force scan used to cross-check both.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// Radius used by [`grid_oracle_1d`] in place of an infinite bound.
pub const ORACLE_RADIUS: f64 = 1e3;

/// Default residual tolerance for [`solve_quartic`].
pub const QUARTIC_TOL: f64 = 1e-12;

/// Relative tolerance under which two objective values count as tied.
const TIE_RTOL: f64 = 1e-12;

/// Leading coefficients smaller than this (relative to the largest one) are
/// treated as zero and the degree drops.
const LEAD_RTOL: f64 = 1e-14;

/// Slightly negative quadratic discriminants within this relative band are
/// clipped to zero so that double roots survive rounding.
const DISC_RTOL: f64 = 1e-10;

/// Residual (relative to the Horner error bound) under which a point counts
/// as a multiple root. Rounded coefficients of a true multiple root leave a
/// residual at the rounding level, a close complex pair leaves a larger one.
const MULTIPLE_RTOL: f64 = 64.0 * f64::EPSILON;

const NEWTON_STEPS: usize = 5;

/// Parameters of the sparse-recovery PCD subproblem
/// `min_{c1<=η<=c2} (a/2)η² + bη + γ|x_i+η| − τ·topk(x+ηe_i)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PcdBreakpointParams {
    /// Curvature `c_i + θ`, strictly positive.
    pub a: f64,
    /// Partial gradient `∇_i f(x)`.
    pub b: f64,
    pub gamma: f64,
    /// `γ·F(x)`.
    pub tau: f64,
    /// Current coordinate value `x_i`.
    pub xi: f64,
    /// Lower step bound, possibly `-inf`.
    pub c1: f64,
    /// Upper step bound, possibly `+inf`.
    pub c2: f64,
}

/// `c4 η⁴ + c3 η³ + c2 η² + c1 η + c0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuarticCoeffs {
    pub c4: f64,
    pub c3: f64,
    pub c2: f64,
    pub c1: f64,
    pub c0: f64,
}

impl QuarticCoeffs {
    pub fn from_array(c: [f64; 5]) -> Self {
        Self {
            c4: c[0],
            c3: c[1],
            c2: c[2],
            c1: c[3],
            c0: c[4],
        }
    }

    /// Coefficients from the highest degree down.
    pub fn to_array(&self) -> [f64; 5] {
        [self.c4, self.c3, self.c2, self.c1, self.c0]
    }

    pub fn eval(&self, eta: f64) -> f64 {
        horner(&self.to_array(), eta)
    }
}

/// `p(η) = (a2 η² + a1 η + a0) / sqrt(b4 η⁴ + b3 η³ + b2 η² + b1 η + b0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioCoeffs {
    pub a2: f64,
    pub a1: f64,
    pub a0: f64,
    pub b4: f64,
    pub b3: f64,
    pub b2: f64,
    pub b1: f64,
    pub b0: f64,
}

impl RatioCoeffs {
    pub fn numerator(&self, eta: f64) -> f64 {
        horner(&[self.a2, self.a1, self.a0], eta)
    }

    pub fn radicand(&self, eta: f64) -> f64 {
        horner(&[self.b4, self.b3, self.b2, self.b1, self.b0], eta)
    }

    /// Value of `p(η)`; `+inf` where the radicand is not positive.
    pub fn eval(&self, eta: f64) -> f64 {
        let d = self.radicand(eta);
        if d > 0.0 {
            self.numerator(eta) / d.sqrt()
        } else {
            f64::INFINITY
        }
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, &c| acc * x + c)
}

/// Value and first derivative of a polynomial (highest degree first).
fn horner_with_derivative(coeffs: &[f64], x: f64) -> (f64, f64) {
    let mut p = 0.0;
    let mut dp = 0.0;
    for &c in coeffs {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

fn derivative(coeffs: &[f64]) -> Vec<f64> {
    let deg = coeffs.len().saturating_sub(1);
    coeffs[..deg]
        .iter()
        .enumerate()
        .map(|(k, &c)| c * (deg - k) as f64)
        .collect()
}

/// Candidate set for the sparse-recovery PCD subproblem: the five
/// unconstrained breakpoints clamped into `[c1, c2]`, plus the finite bounds.
/// Returned sorted and without duplicates.
pub fn pcd_breakpoints(params: &PcdBreakpointParams) -> Vec<f64> {
    let PcdBreakpointParams {
        a,
        b,
        gamma,
        tau,
        xi,
        c1,
        c2,
    } = *params;
    let unconstrained = [
        -xi,
        (tau - gamma - b) / a,
        (gamma - tau - b) / a,
        (-gamma - b) / a,
        (gamma - b) / a,
    ];
    let mut out: Vec<f64> = unconstrained
        .iter()
        .map(|&v| v.max(c1).min(c2))
        .chain([c1, c2])
        .filter(|v| v.is_finite())
        .collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Pick the candidate with the lowest objective; ties go to the smallest |η|.
pub fn argmin_over_candidates<F>(candidates: &[f64], objective: F) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    let mut best: Option<(f64, f64)> = None;
    for &eta in candidates {
        let value = objective(eta);
        if value.is_nan() {
            continue;
        }
        best = match best {
            None => Some((eta, value)),
            Some((be, bv)) => {
                let tie = value == bv
                    || (value.is_finite()
                        && bv.is_finite()
                        && (value - bv).abs() <= TIE_RTOL * bv.abs().max(value.abs()));
                if (tie && eta.abs() < be.abs()) || (!tie && value < bv) {
                    Some((eta, value))
                } else {
                    Some((be, bv))
                }
            }
        };
    }
    best.ok_or(Error::EmptyCandidates)
}

fn times<T: Copy + Add<Output = T>>(k: u32, x: T) -> T {
    (1..k).fold(x, |acc, _| acc + x)
}

/// Coefficients `[c4, c3, c2, c1, c0]` of `2N'(η)D(η) − N(η)D'(η)` for
/// `N = [a2, a1, a0]` and `D = [b4, b3, b2, b1, b0]`. The η⁵ terms cancel
/// identically (`4 a2 b4` on both sides), so the result is a quartic.
///
/// Generic so that tests can run it in exact rational arithmetic.
pub fn stationarity_poly<T>(a: [T; 3], b: [T; 5]) -> [T; 5]
where
    T: Copy + Add<Output = T> + Sub<Output = T> + Mul<Output = T>,
{
    let [a2, a1, a0] = a;
    let [b4, b3, b2, b1, b0] = b;
    [
        a2 * b3 - times(2, a1 * b4),
        times(2, a2 * b2) - a1 * b3 - times(4, a0 * b4),
        times(3, a2 * b1) - times(3, a0 * b3),
        times(4, a2 * b0) + a1 * b1 - times(2, a0 * b2),
        times(2, a1 * b0) - a0 * b1,
    ]
}

/// Stationarity quartic of `p(η) = N/sqrt(D)`.
///
/// `p'(η) = (2N'D − ND') / (2 D^{3/2})`, so the sign of `p'` is the sign of
/// the returned polynomial wherever `D > 0`.
pub fn ratio_stationarity_coeffs(rc: &RatioCoeffs) -> QuarticCoeffs {
    QuarticCoeffs::from_array(stationarity_poly(
        [rc.a2, rc.a1, rc.a0],
        [rc.b4, rc.b3, rc.b2, rc.b1, rc.b0],
    ))
}

/// Global minimizer of `p(η) = N/sqrt(D)` over the real line.
///
/// Candidates are the real stationary points and `η = 0`. When the infimum
/// is only approached as `|η| → ∞` (a non-generic case: `p` tends to
/// `a2/sqrt(b4)` from above on both sides), the best finite candidate is
/// returned, which still never increases `p` relative to `η = 0`.
pub fn solve_fcd_ratio_1d(rc: &RatioCoeffs, tol: f64) -> Result<(f64, f64)> {
    if rc.a2 <= 0.0 {
        return Err(Error::UnboundedBelow(rc.a2));
    }
    let quartic = ratio_stationarity_coeffs(rc);
    let mut candidates = match solve_quartic(&quartic, tol) {
        Ok(roots) => roots,
        Err(Error::DegenerateAllZero) => Vec::new(),
        Err(e) => return Err(e),
    };
    candidates.push(0.0);
    candidates.dedup();
    argmin_over_candidates(&candidates, |eta| rc.eval(eta))
}

/// Real roots of a polynomial of degree ≤ 4, sorted ascending, with each
/// root repeated according to its multiplicity.
///
/// The quartic case goes through Ferrari's resolvent cubic; lower degrees use
/// the closed forms. Every root is Newton-polished and kept only when
/// `|poly(r)| <= tol · Σ|c_k||r|^k`.
pub fn solve_quartic(coeffs: &QuarticCoeffs, tol: f64) -> Result<Vec<f64>> {
    let all = coeffs.to_array();
    let cmax = all.iter().fold(0.0f64, |m, c| m.max(c.abs()));
    if cmax == 0.0 {
        return Err(Error::DegenerateAllZero);
    }
    let lead = all
        .iter()
        .position(|c| c.abs() > LEAD_RTOL * cmax)
        .unwrap_or(4);
    let poly = &all[lead..];

    let scale = |r: f64| horner_bound(poly, r);
    let mut roots: Vec<f64> = closed_form_roots(poly)
        .into_iter()
        .filter(|r| r.is_finite())
        .map(|r| newton_polish(poly, r))
        .filter(|&r| horner(poly, r).abs() <= tol * scale(r))
        .collect();
    roots.sort_by(f64::total_cmp);
    let merged = merge_clusters(poly, roots, &scale);
    Ok(restore_multiplicities(poly, merged, tol))
}

fn closed_form_roots(poly: &[f64]) -> Vec<f64> {
    match poly.len() {
        0 | 1 => Vec::new(),
        2 => vec![-poly[1] / poly[0]],
        3 => solve_quadratic(poly[0], poly[1], poly[2]),
        4 => solve_cubic(poly[0], poly[1], poly[2], poly[3]),
        _ => ferrari(poly[0], poly[1], poly[2], poly[3], poly[4]),
    }
}

/// Rounding error bound of Horner evaluation, up to a factor of order eps.
fn horner_bound(poly: &[f64], r: f64) -> f64 {
    poly.iter().fold(0.0, |acc, c| acc * r.abs() + c.abs())
}

/// A multiple root can scatter into a complex cluster that the closed forms
/// drop, leaving it undercounted or missing. A root of multiplicity `m` is a
/// simple root of the `(m-1)`-th derivative at which all lower derivatives
/// vanish, so those are searched from the highest order down. Near such a
/// root `|p(r)| ≈ |p⁽ᵐ⁾(c)/m!|·|r − c|^m`, which bounds how far an accepted
/// estimate of it can stray, and estimates within that radius are replaced.
fn restore_multiplicities(poly: &[f64], mut roots: Vec<f64>, tol: f64) -> Vec<f64> {
    let degree = poly.len() - 1;
    let mut derivs = vec![poly.to_vec()];
    for _ in 0..degree {
        let next = derivative(&derivs[derivs.len() - 1]);
        derivs.push(next);
    }
    let vanishes = |d: &[f64], r: f64| horner(d, r).abs() <= MULTIPLE_RTOL * horner_bound(d, r);
    let mut multiple: Vec<(f64, usize, f64)> = Vec::new();
    for k in (1..degree).rev() {
        for c in closed_form_roots(&derivs[k]) {
            let c = newton_polish(&derivs[k], c);
            if !c.is_finite() || multiple.iter().any(|&(f, _, rad)| (f - c).abs() <= rad) {
                continue;
            }
            if (0..k).all(|j| vanishes(&derivs[j], c)) {
                let m = k + 1;
                let factorial = (1..=m).product::<usize>() as f64;
                let top = horner(&derivs[m], c).abs();
                let radius = (tol * horner_bound(poly, c) * factorial / top).powf(1.0 / m as f64);
                multiple.push((c, m, radius));
            }
        }
    }
    if multiple.is_empty() {
        return roots;
    }
    roots.retain(|&r| !multiple.iter().any(|&(c, _, rad)| (c - r).abs() <= rad));
    for (c, m, _) in multiple {
        roots.extend(std::iter::repeat_n(c, m));
    }
    roots.sort_by(f64::total_cmp);
    roots
}

fn newton_polish(poly: &[f64], mut r: f64) -> f64 {
    let (mut p, _) = horner_with_derivative(poly, r);
    for _ in 0..NEWTON_STEPS {
        let (_, dp) = horner_with_derivative(poly, r);
        if dp == 0.0 || p == 0.0 {
            break;
        }
        let next = r - p / dp;
        let (pn, _) = horner_with_derivative(poly, next);
        if !next.is_finite() || pn.abs() >= p.abs() {
            break;
        }
        r = next;
        p = pn;
    }
    r
}

/// Closed-form estimates of one root can come out several times, scattered
/// by up to `eps^{1/m}` around a root of multiplicity `m`. Adjacent estimates
/// whose midpoint is itself a root are folded into the one with the smallest
/// residual. Multiplicity is decided afterwards by [`restore_multiplicities`].
fn merge_clusters<S: Fn(f64) -> f64>(poly: &[f64], roots: Vec<f64>, scale: &S) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(roots.len());
    let mut last: Option<f64> = None;
    for r in roots {
        if let Some(lo) = last {
            let mid = 0.5 * (lo + r);
            let close = r - lo <= 1e-2 * lo.abs().max(1.0);
            if close && horner(poly, mid).abs() <= MULTIPLE_RTOL * scale(mid) {
                let kept = out.last_mut().expect("a cluster is open");
                if horner(poly, r).abs() < horner(poly, *kept).abs() {
                    *kept = r;
                }
                last = Some(r);
                continue;
            }
        }
        out.push(r);
        last = Some(r);
    }
    out
}

fn solve_quadratic(a: f64, b: f64, c: f64) -> Vec<f64> {
    let mut disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        if disc >= -DISC_RTOL * (b * b + 4.0 * (a * c).abs()) {
            disc = 0.0;
        } else {
            return Vec::new();
        }
    }
    let q = -0.5 * (b + b.signum() * disc.sqrt());
    if q == 0.0 {
        // b == 0 and disc == 0, so c == 0 as well
        return vec![0.0, 0.0];
    }
    vec![q / a, c / q]
}

/// All real roots of `a x³ + b x² + c x + d`, `a != 0`.
fn solve_cubic(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let (b, c, d) = (b / a, c / a, d / a);
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    depressed_cubic_roots(p, q)
        .into_iter()
        .map(|t| t - shift)
        .collect()
}

/// Real roots of `t³ + p t + q`.
fn depressed_cubic_roots(p: f64, q: f64) -> Vec<f64> {
    if p == 0.0 && q == 0.0 {
        return vec![0.0, 0.0, 0.0];
    }
    let half_q = 0.5 * q;
    let third_p = p / 3.0;
    let disc = half_q * half_q + third_p * third_p * third_p;
    if disc > 0.0 {
        let u = (-half_q - half_q.signum() * disc.sqrt()).cbrt();
        let t = if u == 0.0 { 0.0 } else { u - third_p / u };
        vec![t]
    } else {
        // three real roots (two or three may coincide)
        let r = (-third_p).sqrt();
        let cos_arg = if r == 0.0 {
            0.0
        } else {
            (-half_q / (r * r * r)).clamp(-1.0, 1.0)
        };
        let phi = cos_arg.acos();
        (0..3)
            .map(|k| 2.0 * r * ((phi - 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos())
            .collect()
    }
}

/// Ferrari's method for `a η⁴ + b η³ + c η² + d η + e`, `a != 0`.
fn ferrari(a: f64, b: f64, c: f64, d: f64, e: f64) -> Vec<f64> {
    let (b, c, d, e) = (b / a, c / a, d / a, e / a);
    // η = y − b/4 gives y⁴ + p y² + q y + r
    let shift = 0.25 * b;
    let b2 = b * b;
    let p = c - 3.0 * b2 / 8.0;
    let q = d - 0.5 * b * c + b2 * b / 8.0;
    let r = e - 0.25 * b * d + b2 * c / 16.0 - 3.0 * b2 * b2 / 256.0;

    let size = p.abs().max(q.abs().sqrt()).max(r.abs().sqrt()).max(1e-300);
    let ys = if q.abs() <= 1e-14 * size * size.sqrt() {
        // biquadratic: z² + p z + r with z = y²
        solve_quadratic(1.0, p, r)
            .into_iter()
            .flat_map(|z| {
                if z >= 0.0 {
                    let s = z.sqrt();
                    vec![-s, s]
                } else if z >= -1e-14 * size {
                    vec![0.0, 0.0]
                } else {
                    Vec::new()
                }
            })
            .collect::<Vec<_>>()
    } else {
        // resolvent cubic 8m³ + 8p m² + (2p² − 8r) m − q² = 0 has a root m > 0
        let m = solve_cubic(8.0, 8.0 * p, 2.0 * p * p - 8.0 * r, -q * q)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        let m = newton_polish(&[8.0, 8.0 * p, 2.0 * p * p - 8.0 * r, -q * q], m);
        if !(m > 0.0) {
            return Vec::new();
        }
        let s = (2.0 * m).sqrt();
        let t = q / (2.0 * s);
        let mut ys = solve_quadratic(1.0, -s, 0.5 * p + m + t);
        ys.extend(solve_quadratic(1.0, s, 0.5 * p + m - t));
        ys
    };
    ys.into_iter().map(|y| y - shift).collect()
}

/// Brute-force minimizer of a scalar objective on `[c1, c2]`.
///
/// Infinite bounds are replaced by `±ORACLE_RADIUS`. A coarse scan of
/// `n_grid` points is followed by `n_refine` rounds, each rescanning a window
/// ten times narrower centred on the incumbent. Ties go to the smaller |η|.
pub fn grid_oracle_1d<F>(objective: F, c1: f64, c2: f64, n_grid: usize, n_refine: usize) -> f64
where
    F: Fn(f64) -> f64,
{
    let lo = if c1.is_finite() { c1 } else { -ORACLE_RADIUS };
    let hi = if c2.is_finite() { c2 } else { ORACLE_RADIUS };
    let n_grid = n_grid.max(3);
    let scan = |from: f64, to: f64, best: &mut (f64, f64)| {
        let step = (to - from) / (n_grid - 1) as f64;
        for k in 0..n_grid {
            let eta = if k + 1 == n_grid { to } else { from + step * k as f64 };
            let v = objective(eta);
            let (be, bv) = *best;
            if v < bv || (v == bv && eta.abs() < be.abs()) {
                *best = (eta, v);
            }
        }
    };
    let mut best = (lo, f64::INFINITY);
    scan(lo, hi, &mut best);
    let mut half = 0.5 * (hi - lo);
    for _ in 0..n_refine {
        half /= 10.0;
        let center = best.0;
        scan((center - half).max(lo), (center + half).min(hi), &mut best);
    }
    best.0
}
