//! Reference computations that share no code path with the solvers they
//! check.

use fraccd::{make_state, apply_step, FractionalProblem, Trace};
use nalgebra::{Complex, DMatrix};
use num_rational::Ratio;

pub type Q = Ratio<i128>;

/// Eigenvalues of the companion matrix of `c4 η⁴ + … + c0` (`c4 ≠ 0`),
/// each refined by complex Newton steps on the polynomial. Real eigenvalues
/// stay exactly real. The variable is first scaled by a power of two near
/// the largest root magnitude so that the matrix is balanced.
pub fn companion_roots(c: [f64; 5]) -> Vec<Complex<f64>> {
    let bound = (1..5).map(|k| (c[k] / c[0]).abs().powf(1.0 / k as f64)).fold(0.0, f64::max);
    let s = if bound > 0.0 { bound.log2().round().exp2() } else { 1.0 };
    let mut m = DMatrix::<f64>::zeros(4, 4);
    for j in 0..4 {
        m[(0, j)] = -c[j + 1] / c[0] / s.powi(j as i32 + 1);
    }
    for r in 1..4 {
        m[(r, r - 1)] = 1.0;
    }
    m.complex_eigenvalues().iter().map(|&z| newton_refine(&c, z * s)).collect()
}

fn newton_refine(c: &[f64; 5], mut z: Complex<f64>) -> Complex<f64> {
    let eval = |z: Complex<f64>| {
        c.iter().fold((Complex::new(0.0, 0.0), Complex::new(0.0, 0.0)), |(p, dp), &k| (p * z + k, dp * z + p))
    };
    let (mut p, _) = eval(z);
    for _ in 0..50 {
        let (_, dp) = eval(z);
        if dp.norm() == 0.0 {
            break;
        }
        let next = z - p / dp;
        let (pn, _) = eval(next);
        if !(pn.norm() < p.norm()) {
            break;
        }
        z = next;
        p = pn;
    }
    z
}

/// Points closer than this (relative to `max(1, |z|)`) are linked into one
/// cluster. A triple root of an ill-conditioned quartic scatters by up to
/// `(eps·κ)^{1/3}`, a few times 1e-4 in practice.
const CLUSTER_RTOL: f64 = 1e-3;

/// Labels of the single-linkage clusters of `points`.
fn link(points: &[Complex<f64>]) -> Vec<usize> {
    let mut label: Vec<usize> = (0..points.len()).collect();
    for i in 0..points.len() {
        for j in 0..i {
            let d = (points[i] - points[j]).norm();
            if d <= CLUSTER_RTOL * points[i].norm().max(1.0) {
                let (from, to) = (label[i], label[j]);
                label.iter_mut().filter(|l| **l == from).for_each(|l| *l = to);
            }
        }
    }
    label
}

/// Residual, relative to the Horner error bound, under which a reported
/// multiple root counts as one of the polynomial to working precision.
const BACKWARD_RTOL: f64 = 256.0 * f64::EPSILON;

fn vanishes_to_order(c: &[f64; 5], r: f64, m: usize) -> bool {
    let mut p = c.to_vec();
    for _ in 0..m {
        let value = p.iter().fold(0.0, |acc, k| acc * r + k);
        let bound = p.iter().fold(0.0, |acc, k: &f64| acc * r.abs() + k.abs());
        if value.abs() > BACKWARD_RTOL * bound {
            return false;
        }
        let deg = p.len() - 1;
        p = p[..deg].iter().enumerate().map(|(k, v)| v * (deg - k) as f64).collect();
    }
    true
}

/// Real roots with multiplicity of `c4 η⁴ + … + c0` against the companion
/// eigenvalues.
///
/// Both sets are linked into joint clusters. A multiple root scatters its
/// eigenvalues by about `eps^{1/m}`, sometimes into a complex pair that is
/// indistinguishable from a close pair of roots, so inside a cluster with
/// non-real members our count may lie anywhere between the number of exactly
/// real eigenvalues and the cluster size, and our roots are compared with the
/// eigen centroid widened by the cluster diameter. A root we report as
/// `m`-fold is compared the same way, and the first `m − 1` derivatives must
/// vanish there to working precision. Other clusters of real eigenvalues only
/// are compared element by element.
pub fn roots_agree(ours: &[f64], coeffs: [f64; 5], tol: f64) -> bool {
    let eigenvalues = companion_roots(coeffs);
    let mut points: Vec<Complex<f64>> = ours.iter().map(|&r| Complex::new(r, 0.0)).collect();
    points.extend_from_slice(&eigenvalues);
    let label = link(&points);
    let mut ids = label.clone();
    ids.sort_unstable();
    ids.dedup();
    ids.into_iter().all(|id| {
        let mut mine: Vec<f64> = (0..ours.len()).filter(|&k| label[k] == id).map(|k| ours[k]).collect();
        let theirs: Vec<Complex<f64>> = (0..eigenvalues.len())
            .filter(|&k| label[ours.len() + k] == id)
            .map(|k| eigenvalues[k])
            .collect();
        let real = theirs.iter().filter(|z| z.im == 0.0).count();
        if mine.len() < real || mine.len() > theirs.len() {
            return false;
        }
        let near = |a: f64, b: f64, slack: f64| (a - b).abs() <= tol * a.abs().max(1.0) + slack;
        let centroid = theirs.iter().sum::<Complex<f64>>() / theirs.len() as f64;
        let radius = theirs.iter().map(|z| (z - centroid).norm()).fold(0.0, f64::max);
        let declared_multiple = mine.len() > 1 && mine.iter().all(|&r| r == mine[0]);
        if declared_multiple && !vanishes_to_order(&coeffs, mine[0], mine.len()) {
            return false;
        }
        if real == theirs.len() && !declared_multiple {
            mine.sort_by(f64::total_cmp);
            let mut re: Vec<f64> = theirs.iter().map(|z| z.re).collect();
            re.sort_by(f64::total_cmp);
            return mine.iter().zip(&re).all(|(a, b)| near(*a, *b, 0.0));
        }
        mine.iter().all(|&r| near(r, centroid.re, 2.0 * radius))
    })
}

fn poly_mul(p: &[Q], q: &[Q]) -> Vec<Q> {
    let mut out = vec![Q::from_integer(0); p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

/// Derivative, coefficients from the highest degree down.
fn poly_deriv(p: &[Q]) -> Vec<Q> {
    let deg = p.len() - 1;
    p[..deg]
        .iter()
        .enumerate()
        .map(|(k, c)| c * Q::from_integer((deg - k) as i128))
        .collect()
}

/// `2N'D − ND'` by explicit polynomial products, all six coefficients.
pub fn exact_stationarity_quintic(a: [Q; 3], b: [Q; 5]) -> [Q; 6] {
    let two_np: Vec<Q> = poly_deriv(&a).into_iter().map(|c| c * Q::from_integer(2)).collect();
    let lhs = poly_mul(&two_np, &b);
    let rhs = poly_mul(&a, &poly_deriv(&b));
    let mut out = [Q::from_integer(0); 6];
    for k in 0..6 {
        out[k] = lhs[k] - rhs[k];
    }
    out
}

/// Sum of the `k` largest magnitudes by full sort.
pub fn topk_by_sort(x: &[f64], k: usize) -> f64 {
    let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    mags.sort_by(|a, b| b.total_cmp(a));
    mags.iter().take(k).sum()
}

/// Worst normalised slack of both descent lemmas along a replayed trace.
/// Positive values are violations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaReplay {
    pub steps: usize,
    /// `max (F_next − F_prev + θη²/(2g_next)) / max(|F_prev|, 1)`.
    pub decrease: f64,
    /// Worst of the three α inequalities, same normalisation.
    pub sandwich: f64,
    /// Largest relative gap between replayed and recorded objectives.
    pub drift: f64,
}

/// Re-applies every recorded `(coord, η)` from `x0` and re-evaluates both
/// lemmas. Requires a trace recorded with `trace_every = 1`.
pub fn replay_lemmas<P: FractionalProblem>(problem: &P, x0: &[f64], trace: &Trace, theta: f64) -> fraccd::Result<LemmaReplay> {
    let mut state = make_state(problem, x0)?;
    let f0 = state.objective;
    let c_max = (0..problem.dim()).map(|i| problem.coord_lipschitz(i)).fold(0.0, f64::max);
    let sigma = (c_max + theta) / theta;
    let mut out = LemmaReplay {
        steps: 0,
        decrease: f64::NEG_INFINITY,
        sandwich: f64::NEG_INFINITY,
        drift: 0.0,
    };
    for rec in trace.records.iter().skip(1) {
        let i = rec.coord as usize;
        let eta = rec.eta;
        let f_prev = state.objective;
        let j = problem.surrogate_numerator(&state.x, &state.cache, i, eta, theta);
        apply_step(problem, &mut state, i, eta)?;
        let f_next = state.objective;
        let g_next = problem.eval_g(&state.x, &state.cache);
        let scale = f_prev.abs().max(1.0);
        out.decrease = out.decrease.max((f_next - f_prev + theta * eta * eta / (2.0 * g_next)) / scale);
        let alpha = j / g_next;
        let worst = (f_next - alpha)
            .max(alpha - f_next - sigma * (f_prev - f_next))
            .max(alpha - sigma * f0);
        out.sandwich = out.sandwich.max(worst / scale);
        out.drift = out.drift.max((f_next - rec.f).abs() / rec.f.abs().max(1.0));
        out.steps += 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn companion_roots_of_a_factored_quartic() {
        // (η − 1)(η + 2)(η² + 1)
        let mut roots = companion_roots([1.0, 1.0, -1.0, 1.0, -2.0]);
        roots.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        let expect = [(-2.0, 0.0), (0.0, -1.0), (0.0, 1.0), (1.0, 0.0)];
        for (r, (re, im)) in roots.iter().zip(expect) {
            assert!((r.re - re).abs() < 1e-12 && (r.im - im).abs() < 1e-12, "{roots:?}");
        }
    }

    fn expand(roots: [f64; 4]) -> [f64; 5] {
        let mut c = vec![1.0];
        for r in roots {
            let mut next = vec![0.0; c.len() + 1];
            for (k, v) in c.iter().enumerate() {
                next[k] += v;
                next[k + 1] -= r * v;
            }
            c = next;
        }
        [c[0], c[1], c[2], c[3], c[4]]
    }

    #[test]
    fn scattered_triple_root_matches_by_centroid() {
        // a near-triple root of an ill-conditioned quartic from an FCD draw
        let q = [9.737848276936134e-5, -6.937867842479652, -12.603745450195023, -7.632152643949057, -1.5405364801176606];
        let (big, c) = (71248.23211179029, -0.6055429657720279);
        assert!(roots_agree(&[c, c, c, big], q, 1e-7));
        assert!(!roots_agree(&[c, c, c, c], q, 1e-7));
        assert!(!roots_agree(&[c, c, c], q, 1e-7));
        assert!(!roots_agree(&[c, c, c, 71248.3], q, 1e-7));
        assert!(!roots_agree(&[-0.6056, -0.6056, -0.6056, big], q, 1e-7));
    }

    #[test]
    fn close_real_roots_compare_elementwise() {
        let q = expand([-2.0, 1.0, 1.00001, 3.0]);
        assert!(roots_agree(&[-2.0, 1.0, 1.00001, 3.0], q, 1e-7));
        assert!(!roots_agree(&[-2.0, 1.000005, 1.000005, 3.0], q, 1e-7));
        assert!(!roots_agree(&[-2.0, 1.0, 3.0], q, 1e-7));
        assert!(!roots_agree(&[-2.0, 1.0, 1.0001, 3.0], q, 1e-7));
    }

    #[test]
    fn complex_only_clusters_are_optional() {
        // (η² − 2η + 1 + 1e-14)(η − 3)(η + 2): a pair 1 ± 1e-7 i
        let a = [1.0, -2.0, 1.0 + 1e-14];
        let b = [1.0, -1.0, -6.0];
        let mut q = [0.0; 5];
        for (i, x) in a.iter().enumerate() {
            for (j, y) in b.iter().enumerate() {
                q[i + j] += x * y;
            }
        }
        assert!(roots_agree(&[-2.0, 3.0], q, 1e-7));
        assert!(roots_agree(&[-2.0, 1.0, 1.0, 3.0], q, 1e-7));
        assert!(!roots_agree(&[-2.0, 3.0, 5.0], q, 1e-7));
    }

    #[test]
    fn exact_quintic_by_hand() {
        // N = η² + 1, D = η⁴ + 1: 2N'D − ND' = 4η(η⁴ + 1) − 4η³(η² + 1)
        let q = |v: i128| Q::from_integer(v);
        let out = exact_stationarity_quintic([q(1), q(0), q(1)], [q(1), q(0), q(0), q(0), q(1)]);
        assert_eq!(out, [q(0), q(0), q(-4), q(0), q(4), q(0)]);
    }

    #[test]
    fn topk_sort_oracle() {
        assert_eq!(topk_by_sort(&[1.0, -3.0, 2.0], 2), 5.0);
        assert_eq!(topk_by_sort(&[1.0], 4), 1.0);
    }
}
