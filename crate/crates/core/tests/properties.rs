use fraccd::data::{load_libsvm, randn, seeded_rng, spectral_norm_sq, write_libsvm, CscMatrix};
use fraccd::problems::{
    l4_quartic_radicand, topk_magnitude_sum, EigL4Problem, PiecewiseRatio, SparseRecoveryProblem,
};
use fraccd::scalar::{solve_quartic, QuarticCoeffs, QUARTIC_TOL};
use fraccd::{apply_step, make_state, FractionalProblem};
use nalgebra::{DMatrix, SymmetricEigen};
use proptest::prelude::*;
use rand::Rng;

fn sparse_matrix(max_rows: usize, max_cols: usize) -> impl Strategy<Value = CscMatrix> {
    (1..=max_rows, 1..=max_cols).prop_flat_map(|(m, n)| {
        prop::collection::vec(prop_oneof![3 => Just(0.0), 2 => -10.0..10.0f64], m * n)
            .prop_map(move |d| CscMatrix::from_dense(m, n, &d).unwrap())
    })
}

proptest! {
    #[test]
    fn topk_equals_sort_oracle(x in prop::collection::vec(-100.0..100.0f64, 1..40), kf in 0.0..1.0f64) {
        let k = 1 + ((x.len() - 1) as f64 * kf) as usize;
        let mut mags: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        mags.sort_by(|a, b| b.total_cmp(a));
        let oracle: f64 = mags[..k].iter().sum();
        prop_assert_eq!(topk_magnitude_sum(&x, k).unwrap(), oracle);
    }

    #[test]
    fn column_axpy_matches_dense(m in sparse_matrix(8, 8), eta in -5.0..5.0f64, seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let z0 = randn(m.nrows(), &mut rng);
        let j = rng.random_range(0..m.ncols());
        let dense = m.to_dense();
        let mut z = z0.clone();
        m.column_axpy(j, eta, &mut z).unwrap();
        for r in 0..m.nrows() {
            let expect = z0[r] + eta * dense[r * m.ncols() + j];
            prop_assert!((z[r] - expect).abs() <= 1e-12);
        }
    }

    #[test]
    fn libsvm_round_trip(m in sparse_matrix(6, 6)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.svm");
        write_libsvm(&path, &m).unwrap();
        let back = load_libsvm(&path).unwrap();
        // trailing all-zero columns carry no index and are not recoverable
        let last_used = (0..m.ncols()).rev().find(|&j| !m.column(j).0.is_empty()).map_or(0, |j| j + 1);
        prop_assert_eq!(back.nrows(), m.nrows());
        prop_assert_eq!(back.ncols(), last_used);
        for j in 0..last_used {
            prop_assert_eq!(back.column(j), m.column(j));
        }
    }

    #[test]
    fn radicand_matches_pointwise_sum(z in prop::collection::vec(-3.0..3.0f64, 1..10), seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let col = randn(z.len(), &mut rng);
        let rows: Vec<usize> = (0..z.len()).collect();
        let z4: f64 = z.iter().map(|v| v.powi(4)).sum();
        let b = l4_quartic_radicand(&z, (&rows, &col), z4);
        for eta in [-1.0, 0.5, 2.0] {
            let direct: f64 = z.iter().zip(&col).map(|(a, c)| (a + eta * c).powi(4)).sum();
            let poly = QuarticCoeffs::from_array(b).eval(eta);
            prop_assert!((poly - direct).abs() <= 1e-10 * direct.abs().max(1.0));
        }
    }

    #[test]
    fn quartic_recovers_planted_roots(r in prop::collection::vec(-10.0..10.0f64, 4), lead in prop_oneof![-5.0..-0.1f64, 0.1..5.0f64]) {
        let mut c = [lead, 0.0, 0.0, 0.0, 0.0];
        for (deg, root) in r.iter().enumerate() {
            // multiply by (η − root)
            for k in (1..=deg + 1).rev() {
                c[k] -= root * c[k - 1];
            }
        }
        let roots = solve_quartic(&QuarticCoeffs::from_array(c), QUARTIC_TOL).unwrap();
        prop_assert_eq!(roots.len(), 4, "{:?} from {:?}", roots, r);
        let mut want = r.clone();
        want.sort_by(f64::total_cmp);
        for (a, b) in roots.iter().zip(&want) {
            // clustered roots are ill-conditioned: error grows like sqrt(eps)
            prop_assert!((a - b).abs() <= 1e-5 * (1.0 + b.abs()), "{:?} vs {:?}", roots, want);
        }
    }

    #[test]
    fn l4_objective_is_scale_invariant(seed in any::<u64>(), alpha in prop_oneof![-50.0..-0.01f64, 0.01..50.0f64]) {
        let mut rng = seeded_rng(seed);
        let g = CscMatrix::from_dense(6, 4, &randn(24, &mut rng)).unwrap();
        let p = EigL4Problem::new(g);
        let x = randn(4, &mut rng);
        let scaled: Vec<f64> = x.iter().map(|v| alpha * v).collect();
        let a = make_state(&p, &x).unwrap().objective;
        let b = make_state(&p, &scaled).unwrap().objective;
        prop_assert!((a - b).abs() <= 1e-10 * a);
    }

    #[test]
    fn incremental_caches_match_recomputation(seed in any::<u64>()) {
        let mut rng = seeded_rng(seed);
        let g = CscMatrix::from_dense(7, 5, &randn(35, &mut rng)).unwrap();
        let y = randn(7, &mut rng);
        let sr = SparseRecoveryProblem::new(g.clone(), y, 0.3, 2).unwrap();
        let l4 = EigL4Problem::new(g);
        let mut s1 = make_state(&sr, &randn(5, &mut rng)).unwrap();
        let mut s2 = make_state(&l4, &randn(5, &mut rng)).unwrap();
        for _ in 0..50 {
            let i = rng.random_range(0..5);
            let eta: f64 = rng.random_range(-1.0..1.0);
            apply_step(&sr, &mut s1, i, eta).unwrap();
            apply_step(&l4, &mut s2, i, eta).unwrap();
        }
        let (fresh, cached) = s1.recompute(&sr).unwrap();
        prop_assert!((fresh - cached).abs() <= 1e-9 * fresh.abs());
        let (fresh, cached) = s2.recompute(&l4).unwrap();
        prop_assert!((fresh - cached).abs() <= 1e-9 * fresh.abs());
    }
}

#[test]
fn spectral_norm_matches_dense_eigensolve() {
    let mut rng = seeded_rng(5);
    for _ in 0..5 {
        let data = randn(20 * 30, &mut rng);
        let m = CscMatrix::from_dense(20, 30, &data).unwrap();
        let tol = 1e-10;
        let est = spectral_norm_sq(&m, 100_000, tol).unwrap();
        let dense = DMatrix::from_row_slice(20, 30, &data);
        let gram = dense.transpose() * &dense;
        let exact = SymmetricEigen::new(gram).eigenvalues.max();
        assert!(est >= exact * (1.0 - tol), "{est} < {exact}");
        assert!((est - exact).abs() <= 1e-6 * exact, "{est} vs {exact}");
    }
}

/// `f(x + ηe_i) ≤ f(x) + ∇_i f(x)·η + (c_i/2)·η²` on random triples.
fn majorization_slack<P: FractionalProblem>(p: &P, rng: &mut fraccd::data::Rng64) -> f64 {
    let n = p.dim();
    let mut worst = f64::INFINITY;
    for _ in 0..1000 {
        let x = randn(n, rng);
        let i = rng.random_range(0..n);
        let eta: f64 = 3.0 * rng.random_range(-1.0..1.0);
        let c = p.init_cache(&x).unwrap();
        let mut moved = x.clone();
        moved[i] += eta;
        let cm = p.init_cache(&moved).unwrap();
        let bound = p.eval_f(&x, &c) + p.grad_f_coord(&x, &c, i) * eta + 0.5 * p.coord_lipschitz(i) * eta * eta;
        worst = worst.min(bound - p.eval_f(&moved, &cm));
    }
    worst
}

#[test]
fn coordinate_majorization_holds() {
    let mut rng = seeded_rng(17);
    let g = CscMatrix::from_dense(12, 8, &randn(96, &mut rng)).unwrap();
    let y = randn(12, &mut rng);
    let sr = SparseRecoveryProblem::new(g.clone(), y, 0.1, 3).unwrap();
    assert!(majorization_slack(&sr, &mut rng) >= -1e-10);
    assert!(majorization_slack(&EigL4Problem::new(g), &mut rng) >= -1e-10);
    let pw = PiecewiseRatio::new(randn(3, &mut rng), randn(3, &mut rng), randn(3, &mut rng), 1.0).unwrap();
    assert!(majorization_slack(&pw, &mut rng) >= -1e-10);
}

#[test]
fn l4_denominator_is_midpoint_convex() {
    let mut rng = seeded_rng(23);
    let g = CscMatrix::from_dense(10, 6, &randn(60, &mut rng)).unwrap();
    let p = EigL4Problem::new(g);
    let eval = |x: &[f64]| p.eval_g(x, &p.init_cache(x).unwrap());
    for _ in 0..1000 {
        let x = randn(6, &mut rng);
        let y = randn(6, &mut rng);
        let mid: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 0.5 * (a + b)).collect();
        let lhs = eval(&mid);
        let rhs = 0.5 * eval(&x) + 0.5 * eval(&y);
        assert!(lhs <= rhs + 1e-12 * rhs, "{lhs} > {rhs}");
    }
}
