mod common;

use bilmdm::embedding::{
    compress_landmarks, project_affine_zero_diag, solve_w, solve_w_observed, w_objective,
};
use bilmdm::inner::InnerSolver;
use bilmdm::landmarks::LandmarkSet;
use bilmdm::transforms::{CMatrix, C64};
use common::*;
use ndarray::Array2;
use proptest::prelude::*;

fn landmarks(seed: u64, rows: usize, nl: usize) -> LandmarkSet {
    let mut g = rng(seed);
    LandmarkSet {
        lambda_mat: rand_cmat(&mut g, rows, nl),
        indices: (0..nl).collect(),
    }
}

fn constraint_residual(w: &CMatrix) -> f64 {
    let n = w.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        worst = worst.max(w[[j, j]].norm());
        worst = worst.max((w.column(j).sum() - C64::new(1.0, 0.0)).norm());
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solve_w_reaches_oracle(seed: u64, nl in 2usize..6, lw in 0.01f64..2.0) {
        let set = landmarks(seed, 6, nl);
        let solver = InnerSolver { k0: 20_000, ..InnerSolver::default() };
        let expr = solve_w(&set, lw, &solver).unwrap();
        prop_assert!(constraint_residual(&expr.w) <= 1e-12);
        let oracle = self_expression_admm(&set.lambda_mat, lw, 1.0, 20_000);
        let theirs = w_objective_direct(&set.lambda_mat, &oracle, lw);
        prop_assert!(expr.residual <= theirs + 1e-4, "{} vs oracle {}", expr.residual, theirs);
    }

    #[test]
    fn compressed_rows_span_invariant_subspace(seed: u64, nl in 2usize..7) {
        let set = landmarks(seed, 5, nl);
        let expr = solve_w(&set, 0.1, &InnerSolver { k0: 200, ..InnerSolver::default() }).unwrap();
        let eye = Array2::<C64>::eye(nl);
        let i_w = &eye - &expr.w;
        let m = i_w.dot(&adjoint(&i_w));
        for d in 1..=nl {
            let cl = compress_landmarks(&expr, d).unwrap();
            let gram = cl.lambda_check.dot(&adjoint(&cl.lambda_check));
            prop_assert!(dist(&gram, &Array2::eye(d)) <= 1e-10);
            let lh = adjoint(&cl.lambda_check);
            let diag = Array2::from_diag(&cl.eigvals.mapv(|v| C64::new(v, 0.0)));
            prop_assert!(dist(&m.dot(&lh), &lh.dot(&diag)) <= 1e-8 * norm(&m));
            prop_assert!(cl.eigvals.windows(2).into_iter().all(|w| w[0] <= w[1]));
        }
    }
}

/// `|t − a p − (1−a) q|² + λ_W(|a| + |1−a|)` for one column of a
/// three-landmark problem, `a` being the weight on `p`.
fn column_objective(t: &[C64], p: &[C64], q: &[C64], a: C64, lw: f64) -> f64 {
    let one = C64::new(1.0, 0.0);
    let fit: f64 = (0..t.len()).map(|i| (t[i] - a * p[i] - (one - a) * q[i]).norm_sqr()).sum();
    fit + lw * (a.norm() + (one - a).norm())
}

fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..200 {
        let (a, b) = (hi - r * (hi - lo), lo + r * (hi - lo));
        if f(a) < f(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    0.5 * (lo + hi)
}

/// With three landmarks each column has one complex degree of freedom, so
/// the optimum is found by a 1-D search along the real segment `a ∈ [0, 1]`
/// (where `|a| + |1−a|` attains its minimum 1) followed by coordinate
/// polishing in the complex plane.
fn three_landmark_oracle(lambda: &CMatrix, lw: f64) -> f64 {
    let mut total = 0.0;
    for j in 0..3 {
        let free: Vec<usize> = (0..3).filter(|&i| i != j).collect();
        let t: Vec<C64> = lambda.column(j).to_vec();
        let p: Vec<C64> = lambda.column(free[0]).to_vec();
        let q: Vec<C64> = lambda.column(free[1]).to_vec();
        let f = |a: C64| column_objective(&t, &p, &q, a, lw);
        let mut a = C64::new(golden_section(|x| f(C64::new(x, 0.0)), 0.0, 1.0), 0.0);
        for _ in 0..20 {
            a.re = golden_section(|x| f(C64::new(x, a.im)), a.re - 0.1, a.re + 0.1);
            a.im = golden_section(|y| f(C64::new(a.re, y)), a.im - 0.1, a.im + 0.1);
        }
        total += f(a);
    }
    total
}

#[test]
fn heavy_sparsity_weight_matches_parameterized_oracle() {
    let lw = 1e6;
    for seed in 0..2 {
        let set = landmarks(100 + seed, 6, 3);
        let solver = InnerSolver { k0: 1_000_000, ..InnerSolver::default() };
        let expr = solve_w(&set, lw, &solver).unwrap();
        let oracle = three_landmark_oracle(&set.lambda_mat, lw);
        assert!((expr.residual - oracle).abs() <= 1e-6, "{} vs {}", expr.residual, oracle);
        // all mass in convex combinations: every column has ℓ1 norm 1
        for j in 0..3 {
            let l1: f64 = expr.w.column(j).iter().map(|z| z.norm()).sum();
            assert!((l1 - 1.0).abs() <= 1e-6, "column {j}: ℓ1 = {l1}");
        }
    }
}

#[test]
fn projection_is_optimal_against_kkt() {
    let mut g = rng(7);
    for n in 2..6 {
        let w = rand_cmat(&mut g, n, n);
        let p = project_affine_zero_diag(&w).unwrap();
        for j in 0..n {
            let mut e = vec![C64::new(0.0, 0.0); n];
            e[j] = C64::new(1.0, 0.0);
            let oracle = project_affine_kkt(
                &w.column(j).to_vec(),
                &[vec![C64::new(1.0, 0.0); n], e],
                &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
            );
            for (a, b) in p.column(j).iter().zip(&oracle) {
                assert!((a - b).norm() <= 1e-12);
            }
        }
    }
}

/// The iteration is a three-operator splitting, not a descent method: on
/// random instances the projected objective rises by up to ~1e-4 relative
/// in about one run in ten. Kept runnable for reference.
#[test]
#[ignore = "not a property of the iteration; see decisions ledger"]
fn objective_never_increases_after_ten_iterations() {
    let (seed, nl, lw) = (8797151615592201388, 5, 1.8892577446030772);
    let set = landmarks(seed, 6, nl);
    let solver = InnerSolver { k0: 400, ..InnerSolver::default() };
    let mut trace = Vec::new();
    solve_w_observed(&set, lw, &solver, |_, h| {
        trace.push(w_objective(&set.lambda_mat, &project_affine_zero_diag(h).unwrap(), lw));
    })
    .unwrap();
    for (k, w) in trace.windows(2).enumerate().skip(9) {
        assert!(w[1] <= w[0] + 1e-12, "iteration {}: {} -> {}", k + 2, w[0], w[1]);
    }
}
