use nalgebra::DMatrix;
use orbitspace::expr::random::random_expr;
use orbitspace::hamsys::{hamiltonian_vector_field, jacobian_rank, poisson_bracket, DEFAULT_RANK_TOL};
use orbitspace::phase::seeded_rng;
use orbitspace::{Expr, IntegrableSystem, PhaseBox};
use proptest::prelude::*;
use rand::Rng;

const DOF: usize = 2;

fn exprs(seed: u64, k: usize) -> Vec<Expr> {
    let mut rng = seeded_rng(seed, 10);
    (0..k).map(|_| random_expr(&mut rng, 3, &[0, 1, 2, 3])).collect()
}

fn points(seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = seeded_rng(seed, 11);
    (0..count)
        .map(|_| (0..2 * DOF).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

/// Rank by Gaussian elimination with full pivoting. Returns the rank and
/// whether the decision is clear-cut (no pivot ratio in the gray zone).
fn elimination_rank(m: &DMatrix<f64>, tol: f64) -> (usize, bool) {
    let mut a = m.clone();
    let (rows, cols) = a.shape();
    let first = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if first == 0.0 {
        return (0, true);
    }
    let mut rank = 0;
    let mut clear = true;
    for k in 0..rows.min(cols) {
        let mut best = (k, k, 0.0f64);
        for i in k..rows {
            for j in k..cols {
                if a[(i, j)].abs() > best.2 {
                    best = (i, j, a[(i, j)].abs());
                }
            }
        }
        let ratio = best.2 / first;
        if ratio > 1e-13 && ratio < 1e-5 {
            clear = false;
        }
        if ratio <= tol {
            break;
        }
        a.swap_rows(k, best.0);
        a.swap_columns(k, best.1);
        for i in k + 1..rows {
            let factor = a[(i, k)] / a[(k, k)];
            for j in k..cols {
                a[(i, j)] -= factor * a[(k, j)];
            }
        }
        rank += 1;
    }
    (rank, clear)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn antisymmetry(seed in any::<u64>()) {
        let e = exprs(seed, 2);
        let sum = Expr::add(poisson_bracket(&e[0], &e[1], DOF), poisson_bracket(&e[1], &e[0], DOF)).compile();
        for x in points(seed, 100) {
            let v = sum.eval(&x).unwrap();
            prop_assert!(v.abs() <= 1e-10, "{v}");
        }
    }

    #[test]
    fn leibniz(seed in any::<u64>()) {
        let e = exprs(seed, 3);
        let (f, g, h) = (&e[0], &e[1], &e[2]);
        let lhs = poisson_bracket(f, &Expr::mul(g.clone(), h.clone()), DOF);
        let rhs = Expr::add(
            Expr::mul(g.clone(), poisson_bracket(f, h, DOF)),
            Expr::mul(h.clone(), poisson_bracket(f, g, DOF)),
        );
        let diff = Expr::sub(lhs, rhs).compile();
        for x in points(seed, 100) {
            let v = diff.eval(&x).unwrap();
            prop_assert!(v.abs() <= 1e-9, "{v}");
        }
    }

    #[test]
    fn jacobi(seed in any::<u64>()) {
        let e = exprs(seed, 3);
        let (f, g, h) = (&e[0], &e[1], &e[2]);
        let b = |a: &Expr, c: &Expr| poisson_bracket(a, c, DOF);
        let sum = Expr::add(Expr::add(b(f, &b(g, h)), b(g, &b(h, f))), b(h, &b(f, g))).compile();
        for x in points(seed, 100) {
            let v = sum.eval(&x).unwrap();
            prop_assert!(v.abs() <= 1e-7, "{v}");
        }
    }

    #[test]
    fn vector_field_differentiates_by_bracket(seed in any::<u64>()) {
        let e = exprs(seed, 2);
        let (f, g) = (&e[0], &e[1]);
        let xf = hamiltonian_vector_field(f, DOF);
        let bracket = poisson_bracket(g, f, DOF).compile();
        let gp = g.compile();
        for x in points(seed, 20) {
            let dir = xf.eval(&x).unwrap();
            let eps = 1e-4;
            let shifted = |s: f64| -> Vec<f64> { x.iter().zip(&dir).map(|(a, d)| a + s * eps * d).collect() };
            let fd = |s: f64| (gp.eval(&shifted(s)).unwrap() - gp.eval(&shifted(-s)).unwrap()) / (2.0 * s * eps);
            let approx = (4.0 * fd(0.5) - fd(1.0)) / 3.0;
            let exact = bracket.eval(&x).unwrap();
            prop_assert!((approx - exact).abs() <= 1e-6 * (1.0 + exact.abs()), "{approx} vs {exact}");
        }
    }

    #[test]
    fn rank_matches_elimination(seed in any::<u64>(), dof in 1usize..=3, deficient in any::<bool>()) {
        let mut rng = seeded_rng(seed, 12);
        let vars: Vec<usize> = (0..2 * dof).collect();
        let mut integrals: Vec<Expr> = (0..dof).map(|_| random_expr(&mut rng, 3, &vars)).collect();
        if deficient && dof > 1 {
            integrals[dof - 1] = Expr::sub(Expr::mul(Expr::constant(2.0), integrals[0].clone()), integrals[1].clone());
        }
        let sys = IntegrableSystem::new("r", dof, integrals, PhaseBox::cube(dof, -1.0, 1.0)).unwrap();
        for _ in 0..10 {
            let x = sys.bounds().sample(&mut rng);
            let m = sys.jacobian(&x).unwrap();
            let (oracle, clear) = elimination_rank(&m, 1e-9);
            if clear {
                prop_assert_eq!(jacobian_rank(&sys, &x, DEFAULT_RANK_TOL).unwrap(), oracle, "{}", m);
            }
        }
    }
}
