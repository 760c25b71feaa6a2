use dcboost::diagnostics::{check_descent, check_trace, criticality_residual};
use dcboost::linalg::{axpy, dot, norm_sq, sub};
use dcboost::linesearch::nonmonotone_search;
use dcboost::nu::NuStrategySpec;
use dcboost::oracles::{ConvexExpr, Coord};
use dcboost::subproblem::{check_inexact, solve_inexact};
use dcboost::{problems, DcProblem, EpsSchedule, InexactMode, Solver, SolverConfig};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DIM: usize = 3;

fn atom() -> impl Strategy<Value = ConvexExpr> {
    prop_oneof![
        (0.0..2.0f64).prop_map(ConvexExpr::quad),
        prop::collection::vec(-3.0..3.0f64, DIM).prop_map(ConvexExpr::lin),
        (0.0..2.0f64).prop_map(ConvexExpr::l1),
    ]
}

fn tree() -> impl Strategy<Value = ConvexExpr> {
    let leaf = atom();
    let nested = leaf.prop_recursive(3, 12, 3, |inner| {
        prop::collection::vec(inner, 1..4).prop_map(ConvexExpr::sum)
    });
    ((0.05..1.5f64), nested).prop_map(|(a, t)| ConvexExpr::sum(vec![ConvexExpr::quad(a), t]))
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![Just(0.0), -4.0..4.0f64], DIM)
}

fn coord() -> impl Strategy<Value = Coord> {
    (0.0..2.0f64, -2.0..2.0f64, 0.0..2.0f64).prop_map(|(a, c, b)| Coord { a, c, b })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn strong_subgradient_inequality(f in tree(), x in point(), y in point()) {
        let s = f.subgrad_select(&x).unwrap();
        let d = sub(&y, &x);
        let lhs = f.value(&y).unwrap();
        let rhs = f.value(&x).unwrap() + dot(&s, &d) + f.modulus() / 2.0 * norm_sq(&d);
        prop_assert!(lhs >= rhs - 1e-9 * (1.0 + lhs.abs()));
    }

    #[test]
    fn strong_monotonicity(f in tree(), x in point(), y in point()) {
        let sx = f.subgrad_select(&x).unwrap();
        let sy = f.subgrad_select(&y).unwrap();
        let d = sub(&y, &x);
        prop_assert!(dot(&sub(&sy, &sx), &d) >= f.modulus() * norm_sq(&d) - 1e-9);
    }

    #[test]
    fn selection_lies_in_box(f in tree(), x in point()) {
        let b = f.subdiff_box(&x).unwrap();
        prop_assert!(b.contains(&f.subgrad_select(&x).unwrap(), 1e-12));
    }

    #[test]
    fn second_difference_dominates_modulus(f in tree(), x in point(), y in point()) {
        let d = sub(&y, &x);
        let sd = f.second_difference(&x, &y).unwrap();
        prop_assert!(sd >= f.modulus() * norm_sq(&d) * (1.0 - 1e-9) - 1e-12);
    }

    #[test]
    fn eps_interval_is_sound(q in coord(), t in -3.0..3.0f64, eps in 0.0..1.0f64, u in -6.0..6.0f64) {
        let (lo, hi) = q.eps_interval(t, eps);
        let (blo, bhi) = q.interval(t);
        prop_assert!(lo <= blo && hi >= bhi);
        // every element satisfies the relaxed subgradient inequality
        for s in [lo, hi, 0.5 * (lo + hi)] {
            prop_assert!(q.value(u) >= q.value(t) + s * (u - t) - eps - 1e-7);
        }
    }

    #[test]
    fn inexact_pairs_pass_their_own_check(
        seed in any::<u64>(),
        w in prop::collection::vec(-5.0..5.0f64, 2),
        x in prop::collection::vec(-5.0..5.0f64, 2),
        theta in 0.0..0.45f64,
    ) {
        let g = problems::ex2().g;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for mode in [InexactMode::InnerSolver, InexactMode::PerturbedExact, InexactMode::Exact] {
            let s = solve_inexact(&g, &w, &x, theta, mode, &mut rng).unwrap();
            let c = check_inexact(&g, &w, &x, &s.y, &s.xi, theta).unwrap();
            prop_assert!(c.ok, "{:?} {:?}", mode, c);
        }
    }

    #[test]
    fn accepted_step_meets_condition(
        y in prop::collection::vec(-5.0..5.0f64, 2),
        d in prop::collection::vec(-3.0..3.0f64, 2),
        nu in 0.0..1.0f64,
    ) {
        prop_assume!(norm_sq(&d) > 1e-6);
        let p = problems::ex1();
        let r = nonmonotone_search(|z| p.phi(z), &y, &d, 0.6, 0.1, 1.0, nu, 60).unwrap();
        let phi_y = p.phi(&y).unwrap();
        let lhs = p.phi(&axpy(&y, r.lambda, &d)).unwrap();
        prop_assert!(lhs <= phi_y - 0.6 * r.lambda * r.lambda * norm_sq(&d) + nu);
        prop_assert!(r.lambda == 0.0 || (r.lambda - 0.1f64.powi(r.n_backtracks as i32)).abs() < 1e-15);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn runs_replay_cleanly(
        dim in 1usize..6,
        pseed in any::<u64>(),
        x0 in prop::collection::vec(-10.0..10.0f64, 6),
        seed in any::<u64>(),
        geometric in any::<bool>(),
    ) {
        let p = problems::random_sep(dim, pseed);
        let cfg = SolverConfig {
            eps_schedule: if geometric { EpsSchedule::Geometric { eps0: 0.2, q: 0.6 } } else { EpsSchedule::Zero },
            inexact_mode: InexactMode::PerturbedExact,
            ..SolverConfig::default()
        };
        let t = dcboost::run_inmbdca(&p, &cfg, &x0[..dim], seed).unwrap();
        for rep in check_trace(&t).unwrap() {
            prop_assert!(rep.ok(), "{:?}", rep);
        }
        for (r, s) in t.records.iter().zip(t.records.iter().skip(1)) {
            prop_assert_eq!(r.next_point(), s.x.clone());
        }
    }
}

fn smooth_g() -> DcProblem {
    let g = ConvexExpr::sum(vec![ConvexExpr::quad(1.0), ConvexExpr::lin(vec![-2.5, 0.0])]);
    let h = ConvexExpr::sum(vec![ConvexExpr::quad(0.5), ConvexExpr::l1(0.7)]);
    DcProblem::new("smooth-g", 2, g, h).unwrap()
}

#[test]
fn zero_nu_is_monotone_on_smooth_g() {
    let p = smooth_g();
    let cfg = SolverConfig {
        nu_strategy: NuStrategySpec::Zero,
        ..SolverConfig::default()
    };
    for (i, x0) in [[4.0, -3.0], [-9.0, 7.5], [0.1, 0.2]].iter().enumerate() {
        for t in [
            dcboost::run_bdca(&p, &cfg, x0).unwrap(),
            Solver::Inmbdca.run(&p, &cfg, x0, i as u64).unwrap(),
        ] {
            for r in &t.records {
                assert!(r.phi_next <= r.phi_x + 1e-12, "{r:?}");
            }
        }
    }
}

#[test]
fn critical_sets_are_complete_on_a_grid() {
    for p in [problems::ex1(), problems::ex2()] {
        let known = p.known_critical_points.clone().unwrap();
        for c in &known {
            assert_eq!(criticality_residual(&p, c, 0.0).unwrap(), 0.0);
        }
        for i in -300..=300 {
            for j in -300..=300 {
                let x = [i as f64 / 100.0, j as f64 / 100.0];
                if criticality_residual(&p, &x, 0.0).unwrap() < 1e-3 {
                    assert!(known.iter().any(|c| c == &x.to_vec()), "{} at {x:?}", p.name);
                }
            }
        }
    }
}

#[test]
fn every_registered_run_is_certified() {
    let cfg = SolverConfig::default();
    for p in [
        problems::ex1(),
        problems::ex2(),
        problems::random_sep(5, 7),
        problems::random_sep(3, 1),
    ] {
        for solver in [Solver::Dca, Solver::Nmbdca, Solver::Bdca, Solver::Inmbdca] {
            for (i, x0) in [vec![6.2945; p.dim], vec![-3.0; p.dim]].iter().enumerate() {
                let t = solver.run(&p, &cfg, x0, i as u64).unwrap();
                assert!(check_descent(&t, p.sigma, t.config.theta).iter().all(|r| !r.flagged));
                assert!(t.violations.is_empty());
                assert!(
                    dcboost::diagnostics::final_residual(&t).unwrap() <= 1e-3,
                    "{} {:?}",
                    p.name,
                    solver
                );
            }
        }
    }
}
