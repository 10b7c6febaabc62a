mod common;

use fcbc::lp::{LpModel, Relation};
use fcbc::solver::{LpSolver, SimplexSolver, Status};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_vertex_enumeration() {
    let r = common::solver_oracle(200, 17);
    assert_eq!(r.mismatches, 0, "{r:?}");
    assert_eq!(r.duality_gaps, 0, "{r:?}");
    assert!(r.max_error <= 1e-6);
    assert!(r.optimal > 50 && r.optimal < 200, "{r:?}");
}

#[test]
fn identical_models_give_identical_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let solver = SimplexSolver::default();
    for _ in 0..50 {
        let lp = common::random_lp(&mut rng);
        let a = solver.solve(&lp.model).unwrap();
        let b = solver.solve(&lp.model.clone()).unwrap();
        assert_eq!(a.status, b.status);
        assert_eq!(a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
}

#[test]
fn redundant_row_keeps_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let solver = SimplexSolver::default();
    let mut checked = 0;
    while checked < 40 {
        let lp = common::random_lp(&mut rng);
        let base = solver.solve(&lp.model).unwrap();
        if base.status != Status::Optimal {
            continue;
        }
        // Twice an existing row, loosened.
        let (coefs, rel, rhs) = &lp.rows[0];
        let terms: Vec<(usize, f64)> = coefs.iter().enumerate().map(|(j, c)| (j, 2.0 * c)).collect();
        let loose = match rel {
            Relation::Le => 2.0 * rhs + 1.0,
            Relation::Ge => 2.0 * rhs - 1.0,
        };
        let mut m = lp.model.clone();
        m.add_row("redundant", &terms, *rel, loose);
        let s = solver.solve(&m).unwrap();
        assert_eq!(s.status, Status::Optimal);
        assert!((s.objective - base.objective).abs() <= 1e-8, "{} vs {}", s.objective, base.objective);
        checked += 1;
    }
}

fn scaled(model: &LpModel, k: f64) -> LpModel {
    let mut m = model.clone();
    m.objective.iter_mut().for_each(|(_, c)| *c *= k);
    m
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn objective_scaling_keeps_argmin(seed in any::<u64>(), k in 0.01f64..100.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = common::random_lp(&mut rng);
        let solver = SimplexSolver::default();
        let a = solver.solve(&lp.model).unwrap();
        let b = solver.solve(&scaled(&lp.model, k)).unwrap();
        prop_assert_eq!(a.status, b.status);
        if a.status == Status::Optimal {
            prop_assert!((b.objective - k * a.objective).abs() <= 1e-6 * (1.0 + k * a.objective.abs()));
            let at = |x: &[f64]| lp.model.objective_value(x);
            prop_assert!((at(&b.x) - a.objective).abs() <= 1e-6 * (1.0 + a.objective.abs()));
        }
    }
}
