//! Random problems with a known strictly feasible primal point and a strictly
//! feasible dual point are solved to a small duality gap.

use htc_conic::{
    min_eigenvalue, ConicBackend, ConicProblem, ConstraintRow, InteriorPoint, Sense, SolveStatus,
    SolverOptions,
};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_sym(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    (&a + a.transpose()) * 0.5
}

fn random_pd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * 0.5
}

fn build(seed: u64, dims: &[usize], m: usize) -> ConicProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ConicProblem::new();
    let blocks: Vec<_> = dims.iter().map(|&n| p.add_block(n)).collect();
    let x0: Vec<DMatrix<f64>> = dims.iter().map(|&n| random_pd(&mut rng, n)).collect();
    let y0: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut c: Vec<DMatrix<f64>> = dims.iter().map(|&n| random_pd(&mut rng, n)).collect();
    for _ in 0..m {
        let mut row = ConstraintRow::new(Sense::Eq, 0.0);
        for (k, &n) in dims.iter().enumerate() {
            row.add_block(blocks[k], random_sym(&mut rng, n));
        }
        row.rhs = row.evaluate(&x0, &[]);
        p.add_row(row);
    }
    for (i, row) in p.rows().iter().enumerate() {
        for (id, a) in &row.blocks {
            c[id.0] += a * y0[i];
        }
    }
    for (k, ck) in c.into_iter().enumerate() {
        p.set_block_objective(blocks[k], ck);
    }
    p
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_feasible_problems_close_the_gap(seed in any::<u64>(), n1 in 1usize..5, n2 in 1usize..4, m in 1usize..6) {
        let p = build(seed, &[n1, n2], m);
        let s = InteriorPoint.solve(&p, &SolverOptions::default()).unwrap();
        prop_assert_eq!(s.status, SolveStatus::Optimal);
        let gap = (s.objective_value - s.dual_objective).abs() / (1.0 + s.objective_value.abs());
        prop_assert!(gap < 1e-7, "gap {}", gap);
        for x in &s.block_values {
            prop_assert!(min_eigenvalue(x) > -1e-7);
        }
        for row in p.rows() {
            prop_assert!(row.violation(&s.block_values, &s.scalar_values).abs() < 1e-6);
        }
    }
}

/// Needs iterative refinement of the Schur solve to keep the primal residual
/// from drifting near the optimum.
#[test]
fn ill_conditioned_seed_reaches_optimality() {
    let p = build(3726438848617063779, &[3, 1], 4);
    let s = InteriorPoint.solve(&p, &SolverOptions::default()).unwrap();
    assert_eq!(s.status, SolveStatus::Optimal);
    assert!(s.residuals.primal < 1e-8);
}
