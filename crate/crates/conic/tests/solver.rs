use htc_conic::{
    psd_check, ConicBackend, ConicProblem, ConstraintRow, InteriorPoint, Sense, SolveStatus,
    SolverOptions,
};
use nalgebra::DMatrix;

fn solve(p: &ConicProblem) -> htc_conic::ConicSolution {
    InteriorPoint.solve(p, &SolverOptions::default()).expect("valid problem")
}

fn e(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    if i == j {
        m[(i, i)] = 1.0;
    } else {
        m[(i, j)] = 0.5;
        m[(j, i)] = 0.5;
    }
    m
}

#[test]
fn scalar_lower_bound() {
    let mut p = ConicProblem::new();
    let x = p.add_scalar();
    p.set_scalar_objective(x, 1.0);
    p.add_row(ConstraintRow::new(Sense::Ge, 1.0).with_scalar(x, 1.0));
    let s = solve(&p);
    assert_eq!(s.status, SolveStatus::Optimal);
    assert!((s.objective_value - 1.0).abs() < 1e-8, "{}", s.objective_value);
    assert!((s.scalar(x) - 1.0).abs() < 1e-8);
    assert!((s.row_duals[0] - 1.0).abs() < 1e-7, "dual {}", s.row_duals[0]);
}

#[test]
fn two_by_two_with_fixed_corner_and_coupling() {
    let mut p = ConicProblem::new();
    let b = p.add_block(2);
    p.set_block_objective(b, e(2, 1, 1));
    let r = p.fixed_entry_row(b, 0, 0, 1.0).unwrap();
    p.add_row(r);
    let r = p.fixed_entry_row(b, 0, 1, 1.0).unwrap();
    p.add_row(r);
    let s = solve(&p);
    assert_eq!(s.status, SolveStatus::Optimal);
    assert!((s.objective_value - 1.0).abs() < 1e-8, "{}", s.objective_value);
    let x = s.block(b);
    assert!((x[(1, 1)] - 1.0).abs() < 1e-7);
    assert!(psd_check(x, 1e-9).is_psd);
}

#[test]
fn trace_with_diagonal_sum() {
    let mut p = ConicProblem::new();
    let b = p.add_block(2);
    p.set_block_objective(b, DMatrix::identity(2, 2));
    p.add_row(ConstraintRow::new(Sense::Eq, 2.0).with_block(b, DMatrix::identity(2, 2)));
    let s = solve(&p);
    assert_eq!(s.status, SolveStatus::Optimal);
    assert!((s.objective_value - 2.0).abs() < 1e-8);
    assert!((s.dual_objective - 2.0).abs() < 1e-8);
}

#[test]
fn max_eigenvalue_dual() {
    // min t  s.t. t I - A ⪰ 0, written as X = t I - A with X ⪰ 0.
    let a = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
    let mut p = ConicProblem::new();
    let b = p.add_block(3);
    let t = p.add_scalar();
    let u = p.add_scalar();
    p.set_scalar_objective(t, 1.0);
    p.set_scalar_objective(u, -1.0);
    for i in 0..3 {
        for j in i..3 {
            let mut row = ConstraintRow::new(Sense::Eq, -a[(i, j)]).with_block(b, e(3, i, j));
            if i == j {
                row = row.with_scalar(t, -1.0).with_scalar(u, 1.0);
            }
            p.add_row(row);
        }
    }
    let s = solve(&p);
    assert_eq!(s.status, SolveStatus::Optimal);
    let lmax = htc_conic::sorted_eigenvalues(&a)[0];
    assert!((s.objective_value - lmax).abs() < 1e-7, "{} vs {lmax}", s.objective_value);
}

#[test]
fn le_rows_and_mixed_blocks() {
    // min -x - y  s.t. x + y <= 3, x <= 2 (as matrix corner), x, y >= 0
    let mut p = ConicProblem::new();
    let b = p.add_block(1);
    let y = p.add_scalar();
    p.set_block_objective(b, DMatrix::from_element(1, 1, -1.0));
    p.set_scalar_objective(y, -1.0);
    p.add_row(
        ConstraintRow::new(Sense::Le, 3.0)
            .with_block(b, DMatrix::from_element(1, 1, 1.0))
            .with_scalar(y, 1.0),
    );
    p.add_row(ConstraintRow::new(Sense::Le, 2.0).with_block(b, DMatrix::from_element(1, 1, 1.0)));
    let s = solve(&p);
    assert_eq!(s.status, SolveStatus::Optimal);
    assert!((s.objective_value + 3.0).abs() < 1e-8);
    assert!(s.row_duals[0] < 0.0, "a <= row has a nonpositive multiplier");
}

#[test]
fn detects_infeasible() {
    let mut p = ConicProblem::new();
    let x = p.add_scalar();
    p.set_scalar_objective(x, 1.0);
    p.add_row(ConstraintRow::new(Sense::Le, -1.0).with_scalar(x, 1.0));
    let s = solve(&p);
    assert_eq!(s.status, SolveStatus::Infeasible);

    let mut p = ConicProblem::new();
    let b = p.add_block(2);
    p.add_row(ConstraintRow::new(Sense::Eq, -1.0).with_block(b, DMatrix::identity(2, 2)));
    assert_eq!(solve(&p).status, SolveStatus::Infeasible);
}

#[test]
fn detects_unbounded() {
    let mut p = ConicProblem::new();
    let x = p.add_scalar();
    let y = p.add_scalar();
    p.set_scalar_objective(x, -1.0);
    p.add_row(ConstraintRow::new(Sense::Eq, 1.0).with_scalar(x, 1.0).with_scalar(y, -1.0));
    assert_eq!(solve(&p).status, SolveStatus::Unbounded);
}

#[test]
fn empty_infeasible_row_short_circuits() {
    let mut p = ConicProblem::new();
    p.add_scalar();
    p.add_row(ConstraintRow::new(Sense::Eq, 1.0));
    assert_eq!(solve(&p).status, SolveStatus::Infeasible);
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    let mut p = ConicProblem::new();
    let b = p.add_block(3);
    p.set_block_objective(b, DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 2.0, 0.3, 0.0, 0.3, 0.5]));
    p.add_row(ConstraintRow::new(Sense::Eq, 3.0).with_block(b, DMatrix::identity(3, 3)));
    p.add_row(ConstraintRow::new(Sense::Ge, 0.4).with_block(b, e(3, 0, 2)));
    let a = solve(&p);
    let c = solve(&p);
    assert_eq!(a.objective_value.to_bits(), c.objective_value.to_bits());
    assert_eq!(a.block_values, c.block_values);
    assert_eq!(a.iterations, c.iterations);
}

#[test]
fn invalid_problem_is_an_error() {
    let p = ConicProblem::new();
    assert!(InteriorPoint.solve(&p, &SolverOptions::default()).is_err());
}

#[test]
fn face_restriction_recovers_boundary_solution() {
    // X = [[a², a], [a, 1]] is forced by a = 3 and X₁₁ ≤ 9: no strictly
    // feasible point, but on the face X = t w tᵀ with t = (3, 1) all is regular
    let mut p = ConicProblem::new();
    let b = p.add_block(2);
    p.set_block_objective(b, e(2, 0, 0) + e(2, 0, 1));
    p.add_row(p.fixed_entry_row(b, 1, 1, 1.0).unwrap());
    let pin = p.add_row(ConstraintRow::new(Sense::Eq, 3.0).with_block(b, e(2, 0, 1)));
    let cap = p.add_row(ConstraintRow::new(Sense::Le, 9.0).with_block(b, e(2, 0, 0)));
    p.set_block_face(b, DMatrix::from_column_slice(2, 1, &[3.0, 1.0]));
    p.mark_implied(pin);
    p.mark_implied(cap);
    let s = solve(&p);
    assert_eq!(s.status, SolveStatus::Optimal);
    let x = s.block(b);
    let expected = DMatrix::from_row_slice(2, 2, &[9.0, 3.0, 3.0, 1.0]);
    assert!((x - &expected).amax() < 1e-8, "{x}");
    assert!((s.objective_value - 12.0).abs() < 1e-8);
    assert_eq!(s.row_duals[pin.0], 0.0);
}

#[test]
fn bad_face_is_rejected() {
    let mut p = ConicProblem::new();
    let b = p.add_block(2);
    p.set_block_face(b, DMatrix::zeros(3, 1));
    assert!(p.validate().is_err());
}
