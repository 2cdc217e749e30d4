use htc_conic::{InteriorPoint, SolverOptions};
use htc_core::analysis::{brute_force_oracle, grid_cell_slack, maxgen_check};
use htc_core::ccp::{ccp_solve, starting_relaxation, CcpOptions};
use htc_core::cuts::CutOptions;
use htc_core::shor::{build_relaxation, extract_schedule, solve_relaxation, verify_schedule, SolveSettings};
use htc_core::CaseStudy;

fn tol(a: f64, b: f64) -> f64 {
    1e-8 * (1.0 + a.abs().max(b.abs()))
}

fn bound(case: &CaseStudy, cuts: Option<CutOptions>) -> f64 {
    let rel = match cuts {
        None => build_relaxation(case),
        Some(o) => starting_relaxation(case, &o),
    };
    solve_relaxation(case, &rel, &InteriorPoint, &SolveSettings::default()).unwrap().objective_value
}

#[test]
fn maxgen_grows_with_the_bounds() {
    let base = CaseStudy::paranaiba().reduced(&["GH1"], 2);
    let mut wider = base.clone();
    wider.hydro[0].q_max *= 1.2;
    wider.hydro[0].v_max *= 1.1;
    let opts = SolverOptions::default();
    let a = maxgen_check(&base, &InteriorPoint, &opts).unwrap();
    let b = maxgen_check(&wider, &InteriorPoint, &opts).unwrap();
    for (t, (x, y)) in a.iter().zip(&b).enumerate() {
        assert!(y.max_hydro_mw >= x.max_hydro_mw - tol(x.max_hydro_mw, y.max_hydro_mw), "period {t}: {} < {}", y.max_hydro_mw, x.max_hydro_mw);
    }
    assert!(b.iter().map(|m| m.max_hydro_mw).sum::<f64>() > a.iter().map(|m| m.max_hydro_mw).sum::<f64>());
}

#[test]
fn cuts_only_tighten_the_bound() {
    let case = CaseStudy::paranaiba().reduced(&["GH1", "GH2"], 3);
    let plain = bound(&case, None);
    let upper = bound(&case, Some(CutOptions::default()));
    let all = bound(&case, Some(CutOptions { under_estimators: true }));
    assert!(plain <= upper + tol(plain, upper), "{plain} > {upper}");
    assert!(upper <= all + tol(upper, all), "{upper} > {all}");
}

#[test]
fn bounds_sit_below_the_grid_optimum() {
    for ids in [&["GH4"][..], &["GH5"][..], &["GH1"][..]] {
        let case = CaseStudy::paranaiba().reduced(ids, 2);
        let cuts = bound(&case, Some(CutOptions::default()));
        let oracle = brute_force_oracle(&case, 101).unwrap();
        assert!(bound(&case, None) <= cuts + tol(cuts, cuts));
        // the grid optimum bounds the true optimum from above
        assert!(cuts <= oracle.objective + tol(cuts, oracle.objective), "{ids:?}: {cuts} > {}", oracle.objective);
        assert!(verify_schedule(&case, &oracle.schedule, 1e-6).is_feasible(), "{ids:?}");
    }
}

#[test]
fn concave_case_is_settled_by_the_first_subproblem() {
    let case = CaseStudy::paranaiba().with_concave_production().reduced(&["GH1", "GH2"], 3);
    let (schedule, trace) = ccp_solve(&case, &InteriorPoint, &CcpOptions::default()).unwrap();
    assert!(trace.converged);
    // The linearization is exact, so the first subproblem already has the
    // starting objective; the metric it reports only reflects how thermal
    // output is split among units at equal cost, and the next one repeats it.
    assert!(trace.num_subproblems() <= 2, "{}", trace.num_subproblems());
    let k0 = trace.iterations[0].objective;
    for it in &trace.iterations[1..] {
        assert!((it.objective - k0).abs() <= tol(k0, it.objective), "k = {}: {k0} vs {}", it.k, it.objective);
    }
    assert!(verify_schedule(&case, &schedule, 1e-6).is_feasible());
}

#[test]
fn every_iterate_is_feasible_for_the_original_problem() {
    let mini = CaseStudy::mini();
    let (_, trace) = ccp_solve(&mini, &InteriorPoint, &CcpOptions::default()).unwrap();
    for it in trace.iterations.iter().skip(1) {
        let report = verify_schedule(&mini, &it.schedule, 1e-6);
        assert!(report.is_feasible(), "k = {}: {:?}", it.k, report.violations);
        assert!((report.objective - it.objective).abs() <= 1e-6 * (1.0 + it.objective.abs()), "k = {}", it.k);
    }
}

#[test]
fn ccp_result_is_within_grid_accuracy_of_the_oracle() {
    let case = CaseStudy::paranaiba().reduced(&["GH4"], 2);
    let (schedule, trace) = ccp_solve(&case, &InteriorPoint, &CcpOptions::default()).unwrap();
    let ccp = trace.last().unwrap().objective;
    let oracle = brute_force_oracle(&case, 201).unwrap().objective;
    let slack = grid_cell_slack(&case, 201, &schedule).unwrap();
    assert!(oracle <= ccp + slack + tol(oracle, ccp), "{oracle} > {ccp} + {slack}");
}

#[test]
fn rank_one_starting_point_gives_a_schedule() {
    let case = CaseStudy::paranaiba().with_concave_production().reduced(&["GH3"], 2);
    let rel = build_relaxation(&case);
    let sol = solve_relaxation(&case, &rel, &InteriorPoint, &SolveSettings::default()).unwrap();
    let s = extract_schedule(&case, &sol, &rel.layout, None).unwrap();
    // square roots of the diagonal: storage to about 1e-4 hm³
    let report = verify_schedule(&case, &s, 1e-3);
    assert!(report.is_feasible(), "{:?}", report.violations);
    assert!((s.cost(&case) - sol.objective_value).abs() <= 1e-5 * (1.0 + sol.objective_value.abs()));
}
