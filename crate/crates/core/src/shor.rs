//! Lifted semidefinite relaxation of the scheduling problem, solution
//! extraction and schedule verification.
//!
//! Every hydro plant and period gets a 3×3 block ordered `[v, q, 1]`, every
//! thermal plant and period a 2×2 block ordered `[p, 1]`, and every hydro
//! plant and period a nonnegative spillage scalar.

use htc_conic::{
    BlockId, ConicBackend, ConicError, ConicProblem, ConicSolution, ConstraintRow, RowId, ScalarId,
    Sense, SolveStatus, SolverOptions,
};
use nalgebra::DMatrix;
use thiserror::Error;

use crate::case::CaseStudy;
use crate::model::{ProductionQuadratic, ThermalPlant};

/// Storage entry `V • X = v`.
pub fn structure_v() -> DMatrix<f64> {
    let mut m = DMatrix::zeros(3, 3);
    m[(0, 2)] = 0.5;
    m[(2, 0)] = 0.5;
    m
}

/// Discharge entry `Q • X = q`.
pub fn structure_q() -> DMatrix<f64> {
    let mut m = DMatrix::zeros(3, 3);
    m[(1, 2)] = 0.5;
    m[(2, 1)] = 0.5;
    m
}

/// Thermal output `P • Y = p`.
pub fn structure_p() -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0])
}

fn corner(n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    m[(n - 1, n - 1)] = 1.0;
    m
}

/// The three linear selectors of the lifted space.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMatrices {
    pub v: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub p: DMatrix<f64>,
}

impl StructureMatrices {
    pub fn standard() -> Self {
        Self { v: structure_v(), q: structure_q(), p: structure_p() }
    }
}

/// `H` with `H • lift(v, q) = P_h(v, q)`: `Ĥ` in the leading 2×2 block, half
/// the linear coefficients on the border and the constant in the corner
/// (zero for constant-efficiency plants).
pub fn production_matrix(p: &ProductionQuadratic) -> DMatrix<f64> {
    let h = p.h_hat();
    DMatrix::from_row_slice(
        3,
        3,
        &[
            h[(0, 0)],
            h[(0, 1)],
            0.5 * p.eps_v,
            h[(1, 0)],
            h[(1, 1)],
            0.5 * p.eps_q,
            0.5 * p.eps_v,
            0.5 * p.eps_q,
            p.eps_0,
        ],
    )
}

/// `C` with `C • lift(p) = c2 p² + c1 p + c0`.
pub fn cost_matrix(t: &ThermalPlant) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[t.c2, 0.5 * t.c1, 0.5 * t.c1, t.c0])
}

/// Rank-one lift `[v, q, 1][v, q, 1]^T`.
pub fn lift_hydro(v: f64, q: f64) -> DMatrix<f64> {
    let x = nalgebra::DVector::from_vec(vec![v, q, 1.0]);
    &x * x.transpose()
}

/// Rank-one lift `[p, 1][p, 1]^T`.
pub fn lift_thermal(p: f64) -> DMatrix<f64> {
    let x = nalgebra::DVector::from_vec(vec![p, 1.0]);
    &x * x.transpose()
}

/// Where each original variable lives in the conic problem.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedLayout {
    /// `hydro[t][h]`.
    pub hydro: Vec<Vec<BlockId>>,
    /// `thermal[t][k]`; empty when the thermal side was not built.
    pub thermal: Vec<Vec<BlockId>>,
    /// `spill[t][h]`.
    pub spill: Vec<Vec<ScalarId>>,
    /// Power-balance row per period; empty when not built.
    pub power_rows: Vec<RowId>,
    /// `water_rows[t][h]`.
    pub water_rows: Vec<Vec<RowId>>,
    /// `pinned[t][h]`: the equality row fixing the storage and its value,
    /// for run-of-river plants and the final period.
    pub pinned: Vec<Vec<Option<(RowId, f64)>>>,
}

#[derive(Debug, Clone)]
pub struct Relaxation {
    pub problem: ConicProblem,
    pub layout: LiftedLayout,
}

/// Storage, discharge, water balance and final-volume rows over the hydro
/// blocks, without thermal plants or power balance.
pub fn build_hydro_set(case: &CaseStudy) -> Relaxation {
    let n_t = case.num_periods();
    let n_h = case.hydro.len();
    let mut problem = ConicProblem::new();
    let mut hydro = Vec::with_capacity(n_t);
    let mut spill = Vec::with_capacity(n_t);
    for _ in 0..n_t {
        hydro.push((0..n_h).map(|_| problem.add_block(3)).collect::<Vec<_>>());
        let row: Vec<ScalarId> = case
            .hydro
            .iter()
            .map(|plant| {
                let s = problem.add_scalar();
                problem.set_scalar_scaling(s, plant.q_max.abs().max(1.0));
                s
            })
            .collect();
        spill.push(row);
    }
    let v = structure_v();
    let q = structure_q();
    let mut water_rows = vec![Vec::with_capacity(n_h); n_t];
    let mut pinned = vec![vec![None; n_h]; n_t];

    for t in 0..n_t {
        let th = case.theta_at(t);
        for (h, plant) in case.hydro.iter().enumerate() {
            let id = &plant.id;
            let b = hydro[t][h];
            problem.set_block_scaling(b, vec![plant.v_max.abs().max(1.0), plant.q_max.abs().max(1.0), 1.0]);
            problem.add_row(ConstraintRow::new(Sense::Eq, 1.0).with_block(b, corner(3)).labeled(format!("one[{t},{id}]")));

            let last = t + 1 == n_t;
            if last {
                // the target storage lies within the bounds, so it replaces them
                let r = problem.add_row(
                    ConstraintRow::new(Sense::Eq, plant.v_final).with_block(b, v.clone()).labeled(format!("vfinal[{id}]")),
                );
                pinned[t][h] = Some((r, plant.v_final));
            } else if plant.is_run_of_river() {
                let r = problem
                    .add_row(ConstraintRow::new(Sense::Eq, plant.v_min).with_block(b, v.clone()).labeled(format!("v[{t},{id}]")));
                pinned[t][h] = Some((r, plant.v_min));
            } else {
                problem.add_row(ConstraintRow::new(Sense::Ge, plant.v_min).with_block(b, v.clone()).labeled(format!("vmin[{t},{id}]")));
                problem.add_row(ConstraintRow::new(Sense::Le, plant.v_max).with_block(b, v.clone()).labeled(format!("vmax[{t},{id}]")));
            }
            if plant.q_min == plant.q_max {
                problem.add_row(ConstraintRow::new(Sense::Eq, plant.q_min).with_block(b, q.clone()).labeled(format!("q[{t},{id}]")));
            } else {
                problem.add_row(ConstraintRow::new(Sense::Ge, plant.q_min).with_block(b, q.clone()).labeled(format!("qmin[{t},{id}]")));
                problem.add_row(ConstraintRow::new(Sense::Le, plant.q_max).with_block(b, q.clone()).labeled(format!("qmax[{t},{id}]")));
            }

            let mut rhs = case.inflow(t, h);
            let mut row = ConstraintRow::new(Sense::Eq, 0.0)
                .with_block(b, &v * th + &q)
                .with_scalar(spill[t][h], 1.0)
                .labeled(format!("water[{t},{id}]"));
            if t == 0 {
                rhs += th * plant.v_initial;
            } else {
                row.add_block(hydro[t - 1][h], &v * -th);
            }
            for u in case.upstream_of(h) {
                row.add_block(hydro[t][u], -&q);
                row.add_scalar(spill[t][u], -1.0);
            }
            row.rhs = rhs;
            water_rows[t].push(problem.add_row(row));
        }
    }
    Relaxation {
        problem,
        layout: LiftedLayout { hydro, thermal: Vec::new(), spill, power_rows: Vec::new(), water_rows, pinned },
    }
}

/// Relaxation with production matrices supplied per `[t][h]`.
pub fn build_relaxation_with(case: &CaseStudy, production: &[Vec<DMatrix<f64>>]) -> Relaxation {
    let mut rel = build_hydro_set(case);
    let n_t = case.num_periods();
    let p = structure_p();
    let problem = &mut rel.problem;
    let mut thermal = Vec::with_capacity(n_t);
    for t in 0..n_t {
        let mut row_blocks = Vec::with_capacity(case.thermal.len());
        for plant in &case.thermal {
            let id = &plant.id;
            let b = problem.add_block(2);
            problem.set_block_scaling(b, vec![plant.p_max.abs().max(1.0), 1.0]);
            problem.set_block_objective(b, cost_matrix(plant));
            problem.add_row(ConstraintRow::new(Sense::Eq, 1.0).with_block(b, corner(2)).labeled(format!("one[{t},{id}]")));
            if plant.p_min == plant.p_max {
                problem.add_row(ConstraintRow::new(Sense::Eq, plant.p_min).with_block(b, p.clone()).labeled(format!("p[{t},{id}]")));
            } else {
                problem.add_row(ConstraintRow::new(Sense::Ge, plant.p_min).with_block(b, p.clone()).labeled(format!("pmin[{t},{id}]")));
                problem.add_row(ConstraintRow::new(Sense::Le, plant.p_max).with_block(b, p.clone()).labeled(format!("pmax[{t},{id}]")));
            }
            row_blocks.push(b);
        }
        thermal.push(row_blocks);
    }
    let mut power_rows = Vec::with_capacity(n_t);
    for t in 0..n_t {
        let mut row = ConstraintRow::new(Sense::Ge, case.load_at(t)).labeled(format!("power[{t}]"));
        for h in 0..case.hydro.len() {
            row.add_block(rel.layout.hydro[t][h], production[t][h].clone());
        }
        for &b in &thermal[t] {
            row.add_block(b, p.clone());
        }
        power_rows.push(problem.add_row(row));
    }
    rel.layout.thermal = thermal;
    rel.layout.power_rows = power_rows;
    rel
}

/// The plain lifted relaxation: minimize thermal cost subject to power
/// balance (as `≥`), water balance, bounds and the final storage target.
pub fn build_relaxation(case: &CaseStudy) -> Relaxation {
    let h: Vec<DMatrix<f64>> = case.hydro.iter().map(|p| production_matrix(&p.production)).collect();
    let production = vec![h; case.num_periods()];
    build_relaxation_with(case, &production)
}

#[derive(Debug, Error)]
pub enum RelaxationError {
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error("solver returned {status}")]
    Status { status: SolveStatus, solution: Box<ConicSolution> },
}

/// Solver settings for relaxation solves.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveSettings {
    pub solver: SolverOptions,
    /// Re-solve with a proximal term that squeezes the block diagonals onto
    /// the squared border entries, so that the square roots of the diagonals
    /// are meaningful. Needed whenever the optimal face is not a single point.
    pub polish: bool,
    /// Weight of the polishing term relative to `1 + |objective|`.
    pub polish_weight: f64,
    /// Number of polishing re-solves; each re-centres the proximal term on
    /// the previous point, so the border drifts to the optimum even under a
    /// strong weight.
    pub polish_passes: usize,
}

impl Default for SolveSettings {
    fn default() -> Self {
        Self { solver: SolverOptions::default(), polish: true, polish_weight: 1e-2, polish_passes: 3 }
    }
}

/// Solves the relaxation. With `polish` the returned point comes from the
/// trace-regularized re-solve, while the objective, duals and residuals stay
/// those of the first solve. A failed re-solve falls back to the first
/// solution.
pub fn solve_relaxation(
    case: &CaseStudy,
    rel: &Relaxation,
    backend: &dyn ConicBackend,
    settings: &SolveSettings,
) -> Result<ConicSolution, RelaxationError> {
    let sol = backend.solve(&rel.problem, &settings.solver)?;
    if !sol.is_optimal() {
        return Err(RelaxationError::Status { status: sol.status, solution: Box::new(sol) });
    }
    if !settings.polish || settings.polish_passes == 0 {
        return Ok(sol);
    }
    let mut current = sol.clone();
    let mut iterations = sol.iterations;
    for _ in 0..settings.polish_passes {
        let polished = polish_problem(case, rel, &current, sol.objective_value, settings.polish_weight);
        match backend.solve(&polished, &settings.solver) {
            Ok(p) if p.is_optimal() => {
                iterations += p.iterations;
                current = p;
            }
            _ => break,
        }
    }
    Ok(ConicSolution { block_values: current.block_values, scalar_values: current.scalar_values, iterations, ..sol })
}

/// The relaxation with the proximal term `Σ_d (X_dd − 2 x̃_d x_d + x̃_d²) / d̄²`
/// added to the cost, over storage, discharge and thermal output with `x̃`
/// the first solve's border entries. At a lifted point the term reads
/// `Σ (x_d − x̃_d)² + (X_dd − x_d²)`, so it penalizes the spread of the
/// diagonal above the squared border (zero exactly at rank one) without
/// pulling the border away from the first solution. It is scaled to be worth
/// `weight · (1 + |objective|)` per unit of normalized spread.
fn polish_problem(case: &CaseStudy, rel: &Relaxation, first: &ConicSolution, objective: f64, weight: f64) -> ConicProblem {
    let mut p = rel.problem.clone();
    let n_t = rel.layout.hydro.len();
    let terms = n_t * (2 * case.hydro.len() + if rel.layout.thermal.is_empty() { 0 } else { case.thermal.len() });
    let delta = weight * (1.0 + objective.abs()) / terms.max(1) as f64;
    let proximal = |x: &DMatrix<f64>, scales: &[f64]| {
        let n = x.nrows();
        let mut w = DMatrix::zeros(n, n);
        for (d, s) in scales.iter().enumerate() {
            let k = delta / s.abs().max(1.0).powi(2);
            let centre = x[(d, n - 1)];
            w[(d, d)] += k;
            w[(d, n - 1)] -= k * centre;
            w[(n - 1, d)] -= k * centre;
            w[(n - 1, n - 1)] += k * centre * centre;
        }
        w
    };
    for t in 0..n_t {
        for (h, plant) in case.hydro.iter().enumerate() {
            let b = rel.layout.hydro[t][h];
            p.add_block_objective(b, &proximal(first.block(b), &[plant.v_max, plant.q_max]));
        }
        if let Some(blocks) = rel.layout.thermal.get(t) {
            for (k, plant) in case.thermal.iter().enumerate() {
                p.add_block_objective(blocks[k], &proximal(first.block(blocks[k]), &[plant.p_max]));
            }
        }
    }
    p
}

/// Recovered operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct Schedule {
    /// `v[t][h]` in hm³.
    pub v: Vec<Vec<f64>>,
    /// `q[t][h]` in m³/s.
    pub q: Vec<Vec<f64>>,
    /// `s[t][h]` in m³/s.
    pub s: Vec<Vec<f64>>,
    /// `hydro_mw[t][h]`.
    pub hydro_mw: Vec<Vec<f64>>,
    /// `p[t][k]` in MW.
    pub p: Vec<Vec<f64>>,
    pub objective: f64,
}

impl Schedule {
    pub fn num_periods(&self) -> usize {
        self.v.len()
    }

    /// Thermal cost of the schedule's thermal outputs.
    pub fn cost(&self, case: &CaseStudy) -> f64 {
        self.p
            .iter()
            .map(|row| row.iter().zip(&case.thermal).map(|(p, plant)| plant.cost(*p)).sum::<f64>())
            .sum()
    }

    /// Production-function output at the recovered storages and discharges.
    pub fn generation(&self, case: &CaseStudy, t: usize, h: usize) -> f64 {
        case.hydro[h].production.evaluate(self.v[t][h], self.q[t][h])
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("block for {what} has diagonal entry {value} below zero")]
pub struct ExtractionError {
    pub what: String,
    pub value: f64,
}

fn sqrt_diag(x: f64, tol: f64, what: impl FnOnce() -> String) -> Result<f64, ExtractionError> {
    if x < -tol {
        return Err(ExtractionError { what: what(), value: x });
    }
    Ok(x.max(0.0).sqrt())
}

/// Reads `v = sqrt(X11)`, `q = sqrt(X22)`, `p = sqrt(Y11)` and the spillages.
/// Hydro output is the lifted value `H • X` for the supplied production
/// matrices (`None` uses the case's production functions).
pub fn extract_schedule(
    case: &CaseStudy,
    sol: &ConicSolution,
    layout: &LiftedLayout,
    production: Option<&[Vec<DMatrix<f64>>]>,
) -> Result<Schedule, ExtractionError> {
    let tol = 1e-7;
    let n_t = layout.hydro.len();
    let exact: Vec<DMatrix<f64>> = case.hydro.iter().map(|p| production_matrix(&p.production)).collect();
    let mut s = Schedule {
        v: Vec::with_capacity(n_t),
        q: Vec::with_capacity(n_t),
        s: Vec::with_capacity(n_t),
        hydro_mw: Vec::with_capacity(n_t),
        p: Vec::with_capacity(n_t),
        objective: sol.objective_value,
    };
    for t in 0..n_t {
        let (mut vs, mut qs, mut ss, mut gs) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        for (h, plant) in case.hydro.iter().enumerate() {
            let x = sol.block(layout.hydro[t][h]);
            let scale = x.amax().max(1.0);
            vs.push(sqrt_diag(x[(0, 0)], tol * scale, || format!("storage of {} in period {}", plant.id, t + 1))?);
            qs.push(sqrt_diag(x[(1, 1)], tol * scale, || format!("discharge of {} in period {}", plant.id, t + 1))?);
            ss.push(sol.scalar(layout.spill[t][h]).max(0.0));
            let hm = production.map_or(&exact[h], |p| &p[t][h]);
            gs.push(htc_conic::frobenius(hm, x));
        }
        let mut ps = Vec::new();
        if let Some(blocks) = layout.thermal.get(t) {
            for (k, plant) in case.thermal.iter().enumerate() {
                let y = sol.block(blocks[k]);
                let scale = y.amax().max(1.0);
                ps.push(sqrt_diag(y[(0, 0)], tol * scale, || format!("output of {} in period {}", plant.id, t + 1))?);
            }
        }
        s.v.push(vs);
        s.q.push(qs);
        s.s.push(ss);
        s.hydro_mw.push(gs);
        s.p.push(ps);
    }
    Ok(s)
}

/// `λ₂ / λ₁` of a symmetric block (0 for rank one, 1 for a multiple of the
/// identity).
pub fn rank1_ratio(x: &DMatrix<f64>) -> f64 {
    let ev = htc_conic::sorted_eigenvalues(x);
    if ev.len() < 2 || ev[0] <= 0.0 {
        return 0.0;
    }
    (ev[1].max(0.0)) / ev[0]
}

/// Per-block rank-one ratios of the hydro blocks, `[t][h]`, and their maximum.
pub fn rank1_gap(sol: &ConicSolution, layout: &LiftedLayout) -> (Vec<Vec<f64>>, f64) {
    let ratios: Vec<Vec<f64>> =
        layout.hydro.iter().map(|row| row.iter().map(|&b| rank1_ratio(sol.block(b))).collect()).collect();
    let max = ratios.iter().flatten().copied().fold(0.0, f64::max);
    (ratios, max)
}

/// One constraint of the original problem that a schedule violates.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub constraint: String,
    pub amount: f64,
}

/// Residuals of a schedule against the original (unlifted) constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    /// `Σ generation + Σ thermal − load` per period, generation from the
    /// production functions at the schedule's `(v, q)`.
    pub power_slack: Vec<f64>,
    /// Water-balance residual per `[t][h]` (m³/s).
    pub water_residual: Vec<Vec<f64>>,
    pub violations: Vec<Violation>,
    /// Thermal cost recomputed from the schedule's outputs.
    pub objective: f64,
}

impl VerificationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn max_water_residual(&self) -> f64 {
        self.water_residual.iter().flatten().fold(0.0, |a, r| a.max(r.abs()))
    }
}

/// `Σ hydro + Σ thermal − load` for period `t`.
pub fn power_balance_slack(case: &CaseStudy, t: usize, hydro_mw: &[f64], thermal_mw: &[f64]) -> f64 {
    hydro_mw.iter().sum::<f64>() + thermal_mw.iter().sum::<f64>() - case.load_at(t)
}

/// Water-balance residual `θ(v_t − v_{t−1}) + q + s − Σ_up (q + s) − e` of
/// plant `h` in period `t`.
pub fn water_residual(case: &CaseStudy, s: &Schedule, t: usize, h: usize) -> f64 {
    let th = case.theta_at(t);
    let prev = if t == 0 { case.hydro[h].v_initial } else { s.v[t - 1][h] };
    let up: f64 = case.upstream_of(h).iter().map(|&u| s.q[t][u] + s.s[t][u]).sum();
    th * (s.v[t][h] - prev) + s.q[t][h] + s.s[t][h] - up - case.inflow(t, h)
}

pub fn verify_schedule(case: &CaseStudy, s: &Schedule, tol: f64) -> VerificationReport {
    let n_t = case.num_periods();
    let mut violations = Vec::new();
    let mut check = |name: String, amount: f64| {
        if amount > tol {
            violations.push(Violation { constraint: name, amount });
        }
    };
    let mut power_slack = Vec::with_capacity(n_t);
    let mut water = Vec::with_capacity(n_t);
    for t in 0..n_t {
        let gen: Vec<f64> = (0..case.hydro.len()).map(|h| s.generation(case, t, h)).collect();
        let slack = power_balance_slack(case, t, &gen, &s.p[t]);
        check(format!("power balance, period {}", t + 1), -slack);
        power_slack.push(slack);
        let mut row = Vec::with_capacity(case.hydro.len());
        for (h, plant) in case.hydro.iter().enumerate() {
            let id = &plant.id;
            let r = water_residual(case, s, t, h);
            check(format!("water balance of {id}, period {}", t + 1), r.abs());
            row.push(r);
            let (v, q) = (s.v[t][h], s.q[t][h]);
            check(format!("storage of {id} below minimum, period {}", t + 1), plant.v_min - v);
            check(format!("storage of {id} above maximum, period {}", t + 1), v - plant.v_max);
            check(format!("discharge of {id} below minimum, period {}", t + 1), plant.q_min - q);
            check(format!("discharge of {id} above maximum, period {}", t + 1), q - plant.q_max);
            check(format!("spillage of {id} negative, period {}", t + 1), -s.s[t][h]);
            if t + 1 == n_t {
                check(format!("final storage of {id}"), (v - plant.v_final).abs());
            }
        }
        water.push(row);
        for (k, plant) in case.thermal.iter().enumerate() {
            let p = s.p[t][k];
            check(format!("output of {} below minimum, period {}", plant.id, t + 1), plant.p_min - p);
            check(format!("output of {} above maximum, period {}", plant.id, t + 1), p - plant.p_max);
        }
    }
    VerificationReport { power_slack, water_residual: water, violations, objective: s.cost(case) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{HydroPlant, Period};
    use crate::case::Horizon;

    fn single_plant_case() -> CaseStudy {
        CaseStudy {
            hydro: vec![HydroPlant {
                id: "H".into(),
                v_min: 0.0,
                v_max: 100.0,
                q_min: 0.0,
                q_max: 50.0,
                v_initial: 80.0,
                v_final: 80.0,
                production: ProductionQuadratic::constant_efficiency(0.3, -1e-4, 1e-4),
                upstream: vec![],
            }],
            thermal: vec![ThermalPlant { id: "T".into(), p_min: 0.0, p_max: 100.0, c0: 0.0, c1: 0.0, c2: 0.5 }],
            horizon: Horizon {
                periods: vec![Period { days: 30.0, load: 50.0 }],
                inflows: [("H".to_string(), vec![20.0])].into_iter().collect(),
            },
        }
    }

    #[test]
    fn structure_matrices_select_entries() {
        let x = lift_hydro(7.0, 3.0);
        assert_eq!(htc_conic::frobenius(&structure_v(), &x), 7.0);
        assert_eq!(htc_conic::frobenius(&structure_q(), &x), 3.0);
        assert_eq!(htc_conic::frobenius(&structure_p(), &lift_thermal(5.0)), 5.0);
    }

    #[test]
    fn production_matrix_reproduces_production() {
        let p = ProductionQuadratic::constant_efficiency(0.297, -3.06e-5, 3.84e-4);
        let h = production_matrix(&p);
        assert_eq!(h[(2, 2)], 0.0);
        assert!(htc_conic::is_symmetric(&h, 0.0));
        let x = lift_hydro(241.1, 300.0);
        assert!((htc_conic::frobenius(&h, &x) - p.evaluate(241.1, 300.0)).abs() < 1e-12);
    }

    #[test]
    fn cost_matrix_examples() {
        let t = |c0, c1, c2| ThermalPlant { id: "T".into(), p_min: 0.0, p_max: 1.0, c0, c1, c2 };
        assert_eq!(cost_matrix(&t(0.0, 0.0, 0.5)), DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.0]));
        let c = cost_matrix(&t(1.0, 2.0, 3.0));
        assert_eq!(c, DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 1.0]));
        assert_eq!(htc_conic::frobenius(&c, &lift_thermal(2.0)), 17.0);
        assert_eq!(cost_matrix(&t(0.0, 0.0, 0.0)), DMatrix::zeros(2, 2));
    }

    #[test]
    fn single_period_water_balance_row() {
        let case = single_plant_case();
        let rel = build_relaxation(&case);
        let rows: Vec<_> = rel.problem.rows().iter().filter(|r| r.label.starts_with("water")).collect();
        assert_eq!(rows.len(), 1);
        let row = rows[0];
        let th = case.theta_at(0);
        assert!((row.rhs - (20.0 + th * 80.0)).abs() < 1e-12);
        let x = row.blocks[0].1.clone();
        assert!((x[(0, 2)] - 0.5 * th).abs() < 1e-15);
        assert_eq!(x[(1, 2)], 0.5);
        assert_eq!(row.scalars, vec![(rel.layout.spill[0][0], 1.0)]);
    }

    #[test]
    fn paranaiba_dimensions() {
        let case = CaseStudy::paranaiba();
        let rel = build_relaxation(&case);
        let dims = rel.problem.block_dims();
        assert_eq!(dims.iter().filter(|&&d| d == 3).count(), 60);
        assert_eq!(dims.iter().filter(|&&d| d == 2).count(), 12);
        assert_eq!(rel.problem.num_scalars(), 60);
        assert_eq!(rel.layout.power_rows.len(), 12);
        assert!(rel.problem.validate().is_ok());
    }

    #[test]
    fn lifting_round_trip_reproduces_row_values() {
        let case = CaseStudy::paranaiba();
        let rel = build_relaxation(&case);
        // arbitrary in-bounds point
        let mut blocks: Vec<DMatrix<f64>> = rel.problem.block_dims().iter().map(|&n| DMatrix::zeros(n, n)).collect();
        let mut scalars = vec![0.0; rel.problem.num_scalars()];
        let mut sched = Schedule { v: vec![], q: vec![], s: vec![], hydro_mw: vec![], p: vec![], objective: 0.0 };
        for t in 0..12 {
            let (mut vs, mut qs, mut ss) = (vec![], vec![], vec![]);
            for (h, plant) in case.hydro.iter().enumerate() {
                let v = 0.5 * (plant.v_min + plant.v_max) + t as f64;
                let q = plant.q_min + 10.0 * (h + t) as f64;
                blocks[rel.layout.hydro[t][h].0] = lift_hydro(v, q);
                scalars[rel.layout.spill[t][h].0] = 0.25 * h as f64;
                vs.push(v);
                qs.push(q);
                ss.push(0.25 * h as f64);
            }
            let p = 700.0 + t as f64;
            blocks[rel.layout.thermal[t][0].0] = lift_thermal(p);
            sched.v.push(vs);
            sched.q.push(qs);
            sched.s.push(ss);
            sched.p.push(vec![p]);
        }
        for t in 0..12 {
            for h in 0..5 {
                let row = &rel.problem.rows()[rel.layout.water_rows[t][h].0];
                let lifted = row.evaluate(&blocks, &scalars) - row.rhs;
                let direct = water_residual(&case, &sched, t, h);
                assert!((lifted - direct).abs() < 1e-9, "t={t} h={h}: {lifted} vs {direct}");
            }
            let row = &rel.problem.rows()[rel.layout.power_rows[t].0];
            let gen: Vec<f64> = (0..5).map(|h| sched.generation(&case, t, h)).collect();
            let direct = power_balance_slack(&case, t, &gen, &sched.p[t]);
            assert!((row.evaluate(&blocks, &scalars) - row.rhs - direct).abs() < 1e-9);
        }
        let obj = rel.problem.objective_at(&blocks, &scalars);
        assert!((obj - sched.cost(&case)).abs() < 1e-6);
    }

    #[test]
    fn extraction_inverts_the_lift() {
        let case = single_plant_case();
        let rel = build_relaxation(&case);
        let mut blocks: Vec<DMatrix<f64>> = rel.problem.block_dims().iter().map(|&n| DMatrix::zeros(n, n)).collect();
        blocks[rel.layout.hydro[0][0].0] = lift_hydro(100.0, 50.0);
        blocks[rel.layout.thermal[0][0].0] = lift_thermal(0.0);
        let sol = ConicSolution {
            status: SolveStatus::Optimal,
            block_values: blocks,
            scalar_values: vec![0.0],
            row_duals: vec![],
            objective_value: 0.0,
            dual_objective: 0.0,
            residuals: Default::default(),
            iterations: 0,
        };
        let s = extract_schedule(&case, &sol, &rel.layout, None).unwrap();
        assert_eq!((s.v[0][0], s.q[0][0]), (100.0, 50.0));
        assert_eq!(s.p[0][0], 0.0);

        let mut bad = sol.clone();
        bad.block_values[rel.layout.hydro[0][0].0][(0, 0)] = -1.0;
        assert!(extract_schedule(&case, &bad, &rel.layout, None).is_err());
    }

    #[test]
    fn rank1_ratio_examples() {
        assert!(rank1_ratio(&lift_hydro(3.0, 4.0)) < 1e-15);
        assert!((rank1_ratio(&DMatrix::identity(3, 3)) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn verification_flags_violations() {
        let case = CaseStudy::paranaiba();
        let zero = Schedule {
            v: vec![vec![0.0; 5]; 12],
            q: vec![vec![0.0; 5]; 12],
            s: vec![vec![0.0; 5]; 12],
            hydro_mw: vec![vec![0.0; 5]; 12],
            p: vec![vec![0.0]; 12],
            objective: 0.0,
        };
        let r = verify_schedule(&case, &zero, 1e-6);
        assert!(!r.is_feasible());
        // with zero volumes and flows the residual of later periods is the inflow
        for t in 1..12 {
            for h in 0..5 {
                assert!((r.water_residual[t][h] + case.inflow(t, h)).abs() < 1e-12);
            }
        }

        let mut one = zero.clone();
        let gh1 = case.hydro_index("GH1").unwrap();
        one.q[0][gh1] = 500.0;
        let r = verify_schedule(&case, &one, 1e-6);
        assert!(r.violations.iter().any(|v| v.constraint == "discharge of GH1 above maximum, period 1"));
    }

    #[test]
    fn published_first_month_is_balanced() {
        let case = CaseStudy::paranaiba();
        let hydro = [117.49, 98.73, 217.53, 304.40, 37.06];
        assert!(power_balance_slack(&case, 0, &hydro, &[776.19]).abs() < 1e-9);
    }
}
