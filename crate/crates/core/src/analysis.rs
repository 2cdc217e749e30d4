//! Exactness diagnostics, a brute-force oracle for small instances and a
//! finite-difference stationarity check.

use std::fmt::Write as _;

use htc_conic::{ConicBackend, ConicError, SolveStatus, SolverOptions};
use nalgebra::DMatrix;
use rayon::prelude::*;
use thiserror::Error;

use crate::case::CaseStudy;
use crate::cuts::{rlt_cuts, CutOptions};
use crate::model::Definiteness;
use crate::report::sig6;
use crate::shor::{
    build_hydro_set, build_relaxation, production_matrix, rank1_gap, solve_relaxation, RelaxationError,
    Schedule, SolveSettings, StructureMatrices,
};

/// Largest grid the oracle will enumerate.
pub const MAX_ORACLE_POINTS: u128 = 10_000_000;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Relaxation(#[from] RelaxationError),
    #[error("maximum generation of period {period} could not be computed: solver returned {status}")]
    MaxGen { period: usize, status: SolveStatus },
    #[error("oracle grid has {points:.3e} points, more than the limit of {MAX_ORACLE_POINTS}")]
    Intractable { points: f64 },
    #[error("oracle grid needs at least two points per axis, got {0}")]
    BadGrid(usize),
    #[error("no grid point satisfies the bounds, the final storages and the load")]
    NoFeasiblePoint,
}

/// Per-period result of the maximum-hydro-generation test.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxGen {
    /// Maximum of `Σ_h H • X` in the period over the cut-tightened hydro set.
    pub max_hydro_mw: f64,
    pub load: f64,
    pub thermal_min: f64,
    /// `load ≥ Σ p̲ + max hydro`: the load cannot be met by hydro alone, so
    /// the power balance may be written as an inequality.
    pub holds: bool,
}

/// Weight of the normalized diagonal term that keeps the maximization
/// well posed: entries of `X̂` that no row or cost bounds from above (the
/// squared discharge of every other period) would otherwise be free.
const MAXGEN_REGULARIZATION: f64 = 1e-8;

/// Maximizes the hydro generation of each period, subject to the water
/// balance of the whole horizon, the bounds and the McCormick rows, and
/// compares it with the load net of the thermal minimum. The reported
/// maximum is `Σ H • X` at the solution; a normalized diagonal term of
/// weight `MAXGEN_REGULARIZATION` MW per block selects a bounded optimum.
pub fn maxgen_check(case: &CaseStudy, backend: &dyn ConicBackend, opts: &SolverOptions) -> Result<Vec<MaxGen>, AnalysisError> {
    let thermal_min: f64 = case.thermal.iter().map(|p| p.p_min).sum();
    let mut base = build_hydro_set(case);
    rlt_cuts(case, &base.layout, &CutOptions::default()).apply(case, &mut base);
    let h_mats: Vec<DMatrix<f64>> = case.hydro.iter().map(|p| production_matrix(&p.production)).collect();
    (0..case.num_periods())
        .map(|t| {
            let mut problem = base.problem.clone();
            for row in &base.layout.hydro {
                for (h, &b) in row.iter().enumerate() {
                    let plant = &case.hydro[h];
                    let mut w = DMatrix::zeros(3, 3);
                    w[(0, 0)] = MAXGEN_REGULARIZATION / plant.v_max.abs().max(1.0).powi(2);
                    w[(1, 1)] = MAXGEN_REGULARIZATION / plant.q_max.abs().max(1.0).powi(2);
                    problem.set_block_objective(b, w);
                }
            }
            for (h, m) in h_mats.iter().enumerate() {
                problem.add_block_objective(base.layout.hydro[t][h], &-m);
            }
            let sol = backend.solve(&problem, opts)?;
            if !sol.is_optimal() {
                return Err(AnalysisError::MaxGen { period: t + 1, status: sol.status });
            }
            let max_hydro_mw: f64 =
                h_mats.iter().enumerate().map(|(h, m)| htc_conic::frobenius(m, sol.block(base.layout.hydro[t][h]))).sum();
            let load = case.load_at(t);
            Ok(MaxGen { max_hydro_mw, load, thermal_min, holds: load >= thermal_min + max_hydro_mw })
        })
        .collect()
}

/// Off-diagonal signs of the structure matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignConditions {
    pub v_nonnegative: bool,
    pub q_nonnegative: bool,
    pub p_nonnegative: bool,
}

impl SignConditions {
    /// All three off-diagonal nonnegative: the sign-pattern conditions for an
    /// exact relaxation (which need nonpositive off-diagonals) do not apply.
    pub fn exactness_conditions_fail(&self) -> bool {
        self.v_nonnegative && self.q_nonnegative && self.p_nonnegative
    }
}

fn off_diagonal_nonnegative(m: &DMatrix<f64>) -> bool {
    (0..m.nrows()).all(|i| (0..m.ncols()).all(|j| i == j || m[(i, j)] >= 0.0))
}

pub fn sign_condition_check(matrices: &StructureMatrices) -> SignConditions {
    SignConditions {
        v_nonnegative: off_diagonal_nonnegative(&matrices.v),
        q_nonnegative: off_diagonal_nonnegative(&matrices.q),
        p_nonnegative: off_diagonal_nonnegative(&matrices.p),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactnessReport {
    pub plant_ids: Vec<String>,
    pub maxgen: Vec<MaxGen>,
    /// `[t][h]` rank-one ratios of the plain relaxation's hydro blocks.
    pub rank1: Vec<Vec<f64>>,
    pub signs: SignConditions,
    pub definiteness: Vec<Definiteness>,
    pub relaxation_objective: f64,
}

impl ExactnessReport {
    pub fn max_rank1(&self) -> f64 {
        self.rank1.iter().flatten().copied().fold(0.0, f64::max)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "relaxation objective: {:.6}", self.relaxation_objective);
        let _ = writeln!(out, "largest rank-one ratio: {:.3e}", self.max_rank1());
        let _ = writeln!(
            out,
            "structure off-diagonals nonnegative: V {} Q {} P {}{}",
            self.signs.v_nonnegative,
            self.signs.q_nonnegative,
            self.signs.p_nonnegative,
            if self.signs.exactness_conditions_fail() {
                " (sign-pattern exactness conditions do not apply)"
            } else {
                ""
            }
        );
        for (id, d) in self.plant_ids.iter().zip(&self.definiteness) {
            let _ = writeln!(out, "plant {id}: production {d}");
        }
        for (t, m) in self.maxgen.iter().enumerate() {
            let _ = writeln!(
                out,
                "period {}: max hydro {:.3} MW, load {:.3} MW, thermal minimum {:.3} MW, inequality balance {}",
                t + 1,
                m.max_hydro_mw,
                m.load,
                m.thermal_min,
                if m.holds { "justified" } else { "not justified" }
            );
        }
        out
    }

    /// One line per period and plant.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("period,plant,definiteness,rank1_ratio,max_hydro_mw,inequality_justified\n");
        for (t, row) in self.rank1.iter().enumerate() {
            for (h, r) in row.iter().enumerate() {
                let m = &self.maxgen[t];
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{}",
                    t + 1,
                    self.plant_ids[h],
                    self.definiteness[h],
                    sig6(*r),
                    sig6(m.max_hydro_mw),
                    m.holds
                );
            }
        }
        out
    }
}

/// Rank-one ratios of the plain relaxation, the maximum-generation test, the
/// structure sign conditions and the definiteness of every production
/// function.
pub fn exactness_report(
    case: &CaseStudy,
    backend: &dyn ConicBackend,
    settings: &SolveSettings,
) -> Result<ExactnessReport, AnalysisError> {
    let rel = build_relaxation(case);
    let sol = solve_relaxation(case, &rel, backend, settings)?;
    let (rank1, _) = rank1_gap(&sol, &rel.layout);
    Ok(ExactnessReport {
        plant_ids: case.hydro.iter().map(|p| p.id.clone()).collect(),
        maxgen: maxgen_check(case, backend, &settings.solver)?,
        rank1,
        signs: sign_condition_check(&StructureMatrices::standard()),
        definiteness: case.hydro.iter().map(|p| p.production.classify()).collect(),
        relaxation_objective: sol.objective_value,
    })
}

/// Cheapest thermal dispatch covering `residual` MW: equal incremental cost
/// between the bounds. `None` when the residual exceeds the total capacity.
/// A residual below the total minimum leaves every plant at its minimum.
pub fn dispatch(case: &CaseStudy, residual: f64) -> Option<Vec<f64>> {
    let plants = &case.thermal;
    let p_min: f64 = plants.iter().map(|p| p.p_min).sum();
    let p_max: f64 = plants.iter().map(|p| p.p_max).sum();
    let tol = 1e-9 * p_max.abs().max(1.0);
    if residual > p_max + tol {
        return None;
    }
    if residual <= p_min {
        return Some(plants.iter().map(|p| p.p_min).collect());
    }
    let output = |lambda: f64| -> Vec<f64> {
        plants
            .iter()
            .map(|p| {
                let free = if p.c2 > 0.0 {
                    (lambda - p.c1) / (2.0 * p.c2)
                } else if lambda >= p.c1 {
                    p.p_max
                } else {
                    p.p_min
                };
                free.clamp(p.p_min, p.p_max)
            })
            .collect()
    };
    let marginal = |p: &crate::model::ThermalPlant, x: f64| p.c1 + 2.0 * p.c2 * x;
    let mut lo = plants.iter().map(|p| marginal(p, p.p_min)).fold(f64::INFINITY, f64::min);
    let mut hi = plants.iter().map(|p| marginal(p, p.p_max)).fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if output(mid).iter().sum::<f64>() < residual {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut p = output(hi);
    // plants with flat costs absorb the rounding of the bisection
    let excess = p.iter().sum::<f64>() - residual;
    if excess > 0.0 {
        if let Some(k) = (0..plants.len()).find(|&k| p[k] - plants[k].p_min >= excess) {
            p[k] -= excess;
        }
    }
    Some(p)
}

/// Plants ordered so that every plant comes after all its upstream plants.
fn upstream_first(case: &CaseStudy) -> Vec<usize> {
    let n = case.hydro.len();
    let mut order = Vec::with_capacity(n);
    let mut placed = vec![false; n];
    while order.len() < n {
        let before = order.len();
        for h in 0..n {
            if !placed[h] && case.upstream_of(h).iter().all(|&u| placed[u]) {
                placed[h] = true;
                order.push(h);
            }
        }
        if order.len() == before {
            // cyclic topology; validation rejects it, keep the remaining order
            order.extend((0..n).filter(|&h| !placed[h]));
            break;
        }
    }
    order
}

/// Whether the discharge of `(t, h)` follows from the water balance because
/// the storage is fixed (run-of-river plants, and every plant in the last
/// period where the target storage applies).
fn storage_pinned(case: &CaseStudy, t: usize, h: usize) -> Option<f64> {
    let plant = &case.hydro[h];
    if t + 1 == case.num_periods() {
        Some(plant.v_final)
    } else if plant.is_run_of_river() {
        Some(plant.v_min)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    /// Cheapest cost over the grid.
    pub objective: f64,
    pub schedule: Schedule,
    /// Number of enumerated grid points.
    pub points: u128,
}

/// Discharges that the oracle enumerates, and the order in which plants are
/// simulated within a period.
struct GridLayout {
    free: Vec<(usize, usize)>,
    slot: Vec<Vec<Option<usize>>>,
    order: Vec<usize>,
}

impl GridLayout {
    fn new(case: &CaseStudy) -> Self {
        let n_t = case.num_periods();
        let n_h = case.hydro.len();
        let free: Vec<(usize, usize)> = (0..n_t)
            .flat_map(|t| (0..n_h).map(move |h| (t, h)))
            .filter(|&(t, h)| storage_pinned(case, t, h).is_none())
            .collect();
        let mut slot = vec![vec![None; n_h]; n_t];
        for (k, &(t, h)) in free.iter().enumerate() {
            slot[t][h] = Some(k);
        }
        Self { free, slot, order: upstream_first(case) }
    }

    fn grid_value(case: &CaseStudy, grid_n: usize, h: usize, i: usize) -> f64 {
        let p = &case.hydro[h];
        p.q_min + (p.q_max - p.q_min) * i as f64 / (grid_n - 1) as f64
    }

    fn free_discharges(&self, case: &CaseStudy, grid_n: usize, index: u128) -> Vec<f64> {
        let mut rest = index;
        self.free
            .iter()
            .map(|&(_, h)| {
                let d = (rest % grid_n as u128) as usize;
                rest /= grid_n as u128;
                Self::grid_value(case, grid_n, h, d)
            })
            .collect()
    }

    /// Propagates the water balance from the given free discharges with zero
    /// spillage and dispatches thermal output to the residual load. `tol` is
    /// the bound tolerance relative to each bound's magnitude (storage) or
    /// the discharge range. `None` when a bound or the load cannot be met.
    fn simulate(&self, case: &CaseStudy, free_q: &[f64], tol: f64) -> Option<Schedule> {
        let n_t = case.num_periods();
        let n_h = case.hydro.len();
        let mut s = Schedule {
            v: Vec::with_capacity(n_t),
            q: Vec::with_capacity(n_t),
            s: Vec::with_capacity(n_t),
            hydro_mw: Vec::with_capacity(n_t),
            p: Vec::with_capacity(n_t),
            objective: 0.0,
        };
        let mut v_prev: Vec<f64> = case.hydro.iter().map(|p| p.v_initial).collect();
        for t in 0..n_t {
            let th = case.theta_at(t);
            let mut q = vec![0.0; n_h];
            let mut v = vec![0.0; n_h];
            for &h in &self.order {
                let plant = &case.hydro[h];
                let inflow = case.inflow(t, h) + case.upstream_of(h).iter().map(|&u| q[u]).sum::<f64>();
                match self.slot[t][h] {
                    Some(k) => {
                        q[h] = free_q[k];
                        v[h] = v_prev[h] + (inflow - q[h]) / th;
                        let tol = tol * plant.v_max.abs().max(1.0);
                        if v[h] < plant.v_min - tol || v[h] > plant.v_max + tol {
                            return None;
                        }
                    }
                    None => {
                        let target = storage_pinned(case, t, h).expect("pinned storage");
                        v[h] = target;
                        q[h] = inflow - th * (target - v_prev[h]);
                        let tol = tol * (plant.q_max - plant.q_min).abs().max(1.0);
                        if q[h] < plant.q_min - tol || q[h] > plant.q_max + tol {
                            return None;
                        }
                        q[h] = q[h].clamp(plant.q_min, plant.q_max);
                    }
                }
            }
            let gen: Vec<f64> = (0..n_h).map(|h| case.hydro[h].production.evaluate(v[h], q[h])).collect();
            let p = dispatch(case, case.load_at(t) - gen.iter().sum::<f64>())?;
            s.objective += p.iter().zip(&case.thermal).map(|(x, plant)| plant.cost(*x)).sum::<f64>();
            v_prev.clone_from(&v);
            s.v.push(v);
            s.q.push(q);
            s.s.push(vec![0.0; n_h]);
            s.hydro_mw.push(gen);
            s.p.push(p);
        }
        Some(s)
    }
}

/// Bound tolerance of grid points, relative to the bound magnitudes.
const GRID_BOUND_TOL: f64 = 1e-9;

/// Exhaustive search over discharge grids with zero spillage.
///
/// Every free discharge `(t, h)` takes `grid_n` equally spaced values in its
/// bounds. Where the storage is fixed the discharge follows exactly from the
/// water balance instead, so every candidate meets the final storage targets
/// and the run-of-river levels exactly and the result is a true upper bound
/// on the optimum. Thermal output covers the residual load at the cheapest
/// dispatch.
pub fn brute_force_oracle(case: &CaseStudy, grid_n: usize) -> Result<OracleResult, AnalysisError> {
    if grid_n < 2 {
        return Err(AnalysisError::BadGrid(grid_n));
    }
    let layout = GridLayout::new(case);
    let points = (grid_n as u128).checked_pow(layout.free.len() as u32).unwrap_or(u128::MAX);
    if points > MAX_ORACLE_POINTS {
        return Err(AnalysisError::Intractable { points: (grid_n as f64).powi(layout.free.len() as i32) });
    }
    let best = (0..points)
        .into_par_iter()
        .filter_map(|index| {
            let q = layout.free_discharges(case, grid_n, index);
            layout.simulate(case, &q, GRID_BOUND_TOL).map(|s| (s.objective, index))
        })
        .reduce_with(|a, b| if b.0 < a.0 || (b.0 == a.0 && b.1 < a.1) { b } else { a });
    let (_, index) = best.ok_or(AnalysisError::NoFeasiblePoint)?;
    let q = layout.free_discharges(case, grid_n, index);
    let schedule = layout.simulate(case, &q, GRID_BOUND_TOL).expect("best grid point is feasible");
    Ok(OracleResult { objective: schedule.objective, schedule, points })
}

/// Objective resolution of the oracle grid at a given schedule: the largest
/// cost difference between the schedule (re-simulated from its free
/// discharges) and the feasible grid points of the cell that contains it.
/// When the feasible set is thinner than a cell and no corner is feasible,
/// the box is widened one grid ring at a time until it holds a feasible
/// point. The oracle optimum exceeds the schedule's cost by at most this.
pub fn grid_cell_slack(case: &CaseStudy, grid_n: usize, schedule: &Schedule) -> Result<f64, AnalysisError> {
    if grid_n < 2 {
        return Err(AnalysisError::BadGrid(grid_n));
    }
    let layout = GridLayout::new(case);
    let point_q: Vec<f64> = layout
        .free
        .iter()
        .map(|&(t, h)| {
            let p = &case.hydro[h];
            schedule.q[t][h].clamp(p.q_min.min(p.q_max), p.q_max.max(p.q_min))
        })
        .collect();
    let base = layout
        .simulate(case, &point_q, STATIONARITY_BOUND_TOL)
        .ok_or(AnalysisError::NoFeasiblePoint)?
        .objective;
    let cell: Vec<usize> = layout
        .free
        .iter()
        .zip(&point_q)
        .map(|(&(_, h), &q)| {
            let p = &case.hydro[h];
            let span = p.q_max - p.q_min;
            let pos = if span > 0.0 { (q - p.q_min) / span * (grid_n - 1) as f64 } else { 0.0 };
            (pos.floor().max(0.0) as usize).min(grid_n - 2)
        })
        .collect();
    let k = layout.free.len();
    for ring in 0..grid_n {
        let ranges: Vec<(usize, usize)> =
            cell.iter().map(|&c| (c.saturating_sub(ring), (c + 1 + ring).min(grid_n - 1))).collect();
        let sizes: Vec<u128> = ranges.iter().map(|(lo, hi)| (hi - lo + 1) as u128).collect();
        let points = sizes.iter().try_fold(1u128, |acc, &n| acc.checked_mul(n)).unwrap_or(u128::MAX);
        if points > MAX_ORACLE_POINTS {
            return Err(AnalysisError::Intractable { points: sizes.iter().map(|&n| n as f64).product() });
        }
        let slack = (0..points)
            .into_par_iter()
            .filter_map(|mut index| {
                let q: Vec<f64> = (0..k)
                    .map(|i| {
                        let d = ranges[i].0 + (index % sizes[i]) as usize;
                        index /= sizes[i];
                        GridLayout::grid_value(case, grid_n, layout.free[i].1, d)
                    })
                    .collect();
                layout.simulate(case, &q, GRID_BOUND_TOL).map(|s| (s.objective - base).abs())
            })
            .reduce_with(f64::max);
        if let Some(slack) = slack {
            return Ok(slack);
        }
        if ranges.iter().all(|&(lo, hi)| lo == 0 && hi == grid_n - 1) {
            break;
        }
    }
    Err(AnalysisError::NoFeasiblePoint)
}

/// Most negative cost change rate found by the stationarity check.
#[derive(Debug, Clone, PartialEq)]
pub struct Stationarity {
    /// Cost change per unit of relative discharge shift (the shift divided by
    /// the plant's discharge range); `≥ 0` means no improving direction.
    pub rate: f64,
    /// `(period, plant)` of the direction that attains it, if any was feasible.
    pub direction: Option<(usize, usize)>,
    pub directions_checked: usize,
}

/// Relative bound tolerance of the stationarity check; recovered schedules
/// sit on their bounds only up to the solver accuracy.
const STATIONARITY_BOUND_TOL: f64 = 1e-6;

/// Cost of a schedule whose thermal output is re-dispatched to the
/// hydro generation of the given discharges; `None` when infeasible.
fn redispatched_cost(case: &CaseStudy, v: &[Vec<f64>], q: &[Vec<f64>]) -> Option<f64> {
    let mut cost = 0.0;
    for t in 0..case.num_periods() {
        for (h, plant) in case.hydro.iter().enumerate() {
            let tol = STATIONARITY_BOUND_TOL * plant.v_max.abs().max(1.0);
            if v[t][h] < plant.v_min - tol || v[t][h] > plant.v_max + tol {
                return None;
            }
            let tol = STATIONARITY_BOUND_TOL * plant.q_max.abs().max(1.0);
            if q[t][h] < plant.q_min - tol || q[t][h] > plant.q_max + tol {
                return None;
            }
        }
        let hydro: f64 = case.hydro.iter().enumerate().map(|(h, p)| p.production.evaluate(v[t][h], q[t][h])).sum();
        let p = dispatch(case, case.load_at(t) - hydro)?;
        cost += p.iter().zip(&case.thermal).map(|(x, plant)| plant.cost(*x)).sum::<f64>();
    }
    Some(cost)
}

/// Central finite differences of the cost along water-preserving shifts:
/// plant `h` releases `δ` more in period `t` and correspondingly less in
/// `t + 1`, which moves only its storage at the end of `t`; every plant
/// downstream passes the same change on so that its storages stay put.
/// Thermal output is re-dispatched at each perturbed point. Where only one
/// side is feasible a one-sided difference is used. `step` is relative to
/// the plant's discharge range.
pub fn stationarity_check(case: &CaseStudy, schedule: &Schedule, step: f64) -> Stationarity {
    let n_t = case.num_periods();
    let n_h = case.hydro.len();
    let base = redispatched_cost(case, &schedule.v, &schedule.q);
    let mut best = Stationarity { rate: 0.0, direction: None, directions_checked: 0 };
    let Some(base) = base else {
        return best;
    };
    let downstream_closure = |h: usize| {
        let mut set = vec![h];
        let mut i = 0;
        while i < set.len() {
            for d in case.downstream_of(set[i]) {
                if !set.contains(&d) {
                    set.push(d);
                }
            }
            i += 1;
        }
        set
    };
    for t in 0..n_t.saturating_sub(1) {
        for h in 0..n_h {
            let plant = &case.hydro[h];
            if plant.is_run_of_river() {
                continue;
            }
            let range = (plant.q_max - plant.q_min).abs().max(1.0);
            let delta = step * range;
            let ratio = case.theta_at(t + 1) / case.theta_at(t);
            let chain = downstream_closure(h);
            let shifted = |sign: f64| {
                let mut q = schedule.q.clone();
                let mut v = schedule.v.clone();
                for &d in &chain {
                    q[t][d] += sign * delta;
                    q[t + 1][d] -= sign * delta * ratio;
                }
                v[t][h] -= sign * delta / case.theta_at(t);
                redispatched_cost(case, &v, &q)
            };
            let rate = match (shifted(1.0), shifted(-1.0)) {
                (Some(up), Some(down)) => {
                    let d = (up - down) / (2.0 * step);
                    -d.abs()
                }
                (Some(up), None) => (up - base) / step,
                (None, Some(down)) => (down - base) / step,
                (None, None) => continue,
            };
            best.directions_checked += 1;
            if best.direction.is_none() || rate < best.rate {
                best.rate = rate;
                best.direction = Some((t, h));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::case::Horizon;
    use crate::model::{HydroPlant, Period, ProductionQuadratic, ThermalPlant};
    use htc_conic::InteriorPoint;

    fn plant(v: (f64, f64), q: (f64, f64), v0: f64, vf: f64, prod: ProductionQuadratic) -> HydroPlant {
        HydroPlant {
            id: "H".into(),
            v_min: v.0,
            v_max: v.1,
            q_min: q.0,
            q_max: q.1,
            v_initial: v0,
            v_final: vf,
            production: prod,
            upstream: Vec::new(),
        }
    }

    fn thermal(p_min: f64, p_max: f64, c1: f64, c2: f64) -> ThermalPlant {
        ThermalPlant { id: "T".into(), p_min, p_max, c0: 0.0, c1, c2 }
    }

    fn case(hydro: Vec<HydroPlant>, thermal: Vec<ThermalPlant>, loads: &[f64], inflows: &[f64]) -> CaseStudy {
        let inflows = hydro.iter().map(|h| (h.id.clone(), inflows.to_vec())).collect();
        CaseStudy {
            hydro,
            thermal,
            horizon: Horizon { periods: loads.iter().map(|&load| Period { days: 30.0, load }).collect(), inflows },
        }
    }

    #[test]
    fn standard_structure_matrices_flag_failure() {
        let s = sign_condition_check(&StructureMatrices::standard());
        assert!(s.exactness_conditions_fail());
    }

    #[test]
    fn negated_q_is_not_flagged() {
        let mut m = StructureMatrices::standard();
        m.q = -m.q;
        let s = sign_condition_check(&m);
        assert!(!s.q_nonnegative);
        assert!(!s.exactness_conditions_fail());
    }

    #[test]
    fn zero_matrices_are_flagged() {
        let m = StructureMatrices { v: DMatrix::zeros(3, 3), q: DMatrix::zeros(3, 3), p: DMatrix::zeros(2, 2) };
        assert!(sign_condition_check(&m).exactness_conditions_fail());
    }

    #[test]
    fn dispatch_splits_at_equal_marginal_cost() {
        let mut c = case(Vec::new(), vec![thermal(0.0, 100.0, 1.0, 0.5), thermal(0.0, 100.0, 2.0, 0.25)], &[0.0], &[]);
        c.thermal[1].id = "T2".into();
        // 1 + p₁ = 2 + 0.5 p₂ with p₁ + p₂ = 60 → p₁ = 20.667, p₂ = 39.333
        let p = dispatch(&c, 60.0).unwrap();
        assert!((p[0] - 62.0 / 3.0).abs() < 1e-9, "{p:?}");
        assert!((p[1] - 118.0 / 3.0).abs() < 1e-9, "{p:?}");
        assert_eq!(dispatch(&c, -5.0).unwrap(), vec![0.0, 0.0]);
        assert!(dispatch(&c, 201.0).is_none());
    }

    #[test]
    fn zero_load_never_needs_the_inequality_justified() {
        let prod = ProductionQuadratic::constant_efficiency(0.5, -1e-4, 0.0);
        let c = case(vec![plant((100.0, 200.0), (0.0, 100.0), 150.0, 150.0, prod)], vec![thermal(0.0, 50.0, 0.0, 1.0)], &[0.0], &[10.0]);
        let r = maxgen_check(&c, &InteriorPoint, &SolverOptions::default()).unwrap();
        assert!(r[0].max_hydro_mw > 0.0);
        assert!(!r[0].holds);
    }

    #[test]
    fn single_period_maxgen_matches_closed_form() {
        // one period, storage pinned by the target, discharge set by inflow
        // 100 at full range: P = 0.5·100 − 1e-4·100² = 49
        let prod = ProductionQuadratic::constant_efficiency(0.5, -1e-4, 0.0);
        let c = case(vec![plant((100.0, 200.0), (0.0, 100.0), 150.0, 150.0, prod)], vec![thermal(0.0, 50.0, 0.0, 1.0)], &[60.0], &[100.0]);
        let r = maxgen_check(&c, &InteriorPoint, &SolverOptions::default()).unwrap();
        assert!((r[0].max_hydro_mw - 49.0).abs() < 1e-5, "{}", r[0].max_hydro_mw);
        assert!(r[0].holds);
    }

    #[test]
    fn fully_determined_oracle() {
        let prod = ProductionQuadratic::constant_efficiency(0.5, -1e-4, 0.0);
        let c = case(vec![plant((100.0, 200.0), (0.0, 100.0), 150.0, 150.0, prod)], vec![thermal(0.0, 500.0, 0.0, 2.0)], &[100.0], &[40.0]);
        let r = brute_force_oracle(&c, 11).unwrap();
        let hydro: f64 = 0.5 * 40.0 - 1e-4 * 1600.0;
        assert!((r.objective - 2.0 * (100.0 - hydro).powi(2)).abs() < 1e-9, "{}", r.objective);
        assert_eq!(r.schedule.q[0][0], 40.0);
        assert_eq!(r.points, 1);
    }

    #[test]
    fn unreachable_target_has_no_grid_point() {
        let prod = ProductionQuadratic::constant_efficiency(0.5, -1e-4, 0.0);
        // the target storage needs a negative discharge
        let c = case(vec![plant((100.0, 2000.0), (0.0, 100.0), 150.0, 1900.0, prod)], vec![thermal(0.0, 500.0, 0.0, 2.0)], &[100.0], &[40.0]);
        assert!(matches!(brute_force_oracle(&c, 11), Err(AnalysisError::NoFeasiblePoint)));
    }

    #[test]
    fn oracle_guard_rejects_large_grids() {
        let c = CaseStudy::paranaiba();
        assert!(matches!(brute_force_oracle(&c, 201), Err(AnalysisError::Intractable { .. })));
        assert!(matches!(brute_force_oracle(&CaseStudy::mini(), 1), Err(AnalysisError::BadGrid(1))));
    }

    /// Two periods, a free reservoir: the cost is `c₂ Σ (d − γ q_t)²` with
    /// `q₁ + q₂` fixed by the water balance, so the optimum splits the water
    /// evenly between equal loads.
    fn two_period_linear() -> CaseStudy {
        let prod = ProductionQuadratic::constant_efficiency(1.0, 0.0, 0.0);
        case(
            vec![plant((0.0, 1000.0), (0.0, 200.0), 500.0, 500.0, prod)],
            vec![thermal(0.0, 1000.0, 0.0, 1.0)],
            &[300.0, 300.0],
            &[100.0, 100.0],
        )
    }

    fn schedule_with(c: &CaseStudy, q1: f64) -> Schedule {
        let th = c.theta_at(0);
        let v1 = 500.0 + (100.0 - q1) / th;
        let q2 = 200.0 - q1;
        let p = vec![vec![300.0 - q1], vec![300.0 - q2]];
        Schedule {
            v: vec![vec![v1], vec![500.0]],
            q: vec![vec![q1], vec![q2]],
            s: vec![vec![0.0], vec![0.0]],
            hydro_mw: vec![vec![q1], vec![q2]],
            p,
            objective: 0.0,
        }
    }

    #[test]
    fn interior_optimum_is_stationary() {
        let c = two_period_linear();
        let st = stationarity_check(&c, &schedule_with(&c, 100.0), 1e-3);
        assert_eq!(st.directions_checked, 1);
        assert!(st.rate.abs() <= 10.0 * 1e-3, "{}", st.rate);
    }

    #[test]
    fn uneven_split_has_an_improving_direction() {
        let c = two_period_linear();
        // d/dq₁ of (300 − q₁)² + (100 + q₁)² at q₁ = 60 is −2·240 + 2·160 = −160
        // per m³/s; the range is 200 m³/s
        let st = stationarity_check(&c, &schedule_with(&c, 60.0), 1e-3);
        assert!((st.rate + 160.0 * 200.0).abs() < 1e-3 * 160.0 * 200.0, "{}", st.rate);
        assert_eq!(st.direction, Some((0, 0)));
    }

    #[test]
    fn oracle_finds_even_split() {
        let c = two_period_linear();
        let r = brute_force_oracle(&c, 201).unwrap();
        assert_eq!(r.schedule.q[0][0], 100.0);
        assert!((r.objective - 2.0 * 200.0f64.powi(2)).abs() < 1e-6);
        // half a cell off, q₁ = 100.5 costs 80000.5; its cell's corners at
        // q₁ = 100 and 101 cost 80000 and 80002
        let mut off = r.schedule.clone();
        off.q[0][0] += 0.5;
        let slack = grid_cell_slack(&c, 201, &off).unwrap();
        assert!((slack - 1.5).abs() < 1e-6, "{slack}");
    }
}
