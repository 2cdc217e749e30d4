//! Difference-of-convex split of the production functions and the
//! convex-concave procedure.
//!
//! The power-balance row `Σ P_h(v, q) + Σ p ≥ d` is non-convex when a
//! production function is indefinite. Writing `Ĥ = −H₊ + H₋` with both parts
//! PSD, the convex term `xᵀH₋x` is replaced by its tangent at the previous
//! iterate. The resulting production model never exceeds the true one, so
//! every iterate is feasible for the original problem, and the sequence of
//! objectives cannot increase.

use htc_conic::{frobenius, ConicBackend, SolverOptions};
use nalgebra::{DMatrix, Matrix2, SymmetricEigen, Vector2};
use thiserror::Error;

use crate::case::CaseStudy;
use crate::cuts::{rlt_cuts, CutOptions};
use crate::model::ProductionQuadratic;
use crate::shor::{
    build_relaxation, build_relaxation_with, cost_matrix, extract_schedule, rank1_gap, solve_relaxation,
    ExtractionError, LiftedLayout, Relaxation, RelaxationError, Schedule, SolveSettings,
};

/// `Ĥ = −h_plus + h_minus`, both PSD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DcSplit {
    pub h_plus: Matrix2<f64>,
    pub h_minus: Matrix2<f64>,
}

/// Spectral split: `h_plus` is the nonnegative part of `−Ĥ`, `h_minus` the
/// negated nonpositive part. Definite cases are returned exactly.
pub fn dc_split(p: &ProductionQuadratic) -> DcSplit {
    let h = p.h_hat();
    let neg = -h;
    let tol = p.zero_tolerance();
    let (l1, l2) = p.eigenvalues();
    if l1 <= tol {
        // Ĥ ⪯ 0: nothing to linearize
        return DcSplit { h_plus: neg, h_minus: Matrix2::zeros() };
    }
    if l2 >= -tol {
        return DcSplit { h_plus: Matrix2::zeros(), h_minus: h };
    }
    let eig = SymmetricEigen::new(neg);
    let mut h_plus = Matrix2::zeros();
    let mut h_minus = Matrix2::zeros();
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        let u = eig.eigenvectors.column(k);
        let outer = u * u.transpose();
        if lambda > 0.0 {
            h_plus += outer * lambda;
        } else {
            h_minus -= outer * lambda;
        }
    }
    DcSplit { h_plus: sym(h_plus), h_minus: sym(h_minus) }
}

fn sym(m: Matrix2<f64>) -> Matrix2<f64> {
    let off = 0.5 * (m[(0, 1)] + m[(1, 0)]);
    Matrix2::new(m[(0, 0)], off, off, m[(1, 1)])
}

/// 3×3 matrix of the production model linearized at `x_prev`:
/// `H̃ • lift(x) = −xᵀH₊x + eᵀx + 2x₀ᵀH₋x − x₀ᵀH₋x₀`,
/// which equals `P(x) − (x − x₀)ᵀH₋(x − x₀)` (constant term excluded).
pub fn linearize(split: &DcSplit, e: &Vector2<f64>, x_prev: (f64, f64)) -> DMatrix<f64> {
    let x0 = Vector2::new(x_prev.0, x_prev.1);
    let hx = split.h_minus * x0;
    let border = 0.5 * (e + 2.0 * hx);
    let hp = &split.h_plus;
    DMatrix::from_row_slice(
        3,
        3,
        &[
            -hp[(0, 0)],
            -hp[(0, 1)],
            border[0],
            -hp[(1, 0)],
            -hp[(1, 1)],
            border[1],
            border[0],
            border[1],
            -x0.dot(&hx),
        ],
    )
}

/// Linearized production matrix of one plant, constant term included.
pub fn linearized_production(p: &ProductionQuadratic, x_prev: (f64, f64)) -> DMatrix<f64> {
    let mut m = linearize(&dc_split(p), &p.e(), x_prev);
    m[(2, 2)] += p.eps_0;
    m
}

/// `Σ_{t,k} |C • (Y_k − Y_{k−1})|` over the thermal blocks `[t][k]`.
pub fn convergence_metric(y_k: &[Vec<DMatrix<f64>>], y_prev: &[Vec<DMatrix<f64>>], costs: &[Vec<DMatrix<f64>>]) -> f64 {
    y_k.iter()
        .zip(y_prev)
        .zip(costs)
        .flat_map(|((a, b), c)| a.iter().zip(b).zip(c).map(|((a, b), c)| frobenius(c, &(a - b)).abs()))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcpOptions {
    pub eps: f64,
    pub max_iter: usize,
    /// Keep the McCormick rows in the convexified subproblems as well.
    pub cuts_in_subproblems: bool,
    pub cut_options: CutOptions,
    /// Settings of every solve. The metric is a sum of absolute cost changes,
    /// so a stop at `eps` needs the thermal blocks to about `eps / |cost|`
    /// relative accuracy: tight tolerances and a strong proximal polish,
    /// since without cuts every hydro block has cost-free diagonal directions.
    pub settings: SolveSettings,
}

impl Default for CcpOptions {
    fn default() -> Self {
        Self {
            eps: 1e-2,
            max_iter: 50,
            cuts_in_subproblems: false,
            cut_options: CutOptions::default(),
            settings: SolveSettings {
                solver: SolverOptions { feas_tol: 1e-10, gap_tol: 1e-10, ..SolverOptions::default() },
                ..SolveSettings::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcpIteration {
    pub k: usize,
    /// Thermal cost `Σ C • Y`.
    pub objective: f64,
    /// Change of the thermal cost blocks against the previous iterate;
    /// `None` for the starting relaxation.
    pub metric: Option<f64>,
    /// Largest `λ₂/λ₁` over the hydro blocks.
    pub rank1_max: f64,
    pub schedule: Schedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CcpTrace {
    pub iterations: Vec<CcpIteration>,
    pub converged: bool,
    pub eps: f64,
}

impl CcpTrace {
    pub fn last(&self) -> Option<&CcpIteration> {
        self.iterations.last()
    }

    /// Number of convexified subproblems solved.
    pub fn num_subproblems(&self) -> usize {
        self.iterations.len().saturating_sub(1)
    }
}

#[derive(Debug, Error)]
pub enum CcpFailure {
    #[error(transparent)]
    Solve(#[from] RelaxationError),
    #[error(transparent)]
    Extraction(#[from] ExtractionError),
}

#[derive(Debug, Error)]
#[error("CCP iteration {iteration}: {source}")]
pub struct CcpError {
    pub iteration: usize,
    #[source]
    pub source: CcpFailure,
    pub trace: CcpTrace,
}

fn thermal_values(sol: &htc_conic::ConicSolution, layout: &LiftedLayout) -> Vec<Vec<DMatrix<f64>>> {
    layout.thermal.iter().map(|row| row.iter().map(|&b| sol.block(b).clone()).collect()).collect()
}

/// The relaxation with cuts that starts the procedure.
pub fn starting_relaxation(case: &CaseStudy, cut_options: &CutOptions) -> Relaxation {
    let mut rel = build_relaxation(case);
    rlt_cuts(case, &rel.layout, cut_options).apply(case, &mut rel);
    rel
}

/// Convexified relaxation around the storages and discharges of `x_prev`.
pub fn convexified_relaxation(case: &CaseStudy, x_prev: &Schedule, options: &CcpOptions) -> (Relaxation, Vec<Vec<DMatrix<f64>>>) {
    let production: Vec<Vec<DMatrix<f64>>> = (0..case.num_periods())
        .map(|t| {
            case.hydro
                .iter()
                .enumerate()
                .map(|(h, plant)| linearized_production(&plant.production, (x_prev.v[t][h], x_prev.q[t][h])))
                .collect()
        })
        .collect();
    let mut rel = build_relaxation_with(case, &production);
    if options.cuts_in_subproblems {
        rlt_cuts(case, &rel.layout, &options.cut_options).apply(case, &mut rel);
    }
    (rel, production)
}

/// Runs the procedure from the cut-tightened relaxation until the metric
/// drops to `eps` or `max_iter` subproblems have been solved.
pub fn ccp_solve(case: &CaseStudy, backend: &dyn ConicBackend, options: &CcpOptions) -> Result<(Schedule, CcpTrace), CcpError> {
    let costs: Vec<Vec<DMatrix<f64>>> =
        (0..case.num_periods()).map(|_| case.thermal.iter().map(cost_matrix).collect()).collect();
    let mut trace = CcpTrace { iterations: Vec::new(), converged: false, eps: options.eps };
    let fail = |iteration: usize, source: CcpFailure, trace: CcpTrace| CcpError { iteration, source, trace };

    let rel = starting_relaxation(case, &options.cut_options);
    let sol = match solve_relaxation(case, &rel, backend, &options.settings) {
        Ok(s) => s,
        Err(e) => return Err(fail(0, e.into(), trace)),
    };
    let schedule = match extract_schedule(case, &sol, &rel.layout, None) {
        Ok(s) => s,
        Err(e) => return Err(fail(0, e.into(), trace)),
    };
    let mut y_prev = thermal_values(&sol, &rel.layout);
    trace.iterations.push(CcpIteration {
        k: 0,
        objective: sol.objective_value,
        metric: None,
        rank1_max: rank1_gap(&sol, &rel.layout).1,
        schedule,
    });

    for k in 1..=options.max_iter {
        let prev = &trace.iterations.last().expect("starting iterate").schedule;
        let (rel, production) = convexified_relaxation(case, prev, options);
        let sol = match solve_relaxation(case, &rel, backend, &options.settings) {
            Ok(s) => s,
            Err(e) => return Err(fail(k, e.into(), trace)),
        };
        let schedule = match extract_schedule(case, &sol, &rel.layout, Some(&production)) {
            Ok(s) => s,
            Err(e) => return Err(fail(k, e.into(), trace)),
        };
        let y = thermal_values(&sol, &rel.layout);
        let metric = convergence_metric(&y, &y_prev, &costs);
        y_prev = y;
        trace.iterations.push(CcpIteration {
            k,
            objective: sol.objective_value,
            metric: Some(metric),
            rank1_max: rank1_gap(&sol, &rel.layout).1,
            schedule,
        });
        if metric <= options.eps {
            trace.converged = true;
            break;
        }
    }
    let schedule = trace.iterations.last().expect("starting iterate").schedule.clone();
    Ok((schedule, trace))
}
