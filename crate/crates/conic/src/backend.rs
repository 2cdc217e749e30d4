use std::path::PathBuf;
use std::process::Command;

use nalgebra::{DMatrix, DVector};

use crate::error::ConicError;
use crate::problem::ConicProblem;
use crate::standard::StandardForm;
use crate::{ipm, sdpa, ConicSolution, Residuals, SolveStatus, SolverOptions};

/// Selects the backend returned by [`backend_from_env`]: `embedded`
/// (default) or `external`.
pub const BACKEND_ENV: &str = "HTC_SOLVER_BACKEND";
/// Command run by [`ExternalSdpa::from_env`]; defaults to `csdp`.
pub const EXTERNAL_COMMAND_ENV: &str = "HTC_SDPA_COMMAND";

/// Anything that can solve a [`ConicProblem`].
pub trait ConicBackend: Send + Sync {
    fn name(&self) -> &str;
    fn solve(&self, problem: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution, ConicError>;
}

/// The embedded primal-dual interior-point solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint;

impl ConicBackend for InteriorPoint {
    fn name(&self) -> &str {
        "embedded"
    }

    fn solve(&self, problem: &ConicProblem, opts: &SolverOptions) -> Result<ConicSolution, ConicError> {
        problem.validate()?;
        let sf = StandardForm::from_problem(problem);
        if !sf.infeasible_rows.is_empty() {
            return Ok(empty_solution(problem, SolveStatus::Infeasible));
        }
        let out = ipm::solve(&sf, opts);
        let pt = out.point;
        let scalar_values = sf.unscale_scalars(&pt.xs);
        let mut row_duals = vec![0.0; problem.rows().len()];
        for (k, &r) in sf.user_row.iter().enumerate() {
            row_duals[r] = sf.obj_scale * sf.row_factor[k] * pt.y[k];
        }
        let block_values = sf.unscale_blocks(pt.x);
        let objective_value = problem.objective_at(&block_values, &scalar_values);
        let dual_objective = sf.obj_scale * sf.b.dot(&pt.y);
        Ok(ConicSolution {
            status: out.status,
            block_values,
            scalar_values,
            row_duals,
            objective_value,
            dual_objective,
            residuals: out.residuals,
            iterations: out.iterations,
        })
    }
}

fn empty_solution(problem: &ConicProblem, status: SolveStatus) -> ConicSolution {
    ConicSolution {
        status,
        block_values: problem.block_dims().iter().map(|&n| DMatrix::zeros(n, n)).collect(),
        scalar_values: vec![0.0; problem.num_scalars()],
        row_duals: vec![0.0; problem.rows().len()],
        objective_value: f64::NAN,
        dual_objective: f64::NAN,
        residuals: Residuals::default(),
        iterations: 0,
    }
}

/// Writes the problem in SDPA sparse format, runs `command <problem> <solution>`
/// and reads back a CSDP-style solution file.
#[derive(Debug, Clone)]
pub struct ExternalSdpa {
    pub command: String,
    pub args: Vec<String>,
    pub workdir: Option<PathBuf>,
}

impl ExternalSdpa {
    pub fn new(command: impl Into<String>) -> Self {
        Self { command: command.into(), args: Vec::new(), workdir: None }
    }

    pub fn from_env() -> Self {
        Self::new(std::env::var(EXTERNAL_COMMAND_ENV).unwrap_or_else(|_| "csdp".to_string()))
    }
}

impl ConicBackend for ExternalSdpa {
    fn name(&self) -> &str {
        "external"
    }

    fn solve(&self, problem: &ConicProblem, _opts: &SolverOptions) -> Result<ConicSolution, ConicError> {
        problem.validate()?;
        let sf = StandardForm::unscaled(problem);
        if !sf.infeasible_rows.is_empty() {
            return Ok(empty_solution(problem, SolveStatus::Infeasible));
        }
        let dir = match &self.workdir {
            Some(d) => d.clone(),
            None => std::env::temp_dir(),
        };
        let stem = format!("htc-{}-{:p}", std::process::id(), problem);
        let input = dir.join(format!("{stem}.dat-s"));
        let output = dir.join(format!("{stem}.sol"));
        std::fs::write(&input, sdpa::write_standard(&sf))?;
        let status = Command::new(&self.command)
            .args(&self.args)
            .arg(&input)
            .arg(&output)
            .status()
            .map_err(|e| ConicError::External(format!("cannot run {}: {e}", self.command)))?;
        let text = std::fs::read_to_string(&output).map_err(|e| {
            ConicError::External(format!("{} exited with {status} and no solution file: {e}", self.command))
        });
        let _ = std::fs::remove_file(&input);
        let _ = std::fs::remove_file(&output);
        let parsed = sdpa::parse_solution(&text?, &sf.block_dims, sf.n_scalars, sf.m())?;

        let scalar_values: Vec<f64> = parsed.scalars.iter().take(sf.n_user_scalars).copied().collect();
        let mut row_duals = vec![0.0; problem.rows().len()];
        for (k, &r) in sf.user_row.iter().enumerate() {
            row_duals[r] = sf.row_factor[k] * parsed.y[k];
        }
        let xs = DVector::from_vec(parsed.scalars.clone());
        let rp = &sf.b - sf.apply(&parsed.blocks, &xs);
        let objective_value = problem.objective_at(&parsed.blocks, &scalar_values);
        let dual_objective = sf.b.dot(&DVector::from_vec(parsed.y.clone()));
        let denom = 1.0 + objective_value.abs() + dual_objective.abs();
        let status = if status.success() { SolveStatus::Optimal } else { SolveStatus::NumericalFailure };
        Ok(ConicSolution {
            status,
            block_values: parsed.blocks,
            scalar_values,
            row_duals,
            objective_value,
            dual_objective,
            residuals: Residuals {
                primal: rp.norm() / (1.0 + sf.b.norm()),
                dual: 0.0,
                gap: (objective_value - dual_objective).abs() / denom,
            },
            iterations: 0,
        })
    }
}

/// Backend chosen by the `HTC_SOLVER_BACKEND` environment variable.
pub fn backend_from_env() -> Result<Box<dyn ConicBackend>, ConicError> {
    match std::env::var(BACKEND_ENV).as_deref() {
        Err(_) | Ok("") | Ok("embedded") => Ok(Box::new(InteriorPoint)),
        Ok("external") => Ok(Box::new(ExternalSdpa::from_env())),
        Ok(other) => Err(ConicError::External(format!("unknown solver backend `{other}`"))),
    }
}
