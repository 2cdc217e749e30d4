//! Equality standard form used by the solvers: every `≥` row gets a surplus
//! scalar, every `≤` row is negated into a `≥` row first, rows are scaled to
//! unit norm and the objective to unit magnitude.

use nalgebra::{DMatrix, DVector};

use crate::problem::{ConicProblem, Sense};

/// Block coefficients below this fraction of the row's largest user entry
/// are rounding left over from a face restriction and are dropped.
const ZERO_COEFFICIENT: f64 = 1e-13;

#[derive(Debug, Clone)]
pub(crate) struct StdRow {
    pub blocks: Vec<(usize, DMatrix<f64>)>,
    pub scalars: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub block_dims: Vec<usize>,
    /// User scalars first, then one surplus per inequality row.
    pub n_scalars: usize,
    pub n_user_scalars: usize,
    pub rows: Vec<StdRow>,
    pub b: DVector<f64>,
    pub c_blocks: Vec<DMatrix<f64>>,
    pub c_scalars: DVector<f64>,
    /// Standard row `k` corresponds to user row `user_row[k]`; user rows that
    /// were dropped (empty and trivially satisfied) have no entry.
    pub user_row: Vec<usize>,
    /// `std_row = row_factor * user_row` (sign of `≤` rows folded in).
    pub row_factor: Vec<f64>,
    /// `c_std = c_user / obj_scale`.
    pub obj_scale: f64,
    pub block_rows: Vec<Vec<(usize, usize)>>,
    pub scalar_rows: Vec<Vec<(usize, f64)>>,
    /// Empty user rows whose right-hand side cannot be met.
    pub infeasible_rows: Vec<usize>,
    /// User blocks are `T W Tᵀ` for solver blocks `W`; `None` is identity.
    pub block_transform: Vec<Option<DMatrix<f64>>>,
    /// Solver user scalars are `s / scalar_scale`.
    pub scalar_scale: Vec<f64>,
}

/// `Tᵀ M T`: pulls a user coefficient back onto the solver block.
fn pull_back(m: &DMatrix<f64>, t: &Option<DMatrix<f64>>) -> DMatrix<f64> {
    match t {
        Some(t) => {
            let r = t.transpose() * m * t;
            (&r + r.transpose()) * 0.5
        }
        None => m.clone(),
    }
}

/// `T W Tᵀ`: maps a solver block to the user block.
fn push_forward(w: &DMatrix<f64>, t: &Option<DMatrix<f64>>) -> DMatrix<f64> {
    match t {
        Some(t) => {
            let r = t * w * t.transpose();
            (&r + r.transpose()) * 0.5
        }
        None => w.clone(),
    }
}

impl StandardForm {
    pub(crate) fn from_problem(p: &ConicProblem) -> Self {
        Self::build(p, true)
    }

    /// Same layout without row or objective scaling.
    pub(crate) fn unscaled(p: &ConicProblem) -> Self {
        Self::build(p, false)
    }

    fn build(p: &ConicProblem, normalize: bool) -> Self {
        let n_user_scalars = p.num_scalars();
        let mut n_scalars = n_user_scalars;
        let mut rows = Vec::new();
        let mut b = Vec::new();
        let mut user_row = Vec::new();
        let mut row_factor = Vec::new();
        let mut infeasible_rows = Vec::new();
        let block_transform: Vec<Option<DMatrix<f64>>> = (0..p.num_blocks())
            .map(|j| if normalize { p.block_transform(crate::problem::BlockId(j)).cloned() } else { None })
            .collect();
        let scalar_scale: Vec<f64> = (0..n_user_scalars)
            .map(|k| if normalize { p.scalar_scaling(crate::problem::ScalarId(k)) } else { 1.0 })
            .collect();

        for (r, row) in p.rows().iter().enumerate() {
            if normalize && p.is_implied(crate::problem::RowId(r)) {
                continue;
            }
            let row_size = row.blocks.iter().map(|(_, m)| m.amax()).fold(0.0, f64::max);
            let sign = if row.sense == Sense::Le { -1.0 } else { 1.0 };
            let mut blocks: Vec<(usize, DMatrix<f64>)> = row
                .blocks
                .iter()
                .map(|(id, m)| (id.0, pull_back(m, &block_transform[id.0]) * sign))
                .filter(|(_, m)| m.amax() > ZERO_COEFFICIENT * row_size)
                .collect();
            let mut scalars: Vec<(usize, f64)> = row
                .scalars
                .iter()
                .filter(|(_, c)| *c != 0.0)
                .map(|(id, c)| (id.0, c * sign * scalar_scale[id.0]))
                .collect();
            let rhs = row.rhs * sign;

            if blocks.is_empty() && scalars.is_empty() {
                let ok = match row.sense {
                    Sense::Eq => rhs == 0.0,
                    _ => rhs <= 0.0,
                };
                if !ok {
                    infeasible_rows.push(r);
                }
                continue;
            }
            if row.sense != Sense::Eq {
                scalars.push((n_scalars, -1.0));
                n_scalars += 1;
            }
            let norm = (blocks.iter().map(|(_, m)| m.norm_squared()).sum::<f64>()
                + scalars.iter().map(|(_, c)| c * c).sum::<f64>())
            .sqrt();
            let scale = if normalize { 1.0 / norm } else { 1.0 };
            for (_, m) in blocks.iter_mut() {
                *m *= scale;
            }
            for (_, c) in scalars.iter_mut() {
                *c *= scale;
            }
            rows.push(StdRow { blocks, scalars });
            b.push(rhs * scale);
            user_row.push(r);
            row_factor.push(sign * scale);
        }

        let mut c_scalars = DVector::zeros(n_scalars);
        for (k, c) in p.scalar_objective().iter().enumerate() {
            c_scalars[k] = *c * scalar_scale[k];
        }
        let c_raw: Vec<DMatrix<f64>> =
            p.block_objective().iter().zip(&block_transform).map(|(m, t)| pull_back(m, t)).collect();
        let cmax = c_raw
            .iter()
            .map(|m| m.amax())
            .fold(c_scalars.amax(), f64::max);
        let obj_scale = if normalize && cmax > 0.0 { cmax } else { 1.0 };
        let c_blocks: Vec<DMatrix<f64>> =
            c_raw.iter().map(|m| m / obj_scale).collect();
        c_scalars /= obj_scale;

        let mut block_rows = vec![Vec::new(); p.num_blocks()];
        let mut scalar_rows = vec![Vec::new(); n_scalars];
        for (i, row) in rows.iter().enumerate() {
            for (k, (j, _)) in row.blocks.iter().enumerate() {
                block_rows[*j].push((i, k));
            }
            for (s, c) in &row.scalars {
                scalar_rows[*s].push((i, *c));
            }
        }

        Self {
            block_dims: p
                .block_dims()
                .iter()
                .zip(&block_transform)
                .map(|(&n, t)| t.as_ref().map_or(n, |t| t.ncols()))
                .collect(),
            n_scalars,
            n_user_scalars,
            rows,
            b: DVector::from_vec(b),
            c_blocks,
            c_scalars,
            user_row,
            row_factor,
            obj_scale,
            block_rows,
            scalar_rows,
            infeasible_rows,
            block_transform,
            scalar_scale,
        }
    }

    /// Maps solver user scalars back to the problem's variables.
    pub(crate) fn unscale_scalars(&self, xs: &DVector<f64>) -> Vec<f64> {
        self.scalar_scale.iter().zip(xs.iter()).map(|(d, x)| d * x).collect()
    }

    /// Maps solver blocks back to the problem's variables.
    pub(crate) fn unscale_blocks(&self, x: Vec<DMatrix<f64>>) -> Vec<DMatrix<f64>> {
        x.iter().zip(&self.block_transform).map(|(w, t)| push_forward(w, t)).collect()
    }

    pub(crate) fn m(&self) -> usize {
        self.rows.len()
    }

    /// `A(X, x)`.
    pub(crate) fn apply(&self, x: &[DMatrix<f64>], s: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(
            self.rows.len(),
            self.rows.iter().map(|row| {
                row.blocks.iter().map(|(j, a)| crate::frobenius(a, &x[*j])).sum::<f64>()
                    + row.scalars.iter().map(|(k, c)| c * s[*k]).sum::<f64>()
            }),
        )
    }

    /// `A^T y`.
    pub(crate) fn adjoint(&self, y: &DVector<f64>) -> (Vec<DMatrix<f64>>, DVector<f64>) {
        let mut blocks: Vec<DMatrix<f64>> =
            self.block_dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
        let mut scalars = DVector::zeros(self.n_scalars);
        for (row, yi) in self.rows.iter().zip(y.iter()) {
            for (j, a) in &row.blocks {
                blocks[*j] += a * *yi;
            }
            for (k, c) in &row.scalars {
                scalars[*k] += c * yi;
            }
        }
        (blocks, scalars)
    }
}
