use nalgebra::DMatrix;

use crate::error::ConicError;
use crate::matrix::is_symmetric;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ScalarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RowId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sense {
    Eq,
    Ge,
    Le,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Eq => "=",
            Sense::Ge => ">=",
            Sense::Le => "<=",
        }
    }
}

/// One linear row `sum A_j • X_j + sum a_k s_k  (sense)  rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintRow {
    pub label: String,
    pub blocks: Vec<(BlockId, DMatrix<f64>)>,
    pub scalars: Vec<(ScalarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl ConstraintRow {
    pub fn new(sense: Sense, rhs: f64) -> Self {
        Self { label: String::new(), blocks: Vec::new(), scalars: Vec::new(), sense, rhs }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Adds `m • X_block`; coefficients on a block already present are summed.
    pub fn with_block(mut self, block: BlockId, m: DMatrix<f64>) -> Self {
        self.add_block(block, m);
        self
    }

    pub fn add_block(&mut self, block: BlockId, m: DMatrix<f64>) {
        if let Some((_, existing)) = self.blocks.iter_mut().find(|(b, _)| *b == block) {
            if existing.shape() == m.shape() {
                *existing += m;
                return;
            }
        }
        self.blocks.push((block, m));
    }

    pub fn with_scalar(mut self, scalar: ScalarId, coef: f64) -> Self {
        self.add_scalar(scalar, coef);
        self
    }

    pub fn add_scalar(&mut self, scalar: ScalarId, coef: f64) {
        if let Some((_, c)) = self.scalars.iter_mut().find(|(s, _)| *s == scalar) {
            *c += coef;
        } else {
            self.scalars.push((scalar, coef));
        }
    }

    /// Left-hand side evaluated at a point.
    pub fn evaluate(&self, blocks: &[DMatrix<f64>], scalars: &[f64]) -> f64 {
        let b: f64 = self.blocks.iter().map(|(id, m)| crate::frobenius(m, &blocks[id.0])).sum();
        let s: f64 = self.scalars.iter().map(|(id, c)| c * scalars[id.0]).sum();
        b + s
    }

    /// Signed violation at a point: positive when the row does not hold.
    pub fn violation(&self, blocks: &[DMatrix<f64>], scalars: &[f64]) -> f64 {
        let lhs = self.evaluate(blocks, scalars);
        match self.sense {
            Sense::Eq => (lhs - self.rhs).abs(),
            Sense::Ge => self.rhs - lhs,
            Sense::Le => lhs - self.rhs,
        }
    }
}

/// Minimize `sum_j C_j • X_j + c^T s` subject to the rows, with every block
/// PSD and every scalar nonnegative.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProblem {
    block_dims: Vec<usize>,
    block_objective: Vec<DMatrix<f64>>,
    block_transform: Vec<Option<DMatrix<f64>>>,
    scalar_objective: Vec<f64>,
    scalar_scaling: Vec<f64>,
    rows: Vec<ConstraintRow>,
    implied: Vec<bool>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_block(&mut self, dim: usize) -> BlockId {
        self.block_dims.push(dim);
        self.block_objective.push(DMatrix::zeros(dim, dim));
        self.block_transform.push(None);
        BlockId(self.block_dims.len() - 1)
    }

    pub fn add_scalar(&mut self) -> ScalarId {
        self.scalar_objective.push(0.0);
        self.scalar_scaling.push(1.0);
        ScalarId(self.scalar_objective.len() - 1)
    }

    pub fn set_block_objective(&mut self, block: BlockId, c: DMatrix<f64>) {
        self.block_objective[block.0] = c;
    }

    pub fn add_block_objective(&mut self, block: BlockId, c: &DMatrix<f64>) {
        self.block_objective[block.0] += c;
    }

    /// Expected magnitudes `d` of the block's diagonal square roots. The
    /// embedded solver works on `D⁻¹ X D⁻¹` with `D = diag(d)`, which keeps
    /// blocks with entries of very different size well conditioned; the
    /// problem itself is unchanged.
    pub fn set_block_scaling(&mut self, block: BlockId, d: Vec<f64>) {
        let t = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(d));
        self.block_transform[block.0] = Some(t);
    }

    /// Restricts the block to the face `X = T W Tᵀ` with `T` of size
    /// `dim × r` and `W` an `r × r` PSD matrix; the embedded solver then
    /// works on `W`. Only valid when the rows already force every feasible
    /// `X` onto that face (e.g. a known kernel vector); it restores strict
    /// feasibility for such problems. Replaces any scaling set before.
    pub fn set_block_face(&mut self, block: BlockId, t: DMatrix<f64>) {
        self.block_transform[block.0] = Some(t);
    }

    /// The block's solver transform `T` (`X = T W Tᵀ`), if any.
    pub fn block_transform(&self, block: BlockId) -> Option<&DMatrix<f64>> {
        self.block_transform[block.0].as_ref()
    }

    /// Expected magnitude of a scalar; the embedded solver works on `s / d`.
    pub fn set_scalar_scaling(&mut self, scalar: ScalarId, d: f64) {
        self.scalar_scaling[scalar.0] = d;
    }

    pub fn scalar_scaling(&self, scalar: ScalarId) -> f64 {
        self.scalar_scaling[scalar.0]
    }

    pub fn set_scalar_objective(&mut self, scalar: ScalarId, c: f64) {
        self.scalar_objective[scalar.0] = c;
    }

    pub fn add_row(&mut self, row: ConstraintRow) -> RowId {
        self.rows.push(row);
        self.implied.push(false);
        RowId(self.rows.len() - 1)
    }

    /// Marks a row as implied by the others (typically after a face
    /// restriction): it stays part of the problem but is left out of the
    /// embedded solve, and its dual is reported as zero.
    pub fn mark_implied(&mut self, id: RowId) {
        self.implied[id.0] = true;
    }

    pub fn is_implied(&self, id: RowId) -> bool {
        self.implied[id.0]
    }

    pub fn row_mut(&mut self, id: RowId) -> &mut ConstraintRow {
        &mut self.rows[id.0]
    }

    pub fn rows(&self) -> &[ConstraintRow] {
        &self.rows
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn block_dim(&self, block: BlockId) -> usize {
        self.block_dims[block.0]
    }

    pub fn num_blocks(&self) -> usize {
        self.block_dims.len()
    }

    pub fn num_scalars(&self) -> usize {
        self.scalar_objective.len()
    }

    pub fn block_objective(&self) -> &[DMatrix<f64>] {
        &self.block_objective
    }

    pub fn scalar_objective(&self) -> &[f64] {
        &self.scalar_objective
    }

    /// Row pinning `X_ij = value` through a symmetric indicator matrix
    /// (weight ½ on both off-diagonal entries).
    pub fn fixed_entry_row(
        &self,
        block: BlockId,
        i: usize,
        j: usize,
        value: f64,
    ) -> Result<ConstraintRow, ConicError> {
        let dim = *self.block_dims.get(block.0).ok_or(ConicError::IndexOutOfRange {
            block: block.0,
            i,
            j,
            dim: 0,
        })?;
        if i >= dim || j >= dim {
            return Err(ConicError::IndexOutOfRange { block: block.0, i, j, dim });
        }
        let mut m = DMatrix::zeros(dim, dim);
        if i == j {
            m[(i, i)] = 1.0;
        } else {
            m[(i, j)] = 0.5;
            m[(j, i)] = 0.5;
        }
        Ok(ConstraintRow::new(Sense::Eq, value)
            .with_block(block, m)
            .labeled(format!("fix[{},{},{}]", block.0, i, j)))
    }

    pub fn objective_at(&self, blocks: &[DMatrix<f64>], scalars: &[f64]) -> f64 {
        let b: f64 = self
            .block_objective
            .iter()
            .zip(blocks)
            .map(|(c, x)| crate::frobenius(c, x))
            .sum();
        let s: f64 = self.scalar_objective.iter().zip(scalars).map(|(c, x)| c * x).sum();
        b + s
    }

    pub fn validate(&self) -> Result<(), ConicError> {
        if self.block_dims.is_empty() && self.scalar_objective.is_empty() {
            return Err(ConicError::Empty);
        }
        for (b, &dim) in self.block_dims.iter().enumerate() {
            if dim == 0 {
                return Err(ConicError::BadBlockDim { block: b, dim });
            }
            let c = &self.block_objective[b];
            if c.shape() != (dim, dim) || !is_symmetric(c, 1e-12) {
                return Err(ConicError::BadObjective(format!(
                    "block {b} coefficient is not a symmetric {dim}x{dim} matrix"
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(ConicError::BadObjective(format!("block {b} has non-finite data")));
            }
            if let Some(t) = &self.block_transform[b] {
                if t.nrows() != dim
                    || t.ncols() == 0
                    || t.ncols() > dim
                    || t.iter().any(|x| !x.is_finite())
                    || t.column_iter().any(|c| c.norm() == 0.0)
                {
                    return Err(ConicError::BadObjective(format!(
                        "block {b} transform must be a finite {dim}-row matrix with non-zero columns"
                    )));
                }
            }
        }
        if self.scalar_scaling.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(ConicError::BadObjective("scalar scaling must be positive and finite".into()));
        }
        if self.scalar_objective.iter().any(|v| !v.is_finite()) {
            return Err(ConicError::BadObjective("non-finite scalar coefficient".into()));
        }
        for (r, row) in self.rows.iter().enumerate() {
            let bad = |reason: String| ConicError::BadRow { row: r, label: row.label.clone(), reason };
            if !row.rhs.is_finite() {
                return Err(bad("non-finite right-hand side".into()));
            }
            for (id, m) in &row.blocks {
                let dim = *self
                    .block_dims
                    .get(id.0)
                    .ok_or_else(|| bad(format!("unknown block {}", id.0)))?;
                if m.shape() != (dim, dim) {
                    return Err(bad(format!("coefficient on block {} is not {dim}x{dim}", id.0)));
                }
                if !is_symmetric(m, 1e-12) {
                    return Err(bad(format!("coefficient on block {} is not symmetric", id.0)));
                }
                if m.iter().any(|v| !v.is_finite()) {
                    return Err(bad(format!("non-finite coefficient on block {}", id.0)));
                }
            }
            for (id, c) in &row.scalars {
                if id.0 >= self.scalar_objective.len() {
                    return Err(bad(format!("unknown scalar {}", id.0)));
                }
                if !c.is_finite() {
                    return Err(bad(format!("non-finite coefficient on scalar {}", id.0)));
                }
            }
        }
        Ok(())
    }
}
