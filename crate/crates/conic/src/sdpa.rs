//! SDPA sparse (`.dat-s`) export and CSDP-style solution import.
//!
//! The exported problem is `max F0 • Y  s.t.  F_i • Y = c_i,  Y ⪰ 0` with
//! `F0 = -C`, so the optimal value in the file is the negated objective of the
//! [`ConicProblem`]. Inequalities carry explicit surplus variables, and all
//! scalars (user scalars first, then surpluses) form one trailing diagonal
//! block.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::ConicError;
use crate::problem::ConicProblem;
use crate::standard::StandardForm;

/// SDPA sparse text of the problem after validation.
pub fn to_sdpa(problem: &ConicProblem) -> Result<String, ConicError> {
    problem.validate()?;
    let sf = StandardForm::unscaled(problem);
    if let Some(&r) = sf.infeasible_rows.first() {
        return Err(ConicError::BadRow {
            row: r,
            label: problem.rows()[r].label.clone(),
            reason: "row has no variables and cannot be satisfied".into(),
        });
    }
    Ok(write_standard(&sf))
}

pub(crate) fn write_standard(sf: &StandardForm) -> String {
    let mut out = String::new();
    let nblocks = sf.block_dims.len() + usize::from(sf.n_scalars > 0);
    let _ = writeln!(out, "\"htc conic problem: {} rows, {} blocks, {} scalars", sf.m(), sf.block_dims.len(), sf.n_scalars);
    let _ = writeln!(out, "{}", sf.m());
    let _ = writeln!(out, "{nblocks}");
    let mut sizes: Vec<String> = sf.block_dims.iter().map(|d| d.to_string()).collect();
    if sf.n_scalars > 0 {
        sizes.push(format!("-{}", sf.n_scalars));
    }
    let _ = writeln!(out, "{}", sizes.join(" "));
    let b: Vec<String> = sf.b.iter().map(|v| format!("{v:e}")).collect();
    let _ = writeln!(out, "{}", b.join(" "));

    let diag_block = sf.block_dims.len() + 1;
    for (j, c) in sf.c_blocks.iter().enumerate() {
        write_matrix(&mut out, 0, j + 1, &(-c));
    }
    for (k, c) in sf.c_scalars.iter().enumerate() {
        if *c != 0.0 {
            let _ = writeln!(out, "0 {diag_block} {} {} {:e}", k + 1, k + 1, -c);
        }
    }
    for (i, row) in sf.rows.iter().enumerate() {
        for (j, a) in &row.blocks {
            write_matrix(&mut out, i + 1, j + 1, a);
        }
        for (k, c) in &row.scalars {
            let _ = writeln!(out, "{} {diag_block} {} {} {c:e}", i + 1, k + 1, k + 1);
        }
    }
    out
}

fn write_matrix(out: &mut String, mat: usize, block: usize, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            let v = m[(i, j)];
            if v != 0.0 {
                let _ = writeln!(out, "{mat} {block} {} {} {v:e}", i + 1, j + 1);
            }
        }
    }
}

/// Primal matrix blocks, the diagonal scalar block and the row multipliers
/// read from a solution file.
#[derive(Debug, Clone, PartialEq)]
pub struct SdpaSolution {
    pub y: Vec<f64>,
    pub blocks: Vec<DMatrix<f64>>,
    pub scalars: Vec<f64>,
}

/// Parses the CSDP solution layout: the first line holds the `m` multipliers,
/// then `matno block i j value` entries where `matno = 1` is the dual slack
/// and `matno = 2` the primal matrix.
pub fn parse_solution(
    text: &str,
    block_dims: &[usize],
    n_scalars: usize,
    m: usize,
) -> Result<SdpaSolution, ConicError> {
    let mut lines = text.lines().filter(|l| {
        let t = l.trim();
        !t.is_empty() && !t.starts_with('"') && !t.starts_with('*')
    });
    let first = lines.next().ok_or_else(|| ConicError::Format("empty solution file".into()))?;
    let y = parse_numbers(first)?;
    if y.len() != m {
        return Err(ConicError::Format(format!("expected {m} multipliers, found {}", y.len())));
    }
    let mut blocks: Vec<DMatrix<f64>> = block_dims.iter().map(|&n| DMatrix::zeros(n, n)).collect();
    let mut scalars = vec![0.0; n_scalars];
    for line in lines {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 5 {
            return Err(ConicError::Format(format!("malformed entry `{line}`")));
        }
        let idx = |s: &str| {
            s.parse::<usize>().map_err(|_| ConicError::Format(format!("bad index in `{line}`")))
        };
        let (mat, blk, i, j) = (idx(f[0])?, idx(f[1])?, idx(f[2])?, idx(f[3])?);
        let v = parse_number(f[4])?;
        if mat != 2 {
            continue;
        }
        if blk == 0 || i == 0 || j == 0 {
            return Err(ConicError::Format(format!("zero index in `{line}`")));
        }
        if blk <= block_dims.len() {
            let n = block_dims[blk - 1];
            if i > n || j > n {
                return Err(ConicError::Format(format!("entry outside block in `{line}`")));
            }
            blocks[blk - 1][(i - 1, j - 1)] = v;
            blocks[blk - 1][(j - 1, i - 1)] = v;
        } else if blk == block_dims.len() + 1 && i == j && i <= n_scalars {
            scalars[i - 1] = v;
        } else {
            return Err(ConicError::Format(format!("unexpected entry `{line}`")));
        }
    }
    Ok(SdpaSolution { y, blocks, scalars })
}

fn parse_number(s: &str) -> Result<f64, ConicError> {
    // Fortran-style exponents appear in some solver outputs.
    s.replace(['D', 'd'], "e").parse::<f64>().map_err(|_| ConicError::Format(format!("bad number `{s}`")))
}

fn parse_numbers(line: &str) -> Result<Vec<f64>, ConicError> {
    line.split(|c: char| c.is_whitespace() || c == ',' || c == '{' || c == '}')
        .filter(|s| !s.is_empty())
        .map(parse_number)
        .collect()
}
