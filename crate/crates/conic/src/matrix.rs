use nalgebra::DMatrix;

/// Entrywise inner product `A • B = sum_ij A_ij B_ij`.
pub fn frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let n = m.nrows();
    let scale = m.amax().max(1.0);
    (0..n).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}

/// Eigenvalues of a symmetric matrix, largest first.
pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let mut ev: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    sorted_eigenvalues(m).last().copied().unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsdCheck {
    pub is_psd: bool,
    pub min_eigenvalue: f64,
}

/// `λ_min(M) ≥ −tol`.
pub fn psd_check(m: &DMatrix<f64>, tol: f64) -> PsdCheck {
    let min_eigenvalue = min_eigenvalue(m);
    PsdCheck { is_psd: min_eigenvalue >= -tol, min_eigenvalue }
}

pub(crate) fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Largest `α ≥ 0` with `X + α dX ⪰ 0`, given the Cholesky factor of `X`.
/// Returns `f64::INFINITY` when `dX` does not point out of the cone.
pub(crate) fn max_step_psd(chol_x: &DMatrix<f64>, dx: &DMatrix<f64>) -> f64 {
    let linv = chol_x
        .clone()
        .solve_lower_triangular(&DMatrix::identity(dx.nrows(), dx.nrows()))
        .expect("cholesky factor is nonsingular");
    let mut s = &linv * dx * linv.transpose();
    symmetrize(&mut s);
    let lmin = min_eigenvalue(&s);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psd_check_identity() {
        let r = psd_check(&DMatrix::identity(3, 3), 1e-9);
        assert!(r.is_psd);
        assert!((r.min_eigenvalue - 1.0).abs() < 1e-14);
    }

    #[test]
    fn psd_check_indefinite_diagonal() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let r = psd_check(&m, 1e-9);
        assert!(!r.is_psd);
        assert!((r.min_eigenvalue + 1.0).abs() < 1e-14);
    }

    #[test]
    fn psd_check_rank_one_boundary() {
        let m = DMatrix::from_element(2, 2, 1.0);
        let r = psd_check(&m, 1e-12);
        assert!(r.is_psd);
        assert!(r.min_eigenvalue.abs() < 1e-14);
    }

    #[test]
    fn frobenius_matches_trace_of_product() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 3.0]);
        let b = DMatrix::from_row_slice(2, 2, &[4.0, -1.0, -1.0, 0.5]);
        assert_eq!(frobenius(&a, &b), (&a * &b).trace());
    }

    #[test]
    fn step_to_boundary() {
        let l = DMatrix::identity(2, 2);
        let dx = DMatrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 1.0]);
        assert!((max_step_psd(&l, &dx) - 0.5).abs() < 1e-14);
        assert!(max_step_psd(&l, &DMatrix::identity(2, 2)).is_infinite());
    }
}
