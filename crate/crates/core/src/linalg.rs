//! Small dense numeric helpers on top of nalgebra's SVD.

use nalgebra::{DMatrix, DVector};

/// Numerical rank: singular values above `tol * σ_max`.
pub fn rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|s| **s > tol * smax).count()
}

/// Orthonormal basis (columns) of the right nullspace of `m`.
pub fn nullspace(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 {
        return DMatrix::identity(n, n);
    }
    // pad to at least n rows so that V is square
    let rows = m.nrows().max(n);
    let mut a = DMatrix::zeros(rows, n);
    a.view_mut((0, 0), (m.nrows(), n)).copy_from(m);
    let svd = a.svd(false, true);
    let v_t = svd.v_t.expect("requested V");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| smax == 0.0 || **s <= tol * smax)
        .map(|(i, _)| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Orthonormal basis (columns) of the column space of `m`.
pub fn range(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    if m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = m.clone().svd(true, false);
    let u = svd.u.expect("requested U");
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cols: Vec<DVector<f64>> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter(|(_, s)| smax > 0.0 && **s > tol * smax)
        .map(|(i, _)| u.column(i).into_owned())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(m.nrows(), 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

/// Component of `v` orthogonal to the column span of the orthonormal `basis`.
pub fn residual(basis: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    if basis.ncols() == 0 {
        return v.clone();
    }
    v - basis * (basis.transpose() * v)
}

/// Relative distance of `v` from span(basis): ‖v − Pv‖ / max(‖v‖, tiny).
pub fn relative_residual(basis: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let nv = v.norm();
    if nv == 0.0 {
        return 0.0;
    }
    residual(basis, v).norm() / nv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_and_nullspace() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]);
        assert_eq!(rank(&m, 1e-9), 1);
        let ns = nullspace(&m, 1e-9);
        assert_eq!(ns.ncols(), 2);
        assert!((&m * &ns).norm() < 1e-12);
    }

    #[test]
    fn projection_residual() {
        let b = range(&DMatrix::from_row_slice(3, 1, &[1.0, 0.0, 0.0]), 1e-12);
        let v = DVector::from_vec(vec![1.0, 1.0, 0.0]);
        assert!((relative_residual(&b, &v) - 0.5f64.sqrt()).abs() < 1e-12);
    }
}
