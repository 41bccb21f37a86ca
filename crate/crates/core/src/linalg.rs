//! Small dense helpers on top of nalgebra.
//!
//! Every system solved during fitting is a d×d (or D×D for initialization)
//! symmetric positive-definite matrix, so a Cholesky factorization with a
//! relative pivot check is all that is needed.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Smallest admissible squared Cholesky pivot relative to the largest one.
const PIVOT_RATIO: f64 = 1e-13;

fn check_pivots(l: &DMatrix<f64>, what: &str) -> Result<()> {
    let diag = l.diagonal();
    let max = diag.iter().fold(0.0f64, |a, &b| a.max(b * b));
    let min = diag.iter().fold(f64::INFINITY, |a, &b| a.min(b * b));
    if !(max > 0.0) || !(min > PIVOT_RATIO * max) || !min.is_finite() {
        return Err(Error::SingularSystem(what.to_string()));
    }
    Ok(())
}

/// Solves `a * x = b` for symmetric positive-definite `a`.
pub fn solve_spd(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularSystem(what.to_string()))?;
    check_pivots(&chol.l(), what)?;
    Ok(chol.solve(b))
}

pub fn solve_spd_vec(a: &DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let chol = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::SingularSystem(what.to_string()))?;
    check_pivots(&chol.l(), what)?;
    Ok(chol.solve(b))
}

/// Eigenpairs of a symmetric matrix sorted by decreasing eigenvalue.
pub fn sorted_eigen(sym: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let eig = SymmetricEigen::new(sym.clone());
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(sym.nrows(), order.len());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(sym: &DMatrix<f64>) -> f64 {
    if sym.nrows() == 0 {
        return 0.0;
    }
    SymmetricEigen::new(sym.clone())
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b))
}

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.transpose() * m;
    let (values, _) = sorted_eigen(&gram);
    values.first().copied().unwrap_or(0.0).max(0.0).sqrt()
}

/// Flips the sign of each column so that its entry of largest magnitude is positive.
pub(crate) fn canonical_column_signs(m: &mut DMatrix<f64>) {
    for mut col in m.column_iter_mut() {
        let mut best = 0.0f64;
        for &v in col.iter() {
            if v.abs() > best.abs() {
                best = v;
            }
        }
        if best < 0.0 {
            col.neg_mut();
        }
    }
}
