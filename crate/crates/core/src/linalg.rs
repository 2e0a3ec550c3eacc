//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, VeqError};

/// Relative singular-value threshold used for every rank computation.
pub const RANK_RTOL: f64 = 1e-8;

pub fn singular_values(m: &DMatrix<f64>) -> DVector<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return DVector::zeros(0);
    }
    m.clone().svd(false, false).singular_values
}

/// Numerical rank: singular values above `RANK_RTOL * sigma_max`.
pub fn rank(m: &DMatrix<f64>) -> usize {
    let sv = singular_values(m);
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > RANK_RTOL * max).count()
}

/// Dimension of `{x : m x = 0}`.
pub fn nullity(m: &DMatrix<f64>) -> usize {
    m.ncols() - rank(m)
}

/// Solves `a x = b` with partial-pivot LU.
pub fn solve(a: DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != a.ncols() || a.nrows() != b.len() {
        return Err(VeqError::dim(format!(
            "solve: {}x{} system with rhs of length {}",
            a.nrows(),
            a.ncols(),
            b.len()
        )));
    }
    let x = a
        .lu()
        .solve(b)
        .ok_or_else(|| VeqError::Singular("LU factorization has a zero pivot".into()))?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(VeqError::Singular("solution is not finite".into()));
    }
    Ok(x)
}

/// Maximum absolute entry.
pub fn max_abs<'a>(it: impl IntoIterator<Item = &'a f64>) -> f64 {
    it.into_iter().fold(0.0, |m, &x| m.max(x.abs()))
}
