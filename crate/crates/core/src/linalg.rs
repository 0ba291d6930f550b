//! Thin helpers over `faer` for the dense kernels used by the quantum modules.

use faer::linalg::solvers::DenseSolveCore;
use faer::{c64, Mat, Side};

use crate::error::{Error, Result};

pub type CMat = Mat<c64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

pub fn trace(m: &CMat) -> c64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// `Tr[op * rho]` without forming the product.
pub fn expectation(op: &CMat, rho: &CMat) -> c64 {
    let d = op.nrows();
    let mut acc = ZERO;
    for j in 0..d {
        for i in 0..d {
            acc += op[(i, j)] * rho[(j, i)];
        }
    }
    acc
}

pub fn adjoint(m: &CMat) -> CMat {
    Mat::from_fn(m.ncols(), m.nrows(), |i, j| m[(j, i)].conj())
}

pub fn hermitize(m: &CMat) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

pub fn max_abs(m: &CMat) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut best = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            best = best.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    best
}

pub fn frobenius(m: &CMat) -> f64 {
    let mut acc = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            acc += m[(i, j)].norm_sqr();
        }
    }
    acc.sqrt()
}

pub fn scaled(m: &CMat, s: c64) -> CMat {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

/// Eigenvalues of a Hermitian matrix in ascending order. Only the lower
/// triangle is read.
pub fn hermitian_eigenvalues(m: &CMat) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numeric(format!("hermitian eigensolver: {e:?}")))
}

/// Eigenpairs of a Hermitian matrix; columns of the returned matrix are the
/// eigenvectors, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let e = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("hermitian eigensolver: {e:?}")))?;
    let n = m.nrows();
    let vals = (0..n).map(|i| e.S()[i].re).collect();
    Ok((vals, e.U().to_owned()))
}

/// Trace norm `Tr|A|` of a Hermitian matrix.
pub fn trace_norm_hermitian(m: &CMat) -> Result<f64> {
    Ok(hermitian_eigenvalues(&hermitize(m))?.iter().map(|x| x.abs()).sum())
}

/// Trace distance `Tr|A - B| / 2` between two Hermitian matrices.
pub fn trace_distance(a: &CMat, b: &CMat) -> Result<f64> {
    let diff = Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] - b[(i, j)]);
    Ok(0.5 * trace_norm_hermitian(&diff)?)
}

/// Eigen-decomposition of a real nonsymmetric matrix. Complex eigenvalues come
/// in exact conjugate pairs and real eigenvalues have zero imaginary part.
pub fn real_eigen(a: &Mat<f64>) -> Result<(Vec<c64>, CMat)> {
    let e = a
        .eigen()
        .map_err(|e| Error::Numeric(format!("real eigensolver ({}x{}): {e:?}", a.nrows(), a.ncols())))?;
    let n = a.nrows();
    let vals: Vec<c64> = (0..n).map(|i| e.S()[i]).collect();
    check_finite(&vals, "real eigensolver")?;
    Ok((vals, e.U().to_owned()))
}

pub fn real_eigenvalues(a: &Mat<f64>) -> Result<Vec<c64>> {
    let vals = a
        .eigenvalues()
        .map_err(|e| Error::Numeric(format!("real eigensolver ({}x{}): {e:?}", a.nrows(), a.ncols())))?;
    check_finite(&vals, "real eigensolver")?;
    Ok(vals)
}

pub fn complex_eigen(a: &CMat) -> Result<(Vec<c64>, CMat)> {
    let e = a
        .eigen()
        .map_err(|e| Error::Numeric(format!("complex eigensolver ({}x{}): {e:?}", a.nrows(), a.ncols())))?;
    let n = a.nrows();
    let vals: Vec<c64> = (0..n).map(|i| e.S()[i]).collect();
    check_finite(&vals, "complex eigensolver")?;
    Ok((vals, e.U().to_owned()))
}

pub fn complex_eigenvalues(a: &CMat) -> Result<Vec<c64>> {
    let vals = a
        .eigenvalues()
        .map_err(|e| Error::Numeric(format!("complex eigensolver ({}x{}): {e:?}", a.nrows(), a.ncols())))?;
    check_finite(&vals, "complex eigensolver")?;
    Ok(vals)
}

/// Inverse through LU with partial pivoting; fails if the result is not finite.
pub fn inverse(a: &CMat) -> Result<CMat> {
    let inv = a.partial_piv_lu().inverse();
    if max_abs(&inv).is_finite() {
        Ok(inv)
    } else {
        Err(Error::Numeric(format!("singular {}x{} matrix in inverse", a.nrows(), a.ncols())))
    }
}

fn check_finite(vals: &[c64], what: &str) -> Result<()> {
    if vals.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("{what} returned non-finite eigenvalues")))
    }
}

/// Total order used for every spectrum in the crate: slowest decay first,
/// then smallest `|Im|`, then `Im` ascending.
pub fn spectral_order(a: &c64, b: &c64) -> std::cmp::Ordering {
    (-a.re)
        .total_cmp(&-b.re)
        .then(a.im.abs().total_cmp(&b.im.abs()))
        .then(a.im.total_cmp(&b.im))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_norm_of_diagonal() {
        let m = Mat::from_fn(3, 3, |i, j| if i == j { c64::new([1.0, -2.0, 0.5][i], 0.0) } else { ZERO });
        assert!((trace_norm_hermitian(&m).unwrap() - 3.5).abs() < 1e-12);
    }

    #[test]
    fn inverse_round_trip() {
        let a = Mat::from_fn(4, 4, |i, j| c64::new((i * 3 + j) as f64 % 5.0 + if i == j { 4.0 } else { 0.0 }, j as f64 * 0.1));
        let inv = inverse(&a).unwrap();
        let p = &a * &inv;
        for i in 0..4 {
            for j in 0..4 {
                let want = if i == j { ONE } else { ZERO };
                assert!((p[(i, j)] - want).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn ordering_breaks_ties() {
        let mut v = vec![c64::new(-1.0, 2.0), c64::new(0.0, 0.0), c64::new(-1.0, -2.0), c64::new(-1.0, 0.0)];
        v.sort_by(spectral_order);
        assert_eq!(v, vec![c64::new(0.0, 0.0), c64::new(-1.0, 0.0), c64::new(-1.0, -2.0), c64::new(-1.0, 2.0)]);
    }

    #[test]
    fn real_eigen_pairs_are_exact_conjugates() {
        let a = Mat::from_fn(5, 5, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let (vals, _) = real_eigen(&a).unwrap();
        for z in &vals {
            if z.im != 0.0 {
                assert!(vals.iter().any(|w| *w == z.conj()));
            }
        }
    }
}
