//! Small dense linear-algebra helpers on top of `faer`.
//!
//! Frames and Hamiltonians are real; states are complex. Products of a real
//! matrix with complex data are done as two real products on the split
//! real/imaginary parts.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};
use crate::C64;

/// `a · v` for real `a` and complex `v`.
pub fn real_matvec(a: MatRef<'_, f64>, v: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), v.len());
    let x = Mat::<f64>::from_fn(v.len(), 2, |i, j| if j == 0 { v[i].re } else { v[i].im });
    let y = a * &x;
    (0..a.nrows()).map(|i| C64::new(y[(i, 0)], y[(i, 1)])).collect()
}

/// `aᵀ · v` for real `a` and complex `v`.
pub fn real_t_matvec(a: MatRef<'_, f64>, v: &[C64]) -> Vec<C64> {
    real_matvec(a.transpose(), v)
}

/// `a · b` for real `a` and complex `b`.
pub fn real_times_complex(a: MatRef<'_, f64>, b: MatRef<'_, C64>) -> Mat<C64> {
    let (re, im) = split(b);
    let r = a * &re;
    let i = a * &im;
    Mat::from_fn(r.nrows(), r.ncols(), |p, q| C64::new(r[(p, q)], i[(p, q)]))
}

/// `a · b` for complex `a` and real `b`.
pub fn complex_times_real(a: MatRef<'_, C64>, b: MatRef<'_, f64>) -> Mat<C64> {
    let (re, im) = split(a);
    let r = &re * b;
    let i = &im * b;
    Mat::from_fn(r.nrows(), r.ncols(), |p, q| C64::new(r[(p, q)], i[(p, q)]))
}

/// Real and imaginary parts of a complex matrix.
pub fn split(m: MatRef<'_, C64>) -> (Mat<f64>, Mat<f64>) {
    (
        Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re),
        Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].im),
    )
}

pub fn to_complex(m: MatRef<'_, f64>) -> Mat<C64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| C64::new(m[(i, j)], 0.0))
}

/// `f64` eigendecomposition with ascending eigenvalues.
pub fn symmetric_eigen(m: MatRef<'_, f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let evd = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Numeric(format!("symmetric eigensolver failed: {e:?}")))?;
    let s = evd.S();
    let vals = (0..m.nrows()).map(|i| s[i]).collect();
    Ok((vals, evd.U().to_owned()))
}

/// Eigenvalues of a complex Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(m: MatRef<'_, C64>) -> Result<Vec<f64>> {
    let vals = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Numeric(format!("hermitian eigensolver failed: {e:?}")))?;
    Ok(vals)
}

/// Largest elementwise deviation from symmetry.
pub fn symmetry_defect(m: MatRef<'_, f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in j + 1..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Largest elementwise deviation from Hermiticity.
pub fn hermiticity_defect(m: MatRef<'_, C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in j..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// `max |FᵀF − I|` over entries.
pub fn orthonormality_defect(f: MatRef<'_, f64>) -> f64 {
    let g = f.transpose() * f;
    let mut worst = 0.0f64;
    for j in 0..g.ncols() {
        for i in 0..g.nrows() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((g[(i, j)] - target).abs());
        }
    }
    worst
}

/// `Σ p ln p` contribution with the `0 ln 0 = 0` convention.
pub fn xlogx(p: f64) -> f64 {
    if p > 0.0 {
        p * p.ln()
    } else {
        0.0
    }
}

pub fn norm_sqr(v: &[C64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn real_matvec_matches_loops() {
        let a = Mat::<f64>::from_fn(3, 2, |i, j| (i * 2 + j) as f64 - 1.5);
        let v = [C64::new(1.0, -2.0), C64::new(0.5, 3.0)];
        let y = real_matvec(a.as_ref(), &v);
        for i in 0..3 {
            let e = v[0] * a[(i, 0)] + v[1] * a[(i, 1)];
            assert!((y[i] - e).norm() < 1e-14);
        }
        let z = real_t_matvec(a.as_ref(), &y);
        assert_eq!(z.len(), 2);
    }

    #[test]
    fn eigen_of_swap() {
        let m = Mat::<f64>::from_fn(2, 2, |i, j| if i == j { 0.0 } else { -1.0 });
        let (vals, _) = symmetric_eigen(m.as_ref()).unwrap();
        assert!((vals[0] + 1.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
    }
}
