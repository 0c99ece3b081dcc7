//! Small dense helpers on top of faer.

use crate::error::{Error, Result};
use faer::Mat;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

pub type C64 = Complex64;
pub type CMat = Mat<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn from_rows(rows: &[Vec<C64>]) -> CMat {
    let n = rows.len();
    let m = rows.first().map_or(0, |r| r.len());
    Mat::from_fn(n, m, |i, j| rows[i][j])
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn max_abs(a: &CMat) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).norm());
        }
    }
    m
}

/// Max-norm of `A A† - 1`. Non-square input has infinite defect.
pub fn unitary_defect(a: &CMat) -> f64 {
    if a.nrows() != a.ncols() {
        return f64::INFINITY;
    }
    let p = a * a.adjoint();
    max_abs_diff(&p, &identity(a.nrows()))
}

pub fn trace(a: &CMat) -> C64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

pub fn complex_gaussian(n: usize, m: usize, rng: &mut impl Rng) -> CMat {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Mat::from_fn(n, m, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// Haar-distributed `n x n` unitary.
///
/// QR of a Ginibre matrix alone is not Haar: the phases of `R`'s diagonal are
/// basis dependent, so they are stripped off by `Q diag(R_ii / |R_ii|)`.
pub fn haar_unitary(n: usize, rng: &mut impl Rng) -> CMat {
    let g = complex_gaussian(n, n, rng);
    let qr = g.qr();
    let q = qr.compute_Q();
    let r = qr.R();
    Mat::from_fn(n, n, |i, j| {
        let rjj = r[(j, j)];
        let ph = if rjj.norm() > 0.0 { rjj / rjj.norm() } else { ONE };
        q[(i, j)] * ph
    })
}

/// The unitary factor of the polar decomposition, i.e. the closest unitary in Frobenius norm.
pub fn nearest_unitary(a: &CMat) -> Result<CMat> {
    let svd = a
        .svd()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    Ok(svd.U() * svd.V().adjoint())
}

/// Singular values in descending order.
pub fn singular_values(a: &CMat) -> Result<Vec<f64>> {
    let mut s = a
        .singular_values()
        .map_err(|e| Error::Numerical(format!("svd failed: {e:?}")))?;
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Eigenvalues of a Hermitian matrix in descending order.
pub fn hermitian_eigenvalues(a: &CMat) -> Result<Vec<f64>> {
    let mut e = a
        .self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Numerical(format!("eigensolver failed: {e:?}")))?;
    e.sort_by(|x, y| y.total_cmp(x));
    Ok(e)
}

/// View a row-major buffer as an `r x c` matrix (copied).
pub fn from_row_major(buf: &[C64], r: usize, c: usize) -> CMat {
    assert_eq!(buf.len(), r * c);
    Mat::from_fn(r, c, |i, j| buf[i * c + j])
}
