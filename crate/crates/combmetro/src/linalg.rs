//! Dense complex helpers on top of `faer`.

use faer::{Mat, Side};

pub use faer::c64;

/// Dense complex matrix.
pub type CMat = Mat<c64>;
/// Dense real matrix.
pub type RMat = Mat<f64>;

pub const ZERO: c64 = c64 { re: 0.0, im: 0.0 };
pub const ONE: c64 = c64 { re: 1.0, im: 0.0 };
pub const I: c64 = c64 { re: 0.0, im: 1.0 };

#[inline]
pub fn cr(re: f64) -> c64 {
    c64::new(re, 0.0)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    Mat::zeros(r, c)
}

pub fn identity(n: usize) -> CMat {
    Mat::from_fn(n, n, |i, j| if i == j { ONE } else { ZERO })
}

pub fn from_rows(rows: &[&[c64]]) -> CMat {
    let r = rows.len();
    let c = if r == 0 { 0 } else { rows[0].len() };
    Mat::from_fn(r, c, |i, j| rows[i][j])
}

pub fn from_real_rows(rows: &[&[f64]]) -> CMat {
    let r = rows.len();
    let c = if r == 0 { 0 } else { rows[0].len() };
    Mat::from_fn(r, c, |i, j| cr(rows[i][j]))
}

pub fn adjoint(a: &CMat) -> CMat {
    a.adjoint().to_owned()
}

pub fn transpose(a: &CMat) -> CMat {
    a.transpose().to_owned()
}

pub fn conj(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)].conj())
}

pub fn scale(a: &CMat, s: c64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn scale_re(a: &CMat, s: f64) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] * s)
}

pub fn trace(a: &CMat) -> c64 {
    (0..a.nrows().min(a.ncols())).map(|i| a[(i, i)]).sum()
}

pub fn frob(a: &CMat) -> f64 {
    a.norm_l2()
}

/// `Re Tr(A B)` for Hermitian `A`, `B`.
pub fn inner_re(a: &CMat, b: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            let x = a[(i, j)];
            let y = b[(i, j)];
            s += x.re * y.re + x.im * y.im;
        }
    }
    s
}

/// Frobenius distance from Hermiticity.
pub fn herm_defect(a: &CMat) -> f64 {
    let mut s = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            s += (a[(i, j)] - a[(j, i)].conj()).norm_sqr();
        }
    }
    s.sqrt()
}

/// `(A + A†)/2`.
pub fn hermitize(a: &CMat) -> CMat {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| {
        (a[(i, j)] + a[(j, i)].conj()) * 0.5
    })
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac, br, bc) = (a.nrows(), a.ncols(), b.nrows(), b.ncols());
    Mat::from_fn(ar * br, ac * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Column vector as an `n x 1` matrix.
pub fn col(v: &[c64]) -> CMat {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

pub fn outer(u: &[c64], v: &[c64]) -> CMat {
    Mat::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj())
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let h = hermitize(a);
    let e = h
        .self_adjoint_eigen(Side::Lower)
        .expect("self-adjoint eigensolver failed to converge");
    let vals = e.S().column_vector().iter().map(|x| x.re).collect();
    (vals, e.U().to_owned())
}

pub fn eigvalsh(a: &CMat) -> Vec<f64> {
    let h = hermitize(a);
    h.self_adjoint_eigenvalues(Side::Lower)
        .expect("self-adjoint eigensolver failed to converge")
}

pub fn min_eig(a: &CMat) -> f64 {
    eigvalsh(a).first().copied().unwrap_or(0.0)
}

pub fn max_eig(a: &CMat) -> f64 {
    eigvalsh(a).last().copied().unwrap_or(0.0)
}

/// `f(A)` for Hermitian `A` through its spectrum.
pub fn herm_fn(a: &CMat, f: impl Fn(f64) -> c64) -> CMat {
    let (w, u) = eigh(a);
    let n = w.len();
    let fu = Mat::from_fn(n, n, |i, j| u[(i, j)] * f(w[j]));
    &fu * u.adjoint()
}

/// Real symmetric eigendecomposition, eigenvalues ascending.
pub fn eigh_real(a: &RMat) -> (Vec<f64>, RMat) {
    let e = a
        .self_adjoint_eigen(Side::Lower)
        .expect("self-adjoint eigensolver failed to converge");
    let vals = e.S().column_vector().iter().copied().collect();
    (vals, e.U().to_owned())
}

/// Vector 2-norm.
pub fn vnorm(v: &[c64]) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

pub fn column(a: &CMat, j: usize) -> Vec<c64> {
    (0..a.nrows()).map(|i| a[(i, j)]).collect()
}

pub fn sub(a: &CMat, b: &CMat) -> CMat {
    a - b
}

/// Singular values and vectors, thin form.
pub fn thin_svd(a: &CMat) -> (CMat, Vec<f64>, CMat) {
    let s = a.thin_svd().expect("svd failed to converge");
    let sv = s.S().column_vector().iter().map(|x| x.re).collect();
    (s.U().to_owned(), sv, s.V().to_owned())
}

/// Runs all dense kernels single-threaded, so results do not depend on the host's core count.
pub fn use_sequential_kernels() {
    faer::set_global_parallelism(faer::Par::Seq);
}
