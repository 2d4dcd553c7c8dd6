//! Complex dense helpers shared by the estimators and the theory checks.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Relative singular-value cutoff for least-squares solves.
pub const LS_RCOND: f64 = 1e-10;
/// Relative singular-value cutoff for rank and spark decisions.
pub const RANK_RCOND: f64 = 1e-8;

pub const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
pub const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Complex exponential `exp(j·phase)`.
#[inline]
pub fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

/// Moore-Penrose pseudo-inverse; singular values below `rcond · σ_max` are dropped.
pub fn pinv(a: &CMat, rcond: f64) -> CMat {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return CMat::zeros(n, m);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    let s_max = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = rcond * s_max;
    let k = svd.singular_values.len();
    let mut out = CMat::zeros(n, m);
    for i in 0..k {
        let s = svd.singular_values[i];
        if s_max == 0.0 || s <= cutoff {
            continue;
        }
        let vi = v_t.row(i).adjoint();
        let ui = u.column(i).adjoint();
        out += (vi * ui).scale(1.0 / s);
    }
    out
}

/// Numerical rank with a relative singular-value cutoff.
pub fn rank(a: &CMat, rcond: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    let sv = a.clone().singular_values();
    let s_max = sv.iter().cloned().fold(0.0, f64::max);
    if s_max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rcond * s_max).count()
}

/// Columns of `a` listed in `cols`, in that order.
pub fn select_columns(a: &CMat, cols: &[usize]) -> CMat {
    CMat::from_fn(a.nrows(), cols.len(), |i, j| a[(i, cols[j])])
}

/// Minimum-norm least-squares fit of `b` on the columns `cols` of `a`,
/// scattered back into a full-length coefficient vector.
pub fn restricted_ls(a: &CMat, cols: &[usize], b: &CVec) -> CVec {
    let mut full = CVec::zeros(a.ncols());
    if cols.is_empty() {
        return full;
    }
    let sub = select_columns(a, cols);
    let coef = pinv(&sub, LS_RCOND) * b;
    for (k, &c) in cols.iter().enumerate() {
        full[c] = coef[k];
    }
    full
}

pub fn energy(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

pub fn frobenius_sqr(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum()
}

/// Column-major vectorization.
pub fn vect(a: &CMat) -> CVec {
    CVec::from_column_slice(a.as_slice())
}

/// Kronecker product `a ⊗ b`.
pub fn kron(a: &CMat, b: &CMat) -> CMat {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    CMat::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}
