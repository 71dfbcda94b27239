//! Dense complex helpers shared by every module.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{NcError, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn eye(d: usize) -> CMat {
    CMat::identity(d, d)
}

pub fn zeros(r: usize, c: usize) -> CMat {
    CMat::zeros(r, c)
}

pub fn hermitize(m: &CMat) -> CMat {
    (m + m.adjoint()) * c(0.5)
}

fn to_faer(m: &CMat) -> faer::Mat<C64> {
    faer::Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, C64>) -> CMat {
    CMat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Matrix product. Large operands go through faer's blocked kernel, since
/// nalgebra has no fast path for complex entries.
pub fn mul(a: &CMat, b: &CMat) -> CMat {
    if a.nrows().min(a.ncols()).min(b.ncols()) < 48 {
        return a * b;
    }
    from_faer((to_faer(a) * to_faer(b)).as_ref())
}

/// Eigenvalues ascending with matching eigenvector columns.
pub fn eigh(m: &CMat) -> (Vec<f64>, CMat) {
    let d = m.nrows();
    if d == 0 {
        return (Vec::new(), zeros(0, 0));
    }
    let h = hermitize(m);
    match to_faer(&h).self_adjoint_eigen(faer::Side::Lower) {
        Ok(e) => ((0..d).map(|i| e.S()[i].re).collect(), from_faer(e.U())),
        Err(_) => eigh_fallback(&h),
    }
}

fn eigh_fallback(h: &CMat) -> (Vec<f64>, CMat) {
    let d = h.nrows();
    let se = h.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| se.eigenvalues[a].total_cmp(&se.eigenvalues[b]));
    let vals = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vecs = zeros(d, d);
    for (j, &i) in order.iter().enumerate() {
        vecs.set_column(j, &se.eigenvectors.column(i));
    }
    (vals, vecs)
}

pub fn eigvalsh(m: &CMat) -> Vec<f64> {
    eigh(m).0
}

pub fn min_eig(m: &CMat) -> f64 {
    eigvalsh(m).first().copied().unwrap_or(0.0)
}

pub fn max_eig(m: &CMat) -> f64 {
    eigvalsh(m).last().copied().unwrap_or(0.0)
}

/// Full SVD M = U diag(s) V* with s descending.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: CMat,
    pub s: Vec<f64>,
    pub v: CMat,
}

/// Full SVD through faer, NaN-filled when it does not converge. nalgebra's bidiagonal SVD loses up to 1e-3 in
/// reconstruction on some non-normal superoperators.
pub fn svd(m: &CMat) -> Svd {
    let (r, k) = m.shape();
    if r == 0 || k == 0 {
        return Svd { u: eye(r), s: Vec::new(), v: eye(k) };
    }
    let Ok(f) = to_faer(m).svd() else {
        return Svd { u: eye(r), s: vec![f64::NAN; r.min(k)], v: eye(k) };
    };
    Svd {
        u: from_faer(f.U()),
        s: (0..r.min(k)).map(|i| f.S()[i].re).collect(),
        v: from_faer(f.V()),
    }
}

pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    to_faer(m).singular_values().unwrap_or_else(|_| vec![f64::NAN; m.nrows().min(m.ncols())])
}

/// Spectral norm.
pub fn op_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

pub fn min_singular(m: &CMat) -> f64 {
    if m.ncols() > m.nrows() {
        return 0.0;
    }
    singular_values(m).last().copied().unwrap_or(0.0)
}

pub fn max_abs(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Default positivity threshold 1e-10·(1+‖X‖).
pub fn tol_psd(m: &CMat) -> f64 {
    1e-10 * (1.0 + op_norm(m))
}

/// Applies `g` to the eigenvalues of a Hermitian matrix. Eigenvalues below
/// `-floor` are an error; those in `[-floor, 0)` are clipped to zero.
pub fn psd_apply(m: &CMat, floor: f64, what: &str, g: impl Fn(f64) -> f64) -> Result<CMat> {
    let (vals, vecs) = eigh(m);
    if let Some(&lo) = vals.first() {
        if lo < -floor {
            return Err(NcError::NotPositive {
                what: what.to_string(),
                min_eig: lo,
            });
        }
    }
    let d = m.nrows();
    let mut scaled = vecs.clone();
    for j in 0..d {
        let g = c(g(vals[j].max(0.0)));
        for i in 0..d {
            scaled[(i, j)] *= g;
        }
    }
    Ok(scaled * vecs.adjoint())
}

pub fn psd_sqrt(m: &CMat, floor: f64) -> Result<CMat> {
    psd_apply(m, floor, "matrix under square root", f64::sqrt)
}

/// Inverse square root of a positive definite matrix; eigenvalues at or below
/// `floor` are an error.
pub fn pd_inv_sqrt(m: &CMat, floor: f64) -> Result<CMat> {
    let lo = min_eig(m);
    if lo <= floor {
        return Err(NcError::NotPositive {
            what: "matrix under inverse square root".into(),
            min_eig: lo,
        });
    }
    psd_apply(m, floor, "matrix under inverse square root", |x| 1.0 / x.sqrt())
}

pub fn inverse(m: &CMat) -> Result<CMat> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| NcError::Precondition("singular matrix".into()))
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Orthonormal basis of the column space, dropping singular values at or
/// below `rel_tol·σ_max`.
pub fn orth(m: &CMat, rel_tol: f64) -> CMat {
    let rows = m.nrows();
    if m.ncols() == 0 || rows == 0 {
        return zeros(rows, 0);
    }
    let f = svd(m);
    let smax = f.s.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return zeros(rows, 0);
    }
    let keep: Vec<usize> = (0..f.s.len()).filter(|&i| f.s[i] > rel_tol * smax).collect();
    select_columns(&f.u, &keep)
}

/// Orthonormal basis of the null space: right singular vectors with
/// singular value at or below `abs_tol`.
pub fn null_space(m: &CMat, abs_tol: f64) -> CMat {
    let cols = m.ncols();
    if cols == 0 {
        return zeros(0, 0);
    }
    let f = svd(m);
    let keep: Vec<usize> = (0..cols).filter(|&i| f.s.get(i).is_none_or(|&x| x <= abs_tol)).collect();
    select_columns(&f.v, &keep)
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns of `q` inside C^dim.
pub fn complement(q: &CMat, dim: usize) -> CMat {
    if q.ncols() == 0 {
        return eye(dim);
    }
    if q.ncols() >= dim {
        return zeros(dim, 0);
    }
    let p = eye(dim) - q * q.adjoint();
    let (vals, vecs) = eigh(&p);
    let keep: Vec<usize> = (0..dim).filter(|&i| vals[i] > 0.5).collect();
    select_columns(&vecs, &keep)
}

pub fn select_columns(m: &CMat, cols: &[usize]) -> CMat {
    let mut out = zeros(m.nrows(), cols.len());
    for (j, &c) in cols.iter().enumerate() {
        out.set_column(j, &m.column(c));
    }
    out
}

pub fn select_rows(m: &CMat, rows: &[usize]) -> CMat {
    let mut out = zeros(rows.len(), m.ncols());
    for (i, &r) in rows.iter().enumerate() {
        out.set_row(i, &m.row(r));
    }
    out
}

pub fn hstack(blocks: &[&CMat]) -> CMat {
    let rows = blocks.first().map(|b| b.nrows()).unwrap_or(0);
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), (rows, b.ncols())).copy_from(*b);
        at += b.ncols();
    }
    out
}

pub fn block_diag(blocks: &[&CMat]) -> CMat {
    let d: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = zeros(d, d);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, at), (b.nrows(), b.ncols())).copy_from(*b);
        at += b.nrows();
    }
    out
}

pub fn projector(basis: &CMat) -> CMat {
    basis * basis.adjoint()
}

/// Sine of the largest principal angle between two subspaces given by
/// orthonormal columns; 1 when the dimensions differ.
pub fn subspace_distance(u: &CMat, v: &CMat) -> f64 {
    if u.ncols() != v.ncols() {
        return 1.0;
    }
    if u.ncols() == 0 {
        return 0.0;
    }
    let resid = v - u * (u.adjoint() * v);
    op_norm(&resid).min(1.0)
}

pub fn binom(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// Column-major vectorisation, matching `vec(AXB) = (Bᵀ⊗A) vec(X)`.
pub fn vec_of(m: &CMat) -> CVec {
    CVec::from_column_slice(m.as_slice())
}

pub fn unvec(v: &CVec, d: usize) -> CMat {
    CMat::from_column_slice(d, d, v.as_slice())
}

/// Eigenvalues of a general complex matrix via the complex Schur form.
pub fn eigenvalues(m: &CMat) -> Vec<C64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    to_faer(m).eigenvalues().unwrap_or_else(|_| vec![C64::new(f64::NAN, 0.0); m.nrows()])
}

/// Spectral radius, averaging the cluster of computed eigenvalues around the
/// dominant one. A defective eigenvalue of multiplicity p is split by
/// rounding into p values of radius eps^(1/p); their mean is accurate to
/// working precision.
pub fn spectral_radius(m: &CMat) -> f64 {
    let ev = eigenvalues(m);
    let Some(top) = ev.iter().copied().max_by(|a, b| a.norm().total_cmp(&b.norm())) else {
        return 0.0;
    };
    let radius = 1e-4 * top.norm().max(f64::MIN_POSITIVE);
    let cluster: Vec<C64> = ev.into_iter().filter(|z| (z - top).norm() <= radius).collect();
    let mean = cluster.iter().sum::<C64>() / c(cluster.len() as f64);
    mean.norm()
}

pub fn is_exact_zero(m: &CMat) -> bool {
    m.iter().all(|z| z.re == 0.0 && z.im == 0.0)
}
