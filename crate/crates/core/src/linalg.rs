//! Dense helpers on top of nalgebra with real-valued fast paths.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub fn is_real(m: &DMatrix<Complex64>) -> bool {
    m.iter().all(|z| z.im == 0.0)
}

pub fn real_part(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    m.map(|z| z.re)
}

pub fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|x| Complex64::new(x, 0.0))
}

/// Thin SVD `m = U Σ Vᴴ`, singular values descending.
pub fn svd(m: &DMatrix<Complex64>) -> Result<(DMatrix<Complex64>, Vec<f64>, DMatrix<Complex64>)> {
    let (r, c) = m.shape();
    let mut out = if is_real(m) {
        let a = faer::Mat::<f64>::from_fn(r, c, |i, j| m[(i, j)].re);
        let s = a.thin_svd().map_err(|_| Error::SvdFailure)?;
        let (u, v, d) = (s.U(), s.V(), s.S().column_vector());
        (
            DMatrix::from_fn(r, u.ncols(), |i, k| Complex64::new(u[(i, k)], 0.0)),
            (0..d.nrows()).map(|k| d[k]).collect::<Vec<f64>>(),
            DMatrix::from_fn(v.ncols(), c, |k, j| Complex64::new(v[(j, k)], 0.0)),
        )
    } else {
        let a = faer::Mat::<Complex64>::from_fn(r, c, |i, j| m[(i, j)]);
        let s = a.thin_svd().map_err(|_| Error::SvdFailure)?;
        let (u, v, d) = (s.U(), s.V(), s.S().column_vector());
        (
            DMatrix::from_fn(r, u.ncols(), |i, k| u[(i, k)]),
            (0..d.nrows()).map(|k| d[k].re).collect::<Vec<f64>>(),
            DMatrix::from_fn(v.ncols(), c, |k, j| v[(j, k)].conj()),
        )
    };
    if out.1.iter().any(|x| !x.is_finite()) {
        return Err(Error::SvdFailure);
    }
    sort_svd(&mut out);
    Ok(out)
}

fn sort_svd(out: &mut (DMatrix<Complex64>, Vec<f64>, DMatrix<Complex64>)) {
    let (u, s, vt) = out;
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    if order.iter().enumerate().all(|(i, &o)| i == o) {
        return;
    }
    let u2 = DMatrix::from_fn(u.nrows(), order.len(), |i, k| u[(i, order[k])]);
    let vt2 = DMatrix::from_fn(order.len(), vt.ncols(), |k, j| vt[(order[k], j)]);
    let s2 = order.iter().map(|&k| s[k]).collect();
    *u = u2;
    *vt = vt2;
    *s = s2;
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues descending, eigenvectors as columns.
pub fn hermitian_eigen(m: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let (vals, vecs): (Vec<f64>, DMatrix<Complex64>) = if is_real(m) {
        let r = real_part(m);
        let sym = (&r + r.transpose()) * 0.5;
        let e = SymmetricEigen::new(sym);
        (e.eigenvalues.iter().copied().collect(), complexify(&e.eigenvectors))
    } else {
        let h = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let e = SymmetricEigen::new(h);
        (e.eigenvalues.iter().copied().collect(), e.eigenvectors)
    };
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]).then(a.cmp(&b)));
    let sorted_vals = order.iter().map(|&k| vals[k]).collect();
    let sorted_vecs = DMatrix::from_fn(n, n, |i, k| vecs[(i, order[k])]);
    (sorted_vals, sorted_vecs)
}

/// `G[k, l] = Σ_j w_j z[j, k] conj(z[j, l])` for column-mode matrix `z`.
pub fn weighted_overlap(z: &DMatrix<Complex64>, w: &[f64]) -> DMatrix<Complex64> {
    assert_eq!(z.nrows(), w.len());
    if is_real(z) {
        let r = real_part(z);
        let mut scaled = r.clone();
        for (j, wj) in w.iter().enumerate() {
            scaled.row_mut(j).scale_mut(*wj);
        }
        complexify(&(r.transpose() * scaled))
    } else {
        let mut scaled = z.map(|c| c.conj());
        for (j, wj) in w.iter().enumerate() {
            scaled.row_mut(j).scale_mut(*wj);
        }
        z.transpose() * scaled
    }
}

pub fn trace_re(m: &DMatrix<Complex64>) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Re Tr(AB) without forming the product.
pub fn trace_of_product(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let x = a[(i, j)] * b[(j, i)];
            acc += x.re;
        }
    }
    acc
}

pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
