//! Small dense helpers on top of nalgebra.
//!
//! Decompositions here return factors sorted by decreasing magnitude with a
//! canonical sign per component (the largest-magnitude entry of each left
//! vector is positive).

use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

/// Thin SVD factors with components sorted by descending singular value.
#[derive(Debug, Clone)]
pub struct SortedSvd {
    pub singular_values: Vec<f64>,
    /// Columns are left singular vectors.
    pub u: DMatrix<f64>,
    /// Columns are right singular vectors.
    pub v: DMatrix<f64>,
}

fn leading_sign(col: impl Iterator<Item = f64>) -> f64 {
    let mut best = 0.0f64;
    let mut sign = 1.0;
    for x in col {
        let a = libm::fabs(x);
        if a > best {
            best = a;
            sign = if x < 0.0 { -1.0 } else { 1.0 };
        }
    }
    sign
}

pub fn svd_sorted(m: &DMatrix<f64>) -> Result<SortedSvd> {
    let svd = m.clone().svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::Numerical("SVD did not return singular vectors".into())),
    };
    let sv = svd.singular_values;
    if sv.iter().any(|s| !s.is_finite()) {
        return Err(Error::Numerical("non-finite singular value".into()));
    }
    let k = sv.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));

    let mut uo = DMatrix::zeros(m.nrows(), k);
    let mut vo = DMatrix::zeros(m.ncols(), k);
    let mut values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let sign = leading_sign(u.column(src).iter().copied());
        uo.set_column(dst, &(u.column(src) * sign));
        vo.set_column(dst, &(v_t.row(src).transpose() * sign));
        values.push(sv[src].max(0.0));
    }
    Ok(SortedSvd {
        singular_values: values,
        u: uo,
        v: vo,
    })
}

/// Eigendecomposition of a symmetric matrix, eigenvalues descending.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: Vec<f64>,
    /// Columns are eigenvectors.
    pub vectors: DMatrix<f64>,
}

pub fn symmetric_eigen_sorted(m: &DMatrix<f64>) -> Result<SortedEigen> {
    let eig = SymmetricEigen::new(m.clone());
    if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite eigenvalue".into()));
    }
    let k = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });
    let mut vectors = DMatrix::zeros(m.nrows(), k);
    let mut values = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let sign = leading_sign(col.iter().copied());
        vectors.set_column(dst, &(col * sign));
        values.push(eig.eigenvalues[src]);
    }
    Ok(SortedEigen { values, vectors })
}
