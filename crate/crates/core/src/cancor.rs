//! Canonical correlations between two column sets, and per-column R² from
//! regressing orthogonal contrasts on a model matrix.
//!
//! Both sides are centered and reduced to orthonormal bases of their column
//! spaces (pivoted Gram-Schmidt, dependent columns dropped); the canonical
//! correlations are the singular values of `Q_y^T Q_x`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::coding::ModelMatrix;
use crate::error::{Error, Result};

/// Relative residual norm below which a column counts as dependent.
pub const RANK_TOL: f64 = 1e-10;
/// Correlations within this distance of 1 are reported as exactly 1.
pub const UNIT_TOL: f64 = 1e-8;
/// Relative tolerance for the orthogonal-contrast check in [`r2_sum`].
pub const ORTHO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancorResult {
    /// Nonincreasing, clamped to `[0, 1]`; `min(y_dim, x_dim)` entries.
    pub correlations: Vec<f64>,
    pub y_dim: usize,
    pub x_dim: usize,
    pub rank_y: usize,
    pub rank_x: usize,
}

impl CancorResult {
    /// Largest canonical correlation `r_1`.
    pub fn first(&self) -> f64 {
        self.correlations.first().copied().unwrap_or(0.0)
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.correlations.iter().map(|r| r * r).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct R2SumResult {
    pub per_column_r2: Vec<f64>,
    pub total: f64,
}

pub fn canonical_correlations(y: &ModelMatrix, x: &ModelMatrix) -> Result<CancorResult> {
    cancor_matrices(&y.values, &x.values)
}

pub fn cancor_matrices(y: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<CancorResult> {
    if y.nrows() != x.nrows() {
        return Err(Error::RowMismatch(y.nrows(), x.nrows()));
    }
    let qy = orthonormal_basis(y)?;
    let qx = orthonormal_basis(x)?;
    let cross = qy.transpose() * &qx;
    let mut correlations: Vec<f64> = cross
        .singular_values()
        .iter()
        .map(|&r| {
            let r = r.clamp(0.0, 1.0);
            if 1.0 - r < UNIT_TOL {
                1.0
            } else {
                r
            }
        })
        .collect();
    correlations.sort_by(|a, b| b.total_cmp(a));
    let k = y.ncols().min(x.ncols());
    correlations.resize(k, 0.0);
    Ok(CancorResult {
        correlations,
        y_dim: y.ncols(),
        x_dim: x.ncols(),
        rank_y: qy.ncols(),
        rank_x: qx.ncols(),
    })
}

/// R² of the least-squares regression (with intercept) of each column of
/// `y` on `x`, without any check on `y`.
pub fn regression_r2(y: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if y.nrows() != x.nrows() {
        return Err(Error::RowMismatch(y.nrows(), x.nrows()));
    }
    let qx = orthonormal_basis(x)?;
    let yc = centered(y);
    yc.column_iter()
        .map(|col| {
            let total = col.norm_squared();
            if total <= f64::EPSILON * f64::EPSILON {
                return Err(Error::ZeroRank);
            }
            let explained = (qx.transpose() * col).norm_squared();
            Ok((explained / total).clamp(0.0, 1.0))
        })
        .collect()
}

/// Per-column R² and their sum, for a response coded in orthogonal
/// contrasts. Non-orthogonal responses are rejected with the sum they would
/// have produced.
pub fn r2_sum(y: &ModelMatrix, x: &ModelMatrix) -> Result<R2SumResult> {
    let per_column_r2 = regression_r2(&y.values, &x.values)?;
    let total = per_column_r2.iter().sum();
    if !is_orthogonal_contrast_matrix(&y.values) {
        return Err(Error::NonOrthogonalResponse { r2_total: total });
    }
    Ok(R2SumResult {
        per_column_r2,
        total,
    })
}

/// Zero column means and pairwise orthogonal columns, relative to the
/// column norms.
pub fn is_orthogonal_contrast_matrix(y: &DMatrix<f64>) -> bool {
    let n = y.nrows() as f64;
    let norms: Vec<f64> = y.column_iter().map(|c| c.norm()).collect();
    let zero_mean = y
        .column_iter()
        .zip(&norms)
        .all(|(c, &norm)| c.sum().abs() <= ORTHO_TOL * norm * n.sqrt());
    let orthogonal = (0..y.ncols()).all(|a| {
        (a + 1..y.ncols())
            .all(|b| y.column(a).dot(&y.column(b)).abs() <= ORTHO_TOL * norms[a] * norms[b])
    });
    zero_mean && orthogonal
}

pub(crate) fn centered(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut c = m.clone();
    let n = m.nrows() as f64;
    for mut col in c.column_iter_mut() {
        let mean = col.sum() / n;
        col.add_scalar_mut(-mean);
    }
    c
}

/// Orthonormal basis of the centered column space, by Gram-Schmidt with
/// column pivoting and re-orthogonalization. Columns whose residual norm
/// falls below `RANK_TOL` times the largest centered column norm are
/// treated as dependent.
pub(crate) fn orthonormal_basis(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.ncols() == 0 || m.nrows() == 0 {
        return Err(Error::ZeroRank);
    }
    let scale = m.amax() * (m.nrows() as f64).sqrt();
    let mut rest: Vec<DVector<f64>> = centered(m).column_iter().map(|c| c.into_owned()).collect();
    let largest = rest.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 || largest <= RANK_TOL * scale {
        return Err(Error::ZeroRank);
    }
    let mut basis: Vec<DVector<f64>> = Vec::new();
    while !rest.is_empty() {
        let (j, norm) = rest
            .iter()
            .map(|c| c.norm())
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("nonempty");
        if norm <= RANK_TOL * largest {
            break;
        }
        let mut q = rest.swap_remove(j);
        for b in &basis {
            let d = b.dot(&q);
            q.axpy(-d, b, 1.0);
        }
        q /= q.norm();
        for c in &mut rest {
            let d = q.dot(c);
            c.axpy(-d, &q, 1.0);
        }
        basis.push(q);
    }
    Ok(DMatrix::from_columns(&basis))
}
