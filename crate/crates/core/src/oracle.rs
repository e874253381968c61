//! Slow, independent reimplementations of the main numerical paths, used to
//! cross-check them (`verify`).
//!
//! * R² by the normal equations with an SVD pseudo-inverse.
//! * Canonical correlations as square roots of the eigenvalues of
//!   `S_yy^-1 S_yx S_xx^-1 S_xy`.
//! * Projection frequencies from a randomly rotated orthonormal coding.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::array::{validate_subset, OrthogonalArray};
use crate::cancor::{canonical_correlations, regression_r2};
use crate::coding::{full_model_matrix, main_effect_matrix, Coding, ContrastSet};
use crate::error::{Error, Result};
use crate::gwlp::projection_a;
use crate::resolution::resolution;

/// Seed for the random rotations in [`oracle_a_k`].
pub const ORACLE_SEED: u64 = 0x6a09_e667_f3bc_c908;

/// Largest mismatch accepted by [`verify`].
pub const VERIFY_TOL: f64 = 1e-8;

/// Relative eigenvalue floor below which a covariance matrix counts as
/// singular.
const SINGULAR_TOL: f64 = 1e-10;

/// Relative eigenvalue cutoff of `D^T D` in the pseudo-inverse.
const PINV_TOL: f64 = 1e-10;

/// Eigenvalues this small beyond the exact rank are rounding noise.
const ZERO_EIGENVALUE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub quantity: String,
    pub main: f64,
    /// `None` when the oracle declined (singular covariance).
    pub oracle: Option<f64>,
    pub difference: Option<f64>,
}

impl OracleReport {
    fn new(quantity: String, main: f64, oracle: f64) -> Self {
        OracleReport {
            quantity,
            main,
            oracle: Some(oracle),
            difference: Some((main - oracle).abs()),
        }
    }

    pub fn passed(&self) -> bool {
        self.difference.is_none_or(|d| d < VERIFY_TOL)
    }
}

/// R² of regressing `y` on `x` plus an intercept, from the normal
/// equations solved with a pseudo-inverse. The singular value decomposition
/// `D = U S V^T` of the design is assembled from the eigen decomposition
/// of `D^T D` (`V`, `S^2`), with `U = D V S^-1`.
pub fn oracle_r2(y: &DVector<f64>, x: &DMatrix<f64>) -> Result<f64> {
    let n = y.len();
    if x.nrows() != n {
        return Err(Error::RowMismatch(n, x.nrows()));
    }
    let design = DMatrix::from_fn(
        n,
        x.ncols() + 1,
        |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] },
    );
    let eig = (design.transpose() * &design).symmetric_eigen();
    let top = eig.eigenvalues.max();
    let keep: Vec<usize> = (0..eig.eigenvalues.len())
        .filter(|&i| eig.eigenvalues[i] > PINV_TOL * top)
        .collect();
    let v = eig.eigenvectors.select_columns(&keep);
    let sigma: Vec<f64> = keep.iter().map(|&i| eig.eigenvalues[i].sqrt()).collect();
    let mut u = &design * &v;
    for (mut col, s) in u.column_iter_mut().zip(&sigma) {
        col /= *s;
    }
    let s_inv = DMatrix::from_diagonal(&DVector::from_iterator(
        sigma.len(),
        sigma.iter().map(|s| 1.0 / s),
    ));
    let pinv = &v * s_inv * u.transpose();
    let beta = pinv * y;
    let fitted = &design * beta;
    let mean = y.mean();
    let total: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if total <= f64::EPSILON {
        return Err(Error::ZeroRank);
    }
    let explained: f64 = fitted.iter().map(|v| (v - mean).powi(2)).sum();
    Ok(explained / total)
}

fn covariance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let center = |m: &DMatrix<f64>| {
        let mut c = m.clone();
        for mut col in c.column_iter_mut() {
            let mean = col.mean();
            col.add_scalar_mut(-mean);
        }
        c
    };
    center(a).transpose() * center(b) / (a.nrows() as f64 - 1.0)
}

fn check_definite(s: &DMatrix<f64>) -> Result<()> {
    let eig = s.clone().symmetric_eigen();
    let max = eig.eigenvalues.max();
    if max <= 0.0 || eig.eigenvalues.min() <= SINGULAR_TOL * max {
        return Err(Error::SingularCovariance);
    }
    Ok(())
}

/// Canonical correlations as square roots of the eigenvalues of
/// `S_yy^-1 S_yx S_xx^-1 S_xy`, descending, with `min(cols(y), cols(x))`
/// entries. The eigenvalues are taken from the similar symmetric matrix
/// `L^-1 S_yx S_xx^-1 S_xy L^-T` with `S_yy = L L^T`. Declines with
/// [`Error::SingularCovariance`] when either side is rank deficient.
pub fn oracle_cancor(y: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    let mut lambda = oracle_eigenvalues(y, x)?;
    lambda.truncate(y.ncols().min(x.ncols()));
    Ok(lambda
        .into_iter()
        .map(|l| l.clamp(0.0, 1.0).sqrt())
        .collect())
}

/// Eigenvalues (squared canonical correlations), descending.
fn oracle_eigenvalues(y: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    if y.nrows() != x.nrows() {
        return Err(Error::RowMismatch(y.nrows(), x.nrows()));
    }
    let syy = covariance(y, y);
    let sxx = covariance(x, x);
    check_definite(&syy)?;
    check_definite(&sxx)?;
    let l = syy.cholesky().ok_or(Error::SingularCovariance)?.l();
    let sxx_inv = sxx.try_inverse().ok_or(Error::SingularCovariance)?;
    let l_inv = l.try_inverse().ok_or(Error::SingularCovariance)?;
    let syx = covariance(y, x);
    let m = &l_inv * &syx * sxx_inv * syx.transpose() * l_inv.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let mut lambda: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    lambda.sort_by(|a, b| b.total_cmp(a));
    Ok(lambda)
}

/// Exact rank of the cross-covariance between factor `c` and the full model
/// of `rest`, from integer indicator coding. This is the number of nonzero
/// canonical correlations.
pub fn cross_covariance_rank(oa: &OrthogonalArray, c: usize, rest: &[usize]) -> Result<usize> {
    validate_subset(oa, &[c])?;
    validate_subset(oa, rest)?;
    let cells: Vec<Vec<usize>> = oa
        .rows()
        .map(|r| rest.iter().map(|&u| r[u]).collect::<Vec<_>>())
        .unique()
        .collect();
    let n = oa.runs() as i128;
    let y_count = |level: usize| oa.column(c).filter(|&v| v == level).count() as i128;
    let x_count = |cell: &[usize]| {
        oa.rows()
            .filter(|r| rest.iter().zip(cell).all(|(&u, &v)| r[u] == v))
            .count() as i128
    };
    let both = |level: usize, cell: &[usize]| {
        oa.rows()
            .filter(|r| r[c] == level && rest.iter().zip(cell).all(|(&u, &v)| r[u] == v))
            .count() as i128
    };
    // N * (N - 1) * S_yx over levels 1.. of c and all observed cells of rest.
    let mut m: Vec<Vec<i128>> = (1..oa.level_count(c))
        .map(|level| {
            cells
                .iter()
                .map(|cell| n * both(level, cell) - y_count(level) * x_count(cell))
                .collect()
        })
        .collect();
    bareiss_rank(&mut m)
}

/// Rank of an integer matrix by fraction-free elimination.
fn bareiss_rank(m: &mut [Vec<i128>]) -> Result<usize> {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    let overflow = || Error::InvalidArgument("integer overflow in exact rank".into());
    let mut rank = 0;
    let mut prev = 1i128;
    for col in 0..cols {
        let Some(pivot) = (rank..rows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, pivot);
        for r in rank + 1..rows {
            for k in col + 1..cols {
                let v = m[rank][col]
                    .checked_mul(m[r][k])
                    .and_then(|a| {
                        m[r][col]
                            .checked_mul(m[rank][k])
                            .and_then(|b| a.checked_sub(b))
                    })
                    .ok_or_else(overflow)?;
                m[r][k] = v / prev;
            }
            m[r][col] = 0;
        }
        prev = m[rank][col];
        rank += 1;
        if rank == rows {
            break;
        }
    }
    Ok(rank)
}

/// Random orthogonal matrix from the QR factorization of a matrix with
/// uniform entries, sign-fixed so the factorization is unique.
fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    loop {
        let m: DMatrix<f64> = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
        let qr = m.qr();
        let r = qr.r();
        if (0..dim).any(|i| r[(i, i)].abs() < 1e-6) {
            continue;
        }
        let mut q = qr.q();
        for i in 0..dim {
            if r[(i, i)] < 0.0 {
                q.column_mut(i).neg_mut();
            }
        }
        return q;
    }
}

/// `a_k` of one projection, built run by run from rotated polynomial
/// contrasts.
pub fn oracle_a_k(oa: &OrthogonalArray, subset: &[usize]) -> Result<f64> {
    validate_subset(oa, subset)?;
    let mut rng = ChaCha8Rng::seed_from_u64(ORACLE_SEED);
    let coded: Vec<DMatrix<f64>> = subset
        .iter()
        .map(|&u| {
            let s = oa.level_count(u);
            let p = ContrastSet::polynomial(s)?;
            Ok(p.coefficients() * random_orthogonal(s - 1, &mut rng))
        })
        .collect::<Result<_>>()?;
    let n = oa.runs() as f64;
    let mut total = 0.0;
    for index in coded.iter().map(|c| 0..c.ncols()).multi_cartesian_product() {
        let sum: f64 = oa
            .rows()
            .map(|row| {
                subset
                    .iter()
                    .zip(&coded)
                    .zip(&index)
                    .map(|((&u, c), &j)| c[(row[u], j)])
                    .product::<f64>()
            })
            .sum();
        total += (sum / n).powi(2);
    }
    Ok(total)
}

fn label(subset: &[usize]) -> String {
    subset.iter().map(|u| (u + 1).to_string()).join(",")
}

/// Compares the main paths against the oracles on `oa` (polynomial coding):
///
/// * `a_k` for every subset of up to four factors,
/// * per-contrast R² and canonical correlations of each factor against the
///   full model of the rest of every `R`-factor projection (every pair when
///   no resolution is defined).
///
/// Factor numbers in the quantity names start at 1.
pub fn verify(oa: &OrthogonalArray) -> Result<Vec<OracleReport>> {
    let coding = Coding::polynomial(oa);
    let n = oa.factors();
    let mut out = Vec::new();

    for k in 1..=n.min(4) {
        for subset in (0..n).combinations(k) {
            let main = projection_a(oa, &subset, &coding)?.value;
            let oracle = oracle_a_k(oa, &subset)?;
            out.push(OracleReport::new(
                format!("a({})", label(&subset)),
                main,
                oracle,
            ));
        }
    }

    let size = resolution(oa).unwrap_or(2.min(n));
    if size < 2 {
        return Ok(out);
    }
    for subset in (0..n).combinations(size) {
        for &c in &subset {
            let rest: Vec<usize> = subset.iter().copied().filter(|&u| u != c).collect();
            let y = main_effect_matrix(oa, c, coding.set(c))?;
            let x = full_model_matrix(oa, &rest, &coding, false)?;
            let tag = format!("{}|{}", c + 1, label(&rest));

            let main_r2 = regression_r2(&y.values, &x.values)?;
            for (j, &m) in main_r2.iter().enumerate() {
                let o = oracle_r2(&y.values.column(j).into_owned(), &x.values)?;
                out.push(OracleReport::new(
                    format!("r2({tag}; contrast {})", j + 1),
                    m,
                    o,
                ));
            }

            let main_cc = canonical_correlations(&y, &x)?.correlations;
            match oracle_eigenvalues(&y.values, &x.values) {
                Ok(lambda) => {
                    // Eigenvalues beyond the exact rank are zero; only a
                    // negligible one is rounded to zero, anything else is
                    // reported as computed.
                    let rank = cross_covariance_rank(oa, c, &rest)?;
                    for (j, &m) in main_cc.iter().enumerate() {
                        let l = lambda.get(j).copied().unwrap_or(0.0);
                        let o = if j >= rank && l.abs() < ZERO_EIGENVALUE {
                            0.0
                        } else {
                            l.clamp(0.0, 1.0).sqrt()
                        };
                        out.push(OracleReport::new(
                            format!("cancor({tag}; r{})", j + 1),
                            m,
                            o,
                        ));
                    }
                }
                Err(Error::SingularCovariance) => {
                    for (j, &m) in main_cc.iter().enumerate() {
                        out.push(OracleReport {
                            quantity: format!("cancor({tag}; r{})", j + 1),
                            main: m,
                            oracle: None,
                            difference: None,
                        });
                    }
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}
