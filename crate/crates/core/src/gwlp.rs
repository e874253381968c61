//! Projection frequencies `a_k(u_1, ..., u_k)` and the generalized word
//! length pattern `A_0, A_1, ...` under normalized orthogonal coding.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::array::{validate_subset, OrthogonalArray};
use crate::coding::{interaction_matrix, Coding};
use crate::error::{Error, Result};

/// Absolute tolerance for treating an `A_k` (or `a_k`) as zero.
pub const ZERO_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionFrequency {
    pub subset: Vec<usize>,
    pub value: f64,
}

impl ProjectionFrequency {
    pub fn k(&self) -> usize {
        self.subset.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gwlp {
    /// `A_0, A_1, ..., A_K`.
    pub values: Vec<f64>,
    /// Smallest `k >= 1` with `A_k > ZERO_TOL`, if one was computed.
    pub resolution: Option<usize>,
}

impl Gwlp {
    pub fn get(&self, k: usize) -> Option<f64> {
        self.values.get(k).copied()
    }

    pub fn max_k(&self) -> usize {
        self.values.len() - 1
    }
}

/// `a_k` of one projection: squared column sums of the interaction matrix
/// over `N^2`.
pub fn projection_a(
    oa: &OrthogonalArray,
    subset: &[usize],
    coding: &Coding,
) -> Result<ProjectionFrequency> {
    validate_subset(oa, subset)?;
    if let Some(&u) = subset.iter().find(|&&u| !coding.set(u).is_orthogonal()) {
        return Err(Error::NonOrthogonalCoding(format!(
            "{} coding for factor {}",
            coding.set(u).scheme(),
            u
        )));
    }
    let x = interaction_matrix(oa, subset, coding)?;
    let n2 = (oa.runs() * oa.runs()) as f64;
    let squares: Vec<f64> = x.column_sums().into_iter().map(|s| s * s).collect();
    Ok(ProjectionFrequency {
        subset: subset.to_vec(),
        value: pairwise_sum(&squares) / n2,
    })
}

/// `a_k` for every `k`-subset, in lexicographic subset order.
pub fn projection_frequencies(
    oa: &OrthogonalArray,
    k: usize,
    coding: &Coding,
) -> Result<Vec<ProjectionFrequency>> {
    let n = oa.factors();
    if k == 0 || k > n {
        return Err(Error::ProjectionSizeOutOfRange { t: k, factors: n });
    }
    (0..n)
        .combinations(k)
        .map(|s| projection_a(oa, &s, coding))
        .collect()
}

/// GWLP up to `max_k` in normalized polynomial coding.
pub fn gwlp(oa: &OrthogonalArray, max_k: usize) -> Result<Gwlp> {
    gwlp_with(oa, max_k, &Coding::polynomial(oa))
}

pub fn gwlp_with(oa: &OrthogonalArray, max_k: usize, coding: &Coding) -> Result<Gwlp> {
    let n = oa.factors();
    if max_k == 0 || max_k > n {
        return Err(Error::ProjectionSizeOutOfRange {
            t: max_k,
            factors: n,
        });
    }
    let mut values = vec![1.0];
    for k in 1..=max_k {
        let parts: Vec<f64> = projection_frequencies(oa, k, coding)?
            .into_iter()
            .map(|p| p.value)
            .collect();
        values.push(pairwise_sum(&parts));
    }
    let resolution = (1..values.len()).find(|&k| values[k] > ZERO_TOL);
    Ok(Gwlp { values, resolution })
}

/// `|1^T X_{u_1...u_k}|` for a subset of 2-level factors in `-1/+1` coding.
pub fn j_characteristic(oa: &OrthogonalArray, subset: &[usize]) -> Result<f64> {
    validate_subset(oa, subset)?;
    if let Some(&u) = subset.iter().find(|&&u| oa.level_count(u) != 2) {
        return Err(Error::NotTwoLevel(u));
    }
    let sum: i64 = oa
        .rows()
        .map(|r| {
            let odd = subset.iter().filter(|&&u| r[u] == 0).count() % 2 == 1;
            if odd {
                -1
            } else {
                1
            }
        })
        .sum();
    Ok(sum.unsigned_abs() as f64)
}

/// Pairwise (cascade) summation.
pub(crate) fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        xs.iter().sum()
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}
