//! Generalized resolution of an array of resolution `R` (strength `R - 1`):
//!
//! * `GR`: complete confounding of a minimum-level factor, from the
//!   projection frequencies `a_R`.
//! * `GR_ind`: individual degree-of-freedom confounding, from the largest
//!   canonical correlation of a factor's main effects with the other `R - 1`
//!   factors.
//! * `GR_tot`: the factor-averaged variant.
//!
//! plus the factor-wise versions and the bounds for weak strength designs.

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::array::{max_t_balance, strength, OrthogonalArray};
use crate::cancor::{canonical_correlations, CancorResult};
use crate::coding::{full_model_matrix, interaction_matrix, main_effect_matrix, Coding};
use crate::error::{Error, Result};
use crate::gwlp::{projection_frequencies, ProjectionFrequency};

/// Later candidates must exceed the current maximum by this much to replace
/// it, so ties resolve to the lexicographically first candidate.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorResolution {
    pub factor: usize,
    pub levels: usize,
    pub gr_tot: f64,
    pub gr_ind: f64,
    /// Projection attaining the `gr_tot` maximum.
    pub worst_tot: Vec<usize>,
    /// Projection attaining the `gr_ind` maximum.
    pub worst_ind: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstPair {
    pub factor: usize,
    pub subset: Vec<usize>,
    pub correlation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GRBound {
    pub value: f64,
    pub r_remainder: u64,
    /// Whether a supplied array attains the bound (has weak strength `R`).
    pub attained: Option<bool>,
}

/// Confounding of one factor within one projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorConfounding {
    pub factor: usize,
    /// `a_R / (s_c - 1)`: average R² of the factor's contrasts.
    pub average_r2: f64,
    /// Canonical correlations of the factor's main effects with the other
    /// factors of the projection.
    pub correlations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub subset: Vec<usize>,
    pub a: f64,
    /// Smallest `a_R` possible for these level counts and run size.
    pub a_lower_bound: f64,
    pub confounding: Vec<FactorConfounding>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionSummary {
    pub resolution: usize,
    pub gr: f64,
    pub gr_ind: f64,
    pub gr_tot: f64,
    pub per_factor: Vec<FactorResolution>,
    pub worst_projection: Vec<usize>,
    pub worst_pair: WorstPair,
    /// Upper bound on `GR` for symmetric designs.
    pub bound: Option<GRBound>,
    /// Weak strength `R`. For mixed-level designs this certifies maximum `GR`
    /// among arrays with the same parameters, provided no array of strength
    /// `R` exists.
    pub weak_strength: bool,
    pub projections: Vec<ProjectionReport>,
}

/// Resolution `R = strength + 1`, provided an `R`-factor projection exists.
pub fn resolution(oa: &OrthogonalArray) -> Result<usize> {
    let t = strength(oa);
    if t == 0 {
        return Err(Error::StrengthZero);
    }
    let r = t + 1;
    if r > oa.factors() {
        return Err(Error::NoProjection {
            resolution: r,
            factors: oa.factors(),
        });
    }
    Ok(r)
}

fn min_df(oa: &OrthogonalArray, subset: &[usize]) -> f64 {
    subset.iter().map(|&u| oa.level_count(u)).min().unwrap_or(2) as f64 - 1.0
}

fn df(oa: &OrthogonalArray, factor: usize) -> f64 {
    oa.level_count(factor) as f64 - 1.0
}

/// Index of the first maximum, ignoring later values that only tie.
fn argmax<I: IntoIterator<Item = f64>>(values: I) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.into_iter().enumerate() {
        match best {
            Some((_, b)) if v <= b + TIE_TOL => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

fn frequencies(oa: &OrthogonalArray) -> Result<(usize, Vec<ProjectionFrequency>)> {
    let r = resolution(oa)?;
    let freqs = projection_frequencies(oa, r, &Coding::polynomial(oa))?;
    Ok((r, freqs))
}

pub fn gr(oa: &OrthogonalArray) -> Result<f64> {
    let (r, freqs) = frequencies(oa)?;
    let (_, worst) = argmax(freqs.iter().map(|p| p.value / min_df(oa, &p.subset)))
        .expect("at least one projection");
    Ok(r as f64 + 1.0 - worst.sqrt())
}

pub fn gr_tot(oa: &OrthogonalArray) -> Result<f64> {
    let (r, freqs) = frequencies(oa)?;
    let (_, worst) = argmax(
        freqs
            .iter()
            .map(|p| p.subset.iter().map(|&u| p.value / df(oa, u)).sum::<f64>() / r as f64),
    )
    .expect("at least one projection");
    Ok(r as f64 + 1.0 - worst.sqrt())
}

/// Canonical correlations of factor `c` against the other factors of a
/// projection. Under orthogonal coding only the interaction block of the
/// others is needed; otherwise their full model is used.
pub fn factor_correlations(
    oa: &OrthogonalArray,
    c: usize,
    others: &[usize],
    coding: &Coding,
) -> Result<CancorResult> {
    let y = main_effect_matrix(oa, c, coding.set(c))?;
    let orthogonal =
        coding.set(c).is_orthogonal() && others.iter().all(|&u| coding.set(u).is_orthogonal());
    let x = if orthogonal {
        interaction_matrix(oa, others, coding)?
    } else {
        full_model_matrix(oa, others, coding, false)?
    };
    canonical_correlations(&y, &x)
}

fn others_of(subset: &[usize], c: usize) -> Vec<usize> {
    subset.iter().copied().filter(|&u| u != c).collect()
}

pub fn gr_ind(oa: &OrthogonalArray) -> Result<f64> {
    gr_ind_with(oa, &Coding::polynomial(oa))
}

/// `GR_ind` in the given coding. In projections containing a 2-level factor
/// only that factor's correlation is computed, since it is the largest.
pub fn gr_ind_with(oa: &OrthogonalArray, coding: &Coding) -> Result<f64> {
    let r = resolution(oa)?;
    let mut worst = 0.0f64;
    for subset in (0..oa.factors()).combinations(r) {
        let candidates: Vec<usize> = match subset.iter().find(|&&u| oa.level_count(u) == 2) {
            Some(&two) => vec![two],
            None => subset.clone(),
        };
        for c in candidates {
            let r1 = factor_correlations(oa, c, &others_of(&subset, c), coding)?.first();
            worst = worst.max(r1);
        }
    }
    Ok(r as f64 + 1.0 - worst)
}

/// `GR` recomputed from squared canonical correlations, maximizing over
/// ordered (factor, rest) tuples with the full model of the rest.
pub fn gr_from_canonical(oa: &OrthogonalArray, coding: &Coding) -> Result<f64> {
    let r = resolution(oa)?;
    let mut worst = 0.0f64;
    for subset in (0..oa.factors()).combinations(r) {
        let denom = min_df(oa, &subset);
        for &c in &subset {
            let y = main_effect_matrix(oa, c, coding.set(c))?;
            let x = full_model_matrix(oa, &others_of(&subset, c), coding, false)?;
            worst = worst.max(canonical_correlations(&y, &x)?.sum_of_squares() / denom);
        }
    }
    Ok(r as f64 + 1.0 - worst.sqrt())
}

pub fn gr_factorwise(oa: &OrthogonalArray) -> Result<Vec<FactorResolution>> {
    Ok(summarize(oa)?.per_factor)
}

/// Lower bound `r (prod s_i - r) / N^2` on `A_R` of an `R`-factor array of
/// strength `R - 1`, with `r = N mod prod s_i`.
pub fn a_r_lower_bound(runs: usize, levels: &[usize]) -> f64 {
    let g = levels
        .iter()
        .try_fold(1u128, |acc, &s| acc.checked_mul(s as u128))
        .unwrap_or(u128::MAX);
    let n = runs as u128;
    let r = n % g;
    (r as f64) * ((g - r) as f64) / (n as f64 * n as f64)
}

/// Upper bound on `GR` for a symmetric `s`-level array of resolution `R` in
/// `runs` runs (assuming no array of strength `R` exists). With `against`,
/// also reports whether that array attains it.
pub fn gr_upper_bound(
    runs: usize,
    s: usize,
    resolution: usize,
    against: Option<&OrthogonalArray>,
) -> Result<GRBound> {
    if s < 2 || resolution < 2 || runs == 0 {
        return Err(Error::InvalidArgument(format!(
            "bound needs N >= 1, s >= 2 and R >= 2 (got N={runs}, s={s}, R={resolution})"
        )));
    }
    let g = (s as u128)
        .checked_pow(resolution as u32)
        .ok_or_else(|| Error::InvalidArgument("s^R overflows".into()))?;
    let n = runs as u128;
    let r = n % g;
    let ratio = (r as f64) * ((g - r) as f64) / ((n as f64).powi(2) * (s as f64 - 1.0));
    let attained = match against {
        None => None,
        Some(oa) => {
            if oa.runs() != runs || oa.levels().iter().any(|&l| l != s) {
                return Err(Error::InvalidArgument(format!(
                    "array is not an {}-run symmetric {}-level design",
                    runs, s
                )));
            }
            if resolution > oa.factors() {
                return Err(Error::NoProjection {
                    resolution,
                    factors: oa.factors(),
                });
            }
            Some(max_t_balance(oa, resolution)?.weak_strength)
        }
    };
    Ok(GRBound {
        value: resolution as f64 + 1.0 - ratio.sqrt(),
        r_remainder: r as u64,
        attained,
    })
}

/// `GR` of any projection onto three or more `s`-level columns of a
/// saturated `OA(2s^2, (2s)^1 s^(2s), 2)`.
pub fn saturated_projection_gr(s: usize) -> f64 {
    let s = s as f64;
    4.0 - ((s - 2.0) / (2.0 * s - 2.0)).sqrt()
}

pub fn summarize(oa: &OrthogonalArray) -> Result<ResolutionSummary> {
    summarize_with(oa, &Coding::polynomial(oa))
}

/// Full resolution analysis. The coding must be orthogonal for the factors
/// (projection frequencies need it); the reported quantities do not depend
/// on which orthogonal coding is used.
pub fn summarize_with(oa: &OrthogonalArray, coding: &Coding) -> Result<ResolutionSummary> {
    let r = resolution(oa)?;
    let rf = r as f64;
    let freqs = projection_frequencies(oa, r, coding)?;

    let mut projections = Vec::with_capacity(freqs.len());
    for p in &freqs {
        let confounding = p
            .subset
            .iter()
            .map(|&c| {
                let cc = factor_correlations(oa, c, &others_of(&p.subset, c), coding)?;
                Ok(FactorConfounding {
                    factor: c,
                    average_r2: p.value / df(oa, c),
                    correlations: cc.correlations,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let levels: Vec<usize> = p.subset.iter().map(|&u| oa.level_count(u)).collect();
        projections.push(ProjectionReport {
            subset: p.subset.clone(),
            a: p.value,
            a_lower_bound: a_r_lower_bound(oa.runs(), &levels),
            confounding,
        });
    }

    let (gr_at, gr_worst) = argmax(projections.iter().map(|p| p.a / min_df(oa, &p.subset)))
        .expect("at least one projection");
    let (_, tot_worst) = argmax(
        projections
            .iter()
            .map(|p| p.confounding.iter().map(|f| f.average_r2).sum::<f64>() / rf),
    )
    .expect("at least one projection");

    let pairs: Vec<(usize, usize, f64)> = projections
        .iter()
        .enumerate()
        .flat_map(|(i, p)| {
            p.confounding
                .iter()
                .map(move |f| (i, f.factor, f.correlations.first().copied().unwrap_or(0.0)))
        })
        .collect();
    let (pair_at, ind_worst) = argmax(pairs.iter().map(|t| t.2)).expect("at least one pair");
    let worst_pair = WorstPair {
        factor: pairs[pair_at].1,
        subset: projections[pairs[pair_at].0].subset.clone(),
        correlation: ind_worst,
    };

    let per_factor = (0..oa.factors())
        .map(|i| {
            let mine: Vec<(&ProjectionReport, &FactorConfounding)> = projections
                .iter()
                .filter_map(|p| p.confounding.iter().find(|f| f.factor == i).map(|f| (p, f)))
                .collect();
            let (tot_at, tot) =
                argmax(mine.iter().map(|(_, f)| f.average_r2)).expect("factor in a projection");
            let (ind_at, ind) = argmax(
                mine.iter()
                    .map(|(_, f)| f.correlations.first().copied().unwrap_or(0.0)),
            )
            .expect("factor in a projection");
            FactorResolution {
                factor: i,
                levels: oa.level_count(i),
                gr_tot: rf + 1.0 - tot.sqrt(),
                gr_ind: rf + 1.0 - ind,
                worst_tot: mine[tot_at].0.subset.clone(),
                worst_ind: mine[ind_at].0.subset.clone(),
            }
        })
        .collect();

    let weak_strength = max_t_balance(oa, r)?.weak_strength;
    let bound = if oa.is_symmetric() {
        Some(gr_upper_bound(oa.runs(), oa.level_count(0), r, Some(oa))?)
    } else {
        None
    };

    Ok(ResolutionSummary {
        resolution: r,
        gr: rf + 1.0 - gr_worst.sqrt(),
        gr_ind: rf + 1.0 - ind_worst,
        gr_tot: rf + 1.0 - tot_worst.sqrt(),
        per_factor,
        worst_projection: projections[gr_at].subset.clone(),
        worst_pair,
        bound,
        weak_strength,
        projections,
    })
}
