//! Contrast coding of qualitative factors and model matrix construction.
//!
//! Orthogonal schemes are normalized so that each contrast column has sum of
//! squares `s` over the `s` levels. Expanded on a design whose columns are
//! balanced, every main effect column then has squared length `N`.

use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::array::{validate_subset, OrthogonalArray};
use crate::error::{Error, Result};

const ORTHOGONALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Polynomial,
    Helmert,
    /// Indicator columns for levels `1..s`, level 0 as reference.
    Dummy,
    Custom,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Polynomial => "polynomial",
            Scheme::Helmert => "helmert",
            Scheme::Dummy => "dummy",
            Scheme::Custom => "custom",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "polynomial" | "poly" => Ok(Scheme::Polynomial),
            "helmert" => Ok(Scheme::Helmert),
            "dummy" | "treatment" => Ok(Scheme::Dummy),
            "custom" => Ok(Scheme::Custom),
            _ => Err(Error::UnknownScheme(s.to_string())),
        }
    }
}

/// Contrast basis for one factor: an `s x (s-1)` matrix, one row per level.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastSet {
    scheme: Scheme,
    orthogonal: bool,
    coefficients: DMatrix<f64>,
}

impl ContrastSet {
    /// Orthogonal polynomial contrasts on the equally spaced codes `0..s`.
    ///
    /// Gram-Schmidt on the monomials `x, x^2, ..., x^(s-1)` against the
    /// constant; the degree-`k` column keeps a positive leading coefficient.
    pub fn polynomial(s: usize) -> Result<Self> {
        check_levels(s)?;
        let centre = (s as f64 - 1.0) / 2.0;
        let x: Vec<f64> = (0..s).map(|l| l as f64 - centre).collect();
        let mut basis: Vec<DVector<f64>> = vec![DVector::from_element(s, 1.0 / (s as f64).sqrt())];
        for degree in 1..s {
            let mut v = DVector::from_iterator(s, x.iter().map(|&xi| xi.powi(degree as i32)));
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for b in &basis {
                    let proj = b.dot(&v);
                    v.axpy(-proj, b, 1.0);
                }
            }
            let norm = v.norm();
            basis.push(v / norm);
        }
        let scale = (s as f64).sqrt();
        let coefficients = DMatrix::from_fn(s, s - 1, |i, j| basis[j + 1][i] * scale);
        Ok(Self {
            scheme: Scheme::Polynomial,
            orthogonal: true,
            coefficients,
        })
    }

    /// Helmert contrasts: column `j` compares level `j` with levels `0..j`.
    pub fn helmert(s: usize) -> Result<Self> {
        check_levels(s)?;
        let mut coefficients = DMatrix::zeros(s, s - 1);
        for j in 1..s {
            for i in 0..j {
                coefficients[(i, j - 1)] = -1.0;
            }
            coefficients[(j, j - 1)] = j as f64;
        }
        normalize_columns(&mut coefficients);
        Ok(Self {
            scheme: Scheme::Helmert,
            orthogonal: true,
            coefficients,
        })
    }

    pub fn dummy(s: usize) -> Result<Self> {
        check_levels(s)?;
        let coefficients = DMatrix::from_fn(s, s - 1, |i, j| if i == j + 1 { 1.0 } else { 0.0 });
        Ok(Self {
            scheme: Scheme::Dummy,
            orthogonal: false,
            coefficients,
        })
    }

    /// Accepts any `s x (s-1)` matrix that, together with a constant column,
    /// spans all functions of the level. Orthogonal inputs (zero column sums,
    /// pairwise orthogonal columns) are rescaled to the normalized form and
    /// tagged orthogonal; others are kept as given.
    pub fn custom(coefficients: DMatrix<f64>) -> Result<Self> {
        let s = coefficients.nrows();
        check_levels(s)?;
        if coefficients.ncols() != s - 1 {
            return Err(Error::InvalidContrasts(format!(
                "expected {} x {} matrix, got {} x {}",
                s,
                s - 1,
                s,
                coefficients.ncols()
            )));
        }
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidContrasts("non-finite coefficient".into()));
        }
        let mut with_const = DMatrix::from_element(s, s, 1.0);
        with_const.columns_mut(1, s - 1).copy_from(&coefficients);
        let sv = with_const.singular_values();
        let max = sv.max();
        if max == 0.0 || sv.min() <= 1e-10 * max {
            return Err(Error::InvalidContrasts(
                "contrast columns and the constant do not span all level effects".into(),
            ));
        }
        let mut coefficients = coefficients;
        let orthogonal = columns_orthogonal(&coefficients);
        if orthogonal {
            normalize_columns(&mut coefficients);
        }
        Ok(Self {
            scheme: Scheme::Custom,
            orthogonal,
            coefficients,
        })
    }

    pub fn new(s: usize, scheme: Scheme) -> Result<Self> {
        match scheme {
            Scheme::Polynomial => Self::polynomial(s),
            Scheme::Helmert => Self::helmert(s),
            Scheme::Dummy => Self::dummy(s),
            Scheme::Custom => Err(Error::InvalidContrasts(
                "custom contrasts need an explicit coefficient matrix".into(),
            )),
        }
    }

    pub fn levels(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn columns(&self) -> usize {
        self.coefficients.ncols()
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn is_orthogonal(&self) -> bool {
        self.orthogonal
    }

    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.coefficients
    }

    #[inline]
    pub fn coefficient(&self, level: usize, contrast: usize) -> f64 {
        self.coefficients[(level, contrast)]
    }
}

/// Shorthand for [`ContrastSet::new`].
pub fn contrasts(s: usize, scheme: Scheme) -> Result<ContrastSet> {
    ContrastSet::new(s, scheme)
}

fn check_levels(s: usize) -> Result<()> {
    if s < 2 {
        return Err(Error::InvalidContrasts(format!(
            "a factor needs at least 2 levels, got {}",
            s
        )));
    }
    Ok(())
}

fn normalize_columns(m: &mut DMatrix<f64>) {
    let s = m.nrows() as f64;
    for mut col in m.column_iter_mut() {
        let norm = col.norm();
        col *= s.sqrt() / norm;
    }
}

fn columns_orthogonal(m: &DMatrix<f64>) -> bool {
    let norms: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
    let zero_sum = m
        .column_iter()
        .zip(&norms)
        .all(|(c, &n)| c.sum().abs() <= ORTHOGONALITY_TOL * n * (m.nrows() as f64).sqrt());
    let pairwise = (0..m.ncols()).tuple_combinations().all(|(a, b)| {
        m.column(a).dot(&m.column(b)).abs() <= ORTHOGONALITY_TOL * norms[a] * norms[b]
    });
    zero_sum && pairwise
}

/// One contrast set per factor of an array.
#[derive(Debug, Clone, PartialEq)]
pub struct Coding {
    sets: Vec<ContrastSet>,
}

impl Coding {
    pub fn uniform(levels: &[usize], scheme: Scheme) -> Result<Self> {
        let sets = levels
            .iter()
            .map(|&s| ContrastSet::new(s, scheme))
            .collect::<Result<_>>()?;
        Ok(Self { sets })
    }

    /// Normalized polynomial coding for every factor.
    pub fn polynomial(oa: &OrthogonalArray) -> Self {
        Self::uniform(oa.levels(), Scheme::Polynomial).expect("array levels are at least 2")
    }

    pub fn from_sets(oa: &OrthogonalArray, sets: Vec<ContrastSet>) -> Result<Self> {
        if sets.len() != oa.factors() {
            return Err(Error::InvalidArgument(format!(
                "{} contrast sets for {} factors",
                sets.len(),
                oa.factors()
            )));
        }
        for (factor, (set, &s)) in sets.iter().zip(oa.levels()).enumerate() {
            if set.levels() != s {
                return Err(Error::LevelMismatch {
                    factor,
                    expected: set.levels(),
                    found: s,
                });
            }
        }
        Ok(Self { sets })
    }

    /// Replaces the contrast set of one factor.
    pub fn with_factor(mut self, factor: usize, set: ContrastSet) -> Result<Self> {
        let Some(slot) = self.sets.get_mut(factor) else {
            return Err(Error::ColumnOutOfRange {
                index: factor,
                factors: self.sets.len(),
            });
        };
        if slot.levels() != set.levels() {
            return Err(Error::LevelMismatch {
                factor,
                expected: set.levels(),
                found: slot.levels(),
            });
        }
        *slot = set;
        Ok(self)
    }

    pub fn set(&self, factor: usize) -> &ContrastSet {
        &self.sets[factor]
    }

    pub fn sets(&self) -> &[ContrastSet] {
        &self.sets
    }

    pub fn is_orthogonal(&self) -> bool {
        self.sets.iter().all(|s| s.orthogonal)
    }

    /// The common scheme, if all factors use the same one.
    pub fn scheme(&self) -> Option<Scheme> {
        let first = self.sets.first()?.scheme;
        self.sets.iter().all(|s| s.scheme == first).then_some(first)
    }

    fn check(&self, oa: &OrthogonalArray) -> Result<()> {
        if self.sets.len() != oa.factors() {
            return Err(Error::InvalidArgument(format!(
                "coding has {} factors, array has {}",
                self.sets.len(),
                oa.factors()
            )));
        }
        for (factor, (set, &s)) in self.sets.iter().zip(oa.levels()).enumerate() {
            if set.levels() != s {
                return Err(Error::LevelMismatch {
                    factor,
                    expected: set.levels(),
                    found: s,
                });
            }
        }
        Ok(())
    }
}

/// Which factors and which of their contrast columns produced a model column.
/// The intercept has empty lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSource {
    pub factors: Vec<usize>,
    pub contrasts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelMatrix {
    pub values: DMatrix<f64>,
    pub provenance: Vec<ColumnSource>,
    /// Common scheme of the factors involved, `None` when they differ.
    pub scheme: Option<Scheme>,
    pub orthogonal: bool,
}

impl ModelMatrix {
    pub fn rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.values.column_iter().map(|c| c.sum()).collect()
    }

    fn hstack(blocks: Vec<ModelMatrix>) -> ModelMatrix {
        let rows = blocks[0].rows();
        let cols = blocks.iter().map(|b| b.cols()).sum();
        let mut values = DMatrix::zeros(rows, cols);
        let mut at = 0;
        let mut provenance = Vec::with_capacity(cols);
        let scheme = blocks[0].scheme;
        let mut same = true;
        let mut orthogonal = true;
        for b in blocks {
            values.columns_mut(at, b.cols()).copy_from(&b.values);
            at += b.cols();
            same &= b.scheme == scheme;
            orthogonal &= b.orthogonal;
            provenance.extend(b.provenance);
        }
        ModelMatrix {
            values,
            provenance,
            scheme: if same { scheme } else { None },
            orthogonal,
        }
    }
}

/// Main effect columns of one factor: row `i` is the contrast row of the
/// level in run `i`.
pub fn main_effect_matrix(
    oa: &OrthogonalArray,
    factor: usize,
    coding: &ContrastSet,
) -> Result<ModelMatrix> {
    validate_subset(oa, &[factor])?;
    if coding.levels() != oa.level_count(factor) {
        return Err(Error::LevelMismatch {
            factor,
            expected: coding.levels(),
            found: oa.level_count(factor),
        });
    }
    let values = DMatrix::from_fn(oa.runs(), coding.columns(), |i, j| {
        coding.coefficient(oa.cell(i, factor), j)
    });
    Ok(ModelMatrix {
        values,
        provenance: (0..coding.columns())
            .map(|j| ColumnSource {
                factors: vec![factor],
                contrasts: vec![j],
            })
            .collect(),
        scheme: Some(coding.scheme()),
        orthogonal: coding.is_orthogonal(),
    })
}

/// All elementwise products taking one contrast column from each factor of
/// `subset`. Columns are ordered with the first listed factor's contrast index
/// varying fastest (`A_l B_l C_l, A_q B_l C_l, A_l B_q C_l, ...`).
pub fn interaction_matrix(
    oa: &OrthogonalArray,
    subset: &[usize],
    coding: &Coding,
) -> Result<ModelMatrix> {
    validate_subset(oa, subset)?;
    coding.check(oa)?;
    let sets: Vec<&ContrastSet> = subset.iter().map(|&u| coding.set(u)).collect();
    let dims: Vec<usize> = sets.iter().map(|s| s.columns()).collect();
    let width: usize = dims.iter().product();

    let mut provenance = Vec::with_capacity(width);
    let mut index = vec![0usize; subset.len()];
    for _ in 0..width {
        provenance.push(ColumnSource {
            factors: subset.to_vec(),
            contrasts: index.clone(),
        });
        for (digit, &d) in index.iter_mut().zip(&dims) {
            *digit += 1;
            if *digit < d {
                break;
            }
            *digit = 0;
        }
    }

    let mut values = DMatrix::zeros(oa.runs(), width);
    for i in 0..oa.runs() {
        let row = oa.row(i);
        for (col, src) in provenance.iter().enumerate() {
            values[(i, col)] = src
                .contrasts
                .iter()
                .zip(subset)
                .zip(&sets)
                .map(|((&j, &u), set)| set.coefficient(row[u], j))
                .product();
        }
    }

    let first = sets[0].scheme();
    Ok(ModelMatrix {
        values,
        provenance,
        scheme: sets.iter().all(|s| s.scheme() == first).then_some(first),
        orthogonal: sets.iter().all(|s| s.is_orthogonal()),
    })
}

/// Main effects and all interactions among the factors of `subset`, blocks
/// ordered by size and then lexicographically by position in `subset`,
/// optionally preceded by an all-ones column.
pub fn full_model_matrix(
    oa: &OrthogonalArray,
    subset: &[usize],
    coding: &Coding,
    include_intercept: bool,
) -> Result<ModelMatrix> {
    validate_subset(oa, subset)?;
    coding.check(oa)?;
    let mut blocks = Vec::new();
    if include_intercept {
        blocks.push(ModelMatrix {
            values: DMatrix::from_element(oa.runs(), 1, 1.0),
            provenance: vec![ColumnSource {
                factors: vec![],
                contrasts: vec![],
            }],
            scheme: coding.scheme(),
            orthogonal: true,
        });
    }
    for k in 1..=subset.len() {
        for part in subset.iter().copied().combinations(k) {
            blocks.push(interaction_matrix(oa, &part, coding)?);
        }
    }
    let mut m = ModelMatrix::hstack(blocks);
    if include_intercept {
        let inner = subset.iter().map(|&u| coding.set(u)).collect::<Vec<_>>();
        let first = inner[0].scheme();
        m.scheme = inner.iter().all(|s| s.scheme() == first).then_some(first);
    }
    Ok(m)
}
