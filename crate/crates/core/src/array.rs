//! Orthogonal arrays: parsing, validation and the combinatorial diagnostics
//! that only need level counts (strength, maximum t-balance, uniformity and
//! row coincidences).
//!
//! Levels are coded densely as `0..s`. All balance checks are done in exact
//! integer arithmetic.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `N x n` array of factor levels with per-column level counts.
///
/// Repeated runs are allowed. Every level of every column must occur at least
/// once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrthogonalArray {
    runs: usize,
    levels: Vec<usize>,
    cells: Vec<usize>,
}

impl OrthogonalArray {
    /// Builds an array from rows of level values. When `levels` is `None` the
    /// level count of each column is inferred as `max + 1`.
    pub fn new(rows: Vec<Vec<usize>>, levels: Option<Vec<usize>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }
        let factors = rows[0].len();
        if factors == 0 {
            return Err(Error::InvalidArray("runs have no columns".into()));
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != factors) {
            return Err(Error::InvalidArray(format!(
                "run {} has {} values, expected {}",
                i + 1,
                row.len(),
                factors
            )));
        }
        if rows.len() < 2 {
            return Err(Error::InvalidArray(format!(
                "an array needs at least 2 runs, got {}",
                rows.len()
            )));
        }
        let levels = match levels {
            Some(levels) => {
                if levels.len() != factors {
                    return Err(Error::InvalidArray(format!(
                        "{} level counts declared for {} columns",
                        levels.len(),
                        factors
                    )));
                }
                levels
            }
            None => (0..factors)
                .map(|j| rows.iter().map(|r| r[j]).max().unwrap_or(0) + 1)
                .collect(),
        };
        for (j, &s) in levels.iter().enumerate() {
            if s < 2 {
                return Err(Error::InvalidArray(format!(
                    "column {} has {} level(s); at least 2 are required",
                    j + 1,
                    s
                )));
            }
        }
        for (i, row) in rows.iter().enumerate() {
            for (j, (&v, &s)) in row.iter().zip(&levels).enumerate() {
                if v >= s {
                    return Err(Error::InvalidArray(format!(
                        "run {}, column {}: level {} is not below the level count {}",
                        i + 1,
                        j + 1,
                        v,
                        s
                    )));
                }
            }
        }
        for (j, &s) in levels.iter().enumerate() {
            let mut seen = vec![false; s];
            for row in &rows {
                seen[row[j]] = true;
            }
            if let Some(missing) = seen.iter().position(|&x| !x) {
                return Err(Error::InvalidArray(format!(
                    "column {}: level {} never occurs (levels must be coded 0..{})",
                    j + 1,
                    missing,
                    s - 1
                )));
            }
        }
        Ok(Self {
            runs: rows.len(),
            cells: rows.into_iter().flatten().collect(),
            levels,
        })
    }

    /// Parses the text format: one run per line, values separated by
    /// whitespace or commas, `#` comment lines, and an optional
    /// `# levels: s1 s2 ...` header. An explicit `level_override` wins over
    /// the header.
    pub fn parse(text: &str, level_override: Option<&[usize]>) -> Result<Self> {
        let mut header_levels: Option<(usize, Vec<usize>)> = None;
        let mut rows: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let trimmed = raw.trim_start();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(comment) = trimmed.strip_prefix('#') {
                let comment = comment.trim();
                if let Some(decl) = comment.strip_prefix("levels:") {
                    let offset = raw.len() - decl.len();
                    let values = tokenize(decl, line_no, offset)?
                        .into_iter()
                        .map(|(_, v)| v)
                        .collect();
                    header_levels = Some((line_no, values));
                }
                continue;
            }
            let tokens = tokenize(raw, line_no, 0)?;
            if tokens.is_empty() {
                continue;
            }
            if let Some((_, first)) = rows.first() {
                if tokens.len() != first.len() {
                    return Err(Error::Parse {
                        line: line_no,
                        column: tokens.get(first.len()).map_or(raw.len() + 1, |t| t.0),
                        message: format!(
                            "ragged row: {} values, expected {}",
                            tokens.len(),
                            first.len()
                        ),
                    });
                }
            }
            rows.push((line_no, tokens));
        }

        if rows.is_empty() {
            return Err(Error::EmptyInput);
        }

        let declared: Option<Vec<usize>> = match (level_override, header_levels) {
            (Some(levels), _) => Some(levels.to_vec()),
            (None, Some((line, levels))) => {
                let width = rows[0].1.len();
                if levels.len() != width {
                    return Err(Error::Parse {
                        line,
                        column: 1,
                        message: format!(
                            "levels header declares {} columns, runs have {}",
                            levels.len(),
                            width
                        ),
                    });
                }
                Some(levels)
            }
            (None, None) => None,
        };

        if let Some(levels) = &declared {
            for (line, tokens) in &rows {
                for (j, &(column, v)) in tokens.iter().enumerate() {
                    if let Some(&s) = levels.get(j) {
                        if v >= s {
                            return Err(Error::Parse {
                                line: *line,
                                column,
                                message: format!(
                                    "level {} is not below the declared level count {}",
                                    v, s
                                ),
                            });
                        }
                    }
                }
            }
        }

        let rows = rows
            .into_iter()
            .map(|(_, t)| t.into_iter().map(|(_, v)| v).collect())
            .collect();
        Self::new(rows, declared)
    }

    pub fn runs(&self) -> usize {
        self.runs
    }

    pub fn factors(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn level_count(&self, factor: usize) -> usize {
        self.levels[factor]
    }

    #[inline]
    pub fn cell(&self, run: usize, factor: usize) -> usize {
        self.cells[run * self.levels.len() + factor]
    }

    pub fn row(&self, run: usize) -> &[usize] {
        let n = self.levels.len();
        &self.cells[run * n..(run + 1) * n]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[usize]> {
        self.cells.chunks(self.levels.len())
    }

    pub fn column(&self, factor: usize) -> impl Iterator<Item = usize> + '_ {
        self.rows().map(move |r| r[factor])
    }

    /// True if every column has the same number of levels.
    pub fn is_symmetric(&self) -> bool {
        self.levels.iter().all_equal()
    }

    /// The sub-design formed by the given columns, in the given order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        validate_subset(self, columns)?;
        let rows = self
            .rows()
            .map(|r| columns.iter().map(|&j| r[j]).collect())
            .collect();
        Self::new(
            rows,
            Some(columns.iter().map(|&j| self.levels[j]).collect()),
        )
    }

    /// Renders the array in the text input format, including a levels header.
    pub fn to_text(&self) -> String {
        let mut out = format!("# levels: {}\n", self.levels.iter().join(" "));
        for row in self.rows() {
            out.push_str(&row.iter().join(" "));
            out.push('\n');
        }
        out
    }
}

impl FromStr for OrthogonalArray {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s, None)
    }
}

impl fmt::Display for OrthogonalArray {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Splits a line into `(1-based column, value)` pairs.
fn tokenize(text: &str, line: usize, offset: usize) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    let mut start: Option<usize> = None;
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    for k in 0..=bytes.len() {
        let sep = k == bytes.len() || bytes[k].1.is_whitespace() || bytes[k].1 == ',';
        match (start, sep) {
            (None, false) => start = Some(k),
            (Some(s), true) => {
                let from = bytes[s].0;
                let to = if k == bytes.len() {
                    text.len()
                } else {
                    bytes[k].0
                };
                let token = &text[from..to];
                let column = offset + from + 1;
                let value: i64 = token.parse().map_err(|_| Error::Parse {
                    line,
                    column,
                    message: format!("`{}` is not an integer", token),
                })?;
                if value < 0 {
                    return Err(Error::Parse {
                        line,
                        column,
                        message: format!("negative level {}", value),
                    });
                }
                out.push((column, value as usize));
                start = None;
            }
            _ => {}
        }
    }
    Ok(out)
}

pub(crate) fn validate_subset(oa: &OrthogonalArray, subset: &[usize]) -> Result<()> {
    if subset.is_empty() {
        return Err(Error::EmptySubset);
    }
    let n = oa.factors();
    let mut seen = vec![false; n];
    for &j in subset {
        if j >= n {
            return Err(Error::ColumnOutOfRange {
                index: j,
                factors: n,
            });
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::DuplicateColumn(j));
        }
    }
    Ok(())
}

/// Cell counts `N_x` of a projection onto a column subset. Grid points that
/// do not occur are implicitly zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyTable {
    pub subset: Vec<usize>,
    pub levels: Vec<usize>,
    pub counts: BTreeMap<Vec<usize>, u64>,
    /// `|G_proj|`, saturating at `u128::MAX`.
    pub grid_size: u128,
    pub runs: u64,
}

impl FrequencyTable {
    pub fn count(&self, point: &[usize]) -> u64 {
        self.counts.get(point).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }

    /// `(q, r)` with `N = q |G| + r` and `0 <= r < |G|`.
    pub fn quotient_remainder(&self) -> (u64, u64) {
        let n = self.runs as u128;
        ((n / self.grid_size) as u64, (n % self.grid_size) as u64)
    }

    fn zero_cells(&self) -> bool {
        (self.counts.len() as u128) < self.grid_size
    }

    /// Every grid point occurs exactly `N / |G|` times.
    pub fn is_fully_balanced(&self) -> bool {
        let (q, r) = self.quotient_remainder();
        r == 0 && !self.zero_cells() && self.counts.values().all(|&c| c == q)
    }

    /// Every grid point occurs `q` or `q + 1` times.
    pub fn is_max_balanced(&self) -> bool {
        let (q, _) = self.quotient_remainder();
        (q == 0 || !self.zero_cells()) && self.counts.values().all(|&c| c == q || c == q + 1)
    }

    /// `V(D) = (1/|G|) sum_x (N_x - N/|G|)^2` over the full grid.
    pub fn variance(&self) -> f64 {
        let sum_sq: u128 = self
            .counts
            .values()
            .map(|&c| (c as u128) * (c as u128))
            .sum();
        let n = self.runs as u128;
        let g = self.grid_size;
        match g.checked_mul(sum_sq).zip(g.checked_mul(g)) {
            Some((num, den)) if num >= n * n => (num - n * n) as f64 / den as f64,
            _ => {
                let gf = g as f64;
                let mean = n as f64 / gf;
                sum_sq as f64 / gf - mean * mean
            }
        }
    }
}

fn grid_size(levels: &[usize]) -> u128 {
    levels
        .iter()
        .try_fold(1u128, |acc, &s| acc.checked_mul(s as u128))
        .unwrap_or(u128::MAX)
}

pub fn projection_counts(oa: &OrthogonalArray, subset: &[usize]) -> Result<FrequencyTable> {
    validate_subset(oa, subset)?;
    let mut counts = BTreeMap::new();
    for row in oa.rows() {
        let key: Vec<usize> = subset.iter().map(|&j| row[j]).collect();
        *counts.entry(key).or_insert(0u64) += 1;
    }
    let levels: Vec<usize> = subset.iter().map(|&j| oa.levels[j]).collect();
    Ok(FrequencyTable {
        subset: subset.to_vec(),
        grid_size: grid_size(&levels),
        levels,
        counts,
        runs: oa.runs() as u64,
    })
}

/// Largest `t` such that every `t`-column projection is a replicated full
/// factorial. Returns `0` if some column is unbalanced and `n` for a
/// replicated full factorial in all columns.
pub fn strength(oa: &OrthogonalArray) -> usize {
    let n = oa.factors();
    for t in 1..=n {
        let balanced = (0..n).combinations(t).all(|subset| {
            let levels: Vec<usize> = subset.iter().map(|&j| oa.levels[j]).collect();
            let g = grid_size(&levels);
            if !(oa.runs() as u128).is_multiple_of(g) {
                return false;
            }
            projection_counts(oa, &subset)
                .map(|t| t.is_fully_balanced())
                .unwrap_or(false)
        });
        if !balanced {
            return t - 1;
        }
    }
    n
}

/// Balance status of one `t`-column projection.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionBalance {
    pub subset: Vec<usize>,
    pub q: u64,
    pub r: u64,
    pub fully_balanced: bool,
    pub max_balanced: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BalanceReport {
    pub t: usize,
    /// All `t`-projections are fully balanced.
    pub is_strength_t: bool,
    /// All `t`-projections have cell counts in `{q, q+1}`.
    pub has_max_t_balance: bool,
    /// Strength `t - 1` together with maximum `t`-balance.
    pub weak_strength: bool,
    /// Quotient and remainder of the witness projection, or of the first
    /// projection when there is no witness.
    pub q: u64,
    pub r: u64,
    /// First projection (lexicographic) violating maximum `t`-balance.
    pub witness: Option<Vec<usize>>,
    pub projections: Vec<ProjectionBalance>,
}

pub fn max_t_balance(oa: &OrthogonalArray, t: usize) -> Result<BalanceReport> {
    let n = oa.factors();
    if t == 0 || t > n {
        return Err(Error::ProjectionSizeOutOfRange { t, factors: n });
    }
    let mut projections = Vec::new();
    for subset in (0..n).combinations(t) {
        let table = projection_counts(oa, &subset)?;
        let (q, r) = table.quotient_remainder();
        projections.push(ProjectionBalance {
            fully_balanced: table.is_fully_balanced(),
            max_balanced: table.is_max_balanced(),
            subset,
            q,
            r,
        });
    }
    let witness = projections.iter().find(|p| !p.max_balanced);
    let reference = witness.unwrap_or(&projections[0]);
    let has_max_t_balance = witness.is_none();
    Ok(BalanceReport {
        t,
        is_strength_t: projections.iter().all(|p| p.fully_balanced),
        has_max_t_balance,
        weak_strength: has_max_t_balance && strength(oa) + 1 >= t,
        q: reference.q,
        r: reference.r,
        witness: witness.map(|p| p.subset.clone()),
        projections,
    })
}

pub fn v_uniformity(oa: &OrthogonalArray, subset: &[usize]) -> Result<f64> {
    Ok(projection_counts(oa, subset)?.variance())
}

/// Histogram of `delta(a, b)`, the number of columns of `group` in which the
/// rows `a < b` agree, over all unordered row pairs.
pub fn coincidence_distribution(
    oa: &OrthogonalArray,
    group: &[usize],
) -> Result<BTreeMap<usize, u64>> {
    validate_subset(oa, group)?;
    let mut hist = BTreeMap::new();
    for a in 0..oa.runs() {
        let ra = oa.row(a);
        for b in a + 1..oa.runs() {
            let rb = oa.row(b);
            let delta = group.iter().filter(|&&j| ra[j] == rb[j]).count();
            *hist.entry(delta).or_insert(0) += 1;
        }
    }
    Ok(hist)
}

/// Row pair `(a, b)` and its coincidence count in each group.
pub type PairCoincidences = ((usize, usize), Vec<usize>);

/// Per-pair coincidence counts for several column groups at once; entry
/// `[k]` of each item is the count for `groups[k]`.
pub fn pairwise_coincidences(
    oa: &OrthogonalArray,
    groups: &[Vec<usize>],
) -> Result<Vec<PairCoincidences>> {
    for g in groups {
        validate_subset(oa, g)?;
    }
    let mut out = Vec::new();
    for a in 0..oa.runs() {
        for b in a + 1..oa.runs() {
            let (ra, rb) = (oa.row(a), oa.row(b));
            let deltas = groups
                .iter()
                .map(|g| g.iter().filter(|&&j| ra[j] == rb[j]).count())
                .collect();
            out.push(((a, b), deltas));
        }
    }
    Ok(out)
}
