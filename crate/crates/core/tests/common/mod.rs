//! Array generators and property checks shared by the property tests and
//! the acceptance suite. Each check returns `Err` with a description of the
//! first violation.

#![allow(dead_code)]

use std::path::PathBuf;

use genres::array::{max_t_balance, strength, v_uniformity};
use genres::cancor::{cancor_matrices, canonical_correlations};
use genres::coding::{full_model_matrix, main_effect_matrix};
use genres::gwlp::{gwlp_with, j_characteristic, projection_a, projection_frequencies};
use genres::resolution::{
    a_r_lower_bound, gr, gr_from_canonical, gr_ind, gr_tot, gr_upper_bound, resolution, summarize,
    summarize_with,
};
use genres::{Coding, ContrastSet, Error, OrthogonalArray, Scheme};
use itertools::Itertools;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Check = Result<(), String>;

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

pub fn fixture(name: &str) -> OrthogonalArray {
    let text = std::fs::read_to_string(fixture_path(name)).expect("fixture exists");
    text.parse().expect("fixture parses")
}

/// Fixtures of strength 2 used as seeds for random projections.
pub const STRENGTH2_FIXTURES: &[&str] = &[
    "oa18_2x3x3.oa",
    "oa8_2x2x4.oa",
    "l18.oa",
    "oa18_6x3.oa",
    "oa32_8x4.oa",
    "oa32_design01.oa",
    "oa32_design05.oa",
    "oa32_design09.oa",
    "regular9_3x3.oa",
    "pb12.oa",
];

pub fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Check {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lcm(a: usize, b: usize) -> usize {
    fn gcd(a: usize, b: usize) -> usize {
        if b == 0 {
            a
        } else {
            gcd(b, a % b)
        }
    }
    a / gcd(a, b) * b
}

/// Random array of strength at least 1: every column is a shuffled balanced
/// column.
pub fn balanced_array(levels: &[usize], multiple: usize, seed: u64) -> OrthogonalArray {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = levels.iter().fold(1, |a, &s| lcm(a, s)) * multiple;
    let n = if n < 4 { n * 2 } else { n };
    let columns: Vec<Vec<usize>> = levels
        .iter()
        .map(|&s| {
            let mut col: Vec<usize> = (0..n).map(|i| i % s).collect();
            col.shuffle(&mut rng);
            col
        })
        .collect();
    let rows = (0..n)
        .map(|i| columns.iter().map(|c| c[i]).collect())
        .collect();
    OrthogonalArray::new(rows, Some(levels.to_vec())).expect("balanced columns are valid")
}

/// Random isomorph of a projection of a strength-2 fixture: column subset,
/// row order and level labels are all randomized.
pub fn fixture_projection(name: &str, width: usize, seed: u64) -> OrthogonalArray {
    let base = fixture(name);
    relabel(&base, Some(width), seed)
}

/// Random column subset (of `width` columns, if given), column order, row
/// order and level relabeling of `oa`.
pub fn relabel(oa: &OrthogonalArray, width: Option<usize>, seed: u64) -> OrthogonalArray {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cols: Vec<usize> = (0..oa.factors()).collect();
    cols.shuffle(&mut rng);
    cols.truncate(width.unwrap_or(oa.factors()).min(oa.factors()));
    let perms: Vec<Vec<usize>> = cols
        .iter()
        .map(|&c| {
            let mut p: Vec<usize> = (0..oa.level_count(c)).collect();
            p.shuffle(&mut rng);
            p
        })
        .collect();
    let mut order: Vec<usize> = (0..oa.runs()).collect();
    order.shuffle(&mut rng);
    let rows = order
        .iter()
        .map(|&i| {
            cols.iter()
                .zip(&perms)
                .map(|(&c, p)| p[oa.cell(i, c)])
                .collect()
        })
        .collect();
    let levels = cols.iter().map(|&c| oa.level_count(c)).collect();
    OrthogonalArray::new(rows, Some(levels)).expect("relabeling keeps validity")
}

pub fn arb_balanced() -> impl Strategy<Value = OrthogonalArray> {
    (
        prop::collection::vec(2usize..=4, 3..=5),
        1usize..=2,
        any::<u64>(),
    )
        .prop_map(|(levels, m, seed)| balanced_array(&levels, m, seed))
}

pub fn arb_projection() -> impl Strategy<Value = OrthogonalArray> {
    (
        prop::sample::select(STRENGTH2_FIXTURES),
        3usize..=5,
        any::<u64>(),
    )
        .prop_map(|(name, width, seed)| fixture_projection(name, width, seed))
}

/// Small arrays of strength at least 1, about half of them of strength 2.
pub fn arb_array() -> impl Strategy<Value = OrthogonalArray> {
    prop_oneof![arb_balanced(), arb_projection()]
}

pub fn arb_two_level() -> impl Strategy<Value = OrthogonalArray> {
    prop_oneof![
        (3usize..=5, 1usize..=4, any::<u64>()).prop_map(|(n, m, seed)| balanced_array(
            &vec![2; n],
            2 * m,
            seed
        )),
        (3usize..=6, any::<u64>()).prop_map(|(w, seed)| fixture_projection("pb12.oa", w, seed)),
        any::<u64>().prop_map(|seed| relabel(&fixture("half2x2x2.oa"), None, seed)),
    ]
}

fn random_orthogonal(dim: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    m.qr().q()
}

/// Normalized orthogonal coding: polynomial contrasts times a random
/// rotation, per factor.
pub fn rotated_coding(oa: &OrthogonalArray, seed: u64) -> Coding {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sets = oa
        .levels()
        .iter()
        .map(|&s| {
            let p = ContrastSet::polynomial(s).unwrap();
            ContrastSet::custom(p.coefficients() * random_orthogonal(s - 1, &mut rng)).unwrap()
        })
        .collect();
    Coding::from_sets(oa, sets).unwrap()
}

/// All arrays (as count tables over the full factorial, runs in
/// lexicographic order) with the given levels and run size whose every
/// 2-column projection is fully balanced.
pub fn enumerate_strength2(levels: &[usize], runs: usize) -> Vec<OrthogonalArray> {
    assert_eq!(levels.len(), 3);
    let cells: Vec<Vec<usize>> = levels
        .iter()
        .map(|&s| 0..s)
        .multi_cartesian_product()
        .collect();
    let pairs = [(0, 1), (0, 2), (1, 2)];
    let targets: Vec<usize> = pairs
        .iter()
        .map(|&(a, b)| runs / (levels[a] * levels[b]))
        .collect();
    let mut counts = vec![0usize; cells.len()];
    let mut out = Vec::new();

    fn margins(
        levels: &[usize],
        cells: &[Vec<usize>],
        counts: &[usize],
        upto: usize,
    ) -> Vec<Vec<usize>> {
        let pairs = [(0, 1), (0, 2), (1, 2)];
        pairs
            .iter()
            .map(|&(a, b)| {
                let mut m = vec![0; levels[a] * levels[b]];
                for (cell, &c) in cells.iter().zip(counts).take(upto) {
                    m[cell[a] * levels[b] + cell[b]] += c;
                }
                m
            })
            .collect()
    }

    fn go(
        i: usize,
        levels: &[usize],
        cells: &[Vec<usize>],
        targets: &[usize],
        counts: &mut Vec<usize>,
        out: &mut Vec<OrthogonalArray>,
    ) {
        let m = margins(levels, cells, counts, i);
        if m.iter()
            .zip(targets)
            .any(|(mm, &t)| mm.iter().any(|&v| v > t))
        {
            return;
        }
        if i == cells.len() {
            if m.iter()
                .zip(targets)
                .all(|(mm, &t)| mm.iter().all(|&v| v == t))
            {
                let rows: Vec<Vec<usize>> = cells
                    .iter()
                    .zip(counts.iter())
                    .flat_map(|(cell, &c)| std::iter::repeat_n(cell.clone(), c))
                    .collect();
                out.push(OrthogonalArray::new(rows, Some(levels.to_vec())).unwrap());
            }
            return;
        }
        let cap = *targets.iter().min().unwrap();
        for c in 0..=cap {
            counts[i] = c;
            go(i + 1, levels, cells, targets, counts, out);
        }
        counts[i] = 0;
    }

    go(0, levels, &cells, &targets, &mut counts, &mut out);
    out
}

/// The exhaustive tiny cases: three factors, at most 3 levels, `N <= 12`.
pub fn tiny_strength2_arrays() -> Vec<OrthogonalArray> {
    let mut all = Vec::new();
    for (levels, runs) in [
        (vec![2, 2, 2], 4),
        (vec![2, 2, 2], 8),
        (vec![2, 2, 2], 12),
        (vec![2, 2, 3], 12),
        (vec![3, 3, 3], 9),
    ] {
        all.extend(enumerate_strength2(&levels, runs));
    }
    all
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() < tol
}

/// Resolution, or `None` for arrays with no `R`-factor projection.
fn resolution_or_skip(oa: &OrthogonalArray) -> Result<Option<usize>, String> {
    match resolution(oa) {
        Ok(r) => Ok(Some(r)),
        Err(Error::NoProjection { .. }) => Ok(None),
        Err(e) => Err(format!("resolution failed: {e}")),
    }
}

/// Sum of squared canonical correlations of each factor against the full
/// model of the rest of its projection equals `a_R`, in polynomial, rotated
/// and dummy coding.
pub fn check_correlations_sum_to_a(oa: &OrthogonalArray, seed: u64) -> Check {
    let Some(r) = resolution_or_skip(oa)? else {
        return Ok(());
    };
    let poly = Coding::polynomial(oa);
    let codings = [
        poly.clone(),
        rotated_coding(oa, seed),
        Coding::uniform(oa.levels(), Scheme::Dummy).unwrap(),
    ];
    for subset in (0..oa.factors()).combinations(r) {
        let a = projection_a(oa, &subset, &poly)
            .map_err(|e| e.to_string())?
            .value;
        for &c in &subset {
            let rest: Vec<usize> = subset.iter().copied().filter(|&u| u != c).collect();
            for coding in &codings {
                let y = main_effect_matrix(oa, c, coding.set(c)).unwrap();
                let x = full_model_matrix(oa, &rest, coding, false).unwrap();
                let sum = canonical_correlations(&y, &x).unwrap().sum_of_squares();
                ensure(close(sum, a, 1e-8), || {
                    format!("{subset:?} factor {c}: sum r^2 = {sum}, a_R = {a}")
                })?;
            }
        }
    }
    Ok(())
}

pub fn check_gr_ind_at_most_gr(oa: &OrthogonalArray) -> Check {
    if resolution_or_skip(oa)?.is_none() {
        return Ok(());
    }
    let (g, gi) = (gr(oa).unwrap(), gr_ind(oa).unwrap());
    ensure(gi <= g + 1e-10, || format!("GR_ind {gi} > GR {g}"))
}

/// Min-identities, ranges, the canonical-correlation route to GR, and the
/// characterizations of GR = R and GR_ind = R.
pub fn check_factorwise_minima(oa: &OrthogonalArray) -> Check {
    let Some(r) = resolution_or_skip(oa)? else {
        return Ok(());
    };
    let s = summarize(oa).unwrap();
    let rf = r as f64;
    let min_tot = s
        .per_factor
        .iter()
        .map(|f| f.gr_tot)
        .fold(f64::INFINITY, f64::min);
    let min_ind = s
        .per_factor
        .iter()
        .map(|f| f.gr_ind)
        .fold(f64::INFINITY, f64::min);
    ensure(close(s.gr, min_tot, 1e-12), || {
        format!("GR {} != min GR_tot(i) {min_tot}", s.gr)
    })?;
    ensure(close(s.gr_ind, min_ind, 1e-12), || {
        format!("GR_ind {} != min GR_ind(i) {min_ind}", s.gr_ind)
    })?;

    let (g, gi, gt) = (gr(oa).unwrap(), gr_ind(oa).unwrap(), gr_tot(oa).unwrap());
    ensure(close(g, s.gr, 1e-12), || {
        format!("gr() {g} != summary {}", s.gr)
    })?;
    ensure(close(gi, s.gr_ind, 1e-10), || {
        format!("gr_ind() {gi} != summary {}", s.gr_ind)
    })?;
    ensure(close(gt, s.gr_tot, 1e-12), || {
        format!("gr_tot() {gt} != summary {}", s.gr_tot)
    })?;

    ensure(
        rf - 1e-12 <= s.gr_ind && s.gr_ind <= s.gr + 1e-10 && s.gr < rf + 1.0,
        || format!("range violated: R={r} GR_ind={} GR={}", s.gr_ind, s.gr),
    )?;
    ensure(s.gr <= s.gr_tot + 1e-12, || {
        format!("GR {} > GR_tot {}", s.gr, s.gr_tot)
    })?;

    let g5 = gr_from_canonical(oa, &Coding::polynomial(oa)).unwrap();
    ensure(close(g5, s.gr, 1e-8), || {
        format!("tuple route {g5} != GR {}", s.gr)
    })?;

    let complete = s.projections.iter().any(|p| {
        let smin = p.subset.iter().map(|&u| oa.level_count(u)).min().unwrap() as f64;
        close(p.a, smin - 1.0, 1e-8)
    });
    ensure(complete == close(s.gr, rf, 1e-8), || {
        format!("GR = R iff a_R = s_min - 1 fails (GR {})", s.gr)
    })?;
    let unit = s
        .projections
        .iter()
        .flat_map(|p| &p.confounding)
        .any(|f| close(f.correlations[0], 1.0, 1e-8));
    ensure(unit == close(s.gr_ind, rf, 1e-8), || {
        format!("GR_ind = R iff r1 = 1 fails (GR_ind {})", s.gr_ind)
    })
}

/// `A_k = sum (J_k / N)^2` on 2-level arrays, and `GR = R + 1 - max J_R / N`.
pub fn check_j_identity(oa: &OrthogonalArray) -> Check {
    let n = oa.runs() as f64;
    let max_k = oa.factors().min(4);
    let g = gwlp_with(oa, max_k, &Coding::polynomial(oa)).unwrap();
    for k in 1..=max_k {
        let from_j: f64 = (0..oa.factors())
            .combinations(k)
            .map(|s| (j_characteristic(oa, &s).unwrap() / n).powi(2))
            .sum();
        ensure(close(from_j, g.values[k], 1e-9), || {
            format!("A_{k} = {} vs J sum {from_j}", g.values[k])
        })?;
    }
    if let Some(r) = resolution_or_skip(oa)? {
        let max_j = (0..oa.factors())
            .combinations(r)
            .map(|s| j_characteristic(oa, &s).unwrap())
            .fold(0.0, f64::max);
        let expected = r as f64 + 1.0 - max_j / n;
        let got = gr(oa).unwrap();
        ensure(close(got, expected, 1e-9), || {
            format!("GR {got} vs J route {expected}")
        })?;
        let gi = gr_ind(oa).unwrap();
        ensure(close(gi, got, 1e-9), || {
            format!("2-level GR_ind {gi} != GR {got}")
        })?;
    }
    Ok(())
}

/// Projection frequencies and canonical correlations do not depend on the
/// coding.
pub fn check_coding_invariance(oa: &OrthogonalArray, seed: u64) -> Check {
    let poly = Coding::polynomial(oa);
    let helmert = Coding::uniform(oa.levels(), Scheme::Helmert).unwrap();
    let rotated = rotated_coding(oa, seed);
    let dummy = Coding::uniform(oa.levels(), Scheme::Dummy).unwrap();
    for k in 1..=oa.factors().min(3) {
        let base = projection_frequencies(oa, k, &poly).unwrap();
        for other in [&helmert, &rotated] {
            for (p, q) in base
                .iter()
                .zip(projection_frequencies(oa, k, other).unwrap())
            {
                ensure(close(p.value, q.value, 1e-8), || {
                    format!("a{:?}: {} vs {}", p.subset, p.value, q.value)
                })?;
            }
        }
    }
    for (c, d) in (0..oa.factors()).tuple_combinations() {
        let rest: Vec<usize> = (0..oa.factors())
            .filter(|&u| u != c && u != d)
            .take(1)
            .collect();
        let others: Vec<usize> = std::iter::once(d).chain(rest).collect();
        let cc = |coding: &Coding| {
            let y = main_effect_matrix(oa, c, coding.set(c)).unwrap();
            let x = full_model_matrix(oa, &others, coding, false).unwrap();
            cancor_matrices(&y.values, &x.values).unwrap().correlations
        };
        let base = cc(&poly);
        for other in [&helmert, &rotated, &dummy] {
            let got = cc(other);
            let worst = base
                .iter()
                .zip(&got)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            ensure(worst < 1e-8, || {
                format!("cancor {c} vs {others:?}: {base:?} vs {got:?}")
            })?;
        }
    }
    Ok(())
}

/// `a_R <= s_min - 1`, with equality exactly when some minimum-level
/// factor is completely confounded.
pub fn check_a_bounded_by_min_levels(oa: &OrthogonalArray) -> Check {
    let Some(r) = resolution_or_skip(oa)? else {
        return Ok(());
    };
    let s = summarize(oa).unwrap();
    debug_assert_eq!(s.resolution, r);
    for p in &s.projections {
        let smin = p.subset.iter().map(|&u| oa.level_count(u)).min().unwrap();
        ensure(p.a <= smin as f64 - 1.0 + 1e-9, || {
            format!("a{:?} = {} > s_min - 1", p.subset, p.a)
        })?;
        for f in &p.confounding {
            let sc = oa.level_count(f.factor) as f64;
            // Complete confounding needs s_c - 1 unit correlations.
            let ones = f
                .correlations
                .iter()
                .filter(|&&x| close(x, 1.0, 1e-8))
                .count();
            let all_one = ones == oa.level_count(f.factor) - 1;
            ensure(all_one == close(p.a, sc - 1.0, 1e-8), || {
                format!(
                    "complete confounding of {} in {:?} mismatched (a = {})",
                    f.factor, p.subset, p.a
                )
            })?;
        }
    }
    Ok(())
}

/// `A_R >= r (prod s - r) / N^2` for `R`-factor projections, with equality
/// iff the projection has weak strength `R`; in symmetric arrays GR meets
/// its upper bound iff the array has weak strength `R`.
pub fn check_lower_bound_tightness(oa: &OrthogonalArray) -> Check {
    let Some(r) = resolution_or_skip(oa)? else {
        return Ok(());
    };
    let poly = Coding::polynomial(oa);
    for subset in (0..oa.factors()).combinations(r) {
        let proj = oa.select_columns(&subset).unwrap();
        let a = projection_a(oa, &subset, &poly).unwrap().value;
        let levels: Vec<usize> = subset.iter().map(|&u| oa.level_count(u)).collect();
        let bound = a_r_lower_bound(oa.runs(), &levels);
        ensure(a >= bound - 1e-9, || {
            format!("a{subset:?} = {a} below {bound}")
        })?;
        let weak = max_t_balance(&proj, r).unwrap().weak_strength;
        ensure(weak == close(a, bound, 1e-9), || {
            format!("a{subset:?} = {a}, bound {bound}, weak strength {weak}")
        })?;
    }
    if oa.is_symmetric() {
        let b = gr_upper_bound(oa.runs(), oa.level_count(0), r, Some(oa)).unwrap();
        let g = gr(oa).unwrap();
        ensure(g <= b.value + 1e-9, || {
            format!("GR {g} above bound {}", b.value)
        })?;
        let attained = b.attained.unwrap();
        ensure(attained == close(g, b.value, 1e-8), || {
            format!("GR {g}, bound {}, weak strength {attained}", b.value)
        })?;
    }
    Ok(())
}

/// `V(D) = (N / prod s)^2 A_n` for strength `n - 1`.
pub fn check_v_identity(oa: &OrthogonalArray) -> Check {
    let n = oa.factors();
    if strength(oa) + 1 < n {
        return Ok(());
    }
    let all: Vec<usize> = (0..n).collect();
    let v = v_uniformity(oa, &all).unwrap();
    let grid: f64 = oa.levels().iter().map(|&s| s as f64).product();
    let mean = oa.runs() as f64 / grid;
    let a_n = gwlp_with(oa, n, &Coding::polynomial(oa)).unwrap().values[n];
    ensure(close(v, mean * mean * a_n, 1e-9), || {
        format!("V = {v}, mean^2 A_n = {}", mean * mean * a_n)
    })
}

/// All resolution quantities survive row, column and level relabeling.
pub fn check_relabel_invariance(oa: &OrthogonalArray, seed: u64) -> Check {
    if resolution_or_skip(oa)?.is_none() {
        return Ok(());
    }
    let other = relabel(oa, None, seed);
    let (a, b) = (summarize(oa).unwrap(), summarize(&other).unwrap());
    let mut ta: Vec<f64> = a.per_factor.iter().map(|f| f.gr_tot).collect();
    let mut tb: Vec<f64> = b.per_factor.iter().map(|f| f.gr_tot).collect();
    let mut ia: Vec<f64> = a.per_factor.iter().map(|f| f.gr_ind).collect();
    let mut ib: Vec<f64> = b.per_factor.iter().map(|f| f.gr_ind).collect();
    for v in [&mut ta, &mut tb, &mut ia, &mut ib] {
        v.sort_by(f64::total_cmp);
    }
    let pairs = [(a.gr, b.gr), (a.gr_ind, b.gr_ind), (a.gr_tot, b.gr_tot)]
        .into_iter()
        .chain(ta.into_iter().zip(tb))
        .chain(ia.into_iter().zip(ib));
    for (x, y) in pairs {
        ensure(close(x, y, 1e-9), || format!("{x} vs {y} after relabeling"))?;
    }
    let rotated = summarize_with(oa, &rotated_coding(oa, seed)).unwrap();
    ensure(
        close(rotated.gr_ind, a.gr_ind, 1e-9) && close(rotated.gr, a.gr, 1e-9),
        || {
            format!(
                "rotated coding changed GR/GR_ind: {} {}",
                rotated.gr, rotated.gr_ind
            )
        },
    )
}
