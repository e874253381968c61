//! Serializable analysis reports and their text/JSON rendering.
//!
//! Reports number factors from 1, like the columns of a design table; the
//! library itself indexes from 0. Every top-level field is always present
//! in JSON (absent sections are `null`, empty lists `[]`).

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::array::{strength, BalanceReport, OrthogonalArray};
use crate::cancor::CancorResult;
use crate::coding::Scheme;
use crate::gwlp::{Gwlp, ZERO_TOL};
use crate::oracle::{OracleReport, VERIFY_TOL};
use crate::resolution::{
    FactorResolution, GRBound, ProjectionReport, ResolutionSummary, WorstPair,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignInfo {
    pub source: Option<String>,
    pub runs: usize,
    pub factors: usize,
    pub levels: Vec<usize>,
    pub strength: usize,
    pub symmetric: bool,
}

impl DesignInfo {
    pub fn of(oa: &OrthogonalArray, source: Option<String>) -> Self {
        DesignInfo {
            source,
            runs: oa.runs(),
            factors: oa.factors(),
            levels: oa.levels().to_vec(),
            strength: strength(oa),
            symmetric: oa.is_symmetric(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolutionBlock {
    pub resolution: usize,
    pub gr: f64,
    pub gr_ind: f64,
    pub gr_tot: f64,
    pub worst_projection: Vec<usize>,
    pub worst_pair: WorstPair,
    pub weak_strength: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundParameters {
    pub runs: usize,
    pub s: usize,
    pub resolution: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub parameters: Option<BoundParameters>,
    /// Upper bound on `GR` (symmetric designs).
    pub gr_upper: Option<GRBound>,
    /// Weak strength `R`: the design has the largest `GR` among all arrays
    /// with its parameters, provided none of them has strength `R`.
    pub max_gr_in_class: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyBlock {
    pub tolerance: f64,
    pub passed: bool,
    pub max_difference: f64,
    pub declined: usize,
    pub checks: Vec<OracleReport>,
}

impl VerifyBlock {
    pub fn new(checks: Vec<OracleReport>) -> Self {
        VerifyBlock {
            tolerance: VERIFY_TOL,
            passed: checks.iter().all(OracleReport::passed),
            max_difference: checks
                .iter()
                .filter_map(|c| c.difference)
                .fold(0.0, f64::max),
            declined: checks.iter().filter(|c| c.oracle.is_none()).count(),
            checks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancorBlock {
    pub factor: usize,
    pub others: Vec<usize>,
    pub scheme: Scheme,
    pub correlations: Vec<f64>,
    pub squared: Vec<f64>,
    pub rank_y: usize,
    pub rank_x: usize,
    /// Per-contrast R² of the factor's coded columns on the full model of
    /// the others.
    pub r2: Vec<f64>,
    pub r2_total: f64,
    /// The R² sum equals the sum of squared canonical correlations only for
    /// orthogonal coding; `false` flags a coding-dependent total.
    pub r2_sum_valid: bool,
}

impl CancorBlock {
    /// `factor` and `others` are 0-based here and stored 1-based.
    pub fn new(
        factor: usize,
        others: &[usize],
        scheme: Scheme,
        cc: CancorResult,
        r2: Vec<f64>,
        r2_sum_valid: bool,
    ) -> Self {
        CancorBlock {
            factor: factor + 1,
            others: one_based(others),
            scheme,
            squared: cc.correlations.iter().map(|r| r * r).collect(),
            correlations: cc.correlations,
            rank_y: cc.rank_y,
            rank_x: cc.rank_x,
            r2_total: r2.iter().sum(),
            r2,
            r2_sum_valid,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub design: Option<DesignInfo>,
    pub gwlp: Option<Gwlp>,
    pub resolution: Option<ResolutionBlock>,
    pub factors: Vec<FactorResolution>,
    pub projections: Vec<ProjectionReport>,
    pub bounds: Option<Bounds>,
    pub verify: Option<VerifyBlock>,
    pub balance: Option<BalanceReport>,
    pub cancor: Option<CancorBlock>,
    pub diagnostics: Vec<String>,
}

fn one_based(xs: &[usize]) -> Vec<usize> {
    xs.iter().map(|x| x + 1).collect()
}

impl Report {
    pub fn for_design(oa: &OrthogonalArray, source: Option<String>) -> Self {
        Report {
            design: Some(DesignInfo::of(oa, source)),
            ..Report::default()
        }
    }

    /// Adds a resolution summary (0-based, as returned by the library).
    pub fn set_summary(&mut self, s: ResolutionSummary) {
        self.resolution = Some(ResolutionBlock {
            resolution: s.resolution,
            gr: s.gr,
            gr_ind: s.gr_ind,
            gr_tot: s.gr_tot,
            worst_projection: one_based(&s.worst_projection),
            worst_pair: WorstPair {
                factor: s.worst_pair.factor + 1,
                subset: one_based(&s.worst_pair.subset),
                correlation: s.worst_pair.correlation,
            },
            weak_strength: s.weak_strength,
        });
        self.factors = s
            .per_factor
            .into_iter()
            .map(|f| FactorResolution {
                factor: f.factor + 1,
                worst_tot: one_based(&f.worst_tot),
                worst_ind: one_based(&f.worst_ind),
                ..f
            })
            .collect();
        let mut projections: Vec<ProjectionReport> = s
            .projections
            .into_iter()
            .map(|mut p| {
                p.subset = one_based(&p.subset);
                for c in &mut p.confounding {
                    c.factor += 1;
                }
                p
            })
            .collect();
        projections.sort_by(|a, b| a.subset.cmp(&b.subset));
        self.projections = projections;
        let symmetric = self.design.as_ref().is_some_and(|d| d.symmetric);
        self.bounds = Some(Bounds {
            parameters: None,
            gr_upper: s.bound,
            max_gr_in_class: (!symmetric).then_some(s.weak_strength),
        });
    }

    pub fn set_balance(&mut self, mut b: BalanceReport) {
        b.witness = b.witness.map(|w| one_based(&w));
        for p in &mut b.projections {
            p.subset = one_based(&p.subset);
        }
        self.balance = Some(b);
    }

    /// Exit status contribution of the verify section.
    pub fn verify_failed(&self) -> bool {
        self.verify.as_ref().is_some_and(|v| !v.passed)
    }
}

pub fn render_json(report: &Report) -> String {
    serde_json::to_string_pretty(report).expect("reports contain only finite numbers")
}

pub fn parse_json(text: &str) -> serde_json::Result<Report> {
    serde_json::from_str(text)
}

fn set(xs: &[usize]) -> String {
    let parts: Vec<String> = xs.iter().map(usize::to_string).collect();
    format!("{{{}}}", parts.join(","))
}

fn list(xs: &[f64], p: usize) -> String {
    xs.iter()
        .map(|x| format!("{x:.p$}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Plain-text rendering with `precision` decimals.
pub fn render_text(report: &Report, precision: usize) -> String {
    let p = precision;
    let mut out = String::new();
    let w = &mut out;

    if let Some(d) = &report.design {
        let levels: Vec<String> = d.levels.iter().map(usize::to_string).collect();
        if let Some(src) = &d.source {
            let _ = writeln!(w, "design     {src}");
        }
        let _ = writeln!(
            w,
            "runs {}  factors {}  levels {}  strength {}",
            d.runs,
            d.factors,
            levels.join(" "),
            d.strength
        );
    }
    if let Some(g) = &report.gwlp {
        let terms: Vec<String> = g
            .values
            .iter()
            .enumerate()
            .map(|(k, v)| format!("A{k}={v:.p$}"))
            .collect();
        let _ = writeln!(w, "gwlp       {}", terms.join(" "));
    }
    if let Some(r) = &report.resolution {
        let _ = writeln!(w, "resolution {}", r.resolution);
        let _ = writeln!(w, "GR         {:.p$}", r.gr);
        let _ = writeln!(w, "GR_ind     {:.p$}", r.gr_ind);
        let _ = writeln!(w, "GR_tot     {:.p$}", r.gr_tot);
        let _ = writeln!(w, "worst projection {}", set(&r.worst_projection));
        let _ = writeln!(
            w,
            "worst pair factor {} in {}  r1 {:.p$}",
            r.worst_pair.factor,
            set(&r.worst_pair.subset),
            r.worst_pair.correlation
        );
        let _ = writeln!(
            w,
            "weak strength {}: {}",
            r.resolution,
            if r.weak_strength { "yes" } else { "no" }
        );
    }
    if !report.factors.is_empty() {
        let _ = writeln!(w, "factor  levels  GR_tot(i)  GR_ind(i)");
        for f in &report.factors {
            let _ = writeln!(
                w,
                "{:<7} {:<7} {:<10.p$} {:.p$}",
                f.factor, f.levels, f.gr_tot, f.gr_ind
            );
        }
    }
    let confounded: Vec<&ProjectionReport> = report
        .projections
        .iter()
        .filter(|pr| pr.a > ZERO_TOL)
        .collect();
    if !confounded.is_empty() {
        let _ = writeln!(
            w,
            "projections with a > 0 ({} of {})",
            confounded.len(),
            report.projections.len()
        );
        for pr in confounded {
            let _ = writeln!(
                w,
                "  {}  a={:.p$}  lower bound {:.p$}",
                set(&pr.subset),
                pr.a,
                pr.a_lower_bound
            );
            for c in &pr.confounding {
                let _ = writeln!(
                    w,
                    "    factor {}  avg R2 {:.p$}  cc {}",
                    c.factor,
                    c.average_r2,
                    list(&c.correlations, p)
                );
            }
        }
    }
    if let Some(b) = &report.bounds {
        if let Some(par) = &b.parameters {
            let _ = writeln!(
                w,
                "bound for N={} s={} R={}",
                par.runs, par.s, par.resolution
            );
        }
        if let Some(g) = &b.gr_upper {
            let attained = match g.attained {
                Some(true) => "  (attained)",
                Some(false) => "  (not attained)",
                None => "",
            };
            let _ = writeln!(
                w,
                "GR upper bound {:.p$}  r={}{attained}",
                g.value, g.r_remainder
            );
        }
        if let Some(m) = b.max_gr_in_class {
            let _ = writeln!(
                w,
                "maximum GR in class: {}",
                if m {
                    "yes (weak strength)"
                } else {
                    "not certified"
                }
            );
        }
    }
    if let Some(b) = &report.balance {
        let _ = writeln!(
            w,
            "t={}  strength t: {}  maximum t-balance: {}  weak strength t: {}",
            b.t, b.is_strength_t, b.has_max_t_balance, b.weak_strength
        );
        let _ = writeln!(w, "q={} r={}", b.q, b.r);
        if let Some(wit) = &b.witness {
            let _ = writeln!(w, "unbalanced projection {}", set(wit));
        }
    }
    if let Some(c) = &report.cancor {
        let _ = writeln!(
            w,
            "factor {} vs full model of {} ({} coding)",
            c.factor,
            set(&c.others),
            c.scheme
        );
        let _ = writeln!(w, "canonical correlations {}", list(&c.correlations, p));
        let _ = writeln!(w, "squared                {}", list(&c.squared, p));
        let _ = writeln!(w, "R2 per contrast        {}", list(&c.r2, p));
        let _ = writeln!(
            w,
            "R2 sum                 {:.p$}{}",
            c.r2_total,
            if c.r2_sum_valid {
                ""
            } else {
                "  (non-orthogonal coding: sum is coding dependent)"
            }
        );
    }
    if let Some(v) = &report.verify {
        let _ = writeln!(
            w,
            "verify {}  checks {}  declined {}  max difference {:.3e}",
            if v.passed { "passed" } else { "FAILED" },
            v.checks.len(),
            v.declined,
            v.max_difference
        );
        for c in v.checks.iter().filter(|c| !c.passed()) {
            let _ = writeln!(
                w,
                "  mismatch {}: main {} oracle {:?}",
                c.quantity, c.main, c.oracle
            );
        }
    }
    for d in &report.diagnostics {
        let _ = writeln!(w, "note: {d}");
    }
    out
}
