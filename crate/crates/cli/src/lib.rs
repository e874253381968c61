//! Command dispatch for the `genres` binary, kept separate from argument
//! parsing so it can be driven from tests.

use std::fmt;
use std::path::PathBuf;

use genres::array::max_t_balance;
use genres::cancor::{canonical_correlations, is_orthogonal_contrast_matrix, regression_r2};
use genres::coding::{full_model_matrix, main_effect_matrix};
use genres::gwlp::gwlp_with;
use genres::oracle::verify;
use genres::report::{BoundParameters, Bounds, CancorBlock, Report, VerifyBlock};
use genres::resolution::{gr_upper_bound, resolution, summarize_with};
use genres::{Coding, Error, OrthogonalArray, Scheme};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_STRENGTH_ZERO: i32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Gwlp,
    Gr,
    Strength,
    Balance,
    Bound,
    Cancor,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Text,
    Json,
}

/// One invocation. Factor numbers (`subset`, `factor`) start at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisRequest {
    pub input: Option<PathBuf>,
    pub command: Command,
    pub coding: Scheme,
    /// Level counts overriding those in the file.
    pub levels: Option<Vec<usize>>,
    pub max_k: Option<usize>,
    pub t: Option<usize>,
    /// Columns to analyze; for `cancor`, the candidate `X` factors.
    pub subset: Option<Vec<usize>>,
    pub factor: Option<usize>,
    /// Add oracle cross-checks to `analyze`.
    pub verify: bool,
    pub runs: Option<usize>,
    pub s: Option<usize>,
    pub resolution: Option<usize>,
    pub format: Format,
    pub precision: usize,
}

impl AnalysisRequest {
    pub fn new(command: Command, input: Option<PathBuf>) -> Self {
        AnalysisRequest {
            input,
            command,
            coding: Scheme::Polynomial,
            levels: None,
            max_k: None,
            t: None,
            subset: None,
            factor: None,
            verify: false,
            runs: None,
            s: None,
            resolution: None,
            format: Format::Text,
            precision: 2,
        }
    }
}

/// A failed invocation: message for stderr and the process exit status.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub status: i32,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            status: EXIT_INPUT,
            message: message.into(),
        }
    }
}

fn from_error(e: Error) -> Failure {
    match e {
        Error::StrengthZero => Failure {
            status: EXIT_STRENGTH_ZERO,
            message: "array has strength 0 (some column is unbalanced); resolution is undefined"
                .into(),
        },
        e => Failure::input(e.to_string()),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub status: i32,
}

impl Outcome {
    pub fn render(&self, format: Format, precision: usize) -> String {
        match format {
            Format::Json => genres::report::render_json(&self.report) + "\n",
            Format::Text => genres::report::render_text(&self.report, precision),
        }
    }
}

fn zero_based(xs: &[usize], factors: usize) -> Result<Vec<usize>, Failure> {
    xs.iter()
        .map(|&x| {
            if x == 0 || x > factors {
                Err(Failure::input(format!(
                    "factor {x} out of range 1..={factors}"
                )))
            } else {
                Ok(x - 1)
            }
        })
        .collect()
}

fn load(req: &AnalysisRequest) -> Result<(OrthogonalArray, String), Failure> {
    let path = req
        .input
        .as_ref()
        .ok_or_else(|| Failure::input("an input file is required"))?;
    let name = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Failure::input(format!("{name}: {e}")))?;
    let oa = OrthogonalArray::parse(&text, req.levels.as_deref())
        .map_err(|e| Failure::input(format!("{name}: {e}")))?;
    Ok((oa, name))
}

/// Loads the array and restricts it to `--subset` (except for `cancor`,
/// which interprets the subset itself).
fn design(req: &AnalysisRequest) -> Result<(OrthogonalArray, String), Failure> {
    let (oa, name) = load(req)?;
    match (&req.subset, req.command) {
        (Some(cols), c) if c != Command::Cancor => {
            let cols = zero_based(cols, oa.factors())?;
            let sub = oa.select_columns(&cols).map_err(from_error)?;
            let label: Vec<String> = cols.iter().map(|c| (c + 1).to_string()).collect();
            Ok((sub, format!("{name} columns {}", label.join(","))))
        }
        _ => Ok((oa, name)),
    }
}

fn coding_for(req: &AnalysisRequest, oa: &OrthogonalArray) -> Result<Coding, Failure> {
    if req.coding == Scheme::Dummy && req.command != Command::Cancor {
        return Err(Failure::input(
            "dummy coding is not orthogonal and is only available for `cancor`",
        ));
    }
    if req.coding == Scheme::Custom {
        return Err(Failure::input(
            "custom coding is only available through the library",
        ));
    }
    Coding::uniform(oa.levels(), req.coding).map_err(from_error)
}

/// Adds the resolution summary; a missing `R`-factor projection becomes a
/// diagnostic rather than a failure.
fn add_summary(report: &mut Report, oa: &OrthogonalArray, coding: &Coding) -> Result<(), Failure> {
    match summarize_with(oa, coding) {
        Ok(s) => {
            report.set_summary(s);
            Ok(())
        }
        Err(Error::NoProjection {
            resolution,
            factors,
        }) => {
            report.diagnostics.push(format!(
                "resolution > {factors} (strength {}): no {resolution}-factor projection exists, GR values are undefined",
                resolution - 1
            ));
            Ok(())
        }
        Err(e) => Err(from_error(e)),
    }
}

fn add_verify(report: &mut Report, oa: &OrthogonalArray) -> Result<(), Failure> {
    report.verify = Some(VerifyBlock::new(verify(oa).map_err(from_error)?));
    Ok(())
}

pub fn run(req: &AnalysisRequest) -> Result<Outcome, Failure> {
    if req.command == Command::Bound {
        return run_bound(req);
    }
    let (oa, name) = design(req)?;
    let coding = coding_for(req, &oa)?;
    let mut report = Report::for_design(&oa, Some(name));

    match req.command {
        Command::Analyze | Command::Gwlp => {
            let max_k = req.max_k.unwrap_or(oa.factors().min(5));
            report.gwlp = Some(gwlp_with(&oa, max_k, &coding).map_err(from_error)?);
            if req.command == Command::Analyze {
                add_summary(&mut report, &oa, &coding)?;
                if req.verify {
                    add_verify(&mut report, &oa)?;
                }
            }
        }
        Command::Gr => add_summary(&mut report, &oa, &coding)?,
        Command::Strength => {}
        Command::Balance => {
            let t = match req.t {
                Some(t) => t,
                None => (report.design.as_ref().map_or(0, |d| d.strength) + 1).min(oa.factors()),
            };
            report.set_balance(max_t_balance(&oa, t).map_err(from_error)?);
        }
        Command::Cancor => report.cancor = Some(cancor_block(req, &oa, &coding)?),
        Command::Verify => add_verify(&mut report, &oa)?,
        Command::Bound => unreachable!("handled above"),
    }

    let status = if report.verify_failed() {
        EXIT_VERIFY
    } else {
        EXIT_OK
    };
    Ok(Outcome { report, status })
}

fn cancor_block(
    req: &AnalysisRequest,
    oa: &OrthogonalArray,
    coding: &Coding,
) -> Result<CancorBlock, Failure> {
    let factor = req
        .factor
        .ok_or_else(|| Failure::input("cancor needs --factor"))?;
    let c = zero_based(&[factor], oa.factors())?[0];
    let others: Vec<usize> = match &req.subset {
        Some(cols) => zero_based(cols, oa.factors())?,
        None => (0..oa.factors()).collect(),
    }
    .into_iter()
    .filter(|&u| u != c)
    .collect();
    if others.is_empty() {
        return Err(Failure::input("cancor needs at least one other factor"));
    }
    let y = main_effect_matrix(oa, c, coding.set(c)).map_err(from_error)?;
    let x = full_model_matrix(oa, &others, coding, false).map_err(from_error)?;
    let cc = canonical_correlations(&y, &x).map_err(from_error)?;
    let r2 = regression_r2(&y.values, &x.values).map_err(from_error)?;
    Ok(CancorBlock::new(
        c,
        &others,
        req.coding,
        cc,
        r2,
        is_orthogonal_contrast_matrix(&y.values),
    ))
}

/// `bound` works from `--N --s --R`, from an input file, or from both (the
/// flags then override what the file implies).
fn run_bound(req: &AnalysisRequest) -> Result<Outcome, Failure> {
    let loaded = match &req.input {
        Some(_) => Some(design(req)?),
        None => None,
    };
    let mut report = match &loaded {
        Some((oa, name)) => Report::for_design(oa, Some(name.clone())),
        None => Report::default(),
    };
    let oa = loaded.as_ref().map(|(oa, _)| oa);

    let runs = req.runs.or(oa.map(|o| o.runs()));
    let s = req
        .s
        .or(oa.and_then(|o| o.is_symmetric().then(|| o.level_count(0))));
    let r = match (req.resolution, oa) {
        (Some(r), _) => Some(r),
        (None, Some(o)) => Some(resolution(o).map_err(from_error)?),
        (None, None) => None,
    };
    let (Some(runs), Some(s), Some(r)) = (runs, s, r) else {
        return Err(Failure::input(
            "bound needs --N, --s and --R, or a symmetric input array",
        ));
    };
    let bound = gr_upper_bound(runs, s, r, oa).map_err(from_error)?;
    report.bounds = Some(Bounds {
        parameters: Some(BoundParameters {
            runs,
            s,
            resolution: r,
        }),
        gr_upper: Some(bound),
        max_gr_in_class: None,
    });
    Ok(Outcome {
        report,
        status: EXIT_OK,
    })
}
