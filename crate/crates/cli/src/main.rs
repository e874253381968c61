use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use genres::Scheme;
use genres_cli::{run, AnalysisRequest, Command, Format};

/// Generalized word length patterns and generalized resolution of
/// orthogonal arrays.
///
/// Input files hold one run per line, levels coded 0..s-1, separated by
/// whitespace or commas. Lines starting with `#` are comments; a
/// `# levels: 2 3 3` line declares level counts.
#[derive(Parser)]
#[command(name = "genres", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// GWLP, GR, GR_ind, GR_tot, per-factor values, projections and bounds.
    Analyze {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        max_k: Option<usize>,
        /// Also compare against the oracle implementations.
        #[arg(long)]
        verify: bool,
    },
    /// Generalized word length pattern A_0..A_max_k.
    Gwlp {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        max_k: Option<usize>,
    },
    /// GR, GR_ind, GR_tot and per-factor values.
    Gr {
        #[command(flatten)]
        common: Common,
    },
    /// Strength of the array.
    Strength {
        #[command(flatten)]
        common: Common,
    },
    /// Maximum t-balance and weak strength.
    Balance {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        t: Option<usize>,
    },
    /// Upper bound on GR for a symmetric array.
    Bound {
        #[command(flatten)]
        common: Common,
        #[arg(long = "N")]
        runs: Option<usize>,
        #[arg(long)]
        s: Option<usize>,
        #[arg(long = "R")]
        resolution: Option<usize>,
    },
    /// Canonical correlations and R² of one factor against the full model of
    /// the others (or of --subset).
    Cancor {
        #[command(flatten)]
        common: Common,
        /// Factor used as Y (numbered from 1).
        #[arg(long)]
        factor: usize,
    },
    /// Compare the main computations with independent oracles.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    /// Array file.
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = CodingArg::Polynomial)]
    coding: CodingArg,
    /// Level counts, overriding the file header.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<usize>>,
    /// Columns to use, numbered from 1 (comma separated).
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value_t = FormatArg::Text)]
    format: FormatArg,
    /// Decimals in text output.
    #[arg(long, default_value_t = 2)]
    precision: usize,
}

#[derive(Clone, Copy, ValueEnum)]
enum CodingArg {
    Polynomial,
    Helmert,
    Dummy,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Text,
    Json,
}

fn request(cmd: Cmd) -> AnalysisRequest {
    let (command, common) = match &cmd {
        Cmd::Analyze { common, .. } => (Command::Analyze, common),
        Cmd::Gwlp { common, .. } => (Command::Gwlp, common),
        Cmd::Gr { common } => (Command::Gr, common),
        Cmd::Strength { common } => (Command::Strength, common),
        Cmd::Balance { common, .. } => (Command::Balance, common),
        Cmd::Bound { common, .. } => (Command::Bound, common),
        Cmd::Cancor { common, .. } => (Command::Cancor, common),
        Cmd::Verify { common } => (Command::Verify, common),
    };
    let mut req = AnalysisRequest::new(command, common.input.clone());
    req.coding = match common.coding {
        CodingArg::Polynomial => Scheme::Polynomial,
        CodingArg::Helmert => Scheme::Helmert,
        CodingArg::Dummy => Scheme::Dummy,
    };
    req.levels = common.levels.clone();
    req.subset = common.subset.clone();
    req.format = match common.format {
        FormatArg::Text => Format::Text,
        FormatArg::Json => Format::Json,
    };
    req.precision = common.precision;
    match cmd {
        Cmd::Analyze { max_k, verify, .. } => {
            req.max_k = max_k;
            req.verify = verify;
        }
        Cmd::Gwlp { max_k, .. } => req.max_k = max_k,
        Cmd::Balance { t, .. } => req.t = t,
        Cmd::Bound {
            runs,
            s,
            resolution,
            ..
        } => {
            req.runs = runs;
            req.s = s;
            req.resolution = resolution;
        }
        Cmd::Cancor { factor, .. } => req.factor = Some(factor),
        _ => {}
    }
    req
}

fn main() -> ExitCode {
    let req = request(Cli::parse().command);
    match run(&req) {
        Ok(outcome) => {
            print!("{}", outcome.render(req.format, req.precision));
            ExitCode::from(outcome.status as u8)
        }
        Err(failure) => {
            eprintln!("error: {failure}");
            ExitCode::from(failure.status as u8)
        }
    }
}
