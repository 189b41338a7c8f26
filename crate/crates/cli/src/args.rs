use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rmcst::sim::{CensoringVariant, OutcomeVariant, TruthMethod};
use rmcst::WeightScheme;

use crate::output::Format;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(name = "rmcst", version, about = "Restricted mean counterfactual survival time estimation and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads [default: all cores]
    #[arg(long, global = true, env = "RMCST_THREADS")]
    pub threads: Option<usize>,

    /// Write the artifact here instead of stdout
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,

    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate restricted mean differences on a dataset
    Estimate(EstimateArgs),
    /// Run a Monte Carlo study of the simulation design
    Simulate(SimulateArgs),
    /// Compute true estimand values on a simulated super-population
    Truth(TruthArgs),
    /// Regenerate one of the published simulation tables
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SchemeArgs {
    /// Weighting scheme: ow, iptw, symtrim, asymtrim, truncate, a
    /// parameterized form such as symtrim:0.1, or `grid` for the full grid
    #[arg(long = "scheme", value_delimiter = ',')]
    pub schemes: Vec<String>,

    /// Threshold for a bare `symtrim` [default: 0.1]
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Quantile for a bare `asymtrim` [default: 0.01] or `truncate` [default: 0.05]
    #[arg(long)]
    pub q: Option<f64>,

    /// Keep the full-sample propensity model after trimming
    #[arg(long)]
    pub no_refit: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VarianceArg {
    Closed,
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutcomeArg {
    WithPs,
    WithoutPs,
}

impl From<OutcomeArg> for OutcomeVariant {
    fn from(v: OutcomeArg) -> Self {
        match v {
            OutcomeArg::WithPs => OutcomeVariant::WithPsTerm,
            OutcomeArg::WithoutPs => OutcomeVariant::WithoutPsTerm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CensoringArg {
    Cox,
    Misspec,
}

impl From<CensoringArg> for CensoringVariant {
    fn from(v: CensoringArg) -> Self {
        match v {
            CensoringArg::Cox => CensoringVariant::CorrectCox,
            CensoringArg::Misspec => CensoringVariant::misspecified(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TruthArg {
    /// Closed-form conditional restricted means
    Conditional,
    /// Sampled counterfactual times
    Sampled,
}

impl From<TruthArg> for TruthMethod {
    fn from(v: TruthArg) -> Self {
        match v {
            TruthArg::Conditional => TruthMethod::ConditionalMean,
            TruthArg::Sampled => TruthMethod::Sampled,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    #[arg(long)]
    pub input: PathBuf,

    #[command(flatten)]
    pub schemes: SchemeArgs,

    /// Restriction times
    #[arg(long = "L", value_delimiter = ',', required = true)]
    pub l: Vec<f64>,

    #[arg(long, value_enum, default_value_t = VarianceArg::Closed)]
    pub variance: VarianceArg,

    /// Bootstrap replicates
    #[arg(long = "B", default_value_t = 200)]
    pub b: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,

    #[arg(long, default_value = "treat")]
    pub treat_col: String,

    #[arg(long, default_value = "time")]
    pub time_col: String,

    #[arg(long, default_value = "event")]
    pub event_col: String,

    /// Covariate columns [default: every other column]
    #[arg(long, value_delimiter = ',')]
    pub covariates: Option<Vec<String>>,

    /// Also emit the fitted counterfactual survival curves
    #[arg(long)]
    pub curves: bool,
}

#[derive(Debug, Clone, Args)]
pub struct DesignArgs {
    #[arg(long, value_enum, default_value_t = OutcomeArg::WithPs)]
    pub outcome_variant: OutcomeArg,

    #[arg(long, value_enum, default_value_t = CensoringArg::Cox)]
    pub censoring_variant: CensoringArg,

    #[arg(long, value_enum, default_value_t = TruthArg::Conditional)]
    pub truth_method: TruthArg,

    /// Super-population size for true values
    #[arg(long = "super-n", default_value_t = 1_000_000)]
    pub super_n: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,

    #[arg(long, default_value_t = 1000)]
    pub n: usize,

    #[arg(long, default_value_t = 1000)]
    pub reps: usize,

    #[arg(long = "L", value_delimiter = ',', default_value = "2,5,10")]
    pub l: Vec<f64>,

    #[command(flatten)]
    pub schemes: SchemeArgs,

    #[arg(long, value_enum, default_value_t = VarianceArg::Closed)]
    pub variance: VarianceArg,

    #[arg(long = "B", default_value_t = 200)]
    pub b: usize,

    #[command(flatten)]
    pub design: DesignArgs,
}

#[derive(Debug, Clone, Args)]
pub struct TruthArgs {
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    pub gamma: Vec<f64>,

    #[arg(long = "L", value_delimiter = ',', default_value = "2,5,10")]
    pub l: Vec<f64>,

    #[command(flatten)]
    pub schemes: SchemeArgs,

    #[command(flatten)]
    pub design: DesignArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReproduceArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
    pub table: u8,

    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    pub gamma: Vec<f64>,

    #[arg(long, default_value_t = 1000)]
    pub reps: usize,

    /// Sample size [default: 1000, or 250 for table 5]
    #[arg(long)]
    pub n: Option<usize>,

    /// Bootstrap replicates for table 5
    #[arg(long = "B", default_value_t = 200)]
    pub b: usize,

    #[arg(long = "super-n", default_value_t = 1_000_000)]
    pub super_n: usize,

    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

/// Resolves `--scheme`/`--alpha`/`--q` into validated schemes.
pub fn resolve_schemes(args: &SchemeArgs, default: &[WeightScheme]) -> Result<Vec<WeightScheme>, CliError> {
    let check = |name: &str, v: Option<f64>| match v {
        Some(x) if !(0.0..0.5).contains(&x) => Err(CliError::Usage(format!("--{name} must lie in [0, 0.5), got {x}"))),
        _ => Ok(()),
    };
    check("alpha", args.alpha)?;
    check("q", args.q)?;
    if args.schemes.is_empty() {
        return Ok(default.to_vec());
    }
    let mut out = Vec::new();
    for s in &args.schemes {
        let s = s.trim().to_ascii_lowercase();
        let parsed = match s.as_str() {
            "grid" => {
                out.extend(WeightScheme::default_grid());
                continue;
            }
            "symtrim" => WeightScheme::SymmetricTrim { alpha: args.alpha.unwrap_or(0.1) },
            "asymtrim" => WeightScheme::AsymmetricTrim { q: args.q.unwrap_or(0.01) },
            "truncate" => WeightScheme::Truncate { q: args.q.unwrap_or(0.05) },
            other => other.parse().map_err(|e| CliError::Usage(format!("{e}")))?,
        };
        out.push(parsed);
    }
    let mut seen = Vec::new();
    out.retain(|s| {
        let new = !seen.contains(s);
        seen.push(*s);
        new
    });
    Ok(out)
}

pub fn check_ls(ls: &[f64]) -> Result<(), CliError> {
    if ls.is_empty() {
        return Err(CliError::Usage("--L needs at least one restriction time".into()));
    }
    match ls.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        Some(l) => Err(CliError::Usage(format!("restriction times must be positive, got {l}"))),
        None => Ok(()),
    }
}

pub fn check_gamma(g: &[f64]) -> Result<(), CliError> {
    match g.iter().find(|g| !(g.is_finite() && **g > 0.0)) {
        Some(g) => Err(CliError::Usage(format!("--gamma must be positive, got {g}"))),
        None if g.is_empty() => Err(CliError::Usage("--gamma needs at least one value".into())),
        None => Ok(()),
    }
}
