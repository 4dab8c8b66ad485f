use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use histoftree::harness::experiment::{MaskSpec, RuleSpec};
use histoftree::harness::ingest::LabelColumn;
use histoftree::harness::simulation::Figure;
use histoftree::harness::synthetic::LogBase;
use histoftree::mechanisms::IndicatorMechanism;
use histoftree::partition::SplitRule;

#[derive(Debug, Parser)]
#[command(
    name = "histoftree",
    version,
    about = "Regression under semi-feature local differential privacy"
)]
pub struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "HISTOFTREE_THREADS", value_parser = clap::value_parser!(usize))]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one of the synthetic studies and write its table.
    Simulate(SimulateArgs),
    /// Run every method's grid on a CSV dataset or a config file.
    Bench(BenchArgs),
    /// Choose s, p and t for a privacy mask.
    SelectParams(SelectArgs),
    /// Enumerate a mechanism's likelihood ratios.
    Audit(AuditArgs),
    /// Fit a HistOfTree model on a CSV dataset.
    Fit(FitArgs),
    /// Predict with a fitted model.
    Predict(PredictArgs),
    /// Reshape study tables into long format for plotting.
    FiguresData(FiguresArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FigArg {
    TradeOff,
    Consistency,
    Parameter,
    SelectS,
}

impl From<FigArg> for Figure {
    fn from(f: FigArg) -> Self {
        match f {
            FigArg::TradeOff => Figure::TradeOff,
            FigArg::Consistency => Figure::Consistency,
            FigArg::Parameter => Figure::Parameter,
            FigArg::SelectS => Figure::SelectS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    MaxEdge,
    Cart,
    Random,
}

impl From<RuleArg> for RuleSpec {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::MaxEdge => RuleSpec::MaxEdge,
            RuleArg::Cart => RuleSpec::Cart,
            RuleArg::Random => RuleSpec::Random,
        }
    }
}

impl RuleArg {
    pub fn split_rule(self, min_leaf: usize, seed: u64) -> SplitRule {
        match self {
            RuleArg::MaxEdge => SplitRule::MaxEdge,
            RuleArg::Cart => SplitRule::Cart { min_leaf },
            RuleArg::Random => SplitRule::MaxEdgeRandom { seed },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MechanismArg {
    PairedRr,
    GeneralizedRr,
}

impl From<MechanismArg> for IndicatorMechanism {
    fn from(m: MechanismArg) -> Self {
        match m {
            MechanismArg::PairedRr => IndicatorMechanism::PairedRr,
            MechanismArg::GeneralizedRr => IndicatorMechanism::GeneralizedRr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LogBaseArg {
    Natural,
    Two,
}

impl From<LogBaseArg> for LogBase {
    fn from(b: LogBaseArg) -> Self {
        match b {
            LogBaseArg::Natural => LogBase::Natural,
            LogBaseArg::Two => LogBase::Two,
        }
    }
}

fn positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        Ok(v) => Err(format!("must be a positive number, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

fn fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        Ok(v) => Err(format!("must lie strictly between 0 and 1, got {v}")),
        Err(e) => Err(e.to_string()),
    }
}

/// Label column by header name or by 0-based position.
#[derive(Debug, Args)]
#[group(required = false, multiple = false)]
pub struct LabelArgs {
    /// Header name of the label column.
    #[arg(long)]
    pub label: Option<String>,
    /// 0-based position of the label column.
    #[arg(long)]
    pub label_index: Option<usize>,
}

impl LabelArgs {
    pub fn column(&self) -> Option<LabelColumn> {
        match (&self.label, self.label_index) {
            (Some(n), _) => Some(LabelColumn::Name(n.clone())),
            (None, Some(i)) => Some(LabelColumn::Index(i)),
            (None, None) => None,
        }
    }
}

/// Which features each user keeps private. Without any flag every feature is public.
#[derive(Debug, Args)]
pub struct MaskArgs {
    /// Aligned mask: the first s* features are private for everyone.
    #[arg(long = "sstar", conflicts_with_all = ["gamma", "realdata", "mask_file"])]
    pub s_star: Option<usize>,
    /// Personalized mask: user i keeps feature l private iff i <= n / l^gamma (1-based).
    #[arg(long, conflicts_with_all = ["realdata", "mask_file"])]
    pub gamma: Option<f64>,
    /// Personalized mask with ten-fold thinning every s* features; s* = ceil(log sqrt d).
    #[arg(long, conflicts_with = "mask_file")]
    pub realdata: bool,
    /// Base of the logarithm in the realdata s*.
    #[arg(long, value_enum, default_value = "natural")]
    pub log_base: LogBaseArg,
    /// 0/1 CSV with a header row, one row per user (1 = private).
    #[arg(long)]
    pub mask_file: Option<PathBuf>,
}

impl MaskArgs {
    pub fn spec(&self) -> Option<MaskSpec> {
        if let Some(s_star) = self.s_star {
            Some(MaskSpec::Aligned { s_star })
        } else if let Some(gamma) = self.gamma {
            Some(MaskSpec::Gamma { gamma })
        } else if self.realdata {
            Some(MaskSpec::Realdata {
                s_star: None,
                log_base: self.log_base.into(),
            })
        } else if self.mask_file.is_some() {
            None
        } else {
            Some(MaskSpec::Public)
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub fig: FigArg,
    /// Sample size.
    #[arg(long)]
    pub n: Option<usize>,
    /// Sample sizes of the consistency study.
    #[arg(long, value_delimiter = ',')]
    pub ns: Vec<usize>,
    /// Privacy budgets.
    #[arg(long, value_delimiter = ',', value_parser = positive)]
    pub eps: Vec<f64>,
    /// Numbers of aligned private features.
    #[arg(long = "sstar", value_delimiter = ',', conflicts_with = "gamma")]
    pub s_star: Vec<usize>,
    /// Tail exponents of the personalized mask.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    /// Fixed histogram dimensions compared against the adaptive choice.
    #[arg(long, value_delimiter = ',')]
    pub s: Vec<usize>,
    /// Tree depths.
    #[arg(long, value_delimiter = ',')]
    pub p: Vec<usize>,
    /// Histogram bins per private axis.
    #[arg(long, value_delimiter = ',')]
    pub t: Vec<usize>,
    /// Share of the budget spent on labels.
    #[arg(long, value_delimiter = ',', value_parser = fraction)]
    pub rho: Vec<f64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    pub rule: Vec<RuleArg>,
    #[arg(long, value_enum)]
    pub mechanism: Option<MechanismArg>,
    /// Replications.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: Option<u64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Experiment config file (TOML); replaces the dataset and grid flags.
    #[arg(long, conflicts_with_all = ["csv", "label", "label_index", "s_star", "gamma", "realdata", "mask_file"])]
    pub config: Option<PathBuf>,
    /// Dataset with a header row.
    #[arg(long, required_unless_present = "config")]
    pub csv: Option<PathBuf>,
    #[command(flatten)]
    pub label: LabelArgs,
    #[command(flatten)]
    pub mask: MaskArgs,
    #[arg(long, value_delimiter = ',', value_parser = positive, default_value = "2")]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 50, value_parser = clap::value_parser!(u64).range(1..))]
    pub reps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.2, value_parser = fraction)]
    pub test_fraction: f64,
    /// Record wall-clock seconds per grid point.
    #[arg(long)]
    pub timing: bool,
    /// Results CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Aggregate JSON; stdout when absent.
    #[arg(long)]
    pub aggregate: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Users, for generated masks.
    #[arg(long)]
    pub n: Option<usize>,
    /// Features, for generated masks.
    #[arg(long)]
    pub d: Option<usize>,
    #[command(flatten)]
    pub mask: MaskArgs,
    #[arg(long, value_parser = positive)]
    pub eps: f64,
    /// Weight of the approximation term.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub c_approx: f64,
    /// Smoothness exponent in (0, 1].
    #[arg(long, default_value_t = 1.0)]
    pub alpha: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AuditMechanism {
    PairedRr,
    GeneralizedRr,
    Laplace,
}

#[derive(Debug, Args)]
pub struct AuditArgs {
    #[arg(long, value_enum)]
    pub mechanism: AuditMechanism,
    /// Parameter of the audited channel.
    #[arg(long, value_parser = positive)]
    pub eps: f64,
    /// Potential grids (paired-rr) or support size (generalized-rr).
    #[arg(long, default_value_t = 2)]
    pub grids: usize,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub csv: PathBuf,
    #[command(flatten)]
    pub label: LabelArgs,
    #[command(flatten)]
    pub mask: MaskArgs,
    #[arg(long, value_parser = positive)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.5, value_parser = fraction)]
    pub rho: f64,
    /// Bins per private axis.
    #[arg(long, default_value_t = 2)]
    pub t: usize,
    /// Tree depth.
    #[arg(long, default_value_t = 2)]
    pub p: usize,
    /// Histogram on the s most private features (personalized masks).
    #[arg(long)]
    pub s: Option<usize>,
    #[arg(long, value_enum, default_value = "max-edge")]
    pub rule: RuleArg,
    /// Minimum usable samples per child for the cart rule.
    #[arg(long, default_value_t = 50)]
    pub min_leaf: usize,
    #[arg(long, value_enum, default_value = "generalized-rr")]
    pub mechanism: MechanismArg,
    /// Select s, p and t from the mask instead of --s, --p and --t.
    #[arg(long, conflicts_with_all = ["s"])]
    pub adaptive: bool,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub c_approx: f64,
    #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
    pub t_offset: i64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model JSON.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Feature CSV with a header row.
    #[arg(long)]
    pub csv: PathBuf,
    /// Column to drop before predicting.
    #[command(flatten)]
    pub label: LabelArgs,
    /// Min-max scale each feature column to [0,1] first, as fitting does.
    #[arg(long)]
    pub scale: bool,
    /// Output CSV; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FiguresArgs {
    /// Study tables or earlier long-format output.
    #[arg(long = "in", required = true, num_args = 1..)]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub fig: FigArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}
