//! Declarative experiments: data, masks, methods with parameter grids, and
//! replicated train/test evaluation.
//!
//! Every replication owns a seed derived from the experiment seed and its
//! index, and every method inside it owns a seed derived from the replication
//! seed, the budget index and the method index. All grid points of a method
//! share that seed, so they are compared on common random numbers. Rows are
//! keyed and sorted before output, which makes the table independent of the
//! thread count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fit_cart_on, fit_private_histogram, noisy_labels, privatize_krr};
use crate::data::{Dataset, MaskMatrix};
use crate::error::{Error, Result};
use crate::estimators::{
    rank_private_axes, select_parameters, HistOfTreeFitter, PrivacySetting, RateParams,
};
use crate::harness::ingest::{ingest_csv, BoundPolicy, LabelColumn};
use crate::harness::stats::{
    mean, median, mse, rank_sum_summary, wilcoxon_signed_rank, WilcoxonResult,
};
use crate::harness::synthetic::{
    gen_mask_aligned, gen_mask_gamma, gen_mask_realdata, gen_synthetic, realdata_s_star, LogBase,
};
use crate::mechanisms::{IndicatorMechanism, PrivacyBudget, Privatizer};
use crate::partition::SplitRule;
use crate::rng::{derive_seed, substream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSpec {
    Synthetic {
        n: usize,
    },
    Csv {
        path: PathBuf,
        label: LabelColumn,
        #[serde(default)]
        bound: BoundPolicy,
    },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MaskSpec {
    /// Every feature public: label-only privacy.
    #[default]
    Public,
    Aligned {
        s_star: usize,
    },
    Gamma {
        gamma: f64,
    },
    Realdata {
        #[serde(default)]
        s_star: Option<usize>,
        #[serde(default)]
        log_base: LogBase,
    },
}

impl MaskSpec {
    pub fn generate(&self, n: usize, d: usize) -> Result<MaskMatrix> {
        match *self {
            MaskSpec::Public => Ok(MaskMatrix::zeros(n, d)),
            MaskSpec::Aligned { s_star } if s_star <= d => Ok(gen_mask_aligned(n, d, s_star)),
            MaskSpec::Aligned { s_star } => Err(Error::Parameter(format!(
                "s_star = {s_star} exceeds d = {d}"
            ))),
            MaskSpec::Gamma { gamma } if gamma >= 0.0 => Ok(gen_mask_gamma(n, d, gamma)),
            MaskSpec::Gamma { gamma } => Err(Error::Parameter(format!(
                "gamma must be non-negative, got {gamma}"
            ))),
            MaskSpec::Realdata { s_star, log_base } => {
                gen_mask_realdata(n, d, s_star.unwrap_or_else(|| realdata_s_star(d, log_base)))
            }
        }
    }
}

/// Tree-growing rule named in configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleSpec {
    MaxEdge,
    Cart,
    Random,
}

impl RuleSpec {
    fn name(self) -> &'static str {
        match self {
            RuleSpec::MaxEdge => "max-edge",
            RuleSpec::Cart => "cart",
            RuleSpec::Random => "random",
        }
    }

    fn to_rule(self, min_leaf: usize, seed: u64) -> SplitRule {
        match self {
            RuleSpec::MaxEdge => SplitRule::MaxEdge,
            RuleSpec::Cart => SplitRule::Cart { min_leaf },
            RuleSpec::Random => SplitRule::MaxEdgeRandom {
                seed: derive_seed(seed, 7),
            },
        }
    }
}

fn depths() -> Vec<usize> {
    vec![1, 2, 4, 6, 8]
}
fn leaves() -> Vec<usize> {
    vec![1, 10, 100]
}
fn krr_k() -> Vec<usize> {
    vec![2, 3, 4, 5]
}
fn hist_t() -> Vec<usize> {
    vec![1, 2, 3, 4]
}
fn zetas() -> Vec<f64> {
    vec![0.01, 0.05]
}
fn rhos() -> Vec<f64> {
    vec![0.5, 0.7, 0.9]
}
fn tree_depths() -> Vec<usize> {
    vec![1, 2, 4, 6]
}
fn bins() -> Vec<usize> {
    vec![1, 2, 3]
}
fn rules() -> Vec<RuleSpec> {
    vec![RuleSpec::MaxEdge]
}
fn grr() -> IndicatorMechanism {
    IndicatorMechanism::GeneralizedRr
}
fn cart_leaf() -> usize {
    50
}
fn c_approx() -> Vec<f64> {
    vec![0.01, 0.1, 1.0]
}
fn t_offsets() -> Vec<i64> {
    vec![-1, 0, 1]
}

/// A method and its parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum MethodSpec {
    /// Non-private tree on all features.
    Dt {
        #[serde(default = "depths")]
        max_depth: Vec<usize>,
        #[serde(default = "leaves")]
        min_leaf: Vec<usize>,
    },
    LabelDt {
        #[serde(default = "depths")]
        max_depth: Vec<usize>,
        #[serde(default = "leaves")]
        min_leaf: Vec<usize>,
    },
    ParDt {
        #[serde(default = "depths")]
        max_depth: Vec<usize>,
        #[serde(default = "leaves")]
        min_leaf: Vec<usize>,
    },
    Krr {
        #[serde(default = "krr_k")]
        k: Vec<usize>,
        #[serde(default = "depths")]
        max_depth: Vec<usize>,
        #[serde(default = "leaves")]
        min_leaf: Vec<usize>,
    },
    Hist {
        #[serde(default = "hist_t")]
        t: Vec<usize>,
        #[serde(default = "zetas")]
        zeta: Vec<f64>,
    },
    HistOfTree {
        #[serde(default = "rhos")]
        rho: Vec<f64>,
        /// Histogram on the `s` most private axes; absent means the aligned private block.
        #[serde(default)]
        s: Option<Vec<usize>>,
        #[serde(default = "rules")]
        rule: Vec<RuleSpec>,
        #[serde(default = "tree_depths")]
        p: Vec<usize>,
        #[serde(default = "bins")]
        t: Vec<usize>,
        #[serde(default = "grr")]
        mechanism: IndicatorMechanism,
        #[serde(default = "cart_leaf")]
        cart_min_leaf: usize,
    },
    AdHistOfTree {
        #[serde(default = "rhos")]
        rho: Vec<f64>,
        #[serde(default = "c_approx")]
        c_approx: Vec<f64>,
        #[serde(default = "t_offsets")]
        t_offset: Vec<i64>,
        #[serde(default = "rules")]
        rule: Vec<RuleSpec>,
        #[serde(default = "grr")]
        mechanism: IndicatorMechanism,
        #[serde(default = "cart_leaf")]
        cart_min_leaf: usize,
    },
}

impl MethodSpec {
    pub fn default_name(&self) -> &'static str {
        match self {
            MethodSpec::Dt { .. } => "DT",
            MethodSpec::LabelDt { .. } => "LabelDT",
            MethodSpec::ParDt { .. } => "ParDT",
            MethodSpec::Krr { .. } => "KRR",
            MethodSpec::Hist { .. } => "Hist",
            MethodSpec::HistOfTree { .. } => "HistOfTree",
            MethodSpec::AdHistOfTree { .. } => "AdHistOfTree",
        }
    }

    /// Default grids for every method.
    pub fn all_defaults() -> Vec<MethodSpec> {
        vec![
            MethodSpec::Dt {
                max_depth: depths(),
                min_leaf: leaves(),
            },
            MethodSpec::LabelDt {
                max_depth: depths(),
                min_leaf: leaves(),
            },
            MethodSpec::ParDt {
                max_depth: depths(),
                min_leaf: leaves(),
            },
            MethodSpec::Krr {
                k: krr_k(),
                max_depth: depths(),
                min_leaf: leaves(),
            },
            MethodSpec::Hist {
                t: hist_t(),
                zeta: zetas(),
            },
            MethodSpec::hist_of_tree_default(),
            MethodSpec::AdHistOfTree {
                rho: rhos(),
                c_approx: c_approx(),
                t_offset: t_offsets(),
                rule: rules(),
                mechanism: grr(),
                cart_min_leaf: cart_leaf(),
            },
        ]
    }

    pub fn hist_of_tree_default() -> MethodSpec {
        MethodSpec::HistOfTree {
            rho: rhos(),
            s: None,
            rule: rules(),
            p: tree_depths(),
            t: bins(),
            mechanism: grr(),
            cart_min_leaf: cart_leaf(),
        }
    }

    fn check(&self) -> Result<()> {
        let empty = match self {
            MethodSpec::Dt {
                max_depth,
                min_leaf,
            }
            | MethodSpec::LabelDt {
                max_depth,
                min_leaf,
            }
            | MethodSpec::ParDt {
                max_depth,
                min_leaf,
            } => max_depth.is_empty() || min_leaf.is_empty(),
            MethodSpec::Krr {
                k,
                max_depth,
                min_leaf,
            } => k.is_empty() || max_depth.is_empty() || min_leaf.is_empty(),
            MethodSpec::Hist { t, zeta } => t.is_empty() || zeta.is_empty(),
            MethodSpec::HistOfTree {
                rho, s, rule, p, t, ..
            } => {
                rho.is_empty()
                    || rule.is_empty()
                    || p.is_empty()
                    || t.is_empty()
                    || s.as_ref().is_some_and(Vec::is_empty)
            }
            MethodSpec::AdHistOfTree {
                rho,
                c_approx,
                t_offset,
                rule,
                ..
            } => rho.is_empty() || c_approx.is_empty() || t_offset.is_empty() || rule.is_empty(),
        };
        if empty {
            return Err(Error::Config(format!(
                "{} has an empty parameter grid",
                self.default_name()
            )));
        }
        Ok(())
    }

    /// Parameter labels in evaluation order.
    pub fn point_labels(&self) -> Vec<String> {
        let tree = |md: &[usize], ml: &[usize], prefix: &str| -> Vec<String> {
            ml.iter()
                .flat_map(|l| {
                    md.iter()
                        .map(move |d| format!("{prefix}max_depth={d};min_leaf={l}"))
                })
                .collect()
        };
        match self {
            MethodSpec::Dt {
                max_depth,
                min_leaf,
            }
            | MethodSpec::LabelDt {
                max_depth,
                min_leaf,
            }
            | MethodSpec::ParDt {
                max_depth,
                min_leaf,
            } => tree(max_depth, min_leaf, ""),
            MethodSpec::Krr {
                k,
                max_depth,
                min_leaf,
            } => k
                .iter()
                .flat_map(|k| tree(max_depth, min_leaf, &format!("k={k};")))
                .collect(),
            MethodSpec::Hist { t, zeta } => t
                .iter()
                .flat_map(|t| zeta.iter().map(move |z| format!("t={t};zeta={z}")))
                .collect(),
            MethodSpec::HistOfTree {
                rho, s, rule, p, t, ..
            } => {
                let ss: Vec<Option<usize>> = s
                    .as_ref()
                    .map_or(vec![None], |v| v.iter().copied().map(Some).collect());
                let mut out = Vec::new();
                for r in rho {
                    for s in &ss {
                        for rl in rule {
                            for p in p {
                                for t in t {
                                    let s = s.map_or(String::new(), |s| format!("s={s};"));
                                    out.push(format!("rho={r};{s}rule={};p={p};t={t}", rl.name()));
                                }
                            }
                        }
                    }
                }
                out
            }
            MethodSpec::AdHistOfTree {
                rho,
                c_approx,
                t_offset,
                rule,
                ..
            } => {
                let mut out = Vec::new();
                for r in rho {
                    for c in c_approx {
                        for rl in rule {
                            for dt in t_offset {
                                out.push(format!(
                                    "rho={r};c_approx={c};rule={};t_offset={dt}",
                                    rl.name()
                                ));
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

/// A method with an optional display name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub spec: MethodSpec,
}

impl MethodEntry {
    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.spec.default_name().to_string())
    }
}

impl From<MethodSpec> for MethodEntry {
    fn from(spec: MethodSpec) -> Self {
        Self { name: None, spec }
    }
}

fn default_name() -> String {
    "experiment".into()
}
fn default_reps() -> usize {
    50
}
fn default_test_fraction() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    pub data: DataSpec,
    #[serde(default)]
    pub mask: MaskSpec,
    pub epsilons: Vec<f64>,
    pub methods: Vec<MethodEntry>,
    #[serde(default = "default_reps")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Record wall-clock seconds; off by default so tables are reproducible byte for byte.
    #[serde(default)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let c: Self = toml::from_str(s)?;
        c.validate()?;
        Ok(c)
    }

    /// Relative dataset paths resolve against the config file's directory.
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut c = Self::from_toml_str(&s)?;
        if let (DataSpec::Csv { path: data, .. }, Some(dir)) = (&mut c.data, path.parent()) {
            if data.is_relative() {
                *data = dir.join(&*data);
            }
        }
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.epsilons.is_empty() || self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::Config(
                "epsilons must be a non-empty list of positive numbers".into(),
            ));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods configured".into()));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!(
                "test_fraction must lie in (0,1), got {}",
                self.test_fraction
            )));
        }
        if let DataSpec::Synthetic { n } = self.data {
            if n < 2 {
                return Err(Error::Config(
                    "synthetic data needs at least 2 samples".into(),
                ));
            }
        }
        self.methods.iter().try_for_each(|m| m.spec.check())
    }
}

/// One fitted grid point in one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub epsilon: f64,
    pub params: String,
    pub replication: usize,
    pub mse: f64,
    pub seconds: f64,
}

/// Sorted `(train, test)` index sets.
pub fn train_test_split(n: usize, test_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut substream(seed, 0));
    let n_test = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    (train, test)
}

struct Context<'a> {
    train: &'a Dataset,
    test: &'a Dataset,
    mask: &'a MaskMatrix,
    eps: f64,
    seed: u64,
}

impl Context<'_> {
    fn score(&self, predictions: Vec<f64>) -> Result<f64> {
        mse(&predictions, &self.test.y)
    }

    fn aligned_axes(&self) -> Option<Vec<usize>> {
        self.mask.aligned_private_axes()
    }

    fn trees(
        &self,
        x: &crate::data::Matrix,
        y: &[f64],
        cols: &[usize],
        md: &[usize],
        ml: &[usize],
    ) -> Result<Vec<f64>> {
        let deepest = md.iter().copied().max().unwrap_or(0);
        let mut out = Vec::with_capacity(md.len() * ml.len());
        for &l in ml {
            let model = fit_cart_on(x, y, cols, deepest, l)?;
            for &d in md {
                out.push(self.score(model.predict_matrix(&self.test.x, d))?);
            }
        }
        Ok(out)
    }

    fn evaluate(&self, spec: &MethodSpec) -> Result<Vec<f64>> {
        let all: Vec<usize> = (0..self.train.dim()).collect();
        match spec {
            MethodSpec::Dt {
                max_depth,
                min_leaf,
            } => self.trees(&self.train.x, &self.train.y, &all, max_depth, min_leaf),
            MethodSpec::LabelDt {
                max_depth,
                min_leaf,
            } => {
                let y = noisy_labels(self.train, self.eps, self.seed)?;
                self.trees(&self.train.x, &y, &all, max_depth, min_leaf)
            }
            MethodSpec::ParDt {
                max_depth,
                min_leaf,
            } => {
                let public = match self.aligned_axes() {
                    Some(private) => all
                        .iter()
                        .copied()
                        .filter(|a| !private.contains(a))
                        .collect(),
                    None => {
                        select_parameters(self.mask, self.eps, 1.0, RateParams::default())?
                            .public_axes
                    }
                };
                let y = noisy_labels(self.train, self.eps, self.seed)?;
                self.trees(&self.train.x, &y, &public, max_depth, min_leaf)
            }
            MethodSpec::Krr {
                k,
                max_depth,
                min_leaf,
            } => {
                let mut out = Vec::new();
                for &k in k {
                    let (x, y) = privatize_krr(self.train, self.mask, self.eps, k, self.seed)?;
                    out.extend(self.trees(&x, &y, &all, max_depth, min_leaf)?);
                }
                Ok(out)
            }
            MethodSpec::Hist { t, zeta } => {
                let mut out = Vec::new();
                for &t in t {
                    let model = fit_private_histogram(self.train, self.eps, t, zeta[0], self.seed)?;
                    for &z in zeta {
                        let m = model.with_zeta(z);
                        out.push(
                            self.score(
                                (0..self.test.len())
                                    .map(|i| m.predict(self.test.x.row(i)))
                                    .collect(),
                            )?,
                        );
                    }
                }
                Ok(out)
            }
            MethodSpec::HistOfTree {
                rho,
                s,
                rule,
                p,
                t,
                mechanism,
                cart_min_leaf,
            } => {
                let ranked = rank_private_axes(self.mask);
                let settings: Vec<Vec<usize>> = match s {
                    None => vec![self.aligned_axes().ok_or_else(|| {
                        Error::Config(
                            "HistOfTree on a personalized mask needs an explicit s grid".into(),
                        )
                    })?],
                    Some(ss) => ss
                        .iter()
                        .map(|&s| {
                            let mut a = ranked
                                .get(..s)
                                .map(<[usize]>::to_vec)
                                .unwrap_or_else(|| ranked.clone());
                            a.sort_unstable();
                            a
                        })
                        .collect(),
                };
                let personalized = s.is_some();
                let deepest = p.iter().copied().max().unwrap_or(0);
                let mut out = Vec::new();
                for &r in rho {
                    let privatizer = Privatizer::new(
                        PrivacyBudget::new(self.eps, r)?,
                        self.train.bound,
                        *mechanism,
                    );
                    for axes in &settings {
                        let setting = if personalized {
                            PrivacySetting::Personalized {
                                mask: self.mask,
                                private_axes: axes,
                            }
                        } else {
                            PrivacySetting::Aligned { private_axes: axes }
                        };
                        let fitter =
                            HistOfTreeFitter::new(self.train, setting, privatizer, self.seed)?;
                        for rs in rule {
                            let split = rs.to_rule(*cart_min_leaf, self.seed);
                            let full = fitter.grow_tree(deepest, split)?;
                            for &p in p {
                                let tree = full.truncated(p);
                                for &t in t {
                                    let model = fitter
                                        .fit_partition(fitter.partition(t, tree.clone())?, split)?;
                                    out.push(self.score(model.predict_matrix(&self.test.x)?)?);
                                }
                            }
                        }
                    }
                }
                Ok(out)
            }
            MethodSpec::AdHistOfTree {
                rho,
                c_approx,
                t_offset,
                rule,
                mechanism,
                cart_min_leaf,
            } => {
                let mut out = Vec::new();
                for &r in rho {
                    let privatizer = Privatizer::new(
                        PrivacyBudget::new(self.eps, r)?,
                        self.train.bound,
                        *mechanism,
                    );
                    for &c in c_approx {
                        let sel = select_parameters(self.mask, self.eps, c, RateParams::default())?;
                        let setting = PrivacySetting::Personalized {
                            mask: self.mask,
                            private_axes: &sel.private_axes,
                        };
                        let fitter =
                            HistOfTreeFitter::new(self.train, setting, privatizer, self.seed)?;
                        for rs in rule {
                            let split = rs.to_rule(*cart_min_leaf, self.seed);
                            let tree = fitter.grow_tree(sel.p_star, split)?;
                            for &dt in t_offset {
                                let t = (sel.t as i64 + dt).max(1) as usize;
                                let model = fitter
                                    .fit_partition(fitter.partition(t, tree.clone())?, split)?;
                                out.push(self.score(model.predict_matrix(&self.test.x)?)?);
                            }
                        }
                    }
                }
                Ok(out)
            }
        }
    }
}

/// Runs every replication, in parallel, and returns rows sorted by
/// `(method, epsilon, parameter point, replication)` in configuration order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let shared = match &config.data {
        DataSpec::Csv { path, label, bound } => Some(ingest_csv(path, label, *bound)?),
        DataSpec::Synthetic { .. } => None,
    };
    let labels: Vec<Vec<String>> = config
        .methods
        .iter()
        .map(|m| m.spec.point_labels())
        .collect();
    let per_rep: Vec<Result<Vec<Keyed>>> = (0..config.replications)
        .into_par_iter()
        .map(|rep| run_replication(config, shared.as_ref(), &labels, rep))
        .collect();
    let mut keyed = Vec::new();
    for r in per_rep {
        keyed.extend(r?);
    }
    keyed.sort_by_key(|(k, _)| *k);
    Ok(ResultTable {
        rows: keyed.into_iter().map(|(_, r)| r).collect(),
    })
}

type Keyed = ((usize, usize, usize, usize), ResultRow);

/// `(replication, mse)` pairs of one parameter point.
pub type Scores = Vec<(usize, f64)>;

/// `(method, epsilon, params, scores)` of a best parameter point.
pub type BestPoint = (String, f64, String, Scores);

type Group = ((String, f64), Vec<(String, Scores)>);

fn run_replication(
    config: &ExperimentConfig,
    shared: Option<&Dataset>,
    labels: &[Vec<String>],
    rep: usize,
) -> Result<Vec<Keyed>> {
    let rep_seed = derive_seed(config.seed, rep as u64);
    let owned;
    let data = match (&config.data, shared) {
        (_, Some(d)) => d,
        (DataSpec::Synthetic { n }, None) => {
            owned = gen_synthetic(*n, derive_seed(rep_seed, 0))?;
            &owned
        }
        (DataSpec::Csv { .. }, None) => unreachable!("csv data is loaded up front"),
    };
    let (train_idx, test_idx) =
        train_test_split(data.len(), config.test_fraction, derive_seed(rep_seed, 1));
    let train = data.subset(&train_idx);
    let test = data.subset(&test_idx);
    let mask = config.mask.generate(train.len(), train.dim())?;
    let mut rows = Vec::new();
    for (ei, &eps) in config.epsilons.iter().enumerate() {
        let eps_seed = derive_seed(rep_seed, 2 + ei as u64);
        for (mi, method) in config.methods.iter().enumerate() {
            let ctx = Context {
                train: &train,
                test: &test,
                mask: &mask,
                eps,
                seed: derive_seed(eps_seed, mi as u64),
            };
            let start = Instant::now();
            let scores = ctx.evaluate(&method.spec);
            let points = &labels[mi];
            let seconds = if config.timing {
                start.elapsed().as_secs_f64() / points.len() as f64
            } else {
                0.0
            };
            let scores = match scores {
                Ok(s) if s.len() == points.len() => s,
                _ => vec![f64::NAN; points.len()],
            };
            let name = method.label();
            for (pi, (params, mse)) in points.iter().zip(scores).enumerate() {
                rows.push((
                    (mi, ei, pi, rep),
                    ResultRow {
                        method: name.clone(),
                        epsilon: eps,
                        params: params.clone(),
                        replication: rep,
                        mse,
                        seconds,
                    },
                ));
            }
        }
    }
    Ok(rows)
}

/// Best grid point of one method at one budget.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub epsilon: f64,
    pub best_params: String,
    pub mean_mse: f64,
    pub median_mse: f64,
    /// Mean MSE over the mean MSE of the best non-private tree at the same budget.
    pub ratio_vs_dt: Option<f64>,
    pub replications: usize,
    /// Grid points with at least one failed replication.
    pub failed_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub epsilon: f64,
    pub best_method: String,
    pub versus: BTreeMap<String, Option<WilcoxonResult>>,
    /// The best method is significantly better than every other method.
    pub significant_vs_all: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub summaries: Vec<MethodSummary>,
    /// Each budget counts as one dataset.
    pub rank_sums: BTreeMap<String, f64>,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

const HEADER: [&str; 6] = [
    "method",
    "epsilon",
    "params",
    "replication",
    "mse",
    "seconds",
];

impl ResultTable {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.method.clone(),
                r.epsilon.to_string(),
                r.params.clone(),
                r.replication.to_string(),
                r.mse.to_string(),
                r.seconds.to_string(),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
        if header != HEADER {
            return Err(Error::Parse {
                row: 0,
                column: header.join(","),
                message: "unexpected results header".into(),
            });
        }
        let mut rows = Vec::new();
        for (i, rec) in rd.records().enumerate() {
            let rec = rec?;
            let num = |c: usize| -> Result<f64> {
                rec[c].parse().map_err(|_| Error::Parse {
                    row: i + 1,
                    column: HEADER[c].into(),
                    message: format!("bad number {:?}", &rec[c]),
                })
            };
            rows.push(ResultRow {
                method: rec[0].to_string(),
                epsilon: num(1)?,
                params: rec[2].to_string(),
                replication: num(3)? as usize,
                mse: num(4)?,
                seconds: num(5)?,
            });
        }
        Ok(Self { rows })
    }

    /// Rows grouped by `(method, epsilon bits)`, then by params.
    fn grouped(&self) -> Vec<Group> {
        let mut out: Vec<Group> = Vec::new();
        for r in &self.rows {
            let gi = match out
                .iter()
                .position(|((m, e), _)| *m == r.method && e.to_bits() == r.epsilon.to_bits())
            {
                Some(i) => i,
                None => {
                    out.push(((r.method.clone(), r.epsilon), Vec::new()));
                    out.len() - 1
                }
            };
            let points = &mut out[gi].1;
            match points.iter_mut().find(|(p, _)| *p == r.params) {
                Some((_, v)) => v.push((r.replication, r.mse)),
                None => points.push((r.params.clone(), vec![(r.replication, r.mse)])),
            }
        }
        out
    }

    /// Per `(method, epsilon)`, the parameter point with the lowest mean MSE
    /// and its per-replication scores sorted by replication.
    pub fn best_points(&self) -> Vec<BestPoint> {
        self.grouped()
            .into_iter()
            .map(|((m, e), points)| {
                let best = points
                    .iter()
                    .filter(|(_, v)| v.iter().all(|(_, x)| x.is_finite()))
                    .min_by(|a, b| mean_of(&a.1).total_cmp(&mean_of(&b.1)));
                match best {
                    Some((p, v)) => {
                        let mut v = v.clone();
                        v.sort_by_key(|(r, _)| *r);
                        (m, e, p.clone(), v)
                    }
                    None => (m, e, String::new(), Vec::new()),
                }
            })
            .collect()
    }

    pub fn summaries(&self) -> Vec<MethodSummary> {
        let groups = self.grouped();
        let best = self.best_points();
        let dt_mean = |eps: f64| {
            best.iter()
                .find(|(m, e, _, v)| m == "DT" && e.to_bits() == eps.to_bits() && !v.is_empty())
                .map(|(.., v)| mean_of(v))
        };
        best.iter()
            .zip(&groups)
            .map(|((m, e, p, v), (_, points))| {
                let scores: Vec<f64> = v.iter().map(|(_, x)| *x).collect();
                let mean_mse = if scores.is_empty() {
                    f64::NAN
                } else {
                    mean(&scores)
                };
                MethodSummary {
                    method: m.clone(),
                    epsilon: *e,
                    best_params: p.clone(),
                    mean_mse,
                    median_mse: median(&scores),
                    ratio_vs_dt: dt_mean(*e).map(|d| mean_mse / d),
                    replications: scores.len(),
                    failed_points: points
                        .iter()
                        .filter(|(_, v)| v.iter().any(|(_, x)| !x.is_finite()))
                        .count(),
                }
            })
            .collect()
    }

    pub fn aggregate(&self) -> Aggregate {
        let summaries = self.summaries();
        let best = self.best_points();
        let mut eps: Vec<f64> = Vec::new();
        for s in &summaries {
            if !eps.iter().any(|e| e.to_bits() == s.epsilon.to_bits()) {
                eps.push(s.epsilon);
            }
        }
        let per_eps: Vec<BTreeMap<String, f64>> = eps
            .iter()
            .map(|e| {
                summaries
                    .iter()
                    .filter(|s| s.epsilon.to_bits() == e.to_bits())
                    .map(|s| (s.method.clone(), s.mean_mse))
                    .collect()
            })
            .collect();
        let rank_sums = rank_sum_summary(&per_eps);
        let comparisons = eps
            .iter()
            .zip(&per_eps)
            .filter_map(|(&e, scores)| {
                let winner = scores
                    .iter()
                    .filter(|(_, v)| v.is_finite())
                    .min_by(|a, b| a.1.total_cmp(b.1))?
                    .0
                    .clone();
                let series = |m: &str| {
                    best.iter()
                        .find(|(bm, be, ..)| bm == m && be.to_bits() == e.to_bits())
                        .map(|(.., v)| v.clone())
                        .unwrap_or_default()
                };
                let w = series(&winner);
                let versus: BTreeMap<String, Option<WilcoxonResult>> = scores
                    .keys()
                    .filter(|m| **m != winner)
                    .map(|m| (m.clone(), paired_test(&w, &series(m))))
                    .collect();
                let significant_vs_all = !versus.is_empty()
                    && versus
                        .values()
                        .all(|t| t.is_some_and(|t| t.significant && t.w_plus < t.w_minus));
                Some(Comparison {
                    epsilon: e,
                    best_method: winner,
                    versus,
                    significant_vs_all,
                })
            })
            .collect();
        Aggregate {
            summaries,
            rank_sums,
            comparisons,
        }
    }
}

fn mean_of(v: &[(usize, f64)]) -> f64 {
    v.iter().map(|(_, x)| x).sum::<f64>() / v.len() as f64
}

/// Signed-rank test of `a` against `b` on the replications both contain.
pub fn paired_test(a: &[(usize, f64)], b: &[(usize, f64)]) -> Option<WilcoxonResult> {
    let (xa, xb): (Vec<f64>, Vec<f64>) = a
        .iter()
        .filter_map(|(r, x)| b.iter().find(|(rb, _)| rb == r).map(|(_, y)| (*x, *y)))
        .unzip();
    wilcoxon_signed_rank(&xa, &xb).ok()
}

/// Value of `key` in a `k=v;k=v` parameter string.
pub fn param_value<'a>(params: &'a str, key: &str) -> Option<&'a str> {
    params.split(';').find_map(|kv| {
        kv.split_once('=')
            .filter(|(k, _)| *k == key)
            .map(|(_, v)| v)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(methods: Vec<MethodSpec>) -> ExperimentConfig {
        ExperimentConfig {
            name: "t".into(),
            data: DataSpec::Synthetic { n: 300 },
            mask: MaskSpec::Aligned { s_star: 2 },
            epsilons: vec![2.0],
            methods: methods.into_iter().map(Into::into).collect(),
            replications: 2,
            seed: 1,
            test_fraction: 0.2,
            timing: false,
        }
    }

    #[test]
    fn split_is_a_partition() {
        let (train, test) = train_test_split(101, 0.2, 3);
        assert_eq!(test.len(), 20);
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..101).collect::<Vec<_>>());
    }

    #[test]
    fn single_dt_replication_gives_one_row() {
        let mut c = small(vec![MethodSpec::Dt {
            max_depth: vec![2],
            min_leaf: vec![10],
        }]);
        c.replications = 1;
        let t = run_experiment(&c).unwrap();
        assert_eq!(t.rows.len(), 1);
        let agg = t.aggregate();
        assert_eq!(agg.summaries[0].ratio_vs_dt, Some(1.0));
    }

    #[test]
    fn labels_match_scores_for_every_method() {
        let c = small(MethodSpec::all_defaults());
        let t = run_experiment(&c).unwrap();
        let expected: usize = c
            .methods
            .iter()
            .map(|m| m.spec.point_labels().len())
            .sum::<usize>()
            * 2;
        assert_eq!(t.rows.len(), expected);
        let nan = t
            .rows
            .iter()
            .filter(|r| !r.mse.is_finite())
            .map(|r| r.method.clone())
            .collect::<Vec<_>>();
        assert!(nan.is_empty(), "{nan:?}");
    }

    #[test]
    fn failures_become_nan_rows() {
        let mut c = small(vec![MethodSpec::Krr {
            k: vec![1],
            max_depth: vec![1],
            min_leaf: vec![1],
        }]);
        c.replications = 1;
        let t = run_experiment(&c).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.rows[0].mse.is_nan());
        assert_eq!(t.summaries()[0].failed_points, 1);
    }

    #[test]
    fn csv_round_trip_and_config_parsing() {
        let t = run_experiment(&small(vec![MethodSpec::Dt {
            max_depth: vec![1, 2],
            min_leaf: vec![1],
        }]))
        .unwrap();
        let s = t.to_csv_string().unwrap();
        assert_eq!(ResultTable::read_csv(s.as_bytes()).unwrap(), t);
        let cfg = ExperimentConfig::from_toml_str(
            r#"
            epsilons = [1.0, 2.0]
            replications = 3
            [data]
            kind = "synthetic"
            n = 100
            [mask]
            kind = "gamma"
            gamma = 1.0
            [[methods]]
            method = "hist-of-tree"
            s = [1, 2]
            [[methods]]
            method = "dt"
            name = "tree"
            max_depth = [2]
            "#,
        )
        .unwrap();
        assert_eq!(cfg.methods[1].label(), "tree");
        assert!(
            matches!(cfg.methods[0].spec, MethodSpec::HistOfTree { ref t, .. } if t == &vec![1, 2, 3])
        );
        assert!(ExperimentConfig::from_toml_str(
            "epsilons = []\nmethods = []\n[data]\nkind = \"synthetic\"\nn = 5"
        )
        .is_err());
        assert_eq!(param_value("rho=0.5;p=4;t=2", "p"), Some("4"));
    }

    #[test]
    fn config_file_resolves_data_next_to_itself() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("exp.toml");
        std::fs::write(
            &file,
            "epsilons = [1.0]\n[data]\nkind = \"csv\"\npath = \"d.csv\"\nlabel = \"y\"\n[[methods]]\nmethod = \"dt\"\n",
        )
        .unwrap();
        let cfg = ExperimentConfig::from_file(&file).unwrap();
        assert!(
            matches!(cfg.data, DataSpec::Csv { ref path, .. } if path == &dir.path().join("d.csv"))
        );
    }
}
