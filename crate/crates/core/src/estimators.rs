//! HistOfTree fitting and prediction, plus the adaptive parameter selector.
//!
//! Fitting is staged so that experiment sweeps can share work: labels are
//! privatized once per budget split, one tree is grown at the largest depth
//! and truncated for smaller ones, and only the indicator release is redone
//! for each partition.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, MaskMatrix, Matrix};
use crate::error::{Error, Result};
use crate::mechanisms::{IndicatorMechanism, PrivacyBudget, PrivatizedRecord, Privatizer};
use crate::partition::{
    build_tree, histogram_on, ProductPartition, SplitRule, TreeData, TreePartition,
};
use crate::rng::UserStreams;

/// Smoothness assumptions behind the rate calculations.
///
/// The Lipschitz case `alpha = 1` stands in for the unknown exponent during
/// parameter selection. The Hölder constant and the density bounds of the
/// theory only enter through unspecified constants and are not represented.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateParams {
    pub alpha: f64,
}

impl Default for RateParams {
    fn default() -> Self {
        Self { alpha: 1.0 }
    }
}

impl RateParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Parameter(format!(
                "alpha must lie in (0,1], got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }

    /// Exponent `r` in the excess-risk rate `(log n / (n eps^2))^r`.
    pub fn rate_exponent(&self, d: usize, s: usize, lambda: f64) -> f64 {
        let a2 = 2.0 * self.alpha;
        a2 / (a2 + d as f64 + s as f64 + lambda * (d - s) as f64)
    }
}

/// Axes sorted by how many users keep them private, most private first;
/// ties keep ascending axis order.
pub fn rank_private_axes(w: &MaskMatrix) -> Vec<usize> {
    let sums = w.column_sums();
    let mut axes: Vec<usize> = (0..w.cols()).collect();
    axes.sort_by_key(|&a| std::cmp::Reverse(sums[a]));
    axes
}

/// Per user, the number of private axes among `ranked[s..]`.
fn tail_counts(w: &MaskMatrix, ranked: &[usize], s: usize) -> Vec<usize> {
    (0..w.rows())
        .map(|i| ranked[s..].iter().filter(|&&a| w.get(i, a)).count())
        .collect()
}

fn delta_from_counts(counts: &[usize], p: usize, tail_dim: usize) -> f64 {
    let sum: f64 = counts
        .iter()
        .map(|&c| 2f64.powf(c as f64 * p as f64 / tail_dim as f64))
        .sum();
    sum / counts.len() as f64
}

/// Average over users of `2^{(private tail count) * p / (d - s)}`, where the
/// tail is every axis after the `s` most private ones.
pub fn delta(p: usize, w: &MaskMatrix, s: usize) -> Result<f64> {
    let d = w.cols();
    if s >= d {
        return Err(Error::Parameter(format!(
            "s = {s} leaves no public axes out of {d}"
        )));
    }
    if w.rows() == 0 {
        return Err(Error::EmptyData("mask has no users".into()));
    }
    let ranked = rank_private_axes(w);
    Ok(delta_from_counts(&tail_counts(w, &ranked, s), p, d - s))
}

/// Outcome of the brute-force search over `(s, p)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSelection {
    pub s: usize,
    pub p_star: usize,
    pub t: usize,
    pub lambda_star: f64,
    pub objective: f64,
    /// The `s` most private axes, ascending; they get the histogram.
    pub private_axes: Vec<usize>,
    /// Remaining axes, ascending; they get the tree.
    pub public_axes: Vec<usize>,
}

/// Upper-bound proxy minimized by the selector, for `n` users in `d` dimensions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelectionObjective {
    pub n: usize,
    pub d: usize,
    pub epsilon: f64,
    /// Weight of the approximation term.
    pub c_approx: f64,
    pub rate: RateParams,
}

impl SelectionObjective {
    pub fn eval(&self, s: usize, p: usize, delta: f64) -> f64 {
        let tail = (self.d - s) as f64;
        let (n, p) = (self.n as f64, p as f64);
        let variance = 2f64.powf(p * (self.d + s) as f64 / tail) * n.ln()
            / (n * self.epsilon * self.epsilon)
            * delta;
        variance + self.c_approx * 2f64.powf(-2.0 * self.rate.alpha * p / tail)
    }
}

/// Largest depth considered for `n` users in `d` dimensions.
pub fn max_search_depth(n: usize, d: usize) -> usize {
    (d as f64 * (n as f64).log2()).ceil() as usize
}

/// Minimizes [`SelectionObjective`] over `s in 0..d` and `p in 1..=ceil(d log2 n)`;
/// ties go to the smaller `s`, then the smaller `p`.
pub fn select_parameters(
    w: &MaskMatrix,
    eps: f64,
    c_approx: f64,
    rate: RateParams,
) -> Result<ParamSelection> {
    let (n, d) = (w.rows(), w.cols());
    if n < 2 || d < 2 {
        return Err(Error::Parameter(format!(
            "selection needs n >= 2 and d >= 2, got n = {n}, d = {d}"
        )));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Parameter(format!(
            "epsilon must be positive, got {eps}"
        )));
    }
    let objective = SelectionObjective {
        n,
        d,
        epsilon: eps,
        c_approx,
        rate,
    };
    let ranked = rank_private_axes(w);
    let max_p = max_search_depth(n, d).max(1);
    let mut best: Option<(f64, usize, usize, f64)> = None;
    for s in 0..d {
        let counts = tail_counts(w, &ranked, s);
        for p in 1..=max_p {
            let del = delta_from_counts(&counts, p, d - s);
            let obj = objective.eval(s, p, del);
            if best.is_none_or(|(b, ..)| obj < b) {
                best = Some((obj, s, p, del));
            }
        }
    }
    let (objective, s, p_star, del) = best.expect("search grid is non-empty");
    let t = (2f64.powf(p_star as f64 / (d - s) as f64).round() as usize).max(1);
    let mut private_axes = ranked[..s].to_vec();
    private_axes.sort_unstable();
    let mut public_axes = ranked[s..].to_vec();
    public_axes.sort_unstable();
    Ok(ParamSelection {
        s,
        p_star,
        t,
        lambda_star: del.log2() / p_star as f64,
        objective,
        private_axes,
        public_axes,
    })
}

/// Settings recorded alongside a fitted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub epsilon: f64,
    pub rho: f64,
    pub s: usize,
    pub p: usize,
    pub t: usize,
    pub seed: u64,
    pub mechanism: IndicatorMechanism,
    pub rule: SplitRule,
}

/// Piecewise-constant predictor over a product partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistOfTreeModel {
    partition: ProductPartition,
    grid_values: Vec<f64>,
    /// Grids whose denominator passed the emptiness guard.
    reliable: Vec<bool>,
    fallback: f64,
    bound: f64,
    pub meta: Option<ModelMeta>,
}

impl HistOfTreeModel {
    pub fn partition(&self) -> &ProductPartition {
        &self.partition
    }

    pub fn grid_values(&self) -> &[f64] {
        &self.grid_values
    }

    pub fn reliable(&self) -> &[bool] {
        &self.reliable
    }

    pub fn fallback(&self) -> f64 {
        self.fallback
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.partition.dim() {
            return Err(Error::Domain(format!(
                "expected {} features, got {}",
                self.partition.dim(),
                x.len()
            )));
        }
        if let Some(v) = x.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("feature value {v} outside [0,1]")));
        }
        Ok(self.grid_values[self.partition.grid_index(x)])
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<f64>> {
        (0..x.rows()).map(|i| self.predict(x.row(i))).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: Self = serde_json::from_str(s)?;
        if m.grid_values.len() != m.partition.grid_count()
            || m.reliable.len() != m.grid_values.len()
        {
            return Err(Error::Config(
                "grid value count does not match the partition".into(),
            ));
        }
        Ok(m)
    }
}

/// Running sums of `y_tilde * v_tilde` and `v_tilde` per grid.
#[derive(Debug, Clone)]
pub struct GridAccumulator {
    numerator: Vec<f64>,
    denominator: Vec<f64>,
    label_sum: f64,
    users: usize,
}

impl GridAccumulator {
    pub fn new(grid_count: usize) -> Self {
        Self {
            numerator: vec![0.0; grid_count],
            denominator: vec![0.0; grid_count],
            label_sum: 0.0,
            users: 0,
        }
    }

    pub fn add(&mut self, y_tilde: f64, v_tilde: &[(usize, f64)]) {
        for &(j, v) in v_tilde {
            self.numerator[j] += y_tilde * v;
            self.denominator[j] += v;
        }
        self.label_sum += y_tilde;
        self.users += 1;
    }

    /// Ratio estimate per grid. Grids whose denominator does not exceed
    /// `n / (2 * grid count)` fall back to the clipped mean noisy label.
    pub fn finish(self, partition: ProductPartition, bound: f64) -> Result<HistOfTreeModel> {
        if self.users == 0 {
            return Err(Error::EmptyData("no records to fit".into()));
        }
        let n = self.users as f64;
        let guard = n / (2.0 * self.numerator.len() as f64);
        let fallback = (self.label_sum / n).clamp(-bound, bound);
        let reliable: Vec<bool> = self.denominator.iter().map(|&den| den > guard).collect();
        let grid_values = self
            .numerator
            .iter()
            .zip(&self.denominator)
            .zip(&reliable)
            .map(|((&num, &den), &ok)| {
                if ok {
                    (num / den).clamp(-bound, bound)
                } else {
                    fallback
                }
            })
            .collect();
        Ok(HistOfTreeModel {
            partition,
            grid_values,
            reliable,
            fallback,
            bound,
            meta: None,
        })
    }
}

/// Aggregates released records into a model over `partition`.
pub fn fit(
    records: &[PrivatizedRecord],
    partition: ProductPartition,
    bound: f64,
) -> Result<HistOfTreeModel> {
    let fp = partition.fingerprint();
    let g = partition.grid_count();
    let mut acc = GridAccumulator::new(g);
    for (i, r) in records.iter().enumerate() {
        if r.partition != fp {
            return Err(Error::Config(format!(
                "record {i} was privatized against a different partition"
            )));
        }
        if let Some(&(j, _)) = r.v_tilde.iter().find(|(j, _)| *j >= g) {
            return Err(Error::Config(format!(
                "record {i} refers to grid {j} of {g}"
            )));
        }
        acc.add(r.y_tilde, &r.v_tilde);
    }
    acc.finish(partition, bound)
}

/// Who keeps which features private.
#[derive(Debug, Clone, Copy)]
pub enum PrivacySetting<'a> {
    /// Every user keeps exactly these axes private.
    Aligned { private_axes: &'a [usize] },
    /// Users follow their own mask rows; the histogram covers `private_axes`.
    Personalized {
        mask: &'a MaskMatrix,
        private_axes: &'a [usize],
    },
}

/// Privatized labels for one dataset, budget and seed, ready to be paired
/// with any number of partitions.
#[derive(Debug, Clone)]
pub struct HistOfTreeFitter<'a> {
    data: &'a Dataset,
    mask: Cow<'a, MaskMatrix>,
    personalized: bool,
    private_axes: Vec<usize>,
    public_axes: Vec<usize>,
    privatizer: Privatizer,
    seed: u64,
    y_tilde: Vec<f64>,
}

impl<'a> HistOfTreeFitter<'a> {
    pub fn new(
        data: &'a Dataset,
        setting: PrivacySetting<'a>,
        privatizer: Privatizer,
        seed: u64,
    ) -> Result<Self> {
        let d = data.dim();
        let (private, mask, personalized) = match setting {
            PrivacySetting::Aligned { private_axes } => {
                let m = MaskMatrix::from_fn(data.len(), d, |_, l| private_axes.contains(&l));
                (private_axes, Cow::Owned(m), false)
            }
            PrivacySetting::Personalized { mask, private_axes } => {
                if mask.rows() != data.len() || mask.cols() != d {
                    return Err(Error::Config(format!(
                        "mask is {}x{}, data is {}x{d}",
                        mask.rows(),
                        mask.cols(),
                        data.len()
                    )));
                }
                (private_axes, Cow::Borrowed(mask), true)
            }
        };
        let mut private_axes = private.to_vec();
        private_axes.sort_unstable();
        if private_axes.windows(2).any(|w| w[0] == w[1]) || private_axes.iter().any(|&a| a >= d) {
            return Err(Error::Config(format!(
                "invalid private axes {private:?} for {d} features"
            )));
        }
        let public_axes = (0..d)
            .filter(|a| private_axes.binary_search(a).is_err())
            .collect();
        let y_tilde = data
            .y
            .iter()
            .enumerate()
            .map(|(i, &y)| privatizer.privatize_label(y, &UserStreams::new(seed, i)))
            .collect::<Result<_>>()?;
        Ok(Self {
            data,
            mask,
            personalized,
            private_axes,
            public_axes,
            privatizer,
            seed,
            y_tilde,
        })
    }

    pub fn y_tilde(&self) -> &[f64] {
        &self.y_tilde
    }

    pub fn private_axes(&self) -> &[usize] {
        &self.private_axes
    }

    pub fn public_axes(&self) -> &[usize] {
        &self.public_axes
    }

    /// Grows a tree on the public axes from the privatized labels.
    pub fn grow_tree(&self, depth: usize, rule: SplitRule) -> Result<TreePartition> {
        let data = TreeData {
            x: &self.data.x,
            labels: &self.y_tilde,
            mask: &self.mask,
            axes: &self.public_axes,
        };
        build_tree(&data, depth, rule)
    }

    /// The product partition of a `t`-bin histogram with `tree`.
    pub fn partition(&self, t: usize, tree: TreePartition) -> Result<ProductPartition> {
        ProductPartition::new(histogram_on(t, &self.private_axes)?, tree)
    }

    /// Releases every user's indicators against `partition` and aggregates them.
    pub fn fit_partition(
        &self,
        partition: ProductPartition,
        rule: SplitRule,
    ) -> Result<HistOfTreeModel> {
        let mut acc = GridAccumulator::new(partition.grid_count());
        for (i, &y) in self.y_tilde.iter().enumerate() {
            let streams = UserStreams::new(self.seed, i);
            let x = self.data.x.row(i);
            let v = if self.personalized {
                self.privatizer.personalized_indicators(
                    x,
                    self.mask.row(i),
                    &partition,
                    &streams,
                )?
            } else {
                self.privatizer
                    .aligned_indicators(x, &partition, &streams)?
            };
            acc.add(y, &v);
        }
        let meta = ModelMeta {
            epsilon: self.privatizer.budget.epsilon,
            rho: self.privatizer.budget.rho,
            s: self.private_axes.len(),
            p: partition.tree().depth(),
            t: partition.hist().bins(),
            seed: self.seed,
            mechanism: self.privatizer.mechanism,
            rule,
        };
        let mut model = acc.finish(partition, self.data.bound)?;
        model.meta = Some(meta);
        Ok(model)
    }

    pub fn fit(&self, t: usize, p: usize, rule: SplitRule) -> Result<HistOfTreeModel> {
        let tree = self.grow_tree(p, rule)?;
        self.fit_partition(self.partition(t, tree)?, rule)
    }
}

/// Structural settings of a single HistOfTree fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistOfTreeParams {
    pub t: usize,
    pub p: usize,
    pub rule: SplitRule,
    pub mechanism: IndicatorMechanism,
}

pub fn fit_hist_of_tree(
    data: &Dataset,
    setting: PrivacySetting<'_>,
    budget: PrivacyBudget,
    params: HistOfTreeParams,
    seed: u64,
) -> Result<HistOfTreeModel> {
    let privatizer = Privatizer::new(budget, data.bound, params.mechanism);
    HistOfTreeFitter::new(data, setting, privatizer, seed)?.fit(params.t, params.p, params.rule)
}

/// Settings of the adaptive variant; `t_offset` shifts the selected bin count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveParams {
    pub c_approx: f64,
    pub t_offset: i64,
    pub rule: SplitRule,
    pub mechanism: IndicatorMechanism,
}

/// Selects `(s, p, t)` from the mask, then fits HistOfTree with the
/// histogram on the `s` most private axes.
pub fn fit_ad_hist_of_tree(
    data: &Dataset,
    mask: &MaskMatrix,
    budget: PrivacyBudget,
    params: AdaptiveParams,
    seed: u64,
) -> Result<(HistOfTreeModel, ParamSelection)> {
    let sel = select_parameters(mask, budget.epsilon, params.c_approx, RateParams::default())?;
    let t = (sel.t as i64 + params.t_offset).max(1) as usize;
    let setting = PrivacySetting::Personalized {
        mask,
        private_axes: &sel.private_axes,
    };
    let hp = HistOfTreeParams {
        t,
        p: sel.p_star,
        rule: params.rule,
        mechanism: params.mechanism,
    };
    let model = fit_hist_of_tree(data, setting, budget, hp, seed)?;
    Ok((model, sel))
}
