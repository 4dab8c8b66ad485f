//! Error metrics and paired comparisons.

use std::collections::BTreeMap;

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

pub fn mse(predictions: &[f64], truths: &[f64]) -> Result<f64> {
    if predictions.len() != truths.len() {
        return Err(Error::Config(format!(
            "{} predictions for {} targets",
            predictions.len(),
            truths.len()
        )));
    }
    if truths.is_empty() {
        return Err(Error::EmptyData("no targets to score".into()));
    }
    let sse: f64 = predictions
        .iter()
        .zip(truths)
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sse / truths.len() as f64)
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => v[n / 2],
        _ => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WilcoxonResult {
    /// Rank sum of the positive differences `a - b`.
    pub w_plus: f64,
    pub w_minus: f64,
    /// `min(w_plus, w_minus)`.
    pub statistic: f64,
    pub p_value: f64,
    pub significant: bool,
    /// Non-zero differences used.
    pub n: usize,
    pub exact: bool,
}

const EXACT_LIMIT: usize = 20;

/// Ranks of `values` (1-based), ties sharing their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 1) as f64 / 2.0;
        order[i..j].iter().for_each(|&k| ranks[k] = r);
        i = j;
    }
    ranks
}

/// Two-sided signed-rank test of `a` against `b`. Zero differences are
/// dropped; up to twenty remaining pairs use the exact null distribution,
/// more use the tie-corrected normal approximation with continuity correction.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "paired samples differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a
        .iter()
        .zip(b)
        .map(|(x, y)| x - y)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(Error::UndefinedTest(
            "all paired differences are zero".into(),
        ));
    }
    if diffs.iter().any(|d| d.is_nan()) {
        return Err(Error::UndefinedTest("differences contain NaN".into()));
    }
    let n = diffs.len();
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = diffs
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .fold(0.0, |acc, (_, r)| acc + r);
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let statistic = w_plus.min(w_minus);
    let exact = n <= EXACT_LIMIT;
    let p_value = if exact {
        exact_p_value(&ranks, statistic)
    } else {
        let mean = total / 2.0;
        let mut ties = BTreeMap::<u64, f64>::new();
        for r in &ranks {
            *ties.entry(r.to_bits()).or_default() += 1.0;
        }
        let tie_term: f64 = ties.values().map(|t| t * t * t - t).sum::<f64>() / 48.0;
        let var = (n * (n + 1) * (2 * n + 1)) as f64 / 24.0 - tie_term;
        let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - normal.cdf(z))).min(1.0)
    };
    Ok(WilcoxonResult {
        w_plus,
        w_minus,
        statistic,
        p_value,
        significant: p_value < 0.05,
        n,
        exact,
    })
}

/// `min(1, 2 P(T <= statistic))` where `T` sums a random sign subset of `ranks`.
/// Ranks are doubled so that average ranks stay integral.
fn exact_p_value(ranks: &[f64], statistic: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0f64; max + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let limit = (2.0 * statistic).round() as usize;
    let below: f64 = counts[..=limit.min(max)].iter().sum();
    (2.0 * below / 2f64.powi(ranks.len() as i32)).min(1.0)
}

/// Per dataset, ranks methods by score (1 = lowest, ties averaged, NaN last)
/// and sums the ranks per method across datasets.
pub fn rank_sum_summary(datasets: &[BTreeMap<String, f64>]) -> BTreeMap<String, f64> {
    let mut sums = BTreeMap::new();
    for scores in datasets {
        let names: Vec<&String> = scores.keys().collect();
        let vals: Vec<f64> = scores
            .values()
            .map(|v| if v.is_nan() { f64::INFINITY } else { *v })
            .collect();
        for (name, r) in names.into_iter().zip(average_ranks(&vals)) {
            *sums.entry(name.clone()).or_insert(0.0) += r;
        }
    }
    sums
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mse(&[3.0, 4.0], &[1.0, 2.0]).unwrap(), 4.0);
        assert_eq!(mse(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), 1.0);
        assert!(mse(&[], &[]).is_err());
    }

    #[test]
    fn wilcoxon_edge_cases() {
        assert!(matches!(
            wilcoxon_signed_rank(&[1.0, 2.0], &[1.0, 2.0]),
            Err(Error::UndefinedTest(_))
        ));
        let a: Vec<f64> = (0..10).map(|i| 10.0 + i as f64).collect();
        let b: Vec<f64> = (0..10).map(|i| i as f64 * 0.5).collect();
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(r.exact);
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 2.0 / 1024.0).abs() < 1e-15);
        assert!(r.significant);
        let a = [1.0, -1.0, 2.0, -2.0];
        let r = wilcoxon_signed_rank(&a, &[0.0; 4]).unwrap();
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn normal_branch_for_large_samples() {
        let a: Vec<f64> = (0..40).map(|i| (i as f64 * 1.7).sin() + 0.8).collect();
        let b = vec![0.0; 40];
        let r = wilcoxon_signed_rank(&a, &b).unwrap();
        assert!(!r.exact);
        assert!(r.p_value < 0.05);
    }

    #[test]
    fn ranks_and_rank_sums() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
        let one: BTreeMap<String, f64> = [("a", 1.0), ("b", 2.0), ("c", 3.0)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        let s = rank_sum_summary(&[one]);
        assert_eq!(s.values().cloned().collect::<Vec<_>>(), vec![1.0, 2.0, 3.0]);
        let tied: BTreeMap<String, f64> = [("a", 1.0), ("b", 1.0), ("c", 3.0)]
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect();
        assert_eq!(
            rank_sum_summary(&[tied])
                .values()
                .cloned()
                .collect::<Vec<_>>(),
            vec![1.5, 1.5, 3.0]
        );
    }
}
