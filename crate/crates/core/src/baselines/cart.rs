//! Regression CART with exhaustive threshold search.

use serde::{Deserialize, Serialize};

use crate::data::Matrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CartNode {
    value: f64,
    depth: usize,
    /// `(feature, threshold, left, right)`; samples with `x[feature] <= threshold` go left.
    split: Option<(usize, f64, usize, usize)>,
}

/// Binary regression tree; every node stores the mean of its training labels,
/// so the same fit answers for any smaller depth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartModel {
    nodes: Vec<CartNode>,
    max_depth: usize,
    min_samples_leaf: usize,
    features: Vec<usize>,
}

/// Fits on every column of `x`.
pub fn fit_cart(
    x: &Matrix,
    y: &[f64],
    max_depth: usize,
    min_samples_leaf: usize,
) -> Result<CartModel> {
    let cols: Vec<usize> = (0..x.cols()).collect();
    fit_cart_on(x, y, &cols, max_depth, min_samples_leaf)
}

/// Fits using only the listed columns of `x`; predictions still take full rows.
pub fn fit_cart_on(
    x: &Matrix,
    y: &[f64],
    features: &[usize],
    max_depth: usize,
    min_samples_leaf: usize,
) -> Result<CartModel> {
    if y.is_empty() {
        return Err(Error::EmptyData("cannot fit a tree on zero samples".into()));
    }
    if x.rows() != y.len() {
        return Err(Error::Config(format!(
            "{} rows but {} labels",
            x.rows(),
            y.len()
        )));
    }
    if let Some(&f) = features.iter().find(|&&f| f >= x.cols()) {
        return Err(Error::Config(format!(
            "feature {f} out of range for {} columns",
            x.cols()
        )));
    }
    let min_leaf = min_samples_leaf.max(1);
    let mut nodes = Vec::new();
    let mut stack = vec![(0usize, (0..y.len()).collect::<Vec<_>>())];
    nodes.push(CartNode {
        value: mean(y, &stack[0].1),
        depth: 0,
        split: None,
    });
    while let Some((node, idx)) = stack.pop() {
        if nodes[node].depth >= max_depth || idx.len() < 2 * min_leaf {
            continue;
        }
        let Some((f, thr)) = best_split(x, y, &idx, features, min_leaf) else {
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x.get(i, f) <= thr);
        let depth = nodes[node].depth + 1;
        let li = nodes.len();
        nodes.push(CartNode {
            value: mean(y, &l),
            depth,
            split: None,
        });
        nodes.push(CartNode {
            value: mean(y, &r),
            depth,
            split: None,
        });
        nodes[node].split = Some((f, thr, li, li + 1));
        stack.push((li + 1, r));
        stack.push((li, l));
    }
    Ok(CartModel {
        nodes,
        max_depth,
        min_samples_leaf: min_leaf,
        features: features.to_vec(),
    })
}

fn mean(y: &[f64], idx: &[usize]) -> f64 {
    idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64
}

/// Threshold minimizing the summed squared error of the two children, over
/// midpoints of consecutive distinct values. Returns `None` unless the split
/// strictly lowers the error.
fn best_split(
    x: &Matrix,
    y: &[f64],
    idx: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<(usize, f64)> {
    let m = idx.len();
    let total: f64 = idx.iter().map(|&i| y[i]).sum();
    let parent = total * total / m as f64;
    let sse_parent: f64 = idx.iter().map(|&i| y[i] * y[i]).sum::<f64>() - parent;
    if sse_parent <= 1e-12 * m as f64 {
        return None;
    }
    let mut best: Option<(f64, usize, f64)> = None;
    let mut order: Vec<(f64, f64)> = Vec::with_capacity(m);
    for &f in features {
        order.clear();
        order.extend(idx.iter().map(|&i| (x.get(i, f), y[i])));
        order.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let mut left = 0.0;
        for k in 0..m - 1 {
            left += order[k].1;
            let nl = k + 1;
            if nl < min_leaf || m - nl < min_leaf || order[k].0 == order[k + 1].0 {
                continue;
            }
            let right = total - left;
            // maximizing this minimizes the children's summed squared error
            let gain = left * left / nl as f64 + right * right / (m - nl) as f64;
            if best.is_none_or(|(g, ..)| gain > g) {
                best = Some((gain, f, 0.5 * (order[k].0 + order[k + 1].0)));
            }
        }
    }
    best.filter(|(g, ..)| *g - parent > 1e-12 * sse_parent.max(1.0))
        .map(|(_, f, t)| (f, t))
}

impl CartModel {
    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn min_samples_leaf(&self) -> usize {
        self.min_samples_leaf
    }

    /// Original column indices the tree may split on.
    pub fn features(&self) -> &[usize] {
        &self.features
    }

    /// Depth actually reached.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.split.is_none()).count()
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.predict_at_depth(x, self.max_depth)
    }

    /// Prediction of the same tree cut back to `depth`.
    pub fn predict_at_depth(&self, x: &[f64], depth: usize) -> f64 {
        let mut node = &self.nodes[0];
        while let Some((f, thr, l, r)) = node.split {
            if node.depth >= depth {
                break;
            }
            node = &self.nodes[if x[f] <= thr { l } else { r }];
        }
        node.value
    }

    pub fn predict_matrix(&self, x: &Matrix, depth: usize) -> Vec<f64> {
        (0..x.rows())
            .map(|i| self.predict_at_depth(x.row(i), depth))
            .collect()
    }

    /// Split features and thresholds in node order.
    pub fn splits(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.nodes
            .iter()
            .filter_map(|n| n.split.map(|(f, t, ..)| (f, t)))
    }

    /// Leaf values of the tree cut back to `depth`.
    pub fn leaf_values(&self, depth: usize) -> Vec<f64> {
        let mut out = Vec::new();
        let mut stack = vec![0];
        while let Some(i) = stack.pop() {
            match self.nodes[i].split {
                Some((_, _, l, r)) if self.nodes[i].depth < depth => stack.extend([r, l]),
                _ => out.push(self.nodes[i].value),
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(n: usize) -> (Matrix, Vec<f64>) {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| vec![i as f64 / (n - 1) as f64, ((i * 7) % n) as f64 / n as f64])
            .collect();
        let y = rows
            .iter()
            .map(|r| f64::from(u8::from(r[0] > 0.5)))
            .collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    #[test]
    fn constant_labels_give_a_single_leaf() {
        let (x, _) = step(20);
        let m = fit_cart(&x, &[2.5; 20], 8, 1).unwrap();
        assert_eq!(m.leaf_count(), 1);
        assert_eq!(m.predict(&[0.3, 0.3]), 2.5);
    }

    #[test]
    fn step_is_recovered_in_the_gap() {
        let (x, y) = step(20);
        let m = fit_cart(&x, &y, 1, 1).unwrap();
        let splits: Vec<_> = m.splits().collect();
        assert_eq!(splits.len(), 1);
        let (f, t) = splits[0];
        assert_eq!(f, 0);
        // samples 9/19 and 10/19 straddle the step
        assert!(t > 9.0 / 19.0 && t < 10.0 / 19.0);
        let mut leaves = m.leaf_values(1);
        leaves.sort_by(f64::total_cmp);
        assert_eq!(leaves, vec![0.0, 1.0]);
    }

    #[test]
    fn min_leaf_equal_to_n_keeps_the_root() {
        let (x, y) = step(20);
        let m = fit_cart(&x, &y, 8, 20).unwrap();
        assert_eq!(m.leaf_count(), 1);
        assert!(matches!(
            fit_cart(&Matrix::zeros(0, 2), &[], 2, 1),
            Err(Error::EmptyData(_))
        ));
    }

    #[test]
    fn depth_cut_matches_direct_fit() {
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|i| vec![(i as f64 * 0.37) % 1.0, (i as f64 * 0.61) % 1.0])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| (6.0 * r[0]).sin() + r[1] * r[1])
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let deep = fit_cart(&x, &y, 6, 2).unwrap();
        for depth in 0..=6 {
            let direct = fit_cart(&x, &y, depth, 2).unwrap();
            for r in &rows {
                assert_eq!(deep.predict_at_depth(r, depth), direct.predict(r));
            }
        }
    }

    #[test]
    fn restricted_columns_are_respected() {
        let (x, y) = step(20);
        let m = fit_cart_on(&x, &y, &[1], 4, 1).unwrap();
        assert!(m.splits().all(|(f, _)| f == 1));
        let m = fit_cart_on(&x, &y, &[], 4, 1).unwrap();
        assert_eq!(m.leaf_count(), 1);
        assert!((m.predict(&[0.0, 0.0]) - 0.5).abs() < 1e-12);
    }
}
