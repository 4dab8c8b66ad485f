//! Histogram partitions on private axes, tree partitions on public axes and
//! their product.
//!
//! Every cell is half-open `[lower, upper)` on each axis, except that a cell
//! whose upper bound is `1.0` also contains `1.0`. Under this convention each
//! point of `[0,1]^d` lies in exactly one grid of a [`ProductPartition`].
//!
//! Grids are indexed by a flat `j = h * leaf_count + k`, where `h` is the
//! lexicographic histogram bin index and `k` the left-to-right tree leaf index.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{MaskMatrix, Matrix};
use crate::error::{Error, Result};
use crate::rng::substream;

/// Axis-aligned box over a subset of the original features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Original feature index of each coordinate.
    pub axes: Vec<usize>,
}

impl Cell {
    pub fn unit(axes: &[usize]) -> Self {
        Self {
            lower: vec![0.0; axes.len()],
            upper: vec![1.0; axes.len()],
            axes: axes.to_vec(),
        }
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| b - a)
            .collect()
    }

    pub fn diameter(&self) -> f64 {
        self.widths().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (a + b))
            .collect()
    }

    /// Whether coordinate `k` of the cell contains `v` under the half-open convention.
    #[inline]
    pub fn contains_coord(&self, k: usize, v: f64) -> bool {
        v >= self.lower[k] && (v < self.upper[k] || (self.upper[k] == 1.0 && v <= 1.0))
    }

    /// Whether the full feature vector `x` lies in the cell.
    pub fn contains(&self, x: &[f64]) -> bool {
        self.axes
            .iter()
            .enumerate()
            .all(|(k, &a)| self.contains_coord(k, x[a]))
    }
}

/// Equal-width grid with `bins` bins on each of the listed axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramPartition {
    bins: usize,
    axes: Vec<usize>,
    cell_count: usize,
}

/// Builds the `t^s` histogram over private axes `0..s` (relabel with [`histogram_on`]).
pub fn build_histogram(t: usize, s: usize) -> Result<HistogramPartition> {
    histogram_on(t, &(0..s).collect::<Vec<_>>())
}

/// Builds a histogram with `t` bins per axis over the given feature axes.
pub fn histogram_on(t: usize, axes: &[usize]) -> Result<HistogramPartition> {
    if t == 0 {
        return Err(Error::Capacity(
            "histogram needs at least one bin per axis".into(),
        ));
    }
    let exp =
        u32::try_from(axes.len()).map_err(|_| Error::Capacity("too many histogram axes".into()))?;
    let cell_count = t
        .checked_pow(exp)
        .ok_or_else(|| Error::Capacity(format!("{t}^{} histogram cells overflow", axes.len())))?;
    Ok(HistogramPartition {
        bins: t,
        axes: axes.to_vec(),
        cell_count,
    })
}

impl HistogramPartition {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    pub fn cell_count(&self) -> usize {
        self.cell_count
    }

    #[inline]
    fn edge(&self, k: usize) -> f64 {
        k as f64 / self.bins as f64
    }

    /// Bin of a coordinate in `[0,1]`; the last bin is closed.
    pub fn bin_of(&self, v: f64) -> usize {
        let t = self.bins;
        let mut b = ((v * t as f64).floor().max(0.0) as usize).min(t - 1);
        if b > 0 && v < self.edge(b) {
            b -= 1;
        } else if b + 1 < t && v >= self.edge(b + 1) {
            b += 1;
        }
        b
    }

    /// Lexicographic index of the cell holding `x` (a full feature vector).
    pub fn cell_index(&self, x: &[f64]) -> usize {
        self.axes
            .iter()
            .fold(0, |acc, &a| acc * self.bins + self.bin_of(x[a]))
    }

    /// Per-axis bin indices of cell `idx`.
    pub fn bin_indices(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.axes.len()];
        for slot in out.iter_mut().rev() {
            *slot = idx % self.bins;
            idx /= self.bins;
        }
        out
    }

    pub fn cell(&self, idx: usize) -> Cell {
        let b = self.bin_indices(idx);
        Cell {
            lower: b.iter().map(|&k| self.edge(k)).collect(),
            upper: b.iter().map(|&k| self.edge(k + 1)).collect(),
            axes: self.axes.clone(),
        }
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.cell_count).map(|i| self.cell(i))
    }

    /// Sorted indices of cells compatible with the coordinates of `x` that `w` marks public.
    pub fn potential_cells(&self, x: &[f64], w: &[bool]) -> Vec<usize> {
        let mut cells = vec![0usize];
        for &a in &self.axes {
            let choices: Vec<usize> = if w[a] {
                (0..self.bins).collect()
            } else {
                vec![self.bin_of(x[a])]
            };
            cells = cells
                .iter()
                .flat_map(|&c| choices.iter().map(move |&b| c * self.bins + b))
                .collect();
        }
        cells
    }
}

/// How a tree cell picks its split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum SplitRule {
    /// Midpoint of the longest edge with the smallest summed child variance.
    MaxEdge,
    /// Midpoint of a uniformly random longest edge; ignores labels and masks.
    MaxEdgeRandom { seed: u64 },
    /// Variance-minimizing threshold over observed coordinates, any axis.
    Cart { min_leaf: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        cell: Cell,
        index: usize,
    },
    Split {
        cell: Cell,
        /// Original feature index of the split axis.
        axis: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn cell(&self) -> &Cell {
        match self {
            TreeNode::Leaf { cell, .. } | TreeNode::Split { cell, .. } => cell,
        }
    }
}

/// Binary partition of the public axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreePartition {
    axes: Vec<usize>,
    depth: usize,
    leaf_count: usize,
    root: TreeNode,
}

/// Inputs for growing a tree: the full feature matrix, the axes the tree may
/// split, privatized labels, and the mask deciding which samples are usable
/// along each axis.
#[derive(Debug, Clone, Copy)]
pub struct TreeData<'a> {
    pub x: &'a Matrix,
    pub labels: &'a [f64],
    pub mask: &'a MaskMatrix,
    pub axes: &'a [usize],
}

pub fn max_edge_tree(data: &TreeData<'_>, depth: usize) -> Result<TreePartition> {
    build_tree(data, depth, SplitRule::MaxEdge)
}

pub fn cart_tree(data: &TreeData<'_>, depth: usize, min_leaf: usize) -> Result<TreePartition> {
    build_tree(data, depth, SplitRule::Cart { min_leaf })
}

struct Grow {
    cell: Cell,
    samples: Vec<usize>,
    split: Option<(usize, f64, usize, usize)>,
}

struct Decision {
    /// Position of the split axis within the cell's axes.
    k: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

/// Grows a tree breadth-first for `depth` rounds.
pub fn build_tree(data: &TreeData<'_>, depth: usize, rule: SplitRule) -> Result<TreePartition> {
    if data.labels.len() != data.x.rows() || data.mask.rows() != data.x.rows() {
        return Err(Error::Config(format!(
            "tree inputs disagree: {} rows, {} labels, {} mask rows",
            data.x.rows(),
            data.labels.len(),
            data.mask.rows()
        )));
    }
    if data.axes.is_empty() && depth > 0 {
        return Err(Error::Config(
            "cannot split a tree with no public axes".into(),
        ));
    }
    let mut rng = match rule {
        SplitRule::MaxEdgeRandom { seed } => Some(substream(seed, 0)),
        _ => None,
    };
    let mut arena = vec![Grow {
        cell: Cell::unit(data.axes),
        samples: (0..data.x.rows()).collect(),
        split: None,
    }];
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::with_capacity(frontier.len() * 2);
        for node in frontier {
            let decision = match rule {
                SplitRule::MaxEdge => Some(max_edge_decision(data, &arena[node])),
                SplitRule::MaxEdgeRandom { .. } => Some(random_decision(
                    data,
                    &arena[node],
                    rng.as_mut().expect("rng for random rule"),
                )),
                SplitRule::Cart { min_leaf } => cart_decision(data, &arena[node], min_leaf.max(1)),
            };
            let Some(d) = decision else { continue };
            let parent = &arena[node].cell;
            let mut lcell = parent.clone();
            lcell.upper[d.k] = d.threshold;
            let mut rcell = parent.clone();
            rcell.lower[d.k] = d.threshold;
            let axis = parent.axes[d.k];
            let l = arena.len();
            arena.push(Grow {
                cell: lcell,
                samples: d.left,
                split: None,
            });
            arena.push(Grow {
                cell: rcell,
                samples: d.right,
                split: None,
            });
            arena[node].split = Some((axis, d.threshold, l, l + 1));
            arena[node].samples = Vec::new();
            next.extend([l, l + 1]);
        }
        frontier = next;
    }
    let mut leaf_count = 0;
    let root = assemble(&mut arena, 0, &mut leaf_count);
    Ok(TreePartition {
        axes: data.axes.to_vec(),
        depth,
        leaf_count,
        root,
    })
}

fn assemble(arena: &mut [Grow], node: usize, leaves: &mut usize) -> TreeNode {
    let cell = std::mem::replace(&mut arena[node].cell, Cell::unit(&[]));
    match arena[node].split {
        None => {
            let index = *leaves;
            *leaves += 1;
            TreeNode::Leaf { cell, index }
        }
        Some((axis, threshold, l, r)) => {
            let left = Box::new(assemble(arena, l, leaves));
            let right = Box::new(assemble(arena, r, leaves));
            TreeNode::Split {
                cell,
                axis,
                threshold,
                left,
                right,
            }
        }
    }
}

/// Population variance; zero for empty and singleton sets.
fn variance(labels: &[f64], idx: impl Iterator<Item = usize> + Clone) -> f64 {
    let mut n = 0usize;
    let mut sum = 0.0;
    for i in idx.clone() {
        n += 1;
        sum += labels[i];
    }
    if n < 2 {
        return 0.0;
    }
    let mean = sum / n as f64;
    idx.map(|i| (labels[i] - mean).powi(2)).sum::<f64>() / n as f64
}

#[inline]
fn ties(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

fn longest_edges(cell: &Cell) -> Vec<usize> {
    let widths = cell.widths();
    let longest = widths.iter().cloned().fold(0.0, f64::max);
    (0..widths.len())
        .filter(|&k| widths[k] == longest)
        .collect()
}

fn midpoint_split(data: &TreeData<'_>, grow: &Grow, k: usize) -> Decision {
    let cell = &grow.cell;
    let axis = cell.axes[k];
    let mid = 0.5 * (cell.lower[k] + cell.upper[k]);
    let (left, right) = grow
        .samples
        .iter()
        .filter(|&&i| !data.mask.get(i, axis))
        .partition(|&&i| data.x.get(i, axis) < mid);
    Decision {
        k,
        threshold: mid,
        left,
        right,
    }
}

fn max_edge_decision(data: &TreeData<'_>, grow: &Grow) -> Decision {
    let mut best: Option<(f64, usize)> = None;
    for k in longest_edges(&grow.cell) {
        let axis = grow.cell.axes[k];
        let mid = 0.5 * (grow.cell.lower[k] + grow.cell.upper[k]);
        let avail = grow
            .samples
            .iter()
            .copied()
            .filter(|&i| !data.mask.get(i, axis));
        let lo = avail.clone().filter(|&i| data.x.get(i, axis) < mid);
        let hi = avail.filter(|&i| data.x.get(i, axis) >= mid);
        let g = variance(data.labels, lo) + variance(data.labels, hi);
        match best {
            Some((b, _)) if !(g < b && !ties(g, b)) => {}
            _ => best = Some((g, k)),
        }
    }
    let (_, k) = best.expect("a cell always has a longest edge");
    midpoint_split(data, grow, k)
}

fn random_decision(data: &TreeData<'_>, grow: &Grow, rng: &mut impl Rng) -> Decision {
    let candidates = longest_edges(&grow.cell);
    let k = candidates[rng.random_range(0..candidates.len())];
    midpoint_split(data, grow, k)
}

/// Best observed-threshold split by count-weighted child variance over the
/// samples usable on each axis. Falls back to the lowest longest-edge
/// midpoint when no threshold reduces the variance; returns `None` when no
/// axis has `2 * min_leaf` usable samples.
fn cart_decision(data: &TreeData<'_>, grow: &Grow, min_leaf: usize) -> Option<Decision> {
    let mut any_eligible = false;
    // (criterion, k, threshold)
    let mut best: Option<(f64, usize, f64)> = None;
    let mut sorted: Vec<(f64, f64)> = Vec::with_capacity(grow.samples.len());
    for (k, &axis) in grow.cell.axes.iter().enumerate() {
        sorted.clear();
        sorted.extend(
            grow.samples
                .iter()
                .filter(|&&i| !data.mask.get(i, axis))
                .map(|&i| (data.x.get(i, axis), data.labels[i])),
        );
        let m = sorted.len();
        if m < 2 * min_leaf {
            continue;
        }
        any_eligible = true;
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = sorted.iter().map(|p| p.1).sum();
        let total_sq: f64 = sorted.iter().map(|p| p.1 * p.1).sum();
        let parent = (total_sq - total * total / m as f64).max(0.0) / m as f64;
        let (mut sl, mut sql) = (0.0, 0.0);
        let mut axis_best: Option<(f64, f64)> = None;
        for pos in 1..m {
            let y = sorted[pos - 1].1;
            sl += y;
            sql += y * y;
            if pos < min_leaf || m - pos < min_leaf || sorted[pos - 1].0 >= sorted[pos].0 {
                continue;
            }
            let nl = pos as f64;
            let nr = (m - pos) as f64;
            let sse_l = (sql - sl * sl / nl).max(0.0);
            let sse_r = ((total_sq - sql) - (total - sl) * (total - sl) / nr).max(0.0);
            let crit = (sse_l + sse_r) / m as f64;
            if axis_best.is_none_or(|(b, _)| crit < b && !ties(crit, b)) {
                axis_best = Some((crit, 0.5 * (sorted[pos - 1].0 + sorted[pos].0)));
            }
        }
        if let Some((crit, thr)) = axis_best {
            let reduces = crit < parent && !ties(crit, parent);
            if reduces && best.is_none_or(|(b, _, _)| crit < b && !ties(crit, b)) {
                best = Some((crit, k, thr));
            }
        }
    }
    if !any_eligible {
        return None;
    }
    match best {
        Some((_, k, threshold)) => {
            let axis = grow.cell.axes[k];
            let (left, right) = grow
                .samples
                .iter()
                .filter(|&&i| !data.mask.get(i, axis))
                .partition(|&&i| data.x.get(i, axis) < threshold);
            Some(Decision {
                k,
                threshold,
                left,
                right,
            })
        }
        None => Some(midpoint_split(data, grow, longest_edges(&grow.cell)[0])),
    }
}

impl TreePartition {
    /// Single-leaf tree over `axes`.
    pub fn trivial(axes: &[usize]) -> Self {
        Self {
            axes: axes.to_vec(),
            depth: 0,
            leaf_count: 1,
            root: TreeNode::Leaf {
                cell: Cell::unit(axes),
                index: 0,
            },
        }
    }

    pub fn axes(&self) -> &[usize] {
        &self.axes
    }

    /// Number of splitting rounds requested when the tree was grown.
    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn leaf_count(&self) -> usize {
        self.leaf_count
    }

    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    /// Leaf index of the full feature vector `x`.
    pub fn leaf_index(&self, x: &[f64]) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { index, .. } => return *index,
                TreeNode::Split {
                    axis,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    node = if x[*axis] < *threshold { left } else { right };
                }
            }
        }
    }

    /// Leaf cells in index order.
    pub fn leaves(&self) -> Vec<&Cell> {
        fn walk<'a>(n: &'a TreeNode, out: &mut Vec<&'a Cell>) {
            match n {
                TreeNode::Leaf { cell, .. } => out.push(cell),
                TreeNode::Split { left, right, .. } => {
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::with_capacity(self.leaf_count);
        walk(&self.root, &mut out);
        out
    }

    /// Leaves reachable when coordinates marked private in `w` are unknown.
    pub fn potential_leaves(&self, x: &[f64], w: &[bool]) -> Vec<usize> {
        fn walk(n: &TreeNode, x: &[f64], w: &[bool], out: &mut Vec<usize>) {
            match n {
                TreeNode::Leaf { index, .. } => out.push(*index),
                TreeNode::Split {
                    axis,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if w[*axis] {
                        walk(left, x, w, out);
                        walk(right, x, w, out);
                    } else if x[*axis] < *threshold {
                        walk(left, x, w, out);
                    } else {
                        walk(right, x, w, out);
                    }
                }
            }
        }
        let mut out = Vec::new();
        walk(&self.root, x, w, &mut out);
        out
    }

    /// The tree cut back to `depth` splitting rounds, leaves renumbered.
    ///
    /// Breadth-first growth makes this identical to growing with `depth` directly.
    pub fn truncated(&self, depth: usize) -> Self {
        fn cut(n: &TreeNode, remaining: usize, leaves: &mut usize) -> TreeNode {
            match n {
                TreeNode::Split {
                    cell,
                    axis,
                    threshold,
                    left,
                    right,
                } if remaining > 0 => TreeNode::Split {
                    cell: cell.clone(),
                    axis: *axis,
                    threshold: *threshold,
                    left: Box::new(cut(left, remaining - 1, leaves)),
                    right: Box::new(cut(right, remaining - 1, leaves)),
                },
                _ => {
                    let index = *leaves;
                    *leaves += 1;
                    TreeNode::Leaf {
                        cell: n.cell().clone(),
                        index,
                    }
                }
            }
        }
        let mut leaf_count = 0;
        let root = cut(&self.root, depth, &mut leaf_count);
        Self {
            axes: self.axes.clone(),
            depth: depth.min(self.depth),
            leaf_count,
            root,
        }
    }

    fn hash_into(&self, h: &mut impl Hasher) {
        fn walk(n: &TreeNode, h: &mut impl Hasher) {
            match n {
                TreeNode::Leaf { index, .. } => index.hash(h),
                TreeNode::Split {
                    axis,
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    axis.hash(h);
                    threshold.to_bits().hash(h);
                    walk(left, h);
                    walk(right, h);
                }
            }
        }
        self.axes.hash(h);
        walk(&self.root, h);
    }
}

/// Histogram on the private axes crossed with a tree on the public axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductPartition {
    dim: usize,
    hist: HistogramPartition,
    tree: TreePartition,
    grid_count: usize,
}

impl ProductPartition {
    pub fn new(hist: HistogramPartition, tree: TreePartition) -> Result<Self> {
        let dim = hist.axes().len() + tree.axes().len();
        let mut seen = vec![false; dim];
        for &a in hist.axes().iter().chain(tree.axes()) {
            if a >= dim || seen[a] {
                return Err(Error::Config(format!(
                    "private axes {:?} and public axes {:?} must partition 0..{dim}",
                    hist.axes(),
                    tree.axes()
                )));
            }
            seen[a] = true;
        }
        let grid_count = hist
            .cell_count()
            .checked_mul(tree.leaf_count())
            .ok_or_else(|| Error::Capacity("grid count overflows".into()))?;
        Ok(Self {
            dim,
            hist,
            tree,
            grid_count,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hist(&self) -> &HistogramPartition {
        &self.hist
    }

    pub fn tree(&self) -> &TreePartition {
        &self.tree
    }

    pub fn private_axes(&self) -> &[usize] {
        self.hist.axes()
    }

    pub fn public_axes(&self) -> &[usize] {
        self.tree.axes()
    }

    pub fn grid_count(&self) -> usize {
        self.grid_count
    }

    #[inline]
    pub fn flat_index(&self, hist_cell: usize, leaf: usize) -> usize {
        hist_cell * self.tree.leaf_count() + leaf
    }

    /// Splits a flat grid index into `(histogram cell, tree leaf)`.
    #[inline]
    pub fn split_index(&self, j: usize) -> (usize, usize) {
        (j / self.tree.leaf_count(), j % self.tree.leaf_count())
    }

    /// Flat index of the grid containing `x`.
    pub fn grid_index(&self, x: &[f64]) -> usize {
        debug_assert_eq!(x.len(), self.dim);
        self.flat_index(self.hist.cell_index(x), self.tree.leaf_index(x))
    }

    /// Grid `j` as a cell over all `dim` axes in ascending axis order.
    pub fn grid_cell(&self, j: usize) -> Cell {
        let (h, k) = self.split_index(j);
        let hc = self.hist.cell(h);
        let leaves = self.tree.leaves();
        let tc = leaves[k];
        let mut lower = vec![0.0; self.dim];
        let mut upper = vec![1.0; self.dim];
        for c in [&hc, tc] {
            for (i, &a) in c.axes.iter().enumerate() {
                lower[a] = c.lower[i];
                upper[a] = c.upper[i];
            }
        }
        Cell {
            lower,
            upper,
            axes: (0..self.dim).collect(),
        }
    }

    /// Sorted flat indices of the grids that could hold `x` given only the
    /// coordinates that `w` marks public.
    pub fn potential_grids(&self, x: &[f64], w: &[bool]) -> Vec<usize> {
        let hs = self.hist.potential_cells(x, w);
        let ks = self.tree.potential_leaves(x, w);
        let mut out = Vec::with_capacity(hs.len() * ks.len());
        for &h in &hs {
            out.extend(ks.iter().map(|&k| self.flat_index(h, k)));
        }
        out
    }

    /// Structural fingerprint used to detect records built against another partition.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.dim.hash(&mut h);
        self.hist.bins().hash(&mut h);
        self.hist.axes().hash(&mut h);
        self.tree.hash_into(&mut h);
        h.finish()
    }
}
