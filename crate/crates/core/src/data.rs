//! Feature matrices, privacy masks and labelled datasets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    data: Vec<f64>,
    rows: usize,
    cols: usize,
}

impl Matrix {
    pub fn new(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Config(format!(
                "matrix buffer has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { data, rows, cols })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            data: vec![0.0; rows * cols],
            rows,
            cols,
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::Config(format!(
                    "row {i} has {} columns, expected {cols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            data,
            rows: rows.len(),
            cols,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Copies the listed rows, in order.
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut data = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        Self {
            data,
            rows: idx.len(),
            cols: self.cols,
        }
    }

    /// Copies the listed columns, in order.
    pub fn select_cols(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            let r = self.row(i);
            data.extend(cols.iter().map(|&c| r[c]));
        }
        Self {
            data,
            rows: self.rows,
            cols: cols.len(),
        }
    }
}

/// Per-user, per-feature privacy preferences: `true` marks a feature the user keeps private.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskMatrix {
    bits: Vec<bool>,
    rows: usize,
    cols: usize,
}

impl MaskMatrix {
    pub fn new(bits: Vec<bool>, rows: usize, cols: usize) -> Result<Self> {
        if bits.len() != rows * cols {
            return Err(Error::Config(format!(
                "mask buffer has {} entries, expected {rows}x{cols}",
                bits.len()
            )));
        }
        Ok(Self { bits, rows, cols })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for l in 0..cols {
                bits.push(f(i, l));
            }
        }
        Self { bits, rows, cols }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            bits: vec![false; rows * cols],
            rows,
            cols,
        }
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self {
            bits: vec![true; rows * cols],
            rows,
            cols,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[bool] {
        &self.bits[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, i: usize, l: usize) -> bool {
        self.bits[i * self.cols + l]
    }

    /// Number of private features of each user.
    pub fn row_private_counts(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|i| self.row(i).iter().filter(|&&b| b).count())
            .collect()
    }

    /// Number of users keeping each feature private.
    pub fn column_sums(&self) -> Vec<usize> {
        let mut sums = vec![0; self.cols];
        for i in 0..self.rows {
            for (s, &b) in sums.iter_mut().zip(self.row(i)) {
                *s += usize::from(b);
            }
        }
        sums
    }

    /// Columns private for every user, if every other column is public for every user.
    pub fn aligned_private_axes(&self) -> Option<Vec<usize>> {
        let sums = self.column_sums();
        if sums.iter().all(|&s| s == 0 || s == self.rows) {
            Some(
                (0..self.cols)
                    .filter(|&l| self.rows > 0 && sums[l] == self.rows)
                    .collect(),
            )
        } else {
            None
        }
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        let mut bits = Vec::with_capacity(idx.len() * self.cols);
        for &i in idx {
            bits.extend_from_slice(self.row(i));
        }
        Self {
            bits,
            rows: idx.len(),
            cols: self.cols,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Synthetic { seed: u64 },
    Csv { path: String },
    Derived,
}

/// Features scaled to `[0,1]^d` with labels bounded by `bound` in absolute value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    /// Promised label bound `M`: every `|y| <= bound`.
    pub bound: f64,
    /// Width of the label domain, used as the sensitivity of label-only baselines.
    pub label_range: f64,
    pub provenance: Provenance,
    /// Number of labels clipped into `[-bound, bound]` while building the dataset.
    pub clipped: usize,
}

impl Dataset {
    pub fn new(
        x: Matrix,
        y: Vec<f64>,
        bound: f64,
        label_range: f64,
        provenance: Provenance,
    ) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::Config(format!(
                "{} feature rows but {} labels",
                x.rows(),
                y.len()
            )));
        }
        if !bound.is_finite() || bound <= 0.0 {
            return Err(Error::Parameter(format!(
                "label bound must be positive, got {bound}"
            )));
        }
        if let Some(v) = x.as_slice().iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Domain(format!("feature value {v} outside [0,1]")));
        }
        if let Some(v) = y.iter().find(|v| v.abs() > bound) {
            return Err(Error::Domain(format!("label {v} exceeds bound {bound}")));
        }
        Ok(Self {
            x,
            y,
            bound,
            label_range,
            provenance,
            clipped: 0,
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select_rows(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            bound: self.bound,
            label_range: self.label_range,
            provenance: Provenance::Derived,
            clipped: 0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_sums_and_alignment() {
        let w = MaskMatrix::from_fn(4, 3, |_, l| l == 0);
        assert_eq!(w.column_sums(), vec![4, 0, 0]);
        assert_eq!(w.row_private_counts(), vec![1; 4]);
        assert_eq!(w.aligned_private_axes(), Some(vec![0]));

        let w = MaskMatrix::from_fn(4, 3, |i, l| l == 0 && i < 2);
        assert_eq!(w.aligned_private_axes(), None);
    }

    #[test]
    fn dataset_rejects_out_of_range() {
        let x = Matrix::from_rows(&[vec![0.2, 1.1]]).unwrap();
        assert!(matches!(
            Dataset::new(x, vec![0.0], 1.0, 2.0, Provenance::Derived),
            Err(Error::Domain(_))
        ));
        let x = Matrix::from_rows(&[vec![0.2, 0.1]]).unwrap();
        assert!(matches!(
            Dataset::new(x, vec![2.0], 1.0, 2.0, Provenance::Derived),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn column_selection() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let c = m.select_cols(&[2, 0]);
        assert_eq!(c.row(1), &[6.0, 4.0]);
        let r = m.select_rows(&[1]);
        assert_eq!(r.row(0), &[4.0, 5.0, 6.0]);
    }
}
