//! Fully private histogram regression: every feature and the label are protected.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mechanisms::sample_laplace;
use crate::partition::{build_histogram, HistogramPartition};
use crate::rng::{Channel, UserStreams};

/// Noisy cell frequencies and label sums of a cubic histogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivateHistModel {
    hist: HistogramPartition,
    /// Estimated probability of each cell.
    marginal: Vec<f64>,
    /// Estimated `E[Y 1{cell}]` of each cell.
    joint: Vec<f64>,
    zeta: f64,
}

/// Each user releases a Laplace-noised one-hot cell vector and a noised
/// `y * one-hot` vector, each at half the budget.
pub fn fit_private_histogram(
    data: &Dataset,
    eps: f64,
    t: usize,
    zeta: f64,
    seed: u64,
) -> Result<PrivateHistModel> {
    if data.is_empty() {
        return Err(Error::EmptyData(
            "cannot fit a histogram on zero samples".into(),
        ));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Parameter(format!(
            "epsilon must be positive, got {eps}"
        )));
    }
    let hist = build_histogram(t, data.dim())?;
    let g = hist.cell_count();
    // one-hot vectors differ by 2 in l1; y * one-hot by at most 2M
    let marginal_scale = 2.0 / (eps / 2.0);
    let joint_scale = 2.0 * data.bound / (eps / 2.0);
    let mut marginal = vec![0.0; g];
    let mut joint = vec![0.0; g];
    for i in 0..data.len() {
        let streams = UserStreams::new(seed, i);
        let cell = hist.cell_index(data.x.row(i));
        let mut rng = streams.channel(Channel::Indicator);
        for m in marginal.iter_mut() {
            *m += sample_laplace(marginal_scale, &mut rng);
        }
        let mut rng = streams.channel(Channel::Label);
        for j in joint.iter_mut() {
            *j += sample_laplace(joint_scale, &mut rng);
        }
        marginal[cell] += 1.0;
        joint[cell] += data.y[i];
    }
    let n = data.len() as f64;
    marginal
        .iter_mut()
        .chain(joint.iter_mut())
        .for_each(|v| *v /= n);
    Ok(PrivateHistModel {
        hist,
        marginal,
        joint,
        zeta,
    })
}

impl PrivateHistModel {
    pub fn bins(&self) -> usize {
        self.hist.bins()
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    /// Same releases with another truncation level.
    pub fn with_zeta(&self, zeta: f64) -> Self {
        Self {
            zeta,
            ..self.clone()
        }
    }

    pub fn truncated(&self, cell: usize) -> bool {
        self.marginal[cell] < self.zeta
    }

    pub fn cell_value(&self, cell: usize) -> f64 {
        if self.truncated(cell) {
            0.0
        } else {
            self.joint[cell] / self.marginal[cell]
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        self.cell_value(self.hist.cell_index(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Matrix, Provenance};
    use crate::rng::substream;
    use rand::Rng;

    fn uniform(n: usize, d: usize, seed: u64) -> Dataset {
        let mut rng = substream(seed, 99);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
            .collect();
        let y = rows.iter().map(|r| r[0]).collect();
        Dataset::new(
            Matrix::from_rows(&rows).unwrap(),
            y,
            1.0,
            1.0,
            Provenance::Derived,
        )
        .unwrap()
    }

    #[test]
    fn full_truncation_predicts_zero() {
        let d = uniform(200, 2, 1);
        let m = fit_private_histogram(&d, 4.0, 2, 1.0, 3).unwrap();
        assert!((0..4).all(|c| m.truncated(c)));
        assert_eq!(m.predict(&[0.1, 0.9]), 0.0);
    }

    #[test]
    fn cells_with_mass_survive() {
        let d = uniform(10_000, 2, 2);
        let m = fit_private_histogram(&d, 4.0, 2, 0.01, 5).unwrap();
        assert!((0..4).all(|c| !m.truncated(c)));
        assert_eq!(m.with_zeta(0.05).zeta(), 0.05);
    }

    #[test]
    fn single_cell_is_the_noisy_mean() {
        let d = uniform(50, 3, 3);
        let m = fit_private_histogram(&d, 2.0, 1, -1e9, 7).unwrap();
        let v = m.predict(&[0.5, 0.5, 0.5]);
        assert_eq!(v, m.cell_value(0));
        assert!(matches!(
            fit_private_histogram(&d, 2.0, 0, 0.0, 7),
            Err(Error::Capacity(_))
        ));
    }
}
