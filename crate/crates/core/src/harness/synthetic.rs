//! The five-dimensional sine benchmark and privacy-mask generators.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, MaskMatrix, Matrix, Provenance};
use crate::error::{Error, Result};
use crate::rng::substream;

pub const SYNTHETIC_DIM: usize = 5;

/// Signal bound `3 sin 1 < 3` plus five noise standard deviations.
pub const SYNTHETIC_BOUND: f64 = 8.0;

/// `sin x1 + sin x2 + sin x5`.
pub fn regression_function(x: &[f64]) -> f64 {
    x[0].sin() + x[1].sin() + x[4].sin()
}

/// `n` draws with uniform features and standard normal noise; labels are
/// clipped to the bound and the number of clipped labels is recorded.
pub fn gen_synthetic(n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::EmptyData(
            "synthetic sample size must be positive".into(),
        ));
    }
    let mut rng = substream(seed, 0);
    let mut x = Matrix::zeros(n, SYNTHETIC_DIM);
    let mut y = Vec::with_capacity(n);
    let mut clipped = 0;
    for i in 0..n {
        let row = x.row_mut(i);
        row.iter_mut().for_each(|v| *v = rng.random());
        let noise: f64 = rng.sample(StandardNormal);
        let v = regression_function(row) + noise;
        if v.abs() > SYNTHETIC_BOUND {
            clipped += 1;
        }
        y.push(v.clamp(-SYNTHETIC_BOUND, SYNTHETIC_BOUND));
    }
    let range = label_range(&y);
    let mut data = Dataset::new(x, y, SYNTHETIC_BOUND, range, Provenance::Synthetic { seed })?;
    data.clipped = clipped;
    Ok(data)
}

pub(crate) fn label_range(y: &[f64]) -> f64 {
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi >= lo {
        hi - lo
    } else {
        0.0
    }
}

/// First `s_star` features private for everyone.
pub fn gen_mask_aligned(n: usize, d: usize, s_star: usize) -> MaskMatrix {
    MaskMatrix::from_fn(n, d, |_, l| l < s_star)
}

/// User `i` (1-based) keeps feature `l` (1-based) private iff `i <= n / l^gamma`.
pub fn gen_mask_gamma(n: usize, d: usize, gamma: f64) -> MaskMatrix {
    MaskMatrix::from_fn(n, d, |i, l| {
        (i + 1) as f64 <= n as f64 / ((l + 1) as f64).powf(gamma)
    })
}

/// User `i` (1-based) keeps feature `l` (0-based) private iff `i <= n / 10^{floor(l / s_star)}`.
pub fn gen_mask_realdata(n: usize, d: usize, s_star: usize) -> Result<MaskMatrix> {
    if s_star == 0 {
        return Err(Error::Parameter("s_star must be positive".into()));
    }
    Ok(MaskMatrix::from_fn(n, d, |i, l| {
        (i + 1) as f64 <= n as f64 / 10f64.powi((l / s_star) as i32)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LogBase {
    #[default]
    Natural,
    Two,
}

/// `max(1, ceil(log sqrt(d)))`.
pub fn realdata_s_star(d: usize, base: LogBase) -> usize {
    let r = (d as f64).sqrt();
    let l = match base {
        LogBase::Natural => r.ln(),
        LogBase::Two => r.log2(),
    };
    (l.ceil() as usize).max(1)
}
