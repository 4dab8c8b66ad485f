//! Feature obfuscation: private coordinates pass through k-ary randomized
//! response, then an ordinary tree is fitted on the perturbed data.

use crate::baselines::cart::{fit_cart, CartModel};
use crate::data::{Dataset, MaskMatrix, Matrix};
use crate::error::{Error, Result};
use crate::mechanisms::{grr_sample, sample_laplace};
use crate::rng::{Channel, UserStreams};

/// Bin of `v` among `k` equal bins of `[0,1]`.
pub fn krr_bin(v: f64, k: usize) -> usize {
    ((v * k as f64) as usize).min(k - 1)
}

pub fn krr_center(bin: usize, k: usize) -> f64 {
    (bin as f64 + 0.5) / k as f64
}

/// Perturbed features and labels. User `i` with `s_i` private features spends
/// `eps / (s_i + 1)` on the label and on each private coordinate.
pub fn privatize_krr(
    data: &Dataset,
    mask: &MaskMatrix,
    eps: f64,
    k: usize,
    seed: u64,
) -> Result<(Matrix, Vec<f64>)> {
    if k < 2 {
        return Err(Error::Parameter(format!("k must be at least 2, got {k}")));
    }
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Parameter(format!(
            "epsilon must be positive, got {eps}"
        )));
    }
    if mask.rows() != data.len() || mask.cols() != data.dim() {
        return Err(Error::Config("mask shape does not match the data".into()));
    }
    let mut x = data.x.clone();
    let mut y = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let w = mask.row(i);
        let share = eps / (w.iter().filter(|&&b| b).count() + 1) as f64;
        let streams = UserStreams::new(seed, i);
        y.push(
            data.y[i]
                + sample_laplace(
                    data.label_range / share,
                    &mut streams.channel(Channel::Label),
                ),
        );
        let mut rng = streams.channel(Channel::Feature);
        for (v, _) in x.row_mut(i).iter_mut().zip(w).filter(|(_, &b)| b) {
            *v = krr_center(grr_sample(krr_bin(*v, k), k, share, &mut rng), k);
        }
    }
    Ok((x, y))
}

pub fn fit_krr(
    data: &Dataset,
    mask: &MaskMatrix,
    eps: f64,
    k: usize,
    max_depth: usize,
    min_leaf: usize,
    seed: u64,
) -> Result<CartModel> {
    let (x, y) = privatize_krr(data, mask, eps, k, seed)?;
    fit_cart(&x, &y, max_depth, min_leaf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::label_dt::fit_label_dt;
    use crate::data::Provenance;

    fn data() -> Dataset {
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|i| vec![i as f64 / 39.0, ((i * 3) % 40) as f64 / 39.0])
            .collect();
        let y = rows.iter().map(|r| r[0] - r[1]).collect();
        Dataset::new(
            Matrix::from_rows(&rows).unwrap(),
            y,
            1.0,
            2.0,
            Provenance::Derived,
        )
        .unwrap()
    }

    #[test]
    fn binning() {
        assert_eq!(krr_bin(0.3, 2), 0);
        assert_eq!(krr_center(0, 2), 0.25);
        assert_eq!(krr_bin(1.0, 4), 3);
    }

    #[test]
    fn public_mask_matches_label_dt() {
        let d = data();
        let w = MaskMatrix::zeros(d.len(), 2);
        let (x, _) = privatize_krr(&d, &w, 2.0, 3, 4).unwrap();
        assert_eq!(x, d.x);
        assert_eq!(
            fit_krr(&d, &w, 2.0, 3, 4, 1, 4).unwrap(),
            fit_label_dt(&d, 2.0, 4, 1, 4).unwrap()
        );
    }

    #[test]
    fn private_coordinates_land_on_centers() {
        let d = data();
        let w = MaskMatrix::from_fn(d.len(), 2, |_, l| l == 1);
        let (x, _) = privatize_krr(&d, &w, 1.0, 4, 4).unwrap();
        for i in 0..d.len() {
            assert_eq!(x.get(i, 0), d.x.get(i, 0));
            assert!([0.125, 0.375, 0.625, 0.875].contains(&x.get(i, 1)));
        }
        assert!(matches!(
            privatize_krr(&d, &w, 1.0, 1, 4),
            Err(Error::Parameter(_))
        ));
    }
}
