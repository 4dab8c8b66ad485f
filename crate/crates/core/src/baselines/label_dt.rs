//! Trees fitted on Laplace-noised labels: all features, or only the public ones.

use crate::baselines::cart::{fit_cart_on, CartModel};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mechanisms::sample_laplace;
use crate::rng::{Channel, UserStreams};

/// Adds Laplace noise of scale `label_range / eps` to every label, one user stream each.
pub fn noisy_labels(data: &Dataset, eps: f64, seed: u64) -> Result<Vec<f64>> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Parameter(format!(
            "epsilon must be positive, got {eps}"
        )));
    }
    let scale = data.label_range / eps;
    Ok(data
        .y
        .iter()
        .enumerate()
        .map(|(i, &y)| {
            y + sample_laplace(
                scale,
                &mut UserStreams::new(seed, i).channel(Channel::Label),
            )
        })
        .collect())
}

/// LabelDT: a tree on every feature, trained on privatized labels.
pub fn fit_label_dt(
    data: &Dataset,
    eps: f64,
    max_depth: usize,
    min_leaf: usize,
    seed: u64,
) -> Result<CartModel> {
    let all: Vec<usize> = (0..data.dim()).collect();
    fit_par_dt(data, &all, eps, max_depth, min_leaf, seed)
}

/// ParDT: a tree on `public_axes` only, trained on privatized labels.
pub fn fit_par_dt(
    data: &Dataset,
    public_axes: &[usize],
    eps: f64,
    max_depth: usize,
    min_leaf: usize,
    seed: u64,
) -> Result<CartModel> {
    let y = noisy_labels(data, eps, seed)?;
    fit_cart_on(&data.x, &y, public_axes, max_depth, min_leaf)
}
