//! Regression under semi-feature local differential privacy.
//!
//! Users may keep any subset of their features private while the rest stay
//! public. The estimator crosses a histogram over the private axes with a
//! data-dependent tree over the public axes, privatizes labels and grid
//! indicators locally, and averages the debiased reports cell by cell.
//!
//! ```
//! use histoftree::estimators::{fit_ad_hist_of_tree, AdaptiveParams};
//! use histoftree::harness::synthetic::{gen_mask_gamma, gen_synthetic};
//! use histoftree::mechanisms::{IndicatorMechanism, PrivacyBudget};
//! use histoftree::partition::SplitRule;
//!
//! let data = gen_synthetic(2_000, 1)?;
//! let mask = gen_mask_gamma(data.len(), data.dim(), 1.0);
//! let params = AdaptiveParams {
//!     c_approx: 1.0,
//!     t_offset: 0,
//!     rule: SplitRule::MaxEdge,
//!     mechanism: IndicatorMechanism::GeneralizedRr,
//! };
//! let (model, selection) = fit_ad_hist_of_tree(&data, &mask, PrivacyBudget::new(4.0, 0.5)?, params, 7)?;
//! let y_hat = model.predict(&[0.2, 0.4, 0.6, 0.8, 0.5])?;
//! assert!(y_hat.abs() <= data.bound);
//! assert!(selection.s < data.dim());
//! # Ok::<(), histoftree::Error>(())
//! ```

pub mod baselines;
pub mod data;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod mechanisms;
pub mod partition;
pub mod rng;

pub use data::{Dataset, MaskMatrix, Matrix, Provenance};
pub use error::{Error, Result};
