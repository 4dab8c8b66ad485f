//! Comparison methods: non-private CART, label-private trees, feature
//! obfuscation, and a fully private histogram.

pub mod cart;
pub mod hist;
pub mod krr;
pub mod label_dt;

pub use cart::{fit_cart, fit_cart_on, CartModel};
pub use hist::{fit_private_histogram, PrivateHistModel};
pub use krr::{fit_krr, privatize_krr};
pub use label_dt::{fit_label_dt, fit_par_dt, noisy_labels};
