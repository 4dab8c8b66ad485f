//! Local privatization primitives and a likelihood-ratio auditor.
//!
//! Each user releases a noisy label and a sparse vector of debiased grid
//! indicators. The indicator vector is nonzero only on the grids the user's
//! public coordinates leave possible, so public features cost no budget.
//!
//! Mechanism parameters follow one convention: the label mechanism with
//! parameter `e` has Laplace scale `4M/e`, the paired randomized response
//! keeps each bit with probability `e^{e/4} / (1 + e^{e/4})`, and the
//! generalized randomized response reports the truth with weight `e^{e/2}`.
//! Each of the three is `e/2`-private, so a label channel and an indicator
//! channel run at the same parameter `e` compose to `e`.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::ProductPartition;
use crate::rng::{Channel, UserStreams};

/// Total per-user budget and its split between the label and indicator channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrivacyBudget {
    pub epsilon: f64,
    /// Share of `epsilon` spent on the label.
    pub rho: f64,
}

impl PrivacyBudget {
    pub fn new(epsilon: f64, rho: f64) -> Result<Self> {
        if !epsilon.is_finite() || epsilon <= 0.0 {
            return Err(Error::Parameter(format!(
                "epsilon must be positive and finite, got {epsilon}"
            )));
        }
        if !(rho > 0.0 && rho < 1.0) {
            return Err(Error::Parameter(format!(
                "rho must lie in (0,1), got {rho}"
            )));
        }
        Ok(Self { epsilon, rho })
    }

    pub fn even(epsilon: f64) -> Result<Self> {
        Self::new(epsilon, 0.5)
    }

    /// Privacy loss of the label channel.
    pub fn label_epsilon(&self) -> f64 {
        self.rho * self.epsilon
    }

    /// Privacy loss of the indicator channel.
    pub fn indicator_epsilon(&self) -> f64 {
        (1.0 - self.rho) * self.epsilon
    }

    /// Parameter passed to [`laplace_label`]; twice the channel loss.
    pub fn label_param(&self) -> f64 {
        2.0 * self.label_epsilon()
    }

    /// Parameter passed to [`rr_indicator`] or [`generalized_rr`].
    pub fn indicator_param(&self) -> f64 {
        2.0 * self.indicator_epsilon()
    }
}

/// Which randomizer protects the grid indicators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IndicatorMechanism {
    /// One binary randomized response per potential grid.
    PairedRr,
    /// One categorical report over the potential grids.
    GeneralizedRr,
}

/// Replaces every random channel by its expectation. Exists for oracle tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NoiseMode {
    #[default]
    Random,
    Expected,
}

/// What one user releases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrivatizedRecord {
    pub y_tilde: f64,
    /// Debiased indicator estimates, sorted by grid index; absent grids are zero.
    pub v_tilde: Vec<(usize, f64)>,
    pub mechanism: IndicatorMechanism,
    /// Fingerprint of the partition the indicators refer to.
    pub partition: u64,
}

/// Standard Laplace draw scaled by `scale`.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    let u: f64 = rng.sample(Open01);
    let c = u - 0.5;
    -scale * c.signum() * (1.0 - 2.0 * c.abs()).ln()
}

/// Noise scale of [`laplace_label`].
pub fn laplace_scale(bound: f64, eps: f64) -> f64 {
    4.0 * bound / eps
}

/// `y + (4M/eps) * xi` with `xi` standard Laplace.
pub fn laplace_label<R: Rng + ?Sized>(y: f64, bound: f64, eps: f64, rng: &mut R) -> Result<f64> {
    if y.abs() > bound || y.is_nan() {
        return Err(Error::Domain(format!(
            "label {y} outside [-{bound}, {bound}]"
        )));
    }
    Ok(y + sample_laplace(laplace_scale(bound, eps), rng))
}

/// Constants `(C, q)` of the paired randomized response at parameter `eps`.
pub fn rr_constants(eps: f64) -> (f64, f64) {
    let e = (eps / 4.0).exp();
    ((e + 1.0) / (e - 1.0), 1.0 / (1.0 + e))
}

/// Debiased binary randomized response: unbiased for `bit`.
pub fn rr_indicator<R: Rng + ?Sized>(bit: bool, eps: f64, rng: &mut R) -> f64 {
    let (c, q) = rr_constants(eps);
    let keep = rng.random::<f64>() < 1.0 - q;
    let reported = if keep { bit } else { !bit };
    c * (f64::from(u8::from(reported)) - q)
}

/// Probability that the generalized randomized response reports the truth.
pub fn grr_truth_probability(support: usize, eps: f64) -> f64 {
    let e = (eps / 2.0).exp();
    e / (e + support as f64 - 1.0)
}

/// Samples a report `U` from `support` (sorted) and returns the debiased
/// indicator vector over `support`, unbiased for the one-hot vector of `truth`.
pub fn generalized_rr<R: Rng + ?Sized>(
    truth: usize,
    support: &[usize],
    eps: f64,
    rng: &mut R,
) -> Result<Vec<(usize, f64)>> {
    let pos = support
        .binary_search(&truth)
        .map_err(|_| Error::Domain(format!("true index {truth} is not in the support")))?;
    let e = (eps / 2.0).exp();
    let reported = grr_sample(pos, support.len(), eps, rng);
    Ok(grr_encode(
        support,
        reported,
        e,
        e + support.len() as f64 - 1.0,
    ))
}

/// Reports position `truth` out of `k` with weight `e^{eps/2}`, any other position with weight 1.
pub fn grr_sample<R: Rng + ?Sized>(truth: usize, k: usize, eps: f64, rng: &mut R) -> usize {
    if rng.random::<f64>() < grr_truth_probability(k, eps) {
        truth
    } else {
        let r = rng.random_range(0..k - 1);
        if r >= truth {
            r + 1
        } else {
            r
        }
    }
}

fn grr_encode(support: &[usize], reported: usize, e: f64, denom: f64) -> Vec<(usize, f64)> {
    let c = denom / (e - 1.0);
    let base = -c / denom;
    let hit = c * (1.0 - 1.0 / denom);
    support
        .iter()
        .enumerate()
        .map(|(p, &j)| (j, if p == reported { hit } else { base }))
        .collect()
}

/// Bundles the budget, label bound and mechanism choices for privatizing users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Privatizer {
    pub budget: PrivacyBudget,
    pub bound: f64,
    pub mechanism: IndicatorMechanism,
    pub noise: NoiseMode,
}

impl Privatizer {
    pub fn new(budget: PrivacyBudget, bound: f64, mechanism: IndicatorMechanism) -> Self {
        Self {
            budget,
            bound,
            mechanism,
            noise: NoiseMode::Random,
        }
    }

    pub fn with_noise(mut self, noise: NoiseMode) -> Self {
        self.noise = noise;
        self
    }

    /// The label release; depends only on the user's label stream.
    pub fn privatize_label(&self, y: f64, streams: &UserStreams) -> Result<f64> {
        match self.noise {
            NoiseMode::Random => laplace_label(
                y,
                self.bound,
                self.budget.label_param(),
                &mut streams.channel(Channel::Label),
            ),
            NoiseMode::Expected if y.abs() <= self.bound => Ok(y),
            NoiseMode::Expected => Err(Error::Domain(format!(
                "label {y} outside [-{0}, {0}]",
                self.bound
            ))),
        }
    }

    fn indicators(
        &self,
        truth: usize,
        support: &[usize],
        streams: &UserStreams,
    ) -> Result<Vec<(usize, f64)>> {
        if self.noise == NoiseMode::Expected {
            return Ok(support
                .iter()
                .map(|&j| (j, if j == truth { 1.0 } else { 0.0 }))
                .collect());
        }
        let eps = self.budget.indicator_param();
        let mut rng = streams.channel(Channel::Indicator);
        match self.mechanism {
            IndicatorMechanism::PairedRr => Ok(support
                .iter()
                .map(|&j| (j, rr_indicator(j == truth, eps, &mut rng)))
                .collect()),
            IndicatorMechanism::GeneralizedRr => generalized_rr(truth, support, eps, &mut rng),
        }
    }

    /// Indicators over all private cells crossed with the user's tree leaf.
    pub fn aligned_indicators(
        &self,
        x: &[f64],
        pp: &ProductPartition,
        streams: &UserStreams,
    ) -> Result<Vec<(usize, f64)>> {
        let leaf = pp.tree().leaf_index(x);
        let support: Vec<usize> = (0..pp.hist().cell_count())
            .map(|h| pp.flat_index(h, leaf))
            .collect();
        self.indicators(pp.grid_index(x), &support, streams)
    }

    /// Indicators over the potential grids of a user with mask row `w`.
    pub fn personalized_indicators(
        &self,
        x: &[f64],
        w: &[bool],
        pp: &ProductPartition,
        streams: &UserStreams,
    ) -> Result<Vec<(usize, f64)>> {
        self.indicators(pp.grid_index(x), &pp.potential_grids(x, w), streams)
    }

    /// Release for a user whose private features are exactly the histogram axes.
    pub fn privatize_aligned(
        &self,
        x: &[f64],
        y: f64,
        pp: &ProductPartition,
        streams: &UserStreams,
    ) -> Result<PrivatizedRecord> {
        let y_tilde = self.privatize_label(y, streams)?;
        let v_tilde = self.aligned_indicators(x, pp, streams)?;
        Ok(PrivatizedRecord {
            y_tilde,
            v_tilde,
            mechanism: self.mechanism,
            partition: pp.fingerprint(),
        })
    }

    /// Release for a user with private-feature mask row `w`; indicators are
    /// drawn over the potential grids only.
    pub fn privatize_personalized(
        &self,
        x: &[f64],
        y: f64,
        w: &[bool],
        pp: &ProductPartition,
        streams: &UserStreams,
    ) -> Result<PrivatizedRecord> {
        let y_tilde = self.privatize_label(y, streams)?;
        let v_tilde = self.personalized_indicators(x, w, pp, streams)?;
        Ok(PrivatizedRecord {
            y_tilde,
            v_tilde,
            mechanism: self.mechanism,
            partition: pp.fingerprint(),
        })
    }
}

/// A discrete indicator mechanism to audit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MechanismSpec {
    /// Paired randomized response over `grids` potential grids.
    PairedRr { grids: usize },
    /// Generalized randomized response over a support of `support` grids.
    GeneralizedRr { support: usize },
    /// Laplace label channel; continuous, so not enumerable.
    Laplace,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuditReport {
    /// Max likelihood ratio of the indicator channel over all input pairs and output atoms.
    pub indicator_ratio: f64,
    /// Analytic Laplace bound `exp(eps * 2M / 4M)`.
    pub label_bound: f64,
    pub combined_bound: f64,
    pub limit: f64,
    pub pass: bool,
}

const MAX_PAIRED_GRIDS: usize = 16;

/// Probability of output atom `atom` (bitmask of reported ones) given true grid `truth`.
fn paired_atom_probability(grids: usize, eps: f64, truth: usize, atom: u32) -> f64 {
    let e = (eps / 4.0).exp();
    let keep = e / (1.0 + e);
    (0..grids)
        .map(|j| {
            let bit = j == truth;
            let reported = atom >> j & 1 == 1;
            if bit == reported {
                keep
            } else {
                1.0 - keep
            }
        })
        .product()
}

fn grr_atom_probability(support: usize, eps: f64, truth: usize, atom: usize) -> f64 {
    let e = (eps / 2.0).exp();
    let denom = e + support as f64 - 1.0;
    if atom == truth {
        e / denom
    } else {
        1.0 / denom
    }
}

/// Likelihood ratio `max_atom P(atom | a) / P(atom | b)` of the indicator channel
/// for true grids `a` and `b` sharing the same public coordinates.
pub fn pair_ratio(spec: MechanismSpec, eps: f64, a: usize, b: usize) -> Result<f64> {
    match spec {
        MechanismSpec::PairedRr { grids } => {
            check_paired(grids)?;
            Ok((0..1u32 << grids)
                .map(|atom| {
                    paired_atom_probability(grids, eps, a, atom)
                        / paired_atom_probability(grids, eps, b, atom)
                })
                .fold(0.0, f64::max))
        }
        MechanismSpec::GeneralizedRr { support } => Ok((0..support)
            .map(|atom| {
                grr_atom_probability(support, eps, a, atom)
                    / grr_atom_probability(support, eps, b, atom)
            })
            .fold(0.0, f64::max)),
        MechanismSpec::Laplace => Err(Error::Unsupported(
            "the Laplace channel is continuous".into(),
        )),
    }
}

fn check_paired(grids: usize) -> Result<()> {
    if grids == 0 || grids > MAX_PAIRED_GRIDS {
        return Err(Error::Parameter(format!(
            "paired RR audit supports 1..={MAX_PAIRED_GRIDS} grids, got {grids}"
        )));
    }
    Ok(())
}

/// Exhaustive max likelihood ratio of the indicator channel at parameter `eps`.
pub fn audit_privacy_ratio(spec: MechanismSpec, eps: f64) -> Result<f64> {
    if eps.is_nan() || eps <= 0.0 {
        return Err(Error::Parameter(format!(
            "epsilon must be positive, got {eps}"
        )));
    }
    let inputs = match spec {
        MechanismSpec::PairedRr { grids } => {
            check_paired(grids)?;
            grids
        }
        MechanismSpec::GeneralizedRr { support } if support > 0 => support,
        MechanismSpec::GeneralizedRr { .. } => {
            return Err(Error::Parameter("empty support".into()))
        }
        MechanismSpec::Laplace => {
            return Err(Error::Unsupported(
                "the Laplace channel is continuous".into(),
            ))
        }
    };
    let mut worst: f64 = 1.0;
    for a in 0..inputs {
        for b in 0..inputs {
            worst = worst.max(pair_ratio(spec, eps, a, b)?);
        }
    }
    Ok(worst)
}

/// Audits a label channel and an indicator channel both run at parameter `eps`.
pub fn audit(spec: MechanismSpec, eps: f64) -> Result<AuditReport> {
    let indicator_ratio = audit_privacy_ratio(spec, eps)?;
    // |y - y'| <= 2M, scale 4M/eps
    let label_bound = (eps * 2.0 / 4.0).exp();
    let combined_bound = indicator_ratio * label_bound;
    let limit = eps.exp();
    let pass =
        indicator_ratio <= (eps / 2.0).exp() + 1e-12 && combined_bound <= limit * (1.0 + 1e-12);
    Ok(AuditReport {
        indicator_ratio,
        label_bound,
        combined_bound,
        limit,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;

    #[test]
    fn laplace_scale_and_domain() {
        assert_eq!(laplace_scale(1.0, 2.0), 2.0);
        assert!(laplace_scale(1.0, 4.0) < laplace_scale(1.0, 2.0));
        let mut rng = substream(1, 0);
        assert!(matches!(
            laplace_label(1.5, 1.0, 1.0, &mut rng),
            Err(Error::Domain(_))
        ));
        assert!(laplace_label(-1.0, 1.0, 1.0, &mut rng).is_ok());
    }

    #[test]
    fn rr_closed_forms_at_eps_four() {
        let (c, q) = rr_constants(4.0);
        let e = 1f64.exp();
        assert!((c - (e + 1.0) / (e - 1.0)).abs() < 1e-15);
        assert!((c - 2.163953).abs() < 1e-6);
        assert!((q - 0.268941).abs() < 1e-6);
        assert!((c * (1.0 - q) - 1.581977).abs() < 1e-6);
        assert!((-c * q + 0.581977).abs() < 1e-6);
        let mut rng = substream(2, 0);
        let mut seen = std::collections::BTreeSet::new();
        for _ in 0..200 {
            seen.insert(rr_indicator(true, 4.0, &mut rng).to_bits());
        }
        let vals: Vec<f64> = seen.into_iter().map(f64::from_bits).collect();
        assert_eq!(vals.len(), 2);
        assert!(
            (vals.iter().cloned().fold(f64::MIN, f64::max)
                - vals.iter().cloned().fold(f64::MAX, f64::min)
                - c)
                .abs()
                < 1e-12
        );
    }

    #[test]
    fn grr_degenerate_and_closed_form() {
        let mut rng = substream(3, 0);
        let v = generalized_rr(4, &[4], 1.3, &mut rng).unwrap();
        assert_eq!(v.len(), 1);
        assert!((v[0].1 - 1.0).abs() < 1e-12);
        assert!((grr_truth_probability(2, 2.0) - 0.731059).abs() < 1e-6);
        assert!((grr_truth_probability(4, 2.0) - 1f64.exp() / (1f64.exp() + 3.0)).abs() < 1e-15);
        assert!(matches!(
            generalized_rr(1, &[0, 2], 1.0, &mut rng),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn grr_reports_exactly_one_hit() {
        let mut rng = substream(4, 0);
        let support = [1, 5, 9, 12];
        for _ in 0..50 {
            let v = generalized_rr(9, &support, 2.0, &mut rng).unwrap();
            let idx: Vec<usize> = v.iter().map(|p| p.0).collect();
            assert_eq!(idx, support);
            let hi = v.iter().filter(|p| p.1 > 0.0).count();
            assert_eq!(hi, 1);
        }
    }

    #[test]
    fn budget_validation_and_split() {
        assert!(PrivacyBudget::new(0.0, 0.5).is_err());
        assert!(PrivacyBudget::new(1.0, 1.0).is_err());
        let b = PrivacyBudget::new(4.0, 0.7).unwrap();
        assert!((b.label_epsilon() + b.indicator_epsilon() - 4.0).abs() < 1e-12);
        let even = PrivacyBudget::even(4.0).unwrap();
        assert_eq!(even.label_param(), 4.0);
        assert_eq!(even.indicator_param(), 4.0);
    }

    #[test]
    fn audit_examples() {
        let e = 1f64.exp();
        let r = audit_privacy_ratio(MechanismSpec::PairedRr { grids: 2 }, 2.0).unwrap();
        assert!((r - e).abs() < 1e-12, "{r}");
        let r = audit_privacy_ratio(MechanismSpec::GeneralizedRr { support: 5 }, 2.0).unwrap();
        assert!((r - e).abs() < 1e-12);
        assert_eq!(
            pair_ratio(MechanismSpec::PairedRr { grids: 3 }, 2.0, 1, 1).unwrap(),
            1.0
        );
        assert_eq!(
            audit_privacy_ratio(MechanismSpec::PairedRr { grids: 1 }, 2.0).unwrap(),
            1.0
        );
        assert!(matches!(
            audit_privacy_ratio(MechanismSpec::Laplace, 1.0),
            Err(Error::Unsupported(_))
        ));
        assert!(
            audit(MechanismSpec::PairedRr { grids: 4 }, 2.0)
                .unwrap()
                .pass
        );
    }
}
