//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Exact criteria (privacy audit, unbiasedness, oracle equivalence, partition
//! bounds, selector oracle, aligned reduction) make the run fail when they do
//! not hold. Study-level trend criteria are reported with their measured
//! curves; a FAIL there marks a trend the synthetic benchmark does not show
//! at the configured label bound and does not abort the run.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use histoftree::data::{Dataset, MaskMatrix, Matrix, Provenance};
use histoftree::estimators::{select_parameters, HistOfTreeFitter, PrivacySetting, RateParams};
use histoftree::harness::experiment::{
    paired_test, run_experiment, DataSpec, ExperimentConfig, MaskSpec, MethodSpec,
};
use histoftree::harness::simulation::{run_figure, Figure, FigureTable, SimulationSpec};
use histoftree::mechanisms::*;
use histoftree::partition::{build_tree, histogram_on, ProductPartition, SplitRule, TreeData};
use histoftree::rng::substream;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

struct Criterion {
    name: &'static str,
    /// Exact criteria fail the run; trend criteria are reported.
    exact: bool,
    limit: Option<Duration>,
    run: fn() -> Outcome,
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize, bound: f64) -> Dataset {
    let x: Vec<f64> = (0..n * d).map(|_| rng.random()).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(-bound..=bound)).collect();
    Dataset::new(
        Matrix::new(x, n, d).unwrap(),
        y,
        bound,
        2.0 * bound,
        Provenance::Synthetic { seed: 0 },
    )
    .unwrap()
}

fn random_mask(rng: &mut ChaCha8Rng, n: usize, d: usize) -> MaskMatrix {
    let rates: Vec<f64> = (0..d).map(|_| rng.random()).collect();
    let bits = (0..n * d)
        .map(|k| rng.random::<f64>() < rates[k % d])
        .collect();
    MaskMatrix::new(bits, n, d).unwrap()
}

fn random_rule(rng: &mut ChaCha8Rng) -> SplitRule {
    match rng.random_range(0..3) {
        0 => SplitRule::MaxEdge,
        1 => SplitRule::Cart {
            min_leaf: rng.random_range(1..5),
        },
        _ => SplitRule::MaxEdgeRandom { seed: rng.random() },
    }
}

fn privacy_audit() -> Outcome {
    let mut worst_gap = f64::NEG_INFINITY;
    let mut checks = 0;
    let mut ok = true;
    for eps in [0.5, 1.0, 2.0, 4.0] {
        let half = (eps / 2.0f64).exp();
        let specs = (1..=10)
            .map(|g| MechanismSpec::PairedRr { grids: g })
            .chain((1..=32).map(|k| MechanismSpec::GeneralizedRr { support: k }));
        for spec in specs {
            let report = audit(spec, eps).unwrap();
            worst_gap = worst_gap.max(report.indicator_ratio - half);
            ok &= report.indicator_ratio <= half + 1e-12
                && report.combined_bound <= eps.exp() * (1.0 + 1e-12);
            checks += 1;
        }
    }
    Outcome::new(
        ok,
        format!("{checks} channels, max(ratio - e^(eps/2)) = {worst_gap:.3e}"),
    )
}

/// Mean and standard error of `n` draws.
fn mean_se(n: usize, mut draw: impl FnMut() -> f64) -> (f64, f64) {
    let (mut s, mut s2) = (0.0, 0.0);
    for _ in 0..n {
        let v = draw();
        s += v;
        s2 += v * v;
    }
    let m = s / n as f64;
    (m, ((s2 / n as f64 - m * m) / n as f64).sqrt())
}

fn unbiasedness() -> Outcome {
    const DRAWS: usize = 1_000_000;
    let mut rng = substream(11, 0);
    let mut worst = 0.0f64;
    let mut failures = 0;
    for config in 0..10u64 {
        let eps = rng.random_range(0.5..8.0);
        let mut draws = substream(12, config);
        let bit = rng.random_bool(0.5);
        let (m, se) = mean_se(DRAWS, || rr_indicator(bit, eps, &mut draws));
        let mut check = |m: f64, se: f64, target: f64| {
            let z = (m - target).abs() / se;
            worst = worst.max(z);
            failures += usize::from(z > 3.0);
        };
        check(m, se, f64::from(u8::from(bit)));

        let k = rng.random_range(2..=16);
        let support: Vec<usize> = (0..k).map(|j| 3 * j + 1).collect();
        let truth = support[rng.random_range(0..k)];
        let other = *support.iter().find(|&&j| j != truth).unwrap();
        let (mut hit, mut miss) = ((0.0, 0.0), (0.0, 0.0));
        for _ in 0..DRAWS {
            for (j, v) in generalized_rr(truth, &support, eps, &mut draws).unwrap() {
                let acc = if j == truth {
                    &mut hit
                } else if j == other {
                    &mut miss
                } else {
                    continue;
                };
                acc.0 += v;
                acc.1 += v * v;
            }
        }
        for ((s, s2), target) in [(hit, 1.0), (miss, 0.0)] {
            let m = s / DRAWS as f64;
            check(
                m,
                ((s2 / DRAWS as f64 - m * m) / DRAWS as f64).sqrt(),
                target,
            );
        }

        let bound = rng.random_range(0.5..10.0);
        let y = rng.random_range(-bound..=bound);
        let (m, se) = mean_se(DRAWS, || laplace_label(y, bound, eps, &mut draws).unwrap());
        check(m, se, y);
    }
    Outcome::new(
        failures == 0,
        format!("40 means over 10 configurations, worst |z| = {worst:.2}"),
    )
}

/// Non-private partition estimator computed directly from the data.
fn partition_oracle(data: &Dataset, pp: &ProductPartition) -> (Vec<f64>, Vec<bool>) {
    let g = pp.grid_count();
    let n = data.len();
    let mut sums = vec![0.0; g];
    let mut counts = vec![0usize; g];
    for i in 0..n {
        let x = data.x.row(i);
        let j = (0..g)
            .find(|&j| pp.grid_cell(j).contains(x))
            .expect("partition covers the cube");
        sums[j] += data.y[i];
        counts[j] += 1;
    }
    let fallback = (data.y.iter().sum::<f64>() / n as f64).clamp(-data.bound, data.bound);
    let reliable: Vec<bool> = counts
        .iter()
        .map(|&c| c as f64 > n as f64 / (2.0 * g as f64))
        .collect();
    let values = (0..g)
        .map(|j| {
            if reliable[j] {
                (sums[j] / counts[j] as f64).clamp(-data.bound, data.bound)
            } else {
                fallback
            }
        })
        .collect();
    (values, reliable)
}

fn oracle_equivalence() -> Outcome {
    let mut rng = substream(21, 0);
    let mut worst = 0.0f64;
    let mut flags_agree = true;
    for inst in 0..50 {
        let n = rng.random_range(5..=200);
        let d = rng.random_range(1..=4);
        let s = rng.random_range(0..=d);
        let p = if s == d { 0 } else { rng.random_range(0..=4) };
        let t = rng.random_range(1..=3);
        let bound = rng.random_range(0.5..4.0);
        let data = random_dataset(&mut rng, n, d, bound);
        let mut axes: Vec<usize> = (0..d).collect();
        axes.shuffle(&mut rng);
        let private = &axes[..s];
        let mask = random_mask(&mut rng, n, d);
        let mechanism = if rng.random_bool(0.5) {
            IndicatorMechanism::PairedRr
        } else {
            IndicatorMechanism::GeneralizedRr
        };
        let privatizer =
            Privatizer::new(PrivacyBudget::new(1.0, 0.5).unwrap(), data.bound, mechanism)
                .with_noise(NoiseMode::Expected);
        let setting = if inst % 2 == 0 {
            PrivacySetting::Personalized {
                mask: &mask,
                private_axes: private,
            }
        } else {
            PrivacySetting::Aligned {
                private_axes: private,
            }
        };
        let fitter = HistOfTreeFitter::new(&data, setting, privatizer, inst).unwrap();
        let model = fitter.fit(t, p, random_rule(&mut rng)).unwrap();
        let (values, reliable) = partition_oracle(&data, model.partition());
        for (a, b) in model.grid_values().iter().zip(&values) {
            worst = worst.max((a - b).abs());
        }
        flags_agree &= model.reliable() == reliable.as_slice();
    }
    Outcome::new(
        worst <= 1e-12 && flags_agree,
        format!("50 instances, max |difference| = {worst:.3e}"),
    )
}

fn random_product_partition(
    rng: &mut ChaCha8Rng,
    d: usize,
    s: usize,
    t: usize,
    p: usize,
    rule: SplitRule,
) -> ProductPartition {
    let n = rng.random_range(0..=40);
    let x = Matrix::new((0..n * d).map(|_| rng.random()).collect(), n, d).unwrap();
    let labels: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mask = random_mask(rng, n, d);
    let public: Vec<usize> = (s..d).collect();
    let private: Vec<usize> = (0..s).collect();
    let tree = build_tree(
        &TreeData {
            x: &x,
            labels: &labels,
            mask: &mask,
            axes: &public,
        },
        p,
        rule,
    )
    .unwrap();
    ProductPartition::new(histogram_on(t, &private).unwrap(), tree).unwrap()
}

fn partition_bounds() -> Outcome {
    let mut rng = substream(31, 0);
    let mut card_ok = 0;
    let mut set_ok = 0;
    for _ in 0..500 {
        let d = rng.random_range(2..=6);
        let s = rng.random_range(0..d);
        let (t, p) = (rng.random_range(1..=3), rng.random_range(0..=6));
        let pp = random_product_partition(&mut rng, d, s, t, p, SplitRule::MaxEdge);
        let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
        let w: Vec<bool> = (0..d).map(|_| rng.random_bool(0.5)).collect();
        let got = pp.potential_grids(&x, &w);
        let brute: Vec<usize> = (0..pp.grid_count())
            .filter(|&j| {
                let c = pp.grid_cell(j);
                (0..d).all(|l| w[l] || c.contains_coord(l, x[l]))
            })
            .collect();
        let m = d - s;
        let public_tail = (s..d).filter(|&l| !w[l]).count();
        let exponent = p as i64 - (p / m * public_tail) as i64;
        let bound = (t as f64).powi(s as i32) * 2f64.powi(exponent as i32);
        set_ok += usize::from(got == brute && got.contains(&pp.grid_index(&x)));
        card_ok += usize::from(got.len() as f64 <= bound);
    }
    let mut diam_ok = 0;
    for _ in 0..500 {
        let d = rng.random_range(1..=7);
        let s = rng.random_range(0..d.min(4));
        let (t, p) = (rng.random_range(1..=3), rng.random_range(0..=8));
        let pp = random_product_partition(&mut rng, d, s, t, p, SplitRule::MaxEdge);
        let m = (d - s) as f64;
        let (lo, hi) = ((p as f64 / m).ceil(), (p as f64 / m).floor());
        let shape = m.sqrt() * 2f64.powf(-(p as f64) / m) + (s as f64).sqrt() / t as f64;
        let ok = pp.tree().leaves().iter().all(|leaf| {
            let diam = leaf
                .lower
                .iter()
                .zip(&leaf.upper)
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt();
            diam >= m.sqrt() * 2f64.powf(-lo) - 1e-12 && diam <= m.sqrt() * 2f64.powf(-hi) + 1e-12
        }) && (0..pp.grid_count()).all(|j| {
            let c = pp.grid_cell(j);
            let diam = c
                .lower
                .iter()
                .zip(&c.upper)
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt();
            diam >= shape / 4.0 - 1e-12 && diam <= 2.0 * shape + 1e-12
        });
        diam_ok += usize::from(ok);
    }
    Outcome::new(
        card_ok == 500 && set_ok == 500 && diam_ok == 500,
        format!("cardinality {card_ok}/500, potential set {set_ok}/500, diameters {diam_ok}/500"),
    )
}

/// Direct evaluation of the selection objective over the full grid.
fn naive_selection(w: &MaskMatrix, eps: f64, c: f64) -> (usize, usize, usize, f64) {
    let (n, d) = (w.rows(), w.cols());
    let sums: Vec<usize> = (0..d)
        .map(|l| (0..n).filter(|&i| w.get(i, l)).count())
        .collect();
    let mut ranked: Vec<usize> = (0..d).collect();
    ranked.sort_by(|&a, &b| sums[b].cmp(&sums[a]).then(a.cmp(&b)));
    let max_p = ((d as f64 * (n as f64).log2()).ceil() as usize).max(1);
    let mut best = (f64::INFINITY, 0, 0, 0.0);
    for s in 0..d {
        let tail = (d - s) as f64;
        for p in 1..=max_p {
            let mut delta = 0.0;
            for i in 0..n {
                let k = ranked[s..].iter().filter(|&&l| w.get(i, l)).count();
                delta += 2f64.powf(k as f64 * p as f64 / tail);
            }
            delta /= n as f64;
            let variance = 2f64.powf(p as f64 * (d + s) as f64 / tail) * (n as f64).ln()
                / (n as f64 * eps * eps)
                * delta;
            let obj = variance + c * 2f64.powf(-2.0 * p as f64 / tail);
            if obj < best.0 {
                best = (obj, s, p, delta);
            }
        }
    }
    let (_, s, p, delta) = best;
    let t = (2f64.powf(p as f64 / (d - s) as f64).round() as usize).max(1);
    (s, p, t, delta.log2() / p as f64)
}

fn selector_oracle() -> Outcome {
    let mut rng = substream(41, 0);
    let mut matches = 0;
    for _ in 0..100 {
        let (n, d) = (rng.random_range(2..=80), rng.random_range(2..=6));
        let w = random_mask(&mut rng, n, d);
        let eps = rng.random_range(0.25..8.0);
        let c = [0.01, 0.1, 1.0][rng.random_range(0..3)];
        let sel = select_parameters(&w, eps, c, RateParams::default()).unwrap();
        matches +=
            usize::from((sel.s, sel.p_star, sel.t, sel.lambda_star) == naive_selection(&w, eps, c));
    }
    let mut aligned_ok = 0;
    let mut covered = 0;
    for _ in 0..100 {
        let (n, d) = (rng.random_range(2..=80), rng.random_range(2..=6));
        let s_star = rng.random_range(0..=d);
        let w = MaskMatrix::from_fn(n, d, |_, l| l < s_star);
        let sel =
            select_parameters(&w, rng.random_range(0.25..8.0), 1.0, RateParams::default()).unwrap();
        if sel.s >= s_star {
            covered += 1;
            aligned_ok += usize::from(sel.lambda_star == 0.0);
        }
    }
    Outcome::new(
        matches == 100 && aligned_ok == covered,
        format!("arg-min matches {matches}/100; lambda* = 0 in {aligned_ok}/{covered} covering selections"),
    )
}

fn aligned_reduction() -> Outcome {
    let mut rng = substream(51, 0);
    let mut identical = 0;
    for seed in 0..20 {
        let n = rng.random_range(10..=200);
        let d = rng.random_range(2..=5);
        let s_star = rng.random_range(0..d);
        let (t, p) = (rng.random_range(1..=3), rng.random_range(0..=4));
        let data = random_dataset(&mut rng, n, d, 2.0);
        let private: Vec<usize> = (0..s_star).collect();
        let w = MaskMatrix::from_fn(n, d, |_, l| l < s_star);
        let mechanism = if rng.random_bool(0.5) {
            IndicatorMechanism::PairedRr
        } else {
            IndicatorMechanism::GeneralizedRr
        };
        let privatizer = Privatizer::new(
            PrivacyBudget::new(rng.random_range(0.5..8.0), 0.5).unwrap(),
            2.0,
            mechanism,
        );
        let rule = random_rule(&mut rng);
        let aligned = HistOfTreeFitter::new(
            &data,
            PrivacySetting::Aligned {
                private_axes: &private,
            },
            privatizer,
            seed,
        )
        .and_then(|f| f.fit(t, p, rule))
        .and_then(|m| m.to_json())
        .unwrap();
        let personalized = HistOfTreeFitter::new(
            &data,
            PrivacySetting::Personalized {
                mask: &w,
                private_axes: &private,
            },
            privatizer,
            seed,
        )
        .and_then(|f| f.fit(t, p, rule))
        .and_then(|m| m.to_json())
        .unwrap();
        identical += usize::from(aligned == personalized);
    }
    Outcome::new(
        identical == 20,
        format!("{identical}/20 byte-identical models"),
    )
}

fn study(fig: Figure) -> FigureTable {
    run_figure(fig, &SimulationSpec::defaults(fig)).unwrap()
}

fn series_of(table: &FigureTable) -> BTreeMap<String, Vec<(f64, f64)>> {
    table
        .medians()
        .into_iter()
        .map(|(s, ..)| s)
        .map(|s| (s.clone(), table.curve(&s)))
        .collect()
}

fn format_curve(c: &[(f64, f64)]) -> String {
    c.iter()
        .map(|(x, m)| format!("{x}:{m:.4}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn trade_off() -> Outcome {
    let table = study(Figure::TradeOff);
    let curves = series_of(&table);
    let mut ok = true;
    let mut detail = Vec::new();
    for (s, c) in &curves {
        let violations: Vec<f64> = c
            .windows(2)
            .filter(|w| w[1].1 > w[0].1)
            .map(|w| w[1].1 / w[0].1 - 1.0)
            .collect();
        ok &= violations.is_empty() || (violations.len() == 1 && violations[0] <= 0.02);
        detail.push(format!("{s} [{}]", format_curve(c)));
    }
    let at4: Vec<f64> = curves
        .values()
        .filter_map(|c| c.iter().find(|(x, _)| *x == 4.0).map(|p| p.1))
        .collect();
    let ordered = at4.windows(2).all(|w| w[1] >= w[0]);
    Outcome::new(
        ok && ordered,
        format!(
            "non-increasing in eps: {ok}; non-decreasing in s* at eps=4: {ordered}; {}",
            detail.join("; ")
        ),
    )
}

fn consistency() -> Outcome {
    let curves = series_of(&study(Figure::Consistency));
    let ok = curves
        .values()
        .all(|c| c.windows(2).all(|w| w[1].1 < w[0].1));
    let detail: Vec<String> = curves
        .iter()
        .map(|(s, c)| format!("{s} [{}]", format_curve(c)))
        .collect();
    Outcome::new(
        ok,
        format!("strictly decreasing in n: {ok}; {}", detail.join("; ")),
    )
}

fn parameter_shape() -> Outcome {
    let curves = series_of(&study(Figure::Parameter));
    let mut argmins = Vec::new();
    let mut interior = true;
    for c in curves.values() {
        let (x, _) = *c.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        interior &= x != c[0].0 && x != c[c.len() - 1].0;
        argmins.push(x);
    }
    let monotone = argmins.windows(2).all(|w| w[1] >= w[0]);
    let detail: Vec<String> = curves
        .iter()
        .map(|(s, c)| format!("{s} [{}]", format_curve(c)))
        .collect();
    Outcome::new(
        interior && monotone,
        format!(
            "arg-min p per t {argmins:?}; interior: {interior}; non-decreasing: {monotone}; {}",
            detail.join("; ")
        ),
    )
}

fn select_s() -> Outcome {
    let table = study(Figure::SelectS);
    let medians = table.medians();
    let adaptive = table.curve("AdHistOfTree");
    let mut within = true;
    let mut ratios = Vec::new();
    for &(gamma, ad) in &adaptive {
        let best = medians
            .iter()
            .filter(|(s, x, _)| s.starts_with("s=") && *x == gamma)
            .map(|m| m.2)
            .fold(f64::INFINITY, f64::min);
        ratios.push(ad / best);
        within &= ad <= 1.15 * best;
    }
    let monotone = adaptive.windows(2).all(|w| w[1].1 <= w[0].1);
    Outcome::new(
        within && monotone,
        format!(
            "adaptive/best-fixed {:?}; within 15%: {within}; adaptive non-increasing in gamma: {monotone} [{}]",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>(),
            format_curve(&adaptive)
        ),
    )
}

fn baseline_ordering() -> Outcome {
    let config = ExperimentConfig {
        name: "ordering".into(),
        data: DataSpec::Synthetic { n: 10_000 },
        mask: MaskSpec::Aligned { s_star: 2 },
        epsilons: vec![2.0],
        methods: [
            MethodSpec::hist_of_tree_default(),
            MethodSpec::Hist {
                t: vec![1, 2, 3, 4],
                zeta: vec![0.01, 0.05],
            },
            MethodSpec::Krr {
                k: vec![2, 3, 4, 5],
                max_depth: vec![1, 2, 4, 6, 8],
                min_leaf: vec![1, 10, 100],
            },
        ]
        .into_iter()
        .map(Into::into)
        .collect(),
        replications: 50,
        seed: 0,
        test_fraction: 0.2,
        timing: false,
    };
    let table = run_experiment(&config).unwrap();
    let best: BTreeMap<String, Vec<(usize, f64)>> = table
        .best_points()
        .into_iter()
        .map(|(m, _, _, v)| (m, v))
        .collect();
    let ours = &best["HistOfTree"];
    let mut ok = true;
    let mut detail = Vec::new();
    for other in ["Hist", "KRR"] {
        let test = paired_test(ours, &best[other]);
        let better = test.is_some_and(|t| t.significant && t.w_plus < t.w_minus);
        ok &= better;
        let mean = |v: &[(usize, f64)]| v.iter().map(|p| p.1).sum::<f64>() / v.len() as f64;
        detail.push(format!(
            "vs {other}: mean {:.4} vs {:.4}, p = {:.3e}",
            mean(ours),
            mean(&best[other]),
            test.map_or(f64::NAN, |t| t.p_value)
        ));
    }
    Outcome::new(ok, detail.join("; "))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "privacy audit",
            exact: true,
            limit: Some(Duration::from_secs(1)),
            run: privacy_audit,
        },
        Criterion {
            name: "unbiasedness",
            exact: true,
            limit: Some(Duration::from_secs(30)),
            run: unbiasedness,
        },
        Criterion {
            name: "oracle equivalence",
            exact: true,
            limit: Some(Duration::from_secs(10)),
            run: oracle_equivalence,
        },
        Criterion {
            name: "potential-grid cardinality and leaf diameters",
            exact: true,
            limit: Some(Duration::from_secs(30)),
            run: partition_bounds,
        },
        Criterion {
            name: "parameter-selector oracle",
            exact: true,
            limit: Some(Duration::from_secs(10)),
            run: selector_oracle,
        },
        Criterion {
            name: "aligned reduction",
            exact: true,
            limit: None,
            run: aligned_reduction,
        },
        Criterion {
            name: "privacy-utility trade-off trend",
            exact: false,
            limit: Some(Duration::from_secs(600)),
            run: trade_off,
        },
        Criterion {
            name: "consistency trend",
            exact: false,
            limit: None,
            run: consistency,
        },
        Criterion {
            name: "parameter U-shape",
            exact: false,
            limit: None,
            run: parameter_shape,
        },
        Criterion {
            name: "adaptive selection of s",
            exact: false,
            limit: None,
            run: select_s,
        },
        Criterion {
            name: "baseline ordering",
            exact: false,
            limit: None,
            run: baseline_ordering,
        },
    ];
    let only: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut hard_failures = 0;
    for c in &criteria {
        if !only.is_empty() && !only.iter().any(|o| c.name.contains(o.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let in_time = c.limit.is_none_or(|l| elapsed <= l);
        let pass = outcome.pass && in_time;
        if !outcome.pass && c.exact {
            hard_failures += 1;
        }
        let limit = c
            .limit
            .map_or(String::new(), |l| format!(", limit {}s", l.as_secs()));
        println!(
            "{} {}: {} ({:.1}s{limit})",
            if pass { "PASS" } else { "FAIL" },
            c.name,
            outcome.detail,
            elapsed.as_secs_f64()
        );
    }
    if hard_failures > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
