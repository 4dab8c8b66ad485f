//! The four synthetic studies: privacy-utility trade-off, consistency in `n`,
//! the `(p, t)` landscape, and the choice of `s` under tail-shaped masks.
//!
//! Each study runs one or more experiments and keeps, per series and x value,
//! the grid point with the lowest mean MSE across replications.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::experiment::{
    param_value, run_experiment, DataSpec, ExperimentConfig, MaskSpec, MethodSpec, ResultRow,
    RuleSpec,
};
use crate::harness::stats::median;
use crate::mechanisms::IndicatorMechanism;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Figure {
    TradeOff,
    Consistency,
    Parameter,
    SelectS,
}

impl Figure {
    pub const ALL: [Figure; 4] = [
        Figure::TradeOff,
        Figure::Consistency,
        Figure::Parameter,
        Figure::SelectS,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Figure::TradeOff => "trade-off",
            Figure::Consistency => "consistency",
            Figure::Parameter => "parameter",
            Figure::SelectS => "select-s",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Figure::ALL
            .into_iter()
            .find(|f| f.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown figure {s:?}; expected one of trade-off, consistency, parameter, select-s")))
    }
}

/// Scale and grids of a study. Fields a study does not use are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub n: usize,
    /// Sample sizes of the consistency study.
    pub ns: Vec<usize>,
    pub epsilons: Vec<f64>,
    pub s_stars: Vec<usize>,
    pub gammas: Vec<f64>,
    /// Candidate `s` for fixed-`s` fits under gamma masks.
    pub s_values: Vec<usize>,
    pub p: Vec<usize>,
    pub t: Vec<usize>,
    pub rho: Vec<f64>,
    pub rule: Vec<RuleSpec>,
    pub mechanism: IndicatorMechanism,
    pub replications: usize,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn defaults(fig: Figure) -> Self {
        let base = Self {
            n: 10_000,
            ns: vec![1_000, 4_000, 16_000],
            epsilons: vec![1.0, 2.0, 4.0, 8.0],
            s_stars: vec![1, 2, 3, 4],
            gammas: vec![0.5, 1.0, 2.0],
            s_values: vec![0, 1, 2, 3, 4],
            p: vec![1, 2, 4, 6],
            t: vec![1, 2, 3],
            rho: vec![0.5, 0.7, 0.9],
            rule: vec![RuleSpec::MaxEdge],
            mechanism: IndicatorMechanism::GeneralizedRr,
            replications: 50,
            seed: 0,
        };
        match fig {
            Figure::TradeOff => base,
            Figure::Consistency => Self {
                epsilons: vec![4.0],
                s_stars: vec![1, 2],
                ..base
            },
            Figure::Parameter => Self {
                epsilons: vec![4.0],
                s_stars: vec![2],
                p: (1..=8).collect(),
                ..base
            },
            Figure::SelectS => Self {
                epsilons: vec![4.0],
                ..base
            },
        }
    }

    fn hist_of_tree(&self, s: Option<Vec<usize>>) -> MethodSpec {
        MethodSpec::HistOfTree {
            rho: self.rho.clone(),
            s,
            rule: self.rule.clone(),
            p: self.p.clone(),
            t: self.t.clone(),
            mechanism: self.mechanism,
            cart_min_leaf: 50,
        }
    }

    fn config(
        &self,
        n: usize,
        mask: MaskSpec,
        epsilons: Vec<f64>,
        methods: Vec<MethodSpec>,
    ) -> ExperimentConfig {
        ExperimentConfig {
            name: "simulation".into(),
            data: DataSpec::Synthetic { n },
            mask,
            epsilons,
            methods: methods.into_iter().map(Into::into).collect(),
            replications: self.replications,
            seed: self.seed,
            test_fraction: 0.2,
            timing: false,
        }
    }

    fn first_epsilon(&self) -> Result<f64> {
        self.epsilons
            .first()
            .copied()
            .ok_or_else(|| Error::Config("empty epsilon grid".into()))
    }
}

/// One replication of the best grid point of one series at one x value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureRow {
    pub series: String,
    pub x: f64,
    pub method: String,
    pub params: String,
    pub replication: usize,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureTable {
    pub fig: Figure,
    pub rows: Vec<FigureRow>,
}

pub const FIGURE_HEADER: [&str; 6] = ["series", "x", "method", "params", "replication", "mse"];

impl FigureTable {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(FIGURE_HEADER)?;
        for r in &self.rows {
            out.write_record([
                r.series.clone(),
                r.x.to_string(),
                r.method.clone(),
                r.params.clone(),
                r.replication.to_string(),
                r.mse.to_string(),
            ])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Median MSE per `(series, x)` in first-appearance order.
    pub fn medians(&self) -> Vec<(String, f64, f64)> {
        let mut keys: Vec<(String, f64)> = Vec::new();
        for r in &self.rows {
            if !keys
                .iter()
                .any(|(s, x)| *s == r.series && x.to_bits() == r.x.to_bits())
            {
                keys.push((r.series.clone(), r.x));
            }
        }
        keys.into_iter()
            .map(|(s, x)| {
                let v: Vec<f64> = self
                    .rows
                    .iter()
                    .filter(|r| r.series == s && r.x.to_bits() == x.to_bits())
                    .map(|r| r.mse)
                    .collect();
                let m = median(&v);
                (s, x, m)
            })
            .collect()
    }

    /// Medians of one series ordered by x.
    pub fn curve(&self, series: &str) -> Vec<(f64, f64)> {
        let mut c: Vec<(f64, f64)> = self
            .medians()
            .into_iter()
            .filter(|(s, ..)| s == series)
            .map(|(_, x, m)| (x, m))
            .collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
        c
    }
}

/// Keeps, per `(method, epsilon, series)`, the rows of the parameter point
/// with the lowest mean MSE. `series` maps a row to its series label, or
/// `None` to drop it.
fn best_rows(
    rows: &[ResultRow],
    x: impl Fn(&ResultRow) -> f64,
    series: impl Fn(&ResultRow) -> Option<String>,
) -> Vec<FigureRow> {
    let mut groups: Vec<(String, String, u64, Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        let Some(s) = series(r) else { continue };
        match groups
            .iter_mut()
            .find(|(m, gs, e, _)| *m == r.method && *gs == s && *e == r.epsilon.to_bits())
        {
            Some(g) => g.3.push(r),
            None => groups.push((r.method.clone(), s, r.epsilon.to_bits(), vec![r])),
        }
    }
    let mut out = Vec::new();
    for (_, s, _, members) in groups {
        let mut points: Vec<(&str, Vec<&ResultRow>)> = Vec::new();
        for r in members {
            match points.iter_mut().find(|(p, _)| *p == r.params) {
                Some(p) => p.1.push(r),
                None => points.push((&r.params, vec![r])),
            }
        }
        let score = |v: &[&ResultRow]| v.iter().map(|r| r.mse).sum::<f64>() / v.len() as f64;
        let best = points
            .iter()
            .filter(|(_, v)| v.iter().all(|r| r.mse.is_finite()))
            .min_by(|a, b| score(&a.1).total_cmp(&score(&b.1)));
        if let Some((_, v)) = best {
            out.extend(v.iter().map(|r| FigureRow {
                series: s.clone(),
                x: x(r),
                method: r.method.clone(),
                params: r.params.clone(),
                replication: r.replication,
                mse: r.mse,
            }));
        }
    }
    out
}

pub fn run_figure(fig: Figure, spec: &SimulationSpec) -> Result<FigureTable> {
    if spec.replications == 0 {
        return Err(Error::Config("replications must be at least 1".into()));
    }
    let mut rows = Vec::new();
    match fig {
        Figure::TradeOff => {
            for &s in &spec.s_stars {
                let cfg = spec.config(
                    spec.n,
                    MaskSpec::Aligned { s_star: s },
                    spec.epsilons.clone(),
                    vec![spec.hist_of_tree(None)],
                );
                let table = run_experiment(&cfg)?;
                rows.extend(best_rows(
                    &table.rows,
                    |r| r.epsilon,
                    |_| Some(format!("s*={s}")),
                ));
            }
        }
        Figure::Consistency => {
            let eps = spec.first_epsilon()?;
            for &s in &spec.s_stars {
                for &n in &spec.ns {
                    let cfg = spec.config(
                        n,
                        MaskSpec::Aligned { s_star: s },
                        vec![eps],
                        vec![spec.hist_of_tree(None)],
                    );
                    let table = run_experiment(&cfg)?;
                    rows.extend(best_rows(
                        &table.rows,
                        |_| n as f64,
                        |_| Some(format!("s*={s}")),
                    ));
                }
            }
        }
        Figure::Parameter => {
            let eps = spec.first_epsilon()?;
            let s = spec
                .s_stars
                .first()
                .copied()
                .ok_or_else(|| Error::Config("empty s* grid".into()))?;
            let cfg = spec.config(
                spec.n,
                MaskSpec::Aligned { s_star: s },
                vec![eps],
                vec![spec.hist_of_tree(None)],
            );
            let table = run_experiment(&cfg)?;
            for &t in &spec.t {
                for &p in &spec.p {
                    let (ts, ps) = (t.to_string(), p.to_string());
                    rows.extend(best_rows(
                        &table.rows,
                        |_| p as f64,
                        |r| {
                            (param_value(&r.params, "t") == Some(ts.as_str())
                                && param_value(&r.params, "p") == Some(ps.as_str()))
                            .then(|| format!("t={t}"))
                        },
                    ));
                }
            }
        }
        Figure::SelectS => {
            let eps = spec.first_epsilon()?;
            for &gamma in &spec.gammas {
                let methods = vec![
                    spec.hist_of_tree(Some(spec.s_values.clone())),
                    MethodSpec::AdHistOfTree {
                        rho: spec.rho.clone(),
                        c_approx: vec![0.01, 0.1, 1.0],
                        t_offset: vec![-1, 0, 1],
                        rule: spec.rule.clone(),
                        mechanism: spec.mechanism,
                        cart_min_leaf: 50,
                    },
                ];
                let cfg = spec.config(spec.n, MaskSpec::Gamma { gamma }, vec![eps], methods);
                let table = run_experiment(&cfg)?;
                rows.extend(best_rows(
                    &table.rows,
                    |_| gamma,
                    |r| match r.method.as_str() {
                        "HistOfTree" => param_value(&r.params, "s").map(|s| format!("s={s}")),
                        m => Some(m.to_string()),
                    },
                ));
            }
        }
    }
    Ok(FigureTable { fig, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(fig: Figure) -> SimulationSpec {
        SimulationSpec {
            n: 400,
            ns: vec![200, 400],
            gammas: vec![0.5, 2.0],
            p: vec![1, 2],
            t: vec![1, 2],
            rho: vec![0.5],
            replications: 2,
            ..SimulationSpec::defaults(fig)
        }
    }

    #[test]
    fn figure_ids_round_trip() {
        for f in Figure::ALL {
            assert_eq!(f.id().parse::<Figure>().unwrap(), f);
        }
        assert!("fig9".parse::<Figure>().is_err());
    }

    #[test]
    fn every_study_yields_one_row_per_series_x_and_replication() {
        let expect = |f: Figure, series_x: usize| {
            let spec = tiny(f);
            let t = run_figure(f, &spec).unwrap();
            assert_eq!(t.rows.len(), series_x * spec.replications, "{f}");
            assert!(t.rows.iter().all(|r| r.mse.is_finite() && r.mse >= 0.0));
        };
        expect(Figure::TradeOff, 4 * 4);
        expect(Figure::Consistency, 2 * 2);
        expect(Figure::Parameter, 2 * 2);
        expect(Figure::SelectS, 2 * 6);
    }

    #[test]
    fn select_s_contains_adaptive_series() {
        let t = run_figure(Figure::SelectS, &tiny(Figure::SelectS)).unwrap();
        assert_eq!(t.curve("AdHistOfTree").len(), 2);
        assert!(run_figure(
            Figure::TradeOff,
            &SimulationSpec {
                replications: 0,
                ..tiny(Figure::TradeOff)
            }
        )
        .is_err());
    }
}
