use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use clap::ValueEnum;
use histoftree::data::{MaskMatrix, Matrix};
use histoftree::estimators::{
    fit_ad_hist_of_tree, fit_hist_of_tree, rank_private_axes, select_parameters, AdaptiveParams,
    HistOfTreeModel, HistOfTreeParams, PrivacySetting, RateParams,
};
use histoftree::harness::experiment::{
    run_experiment, DataSpec, ExperimentConfig, MaskSpec, MethodSpec,
};
use histoftree::harness::ingest::{ingest_csv, BoundPolicy, LabelColumn};
use histoftree::harness::simulation::{run_figure, Figure, SimulationSpec};
use histoftree::harness::tidy::{read_tidy, write_tidy};
use histoftree::mechanisms::{audit, MechanismSpec, PrivacyBudget};
use serde_json::json;

use crate::args::*;
use crate::Failure;

type Outcome = Result<(), Failure>;

pub fn run(command: Command) -> Outcome {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
        Command::SelectParams(a) => select(a),
        Command::Audit(a) => audit_cmd(a),
        Command::Fit(a) => fit(a),
        Command::Predict(a) => predict(a),
        Command::FiguresData(a) => figures_data(a),
    }
}

fn io_failure(path: &Path, e: io::Error) -> Failure {
    Failure::Data(format!("{}: {e}", path.display()))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| io_failure(p, e))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Outcome {
    let mut w = output(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(histoftree::Error::from)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| Failure::Data(e.to_string()))
}

fn simulate(a: SimulateArgs) -> Outcome {
    let fig: Figure = a.fig.into();
    if fig == Figure::SelectS && !a.s_star.is_empty() {
        return Err(Failure::Usage(
            "--sstar does not apply to select-s; use --gamma".into(),
        ));
    }
    if fig != Figure::SelectS && !a.gamma.is_empty() {
        return Err(Failure::Usage(format!(
            "--gamma only applies to select-s, not {fig}"
        )));
    }
    fn set<T>(dst: &mut Vec<T>, src: Vec<T>) {
        if !src.is_empty() {
            *dst = src;
        }
    }
    let mut spec = SimulationSpec::defaults(fig);
    if let Some(n) = a.n {
        spec.n = n;
    }
    set(&mut spec.ns, a.ns);
    set(&mut spec.epsilons, a.eps);
    set(&mut spec.s_stars, a.s_star);
    set(&mut spec.gammas, a.gamma);
    set(&mut spec.s_values, a.s);
    set(&mut spec.p, a.p);
    set(&mut spec.t, a.t);
    set(&mut spec.rho, a.rho);
    set(&mut spec.rule, a.rule.into_iter().map(Into::into).collect());
    if let Some(m) = a.mechanism {
        spec.mechanism = m.into();
    }
    if let Some(r) = a.reps {
        spec.replications = r as usize;
    }
    spec.seed = a.seed;
    let table = run_figure(fig, &spec)?;
    table.write_csv(output(a.out.as_deref())?)?;
    Ok(())
}

fn bench(a: BenchArgs) -> Outcome {
    let config = match &a.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => {
            let path = a.csv.clone().expect("clap requires --csv without --config");
            let label = a
                .label
                .column()
                .ok_or_else(|| Failure::Usage("bench needs --label or --label-index".into()))?;
            if a.mask.mask_file.is_some() {
                return Err(Failure::Usage(
                    "bench generates masks; --mask-file is not supported".into(),
                ));
            }
            let mask = a.mask.spec().unwrap_or_default();
            let d = ingest_csv(&path, &label, BoundPolicy::Observed)?.dim();
            let personalized = matches!(mask, MaskSpec::Gamma { .. } | MaskSpec::Realdata { .. });
            let methods = MethodSpec::all_defaults()
                .into_iter()
                .map(|m| match m {
                    MethodSpec::HistOfTree {
                        rho,
                        rule,
                        p,
                        t,
                        mechanism,
                        cart_min_leaf,
                        ..
                    } if personalized => MethodSpec::HistOfTree {
                        rho,
                        s: Some((0..d.min(5)).collect()),
                        rule,
                        p,
                        t,
                        mechanism,
                        cart_min_leaf,
                    },
                    m => m,
                })
                .map(Into::into)
                .collect();
            ExperimentConfig {
                name: path.display().to_string(),
                data: DataSpec::Csv {
                    path,
                    label,
                    bound: BoundPolicy::Observed,
                },
                mask,
                epsilons: a.eps.clone(),
                methods,
                replications: a.reps as usize,
                seed: a.seed,
                test_fraction: a.test_fraction,
                timing: a.timing,
            }
        }
    };
    let table = run_experiment(&config)?;
    table.write_csv(output(Some(&a.out))?)?;
    write_json(a.aggregate.as_deref(), &table.aggregate())
}

fn read_mask(path: &Path) -> Result<MaskMatrix, Failure> {
    let mut rd = csv::Reader::from_path(path).map_err(histoftree::Error::from)?;
    let cols = rd.headers().map_err(histoftree::Error::from)?.len();
    let mut bits = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        for (c, v) in rec.map_err(histoftree::Error::from)?.iter().enumerate() {
            bits.push(match v.trim() {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Failure::Data(format!(
                        "mask row {}, column {c}: expected 0 or 1, got {other:?}",
                        i + 1
                    )))
                }
            });
        }
    }
    let rows = bits.len() / cols.max(1);
    Ok(MaskMatrix::new(bits, rows, cols)?)
}

fn mask_for(args: &MaskArgs, n: usize, d: usize) -> Result<MaskMatrix, Failure> {
    match (&args.mask_file, args.spec()) {
        (Some(p), _) => {
            let m = read_mask(p)?;
            if (m.rows(), m.cols()) != (n, d) {
                return Err(Failure::Data(format!(
                    "mask is {}x{}, data is {n}x{d}",
                    m.rows(),
                    m.cols()
                )));
            }
            Ok(m)
        }
        (None, Some(spec)) => Ok(spec.generate(n, d)?),
        (None, None) => unreachable!("a mask spec exists whenever no mask file is given"),
    }
}

fn select(a: SelectArgs) -> Outcome {
    let rate = RateParams::new(a.alpha)?;
    let mask = match (&a.mask.mask_file, a.n, a.d) {
        (Some(p), _, _) => read_mask(p)?,
        (None, Some(n), Some(d)) => mask_for(&a.mask, n, d)?,
        _ => {
            return Err(Failure::Usage(
                "give --mask-file, or --n and --d with a mask flag".into(),
            ))
        }
    };
    let sel = select_parameters(&mask, a.eps, a.c_approx, rate)?;
    write_json(None, &sel)
}

fn audit_cmd(a: AuditArgs) -> Outcome {
    let spec = match a.mechanism {
        AuditMechanism::PairedRr => MechanismSpec::PairedRr { grids: a.grids },
        AuditMechanism::GeneralizedRr => MechanismSpec::GeneralizedRr { support: a.grids },
        AuditMechanism::Laplace => {
            let bound = (a.eps / 2.0).exp();
            return write_json(
                None,
                &json!({ "mechanism": "laplace", "eps": a.eps, "label_bound": bound, "limit": a.eps.exp(), "pass": bound <= a.eps.exp() }),
            );
        }
    };
    let report = audit(spec, a.eps)?;
    write_json(
        None,
        &json!({
            "mechanism": a.mechanism.to_possible_value().map(|v| v.get_name().to_string()),
            "eps": a.eps,
            "grids": a.grids,
            "indicator_ratio": report.indicator_ratio,
            "label_bound": report.label_bound,
            "combined_bound": report.combined_bound,
            "limit": report.limit,
            "pass": report.pass,
        }),
    )
}

fn fit(a: FitArgs) -> Outcome {
    let label = a
        .label
        .column()
        .ok_or_else(|| Failure::Usage("fit needs --label or --label-index".into()))?;
    let data = ingest_csv(&a.csv, &label, BoundPolicy::Observed)?;
    let mask = mask_for(&a.mask, data.len(), data.dim())?;
    let budget = PrivacyBudget::new(a.eps, a.rho)?;
    let rule = a.rule.split_rule(a.min_leaf, a.seed);
    let model = if a.adaptive {
        let params = AdaptiveParams {
            c_approx: a.c_approx,
            t_offset: a.t_offset,
            rule,
            mechanism: a.mechanism.into(),
        };
        let (model, sel) = fit_ad_hist_of_tree(&data, &mask, budget, params, a.seed)?;
        eprintln!(
            "selected s = {}, p = {}, t = {}, private axes {:?}",
            sel.s,
            sel.p_star,
            model.partition().hist().bins(),
            sel.private_axes
        );
        model
    } else {
        let params = HistOfTreeParams {
            t: a.t,
            p: a.p,
            rule,
            mechanism: a.mechanism.into(),
        };
        let aligned = mask.aligned_private_axes();
        match (a.s, aligned) {
            (None, Some(axes)) => fit_hist_of_tree(
                &data,
                PrivacySetting::Aligned {
                    private_axes: &axes,
                },
                budget,
                params,
                a.seed,
            )?,
            (Some(s), _) if s <= data.dim() => {
                let mut axes = rank_private_axes(&mask)[..s].to_vec();
                axes.sort_unstable();
                let setting = PrivacySetting::Personalized {
                    mask: &mask,
                    private_axes: &axes,
                };
                fit_hist_of_tree(&data, setting, budget, params, a.seed)?
            }
            (Some(s), _) => {
                return Err(Failure::Usage(format!(
                    "--s {s} exceeds the {} features",
                    data.dim()
                )))
            }
            (None, None) => {
                return Err(Failure::Usage(
                    "personalized masks need --s or --adaptive".into(),
                ))
            }
        }
    };
    let mut w = output(Some(&a.out))?;
    w.write_all(model.to_json()?.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| io_failure(&a.out, e))
}

fn read_features(path: &Path, drop: Option<&LabelColumn>, scale: bool) -> Result<Matrix, Failure> {
    let mut rd = csv::Reader::from_path(path).map_err(histoftree::Error::from)?;
    let headers: Vec<String> = rd
        .headers()
        .map_err(histoftree::Error::from)?
        .iter()
        .map(str::to_string)
        .collect();
    let dropped = match drop {
        None => None,
        Some(LabelColumn::Index(i)) if *i < headers.len() => Some(*i),
        Some(LabelColumn::Name(n)) if headers.contains(n) => headers.iter().position(|h| h == n),
        Some(c) => {
            return Err(Failure::Data(format!(
                "no column {c:?} in {}",
                path.display()
            )))
        }
    };
    let cols = headers.len() - usize::from(dropped.is_some());
    let mut values = Vec::new();
    for (i, rec) in rd.records().enumerate() {
        let rec = rec.map_err(histoftree::Error::from)?;
        for (c, v) in rec.iter().enumerate().filter(|(c, _)| Some(*c) != dropped) {
            values.push(v.trim().parse::<f64>().map_err(|_| {
                Failure::Data(format!(
                    "row {}, column {}: not a number: {v:?}",
                    i + 1,
                    headers[c]
                ))
            })?);
        }
    }
    let rows = values.len().checked_div(cols).unwrap_or(0);
    let mut x = Matrix::new(values, rows, cols)?;
    if scale {
        for c in 0..cols {
            let (lo, hi) = (0..rows).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), i| {
                (lo.min(x.get(i, c)), hi.max(x.get(i, c)))
            });
            for i in 0..rows {
                let v = &mut x.row_mut(i)[c];
                *v = if hi > lo { (*v - lo) / (hi - lo) } else { 0.0 };
            }
        }
    }
    Ok(x)
}

fn predict(a: PredictArgs) -> Outcome {
    let json = std::fs::read_to_string(&a.model).map_err(|e| io_failure(&a.model, e))?;
    let model = HistOfTreeModel::from_json(&json)?;
    let x = read_features(&a.csv, a.label.column().as_ref(), a.scale)?;
    let predictions = model.predict_matrix(&x)?;
    let mut w = csv::Writer::from_writer(output(a.out.as_deref())?);
    let write = |w: &mut csv::Writer<_>| -> csv::Result<()> {
        w.write_record(["prediction"])?;
        for p in &predictions {
            w.write_record([p.to_string()])?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).map_err(|e| Failure::Data(e.to_string()))
}

fn figures_data(a: FiguresArgs) -> Outcome {
    let fig: Figure = a.fig.into();
    let mut rows = Vec::new();
    for path in &a.inputs {
        let file = File::open(path).map_err(|e| io_failure(path, e))?;
        rows.extend(read_tidy(file, fig)?);
    }
    write_tidy(&rows, output(a.out.as_deref())?)?;
    Ok(())
}
