//! Command-line front end: data generation, estimation, certification,
//! bounds auditing and Monte Carlo experiment sweeps.
//!
//! Exit codes: 0 success, 2 usage/input error, 3 numerical failure,
//! 4 enumeration cap exceeded.

use clap::{Parser, Subcommand, ValueEnum};
use ladkit::bounds::{bounds_report, BoundsOptions};
use ladkit::certificates::certify;
use ladkit::datamodel::{
    generate, read_dataset_csv, write_dataset_csv, write_value_column, Dataset, GenSpec,
};
use ladkit::experiments::{run_experiment, ExperimentConfig};
use ladkit::solvers::{
    default_reweight_delta, solve_l1, solve_regularized, solve_reweighted_l1, solve_sum_of_norms,
    SolverOptions,
};
use ndarray::Array1;
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "ladkit", version, about = "Robust linear estimation under gross errors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset from a JSON generation spec.
    Generate {
        /// Path to the GenSpec JSON document.
        #[arg(long)]
        spec: PathBuf,
        /// Output CSV (writes theta0.csv / f.csv sidecars next to it).
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the parameter vector from a dataset CSV.
    Estimate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum, default_value_t = MethodArg::L1)]
        method: MethodArg,
        /// Regularization weight (regularized method).
        #[arg(long)]
        lambda: Option<f64>,
        /// Reweighting rounds (reweighted method).
        #[arg(long)]
        rmax: Option<usize>,
        /// Reweighting smoothing constant; defaults to 1e-4*(1 + median |y|).
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Certify optimality/uniqueness of a candidate estimate.
    Certify {
        #[arg(long)]
        data: PathBuf,
        /// JSON file containing a `theta` array (e.g. an estimate output).
        #[arg(long)]
        theta: PathBuf,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute genericity bounds and recovery thresholds for a dataset.
    Bounds {
        #[arg(long)]
        data: PathBuf,
        /// Cap on N for the exact partition/subset enumerations (k1, k2).
        #[arg(long, default_value_t = 15)]
        exact_cap: usize,
        /// Cap on N for the exact genericity index.
        #[arg(long, default_value_t = 30)]
        nu_cap: usize,
        /// Fail (exit 4) instead of sampling or omitting capped quantities.
        #[arg(long, default_value_t = false)]
        require_exact: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a Monte Carlo experiment sweep from a JSON config.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
        format: FormatArg,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    L1,
    Reweighted,
    Regularized,
    SumOfNorms,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn exit_code_for(err: &ladkit::Error) -> u8 {
    use ladkit::Error::*;
    match err {
        CapExceeded(_) => 4,
        Io(_) | Parse(_) | InvalidSpec(_) | InvalidArgument(_) => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let invocation = std::env::args().collect::<Vec<_>>().join(" ");
    let cli = Cli::parse();
    match run(cli.command, &invocation) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("ladkit: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn write_json(path: &Path, value: &Value) -> ladkit::Result<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| ladkit::Error::Parse(format!("json encode: {e}")))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

fn stamp(invocation: &str, mut value: Value) -> Value {
    if let Some(map) = value.as_object_mut() {
        map.insert("schema_version".into(), json!(1));
        map.insert("invocation".into(), json!(invocation));
    }
    value
}

fn to_value<T: serde::Serialize>(v: &T) -> ladkit::Result<Value> {
    serde_json::to_value(v).map_err(|e| ladkit::Error::Parse(format!("json encode: {e}")))
}

fn run(command: Command, invocation: &str) -> ladkit::Result<()> {
    match command {
        Command::Generate { spec, out } => {
            let text = std::fs::read_to_string(&spec)?;
            let spec: GenSpec = serde_json::from_str(&text)
                .map_err(|e| ladkit::Error::Parse(format!("generation spec: {e}")))?;
            let dataset: Dataset<f64> = generate(&spec)?;
            write_dataset_csv(&dataset, &out)?;
            let truth = dataset.truth.as_ref().expect("generated datasets carry truth");
            let dir = out.parent().unwrap_or_else(|| Path::new("."));
            write_value_column(&truth.theta0, &dir.join("theta0.csv"))?;
            write_value_column(&truth.gross, &dir.join("f.csv"))?;
            let meta = stamp(
                invocation,
                json!({ "spec": to_value(&spec)?, "n": dataset.dim(), "N": dataset.len() }),
            );
            write_json(&out.with_extension("meta.json"), &meta)?;
            Ok(())
        }
        Command::Estimate { data, method, lambda, rmax, delta, out } => {
            let dataset = read_dataset_csv(&data)?;
            let opts = SolverOptions::default();
            let value = match method {
                MethodArg::L1 => {
                    let est = solve_l1(&dataset, &opts)?;
                    let cert = certify(&dataset, &est.theta, 1e-7)?;
                    json!({
                        "method": "l1",
                        "theta": est.theta.to_vec(),
                        "objective": est.objective,
                        "status": to_value(&est.status)?,
                        "iterations": est.iterations,
                        "certificate": to_value(&cert)?,
                    })
                }
                MethodArg::Reweighted => {
                    let r_max = rmax.unwrap_or(2);
                    let d = delta.unwrap_or_else(|| default_reweight_delta(&dataset));
                    let sol = solve_reweighted_l1(&dataset, r_max, d, &opts)?;
                    let cert = certify(&dataset, &sol.estimate.theta, 1e-7)?;
                    json!({
                        "method": "reweighted",
                        "r_max": r_max,
                        "delta": d,
                        "theta": sol.estimate.theta.to_vec(),
                        "objective": sol.estimate.objective,
                        "status": to_value(&sol.estimate.status)?,
                        "iterations": sol.estimate.iterations,
                        "trace_objectives": sol.trace.iter().map(|e| e.objective).collect::<Vec<_>>(),
                        "certificate": to_value(&cert)?,
                    })
                }
                MethodArg::Regularized => {
                    let lam = lambda.ok_or_else(|| {
                        ladkit::Error::InvalidArgument("--lambda is required for regularized".into())
                    })?;
                    let sol = solve_regularized(&dataset, lam, &opts)?;
                    let kkt = ladkit::certificates::check_regularized_kkt(&dataset, lam, &sol, 1e-7)?;
                    let unique =
                        ladkit::certificates::check_regularized_unique(&dataset, &sol, 1e-8)?;
                    json!({
                        "method": "regularized",
                        "lambda": lam,
                        "theta": sol.theta.to_vec(),
                        "phi": sol.phi.to_vec(),
                        "support": sol.support,
                        "signs": sol.signs.to_vec(),
                        "kkt_ok": kkt,
                        "unique": unique,
                    })
                }
                MethodArg::SumOfNorms => {
                    // CSV datasets are scalar-output: solve the m = 1 reduction
                    let md = ladkit::datamodel::MultiDataset::new(
                        dataset.regressors.clone(),
                        dataset
                            .outputs
                            .clone()
                            .insert_axis(ndarray::Axis(0)),
                        None,
                    )?;
                    let est = solve_sum_of_norms(&md, &opts)?;
                    json!({
                        "method": "sum-of-norms",
                        "a": est.a.rows().into_iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
                        "theta": est.a.row(0).to_vec(),
                        "objective": est.objective,
                        "status": to_value(&est.status)?,
                        "iterations": est.iterations,
                    })
                }
            };
            write_json(&out, &stamp(invocation, value))
        }
        Command::Certify { data, theta, tol, out } => {
            let dataset = read_dataset_csv(&data)?;
            let text = std::fs::read_to_string(&theta)?;
            let doc: Value = serde_json::from_str(&text)
                .map_err(|e| ladkit::Error::Parse(format!("theta file: {e}")))?;
            let arr = doc
                .get("theta")
                .and_then(|v| v.as_array())
                .ok_or_else(|| ladkit::Error::Parse("theta file needs a `theta` array".into()))?;
            let theta: Array1<f64> = arr
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| ladkit::Error::Parse("non-numeric theta".into())))
                .collect::<ladkit::Result<Vec<f64>>>()?
                .into();
            let cert = certify(&dataset, &theta, tol)?;
            write_json(&out, &stamp(invocation, to_value(&cert)?))
        }
        Command::Bounds { data, exact_cap, nu_cap, require_exact, out } => {
            let dataset = read_dataset_csv(&data)?;
            let opts = BoundsOptions {
                nu_cap,
                partition_cap: exact_cap,
                subset_cap: exact_cap,
                ..BoundsOptions::default()
            };
            if require_exact && (dataset.len() > nu_cap || dataset.len() > exact_cap) {
                return Err(ladkit::Error::CapExceeded(format!(
                    "dataset has N = {} but caps are nu {} / partition {}",
                    dataset.len(),
                    nu_cap,
                    exact_cap
                )));
            }
            let report = bounds_report(&dataset.regressors, &opts)?;
            write_json(&out, &stamp(invocation, to_value(&report)?))
        }
        Command::Experiment { config, out, format } => {
            let text = std::fs::read_to_string(&config)?;
            let config: ExperimentConfig = serde_json::from_str(&text)
                .map_err(|e| ladkit::Error::Parse(format!("experiment config: {e}")))?;
            let mut table = run_experiment(&config)?;
            table.metadata.invocation = Some(invocation.to_string());
            match format {
                FormatArg::Csv => table.write_csv(&out),
                FormatArg::Json => table.write_json(&out),
            }
        }
    }
}
