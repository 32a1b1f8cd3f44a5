//! `bwb`: command-line front end for the Bures-Wasserstein toolkit.
//!
//! Exit codes: 0 success, 1 invalid input, 2 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use bures::io::{
    load_bundle, save_bundle, w2_distance_sq, write_csv, write_report, AnyBundle,
    LocationScaleMeasure, MatrixBundle,
};
use bures::mclab::{run_experiment, with_threads, ExperimentConfig};
use bures::nalgebra::{DMatrix, DVector};
use bures::{
    bw_distance_sq, clt_report, compose_c_q, concentration_envelope_dbw, concentration_envelope_q,
    concentration_envelope_v, eta_n_diagnostic, solve_barycenter, transport_map, BasisKind, BwError, PsdMatrix,
    Result, Scalar, SolverConfig, StepRule, SubspaceBasis,
};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "bwb", version, about = "Bures-Wasserstein distances, barycenters and inference")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConstraintArg {
    Trace1,
}

#[derive(Clone, Copy, ValueEnum)]
enum BasisArg {
    Full,
    Traceless,
}

#[derive(Clone, Copy, ValueEnum)]
enum StepArg {
    FixedPoint,
    ProjectedDescent,
}

#[derive(Clone, Copy, ValueEnum)]
enum EnvelopeKind {
    Q,
    Dbw,
    V,
}

#[derive(Subcommand)]
enum Command {
    /// Bures-Wasserstein distance between two single-matrix bundles.
    Distance {
        a: PathBuf,
        b: PathBuf,
        /// Mean vectors of the two Gaussians as comma-separated lists; adds W2.
        #[arg(long, num_args = 2, value_names = ["MEAN_A", "MEAN_B"])]
        means: Option<Vec<String>>,
    },
    /// Optimal transport map from N(0, Q) to N(0, S).
    Map {
        q: PathBuf,
        s: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Barycenter of a bundle; prints a JSON summary.
    Barycenter {
        bundle: PathBuf,
        #[arg(long, value_enum)]
        constraint: Option<ConstraintArg>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        #[arg(long, value_enum)]
        step_rule: Option<StepArg>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Plug-in CLT report for a bundle against a reference barycenter.
    Infer {
        bundle: PathBuf,
        #[arg(long)]
        qstar: PathBuf,
        #[arg(long, value_enum, default_value = "full")]
        basis: BasisArg,
        /// Reference Fréchet variance; defaults to the sample variance at Q*.
        #[arg(long)]
        vstar: Option<f64>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
    },
    /// Monte Carlo experiment from a JSON config.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Concentration envelope value.
    Envelope {
        #[arg(long, value_enum)]
        kind: EnvelopeKind,
        /// Comma-separated `key=value` pairs.
        #[arg(long)]
        params: String,
    },
}

fn matrix_json<T: Scalar>(m: &DMatrix<T>) -> Value {
    let rows: Vec<Value> = m
        .row_iter()
        .map(|r| {
            r.iter()
                .map(|x| {
                    let (re, im) = x.to_parts();
                    match T::MODE {
                        bures::Mode::Real => json!(re),
                        bures::Mode::Complex => json!([re, im]),
                    }
                })
                .collect()
        })
        .collect();
    Value::Array(rows)
}

fn print_json(v: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn parse_vector(s: &str) -> Result<DVector<f64>> {
    let vals: std::result::Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    vals.map(DVector::from_vec)
        .map_err(|_| BwError::Validation(format!("bad mean vector `{s}`")))
}

fn single<T: Scalar>(b: MatrixBundle<T>) -> Result<PsdMatrix<T>> {
    b.into_single()
}

fn distance<T: Scalar>(a: PsdMatrix<T>, b: PsdMatrix<T>, means: Option<&[String]>) -> Result<Value> {
    let d2 = bw_distance_sq(&a, &b)?;
    let mut out = json!({ "d_bw": d2.sqrt(), "d_bw_sq": d2 });
    if let Some([ma, mb]) = means {
        let ma = LocationScaleMeasure::new(parse_vector(ma)?, a)?;
        let mb = LocationScaleMeasure::new(parse_vector(mb)?, b)?;
        let w2 = w2_distance_sq(&ma, &mb)?;
        out["w2"] = json!(w2.sqrt());
        out["w2_sq"] = json!(w2);
    }
    Ok(out)
}

fn map<T: Scalar>(q: PsdMatrix<T>, s: PsdMatrix<T>, out: &PathBuf) -> Result<Value> {
    let t = transport_map(&q, &s)?;
    save_bundle(&MatrixBundle::single(t.matrix.clone()), out)?;
    Ok(json!({
        "pushforward_residual": t.pushforward_residual(),
        "cost": t.cost(),
    }))
}

fn solver(tol: f64, max_iter: usize, step: Option<StepArg>) -> SolverConfig {
    SolverConfig {
        tol_residual: tol,
        max_iter,
        step_rule: step.map(|s| match s {
            StepArg::FixedPoint => StepRule::FixedPoint,
            StepArg::ProjectedDescent => StepRule::ProjectedDescent,
        }),
        ..SolverConfig::default()
    }
}

fn barycenter<T: Scalar>(b: MatrixBundle<T>, constraint: Option<ConstraintArg>, cfg: &SolverConfig, out: &PathBuf) -> Result<Value> {
    let samples = b.to_sample_set()?;
    let basis = match constraint {
        Some(ConstraintArg::Trace1) => Some(SubspaceBasis::standard(samples.dim(), BasisKind::Traceless)?),
        None => None,
    };
    let r = solve_barycenter(&samples, basis.as_ref(), cfg)?;
    save_bundle(&MatrixBundle::single(r.barycenter.clone()), out)?;
    Ok(json!({
        "iterations": r.iterations,
        "residual": r.residual,
        "variance": r.variance,
        "trace": r.barycenter.trace(),
    }))
}

fn infer<T: Scalar>(b: MatrixBundle<T>, q_star: PsdMatrix<T>, basis: BasisArg, v_star: Option<f64>, cfg: &SolverConfig) -> Result<Value> {
    let samples = b.to_sample_set()?;
    let (basis, constraint) = match basis {
        BasisArg::Full => (SubspaceBasis::standard(samples.dim(), BasisKind::Full)?, None),
        BasisArg::Traceless => {
            let tb = SubspaceBasis::standard(samples.dim(), BasisKind::Traceless)?.with_anchor(q_star.clone())?;
            (tb.clone(), Some(tb))
        }
    };
    let fit = solve_barycenter(&samples, constraint.as_ref(), cfg)?;
    let v_ref = match v_star {
        Some(v) => v,
        None => bures::frechet_variance(&q_star, &samples)?,
    };
    let report = clt_report(&samples, &fit.barycenter, &q_star, v_ref, &basis)?;
    let eta = eta_n_diagnostic(&samples, &q_star, &basis)?;
    if report.studentized.is_none() {
        return Err(BwError::DegenerateCovariance(
            "Xi-hat is singular; the studentized statistic is undefined".into(),
        ));
    }
    Ok(json!({
        "n": report.n,
        "mode": T::MODE.as_str(),
        "q_hat": matrix_json(report.q_hat.as_matrix()),
        "iterations": fit.iterations,
        "residual": fit.residual,
        "sigma_hat_eigenvalues": report.sigma_hat.eigenvalues(),
        "f_hat_eigenvalues": report.f_hat.eigenvalues(),
        "xi_hat_eigenvalues": report.xi_hat.eigenvalues(),
        "studentized": report.studentized.map(|v| v.iter().copied().collect::<Vec<f64>>()),
        "dbw_stat": report.dbw_stat,
        "variance_stat": report.variance_stat,
        "v_ref": v_ref,
        "eta": eta.eta,
        "eta_bound": eta.bound,
    }))
}

fn params(s: &str) -> Result<std::collections::BTreeMap<String, f64>> {
    let mut out = std::collections::BTreeMap::new();
    for pair in s.split(',').filter(|p| !p.trim().is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| BwError::Validation(format!("expected key=value, found `{pair}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| BwError::Validation(format!("bad value for `{}`", k.trim())))?;
        if !v.is_finite() || v < 0.0 {
            return Err(BwError::Validation(format!("`{}` must be finite and >= 0", k.trim())));
        }
        out.insert(k.trim().to_string(), v);
    }
    Ok(out)
}

fn envelope(kind: EnvelopeKind, raw: &str) -> Result<f64> {
    let p = params(raw)?;
    let get = |k: &str| {
        p.get(k)
            .copied()
            .ok_or_else(|| BwError::Validation(format!("missing parameter `{k}`")))
    };
    let count = |k: &str| -> Result<usize> {
        let v = get(k)?;
        if v.fract() != 0.0 || v < 1.0 {
            return Err(BwError::Validation(format!("`{k}` must be a positive integer")));
        }
        Ok(v as usize)
    };
    let c_q = || -> Result<f64> {
        match p.get("c_q") {
            Some(c) => Ok(*c),
            None => Ok(compose_c_q(get("norm_q")?, get("sigma_t")?, get("lambda_min_f")?)),
        }
    };
    Ok(match kind {
        EnvelopeKind::Q => concentration_envelope_q(c_q()?, count("d")?, count("n")?, get("t")?),
        EnvelopeKind::Dbw => concentration_envelope_dbw(c_q()?, get("norm_q")?, count("d")?, count("n")?, get("t")?),
        EnvelopeKind::V => concentration_envelope_v(
            get("b")?,
            get("nu")?,
            c_q()?,
            get("norm_f")?,
            count("d")?,
            count("n")?,
            get("t")?,
        ),
    })
}

fn mismatch() -> BwError {
    BwError::Validation("inputs mix real and complex bundles".into())
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Distance { a, b, means } => {
            let v = match (load_bundle(a)?, load_bundle(b)?) {
                (AnyBundle::Real(x), AnyBundle::Real(y)) => distance(single(x)?, single(y)?, means.as_deref())?,
                (AnyBundle::Complex(x), AnyBundle::Complex(y)) => distance(single(x)?, single(y)?, means.as_deref())?,
                _ => return Err(mismatch()),
            };
            print_json(&v)
        }
        Command::Map { q, s, out } => {
            let v = match (load_bundle(q)?, load_bundle(s)?) {
                (AnyBundle::Real(x), AnyBundle::Real(y)) => map(single(x)?, single(y)?, &out)?,
                (AnyBundle::Complex(x), AnyBundle::Complex(y)) => map(single(x)?, single(y)?, &out)?,
                _ => return Err(mismatch()),
            };
            print_json(&v)
        }
        Command::Barycenter {
            bundle,
            constraint,
            tol,
            max_iter,
            step_rule,
            out,
        } => {
            let cfg = solver(tol, max_iter, step_rule);
            let v = match load_bundle(bundle)? {
                AnyBundle::Real(b) => barycenter(b, constraint, &cfg, &out)?,
                AnyBundle::Complex(b) => barycenter(b, constraint, &cfg, &out)?,
            };
            print_json(&v)
        }
        Command::Infer {
            bundle,
            qstar,
            basis,
            vstar,
            tol,
            max_iter,
        } => {
            let cfg = solver(tol, max_iter, None);
            let v = match (load_bundle(bundle)?, load_bundle(qstar)?) {
                (AnyBundle::Real(x), AnyBundle::Real(q)) => infer(x, single(q)?, basis, vstar, &cfg)?,
                (AnyBundle::Complex(x), AnyBundle::Complex(q)) => infer(x, single(q)?, basis, vstar, &cfg)?,
                _ => return Err(mismatch()),
            };
            print_json(&v)
        }
        Command::Simulate { config, out, csv, seed } => {
            let mut cfg: ExperimentConfig = serde_json::from_slice(&std::fs::read(config)?)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = run_experiment(&cfg)?;
            write_report(&report, &out)?;
            let files = match csv {
                Some(dir) => write_csv(&report, dir)?.len(),
                None => 0,
            };
            print_json(&json!({
                "report": out.display().to_string(),
                "sizes": report.sizes.iter().map(|s| json!({
                    "n": s.n,
                    "failures": s.failures,
                    "ks_dbw_limit": s.ks_dbw_limit,
                })).collect::<Vec<_>>(),
                "csv_files": files,
            }))
        }
        Command::Envelope { kind, params } => {
            println!("{:?}", envelope(kind, &params)?);
            Ok(())
        }
    }
}

fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("BWB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(BwError::Validation(format!("BWB_THREADS must be a positive integer, found `{v}`"))),
        },
        Err(_) => Ok(None),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = threads_from_env().and_then(|t| with_threads(t, || run(cli.command)).and_then(|r| r));
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
