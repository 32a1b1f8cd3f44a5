//! Seeded Monte Carlo replication of the barycenter CLT and concentration
//! experiments.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::density::{empirical_density, histogram, ks_distance, ks_distance_cdf, mean_and_sd, Density, Histogram};
use super::rng::{random_spd, stream_id, stream_rng, Domain, Rotation};
use crate::barycenter::{frechet_variance, solve_barycenter, SampleSet, SolverConfig};
use crate::error::{BwError, Result};
use crate::geometry::{bw_distance, bw_distance_sq};
use crate::hermitian::{frobenius, hermitian_part, pd_spectrum, BasisKind, PsdMatrix, SubspaceBasis};
use crate::inference::{
    clt_report, estimate_f_hat, estimate_sigma_hat, estimate_xi_hat, sample_limit_dbw, weighted_variance,
    VarianceForm, XI_RANK_TOL,
};

/// Version tag written into every report.
pub const REPORT_SCHEMA: &str = "report_schema_v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentKind {
    #[default]
    Clt,
    Concentration,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintKind {
    /// Samples are scaled to unit trace; barycenters live in `{tr Q = 1}`.
    TracelessTrace1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub d: usize,
    pub n_grid: Vec<usize>,
    pub replicates: usize,
    pub pop_proxy_size: usize,
    pub eig_law: [f64; 2],
    pub seed: u64,
    pub constraint: Option<ConstraintKind>,
    pub rotation: Rotation,
    /// Draws from the limit law of `√n d_BW`.
    pub limit_draws: usize,
    /// Standard normal draws per studentized coordinate for the KS reference.
    pub normal_reference_draws: usize,
    /// Fresh draws for the reference value of `var d²_BW(Q_*, S)`.
    pub variance_reference_draws: usize,
    pub studentize: bool,
    pub histogram_bins: usize,
    pub kde_grid_points: usize,
    pub solver_tol: f64,
    pub max_iter: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Clt,
            d: 5,
            n_grid: vec![3, 10, 100, 1000],
            replicates: 100,
            pop_proxy_size: 20_000,
            eig_law: [18.0, 22.0],
            seed: 0,
            constraint: None,
            rotation: Rotation::Haar,
            limit_draws: 10_000,
            normal_reference_draws: 2_000,
            variance_reference_draws: 20_000,
            studentize: true,
            histogram_bins: 30,
            kde_grid_points: 256,
            solver_tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(BwError::Validation(m.into()));
        if self.d == 0 {
            return fail("d must be >= 1");
        }
        if self.n_grid.is_empty() || self.n_grid.contains(&0) {
            return fail("n_grid must be nonempty with sizes >= 1");
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return fail("n_grid must be strictly increasing");
        }
        if self.replicates == 0 || self.pop_proxy_size == 0 {
            return fail("replicates and pop_proxy_size must be >= 1");
        }
        let [a, b] = self.eig_law;
        if !(a > 0.0 && a <= b && b.is_finite()) {
            return fail("eig_law must satisfy 0 < a <= b");
        }
        if self.histogram_bins == 0 || self.kde_grid_points < 2 {
            return fail("histogram_bins >= 1 and kde_grid_points >= 2 required");
        }
        if !(self.solver_tol > 0.0) || self.max_iter == 0 {
            return fail("solver_tol > 0 and max_iter >= 1 required");
        }
        Ok(())
    }

    /// Tangent space of the constraint set, anchored at `I/d` under the trace constraint.
    pub fn basis(&self) -> Result<SubspaceBasis<f64>> {
        match self.constraint {
            None => SubspaceBasis::standard(self.d, BasisKind::Full),
            Some(ConstraintKind::TracelessTrace1) => SubspaceBasis::standard(self.d, BasisKind::Traceless),
        }
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            max_iter: self.max_iter,
            tol_residual: self.solver_tol,
            ..SolverConfig::default()
        }
    }

    fn constraint_basis(&self) -> Result<Option<SubspaceBasis<f64>>> {
        Ok(match self.constraint {
            None => None,
            Some(_) => Some(self.basis()?),
        })
    }
}

/// One draw from the sampling law of the configuration.
pub fn draw_sample<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> Result<PsdMatrix<f64>> {
    let s = random_spd(config.d, config.eig_law, config.rotation, rng)?;
    Ok(match config.constraint {
        None => s,
        Some(ConstraintKind::TracelessTrace1) => {
            let t = s.trace();
            s.scaled(1.0 / t)
        }
    })
}

fn draw_set<R: Rng + ?Sized>(config: &ExperimentConfig, count: usize, rng: &mut R) -> Result<SampleSet<f64>> {
    let mut v = Vec::with_capacity(count);
    for _ in 0..count {
        v.push(draw_sample(config, rng)?);
    }
    SampleSet::new(v)
}

/// The `n` samples of replicate `k`; depends only on `(seed, n, k)`.
pub fn replicate_samples(config: &ExperimentConfig, n: usize, k: usize) -> Result<SampleSet<f64>> {
    let mut rng = stream_rng(config.seed, stream_id(Domain::Replicate, n as u64, k as u64)?);
    draw_set(config, n, &mut rng)
}

/// Large-sample stand-in for the population barycenter.
#[derive(Debug, Clone)]
pub struct PopulationProxy {
    pub q_star: PsdMatrix<f64>,
    pub v_star: f64,
    pub residual: f64,
    pub iterations: usize,
    pub samples: SampleSet<f64>,
}

/// Barycenter and Fréchet variance of `pop_proxy_size` fresh draws.
pub fn population_proxy<R: Rng + ?Sized>(config: &ExperimentConfig, rng: &mut R) -> Result<PopulationProxy> {
    config.validate()?;
    let samples = draw_set(config, config.pop_proxy_size, rng)?;
    let constraint = config.constraint_basis()?;
    let fit = solve_barycenter(&samples, constraint.as_ref(), &config.solver())?;
    let v_star = frechet_variance(&fit.barycenter, &samples)?;
    Ok(PopulationProxy {
        q_star: fit.barycenter,
        v_star,
        residual: fit.residual,
        iterations: fit.iterations,
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub stream: u64,
    /// `√n ‖Q_n − Q_*‖_F`.
    pub norm_f: f64,
    /// `√n d_BW(Q_n, Q_*)`.
    pub dbw: f64,
    /// `√n (V_n − V_*)`.
    pub variance: f64,
    /// `‖Q_*^{-1/2} Q_n Q_*^{-1/2} − I‖_F`.
    pub rel_err: f64,
    /// `d_BW(Q_n, Q_*)`.
    pub dbw_raw: f64,
    pub iterations: usize,
    pub studentized: Option<Vec<f64>>,
    pub q_n: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatisticSummary {
    pub mean: f64,
    /// Population (`1/N`) variance over replicates.
    pub variance: f64,
    pub median: f64,
    pub histogram: Histogram,
    pub density: Option<Density>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub n: usize,
    pub failures: usize,
    pub failure_details: Vec<ReplicateFailure>,
    pub replicates: Vec<ReplicateRecord>,
    pub statistics: BTreeMap<String, StatisticSummary>,
    /// KS distance between `√n d_BW` and the limit sample.
    pub ks_dbw_limit: Option<f64>,
    /// KS distance between `√n (V_n − V_*)` and its fitted normal.
    pub ks_variance_normal: Option<f64>,
    /// Per-coordinate KS distance of the studentized statistic to standard normal draws.
    pub ks_studentized: Option<Vec<f64>>,
    pub studentized_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub q_star: Vec<Vec<f64>>,
    pub v_star: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Eigenvalues of the plug-in `Ξ` at the proxy.
    pub xi_eigenvalues: Option<Vec<f64>>,
    /// Monte Carlo `var d²_BW(Q_*, S)` from fresh draws.
    pub var_d2_reference: Option<f64>,
}

/// Least-squares fit `log median = intercept + slope · log n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub statistic: String,
    pub slope: f64,
    pub intercept: f64,
    pub medians: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub schema: String,
    pub config: ExperimentConfig,
    pub population: PopulationSummary,
    pub limit_sample: Option<Vec<f64>>,
    pub sizes: Vec<SizeSummary>,
    pub rate_fits: Vec<RateFit>,
}

impl SimulationReport {
    pub fn size(&self, n: usize) -> Option<&SizeSummary> {
        self.sizes.iter().find(|s| s.n == n)
    }
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

struct Reference {
    q_star: PsdMatrix<f64>,
    inv_root: DMatrix<f64>,
    v_star: f64,
    basis: SubspaceBasis<f64>,
    constraint: Option<SubspaceBasis<f64>>,
}

fn run_replicate(config: &ExperimentConfig, reference: &Reference, n: usize, k: usize) -> Result<ReplicateRecord> {
    let stream = stream_id(Domain::Replicate, n as u64, k as u64)?;
    let samples = replicate_samples(config, n, k)?;
    let fit = solve_barycenter(&samples, reference.constraint.as_ref(), &config.solver())?;
    let q_n = &fit.barycenter;
    let root_n = (n as f64).sqrt();
    let dbw_raw = bw_distance(q_n, &reference.q_star)?;
    let v_n = frechet_variance(q_n, &samples)?;
    let d = config.d;
    let rel = hermitian_part(&(&reference.inv_root * q_n.as_matrix() * &reference.inv_root)) - DMatrix::identity(d, d);
    let studentized = if config.kind == ExperimentKind::Clt && config.studentize {
        clt_report(&samples, q_n, &reference.q_star, reference.v_star, &reference.basis)?
            .studentized
            .map(|v| v.iter().copied().collect())
    } else {
        None
    };
    Ok(ReplicateRecord {
        replicate: k,
        stream,
        norm_f: root_n * frobenius(&(q_n.as_matrix() - reference.q_star.as_matrix())),
        dbw: root_n * dbw_raw,
        variance: root_n * (v_n - reference.v_star),
        rel_err: frobenius(&rel),
        dbw_raw,
        iterations: fit.iterations,
        studentized,
        q_n: matrix_rows(q_n.as_matrix()),
    })
}

fn summarize(values: &[f64], config: &ExperimentConfig) -> Result<StatisticSummary> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let variance = values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        0.5 * (sorted[mid - 1] + sorted[mid])
    };
    let density = if values.len() >= 2 {
        Some(empirical_density(values, config.kde_grid_points)?)
    } else {
        None
    };
    Ok(StatisticSummary {
        mean,
        variance,
        median,
        histogram: histogram(values, config.histogram_bins)?,
        density,
    })
}

const STATISTICS: [&str; 5] = ["norm_f", "dbw", "variance", "rel_err", "dbw_raw"];

fn statistic(r: &ReplicateRecord, name: &str) -> f64 {
    match name {
        "norm_f" => r.norm_f,
        "dbw" => r.dbw,
        "variance" => r.variance,
        "rel_err" => r.rel_err,
        "dbw_raw" => r.dbw_raw,
        _ => unreachable!("unknown statistic {name}"),
    }
}

fn run_size(config: &ExperimentConfig, reference: &Reference, limit: Option<&[f64]>, n: usize) -> Result<SizeSummary> {
    let outcomes: Vec<Result<ReplicateRecord>> = (0..config.replicates)
        .into_par_iter()
        .map(|k| run_replicate(config, reference, n, k))
        .collect();
    let mut replicates = Vec::with_capacity(outcomes.len());
    let mut failure_details = Vec::new();
    for (k, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => replicates.push(r),
            Err(e) => {
                log::warn!("n = {n}, replicate {k} failed: {e}");
                failure_details.push(ReplicateFailure {
                    replicate: k,
                    message: e.to_string(),
                });
            }
        }
    }
    let failures = failure_details.len();
    if failures * 100 > config.replicates {
        return Err(BwError::TooManyFailures {
            n,
            failures,
            replicates: config.replicates,
        });
    }
    let mut statistics = BTreeMap::new();
    for name in STATISTICS {
        let values: Vec<f64> = replicates.iter().map(|r| statistic(r, name)).collect();
        if values.iter().any(|v| !v.is_finite()) {
            return Err(BwError::NonFinite);
        }
        statistics.insert(name.to_string(), summarize(&values, config)?);
    }

    let dbw: Vec<f64> = replicates.iter().map(|r| r.dbw).collect();
    let ks_dbw_limit = match limit {
        Some(l) => Some(ks_distance(&dbw, l)?),
        None => None,
    };
    let var_stat: Vec<f64> = replicates.iter().map(|r| r.variance).collect();
    let ks_variance_normal = if var_stat.len() >= 2 {
        let (mean, sd) = mean_and_sd(&var_stat);
        match Normal::new(mean, sd) {
            Ok(law) if sd > 0.0 => Some(ks_distance_cdf(&var_stat, |x| law.cdf(x))?),
            _ => None,
        }
    } else {
        None
    };

    let studentized: Vec<&Vec<f64>> = replicates.iter().filter_map(|r| r.studentized.as_ref()).collect();
    let ks_studentized = if studentized.is_empty() || config.normal_reference_draws == 0 {
        None
    } else {
        let m = studentized[0].len();
        let mut out = Vec::with_capacity(m);
        for j in 0..m {
            let coord: Vec<f64> = studentized.iter().map(|z| z[j]).collect();
            let mut rng = stream_rng(config.seed, stream_id(Domain::NormalReference, n as u64, j as u64)?);
            let reference: Vec<f64> = (0..config.normal_reference_draws)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            out.push(ks_distance(&coord, &reference)?);
        }
        Some(out)
    };
    Ok(SizeSummary {
        n,
        failures,
        failure_details,
        studentized_count: studentized.len(),
        replicates,
        statistics,
        ks_dbw_limit,
        ks_variance_normal,
        ks_studentized,
    })
}

fn fit_rate(name: &str, sizes: &[SizeSummary]) -> Option<RateFit> {
    let medians: Vec<f64> = sizes.iter().map(|s| s.statistics[name].median).collect();
    let points: Vec<(f64, f64)> = sizes
        .iter()
        .zip(&medians)
        .filter(|(_, m)| **m > 0.0)
        .map(|(s, m)| ((s.n as f64).ln(), m.ln()))
        .collect();
    if points.len() < 2 {
        return None;
    }
    let k = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(RateFit {
        statistic: name.to_string(),
        slope,
        intercept: my - slope * mx,
        medians,
    })
}

/// Runs the configured experiment; deterministic for a fixed config.
pub fn run_experiment(config: &ExperimentConfig) -> Result<SimulationReport> {
    config.validate()?;
    let mut proxy_rng = stream_rng(config.seed, stream_id(Domain::Proxy, 0, 0)?);
    let proxy = population_proxy(config, &mut proxy_rng)?;
    log::info!(
        "population proxy: {} samples, {} iterations, residual {:.3e}",
        config.pop_proxy_size,
        proxy.iterations,
        proxy.residual
    );
    let basis = config.basis()?;
    let inv_root = pd_spectrum(proxy.q_star.as_matrix())?.map(|l| 1.0 / l.sqrt());

    let (xi_eigenvalues, limit_sample, var_d2_reference) = if config.kind == ExperimentKind::Clt {
        let sigma = estimate_sigma_hat(&proxy.samples, &proxy.q_star, &basis)?;
        let f = estimate_f_hat(&proxy.samples, &proxy.q_star, &basis, false)?;
        let xi = estimate_xi_hat(&sigma, &f, XI_RANK_TOL)?;
        let mut rng = stream_rng(config.seed, stream_id(Domain::Limit, 0, 0)?);
        let limit = sample_limit_dbw(&proxy.q_star, &xi, &basis, config.limit_draws, &mut rng)?;
        let var_ref = if config.variance_reference_draws >= 2 {
            let mut rng = stream_rng(config.seed, stream_id(Domain::VarianceReference, 0, 0)?);
            let fresh = draw_set(config, config.variance_reference_draws, &mut rng)?;
            let d2: Vec<Result<f64>> = fresh.map_ordered(|s| bw_distance_sq(&proxy.q_star, s));
            let d2 = d2.into_iter().collect::<Result<Vec<f64>>>()?;
            Some(weighted_variance(&d2, fresh.weights(), VarianceForm::Population))
        } else {
            None
        };
        (Some(xi.eigenvalues()), (!limit.is_empty()).then_some(limit), var_ref)
    } else {
        (None, None, None)
    };

    let reference = Reference {
        q_star: proxy.q_star.clone(),
        inv_root,
        v_star: proxy.v_star,
        basis,
        constraint: config.constraint_basis()?,
    };
    let mut sizes = Vec::with_capacity(config.n_grid.len());
    for &n in &config.n_grid {
        log::info!("n = {n}: {} replicates", config.replicates);
        sizes.push(run_size(config, &reference, limit_sample.as_deref(), n)?);
    }
    let rate_fits = ["rel_err", "dbw_raw"]
        .iter()
        .filter_map(|name| fit_rate(name, &sizes))
        .collect();
    Ok(SimulationReport {
        schema: REPORT_SCHEMA.to_string(),
        config: config.clone(),
        population: PopulationSummary {
            q_star: matrix_rows(proxy.q_star.as_matrix()),
            v_star: proxy.v_star,
            residual: proxy.residual,
            iterations: proxy.iterations,
            xi_eigenvalues,
            var_d2_reference,
        },
        limit_sample,
        sizes,
        rate_fits,
    })
}

/// [`run_experiment`] with `kind` forced to CLT.
pub fn run_clt_experiment(config: &ExperimentConfig) -> Result<SimulationReport> {
    run_experiment(&ExperimentConfig {
        kind: ExperimentKind::Clt,
        ..config.clone()
    })
}

/// [`run_experiment`] with `kind` forced to concentration.
pub fn run_concentration_experiment(config: &ExperimentConfig) -> Result<SimulationReport> {
    run_experiment(&ExperimentConfig {
        kind: ExperimentKind::Concentration,
        ..config.clone()
    })
}

/// Runs `f` on a dedicated rayon pool; `None` uses all cores.
pub fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| BwError::Validation(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            d: 2,
            n_grid: vec![3, 10],
            replicates: 4,
            pop_proxy_size: 200,
            limit_draws: 100,
            normal_reference_draws: 50,
            variance_reference_draws: 100,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn config_validation() {
        assert!(small().validate().is_ok());
        let bad = ExperimentConfig {
            n_grid: vec![10, 3],
            ..small()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig {
            eig_law: [0.0, 1.0],
            ..small()
        };
        assert!(bad.validate().is_err());
        let parsed: ExperimentConfig = serde_json::from_str(r#"{"d": 3, "constraint": "traceless-trace1"}"#).unwrap();
        assert_eq!(parsed.constraint, Some(ConstraintKind::TracelessTrace1));
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"dims": 3}"#).is_err());
    }

    #[test]
    fn point_mass_proxy_is_exact() {
        let cfg = ExperimentConfig {
            eig_law: [3.0, 3.0],
            rotation: Rotation::Identity,
            ..small()
        };
        let p = population_proxy(&cfg, &mut stream_rng(0, 0)).unwrap();
        assert_eq!(p.q_star.as_matrix(), &(DMatrix::identity(2, 2) * 3.0));
        assert_eq!(p.v_star, 0.0);
    }

    #[test]
    fn commuting_proxy() {
        let cfg = ExperimentConfig {
            rotation: Rotation::Identity,
            ..small()
        };
        let p = population_proxy(&cfg, &mut stream_rng(0, 0)).unwrap();
        for j in 0..2 {
            let mean_root: f64 = p.samples.matrices().iter().map(|s| s.as_matrix()[(j, j)].sqrt()).sum::<f64>() / 200.0;
            assert!((p.q_star.as_matrix()[(j, j)] - mean_root * mean_root).abs() < 1e-9);
        }
        assert!(p.q_star.as_matrix()[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn single_sample_replicates() {
        let cfg = ExperimentConfig {
            n_grid: vec![1],
            replicates: 1,
            ..small()
        };
        let r = run_clt_experiment(&cfg).unwrap();
        let rec = &r.sizes[0].replicates[0];
        let s = replicate_samples(&cfg, 1, 0).unwrap();
        let q_star = PsdMatrix::new(DMatrix::from_fn(2, 2, |i, j| r.population.q_star[i][j])).unwrap();
        assert!((rec.dbw - bw_distance(&s.matrices()[0], &q_star).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn determinism_and_trace_constraint() {
        let cfg = ExperimentConfig {
            constraint: Some(ConstraintKind::TracelessTrace1),
            ..small()
        };
        let a = run_experiment(&cfg).unwrap();
        let b = with_threads(Some(3), || run_experiment(&cfg)).unwrap().unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        for size in &a.sizes {
            for rec in &size.replicates {
                let tr: f64 = (0..2).map(|i| rec.q_n[i][i]).sum();
                assert!((tr - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn concentration_point_mass_is_zero() {
        let cfg = ExperimentConfig {
            eig_law: [2.0, 2.0],
            ..small()
        };
        let r = run_concentration_experiment(&cfg).unwrap();
        for s in &r.sizes {
            assert!(s.replicates.iter().all(|x| x.rel_err < 1e-12 && x.dbw_raw < 1e-6));
        }
    }
}
