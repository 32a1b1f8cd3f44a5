//! Monte Carlo laboratory: random SPD laws, replication harness, and
//! density/KS utilities.
//!
//! Every random quantity is drawn from a ChaCha8 stream identified by
//! `(master seed, domain, n, k)`, so reports do not depend on scheduling or
//! thread count.

mod density;
mod experiment;
mod rng;

pub use density::{
    empirical_density, histogram, ks_distance, ks_distance_cdf, mean_and_sd, silverman_bandwidth, Density,
    Histogram,
};
pub use experiment::{
    draw_sample, population_proxy, replicate_samples, run_clt_experiment, run_concentration_experiment,
    run_experiment, with_threads, ConstraintKind, ExperimentConfig, ExperimentKind, PopulationProxy,
    PopulationSummary, RateFit, ReplicateFailure, ReplicateRecord, SimulationReport, SizeSummary,
    StatisticSummary, REPORT_SCHEMA,
};
pub use rng::{haar_orthogonal, random_spd, stream_id, stream_rng, Domain, Rotation};
