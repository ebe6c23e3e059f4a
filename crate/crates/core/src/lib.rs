//! Heavy-tailed distribution fitting for grouped expenditure surveys.
//!
//! The crate reads binned survey tables (class limits, class means and
//! per-1000 frequencies), fits parametric families by minimum χ², tests the
//! fits with Monte-Carlo p-values, and computes Lorenz curves, Gini
//! coefficients, kernel density estimates and time trends. A small agent
//! simulation of the Cobb–Douglas consumption model is included.
//!
//! ```
//! use expendist::{gini_from_lorenz, lorenz_from_grouped, GroupedSample, ExpenditureClass, Unit};
//!
//! let sample = GroupedSample::new(
//!     vec![
//!         ExpenditureClass::new(0.0, 300.0, Some(220.0), 400.0, 400.0),
//!         ExpenditureClass::new(300.0, 600.0, Some(430.0), 400.0, 400.0),
//!         ExpenditureClass::new(600.0, f64::INFINITY, Some(900.0), 200.0, 200.0),
//!     ],
//!     Unit::Person,
//! )?;
//! let gini = gini_from_lorenz(&lorenz_from_grouped(&sample, Unit::Person)?);
//! assert!(gini.value > 0.0 && gini.value < 100.0);
//! # Ok::<(), expendist::Error>(())
//! ```

// Negated comparisons are how NaN inputs get rejected throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distributions;
pub mod error;
pub mod estimation;
pub mod gof;
pub mod grouped_data;
pub mod inequality;
pub mod kde;
pub mod microfoundation;
pub mod numeric;
pub mod optimize;
pub mod trends;

/// Seed used whenever the caller does not supply one.
pub const DEFAULT_SEED: u64 = 12345;

pub use distributions::{stream_rng, DistributionSpec, DoubleParetoParams, Family, MixtureParams};
pub use error::{Error, ErrorKind, Result};
pub use estimation::{
    chi2_at, chi2_statistic, default_k_grid, expected_class_counts, fit_chi2, fit_chi2_with_starts, fit_weibull_grid,
    FitOptions, FitResult, GridLocation, GridResponse, WeibullGridConfig, WeibullGridFit,
};
pub use gof::{ks_grouped, mc_pvalue, mc_pvalue_sized, GofReport, Statistic, DEFAULT_REPLICATES};
pub use grouped_data::{
    deflate, load_grouped_csv, read_grouped_csv, sector_weight, DeflatorSeries, ExpenditureClass, GroupedSample,
    Sector, SectorWeights, Unit,
};
pub use inequality::{
    calibrate_tail_cutoff, gini_from_lorenz, gini_pairwise, lorenz_from_grouped, lorenz_from_values,
    population_top_share, simulation_gini, simulation_gini_repeated, top_share, top_share_of_values, GiniEstimate,
    GiniMethod, LorenzCurve, SimulationSummary,
};
pub use kde::{
    bandwidth_for, default_grid, grouped_kde, kde_series, log_spread, pool_national, pooled_bandwidth,
    silverman_bandwidth, KdeCurve, Scale,
};
pub use microfoundation::{
    simulate_consumption, tail_exponent_hill, AgentModelConfig, Aggregation, RatioDist, TauMode,
};
pub use trends::{
    linear_trend, quadratic_trend, survey_time, trend_of_specs, trend_report, Parameter, QuadraticTrend, SeriesTable,
    TimeEncoding, TrendResult,
};
