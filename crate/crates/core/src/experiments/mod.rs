//! Benchmark harness: MSE-ratio curves, Monte Carlo closure checks, Gram
//! matrix error and kernel-regression classification over CSV datasets.
//!
//! Trial `t` of every experiment draws its ensemble from `stream.trial(t)`,
//! whatever the scheme. Schemes compared inside one trial therefore share
//! their norm draw and, where both use one, their Haar rotation. Trials run on
//! the rayon pool and are reduced in index order with compensated sums, so
//! results do not depend on the thread count.

mod classify;
mod closure;
mod dataset;
mod gram;
mod mse;
mod report;

pub use classify::{
    accuracy, classification_experiment, kernel_regression_predict, tune_sigma,
    ClassificationConfig, KernelRegressor, Prediction, PredictionMode, SigmaScore, SigmaTuning,
    TUNING_SEEDS,
};
pub use closure::{closed_form_schemes, closure_suite, ClosureCheck};
pub use dataset::{
    load_dataset, synthetic_banknote_like, synthetic_blobs, synthetic_wifi_like, BlobSpec,
    CsvOptions, Dataset, SplitFractions, Splits, Subset,
};
pub use gram::{gaussian_points, gram_frobenius, gram_frobenius_error};
pub use mse::{
    monte_carlo_mse, monte_carlo_mse_pairs, mse_gap, mse_ratio_curve, pair_with_v, pair_with_z,
    MonteCarloMse, MseRatioRow,
};
pub use report::{write_csv, write_json, ExperimentReport, ReportParameters, SchemeStatistic};

use rayon::prelude::*;

use crate::error::Result;
use crate::rng::RngStream;

/// Run `trials` independent trials in parallel, returning results in trial order.
pub(crate) fn run_trials<T, F>(trials: usize, stream: &RngStream, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&RngStream) -> Result<T> + Sync,
{
    (0..trials as u64)
        .into_par_iter()
        .map(|t| f(&stream.trial(t)))
        .collect()
}
