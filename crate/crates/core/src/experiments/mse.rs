use serde::{Deserialize, Serialize};

use super::run_trials;
use crate::analytics::{prf_mse_ratio, SeriesControl};
use crate::blocks::{build_ensemble, CouplingKind, CouplingScheme};
use crate::error::{Error, Result};
use crate::features::{check_supported, estimate_kernel, gaussian_kernel, FeatureMapKind, KernelPair};
use crate::rng::RngStream;
use crate::stats::MeanSe;

/// One row of the PRF MSE-ratio table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseRatioRow {
    pub v: f64,
    pub orf: f64,
    pub simrf: f64,
    /// Set at `v = 0`, where both ratios are reported as their limits.
    pub limit: bool,
}

/// `MSE_ORF / MSE_IID` and `MSE_SimRF / MSE_IID` over a grid of `v`, from the
/// closed forms only.
pub fn mse_ratio_curve(d: usize, v_grid: &[f64], m: usize, ctl: SeriesControl) -> Result<Vec<MseRatioRow>> {
    if d < 2 {
        return Err(Error::arg(format!("ratio curve needs d >= 2, got {d}")));
    }
    if m < 1 || m > d {
        return Err(Error::arg(format!("ratio curve needs 1 <= m <= d, got m={m}, d={d}")));
    }
    v_grid
        .iter()
        .map(|&v| {
            Ok(MseRatioRow {
                v,
                orf: prf_mse_ratio(CouplingKind::Orf, v, d, m, ctl)?,
                simrf: prf_mse_ratio(CouplingKind::SimRf, v, d, m, ctl)?,
                limit: v == 0.0,
            })
        })
        .collect()
}

fn diagonal(d: usize) -> Vec<f64> {
    vec![1.0 / (d as f64).sqrt(); d]
}

/// `x = y` along the diagonal with `|x + y| = v`.
pub fn pair_with_v(d: usize, v: f64) -> Result<KernelPair> {
    let x: Vec<f64> = diagonal(d).into_iter().map(|u| 0.5 * v * u).collect();
    KernelPair::new(x.clone(), x)
}

/// `x = -y` along the diagonal with `|x - y| = z`.
pub fn pair_with_z(d: usize, z: f64) -> Result<KernelPair> {
    let x: Vec<f64> = diagonal(d).into_iter().map(|u| 0.5 * z * u).collect();
    let y = x.iter().map(|a| -a).collect();
    KernelPair::new(x, y)
}

/// Monte Carlo summary of a kernel estimator at one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloMse {
    pub exact: f64,
    pub estimate: MeanSe,
    /// Per-trial `(K_hat - K)^2`; its mean is the empirical MSE.
    pub squared_error: MeanSe,
}

impl MonteCarloMse {
    pub fn mse(&self) -> f64 {
        self.squared_error.mean
    }

    pub fn trials(&self) -> usize {
        self.squared_error.n
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials < 2 {
        return Err(Error::arg(format!("need at least 2 trials, got {trials}")));
    }
    Ok(())
}

pub fn monte_carlo_mse(
    pair: &KernelPair,
    scheme: CouplingScheme,
    map: FeatureMapKind,
    m: usize,
    trials: usize,
    stream: &RngStream,
) -> Result<MonteCarloMse> {
    let out = monte_carlo_mse_pairs(std::slice::from_ref(pair), scheme, map, m, trials, stream)?;
    Ok(out[0])
}

/// As [`monte_carlo_mse`] for several pairs evaluated on the same ensembles.
pub fn monte_carlo_mse_pairs(
    pairs: &[KernelPair],
    scheme: CouplingScheme,
    map: FeatureMapKind,
    m: usize,
    trials: usize,
    stream: &RngStream,
) -> Result<Vec<MonteCarloMse>> {
    check_trials(trials)?;
    check_supported(scheme, map)?;
    let Some(first) = pairs.first() else {
        return Ok(Vec::new());
    };
    let d = first.d();
    if let Some(p) = pairs.iter().find(|p| p.d() != d) {
        return Err(Error::DimensionMismatch { expected: d, got: p.d() });
    }
    let per_trial = run_trials(trials, stream, |s| {
        let ens = build_ensemble(scheme, d, m, s)?;
        pairs.iter().map(|p| estimate_kernel(p, &ens, map)).collect::<Result<Vec<_>>>()
    })?;
    Ok(pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let exact = gaussian_kernel(p);
            let est: Vec<f64> = per_trial.iter().map(|t| t[i]).collect();
            let sq: Vec<f64> = est.iter().map(|k| (k - exact) * (k - exact)).collect();
            MonteCarloMse {
                exact,
                estimate: MeanSe::of(&est),
                squared_error: MeanSe::of(&sq),
            }
        })
        .collect())
}

/// Paired estimate of `MSE_baseline - MSE_coupled`: both schemes see the same
/// trial streams and the per-trial difference of squared errors is averaged.
pub fn mse_gap(
    pair: &KernelPair,
    baseline: CouplingScheme,
    coupled: CouplingScheme,
    map: FeatureMapKind,
    m: usize,
    trials: usize,
    stream: &RngStream,
) -> Result<MeanSe> {
    check_trials(trials)?;
    check_supported(baseline, map)?;
    check_supported(coupled, map)?;
    let exact = gaussian_kernel(pair);
    let diffs = run_trials(trials, stream, |s| {
        let a = estimate_kernel(pair, &build_ensemble(baseline, pair.d(), m, s)?, map)? - exact;
        let b = estimate_kernel(pair, &build_ensemble(coupled, pair.d(), m, s)?, map)? - exact;
        Ok(a * a - b * b)
    })?;
    Ok(MeanSe::of(&diffs))
}
