use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, Subset};
use super::report::{ExperimentReport, ReportParameters, SchemeStatistic};
use super::run_trials;
use crate::blocks::{build_ensemble, CouplingScheme, ProjectionEnsemble};
use crate::error::{Error, Result};
use crate::features::{check_supported, features, FeatureMapKind};
use crate::linalg::dot;
use crate::rng::RngStream;
use crate::stats::MeanSe;

/// Independent ensembles averaged per grid point when tuning `sigma`.
pub const TUNING_SEEDS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PredictionMode {
    Exact,
    RandomFeatures {
        scheme: CouplingScheme,
        map: FeatureMapKind,
        m: usize,
        stream: RngStream,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    /// Nonnegative class weights summing to 1.
    pub distribution: Vec<f64>,
    pub class: usize,
    /// The kernel weights did not normalise and the uniform distribution was used.
    pub fallback: bool,
}

impl Prediction {
    fn from_weights(mut w: Vec<f64>) -> Self {
        // RFF weights can be negative; those classes get zero mass.
        for x in &mut w {
            *x = x.max(0.0);
        }
        let total: f64 = w.iter().sum();
        let fallback = !(total > 0.0 && total.is_finite());
        if fallback {
            let c = w.len() as f64;
            w.iter_mut().for_each(|x| *x = 1.0 / c);
        } else {
            w.iter_mut().for_each(|x| *x /= total);
        }
        let class = w
            .iter()
            .enumerate()
            .fold(0, |best, (i, &x)| if x > w[best] { i } else { best });
        Self {
            distribution: w,
            class,
            fallback,
        }
    }
}

#[derive(Debug, Clone)]
enum Fitted {
    Exact { points: Vec<Vec<f64>>, labels: Vec<usize> },
    Features { ensemble: ProjectionEnsemble, map: FeatureMapKind, class_sums: Vec<Vec<f64>> },
}

/// Nadaraya-Watson classifier with the Gaussian kernel `K(sigma x, sigma x')`.
#[derive(Debug, Clone)]
pub struct KernelRegressor {
    sigma: f64,
    classes: usize,
    fitted: Fitted,
}

impl KernelRegressor {
    pub fn fit(train: &Subset<'_>, sigma: f64, mode: &PredictionMode) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::arg("kernel regression needs at least one training point"));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::arg(format!("sigma must be positive, got {sigma}")));
        }
        let scaled = |i: usize| -> Vec<f64> { train.point(i).iter().map(|x| sigma * x).collect() };
        let classes = train.num_classes();
        let fitted = match *mode {
            PredictionMode::Exact => Fitted::Exact {
                points: (0..train.len()).map(scaled).collect(),
                labels: (0..train.len()).map(|i| train.class(i)).collect(),
            },
            PredictionMode::RandomFeatures { scheme, map, m, stream } => {
                check_supported(scheme, map)?;
                let ensemble = build_ensemble(scheme, train.dim(), m, &stream)?;
                let mut class_sums = vec![vec![0.0; map.output_len(m)]; classes];
                for i in 0..train.len() {
                    let phi = features(&scaled(i), &ensemble, map)?;
                    for (s, p) in class_sums[train.class(i)].iter_mut().zip(&phi) {
                        *s += p;
                    }
                }
                Fitted::Features { ensemble, map, class_sums }
            }
        };
        Ok(Self { sigma, classes, fitted })
    }

    pub fn predict(&self, query: &[f64]) -> Result<Prediction> {
        let q: Vec<f64> = query.iter().map(|x| self.sigma * x).collect();
        let weights = match &self.fitted {
            Fitted::Exact { points, labels } => {
                if q.len() != points[0].len() {
                    return Err(Error::DimensionMismatch {
                        expected: points[0].len(),
                        got: q.len(),
                    });
                }
                // Log-domain so that far queries do not underflow to 0/0.
                let logs: Vec<f64> = points
                    .iter()
                    .map(|p| -0.5 * p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                    .collect();
                let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut w = vec![0.0; self.classes];
                for (l, &k) in logs.iter().zip(labels) {
                    w[k] += (l - top).exp();
                }
                w
            }
            Fitted::Features { ensemble, map, class_sums } => {
                let phi = features(&q, ensemble, *map)?;
                class_sums.iter().map(|s| dot(&phi, s)).collect()
            }
        };
        Ok(Prediction::from_weights(weights))
    }
}

/// Predicted class distribution for one query.
pub fn kernel_regression_predict(
    train: &Subset<'_>,
    query: &[f64],
    sigma: f64,
    mode: &PredictionMode,
) -> Result<Prediction> {
    KernelRegressor::fit(train, sigma, mode)?.predict(query)
}

/// Fraction of `data` whose argmax prediction equals the true class.
pub fn accuracy(model: &KernelRegressor, data: &Subset<'_>) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::arg("accuracy needs a nonempty split"));
    }
    let mut hits = 0usize;
    for i in 0..data.len() {
        if model.predict(data.point(i))?.class == data.class(i) {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaScore {
    pub sigma: f64,
    pub accuracy: MeanSe,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaTuning {
    pub sigma: f64,
    /// Validation accuracy per grid point, in grid order.
    pub table: Vec<SigmaScore>,
}

/// Grid search for the `sigma` maximising PRF validation accuracy of
/// `scheme`, averaged over [`TUNING_SEEDS`] ensembles. Ties go to the smaller `sigma`.
pub fn tune_sigma(
    train: &Subset<'_>,
    validation: &Subset<'_>,
    sigma_grid: &[f64],
    scheme: CouplingScheme,
    m: usize,
    stream: &RngStream,
) -> Result<SigmaTuning> {
    if sigma_grid.is_empty() {
        return Err(Error::arg("sigma grid is empty"));
    }
    if validation.is_empty() || train.is_empty() {
        return Err(Error::arg("sigma tuning needs nonempty train and validation splits"));
    }
    let mut table = Vec::with_capacity(sigma_grid.len());
    for &sigma in sigma_grid {
        let accs = run_trials(TUNING_SEEDS, stream, |s| {
            let mode = PredictionMode::RandomFeatures {
                scheme,
                map: FeatureMapKind::Prf,
                m,
                stream: *s,
            };
            accuracy(&KernelRegressor::fit(train, sigma, &mode)?, validation)
        })?;
        table.push(SigmaScore {
            sigma,
            accuracy: MeanSe::of(&accs),
        });
    }
    let best = best_sigma(&table);
    Ok(SigmaTuning { sigma: best, table })
}

fn best_sigma(table: &[SigmaScore]) -> f64 {
    table
        .iter()
        .fold(None::<&SigmaScore>, |best, s| match best {
            Some(b)
                if b.accuracy.mean > s.accuracy.mean
                    || (b.accuracy.mean == s.accuracy.mean && b.sigma <= s.sigma) =>
            {
                Some(b)
            }
            _ => Some(s),
        })
        .expect("nonempty grid")
        .sigma
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationConfig {
    pub schemes: Vec<CouplingScheme>,
    pub m_grid: Vec<usize>,
    pub trials: usize,
    pub sigma: f64,
    pub map: FeatureMapKind,
}

/// Mean test accuracy and its standard error for every `(scheme, m)`, plus
/// the exact-kernel baseline under scheme name `exact` with `m = 0`.
pub fn classification_experiment(
    dataset: &Dataset,
    config: &ClassificationConfig,
    stream: &RngStream,
) -> Result<ExperimentReport> {
    let (train, test) = (dataset.train(), dataset.test());
    if train.is_empty() || dataset.validation().is_empty() || test.is_empty() {
        return Err(Error::arg(format!(
            "dataset {} needs nonempty train, validation and test splits",
            dataset.name
        )));
    }
    if config.trials < 2 {
        return Err(Error::arg(format!("need at least 2 trials, got {}", config.trials)));
    }
    for &scheme in &config.schemes {
        check_supported(scheme, config.map)?;
    }
    let exact = accuracy(&KernelRegressor::fit(&train, config.sigma, &PredictionMode::Exact)?, &test)?;
    let mut statistics = vec![SchemeStatistic {
        scheme: "exact".into(),
        m: 0,
        mean: exact,
        se: 0.0,
        trials: 1,
    }];
    for &m in &config.m_grid {
        for &scheme in &config.schemes {
            let accs = run_trials(config.trials, stream, |s| {
                let mode = PredictionMode::RandomFeatures {
                    scheme,
                    map: config.map,
                    m,
                    stream: *s,
                };
                accuracy(&KernelRegressor::fit(&train, config.sigma, &mode)?, &test)
            })?;
            let summary = MeanSe::of(&accs);
            statistics.push(SchemeStatistic {
                scheme: scheme.to_string(),
                m,
                mean: summary.mean,
                se: summary.se,
                trials: summary.n,
            });
        }
    }
    Ok(ExperimentReport::new(
        "classify",
        ReportParameters {
            d: dataset.dim(),
            m_grid: config.m_grid.clone(),
            schemes: config.schemes.iter().map(ToString::to_string).collect(),
            map: Some(config.map.to_string()),
            sigma: Some(config.sigma),
            trials: config.trials,
            seed: stream.seed,
            dataset: Some(dataset.name.clone()),
        },
        statistics,
    ))
}
