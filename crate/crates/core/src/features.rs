//! Exact Gaussian/softmax kernels and the positive (PRF) and trigonometric
//! (RFF) random-feature maps over a [`ProjectionEnsemble`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blocks::{CouplingKind, CouplingScheme, ProjectionEnsemble};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Largest exponent that still exponentiates to a finite `f64`.
const MAX_EXPONENT: f64 = 709.0;

/// A query pair with `v = |x + y|` and `z = |x - y|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelPair {
    x: Vec<f64>,
    y: Vec<f64>,
    v: f64,
    z: f64,
}

impl KernelPair {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.is_empty() {
            return Err(Error::arg("kernel pair needs d >= 1"));
        }
        if x.iter().chain(&y).any(|a| !a.is_finite()) {
            return Err(Error::arg("kernel pair entries must be finite"));
        }
        let v = x.iter().zip(&y).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt();
        let z = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        Ok(Self { x, y, v, z })
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn d(&self) -> usize {
        self.x.len()
    }

    pub fn x_norm(&self) -> f64 {
        dot(&self.x, &self.x).sqrt()
    }

    pub fn y_norm(&self) -> f64 {
        dot(&self.y, &self.y).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureMapKind {
    Prf,
    Rff,
}

impl FeatureMapKind {
    /// Output length for `m` projection vectors.
    pub fn output_len(&self, m: usize) -> usize {
        match self {
            FeatureMapKind::Prf => m,
            FeatureMapKind::Rff => 2 * m,
        }
    }
}

impl fmt::Display for FeatureMapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMapKind::Prf => "prf",
            FeatureMapKind::Rff => "rff",
        })
    }
}

impl FromStr for FeatureMapKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "prf" | "positive" => Ok(FeatureMapKind::Prf),
            "rff" | "fourier" => Ok(FeatureMapKind::Rff),
            other => Err(Error::arg(format!("unknown feature map '{other}'"))),
        }
    }
}

pub fn gaussian_kernel(pair: &KernelPair) -> f64 {
    (-0.5 * pair.z * pair.z).exp()
}

pub fn softmax_kernel(pair: &KernelPair) -> f64 {
    dot(&pair.x, &pair.y).exp()
}

/// Rejects trigonometric features on simplex-coupled ensembles.
pub fn check_supported(scheme: CouplingScheme, map: FeatureMapKind) -> Result<()> {
    if map == FeatureMapKind::Rff
        && matches!(scheme.kind, CouplingKind::SimRf | CouplingKind::SimRfPlus)
    {
        return Err(Error::Unsupported(format!(
            "RFF features are only defined for IID and ORF couplings, not {scheme}"
        )));
    }
    Ok(())
}

fn prf_from_projection(x: &[f64], wx: &[f64]) -> Result<Vec<f64>> {
    let sq = dot(x, x);
    let scale = 1.0 / (wx.len() as f64).sqrt();
    wx.iter()
        .map(|p| {
            let e = p - sq;
            if e > MAX_EXPONENT {
                Err(Error::Range(format!(
                    "PRF exponent {e:.1} overflows; rescale the inputs"
                )))
            } else {
                Ok(scale * e.exp())
            }
        })
        .collect()
}

fn rff_from_projection(wx: &[f64]) -> Vec<f64> {
    let scale = 1.0 / (wx.len() as f64).sqrt();
    wx.iter()
        .flat_map(|p| {
            let (s, c) = p.sin_cos();
            [scale * s, scale * c]
        })
        .collect()
}

/// `m^{-1/2} exp(w_i . x - |x|^2)` for each projection vector.
pub fn prf_features(x: &[f64], ensemble: &ProjectionEnsemble) -> Result<Vec<f64>> {
    let wx = ensemble.project(x)?;
    prf_from_projection(x, &wx)
}

/// `m^{-1/2} (sin w_i . x, cos w_i . x)` interleaved per projection vector.
pub fn rff_features(x: &[f64], ensemble: &ProjectionEnsemble) -> Result<Vec<f64>> {
    let wx = ensemble.project(x)?;
    Ok(rff_from_projection(&wx))
}

pub fn features(x: &[f64], ensemble: &ProjectionEnsemble, map: FeatureMapKind) -> Result<Vec<f64>> {
    check_supported(ensemble.scheme(), map)?;
    match map {
        FeatureMapKind::Prf => prf_features(x, ensemble),
        FeatureMapKind::Rff => rff_features(x, ensemble),
    }
}

/// Features of every row of `points`, one output row per point.
pub fn feature_matrix(
    points: &Matrix,
    ensemble: &ProjectionEnsemble,
    map: FeatureMapKind,
) -> Result<Matrix> {
    check_supported(ensemble.scheme(), map)?;
    let width = map.output_len(ensemble.m());
    let mut data = Vec::with_capacity(points.rows() * width);
    for x in points.row_iter() {
        data.extend(features(x, ensemble, map)?);
    }
    Matrix::from_vec(points.rows(), width, data)
}

/// `phi(x) . phi(y)`.
pub fn estimate_kernel(
    pair: &KernelPair,
    ensemble: &ProjectionEnsemble,
    map: FeatureMapKind,
) -> Result<f64> {
    if pair.d() != ensemble.d() {
        return Err(Error::DimensionMismatch {
            expected: ensemble.d(),
            got: pair.d(),
        });
    }
    let fx = features(&pair.x, ensemble, map)?;
    let fy = features(&pair.y, ensemble, map)?;
    Ok(dot(&fx, &fy))
}
