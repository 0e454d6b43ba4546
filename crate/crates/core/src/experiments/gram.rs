use rand_distr::{Distribution, StandardNormal};

use super::run_trials;
use crate::blocks::{build_ensemble, CouplingScheme};
use crate::error::{Error, Result};
use crate::features::{feature_matrix, FeatureMapKind};
use crate::linalg::{dot, Matrix};
use crate::rng::RngStream;
use crate::stats::{CompensatedSum, MeanSe};

/// `n` points with i.i.d. `N(0, sd^2)` coordinates.
pub fn gaussian_points(n: usize, d: usize, sd: f64, stream: &RngStream) -> Result<Matrix> {
    if !(sd > 0.0) || !sd.is_finite() {
        return Err(Error::arg(format!("point spread must be positive, got {sd}")));
    }
    let mut rng = stream.generator();
    let data = (0..n * d)
        .map(|_| {
            let g: f64 = StandardNormal.sample(&mut rng);
            sd * g
        })
        .collect();
    Matrix::from_vec(n, d, data)
}

/// `sum_ij (K_ij - K_hat_ij)^2` for the Gaussian kernel Gram matrix of
/// `points` and its PRF approximation from one ensemble.
pub fn gram_frobenius_error(points: &Matrix, scheme: CouplingScheme, m: usize, stream: &RngStream) -> Result<f64> {
    let ens = build_ensemble(scheme, points.cols(), m, stream)?;
    let phi = feature_matrix(points, &ens, FeatureMapKind::Prf)?;
    let n = points.rows();
    let sq_norms: Vec<f64> = points.row_iter().map(|x| dot(x, x)).collect();
    let mut acc = CompensatedSum::new();
    for i in 0..n {
        for j in 0..n {
            let xy = dot(points.row(i), points.row(j));
            let exact = (-0.5 * (sq_norms[i] + sq_norms[j] - 2.0 * xy).max(0.0)).exp();
            let diff = exact - dot(phi.row(i), phi.row(j));
            acc.add(diff * diff);
        }
    }
    Ok(acc.value())
}

/// Mean and standard error of [`gram_frobenius_error`] over independent ensembles.
pub fn gram_frobenius(
    points: &Matrix,
    scheme: CouplingScheme,
    m: usize,
    trials: usize,
    stream: &RngStream,
) -> Result<MeanSe> {
    if points.rows() < 2 {
        return Err(Error::arg("Gram experiment needs at least 2 points"));
    }
    if trials < 2 {
        return Err(Error::arg(format!("need at least 2 trials, got {trials}")));
    }
    let errs = run_trials(trials, stream, |s| gram_frobenius_error(points, scheme, m, s))?;
    Ok(MeanSe::of(&errs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible_and_shrinks_with_m() {
        let pts = gaussian_points(16, 8, 0.3, &RngStream::new(1)).unwrap();
        let s = RngStream::new(2);
        let a = gram_frobenius(&pts, CouplingScheme::ORF, 8, 40, &s).unwrap();
        assert_eq!(a, gram_frobenius(&pts, CouplingScheme::ORF, 8, 40, &s).unwrap());
        let b = gram_frobenius(&pts, CouplingScheme::ORF, 128, 40, &s).unwrap();
        assert!(b.mean < a.mean);
    }

    #[test]
    fn rejects_single_point() {
        let pts = gaussian_points(1, 4, 1.0, &RngStream::new(1)).unwrap();
        assert!(gram_frobenius(&pts, CouplingScheme::IID, 4, 10, &RngStream::new(1)).is_err());
    }
}
