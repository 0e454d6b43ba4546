//! Small statistics toolkit: compensated sums, mean/standard-error summaries
//! and Kolmogorov–Smirnov tests.

use serde::{Deserialize, Serialize};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = CompensatedSum::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

pub fn compensated_sum(xs: &[f64]) -> f64 {
    xs.iter().copied().collect::<CompensatedSum>().value()
}

/// Sample mean with its standard error. Every summary carries its count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
    pub sd: f64,
    pub n: usize,
}

impl MeanSe {
    /// Summarise `xs` in order. Requires at least one sample; `se` is 0 for a single one.
    pub fn of(xs: &[f64]) -> Self {
        let n = xs.len();
        assert!(n > 0, "MeanSe::of needs at least one sample");
        let mean = compensated_sum(xs) / n as f64;
        let sd = if n > 1 {
            let ss: CompensatedSum = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
            (ss.value() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            se: sd / (n as f64).sqrt(),
            sd,
            n,
        }
    }

    /// `|mean - target|` in units of the standard error.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target).abs() / self.se
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        (self.mean - target).abs() <= n_se * self.se
    }
}

/// Standard error of the difference of two independent means.
pub fn combined_se(a: &MeanSe, b: &MeanSe) -> f64 {
    a.se.hypot(b.se)
}

/// One-sample KS statistic of sorted `samples` against `cdf`.
pub fn ks_statistic<F: Fn(f64) -> f64>(sorted: &[f64], cdf: F) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            let lo = f - i as f64 / n;
            let hi = (i + 1) as f64 / n - f;
            lo.max(hi)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic Kolmogorov survival function `Q(lambda) = P(K > lambda)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += if k as u64 % 2 == 1 { term } else { -term };
        if term < 1e-18 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// p-value of a one-sample KS statistic `d` with `n` samples (Stephens' correction).
pub fn ks_pvalue(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)
}

/// Two-sample KS statistic; both slices must be sorted.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn ks_two_sample_pvalue(d: f64, na: usize, nb: usize) -> f64 {
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let sn = ne.sqrt();
    kolmogorov_survival((sn + 0.12 + 0.11 / sn) * d)
}

/// Sample excess-free kurtosis `E[(x-mu)^4] / Var^2` (3 for a Gaussian).
pub fn kurtosis(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = compensated_sum(xs) / n;
    let m2: CompensatedSum = xs.iter().map(|x| (x - mean).powi(2)).collect();
    let m4: CompensatedSum = xs.iter().map(|x| (x - mean).powi(4)).collect();
    let (m2, m4) = (m2.value() / n, m4.value() / n);
    m4 / (m2 * m2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(&xs), 2.0);
    }

    #[test]
    fn mean_se_of_two_samples_is_finite() {
        let s = MeanSe::of(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.sd - 2f64.sqrt()).abs() < 1e-15);
        assert!(s.se.is_finite() && s.n == 2);
    }

    #[test]
    fn kolmogorov_critical_value() {
        // The 1% critical value of the Kolmogorov distribution is 1.6276.
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
    }

    #[test]
    fn ks_uniform_grid_is_small() {
        let n = 1000;
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_statistic(&xs, |x| x);
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
        assert!(ks_pvalue(d, n) > 0.99);
    }

    #[test]
    fn ks_two_sample_disjoint() {
        let a = [0.0, 1.0, 2.0];
        let b = [3.0, 4.0, 5.0];
        assert_eq!(ks_two_sample(&a, &b), 1.0);
        assert_eq!(ks_two_sample(&a, &a), 0.0);
    }
}
