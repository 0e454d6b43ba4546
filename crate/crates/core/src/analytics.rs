//! Closed-form RF-conformities, PRF/RFF mean squared errors, orthogonality
//! gaps and the densities of `|w_i + w_j|`.
//!
//! Everything here is deterministic. Gamma ratios go through `ln_gamma`, and
//! the positive series use term recurrences so that `d` in the thousands is
//! fine.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::blocks::CouplingKind;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::quad::{integrate, QuadSettings};
use crate::stats::CompensatedSum;

const CANCELLATION_LIMIT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesControl {
    pub rel_tol: f64,
    pub max_terms: usize,
}

impl Default for SeriesControl {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_terms: 10_000,
        }
    }
}

impl SeriesControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || self.max_terms == 0 {
            return Err(Error::arg("series control needs rel_tol > 0 and max_terms >= 1"));
        }
        Ok(())
    }
}

/// Per-scheme conformity values for one norm draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformityReport {
    pub scheme: String,
    /// Closed form; only IID, ORF and SimRF have one.
    pub analytic: Option<f64>,
    pub empirical: f64,
    /// Spread of the empirical value when it is itself an average.
    pub empirical_sd: Option<f64>,
    pub truncated: Option<f64>,
    pub v: f64,
    pub d: usize,
    pub m: usize,
    pub seed: u64,
}

/// Sum `term(k)` for k = 0, 1, ... until three consecutive terms fall below
/// `rel_tol` times the partial sum. Returns the sum and the sum of magnitudes.
fn sum_series<F: FnMut(usize) -> Result<f64>>(ctl: SeriesControl, mut term: F) -> Result<(f64, f64)> {
    ctl.validate()?;
    let mut sum = CompensatedSum::new();
    let mut abs = 0.0;
    let mut small = 0;
    for k in 0..ctl.max_terms {
        let t = term(k)?;
        if !t.is_finite() {
            return Err(Error::Range(format!("series term {k} is not finite")));
        }
        sum.add(t);
        abs += t.abs();
        let partial = sum.value();
        if t.abs() <= ctl.rel_tol * partial.abs() || (t == 0.0 && partial == 0.0 && k > 0) {
            small += 1;
            if small >= 3 {
                return Ok((sum.value(), abs));
            }
        } else {
            small = 0;
        }
    }
    Err(Error::NonConvergence {
        terms: ctl.max_terms,
    })
}

fn check_v(v: f64) -> Result<()> {
    if !(v >= 0.0) || !v.is_finite() {
        return Err(Error::arg(format!("v must be finite and >= 0, got {v}")));
    }
    Ok(())
}

fn check_d(d: usize, min: usize) -> Result<()> {
    if d < min {
        return Err(Error::arg(format!("need d >= {min}, got {d}")));
    }
    Ok(())
}

/// `k ln x`, with `0 ln 0 = 0`.
fn k_ln(k: usize, x: f64) -> f64 {
    if k == 0 {
        0.0
    } else {
        k as f64 * x.ln()
    }
}

pub fn conformity_iid(v: f64, _d: usize) -> f64 {
    (v * v).exp()
}

pub fn conformity_orf(v: f64, d: usize, ctl: SeriesControl) -> Result<f64> {
    check_v(v)?;
    check_d(d, 2)?;
    let x = v * v / 2.0;
    let hd = d as f64 / 2.0;
    let mut t = 1.0;
    let (s, _) = sum_series(ctl, |k| {
        if k > 0 {
            let j = (k - 1) as f64;
            t *= x / (j + 1.0) * (j + d as f64) / (j + hd);
        }
        Ok(t)
    })?;
    Ok(s)
}

/// `e^{v^2} - rho_ORF` summed termwise as `sum_k v^{2k}/k! (1 - c_k)` with
/// `c_k = Gamma(d/2) Gamma(k+d) / (2^k Gamma(d) Gamma(k+d/2))`. Since
/// `c_0 = c_1 = 1` nothing cancels at small `v`.
pub fn orf_conformity_deficit(v: f64, d: usize, ctl: SeriesControl) -> Result<f64> {
    check_v(v)?;
    check_d(d, 2)?;
    let x = v * v;
    let hd = d as f64 / 2.0;
    let mut pow = 1.0;
    let mut c = 1.0;
    let (s, _) = sum_series(ctl, |k| {
        if k > 0 {
            let j = (k - 1) as f64;
            pow *= x / (j + 1.0);
            c *= (j + d as f64) / (2.0 * (j + hd));
        }
        Ok(if k < 2 { 0.0 } else { pow * (1.0 - c) })
    })?;
    Ok(s)
}

/// `Gamma(d/2) / Gamma((d+1)/2)` by upward recurrence, exact to a few ulps.
fn half_gamma_ratio(d: usize) -> f64 {
    let (mut q, mut n) = if d % 2 == 1 {
        (std::f64::consts::PI.sqrt(), 1)
    } else {
        (2.0 / std::f64::consts::PI.sqrt(), 2)
    };
    while n < d {
        q *= n as f64 / (n as f64 + 1.0);
        n += 2;
    }
    q
}

/// Coefficients of the simplex series written relative to the IID one:
/// `rho_SimRF = sum_k v^{2k}/k! c_k B_k` with the ORF ratio `c_k` and the
/// sign-alternating binomial sum
/// `B_k = sum_p C(k,p) (-1/(d-1))^p q_p / q_0`, `q_p = Gamma((d+p)/2) / Gamma((d+p+1)/2)`.
/// `B_k` is summed in log-space with its rounding error tracked.
struct SimplexSeries {
    d: usize,
    ln_c: Vec<f64>,
    ln_q: Vec<f64>,
    ln_fact: Vec<f64>,
    ln_q0_sq: f64,
}

impl SimplexSeries {
    fn new(d: usize) -> Self {
        Self {
            d,
            ln_c: vec![0.0],
            ln_q: vec![0.0],
            ln_fact: vec![0.0],
            ln_q0_sq: 2.0 * half_gamma_ratio(d).ln(),
        }
    }

    fn grow(&mut self, k: usize) {
        let df = self.d as f64;
        while self.ln_c.len() <= k {
            let j = (self.ln_c.len() - 1) as f64;
            let prev = *self.ln_c.last().expect("nonempty");
            self.ln_c.push(prev + ((j + df) / (2.0 * j + df)).ln());
        }
        // q_p q_{p+1} = 2 / (d + p).
        while self.ln_q.len() <= k {
            let p = (self.ln_q.len() - 1) as f64;
            let prev = *self.ln_q.last().expect("nonempty");
            self.ln_q.push(2f64.ln() - (df + p).ln() - self.ln_q0_sq - prev);
        }
        while self.ln_fact.len() <= k {
            let n = self.ln_fact.len() as f64;
            let prev = *self.ln_fact.last().expect("nonempty");
            self.ln_fact.push(prev + n.ln());
        }
    }

    /// `(c_k B_k, rounding error bound of c_k B_k)`.
    fn coefficient(&mut self, k: usize) -> (f64, f64) {
        self.grow(k);
        let ln_inv = (self.d as f64 - 1.0).ln();
        let exps: Vec<f64> = (0..=k)
            .map(|p| {
                self.ln_fact[k] - self.ln_fact[p] - self.ln_fact[k - p] - p as f64 * ln_inv
                    + self.ln_q[p]
            })
            .collect();
        let top = exps.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = CompensatedSum::new();
        let mut abs = 0.0;
        for (p, e) in exps.iter().enumerate() {
            let t = (e - top).exp();
            abs += t;
            sum.add(if p % 2 == 0 { t } else { -t });
        }
        let scale = (top + self.ln_c[k]).exp();
        (scale * sum.value(), scale * abs * 4.0 * f64::EPSILON)
    }

    /// `ln(v^{2k} / k!)`.
    fn ln_weight(&mut self, k: usize, v: f64) -> f64 {
        self.grow(k);
        k_ln(k, v * v) - self.ln_fact[k]
    }
}

/// Sum the simplex series; `deficit` selects `e^{v^2} - rho` instead of `rho`.
fn simrf_series(v: f64, d: usize, ctl: SeriesControl, deficit: bool) -> Result<f64> {
    check_v(v)?;
    check_d(d, 2)?;
    let mut series = SimplexSeries::new(d);
    let mut err = 0.0;
    let (s, _) = sum_series(ctl, |k| {
        if v == 0.0 && k > 0 {
            return Ok(0.0);
        }
        let w = series.ln_weight(k, v).exp();
        let (a, e) = series.coefficient(k);
        err += w * e;
        Ok(if deficit { w * (1.0 - a) } else { w * a })
    })?;
    if s != 0.0 {
        let est = err / s.abs();
        if est > CANCELLATION_LIMIT {
            return Err(Error::Cancellation { estimate: est });
        }
    }
    Ok(s)
}

pub fn conformity_simrf(v: f64, d: usize, ctl: SeriesControl) -> Result<f64> {
    simrf_series(v, d, ctl, false)
}

/// `e^{v^2} - rho_SimRF` summed termwise.
pub fn simrf_conformity_deficit(v: f64, d: usize, ctl: SeriesControl) -> Result<f64> {
    simrf_series(v, d, ctl, true)
}

/// Coefficient of `v^2` in the small-`v` expansion of a coupled conformity.
pub fn conformity_slope(kind: CouplingKind, d: usize) -> Result<f64> {
    match kind {
        CouplingKind::Iid | CouplingKind::Orf => Ok(1.0),
        CouplingKind::SimRf => {
            check_d(d, 2)?;
            Ok(SimplexSeries::new(d).coefficient(1).0)
        }
        CouplingKind::SimRfPlus => Err(Error::Unsupported(
            "SimRF+ has no closed-form conformity".into(),
        )),
    }
}

/// Closed-form conformity of one block; SimRF+ is unsupported.
pub fn analytic_conformity(kind: CouplingKind, v: f64, d: usize, ctl: SeriesControl) -> Result<f64> {
    match kind {
        CouplingKind::Iid => {
            check_v(v)?;
            Ok(conformity_iid(v, d))
        }
        CouplingKind::Orf => conformity_orf(v, d, ctl),
        CouplingKind::SimRf => conformity_simrf(v, d, ctl),
        CouplingKind::SimRfPlus => Err(Error::Unsupported(
            "SimRF+ has no closed-form conformity".into(),
        )),
    }
}

/// `e^{v^2} - rho` for the given scheme.
pub fn conformity_deficit(kind: CouplingKind, v: f64, d: usize, ctl: SeriesControl) -> Result<f64> {
    match kind {
        CouplingKind::Iid => Ok(0.0),
        CouplingKind::Orf => orf_conformity_deficit(v, d, ctl),
        CouplingKind::SimRf => simrf_conformity_deficit(v, d, ctl),
        CouplingKind::SimRfPlus => Err(Error::Unsupported(
            "SimRF+ has no closed-form conformity".into(),
        )),
    }
}

/// Conformity for a fixed pairwise angle, by quadrature of each angular moment.
pub fn conformity_theta(v: f64, d: usize, cos_theta: f64, ctl: SeriesControl) -> Result<f64> {
    check_v(v)?;
    check_d(d, 2)?;
    if !(-1.0..=1.0).contains(&cos_theta) {
        return Err(Error::arg(format!("cos_theta must lie in [-1, 1], got {cos_theta}")));
    }
    let df = d as f64;
    let top = 1.0 + cos_theta.max(0.0);
    let quad = QuadSettings {
        abs_tol: 1e-13,
        rel_tol: 1e-13,
        ..QuadSettings::default()
    };
    let base = -(df - 1.0) * 2f64.ln() - ln_gamma(df / 2.0);
    let (s, _) = sum_series(ctl, |k| {
        if v == 0.0 && k > 0 {
            return Ok(0.0);
        }
        let moment = integrate(
            |phi| {
                let s = phi.sin();
                s.powi(d as i32 - 1) * ((1.0 + s * cos_theta) / top).powi(k as i32)
            },
            0.0,
            std::f64::consts::PI,
            quad,
        )?;
        if moment <= 0.0 {
            return Ok(0.0);
        }
        let kf = k as f64;
        let ln_t = base + k_ln(k, v * v / 2.0) + ln_gamma(kf + df)
            - ln_gamma(kf + 1.0)
            - ln_gamma(kf + df / 2.0)
            + k_ln(k, top)
            + moment.ln();
        Ok(ln_t.exp())
    })?;
    Ok(s)
}

/// Fixed-angle conformity as an exact power series in `cos theta`, for fast
/// repeated evaluation at one `(v, d)`.
#[derive(Debug, Clone)]
pub struct AngularConformity {
    coeffs: Vec<f64>,
}

impl AngularConformity {
    pub fn new(v: f64, d: usize, ctl: SeriesControl) -> Result<Self> {
        check_v(v)?;
        check_d(d, 2)?;
        let df = d as f64;
        let base = -(df - 1.0) * 2f64.ln() - ln_gamma(df / 2.0);
        // int_0^pi sin^n = sqrt(pi) Gamma((n+1)/2) / Gamma(n/2 + 1).
        let ln_moment = |n: f64| {
            0.5 * std::f64::consts::PI.ln() + ln_gamma((n + 1.0) / 2.0) - ln_gamma(n / 2.0 + 1.0)
        };
        let mut coeffs: Vec<f64> = Vec::new();
        sum_series(ctl, |k| {
            if v == 0.0 && k > 0 {
                return Ok(0.0);
            }
            let kf = k as f64;
            let ln_w = base + k_ln(k, v * v / 2.0) + ln_gamma(kf + df)
                - ln_gamma(kf + 1.0)
                - ln_gamma(kf + df / 2.0);
            if coeffs.len() <= k {
                coeffs.resize(k + 1, 0.0);
            }
            let mut total = 0.0;
            for j in 0..=k {
                let jf = j as f64;
                let ln_binom = ln_gamma(kf + 1.0) - ln_gamma(jf + 1.0) - ln_gamma(kf - jf + 1.0);
                let c = (ln_w + ln_binom + ln_moment(df - 1.0 + jf)).exp();
                coeffs[j] += c;
                total += c;
            }
            Ok(total)
        })?;
        Ok(Self { coeffs })
    }

    pub fn eval(&self, cos_theta: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * cos_theta + c)
    }
}

/// `Gamma(h) sum_k a^k / (k! Gamma(k+h))`, the rotation-averaged `e^{w.u v}`
/// for a pair with `a = v^2 |w_i + w_j|^2 / 4` and `h = d/2`.
fn pair_series(a: f64, h: f64, ctl: SeriesControl) -> Result<f64> {
    let mut t = 1.0;
    let (s, _) = sum_series(ctl, |k| {
        if k > 0 {
            let j = (k - 1) as f64;
            t *= a / ((j + 1.0) * (j + h));
        }
        Ok(t)
    })?;
    Ok(s)
}

/// The rotation-averaged pair term and its derivative with respect to
/// `|w_i + w_j|^2`.
pub(crate) fn pair_term_with_slope(
    w2: f64,
    v: f64,
    d: usize,
    ctl: SeriesControl,
) -> Result<(f64, f64)> {
    let h = d as f64 / 2.0;
    let a = v * v * w2 / 4.0;
    let f = pair_series(a, h, ctl)?;
    let df = pair_series(a, h + 1.0, ctl)? / h * v * v / 4.0;
    Ok((f, df))
}

fn check_vectors(vectors: &Matrix) -> Result<()> {
    if vectors.rows() < 2 {
        return Err(Error::arg("need at least two vectors"));
    }
    if vectors.cols() < 1 {
        return Err(Error::arg("vectors must have d >= 1"));
    }
    Ok(())
}

/// `|w_i + w_j|^2` for every unordered pair `i < j`, in row-major pair order.
pub fn pair_sum_sq_norms(vectors: &Matrix) -> Vec<f64> {
    let m = vectors.rows();
    let mut out = Vec::with_capacity(m * (m - 1) / 2);
    for i in 0..m {
        for j in i + 1..m {
            out.push(
                vectors
                    .row(i)
                    .iter()
                    .zip(vectors.row(j))
                    .map(|(a, b)| (a + b) * (a + b))
                    .sum(),
            );
        }
    }
    out
}

/// Conformity of a fixed configuration (rows of `vectors`), averaged over a
/// uniformly random common rotation.
pub fn conformity_empirical(vectors: &Matrix, v: f64, ctl: SeriesControl) -> Result<f64> {
    check_vectors(vectors)?;
    check_v(v)?;
    let (m, d) = (vectors.rows(), vectors.cols());
    let h = d as f64 / 2.0;
    let mut total = CompensatedSum::new();
    for w2 in pair_sum_sq_norms(vectors) {
        total.add(pair_series(v * v * w2 / 4.0, h, ctl)?);
    }
    Ok(2.0 * total.value() / (m * (m - 1)) as f64)
}

/// The leading (`v^2`) part of the configuration conformity.
pub fn truncated_conformity(vectors: &Matrix, v: f64) -> Result<f64> {
    check_vectors(vectors)?;
    let (m, d) = (vectors.rows() as f64, vectors.cols() as f64);
    let sum: f64 = pair_sum_sq_norms(vectors).iter().sum::<f64>() * 2.0;
    let ratio = (ln_gamma(d / 2.0) - ln_gamma(1.0 + d / 2.0)).exp();
    Ok(ratio * v * v / (4.0 * m * (m - 1.0)) * sum)
}

/// Mean squared error of the PRF estimator given conformity `rho`.
pub fn mse_prf(rho: f64, x_norm: f64, y_norm: f64, v: f64, m: usize) -> f64 {
    let m = m.max(1) as f64;
    let pre = (-2.0 * x_norm * x_norm - 2.0 * y_norm * y_norm).exp() / m;
    let ev = (v * v).exp();
    let var = ev * (v * v).exp_m1();
    pre * (var + (m - 1.0) * (rho - ev))
}

/// Ordered within-block pairs for `m` vectors stacked in blocks of `d`.
pub fn within_block_pairs(d: usize, m: usize) -> usize {
    let full = m / d;
    let rest = m % d;
    full * d * (d - 1) + rest * rest.saturating_sub(1)
}

/// Pair-weighted conformity of a stacked ensemble: within-block pairs carry
/// `rho_block`, cross-block pairs are independent and carry `e^{v^2}`.
pub fn stacked_conformity(rho_block: f64, v: f64, d: usize, m: usize) -> f64 {
    if m < 2 {
        return rho_block;
    }
    let total = (m * (m - 1)) as f64;
    let within = within_block_pairs(d, m) as f64;
    (within * rho_block + (total - within) * conformity_iid(v, d)) / total
}

/// Analytic PRF MSE for `m` vectors drawn from `kind` in `d` dimensions,
/// stacking independent blocks when `m > d`.
pub fn analytic_mse_prf(
    kind: CouplingKind,
    x_norm: f64,
    y_norm: f64,
    v: f64,
    d: usize,
    m: usize,
    ctl: SeriesControl,
) -> Result<f64> {
    check_v(v)?;
    if m < 1 {
        return Err(Error::arg("m must be >= 1"));
    }
    let deficit = conformity_deficit(kind, v, d, ctl)?;
    let within = within_block_pairs(d, m) as f64;
    let mf = m as f64;
    let pre = (-2.0 * x_norm * x_norm - 2.0 * y_norm * y_norm).exp() / mf;
    let var = (v * v).exp() * (v * v).exp_m1();
    Ok(pre * (var - within / mf * deficit))
}

/// `MSE_scheme / MSE_IID` for PRFs. At `v = 0` returns the small-`v` limit.
pub fn prf_mse_ratio(kind: CouplingKind, v: f64, d: usize, m: usize, ctl: SeriesControl) -> Result<f64> {
    check_v(v)?;
    let within = within_block_pairs(d, m) as f64 / m as f64;
    if v == 0.0 {
        let slope = conformity_slope(kind, d)?;
        return Ok(1.0 + within * (slope - 1.0));
    }
    let var = (v * v).exp() * (v * v).exp_m1();
    Ok(1.0 - within * conformity_deficit(kind, v, d, ctl)? / var)
}

pub fn simrf_small_v_prefactor(d: usize) -> Result<f64> {
    check_d(d, 2)?;
    let df = d as f64;
    let ln = 0.5 * std::f64::consts::PI.ln() + ln_gamma(df + 1.0) + ln_gamma(df / 2.0 + 0.5)
        - ln_gamma(df / 2.0)
        - 2.0 * ln_gamma(df / 2.0 + 1.0)
        - df * 2f64.ln();
    Ok(1.0 - ln.exp())
}

fn check_gap_m(d: usize, m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::arg(format!("orthogonality gap needs m >= 2, got {m}")));
    }
    if m > d {
        return Err(Error::arg(format!(
            "orthogonality gap needs m <= d, got m={m}, d={d}"
        )));
    }
    Ok(())
}

/// `MSE_IID - MSE_ORF` for PRFs with `m <= d`.
pub fn prf_orthogonality_gap(
    x_norm: f64,
    y_norm: f64,
    v: f64,
    d: usize,
    m: usize,
    ctl: SeriesControl,
) -> Result<f64> {
    check_gap_m(d, m)?;
    let mf = m as f64;
    Ok((-2.0 * x_norm * x_norm - 2.0 * y_norm * y_norm).exp() * (mf - 1.0) / mf
        * orf_conformity_deficit(v, d, ctl)?)
}

/// `e^{-z^2}` minus the ORF pair covariance term. Returns the value and its
/// estimated relative rounding error.
///
/// Two evaluations are tried: the termwise difference of the two power
/// series (exact leading cancellation, good at small `z`), and the Kummer
/// transform `1F1(d; d/2; -z^2/2) = e^{-z^2/2} 1F1(-d/2; d/2; z^2/2)` whose
/// terms stop alternating after `k > d/2` (good at large `z`). The one with
/// the smaller error estimate wins.
fn rff_gap_core(z: f64, d: usize, ctl: SeriesControl) -> Result<(f64, f64)> {
    if !(z >= 0.0) || !z.is_finite() {
        return Err(Error::arg(format!("z must be finite and >= 0, got {z}")));
    }
    check_d(d, 1)?;
    if z == 0.0 {
        return Ok((0.0, 0.0));
    }
    let hd = d as f64 / 2.0;

    let x = -z * z;
    let mut pow = 1.0;
    let mut c = 1.0;
    let (direct, abs) = sum_series(ctl, |k| {
        if k > 0 {
            let j = (k - 1) as f64;
            pow *= x / (j + 1.0);
            c *= (j + d as f64) / (2.0 * (j + hd));
        }
        Ok(if k < 2 { 0.0 } else { pow * (1.0 - c) })
    })?;
    let direct_est = 4.0 * f64::EPSILON * abs / direct.abs();

    let y = z * z / 2.0;
    let mut t = 1.0;
    let (kummer, kabs) = sum_series(ctl, |k| {
        if k > 0 {
            let j = (k - 1) as f64;
            t *= (j - hd) / ((j + hd) * (j + 1.0)) * y;
        }
        Ok(t)
    })?;
    let e2 = (-z * z).exp();
    let ey = (-y).exp();
    let kummer_core = e2 - ey * kummer;
    let kummer_est = 4.0 * f64::EPSILON * (e2 + ey * kabs) / kummer_core.abs();

    Ok(if direct_est <= kummer_est {
        (direct, direct_est)
    } else {
        (kummer_core, kummer_est)
    })
}

/// `MSE_IID - MSE_ORF` for RFFs with `m <= d`.
pub fn rff_orthogonality_gap(z: f64, d: usize, m: usize, ctl: SeriesControl) -> Result<f64> {
    check_gap_m(d, m)?;
    let (core, est) = rff_gap_core(z, d, ctl)?;
    if est > CANCELLATION_LIMIT {
        return Err(Error::Cancellation { estimate: est });
    }
    Ok((m as f64 - 1.0) / m as f64 * core)
}

pub fn mse_rff_iid(z: f64, m: usize) -> f64 {
    let a = -(-z * z).exp_m1();
    a * a / (2.0 * m.max(1) as f64)
}

/// Analytic RFF MSE for IID or ORF (stacked when `m > d`).
pub fn analytic_mse_rff(kind: CouplingKind, z: f64, d: usize, m: usize, ctl: SeriesControl) -> Result<f64> {
    if m < 1 {
        return Err(Error::arg("m must be >= 1"));
    }
    let iid = mse_rff_iid(z, m);
    match kind {
        CouplingKind::Iid => Ok(iid),
        CouplingKind::Orf => {
            let (core, est) = rff_gap_core(z, d, ctl)?;
            if est > CANCELLATION_LIMIT {
                return Err(Error::Cancellation { estimate: est });
            }
            let mf = m as f64;
            Ok(iid - within_block_pairs(d, m) as f64 / (mf * mf) * core)
        }
        _ => Err(Error::Unsupported(
            "RFF analytics cover IID and ORF couplings only".into(),
        )),
    }
}

/// Exact `MSE_ORF / MSE_IID` for RFFs with `m <= d`.
pub fn rff_exact_ratio(z: f64, d: usize, m: usize, ctl: SeriesControl) -> Result<f64> {
    if z == 0.0 {
        return Err(Error::arg("RFF ratio is undefined at z = 0"));
    }
    Ok(1.0 - rff_orthogonality_gap(z, d, m, ctl)? / mse_rff_iid(z, m))
}

/// Large-`d` approximation `1 - (m-1) e^{-z^2} z^4 / (d (1-e^{-z^2})^2)`.
pub fn rff_asymptotic_ratio(z: f64, d: usize, m: usize) -> Result<f64> {
    if !(z > 0.0) || !z.is_finite() {
        return Err(Error::arg(format!("asymptotic ratio needs z > 0, got {z}")));
    }
    check_d(d, 1)?;
    let a = -(-z * z).exp_m1();
    Ok(1.0 - (m as f64 - 1.0) * (-z * z).exp() * z.powi(4) / (d as f64 * a * a))
}

/// Density of `|w_i + w_j|` for independent Gaussian `w_i, w_j`.
pub fn pdf_wij_iid(w: f64, d: usize) -> Result<f64> {
    check_d(d, 1)?;
    if w < 0.0 {
        return Ok(0.0);
    }
    let df = d as f64;
    if w == 0.0 {
        return Ok(if d == 1 {
            (-ln_gamma(0.5)).exp()
        } else {
            0.0
        });
    }
    Ok(((df - 1.0) * w.ln() - w * w / 4.0 - (df - 1.0) * 2f64.ln() - ln_gamma(df / 2.0)).exp())
}

/// Density of `|w_i + w_j|` for independent chi norms and directions at a
/// fixed angle.
pub fn pdf_wij_theta(w: f64, d: usize, cos_theta: f64) -> Result<f64> {
    check_d(d, 2)?;
    if !(-1.0..=1.0).contains(&cos_theta) {
        return Err(Error::arg(format!("cos_theta must lie in [-1, 1], got {cos_theta}")));
    }
    if w <= 0.0 {
        return Ok(0.0);
    }
    let df = d as f64;
    let ln_pre = (2.0 * df - 1.0) * w.ln() - (df - 2.0) * 2f64.ln() - 2.0 * ln_gamma(df / 2.0);
    let integrand = |phi: f64| {
        let (s, c) = phi.sin_cos();
        let u = 1.0 + (2.0 * phi).sin() * cos_theta;
        let sc = s * c;
        if u <= 0.0 || sc <= 0.0 {
            return 0.0;
        }
        ((df - 1.0) * sc.ln() - w * w / (2.0 * u) - df * u.ln() + ln_pre).exp()
    };
    let quad = QuadSettings {
        abs_tol: 1e-14,
        rel_tol: 1e-11,
        ..QuadSettings::default()
    };
    integrate(integrand, 0.0, std::f64::consts::FRAC_PI_2, quad)
}

/// Upper integration limit past which both densities are negligible.
pub fn pdf_support_bound(d: usize) -> f64 {
    2.0 * ((d as f64).sqrt() + 12.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::simplex_matrix;
    use crate::rng::{chi_from, RngStream};
    use crate::stats::MeanSe;
    use rand_distr::{Distribution, StandardNormal};

    fn ctl() -> SeriesControl {
        SeriesControl::default()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    // Reference values computed with 50-digit arithmetic.
    #[test]
    fn high_precision_references() {
        let cases = [
            (2usize, 1.0, 2.473_081_906_050_192_2, 1.255_621_168_149_093),
            (6, 1.0, 2.579_561_821_449_575_5, 2.181_826_061_090_966),
            (64, 1.0, 2.698_345_057_802_934_6, 2.656_783_181_804_462_7),
            (8, 2.0, 33.145_194_500_917_49, 21.565_147_360_855_933),
        ];
        for (d, v, orf, sim) in cases {
            let o = conformity_orf(v, d, ctl()).unwrap();
            let s = conformity_simrf(v, d, ctl()).unwrap();
            assert!(rel(o, orf) < 1e-12, "orf d={d} v={v}: {o}");
            assert!(rel(s, sim) < 1e-11, "simrf d={d} v={v}: {s}");
        }
    }

    #[test]
    fn v_zero_gives_one() {
        for d in [2, 3, 8, 64, 1000] {
            assert_eq!(conformity_iid(0.0, d), 1.0);
            assert!((conformity_orf(0.0, d, ctl()).unwrap() - 1.0).abs() < 1e-14);
            assert!((conformity_simrf(0.0, d, ctl()).unwrap() - 1.0).abs() < 1e-12);
        }
        assert!((conformity_iid(1.0, 3) - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn ordering_grid() {
        for d in [2, 4, 8, 64] {
            for v in [0.25, 0.5, 1.0, 2.0, 4.0] {
                let s = conformity_simrf(v, d, ctl()).unwrap();
                let o = conformity_orf(v, d, ctl()).unwrap();
                assert!(s < o && o < conformity_iid(v, d), "d={d} v={v}");
            }
        }
    }

    #[test]
    fn large_dimension_is_finite() {
        let o = conformity_orf(1.0, 5000, ctl()).unwrap();
        let s = conformity_simrf(1.0, 5000, ctl()).unwrap();
        assert!(s < o && o < std::f64::consts::E);
    }

    #[test]
    fn theta_reduces_to_closed_forms() {
        let d = 8;
        let o = conformity_theta(1.0, d, 0.0, ctl()).unwrap();
        assert!(rel(o, conformity_orf(1.0, d, ctl()).unwrap()) < 1e-8);
        let s = conformity_theta(1.0, d, -1.0 / 7.0, ctl()).unwrap();
        assert!(rel(s, conformity_simrf(1.0, d, ctl()).unwrap()) < 1e-8);
        assert!(conformity_theta(1.0, d, 1.5, ctl()).is_err());
    }

    #[test]
    fn theta_monotone_and_series_agrees() {
        for d in [3, 6] {
            let series = AngularConformity::new(1.0, d, ctl()).unwrap();
            let mut prev = 0.0;
            for i in 0..=20 {
                let c = -1.0 + 0.1 * i as f64;
                let q = conformity_theta(1.0, d, c, ctl()).unwrap();
                assert!(q > prev);
                assert!(rel(series.eval(c), q) < 1e-10, "d={d} c={c}");
                prev = q;
            }
        }
    }

    #[test]
    fn empirical_special_configurations() {
        let anti = Matrix::from_rows(&[vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0]]).unwrap();
        assert_eq!(conformity_empirical(&anti, 1.0, ctl()).unwrap(), 1.0);
        assert_eq!(truncated_conformity(&anti, 1.0).unwrap(), 0.0);

        // Equal norms sqrt(d) on a simplex: every pair has w^2 = 2d(1 - 1/(d-1)).
        let d = 6;
        let mut s = simplex_matrix(d).unwrap();
        s.scale_rows(&vec![(d as f64).sqrt(); d]);
        let w2 = 2.0 * d as f64 * (1.0 - 1.0 / (d as f64 - 1.0));
        let mut direct = 0.0;
        for k in 0..60 {
            let kf = k as f64;
            direct += (ln_gamma(d as f64 / 2.0) + kf * (w2 / 4.0).ln() - ln_gamma(kf + 1.0)
                - ln_gamma(kf + d as f64 / 2.0))
            .exp();
        }
        let e = conformity_empirical(&s, 1.0, ctl()).unwrap();
        assert!(rel(e, direct) < 1e-13);
    }

    #[test]
    fn truncated_matches_brute_force() {
        let mut rng = RngStream::new(2).generator();
        let g = crate::rng::gaussian_matrix_from(3, 3, &mut rng);
        let mut brute = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                if i != j {
                    brute += (0..3).map(|c| (g.get(i, c) + g.get(j, c)).powi(2)).sum::<f64>();
                }
            }
        }
        let expect = 0.7f64.powi(2) / (2.0 * 3.0 * 6.0) * brute;
        assert!(rel(truncated_conformity(&g, 0.7).unwrap(), expect) < 1e-13);
    }

    #[test]
    fn iid_conformity_monte_carlo() {
        let v: f64 = 0.8;
        let mut rng = RngStream::new(12).generator();
        let xs: Vec<f64> = (0..200_000)
            .map(|_| {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                ((a + b) * v).exp()
            })
            .collect();
        assert!(MeanSe::of(&xs).within(conformity_iid(v, 4), 3.0));
    }

    #[test]
    fn orf_conformity_from_chi_2d() {
        let (d, v) = (6, 1.0);
        let w = chi_from(2 * d, 100_000, &mut RngStream::new(3).generator()).unwrap();
        let xs: Vec<f64> = w
            .iter()
            .map(|w| pair_series(v * v * w * w / 4.0, d as f64 / 2.0, ctl()).unwrap())
            .collect();
        let s = MeanSe::of(&xs);
        assert!(s.within(conformity_orf(v, d, ctl()).unwrap(), 3.0), "z={}", s.z_score(conformity_orf(v, d, ctl()).unwrap()));
    }

    fn simplex_draws(d: usize, v: f64, draws: usize, seed: u64) -> MeanSe {
        let mut rng = RngStream::new(seed).generator();
        let s = simplex_matrix(d).unwrap();
        let xs: Vec<f64> = (0..draws)
            .map(|_| {
                let mut b = s.clone();
                b.scale_rows(&chi_from(d, d, &mut rng).unwrap());
                conformity_empirical(&b, v, ctl()).unwrap()
            })
            .collect();
        MeanSe::of(&xs)
    }

    #[test]
    fn simrf_conformity_monte_carlo() {
        for (d, draws) in [(4, 100_000), (6, 50_000), (8, 30_000), (64, 1500)] {
            let target = conformity_simrf(1.0, d, ctl()).unwrap();
            let s = simplex_draws(d, 1.0, draws, d as u64);
            assert!(s.within(target, 3.0), "d={d} z={}", s.z_score(target));
        }
    }

    #[test]
    fn small_v_prefactor() {
        let p = simrf_small_v_prefactor(64).unwrap();
        assert!((p - 0.0078).abs() < 0.00005, "{p}");
        let two = simrf_small_v_prefactor(2).unwrap();
        assert!(two > 0.0 && two < 1.0);
        let ratio = prf_mse_ratio(CouplingKind::SimRf, 1e-3, 64, 64, ctl()).unwrap();
        assert!(rel(ratio, p) < 1e-3, "{ratio} vs {p}");
        let limit = prf_mse_ratio(CouplingKind::SimRf, 0.0, 64, 64, ctl()).unwrap();
        assert!(rel(limit, p) < 1e-10);
        assert_eq!(prf_mse_ratio(CouplingKind::Orf, 0.0, 64, 64, ctl()).unwrap(), 1.0);
    }

    #[test]
    fn simrf_slope_matches_finite_difference() {
        let d = 64;
        let v: f64 = 1e-3;
        let fd = (conformity_simrf(v, d, ctl()).unwrap() - 1.0) / (v * v);
        let slope = conformity_slope(CouplingKind::SimRf, d).unwrap();
        assert!(rel(fd, slope) < 1e-5, "{fd} vs {slope}");
    }

    #[test]
    fn mse_special_cases() {
        assert_eq!(mse_prf(1.0, 0.3, 0.4, 0.0, 8), 0.0);
        let (x, y, v, m) = (0.3, 0.4, 0.5, 8usize);
        let iid = mse_prf(conformity_iid(v, 8), x, y, v, m);
        let expect =
            (-2.0 * x * x - 2.0 * y * y as f64).exp() * ((2.0 * v * v).exp() - (v * v).exp()) / 8.0;
        assert!(rel(iid, expect) < 1e-13);
        let orf = mse_prf(conformity_orf(v, 8, ctl()).unwrap(), x, y, v, m);
        let gap = prf_orthogonality_gap(x, y, v, 8, m, ctl()).unwrap();
        assert!((iid - orf - gap).abs() < 1e-12);
        assert!(gap > 0.0);
        assert_eq!(prf_orthogonality_gap(x, y, 0.0, 8, 8, ctl()).unwrap(), 0.0);
        assert!(prf_orthogonality_gap(x, y, v, 8, 9, ctl()).is_err());
    }

    #[test]
    fn analytic_mse_consistent_with_conformity() {
        for kind in [CouplingKind::Iid, CouplingKind::Orf, CouplingKind::SimRf] {
            let rho = analytic_conformity(kind, 1.2, 8, ctl()).unwrap();
            let a = mse_prf(rho, 0.5, 0.7, 1.2, 8);
            let b = analytic_mse_prf(kind, 0.5, 0.7, 1.2, 8, 8, ctl()).unwrap();
            assert!(rel(a, b) < 1e-10, "{kind:?}");
            let stacked = stacked_conformity(rho, 1.2, 8, 20);
            let a = mse_prf(stacked, 0.5, 0.7, 1.2, 20);
            let b = analytic_mse_prf(kind, 0.5, 0.7, 1.2, 8, 20, ctl()).unwrap();
            assert!(rel(a, b) < 1e-10, "{kind:?} stacked");
        }
        assert_eq!(within_block_pairs(4, 10), 2 * 12 + 2);
    }

    #[test]
    fn rff_gap_properties() {
        assert_eq!(rff_orthogonality_gap(0.0, 8, 8, ctl()).unwrap(), 0.0);
        assert!(rff_orthogonality_gap(0.5, 64, 64, ctl()).unwrap() > 0.0);
        // The gap turns negative past some critical z.
        let signs: Vec<bool> = (1..60)
            .map(|i| rff_orthogonality_gap(0.1 * i as f64, 8, 8, ctl()).unwrap() > 0.0)
            .collect();
        assert!(signs[0] && signs.iter().any(|s| !s));
        assert!(rff_orthogonality_gap(1.0, 8, 9, ctl()).is_err());
        // Close to a root of the gap nothing can be resolved.
        let mut lo = 2.5;
        let mut hi = 3.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            match rff_orthogonality_gap(mid, 8, 8, ctl()) {
                Ok(g) if g > 0.0 => lo = mid,
                Ok(_) => hi = mid,
                Err(_) => break,
            }
        }
        assert!(matches!(
            rff_orthogonality_gap(0.5 * (lo + hi), 8, 8, ctl()),
            Err(Error::Cancellation { .. })
        ));
    }

    #[test]
    fn rff_gap_high_precision() {
        for (z, want) in [
            (0.5, 0.002_536_486_8),
            (2.0, 0.024_760_176),
            (3.0, -0.000_161_754_17),
            (4.0, -3.082_347e-6),
        ] {
            let g = rff_orthogonality_gap(z, 8, 8, ctl()).unwrap() * 8.0 / 7.0;
            assert!(rel(g, want) < 1e-7, "z={z}: {g}");
        }
    }

    #[test]
    fn rff_gap_against_direct_gamma_sum() {
        let (z, d): (f64, usize) = (1.0, 8);
        let df = d as f64;
        let mut s = 0.0;
        for k in 0..80 {
            let kf = k as f64;
            let mag = (ln_gamma(df / 2.0) - ln_gamma(df) + kf * (z * z / 2.0).ln()
                - ln_gamma(kf + 1.0)
                + ln_gamma(kf + df)
                - ln_gamma(kf + df / 2.0))
            .exp();
            s += if k % 2 == 0 { mag } else { -mag };
        }
        let direct = 7.0 / 8.0 * ((-z * z).exp() - s);
        let g = rff_orthogonality_gap(z, d, 8, ctl()).unwrap();
        assert!((g - direct).abs() < 1e-13, "{g} vs {direct}");
    }

    #[test]
    fn rff_asymptotics() {
        assert_eq!(rff_asymptotic_ratio(1.0, 16, 1).unwrap(), 1.0);
        assert!(rff_asymptotic_ratio(1.0, 16, 8).unwrap() < 1.0);
        assert!(rff_asymptotic_ratio(0.0, 16, 8).is_err());
        let exact = rff_exact_ratio(1.0, 1024, 64, ctl()).unwrap();
        let approx = rff_asymptotic_ratio(1.0, 1024, 64).unwrap();
        assert!((exact - approx).abs() < 1e-3, "{exact} vs {approx}");
    }

    #[test]
    fn densities_normalised() {
        let q = QuadSettings::default();
        for d in [2, 8, 64] {
            let total =
                integrate(|w| pdf_wij_iid(w, d).unwrap(), 0.0, pdf_support_bound(d), q).unwrap();
            assert!((total - 1.0).abs() < 1e-8, "d={d}: {total}");
        }
        assert_eq!(pdf_wij_iid(0.0, 4).unwrap(), 0.0);
        let d = 6;
        let c = -1.0 / (d as f64 - 1.0);
        let total = integrate(
            |w| pdf_wij_theta(w, d, c).unwrap(),
            0.0,
            pdf_support_bound(d),
            QuadSettings {
                abs_tol: 1e-9,
                ..q
            },
        )
        .unwrap();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn orthogonal_density_is_chi_2d() {
        let d = 4;
        for i in 1..40 {
            let w = 0.2 * i as f64;
            let chi = ((2.0 * d as f64 - 1.0) * w.ln() - w * w / 2.0
                - (d as f64 - 1.0) * 2f64.ln()
                - ln_gamma(d as f64))
            .exp();
            assert!((pdf_wij_theta(w, d, 0.0).unwrap() - chi).abs() < 1e-8);
        }
    }
}
