//! Adaptive Gauss–Kronrod (7/15) quadrature and tabulated CDFs.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// `int_a^b f` by global adaptive bisection.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, settings: QuadSettings) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature("infinite limits".into()));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut parts = vec![{
        let (v, e) = kronrod(&f, a, b);
        (a, b, v, e)
    }];
    loop {
        let total: f64 = parts.iter().map(|p| p.2).sum();
        let err: f64 = parts.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature("integrand is not finite".into()));
        }
        if err <= settings.abs_tol.max(settings.rel_tol * total.abs()) {
            return Ok(total);
        }
        if parts.len() >= settings.max_intervals {
            return Err(Error::Quadrature(format!(
                "error estimate {err:e} after {} intervals",
                parts.len()
            )));
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        for (l, h) in [(lo, mid), (mid, hi)] {
            let (v, e) = kronrod(&f, l, h);
            parts.push((l, h, v, e));
        }
    }
}

/// CDF of a density on `[0, upper]`, tabulated on equal panels and linearly
/// interpolated. Values past `upper` are 1.
#[derive(Debug, Clone)]
pub struct TabulatedCdf {
    upper: f64,
    values: Vec<f64>,
}

impl TabulatedCdf {
    pub fn new<F: Fn(f64) -> f64>(pdf: F, upper: f64, panels: usize) -> Result<Self> {
        if panels == 0 || upper <= 0.0 {
            return Err(Error::arg("tabulated CDF needs a positive range"));
        }
        let h = upper / panels as f64;
        let mut values = Vec::with_capacity(panels + 1);
        let mut acc = 0.0;
        values.push(0.0);
        for i in 0..panels {
            let (lo, hi) = (i as f64 * h, (i + 1) as f64 * h);
            acc += integrate(&pdf, lo, hi, QuadSettings {
                abs_tol: 1e-13,
                ..QuadSettings::default()
            })?;
            values.push(acc);
        }
        Ok(Self { upper, values })
    }

    /// Mass on `[0, upper]`; should be close to 1.
    pub fn total(&self) -> f64 {
        *self.values.last().expect("nonempty")
    }

    pub fn cdf(&self, w: f64) -> f64 {
        if w <= 0.0 {
            return 0.0;
        }
        if w >= self.upper {
            return 1.0;
        }
        let n = self.values.len() - 1;
        let t = w / self.upper * n as f64;
        let i = (t.floor() as usize).min(n - 1);
        let frac = t - i as f64;
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}
