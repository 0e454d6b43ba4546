//! Numerical minimisation of the configuration conformity over direction
//! sets, and per-draw comparison of all coupling schemes.
//!
//! Directions are parametrised in hyperspherical coordinates with the first
//! vector pinned to `e_1` (the objective is rotation invariant), leaving
//! `(d-1)^2` free angles. The local method is BFGS with an Armijo
//! backtracking line search on the analytic gradient.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytics::{
    conformity_empirical, conformity_iid, conformity_orf, conformity_simrf, pair_term_with_slope,
    truncated_conformity, ConformityReport, SeriesControl,
};
use crate::blocks::{
    block_norms, build_block, simplex_plus_directions, CouplingScheme, SimplexPlusSettings,
};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, simplex_matrix, Matrix};
use crate::rng::{unit_vector_from, RngStream};
use crate::stats::MeanSe;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub restarts: usize,
    pub max_iters: usize,
    pub gradient_tol: f64,
    /// Sufficient-decrease constant of the Armijo test.
    pub armijo: f64,
    /// Step shrink factor while backtracking.
    pub backtrack: f64,
    pub series: SeriesControl,
    /// Start restarts 0 and 1 at the simplex and the SimRF+ fixed point.
    /// When false every restart is random.
    pub structured_starts: bool,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            restarts: 4,
            max_iters: 2000,
            gradient_tol: 1e-7,
            armijo: 1e-4,
            backtrack: 0.5,
            series: SeriesControl::default(),
            structured_starts: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizedDirections {
    /// Unit directions, one per row, with the first along `e_1`.
    pub directions: Matrix,
    pub rho: f64,
    /// Index of the winning restart (0 = simplex start, 1 = SimRF+ start).
    pub restart: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Set when no restart met the gradient tolerance.
    pub warning: bool,
}

/// Hyperspherical unit vector and its Jacobian (`d x (d-1)`, row-major).
fn sphere_point(angles: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = angles.len();
    let d = n + 1;
    let (sin, cos): (Vec<f64>, Vec<f64>) = angles.iter().map(|a| a.sin_cos()).unzip();
    let mut u = vec![0.0; d];
    let mut jac = vec![0.0; d * n];
    for k in 0..d {
        // u_k = sin_0 ... sin_{k-1} * (cos_k, or 1 for the last coordinate)
        let last = if k < n { cos[k] } else { 1.0 };
        let prefix: f64 = sin[..k].iter().product();
        u[k] = prefix * last;
        for a in 0..n.min(k + 1) {
            let dv = if a < k {
                let others: f64 = (0..k).filter(|&l| l != a).map(|l| sin[l]).product();
                others * cos[a] * last
            } else {
                -prefix * sin[k]
            };
            jac[k * n + a] = dv;
        }
    }
    (u, jac)
}

/// Angles of a unit vector (inverse of [`sphere_point`]).
fn sphere_angles(u: &[f64]) -> Vec<f64> {
    let d = u.len();
    let mut out = Vec::with_capacity(d - 1);
    for k in 0..d - 1 {
        if k == d - 2 {
            out.push(u[d - 1].atan2(u[d - 2]));
        } else {
            let tail = norm(&u[k + 1..]);
            out.push(tail.atan2(u[k]));
        }
    }
    out
}

/// Householder reflection taking `u` to `e_1`, applied to every row.
fn align_first(directions: &Matrix) -> Matrix {
    let d = directions.cols();
    let u = directions.row(0);
    let mut h = u.to_vec();
    h[0] -= 1.0;
    let hn = dot(&h, &h);
    if hn < 1e-28 {
        return directions.clone();
    }
    let mut out = directions.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let c = 2.0 * dot(row, &h) / hn;
        for j in 0..d {
            row[j] -= c * h[j];
        }
    }
    out
}

struct Objective<'a> {
    norms: &'a [f64],
    v: f64,
    ctl: SeriesControl,
}

impl Objective<'_> {
    fn d(&self) -> usize {
        self.norms.len()
    }

    fn directions(&self, params: &[f64]) -> (Matrix, Vec<Vec<f64>>) {
        let d = self.d();
        let n = d - 1;
        let mut dirs = Matrix::zeros(d, d);
        dirs.set(0, 0, 1.0);
        let mut jacs = vec![Vec::new(); d];
        for i in 1..d {
            let (u, jac) = sphere_point(&params[(i - 1) * n..i * n]);
            dirs.row_mut(i).copy_from_slice(&u);
            jacs[i] = jac;
        }
        (dirs, jacs)
    }

    fn value_and_grad(&self, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let d = self.d();
        let n = d - 1;
        let (dirs, jacs) = self.directions(params);
        let scale = 2.0 / (d * (d - 1)) as f64;
        let mut value = 0.0;
        let mut du = vec![vec![0.0; d]; d];
        for i in 0..d {
            for j in i + 1..d {
                let (ni, nj) = (self.norms[i], self.norms[j]);
                let c = dot(dirs.row(i), dirs.row(j));
                let s = ni * ni + nj * nj + 2.0 * ni * nj * c;
                let (f, fp) = pair_term_with_slope(s.max(0.0), self.v, d, self.ctl)?;
                value += scale * f;
                let g = scale * fp * 2.0 * ni * nj;
                for k in 0..d {
                    du[i][k] += g * dirs.get(j, k);
                    du[j][k] += g * dirs.get(i, k);
                }
            }
        }
        let mut grad = vec![0.0; n * n];
        for i in 1..d {
            for a in 0..n {
                grad[(i - 1) * n + a] = (0..d).map(|k| du[i][k] * jacs[i][k * n + a]).sum();
            }
        }
        Ok((value, grad))
    }

    fn params_from(&self, directions: &Matrix) -> Vec<f64> {
        let aligned = align_first(directions);
        (1..self.d())
            .flat_map(|i| sphere_angles(aligned.row(i)))
            .collect()
    }
}

struct LocalResult {
    params: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
}

fn bfgs(obj: &Objective, start: Vec<f64>, settings: &OptimizerSettings) -> Result<LocalResult> {
    let n = start.len();
    let mut x = start;
    let (mut f, mut g) = obj.value_and_grad(&x)?;
    let mut h = identity(n);
    let inf_norm = |g: &[f64]| g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for it in 0..settings.max_iters {
        if inf_norm(&g) < settings.gradient_tol {
            return Ok(LocalResult {
                params: x,
                value: f,
                iterations: it,
                converged: true,
            });
        }
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i * n..(i + 1) * n], &g)).collect();
        let mut slope = dot(&p, &g);
        if slope >= 0.0 {
            h = identity(n);
            p = g.iter().map(|v| -v).collect();
            slope = dot(&p, &g);
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + t * b).collect();
            let (ft, gt) = obj.value_and_grad(&trial)?;
            if ft <= f + settings.armijo * t * slope {
                accepted = Some((trial, ft, gt));
                break;
            }
            t *= settings.backtrack;
        }
        let Some((xn, fnew, gn)) = accepted else {
            // No decrease along a descent direction: at numerical precision.
            return Ok(LocalResult {
                params: x,
                value: f,
                iterations: it,
                converged: inf_norm(&g) < settings.gradient_tol.sqrt(),
            });
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-14 {
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i * n..(i + 1) * n], &y)).collect();
            let yhy = dot(&y, &hy);
            let rho = 1.0 / sy;
            for i in 0..n {
                for j in 0..n {
                    h[i * n + j] += (1.0 + yhy * rho) * rho * s[i] * s[j]
                        - rho * (hy[i] * s[j] + s[i] * hy[j]);
                }
            }
        }
        x = xn;
        f = fnew;
        g = gn;
    }
    Ok(LocalResult {
        params: x,
        value: f,
        iterations: settings.max_iters,
        converged: inf_norm(&g) < settings.gradient_tol,
    })
}

fn identity(n: usize) -> Vec<f64> {
    let mut h = vec![0.0; n * n];
    for i in 0..n {
        h[i * n + i] = 1.0;
    }
    h
}

/// Locally minimise the configuration conformity for fixed `norms`.
///
/// Restart 0 starts at the simplex, restart 1 at the SimRF+ fixed point and
/// the rest at random directions from `stream` (all of them random when
/// `structured_starts` is off). The best restart wins, ties going to the
/// lower index.
pub fn optimize_directions(
    norms: &[f64],
    v: f64,
    settings: &OptimizerSettings,
    stream: &RngStream,
) -> Result<OptimizedDirections> {
    let d = norms.len();
    if d < 2 {
        return Err(Error::arg("optimisation needs d >= 2"));
    }
    if settings.restarts == 0 {
        return Err(Error::arg("optimiser needs at least one restart"));
    }
    if !(v >= 0.0) {
        return Err(Error::arg("v must be >= 0"));
    }
    if norms.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
        return Err(Error::arg("norms must be positive and finite"));
    }
    let obj = Objective {
        norms,
        v,
        ctl: settings.series,
    };
    let simplex = simplex_matrix(d)?;
    let plus = simplex_plus_directions(norms, None, SimplexPlusSettings::default())?.directions;
    let starts: Vec<Matrix> = (0..settings.restarts)
        .map(|r| match r {
            0 if settings.structured_starts => simplex.clone(),
            1 if settings.structured_starts => plus.clone(),
            _ => {
                let mut rng = stream.trial(r as u64).generator();
                let rows: Vec<Vec<f64>> = (0..d).map(|_| unit_vector_from(d, &mut rng)).collect();
                Matrix::from_rows(&rows).expect("square")
            }
        })
        .collect();

    let results: Vec<Result<LocalResult>> = starts
        .par_iter()
        .map(|s| bfgs(&obj, obj.params_from(s), settings))
        .collect();
    let mut best: Option<(usize, LocalResult)> = None;
    let mut any_converged = false;
    for (r, res) in results.into_iter().enumerate() {
        let res = res?;
        any_converged |= res.converged;
        if best.as_ref().is_none_or(|(_, b)| res.value < b.value) {
            best = Some((r, res));
        }
    }
    let (restart, res) = best.expect("at least one restart");
    let (directions, _) = obj.directions(&res.params);
    Ok(OptimizedDirections {
        directions,
        rho: res.value,
        restart,
        iterations: res.iterations,
        converged: res.converged,
        warning: !any_converged,
    })
}

/// Number of random direction sets averaged for the IID row.
pub const IID_COUPLINGS: usize = 100;

/// Draw the block norms from `stream` exactly as a coupled block would and
/// optimise directions for them.
pub fn optimize_block(
    d: usize,
    v: f64,
    settings: &OptimizerSettings,
    stream: &RngStream,
) -> Result<(Vec<f64>, OptimizedDirections)> {
    let norms = block_norms(d, stream)?;
    let opt = optimize_directions(&norms, v, settings, &stream.derive(0x0b7))?;
    Ok((norms, opt))
}

/// Conformity of every scheme for one draw of `d` norms (shared by all).
pub fn conformity_comparison(
    d: usize,
    v: f64,
    stream: &RngStream,
    include_numerical: bool,
    settings: &OptimizerSettings,
) -> Result<Vec<ConformityReport>> {
    if d < 2 {
        return Err(Error::arg("conformity comparison needs d >= 2"));
    }
    let ctl = settings.series;
    let norms = block_norms(d, stream)?;
    let report = |scheme: &str, analytic: Option<f64>, w: &Matrix, sd: Option<f64>, emp: f64| {
        Ok::<_, Error>(ConformityReport {
            scheme: scheme.to_string(),
            analytic,
            empirical: emp,
            empirical_sd: sd,
            truncated: Some(truncated_conformity(w, v)?),
            v,
            d,
            m: d,
            seed: stream.seed,
        })
    };
    let mut out = Vec::new();

    let mut rng = stream.derive(0x11d).generator();
    let draws: Vec<(f64, f64)> = (0..IID_COUPLINGS)
        .map(|_| {
            let rows: Vec<Vec<f64>> = norms
                .iter()
                .map(|w| unit_vector_from(d, &mut rng).iter().map(|u| u * w).collect())
                .collect();
            let w = Matrix::from_rows(&rows).expect("square");
            Ok((conformity_empirical(&w, v, ctl)?, truncated_conformity(&w, v)?))
        })
        .collect::<Result<_>>()?;
    let rho: Vec<f64> = draws.iter().map(|p| p.0).collect();
    let trunc: Vec<f64> = draws.iter().map(|p| p.1).collect();
    let stats = MeanSe::of(&rho);
    out.push(ConformityReport {
        scheme: "iid".into(),
        analytic: Some(conformity_iid(v, d)),
        empirical: stats.mean,
        empirical_sd: Some(stats.sd),
        truncated: Some(MeanSe::of(&trunc).mean),
        v,
        d,
        m: d,
        seed: stream.seed,
    });

    for (scheme, analytic) in [
        (CouplingScheme::ORF, Some(conformity_orf(v, d, ctl)?)),
        (CouplingScheme::SIMRF, Some(conformity_simrf(v, d, ctl)?)),
        (CouplingScheme::SIMRF_PLUS, None),
    ] {
        let w = build_block(scheme, d, stream)?;
        let emp = conformity_empirical(&w, v, ctl)?;
        out.push(report(&scheme.to_string(), analytic, &w, None, emp)?);
    }

    if include_numerical {
        let (_, opt) = optimize_block(d, v, settings, stream)?;
        let mut w = opt.directions.clone();
        w.scale_rows(&norms);
        out.push(report("numerical", None, &w, None, opt.rho)?);
    }
    Ok(out)
}
