//! Coupled random-projection ensembles.
//!
//! Every block draws its `d` row norms from a chi distribution first (one
//! sub-stream) and its directions from another, so all schemes built from the
//! same [`RngStream`] share their norms exactly. ORF, SimRF and SimRF+ also
//! share the Haar rotation, which makes scheme comparisons paired.
//!
//! | scheme | block |
//! |--------|-------|
//! | IID | `D G`, rows of `G` i.i.d. uniform directions |
//! | ORF | `D R` |
//! | SimRF | `D S R` |
//! | SimRF+ | `D S' R`, `S'` from the weighted anti-alignment sweep |
//!
//! With an HD-product rotation `R` is replaced by `H D_1 H D_2 ... H D_k`,
//! the working dimension is padded to a power of two and projections never
//! form the rotation explicitly.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    dot, haar_orthogonal_from, is_power_of_two, norm, simplex_apply_in_place, simplex_matrix,
    HdProduct, Matrix,
};
use crate::rng::{chi_from, unit_vector_from, RngStream};

const NORMS: u64 = 1;
const HAAR: u64 = 2;
const IID_DIRECTIONS: u64 = 3;
const HD_SIGNS: u64 = 4;
const BLOCK: u64 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CouplingKind {
    Iid,
    Orf,
    SimRf,
    SimRfPlus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rotation {
    HaarExact,
    HdProduct { k: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CouplingScheme {
    pub kind: CouplingKind,
    pub rotation: Rotation,
}

impl CouplingScheme {
    pub const IID: Self = Self::exact(CouplingKind::Iid);
    pub const ORF: Self = Self::exact(CouplingKind::Orf);
    pub const SIMRF: Self = Self::exact(CouplingKind::SimRf);
    pub const SIMRF_PLUS: Self = Self::exact(CouplingKind::SimRfPlus);

    pub const fn exact(kind: CouplingKind) -> Self {
        Self {
            kind,
            rotation: Rotation::HaarExact,
        }
    }

    pub const fn fast(kind: CouplingKind, k: usize) -> Self {
        Self {
            kind,
            rotation: Rotation::HdProduct { k },
        }
    }

    /// Fast SimRF+ still pays for the dense `O(d^3)` direction optimisation.
    pub fn optimisation_dominates(&self) -> bool {
        self.kind == CouplingKind::SimRfPlus && matches!(self.rotation, Rotation::HdProduct { .. })
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for CouplingScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let base = match self.kind {
            CouplingKind::Iid => "iid",
            CouplingKind::Orf => "orf",
            CouplingKind::SimRf => "simrf",
            CouplingKind::SimRfPlus => "simrf+",
        };
        match self.rotation {
            Rotation::HaarExact => write!(f, "{base}"),
            Rotation::HdProduct { k } => write!(f, "{base}-hd{k}"),
        }
    }
}

impl FromStr for CouplingScheme {
    type Err = Error;

    /// Accepts `iid`, `orf`, `simrf`, `simrf+` with an optional `-fast`
    /// (HD-product, k = 3) or `-hd<k>` suffix.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        let (base, rotation) = if let Some(b) = s.strip_suffix("-fast") {
            (b, Rotation::HdProduct { k: 3 })
        } else if let Some(pos) = s.rfind("-hd") {
            let k = s[pos + 3..]
                .parse::<usize>()
                .map_err(|_| Error::arg(format!("bad HD-product depth in '{s}'")))?;
            (&s[..pos], Rotation::HdProduct { k })
        } else {
            (s.as_str(), Rotation::HaarExact)
        };
        let kind = match base {
            "iid" => CouplingKind::Iid,
            "orf" => CouplingKind::Orf,
            "simrf" => CouplingKind::SimRf,
            "simrf+" | "simrfplus" | "simrf-plus" => CouplingKind::SimRfPlus,
            other => return Err(Error::arg(format!("unknown coupling scheme '{other}'"))),
        };
        if let Rotation::HdProduct { k: 0 } = rotation {
            return Err(Error::arg("HD-product depth must be at least 1"));
        }
        Ok(Self { kind, rotation })
    }
}

/// Stopping rule for the SimRF+ sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexPlusSettings {
    pub max_passes: usize,
    /// Largest allowed angle (radians) between a direction and its target.
    pub tol: f64,
}

impl Default for SimplexPlusSettings {
    fn default() -> Self {
        Self {
            max_passes: 10,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPlusOutcome {
    /// One unit direction per row.
    pub directions: Matrix,
    pub passes: usize,
    pub residual: f64,
    pub converged: bool,
}

fn angle_between_units(a: &[f64], b: &[f64]) -> f64 {
    let chord = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt();
    2.0 * (chord / 2.0).min(1.0).asin()
}

/// Largest angle between each direction and the anti-resultant of the others.
pub fn anti_alignment_residual(norms: &[f64], directions: &Matrix) -> f64 {
    let d = directions.cols();
    let scale: f64 = norms.iter().sum();
    let mut total = vec![0.0; d];
    for (i, &w) in norms.iter().enumerate() {
        total
            .iter_mut()
            .zip(directions.row(i))
            .for_each(|(t, u)| *t += w * u);
    }
    let mut worst: f64 = 0.0;
    for (i, &w) in norms.iter().enumerate() {
        let r: Vec<f64> = total
            .iter()
            .zip(directions.row(i))
            .map(|(t, u)| t - w * u)
            .collect();
        let rn = norm(&r);
        if rn <= 1e-12 * scale {
            continue;
        }
        let target: Vec<f64> = r.iter().map(|x| -x / rn).collect();
        worst = worst.max(angle_between_units(directions.row(i), &target));
    }
    worst
}

/// Gauss–Seidel sweeps `u_i <- -r_i / |r_i|` with `r_i = sum_{j != i} w_j u_j`.
///
/// Starts from the simplex rows when `init` is `None`. A vanishing resultant
/// leaves that direction untouched for the sweep.
pub fn simplex_plus_directions(
    norms: &[f64],
    init: Option<&Matrix>,
    settings: SimplexPlusSettings,
) -> Result<SimplexPlusOutcome> {
    let d = norms.len();
    if d < 2 {
        return Err(Error::arg("SimRF+ needs at least two vectors"));
    }
    if norms.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::arg("SimRF+ norms must be finite and non-negative"));
    }
    let scale: f64 = norms.iter().sum();
    if scale == 0.0 {
        return Err(Error::arg("SimRF+ norms are all zero"));
    }
    let mut dirs = match init {
        Some(m) => {
            if m.rows() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: m.rows(),
                });
            }
            for row in m.row_iter() {
                if (norm(row) - 1.0).abs() > 1e-8 {
                    return Err(Error::arg("SimRF+ initial directions must be unit vectors"));
                }
            }
            m.clone()
        }
        None => simplex_matrix(d)?,
    };
    let dim = dirs.cols();

    let mut residual = anti_alignment_residual(norms, &dirs);
    let mut passes = 0;
    while residual > settings.tol && passes < settings.max_passes {
        let mut total = vec![0.0; dim];
        for (i, &w) in norms.iter().enumerate() {
            total.iter_mut().zip(dirs.row(i)).for_each(|(t, u)| *t += w * u);
        }
        for (i, &w) in norms.iter().enumerate() {
            let r: Vec<f64> = total
                .iter()
                .zip(dirs.row(i))
                .map(|(t, u)| t - w * u)
                .collect();
            let rn = norm(&r);
            if rn <= 1e-12 * scale {
                continue;
            }
            let row = dirs.row_mut(i);
            for ((u, t), ri) in row.iter_mut().zip(total.iter_mut()).zip(&r) {
                let new = -ri / rn;
                *t += w * (new - *u);
                *u = new;
            }
        }
        passes += 1;
        residual = anti_alignment_residual(norms, &dirs);
    }
    Ok(SimplexPlusOutcome {
        directions: dirs,
        passes,
        residual,
        converged: residual <= settings.tol,
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Directions {
    Orthogonal,
    Simplex,
    Custom(Matrix),
}

/// One `dim x dim` block, possibly row-truncated.
#[derive(Debug, Clone, PartialEq)]
enum Block {
    Dense(Matrix),
    Structured {
        norms: Vec<f64>,
        hd: HdProduct,
        directions: Directions,
        rows: usize,
    },
}

impl Block {
    fn rows(&self) -> usize {
        match self {
            Block::Dense(m) => m.rows(),
            Block::Structured { rows, .. } => *rows,
        }
    }

    fn project_into(&self, x: &[f64], out: &mut Vec<f64>) {
        match self {
            Block::Dense(m) => out.extend(m.row_iter().map(|r| dot(r, x))),
            Block::Structured {
                norms,
                hd,
                directions,
                rows,
            } => {
                let mut y = x.to_vec();
                hd.apply_in_place(&mut y).expect("padded length");
                let y = match directions {
                    Directions::Orthogonal => y,
                    Directions::Simplex => {
                        simplex_apply_in_place(&mut y).expect("dim >= 2");
                        y
                    }
                    Directions::Custom(s) => s.matvec(&y).expect("square"),
                };
                out.extend(y.iter().zip(norms).take(*rows).map(|(v, w)| v * w));
            }
        }
    }

    fn to_dense(&self) -> Matrix {
        match self {
            Block::Dense(m) => m.clone(),
            Block::Structured {
                norms,
                hd,
                directions,
                rows,
            } => {
                let r = hd.to_dense();
                let mut w = match directions {
                    Directions::Orthogonal => r,
                    Directions::Simplex => {
                        simplex_matrix(hd.dim()).expect("dim >= 2").matmul(&r).expect("square")
                    }
                    Directions::Custom(s) => s.matmul(&r).expect("square"),
                };
                w.scale_rows(norms);
                w.truncate_rows(*rows);
                w
            }
        }
    }
}

/// The `d` chi-distributed row norms every scheme draws from `stream`.
pub fn block_norms(d: usize, stream: &RngStream) -> Result<Vec<f64>> {
    chi_from(d, d, &mut stream.derive(NORMS).generator())
}

fn check_dim(kind: CouplingKind, d: usize) -> Result<()> {
    let min = match kind {
        CouplingKind::SimRf | CouplingKind::SimRfPlus => 2,
        _ => 1,
    };
    if d < min {
        return Err(Error::arg(format!(
            "{kind:?} blocks need d >= {min}, got {d}"
        )));
    }
    Ok(())
}

fn build_block_parts(
    scheme: CouplingScheme,
    d: usize,
    stream: &RngStream,
    plus: SimplexPlusSettings,
) -> Result<Block> {
    check_dim(scheme.kind, d)?;
    let norms = block_norms(d, stream)?;

    if scheme.kind == CouplingKind::Iid {
        let mut rng = stream.derive(IID_DIRECTIONS).generator();
        let mut m = Matrix::zeros(d, d);
        for (i, &w) in norms.iter().enumerate() {
            let u = unit_vector_from(d, &mut rng);
            m.row_mut(i).iter_mut().zip(&u).for_each(|(x, v)| *x = w * v);
        }
        return Ok(Block::Dense(m));
    }

    let directions = match scheme.kind {
        CouplingKind::Orf => Directions::Orthogonal,
        CouplingKind::SimRf => Directions::Simplex,
        CouplingKind::SimRfPlus => {
            Directions::Custom(simplex_plus_directions(&norms, None, plus)?.directions)
        }
        CouplingKind::Iid => unreachable!(),
    };

    match scheme.rotation {
        Rotation::HaarExact => {
            let r = haar_orthogonal_from(d, &mut stream.derive(HAAR).generator())?;
            let mut w = match &directions {
                Directions::Orthogonal => r,
                Directions::Simplex => simplex_matrix(d)?.matmul(&r)?,
                Directions::Custom(s) => s.matmul(&r)?,
            };
            w.scale_rows(&norms);
            Ok(Block::Dense(w))
        }
        Rotation::HdProduct { k } => {
            if !is_power_of_two(d) {
                return Err(Error::arg(format!(
                    "HD-product blocks need a power-of-two dimension, got {d}"
                )));
            }
            if k == 0 {
                return Err(Error::arg("HD-product depth must be at least 1"));
            }
            let hd = HdProduct::sample(d, k, &stream.derive(HD_SIGNS))?;
            Ok(Block::Structured {
                norms,
                hd,
                directions,
                rows: d,
            })
        }
    }
}

/// A single `d x d` block of `scheme`, materialised densely.
pub fn build_block(scheme: CouplingScheme, d: usize, stream: &RngStream) -> Result<Matrix> {
    Ok(build_block_parts(scheme, d, stream, SimplexPlusSettings::default())?.to_dense())
}

/// `m` projection vectors in `R^d` organised as independent blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionEnsemble {
    d: usize,
    m: usize,
    padded_dim: usize,
    scheme: CouplingScheme,
    stream: RngStream,
    blocks: Vec<Block>,
}

pub fn build_ensemble(
    scheme: CouplingScheme,
    d: usize,
    m: usize,
    stream: &RngStream,
) -> Result<ProjectionEnsemble> {
    build_ensemble_with(scheme, d, m, stream, SimplexPlusSettings::default())
}

pub fn build_ensemble_with(
    scheme: CouplingScheme,
    d: usize,
    m: usize,
    stream: &RngStream,
    plus: SimplexPlusSettings,
) -> Result<ProjectionEnsemble> {
    if d < 1 {
        return Err(Error::arg("ensemble needs d >= 1"));
    }
    if m < 1 {
        return Err(Error::arg("ensemble needs m >= 1"));
    }
    check_dim(scheme.kind, d)?;
    let padded_dim = match scheme.rotation {
        Rotation::HaarExact => d,
        Rotation::HdProduct { .. } => d.next_power_of_two().max(2),
    };
    let n_blocks = m.div_ceil(padded_dim);
    let mut blocks = Vec::with_capacity(n_blocks);
    for b in 0..n_blocks {
        let mut block =
            build_block_parts(scheme, padded_dim, &stream.derive(BLOCK + b as u64), plus)?;
        let keep = (m - b * padded_dim).min(padded_dim);
        match &mut block {
            Block::Dense(w) => w.truncate_rows(keep),
            Block::Structured { rows, .. } => *rows = keep,
        }
        blocks.push(block);
    }
    Ok(ProjectionEnsemble {
        d,
        m,
        padded_dim,
        scheme,
        stream: *stream,
        blocks,
    })
}

impl ProjectionEnsemble {
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn padded_dim(&self) -> usize {
        self.padded_dim
    }

    pub fn scheme(&self) -> CouplingScheme {
        self.scheme
    }

    pub fn stream(&self) -> RngStream {
        self.stream
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    /// Rows per block (the last one may be truncated).
    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Block::rows).collect()
    }

    /// Each block as an explicit `rows x padded_dim` matrix.
    pub fn dense_blocks(&self) -> Vec<Matrix> {
        self.blocks.iter().map(Block::to_dense).collect()
    }

    /// All `m` projection vectors stacked as an `m x padded_dim` matrix.
    pub fn to_dense(&self) -> Matrix {
        let rows: Vec<Vec<f64>> = self
            .dense_blocks()
            .iter()
            .flat_map(|b| b.row_iter().map(<[f64]>::to_vec).collect::<Vec<_>>())
            .collect();
        Matrix::from_rows(&rows).expect("consistent block widths")
    }

    /// `W x`. Accepts `x` of length `d` or already padded to `padded_dim`.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        let padded;
        let x = if x.len() == self.padded_dim {
            x
        } else if x.len() == self.d {
            padded = {
                let mut p = x.to_vec();
                p.resize(self.padded_dim, 0.0);
                p
            };
            &padded
        } else {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        };
        let mut out = Vec::with_capacity(self.m);
        for block in &self.blocks {
            block.project_into(x, &mut out);
        }
        Ok(out)
    }
}

pub fn project(ensemble: &ProjectionEnsemble, x: &[f64]) -> Result<Vec<f64>> {
    ensemble.project(x)
}
