//! Seeded, splittable random streams and the basic samplers built on them.
//!
//! A [`RngStream`] is a `(seed, stream-id)` pair. Materialising it with
//! [`RngStream::generator`] always yields the same ChaCha8 sequence, so any
//! function that takes a stream is pure. Independent sub-streams are derived
//! by hashing a tag into the stream id, which lets parallel trials and the
//! separate norm / rotation draws of one block stay reproducible regardless
//! of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    /// Child stream identified by `tag`. Distinct tags give independent streams.
    pub fn derive(&self, tag: u64) -> Self {
        let stream = splitmix64(self.stream.rotate_left(23) ^ splitmix64(tag));
        Self {
            seed: self.seed,
            stream,
        }
    }

    /// Stream for trial number `index` of a Monte Carlo loop.
    pub fn trial(&self, index: u64) -> Self {
        self.derive(0x7472_6961_6c00_0000 ^ index)
    }

    pub fn generator(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Fill a `rows x cols` matrix with i.i.d. standard normal draws.
pub fn gaussian_matrix_from<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(rng))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("shape matches by construction")
}

pub fn sample_gaussian_matrix(rows: usize, cols: usize, stream: &RngStream) -> Result<Matrix> {
    if rows == 0 || cols == 0 {
        return Err(Error::arg(format!(
            "gaussian matrix needs positive shape, got {rows}x{cols}"
        )));
    }
    Ok(gaussian_matrix_from(rows, cols, &mut stream.generator()))
}

/// `n` draws from the chi distribution with `d` degrees of freedom.
pub fn chi_from<R: Rng + ?Sized>(d: usize, n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if d == 0 {
        return Err(Error::arg("chi distribution needs d >= 1"));
    }
    let dist = ChiSquared::new(d as f64).map_err(|e| Error::arg(e.to_string()))?;
    Ok((0..n)
        .map(|_| loop {
            let s: f64 = dist.sample(rng);
            if s > 0.0 {
                break s.sqrt();
            }
        })
        .collect())
}

pub fn sample_chi(d: usize, n: usize, stream: &RngStream) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::arg("sample_chi needs n >= 1"));
    }
    chi_from(d, n, &mut stream.generator())
}

/// `n` independent ±1 entries with equal probability.
pub fn rademacher_from<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Uniform unit vector in `R^d`.
pub fn unit_vector_from<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let norm = crate::linalg::norm(&v);
        if norm > 1e-300 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}
