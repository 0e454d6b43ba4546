//! Dense matrices and the structured operators used by coupled projections:
//! Haar-random rotations, the fast Walsh–Hadamard transform, HD-products and
//! the simplex projection `S`.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{gaussian_matrix_from, rademacher_from, RngStream};

/// Row-major dense matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::arg(format!(
                "matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Range("matrix entries must be finite".into()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(rows: usize, cols: usize, mut f: F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::arg("ragged rows"));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    /// `self * x`.
    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: x.len(),
            });
        }
        Ok(self.row_iter().map(|r| dot(r, x)).collect())
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0.0 {
                    continue;
                }
                for (o, b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Multiply row `i` by `scales[i]`.
    pub fn scale_rows(&mut self, scales: &[f64]) {
        for (i, &s) in scales.iter().enumerate().take(self.rows) {
            self.row_mut(i).iter_mut().for_each(|x| *x *= s);
        }
    }

    /// Keep only the first `n` rows.
    pub fn truncate_rows(&mut self, n: usize) {
        if n < self.rows {
            self.rows = n;
            self.data.truncate(n * self.cols);
        }
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// `max |(A^T A - I)_{ij}|` for square `A`.
    pub fn orthogonality_defect(&self) -> f64 {
        let gram = self.transpose().matmul(self).expect("square");
        gram.max_abs_diff(&Matrix::identity(self.cols))
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.rows, self.cols, &self.data)
    }

    fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        Self::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Haar-distributed orthogonal matrix from the QR factorisation of a Gaussian
/// matrix, with the columns of `Q` sign-corrected so that `R` has a positive
/// diagonal.
pub fn haar_orthogonal_from<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Result<Matrix> {
    if d == 0 {
        return Err(Error::arg("haar_orthogonal needs d >= 1"));
    }
    loop {
        let g = gaussian_matrix_from(d, d, rng).to_nalgebra();
        let scale = g.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let qr = g.qr();
        let r = qr.r();
        let diag: Vec<f64> = (0..d).map(|i| r[(i, i)]).collect();
        // Rank-deficient draws have probability zero; redraw if one shows up.
        if diag.iter().any(|x| x.abs() <= 1e-12 * scale) {
            continue;
        }
        let mut q = qr.q();
        for (j, s) in diag.iter().enumerate() {
            if *s < 0.0 {
                q.column_mut(j).neg_mut();
            }
        }
        return Ok(Matrix::from_nalgebra(&q));
    }
}

pub fn haar_orthogonal(d: usize, stream: &RngStream) -> Result<Matrix> {
    haar_orthogonal_from(d, &mut stream.generator())
}

pub fn is_power_of_two(n: usize) -> bool {
    n != 0 && n & (n - 1) == 0
}

/// In-place Walsh–Hadamard transform. With `normalized` the result is `H x`
/// for the orthogonal (symmetric, involutive) Hadamard matrix; otherwise the
/// unscaled ±1 transform.
pub fn fwht_in_place(x: &mut [f64], normalized: bool) -> Result<()> {
    let n = x.len();
    if !is_power_of_two(n) {
        return Err(Error::arg(format!(
            "fwht needs a power-of-two length, got {n}"
        )));
    }
    let mut h = 1;
    while h < n {
        for block in x.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (u, v) = (*a, *b);
                *a = u + v;
                *b = u - v;
            }
        }
        h *= 2;
    }
    if normalized {
        let s = 1.0 / (n as f64).sqrt();
        x.iter_mut().for_each(|v| *v *= s);
    }
    Ok(())
}

/// Walsh–Hadamard transform of a copy of `x`.
pub fn fwht(x: &[f64], normalized: bool) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    fwht_in_place(&mut y, normalized)?;
    Ok(y)
}

/// Product `H D_1 H D_2 ... H D_k` of normalised Hadamard matrices and
/// Rademacher diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct HdProduct {
    dim: usize,
    diagonals: Vec<Vec<f64>>,
}

impl HdProduct {
    pub fn new(dim: usize, diagonals: Vec<Vec<f64>>) -> Result<Self> {
        if !is_power_of_two(dim) {
            return Err(Error::arg(format!("HD-product dim {dim} is not a power of two")));
        }
        for diag in &diagonals {
            if diag.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: diag.len(),
                });
            }
            if diag.iter().any(|&s| s != 1.0 && s != -1.0) {
                return Err(Error::arg("HD-product diagonals must be +-1"));
            }
        }
        Ok(Self { dim, diagonals })
    }

    pub fn sample_from<R: Rng + ?Sized>(dim: usize, k: usize, rng: &mut R) -> Result<Self> {
        let diagonals = (0..k).map(|_| rademacher_from(dim, rng)).collect();
        Self::new(dim, diagonals)
    }

    pub fn sample(dim: usize, k: usize, stream: &RngStream) -> Result<Self> {
        Self::sample_from(dim, k, &mut stream.generator())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diagonals(&self) -> &[Vec<f64>] {
        &self.diagonals
    }

    pub fn apply_in_place(&self, x: &mut [f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        for diag in self.diagonals.iter().rev() {
            x.iter_mut().zip(diag).for_each(|(v, s)| *v *= s);
            fwht_in_place(x, true)?;
        }
        Ok(())
    }

    /// The explicit `dim x dim` matrix, column by column.
    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.dim, self.dim);
        let mut e = vec![0.0; self.dim];
        for j in 0..self.dim {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            self.apply_in_place(&mut e).expect("dim matches");
            for (i, v) in e.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        m
    }
}

pub fn hd_apply(x: &[f64], hd: &HdProduct) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    hd.apply_in_place(&mut y)?;
    Ok(y)
}

/// The `d x d` simplex projection: its rows are unit vectors pointing at the
/// vertices of a regular simplex in the first `d - 1` coordinates.
pub fn simplex_matrix(d: usize) -> Result<Matrix> {
    if d < 2 {
        return Err(Error::arg(format!("simplex needs d >= 2, got {d}")));
    }
    let df = d as f64;
    let diag = (df / (df - 1.0)).sqrt();
    let shift = (df.sqrt() + 1.0) / (df - 1.0).powf(1.5);
    let last = 1.0 / (df - 1.0).sqrt();
    Ok(Matrix::from_fn(d, d, |i, j| {
        if j == d - 1 {
            0.0
        } else if i == d - 1 {
            last
        } else if i == j {
            diag - shift
        } else {
            -shift
        }
    }))
}

/// `S x` in O(d) without forming `S`.
pub fn simplex_apply_in_place(x: &mut [f64]) -> Result<()> {
    let d = x.len();
    if d < 2 {
        return Err(Error::arg(format!("simplex needs d >= 2, got {d}")));
    }
    let df = d as f64;
    let head = &x[..d - 1];
    let last = head.iter().sum::<f64>() / (df - 1.0).sqrt();
    let diag = (df / (df - 1.0)).sqrt();
    let shift = (df.sqrt() + 1.0) / (df - 1.0) * last;
    for v in &mut x[..d - 1] {
        *v = diag * *v - shift;
    }
    x[d - 1] = last;
    Ok(())
}

pub fn simplex_apply(x: &[f64]) -> Result<Vec<f64>> {
    let mut y = x.to_vec();
    simplex_apply_in_place(&mut y)?;
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::MeanSe;

    /// Dense normalised Hadamard matrix from the block recursion.
    fn hadamard_dense(n: usize) -> Matrix {
        if n == 1 {
            return Matrix::identity(1);
        }
        let h = hadamard_dense(n / 2);
        let s = 1.0 / 2f64.sqrt();
        Matrix::from_fn(n, n, |i, j| {
            let (bi, bj) = (i / (n / 2), j / (n / 2));
            let v = h.get(i % (n / 2), j % (n / 2));
            if bi == 1 && bj == 1 {
                -s * v
            } else {
                s * v
            }
        })
    }

    fn random_vec(d: usize, seed: u64) -> Vec<f64> {
        sample_gaussian(d, seed)
    }

    fn sample_gaussian(d: usize, seed: u64) -> Vec<f64> {
        crate::rng::sample_gaussian_matrix(1, d, &RngStream::new(seed))
            .unwrap()
            .as_slice()
            .to_vec()
    }

    #[test]
    fn matrix_shape_checked() {
        assert!(Matrix::from_vec(2, 2, vec![1.0; 3]).is_err());
        assert!(Matrix::from_vec(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn haar_one_dimensional_signs() {
        let s = RngStream::new(1);
        let mut rng = s.generator();
        let n = 10_000;
        let plus = (0..n)
            .filter(|_| haar_orthogonal_from(1, &mut rng).unwrap().get(0, 0) > 0.0)
            .count();
        let frac = plus as f64 / n as f64;
        assert!((frac - 0.5).abs() < 0.02, "frac {frac}");
    }

    #[test]
    fn haar_is_orthogonal() {
        for d in [2, 3, 17, 64, 200] {
            let r = haar_orthogonal(d, &RngStream::new(d as u64)).unwrap();
            assert!(r.orthogonality_defect() < 1e-10, "d={d}");
        }
    }

    #[test]
    fn haar_first_row_is_isotropic() {
        let d = 4;
        let n = 100_000;
        let mut rng = RngStream::new(9).generator();
        let mut sums = vec![Vec::with_capacity(n); d];
        for _ in 0..n {
            let r = haar_orthogonal_from(d, &mut rng).unwrap();
            for (j, s) in sums.iter_mut().enumerate() {
                s.push(r.get(0, j));
            }
        }
        for s in &sums {
            let m = MeanSe::of(s);
            assert!(m.mean.abs() < 0.02, "mean {}", m.mean);
            // Each coordinate of a uniform unit vector has variance 1/d.
            assert!((m.sd * m.sd - 1.0 / d as f64).abs() < 0.01);
        }
    }

    #[test]
    fn fwht_examples() {
        let y = fwht(&[1.0, 0.0], true).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((y[0] - s).abs() < 1e-15 && (y[1] - s).abs() < 1e-15);
        assert!(fwht(&[1.0, 2.0, 3.0], true).is_err());
    }

    #[test]
    fn fwht_is_involution_and_matches_dense() {
        for d in [1, 2, 4, 8, 16, 64, 256] {
            let h = hadamard_dense(d);
            for t in 0..20 {
                let x = random_vec(d, 100 + t);
                let fast = fwht(&x, true).unwrap();
                let dense = h.matvec(&x).unwrap();
                for (a, b) in fast.iter().zip(&dense) {
                    assert!((a - b).abs() < 1e-12);
                }
                let back = fwht(&fast, true).unwrap();
                for (a, b) in back.iter().zip(&x) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn hd_product_matches_dense_and_preserves_norm() {
        let ones = HdProduct::new(16, vec![vec![1.0; 16]]).unwrap();
        let x = random_vec(16, 1);
        assert_eq!(hd_apply(&x, &ones).unwrap(), fwht(&x, true).unwrap());

        let hd = HdProduct::sample(8, 3, &RngStream::new(4)).unwrap();
        let h = hadamard_dense(8);
        let mut dense = Matrix::identity(8);
        for diag in hd.diagonals() {
            let dmat = Matrix::from_fn(8, 8, |i, j| if i == j { diag[i] } else { 0.0 });
            dense = dense.matmul(&h).unwrap().matmul(&dmat).unwrap();
        }
        let x = random_vec(8, 2);
        let fast = hd_apply(&x, &hd).unwrap();
        let slow = dense.matvec(&x).unwrap();
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12);
        }

        let hd = HdProduct::sample(64, 3, &RngStream::new(5)).unwrap();
        let x = random_vec(64, 3);
        let y = hd_apply(&x, &hd).unwrap();
        assert!((norm(&y) - norm(&x)).abs() < 1e-10 * norm(&x));
        assert!(hd_apply(&x[..10], &hd).is_err());
    }

    #[test]
    fn hd_rejects_bad_input() {
        assert!(HdProduct::new(6, vec![]).is_err());
        assert!(HdProduct::new(2, vec![vec![1.0, 0.5]]).is_err());
        assert!(HdProduct::new(2, vec![vec![1.0]]).is_err());
    }

    #[test]
    fn simplex_two_dimensional() {
        let s = simplex_matrix(2).unwrap();
        assert!((s.get(0, 0) + 1.0).abs() < 1e-12 && s.get(0, 1) == 0.0);
        assert!((s.get(1, 0) - 1.0).abs() < 1e-12 && s.get(1, 1) == 0.0);
        assert!(simplex_matrix(1).is_err());
        assert!(simplex_apply(&[1.0]).is_err());
    }

    #[test]
    fn simplex_geometry() {
        for d in [2, 3, 5, 16, 64, 257] {
            let s = simplex_matrix(d).unwrap();
            let target = -1.0 / (d as f64 - 1.0);
            let mut total = vec![0.0; d];
            for i in 0..d {
                assert!((norm(s.row(i)) - 1.0).abs() < 1e-12);
                assert_eq!(s.get(i, d - 1), 0.0);
                for j in 0..i {
                    assert!((dot(s.row(i), s.row(j)) - target).abs() < 1e-12);
                }
                total.iter_mut().zip(s.row(i)).for_each(|(t, v)| *t += v);
            }
            assert!(norm(&total) < 1e-10);
        }
    }

    #[test]
    fn simplex_apply_matches_dense() {
        let mut e = vec![0.0; 5];
        e[4] = 1.0;
        assert!(simplex_apply(&e).unwrap().iter().all(|v| *v == 0.0));
        for (d, tol) in [(3, 1e-12), (8, 1e-12), (257, 1e-10)] {
            let s = simplex_matrix(d).unwrap();
            let x = if d == 3 { vec![1.0, 1.0, 0.0] } else { random_vec(d, d as u64) };
            let fast = simplex_apply(&x).unwrap();
            let dense = s.matvec(&x).unwrap();
            for (a, b) in fast.iter().zip(&dense) {
                assert!((a - b).abs() < tol);
            }
        }
    }
}
