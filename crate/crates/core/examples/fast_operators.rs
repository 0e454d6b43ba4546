//! Fast Walsh-Hadamard, simplex and HD products checked against dense matrices.
use std::time::Instant;

use simrf::linalg::{fwht, hd_apply, simplex_apply, simplex_matrix, HdProduct, Matrix};
use simrf::rng::RngStream;

fn max_dev(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn main() -> simrf::Result<()> {
    let d = 1024;
    let x: Vec<f64> = (0..d).map(|i| ((i * 7919) % 101) as f64 / 50.0 - 1.0).collect();

    let h = Matrix::from_fn(d, d, |i, j| {
        let s = if (i & j).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        s / (d as f64).sqrt()
    });
    println!("fwht    dev {:.1e}", max_dev(&fwht(&x, true)?, &h.matvec(&x)?));

    let s = simplex_matrix(d)?;
    println!("simplex dev {:.1e}", max_dev(&simplex_apply(&x)?, &s.matvec(&x)?));

    let hd = HdProduct::sample(d, 3, &RngStream::new(7))?;
    let dense = hd.to_dense();
    println!("hd3     dev {:.1e}", max_dev(&hd_apply(&x, &hd)?, &dense.matvec(&x)?));

    let reps = 200;
    let t = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(hd_apply(&x, &hd)?);
    }
    let fast = t.elapsed();
    let t = Instant::now();
    for _ in 0..reps {
        std::hint::black_box(dense.matvec(&x)?);
    }
    let slow = t.elapsed();
    println!("hd3 {:?} per apply, dense {:?}", fast / reps, slow / reps);
    Ok(())
}
