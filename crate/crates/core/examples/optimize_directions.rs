//! Numerically minimise conformity over directions for fixed norms.
use simrf::analytics::{conformity_empirical, SeriesControl};
use simrf::linalg::{dot, norm};
use simrf::optimizer::{optimize_block, OptimizerSettings};
use simrf::rng::RngStream;

fn main() -> simrf::Result<()> {
    let d = 4;
    let settings = OptimizerSettings::default();
    let (norms, opt) = optimize_block(d, 1.0, &settings, &RngStream::new(9))?;
    println!("norms {norms:.3?}");
    println!(
        "rho {:.6} (restart {}, {} iterations, converged {})",
        opt.rho, opt.restart, opt.iterations, opt.converged
    );
    let mut vectors = opt.directions.clone();
    vectors.scale_rows(&norms);
    let check = conformity_empirical(&vectors, 1.0, SeriesControl::default())?;
    println!("recomputed rho {check:.6}");
    for i in 0..d {
        for j in 0..i {
            let (a, b) = (opt.directions.row(i), opt.directions.row(j));
            println!("cos({i},{j}) = {:+.4}", dot(a, b) / (norm(a) * norm(b)));
        }
    }
    Ok(())
}
