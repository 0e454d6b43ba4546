//! Estimate a Gaussian kernel value with each coupling and compare MSEs.
use simrf::blocks::{build_ensemble, CouplingScheme};
use simrf::experiments::{monte_carlo_mse, pair_with_v};
use simrf::features::{estimate_kernel, gaussian_kernel, FeatureMapKind};
use simrf::rng::RngStream;

fn main() -> simrf::Result<()> {
    let d = 16;
    let pair = pair_with_v(d, 1.0)?;
    let stream = RngStream::new(3);
    println!("exact kernel {:.6}", gaussian_kernel(&pair));
    for name in ["iid", "orf", "simrf", "simrf+", "simrf-hd3"] {
        let scheme: CouplingScheme = name.parse()?;
        let one = estimate_kernel(&pair, &build_ensemble(scheme, d, d, &stream)?, FeatureMapKind::Prf)?;
        let mc = monte_carlo_mse(&pair, scheme, FeatureMapKind::Prf, d, 20_000, &stream)?;
        println!(
            "{name:<10} one draw {one:.6}  mse {:.3e} +- {:.1e}",
            mc.mse(),
            mc.squared_error.se
        );
    }
    Ok(())
}
