//! Frobenius error of PRF Gram matrix estimates as the feature count grows.
use simrf::blocks::CouplingScheme;
use simrf::experiments::{gaussian_points, gram_frobenius};
use simrf::rng::RngStream;

fn main() -> simrf::Result<()> {
    let stream = RngStream::new(42);
    let points = gaussian_points(32, 16, 0.1, &stream.derive(0))?;
    for m in [8, 16, 32, 64] {
        let mut line = format!("m={m:<3}");
        for scheme in [CouplingScheme::IID, CouplingScheme::ORF, CouplingScheme::SIMRF] {
            let e = gram_frobenius(&points, scheme, m, 100, &stream.derive(1))?;
            line.push_str(&format!("  {}={:.4}+-{:.4}", scheme, e.mean, e.se));
        }
        println!("{line}");
    }
    Ok(())
}
