//! Conformity of IID, ORF, SimRF, SimRF+ and the optimiser on one norm draw.
use simrf::optimizer::{conformity_comparison, OptimizerSettings};
use simrf::rng::RngStream;

fn main() -> simrf::Result<()> {
    let settings = OptimizerSettings::default();
    let rows = conformity_comparison(6, 1.0, &RngStream::new(42), true, &settings)?;
    for r in rows {
        let analytic = r.analytic.map(|a| format!("{a:.6}")).unwrap_or_else(|| "-".into());
        println!("{:<10} analytic {:<10} empirical {:.6}", r.scheme, analytic, r.empirical);
    }
    Ok(())
}
