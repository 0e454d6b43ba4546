//! Kernel regression classification on a synthetic set with tuned bandwidth.
use simrf::blocks::CouplingScheme;
use simrf::experiments::{classification_experiment, synthetic_wifi_like, tune_sigma, ClassificationConfig};
use simrf::features::FeatureMapKind;
use simrf::rng::RngStream;

fn main() -> simrf::Result<()> {
    let ds = synthetic_wifi_like(0)?;
    let stream = RngStream::new(42);
    let grid = [0.25, 0.5, 1.0, 2.0];
    let tuning = tune_sigma(&ds.train(), &ds.validation(), &grid, CouplingScheme::IID, 10 * ds.dim(), &stream.derive(1))?;
    println!("sigma {}", tuning.sigma);

    let config = ClassificationConfig {
        schemes: vec![CouplingScheme::IID, CouplingScheme::ORF, CouplingScheme::SIMRF, CouplingScheme::SIMRF_PLUS],
        m_grid: vec![ds.dim()],
        trials: 100,
        sigma: tuning.sigma,
        map: FeatureMapKind::Prf,
    };
    let report = classification_experiment(&ds, &config, &stream)?;
    for s in &report.statistics {
        println!("{:<8} m={:<3} accuracy {:.4} +- {:.4}", s.scheme, s.m, s.mean, s.se);
    }
    Ok(())
}
