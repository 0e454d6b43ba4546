//! Closed-form PRF MSE ratios against IID across v, plus the small-v limit.
use simrf::analytics::{simrf_small_v_prefactor, SeriesControl};
use simrf::experiments::mse_ratio_curve;

fn main() -> simrf::Result<()> {
    let d = 64;
    let grid: Vec<f64> = (0..=10).map(|i| i as f64 * 0.2).collect();
    println!("v      orf/iid   simrf/iid");
    for row in mse_ratio_curve(d, &grid, d, SeriesControl::default())? {
        println!("{:<6.2} {:<9.5} {:.5}", row.v, row.orf, row.simrf);
    }
    println!("small-v prefactor at d={d}: {:.6}", simrf_small_v_prefactor(d)?);
    Ok(())
}
