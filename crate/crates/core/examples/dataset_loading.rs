//! Load a CSV dataset (path as first argument) or fall back to a synthetic one.
use simrf::experiments::{load_dataset, synthetic_banknote_like, CsvOptions};

fn main() -> simrf::Result<()> {
    let ds = match std::env::args().nth(1) {
        Some(path) => load_dataset(&path, &CsvOptions { standardize: true, ..CsvOptions::default() })?,
        None => synthetic_banknote_like(0)?,
    };
    println!("{}: {} points, d={}, classes {:?}", ds.name, ds.len(), ds.dim(), ds.class_names);
    println!(
        "train {} / validation {} / test {}",
        ds.train().len(),
        ds.validation().len(),
        ds.test().len()
    );
    let padded = ds.zero_padded(ds.dim().next_power_of_two())?;
    println!("zero-padded to d={}", padded.dim());
    Ok(())
}
