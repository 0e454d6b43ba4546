//! Density of |w_i + w_j| for IID, orthogonal and simplex couplings.
use simrf::analytics::{pdf_wij_iid, pdf_wij_theta};

fn main() -> simrf::Result<()> {
    let d = 4;
    let cos_simplex = -1.0 / (d as f64 - 1.0);
    let top = 2.0 * ((d as f64).sqrt() + 3.0);
    println!("w      iid       orthogonal simplex");
    for i in 0..=20 {
        let w = top * i as f64 / 20.0;
        println!(
            "{w:<6.3} {:<9.5} {:<10.5} {:.5}",
            pdf_wij_iid(w, d)?,
            pdf_wij_theta(w, d, 0.0)?,
            pdf_wij_theta(w, d, cos_simplex)?
        );
    }
    Ok(())
}
