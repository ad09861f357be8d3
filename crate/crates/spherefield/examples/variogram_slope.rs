//! Fit the log-log slope of the variogram over a shrinking angle ladder and
//! compare with the predicted exponent `alpha - 2`.
//!
//!     cargo run --release --example variogram_slope

use spherefield::fit::ols_line;
use spherefield::spectral::{variogram_certified, AngularPowerSpectrum, TruncationPolicy};

fn main() -> spherefield::Result<()> {
    let thetas: Vec<f64> = (0..12)
        .map(|i| 1e-3 * (2e-2f64 / 1e-3).powf(i as f64 / 11.0))
        .collect();
    let policy = TruncationPolicy::absolute(1e-7);

    println!("{:>6} {:>10} {:>10} {:>14}", "alpha", "slope", "alpha-2", "max cert err");
    for alpha in [2.3, 2.5, 3.0, 3.5, 3.7] {
        let spectrum = AngularPowerSpectrum::power_law(alpha)?;
        let mut xs = Vec::with_capacity(thetas.len());
        let mut ys = Vec::with_capacity(thetas.len());
        let mut worst_err: f64 = 0.0;
        for &theta in &thetas {
            let (v, bound) = variogram_certified(&spectrum, theta, &policy)?;
            xs.push(theta.ln());
            ys.push(v.ln());
            worst_err = worst_err.max(bound);
        }
        let fit = ols_line(&xs, &ys)?;
        println!(
            "{alpha:>6} {:>10.5} {:>10.5} {worst_err:>14.2e}",
            fit.slope,
            alpha - 2.0
        );
    }
    println!("\nwhere the requested tolerance is unreachable below the degree cap");
    println!("(low alpha), the certified column reports the achievable bound the");
    println!("sum was actually taken at.");
    Ok(())
}
