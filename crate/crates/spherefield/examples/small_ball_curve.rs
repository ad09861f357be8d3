//! Small-ball probabilities of the pinned field on shrinking disks: the
//! probability that the whole disk stays within `eps` of the center value
//! decays like `exp(-c r^2 / eps^{4/(alpha-2)})`. Plotting `-log P` against
//! that predictor across disks and ball sizes collapses onto one line
//! through the origin.
//!
//!     cargo run --release --example small_ball_curve

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use spherefield::fit::{fit_through_origin, quantile};
use spherefield::gaussian::{build_increment_covariance, CovarianceMatrix};
use spherefield::geometry::{fibonacci_grid_in_disk, Disk, SpherePoint};
use spherefield::spectral::table::{CovarianceTable, TableConfig};
use spherefield::spectral::AngularPowerSpectrum;

fn main() -> spherefield::Result<()> {
    let alpha = 3.0;
    let spectrum = AngularPowerSpectrum::power_law(alpha)?;
    let table = CovarianceTable::build_full(
        &spectrum,
        &TableConfig {
            knots: 8192,
            degree: 100_000,
        },
    )?;
    let center = SpherePoint::new(1.0, 0.0)?;
    let radii = [0.02, 0.01, 0.005];
    let replicates = 6000;
    let exponent = 4.0 / (alpha - 2.0);

    let mut xs = Vec::new();
    let mut ys = Vec::new();
    println!(
        "{:>8} {:>10} {:>8} {:>10} {:>12}",
        "radius", "eps", "p_hat", "-log p", "predictor"
    );
    for &r in &radii {
        let disk = Disk::new(center.clone(), r)?;
        let grid = fibonacci_grid_in_disk(&disk, 150)?;
        let cov = CovarianceMatrix::new(build_increment_covariance(
            &table, &center, &grid.points,
        )?)?;
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let sups: Vec<f64> = (0..replicates)
            .map(|_| {
                cov.sample(&mut rng)
                    .iter()
                    .fold(0.0f64, |m, v| m.max(v.abs()))
            })
            .collect();

        // Place the balls at fixed quantiles of the sup distribution so each
        // radius probes the same probability depths.
        for &q in &[0.03, 0.1, 0.3, 0.6] {
            let eps = quantile(&sups, q);
            let hits = sups.iter().filter(|&&s| s <= eps).count();
            let p = hits as f64 / replicates as f64;
            let y = -p.ln();
            let x = r * r / eps.powf(exponent);
            println!("{r:>8.3} {eps:>10.5} {p:>8.4} {y:>10.4} {x:>12.5}");
            xs.push(x);
            ys.push(y);
        }
    }
    let fit = fit_through_origin(&xs, &ys)?;
    println!(
        "\nthrough-origin fit: -log P = {:.3} * predictor, uncentered R^2 = {:.4}",
        fit.slope, fit.r_squared_uncentered
    );
    Ok(())
}
