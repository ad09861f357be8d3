//! Strong local nondeterminism: the conditional variance of the field at a
//! point, given its values anywhere else in the regime, stays above a fixed
//! multiple of `rho_alpha(nearest distance)^2`. The ratio should be bounded
//! away from zero no matter how adversarial the conditioning set is.
//!
//!     cargo run --release --example slnd_diagnostics

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use spherefield::gaussian::slnd_ratio;
use spherefield::geometry::{point_at_distance, SpherePoint};
use spherefield::spectral::table::{CovarianceTable, TableConfig};
use spherefield::spectral::AngularPowerSpectrum;

fn main() -> spherefield::Result<()> {
    let spectrum = AngularPowerSpectrum::power_law(3.0)?;
    let table = CovarianceTable::build_full(
        &spectrum,
        &TableConfig {
            knots: 8192,
            degree: 100_000,
        },
    )?;
    let x = SpherePoint::new(1.1, 0.3)?;
    let mut rng = ChaCha12Rng::seed_from_u64(5);

    // Random conditioning sets at shrinking separations: m points placed
    // uniformly in the annulus between the separation and the regime bound.
    println!(
        "{:>10} {:>4} {:>16} {:>14} {:>8}",
        "separation", "m", "cond variance", "floor", "ratio"
    );
    let mut min_ratio = f64::INFINITY;
    for &sep in &[0.05, 0.02, 0.01, 0.005, 0.002, 0.001] {
        for m in [2usize, 4, 8] {
            let cond: Vec<SpherePoint> = (0..m)
                .map(|_| {
                    let dist = rng.random_range(sep..0.08);
                    let az = rng.random_range(0.0..std::f64::consts::TAU);
                    point_at_distance(&x, dist, az)
                })
                .collect::<spherefield::Result<_>>()?;
            let out = slnd_ratio(&table, spectrum.alpha(), &x, &cond)?;
            min_ratio = min_ratio.min(out.ratio);
            println!(
                "{sep:>10.3} {m:>4} {:>16.6e} {:>14.6e} {:>8.4}",
                out.conditional_variance, out.floor, out.ratio
            );
        }
    }
    println!("\nminimum ratio over all configurations: {min_ratio:.4}");
    println!("a clustered conditioning set lowers the conditional variance, but");
    println!("never below a constant fraction of rho^2 at the nearest distance.");
    Ok(())
}
