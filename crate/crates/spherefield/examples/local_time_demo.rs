//! Estimate the local time of a field realization on a small disk. The
//! field is pinned at the disk center (the increment Z(y) = T(y) - T(x0)),
//! sampled exactly on a quadrature grid, and histogrammed over levels. The
//! total histogram mass reproduces the disk area, and the occupation
//! measure of a value box matches the mass of the aligned bins.
//!
//!     cargo run --release --example local_time_demo

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use spherefield::gaussian::{build_increment_covariance, CovarianceMatrix};
use spherefield::geometry::{fibonacci_grid_in_disk, Disk, SpherePoint};
use spherefield::local_time::{
    local_time_histogram, occupation_measure, LevelBox, LevelGrid,
};
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

    let disk = Disk::new(SpherePoint::new(0.9, 0.2)?, 0.02)?;
    let grid = fibonacci_grid_in_disk(&disk, 400)?;
    let pinned = build_increment_covariance(&table, &disk.center, &grid.points)?;
    let cov = CovarianceMatrix::new(pinned)?;

    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let values = cov.sample(&mut rng);
    let components = vec![values];

    let h = 0.02;
    let level_grid = LevelGrid::new(h, 1, 16.0)?;
    let est = local_time_histogram(&level_grid, &components, &grid.weights)?;

    println!(
        "disk radius 0.02, {} nodes, bin width {h}; histogram mass {:.8} vs disk area {:.8}",
        grid.len(),
        est.total_weight(),
        disk.area()
    );

    println!("\nlocal time density around the origin level:");
    println!("{:>8} {:>12}", "level", "density");
    for k in -4i64..=4 {
        let level = k as f64 * h;
        println!("{level:>8.2} {:>12.6}", est.density_at(&[level])?);
    }
    println!("peak density {:.6} at key {:?}", est.max_density().1, est.max_density().0);

    // Occupation identity: bins are centered at multiples of h, so the box
    // [-2.5h, 1.5h) is exactly the union of the bins with keys -2..=1 and
    // the occupation measure must equal their summed mass.
    let bbox = LevelBox::new(vec![-2.5 * h], vec![1.5 * h])?;
    let occ = occupation_measure(&components, &grid.weights, &bbox)?;
    let mut histo_mass = 0.0;
    for (key, mass) in est.bins() {
        if key[0] >= -2 && key[0] <= 1 {
            histo_mass += mass;
        }
    }
    println!(
        "\noccupation of [-2.5h, 1.5h): {occ:.8}; the four aligned bins sum to {histo_mass:.8}"
    );
    Ok(())
}
