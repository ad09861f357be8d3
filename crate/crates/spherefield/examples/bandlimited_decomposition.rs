//! Split the field at the band `[L, U] = [B^-kappa1 / r, B^(1-kappa1) / r]`
//! and inspect the complement T - T^Delta: its increment scale over a disk
//! of radius r, the threshold `u*` above which the sup tail is controlled,
//! and the monotone effect of kappa1.
//!
//!     cargo run --release --example bandlimited_decomposition

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use spherefield::gaussian::{build_increment_covariance, CovKernel, CovarianceMatrix, DiffKernel};
use spherefield::geometry::{fibonacci_grid_in_disk, Disk, SpherePoint};
use spherefield::spectral::table::{CovarianceTable, TableConfig};
use spherefield::spectral::{AngularPowerSpectrum, BandKind, ModelParams};

fn main() -> spherefield::Result<()> {
    let spectrum = AngularPowerSpectrum::power_law(3.0)?;
    let params = ModelParams::new(spectrum.clone(), 1, 0.5)?;
    let config = TableConfig {
        knots: 8192,
        degree: 100_000,
    };
    let full = CovarianceTable::build_full(&spectrum, &config)?;
    let kappa1 = 0.5;
    let kappa2 = params.kappa2_default(kappa1);
    let kind = BandKind::LogLog;
    let center = SpherePoint::new(1.0, 0.0)?;

    println!("kappa1 = {kappa1}, kappa2 = {kappa2:.4} (default), B = (log log 1/r)^kappa2\n");
    println!(
        "{:>8} {:>8} {:>6} {:>6} {:>12} {:>12}",
        "radius", "B(r)", "L", "U", "compl C(0)", "u_base"
    );
    for &r in &[0.02, 0.01, 0.005] {
        let b = params.band_b(r, kind, kappa2)?;
        let (lo, hi) = params.band_limits(r, kappa1, kappa2, kind)?;
        let band = CovarianceTable::build_band(&spectrum, lo, hi, config.knots)?;
        let kernel = DiffKernel::new(&full, &band)?;

        let disk = Disk::new(center.clone(), r)?;
        let grid = fibonacci_grid_in_disk(&disk, 120)?;
        let inc = build_increment_covariance(&kernel, &center, &grid.points)?;
        let u_base = (inc.diagonal().mean()).sqrt();
        println!(
            "{r:>8.3} {b:>8.3} {lo:>6} {hi:>6} {:>12.6e} {u_base:>12.6e}",
            kernel.at_zero()
        );

        // One Monte Carlo tail readout at the largest radius.
        if r == 0.02 {
            let cov = CovarianceMatrix::new(inc)?;
            let mut rng = ChaCha12Rng::seed_from_u64(23);
            let reps = 4000;
            let sups: Vec<f64> = (0..reps)
                .map(|_| {
                    cov.sample(&mut rng)
                        .iter()
                        .fold(0.0f64, |m, v| m.max(v.abs()))
                })
                .collect();
            println!("  complement sup tail on the disk (r = {r}):");
            for mult in [1.0, 2.0, 3.0] {
                let u = mult * u_base;
                let p = sups.iter().filter(|&&s| s > u).count() as f64 / reps as f64;
                println!("    P(sup > {mult:.0} u_base) = {p:.4}");
            }
        }
    }

    println!("\nband limits widen as kappa1 falls (more of the field kept):");
    println!("{:>8} {:>14} {:>14}", "kappa1", "L..U at 0.01", "width");
    for k1 in [0.2, 0.3, 0.4, 0.5] {
        let k2 = params.kappa2_default(k1);
        let (lo, hi) = params.band_limits(0.01, k1, k2, kind)?;
        println!("{k1:>8} {:>14} {:>14}", format!("{lo}..{hi}"), hi - lo);
    }
    Ok(())
}
