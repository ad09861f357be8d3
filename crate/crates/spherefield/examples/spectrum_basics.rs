//! Build angular power spectra and inspect the derived model quantities:
//! the normalization, the variogram rate `rho_alpha`, and the exponents
//! `beta`, `eta`, `gamma0` that govern the local-time results.
//!
//!     cargo run --release --example spectrum_basics

use spherefield::spectral::{AngularPowerSpectrum, ModelParams};

fn main() -> spherefield::Result<()> {
    let spectrum = AngularPowerSpectrum::power_law(3.0)?;
    println!("power-law spectrum, alpha = {}", spectrum.alpha());
    println!("  normalization c      = {:.6}", spectrum.normalization());
    println!("  total mass sum C_l(2l+1)/4pi = {:.6}", spectrum.total_mass());
    println!("  C_l at l = 1, 10, 100, 1000:");
    for l in [1u32, 10, 100, 1000] {
        println!("    C_{l:<5} = {:.6e}", spectrum.c_ell(l));
    }

    // The variogram scales like rho_alpha(r)^2 = r^(alpha - 2); doubling r
    // multiplies the rate by 2^((alpha - 2) / 2).
    println!("\nrho_alpha(r) across alpha:");
    println!("  {:>6} {:>12} {:>12} {:>12}", "alpha", "r=0.01", "r=0.02", "ratio");
    for alpha in [2.2, 2.5, 3.0, 3.5, 3.8] {
        let spec = AngularPowerSpectrum::power_law(alpha)?;
        let params = ModelParams::new(spec, 1, 0.1)?;
        let a = params.rho(0.01);
        let b = params.rho(0.02);
        println!("  {alpha:>6} {a:>12.6} {b:>12.6} {:>12.6}", b / a);
    }

    // Local-time exponents for a few (alpha, d) pairs inside the regime
    // beta = 4 - (alpha - 2) d > 0.
    println!("\nderived exponents (gamma = 0.4):");
    println!(
        "  {:>6} {:>3} {:>8} {:>8} {:>8} {:>14}",
        "alpha", "d", "beta", "eta", "gamma0", "chung_mod(.01)"
    );
    for (alpha, d) in [(3.0, 1), (3.0, 2), (2.5, 1), (2.5, 2), (3.5, 1), (2.2, 3)] {
        let spec = AngularPowerSpectrum::power_law(alpha)?;
        let params = ModelParams::new(spec, d, 0.4)?;
        println!(
            "  {alpha:>6} {d:>3} {:>8.3} {:>8.3} {:>8.3} {:>14.6e}",
            params.beta(),
            params.eta(),
            params.gamma0(),
            params.chung_modulus(0.01)?
        );
    }

    // d = 4 at alpha = 3 violates beta > 0 and is rejected.
    let spec = AngularPowerSpectrum::power_law(3.0)?;
    match ModelParams::new(spec, 4, 0.4) {
        Err(err) => println!("\nrejected d = 4 at alpha = 3: {err}"),
        Ok(_) => unreachable!("beta = 0 must be rejected"),
    }
    Ok(())
}
