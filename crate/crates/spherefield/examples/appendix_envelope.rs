//! Partial sums of `sigma_l (1 - P_l(cos theta))` against the `L^{4-alpha}
//! theta^2` rate, and true series tails against the analytic envelope
//! `2 K0 / (alpha - 2) * U^{2-alpha}`.
//!
//!     cargo run --release --example appendix_envelope

use spherefield::spectral::tail::appendix_tail_envelope;
use spherefield::spectral::{appendix_partial_sum, AngularPowerSpectrum};

fn main() -> spherefield::Result<()> {
    let alpha = 3.0;
    let spectrum = AngularPowerSpectrum::power_law(alpha)?;

    println!("partial sums at alpha = {alpha}; ratio = sum / (L^(4-alpha) theta^2)");
    println!("{:>8} {:>10} {:>14} {:>10}", "L", "theta", "partial sum", "ratio");
    for &l_top in &[100u32, 1000, 10_000] {
        for &theta in &[1e-5, 1e-4, 1e-3] {
            if f64::from(l_top) * theta > 1.0 {
                continue;
            }
            let sum = appendix_partial_sum(&spectrum, l_top, theta)?;
            let rate = f64::from(l_top).powf(4.0 - alpha) * theta * theta;
            println!("{l_top:>8} {theta:>10.0e} {sum:>14.6e} {:>10.4}", sum / rate);
        }
    }

    // The spectral tail mass stays below the analytic envelope at every
    // truncation degree, which is what certifies the truncation error.
    println!("\ntail mass beyond U against 2 K0 / (alpha - 2) * U^(2-alpha)");
    println!("{:>8} {:>14} {:>14} {:>8}", "U", "tail mass", "envelope", "covered");
    for &u in &[100u32, 1000, 10_000] {
        let tail = spectrum.mass_tail(u + 1);
        let envelope = appendix_tail_envelope(&spectrum, u);
        println!(
            "{u:>8} {tail:>14.6e} {envelope:>14.6e} {:>8}",
            tail <= envelope
        );
    }
    Ok(())
}
